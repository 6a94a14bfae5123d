#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mapjoin/raw_data.hpp"
#include "mapjoin/state.hpp"

namespace mapjoin {

/// Synthetic scenario description. A fixed seed reproduces the dataset
/// byte for byte: sampling runs on a fully specified generator (mt19937_64
/// plus Box-Muller), never on implementation-defined distributions.
struct ScenarioConfig {
  Dimension dim = Dimension::D2;
  enum class Trajectory { Loop, Grid, SphereLike } trajectory = Trajectory::Loop;
  int pose_count = 50;
  double feature_density = 0.35;  // features per square (cubic) meter
  double sensor_range = 6.0;      // meters
  double step_length = 1.0;       // meters between consecutive poses

  double odom_trans_sigma = 0.02;  // meters
  double odom_rot_sigma = 0.004;   // radians
  double obs_sigma = 0.04;         // meters
  /// Scales the sampled noise without touching the information matrices;
  /// zero produces measurements exactly consistent with the truth.
  double noise_scale = 1.0;

  std::uint64_t seed = 1;
  int chunk_size = 5;  // new poses per local-map chunk
  bool translation_only = false;

  void validate() const;
};

struct Scenario {
  Dimension dim = Dimension::D2;
  bool translation_only = false;
  StateVector truth;  // all poses and features; the first pose is the origin
  std::vector<RawLocalData> chunks;
  std::vector<std::string> warnings;
};

/// Generates ground truth plus noisy per-chunk raw data. Every feature within
/// sensor range is observed from every pose; consecutive chunks share their
/// boundary pose; a chunk that ends up without observations is densified with
/// extra features and flagged in warnings.
Scenario generate(const ScenarioConfig& config);

/// Deterministic scalar sampler: uniform doubles from the raw engine stream
/// and Gaussians through Box-Muller.
class Sampler {
 public:
  explicit Sampler(std::uint64_t seed) : state_(seed ? seed : 0x9e3779b97f4a7c15ull) {}

  double uniform();  // [0, 1)
  double uniform(double lo, double hi);
  double gaussian();

 private:
  std::uint64_t next_raw();
  std::uint64_t state_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace mapjoin
