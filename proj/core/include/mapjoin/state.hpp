#pragma once

#include <Eigen/Core>
#include <compare>
#include <cstdint>
#include <functional>
#include <span>
#include <unordered_map>
#include <vector>

namespace mapjoin {

/// Map dimensionality tag.
enum class Dimension : std::uint8_t { D2 = 2, D3 = 3 };

/// Scalar length of a translation / feature block.
inline int trans_dim(Dimension d) { return d == Dimension::D2 ? 2 : 3; }

/// Scalar length of a rotation block.
inline int rot_dim(Dimension d) { return d == Dimension::D2 ? 1 : 3; }

/// Scalar length of a full pose block. Translation-only maps estimate known
/// headings as constants and carry no rotation components.
inline int pose_dim(Dimension d, bool translation_only = false) {
  return trans_dim(d) + (translation_only ? 0 : rot_dim(d));
}

enum class EntityKind : std::uint8_t { Pose = 0, Feature = 1 };

/// Identifies one pose or feature. Ids are globally stable: the same physical
/// entity has the same id in every map it appears in.
struct StateKey {
  EntityKind kind = EntityKind::Pose;
  int id = 0;

  friend auto operator<=>(const StateKey&, const StateKey&) = default;
};

inline StateKey pose_key(int id) { return StateKey{EntityKind::Pose, id}; }
inline StateKey feature_key(int id) { return StateKey{EntityKind::Feature, id}; }

struct StateKeyHash {
  std::size_t operator()(const StateKey& k) const {
    return std::hash<std::uint64_t>()((std::uint64_t(k.id) << 1) | std::uint64_t(k.kind));
  }
};

/// An ordered collection of keyed value blocks backed by one flat vector.
/// Pose blocks are 3/6-dimensional (2/3 in translation-only maps); feature
/// blocks are 2/3-dimensional, except the reduced entries a feature-defined
/// frame keeps for its axis features.
class StateVector {
 public:
  struct Entry {
    StateKey key;
    int offset = 0;
    int dim = 0;
  };

  StateVector() = default;

  /// Appends a block. Throws InvalidInputError on duplicate key or empty block.
  void add(StateKey key, const Eigen::VectorXd& block);

  int dim() const { return static_cast<int>(values_.size()); }
  int size() const { return static_cast<int>(entries_.size()); }
  bool empty() const { return entries_.empty(); }

  bool contains(StateKey key) const { return index_.count(key) > 0; }

  /// Throws MissingEntityError when the key is absent.
  const Entry& entry(StateKey key) const;
  int offset_of(StateKey key) const { return entry(key).offset; }
  int dim_of(StateKey key) const { return entry(key).dim; }

  Eigen::VectorXd block_of(StateKey key) const;
  void set_block(StateKey key, const Eigen::VectorXd& block);

  std::span<const Entry> entries() const { return entries_; }
  const Eigen::VectorXd& values() const { return values_; }
  Eigen::VectorXd& values() { return values_; }

  /// True when entries are in ascending key order (poses before features).
  bool is_sorted() const;

  /// Returns a copy with entries sorted ascending by key, plus the scalar
  /// permutation p with p[new_index] = old_index.
  std::pair<StateVector, std::vector<int>> sorted() const;

  std::vector<StateKey> keys() const;

  friend bool operator==(const StateVector& a, const StateVector& b);

 private:
  std::vector<Entry> entries_;
  std::unordered_map<StateKey, int, StateKeyHash> index_;
  Eigen::VectorXd values_;
};

}  // namespace mapjoin
