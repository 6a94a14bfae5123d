#include "mapjoin/sim.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "mapjoin/angle.hpp"
#include "mapjoin/errors.hpp"
#include "mapjoin/rotation.hpp"

namespace mapjoin {

std::uint64_t Sampler::next_raw() {
  // splitmix64: fully specified, identical on every platform.
  state_ += 0x9e3779b97f4a7c15ull;
  std::uint64_t z = state_;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

double Sampler::uniform() { return static_cast<double>(next_raw() >> 11) * 0x1.0p-53; }

double Sampler::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

double Sampler::gaussian() {
  if (have_spare_) {
    have_spare_ = false;
    return spare_;
  }
  double u1 = uniform();
  while (u1 <= 0.0) {
    u1 = uniform();
  }
  const double u2 = uniform();
  const double mag = std::sqrt(-2.0 * std::log(u1));
  spare_ = mag * std::sin(kTwoPi * u2);
  have_spare_ = true;
  return mag * std::cos(kTwoPi * u2);
}

void ScenarioConfig::validate() const {
  if (pose_count < 2) {
    throw InvalidInputError("ScenarioConfig: pose_count must be >= 2");
  }
  if (chunk_size < 2) {
    throw InvalidInputError("ScenarioConfig: chunk_size must be >= 2");
  }
  if (!(feature_density > 0.0) || !(sensor_range > 0.0) || !(step_length > 0.0)) {
    throw InvalidInputError("ScenarioConfig: geometry parameters must be positive");
  }
  if (!(odom_trans_sigma > 0.0) || !(odom_rot_sigma > 0.0) || !(obs_sigma > 0.0)) {
    throw InvalidInputError("ScenarioConfig: noise sigmas must be positive");
  }
  if (!(noise_scale >= 0.0)) {
    throw InvalidInputError("ScenarioConfig: noise_scale must be non-negative");
  }
}

namespace {

struct TruthPose {
  Eigen::VectorXd t;
  Eigen::VectorXd ang;  // empty when translation-only
  Eigen::MatrixXd m;    // world-to-body
};

std::vector<TruthPose> make_trajectory(const ScenarioConfig& c) {
  const int td = trans_dim(c.dim);
  std::vector<TruthPose> poses(c.pose_count);

  auto set_pose = [&](int i, const Eigen::VectorXd& t, const Eigen::VectorXd& ang) {
    poses[i].t = t;
    if (c.translation_only) {
      poses[i].m = Eigen::MatrixXd::Identity(td, td);
    } else {
      poses[i].ang = ang;
      poses[i].m = rot_from_angles(ang);
    }
  };

  if (c.trajectory == ScenarioConfig::Trajectory::SphereLike && c.dim == Dimension::D3) {
    const double turns = std::max(2.0, c.pose_count / 16.0);
    const double radius = std::max(2.0, c.pose_count * c.step_length / (kTwoPi * turns));
    for (int i = 0; i < c.pose_count; ++i) {
      const double s = static_cast<double>(i) / (c.pose_count - 1);
      const double z = radius * (1.0 - 2.0 * s) * 0.9;
      const double ring = std::sqrt(std::max(0.2, radius * radius - z * z));
      const double az = kTwoPi * turns * s;
      Eigen::Vector3d t(ring * std::cos(az), ring * std::sin(az), z);
      // face along the direction of travel, pitch bounded away from pi/2
      Eigen::Vector3d tangent(-std::sin(az), std::cos(az), -0.25);
      tangent.normalize();
      const double yaw = std::atan2(tangent.y(), tangent.x());
      const double pitch = std::clamp(-std::asin(tangent.z()), -1.1, 1.1);
      const Eigen::Matrix3d body_to_world = rot3(Eigen::Vector3d(yaw, pitch, 0.0));
      Eigen::VectorXd ang(3);
      if (!c.translation_only) {
        ang = angles_from_rot3(body_to_world.transpose());
      }
      set_pose(i, t, ang);
    }
    return poses;
  }

  if (c.trajectory == ScenarioConfig::Trajectory::Grid) {
    const int row_len = std::max(2, static_cast<int>(std::ceil(std::sqrt(c.pose_count))));
    for (int i = 0; i < c.pose_count; ++i) {
      const int row = i / row_len;
      const int col = i % row_len;
      const int x_col = (row % 2 == 0) ? col : row_len - 1 - col;
      Eigen::VectorXd t = Eigen::VectorXd::Zero(td);
      t[0] = x_col * c.step_length;
      t[1] = row * c.step_length;
      const double heading = (row % 2 == 0) ? 0.0 : kPi;
      Eigen::VectorXd ang = Eigen::VectorXd::Zero(c.dim == Dimension::D2 ? 1 : 3);
      ang[0] = wrap_angle(-heading);
      set_pose(i, t, ang);
    }
    return poses;
  }

  // Loop (also the 3D fallback for Grid/Loop): a circle at constant height.
  const double radius = std::max(2.0, c.pose_count * c.step_length / kTwoPi);
  for (int i = 0; i < c.pose_count; ++i) {
    const double a = kTwoPi * i / c.pose_count;
    Eigen::VectorXd t = Eigen::VectorXd::Zero(td);
    t[0] = radius * std::cos(a);
    t[1] = radius * std::sin(a);
    const double heading = a + kPi / 2.0;  // tangent
    Eigen::VectorXd ang = Eigen::VectorXd::Zero(c.dim == Dimension::D2 ? 1 : 3);
    ang[0] = wrap_angle(-heading);
    set_pose(i, t, ang);
  }
  return poses;
}

}  // namespace

Scenario generate(const ScenarioConfig& config) {
  config.validate();
  Sampler rng(config.seed);
  const int td = trans_dim(config.dim);
  const int rd = config.translation_only ? 0 : rot_dim(config.dim);

  const std::vector<TruthPose> poses = make_trajectory(config);

  // Uniform features over the trajectory's bounding box plus sensor margin.
  Eigen::VectorXd lo = poses[0].t, hi = poses[0].t;
  for (const auto& p : poses) {
    lo = lo.cwiseMin(p.t);
    hi = hi.cwiseMax(p.t);
  }
  lo.array() -= 0.5 * config.sensor_range;
  hi.array() += 0.5 * config.sensor_range;
  double volume = 1.0;
  for (int k = 0; k < td; ++k) {
    volume *= std::max(1.0, hi[k] - lo[k]);
  }
  const int n_features = std::max(td + 1, static_cast<int>(std::lround(config.feature_density * volume)));

  std::vector<Eigen::VectorXd> features(n_features);
  for (int f = 0; f < n_features; ++f) {
    Eigen::VectorXd pos(td);
    for (int k = 0; k < td; ++k) {
      pos[k] = rng.uniform(lo[k], hi[k]);
    }
    features[f] = pos;
  }

  Scenario sc;
  sc.dim = config.dim;
  sc.translation_only = config.translation_only;

  // Chunk layout: groups of chunk_size new poses; each later chunk imports
  // the previous group's last pose as the shared boundary.
  const int n_groups = (config.pose_count + config.chunk_size - 1) / config.chunk_size;
  sc.chunks.resize(n_groups);
  auto group_of = [&](int pose) { return pose / config.chunk_size; };
  for (int c = 0; c < n_groups; ++c) {
    sc.chunks[c].dim = config.dim;
    sc.chunks[c].translation_only = config.translation_only;
    const int first = c * config.chunk_size;
    const int last = std::min(config.pose_count, first + config.chunk_size);
    for (int i = (c > 0 ? first - 1 : first); i < last; ++i) {
      sc.chunks[c].pose_ids.push_back(i);
    }
  }

  const Eigen::MatrixXd obs_info =
      Eigen::MatrixXd::Identity(td, td) / (config.obs_sigma * config.obs_sigma);
  Eigen::MatrixXd odo_info = Eigen::MatrixXd::Identity(td + rd, td + rd);
  odo_info.topLeftCorner(td, td) /= config.odom_trans_sigma * config.odom_trans_sigma;
  if (rd > 0) {
    odo_info.bottomRightCorner(rd, rd) /= config.odom_rot_sigma * config.odom_rot_sigma;
  }

  // Odometry between consecutive poses; the edge belongs to the chunk that
  // owns the destination pose's group.
  for (int i = 0; i + 1 < config.pose_count; ++i) {
    const TruthPose& a = poses[i];
    const TruthPose& b = poses[i + 1];
    OdometryEdge e;
    e.from = i;
    e.to = i + 1;
    e.meas.resize(td + rd);
    e.meas.head(td) = a.m * (b.t - a.t);
    for (int k = 0; k < td; ++k) {
      e.meas[k] += config.noise_scale * config.odom_trans_sigma * rng.gaussian();
    }
    if (rd > 0) {
      const Eigen::VectorXd rel = angles_from_rot(Eigen::MatrixXd(b.m * a.m.transpose()));
      for (int k = 0; k < rd; ++k) {
        e.meas[td + k] = wrap_angle(rel[k] + config.noise_scale * config.odom_rot_sigma * rng.gaussian());
      }
    }
    e.info = odo_info;
    sc.chunks[group_of(i + 1)].odometry.push_back(std::move(e));
  }

  // Observations: every feature in range, from every pose, assigned to the
  // pose's own group.
  auto observe = [&](int pose, int feature) {
    const TruthPose& p = poses[pose];
    ObservationEdge o;
    o.pose = pose;
    o.feature = feature;
    o.meas = p.m * (features[feature] - p.t);
    for (int k = 0; k < td; ++k) {
      o.meas[k] += config.noise_scale * config.obs_sigma * rng.gaussian();
    }
    o.info = obs_info;
    sc.chunks[group_of(pose)].observations.push_back(std::move(o));
  };
  for (int i = 0; i < config.pose_count; ++i) {
    for (int f = 0; f < n_features; ++f) {
      if ((features[f] - poses[i].t).norm() <= config.sensor_range) {
        observe(i, f);
      }
    }
  }

  // Densify chunks that saw nothing.
  for (int c = 0; c < n_groups; ++c) {
    int guard = 0;
    while (sc.chunks[c].observations.empty() && guard++ < 32) {
      const int mid = sc.chunks[c].pose_ids[sc.chunks[c].pose_ids.size() / 2];
      Eigen::VectorXd pos(td);
      for (int k = 0; k < td; ++k) {
        pos[k] = poses[mid].t[k] + rng.uniform(-0.4, 0.4) * config.sensor_range;
      }
      const int fid = static_cast<int>(features.size());
      features.push_back(pos);
      for (int i = 0; i < config.pose_count; ++i) {
        if ((features[fid] - poses[i].t).norm() <= config.sensor_range) {
          observe(i, fid);
        }
      }
      sc.warnings.push_back("chunk " + std::to_string(c) + " had no observations; densified");
    }
    if (sc.chunks[c].observations.empty() && !sc.translation_only) {
      // Pose-only chunks are fine; they stay joinable through shared poses.
      sc.warnings.push_back("chunk " + std::to_string(c) + " remains observation-free");
    }
  }

  for (int i = 0; i < config.pose_count; ++i) {
    Eigen::VectorXd block(td + rd);
    block.head(td) = poses[i].t;
    if (rd > 0) {
      block.tail(rd) = poses[i].ang;
    }
    sc.truth.add(pose_key(i), block);
  }
  for (std::size_t f = 0; f < features.size(); ++f) {
    sc.truth.add(feature_key(static_cast<int>(f)), features[f]);
  }
  return sc;
}

}  // namespace mapjoin
