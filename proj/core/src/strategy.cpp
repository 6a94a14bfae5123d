#include "mapjoin/strategy.hpp"

#include <Eigen/Geometry>

#include <algorithm>
#include <chrono>
#include <climits>
#include <future>
#include <set>

#include "mapjoin/errors.hpp"
#include "mapjoin/transform.hpp"

namespace mapjoin {

namespace {

constexpr double kCoincidence = 1e-9;
constexpr double kCollinearRatio = 1e-8;

std::set<StateKey> physical_key_set(const LocalMap& m) {
  std::set<StateKey> keys;
  for (const auto& e : m.estimate.entries()) {
    keys.insert(e.key);
  }
  for (StateKey k : frame_entity_keys(m.frame)) {
    keys.insert(k);
  }
  return keys;
}

}  // namespace

std::pair<LocalMap, LocalMap> prepare_pair(const LocalMap& a, const LocalMap& b) {
  if (a.frame == b.frame) {
    return {a, b};
  }

  const std::set<StateKey> ka = physical_key_set(a);
  const std::set<StateKey> kb = physical_key_set(b);
  std::vector<StateKey> common;
  std::set_intersection(ka.begin(), ka.end(), kb.begin(), kb.end(), std::back_inserter(common));

  int shared_pose = INT_MIN;
  std::vector<int> shared_feats;
  for (StateKey k : common) {
    if (k.kind == EntityKind::Pose) {
      shared_pose = std::max(shared_pose, k.id);
    } else {
      shared_feats.push_back(k.id);
    }
  }

  if (shared_pose != INT_MIN) {
    const FrameDescriptor f = PoseFrame{shared_pose};
    return {reframe_map(a, f), reframe_map(b, f)};
  }

  const int need = a.dim == Dimension::D2 ? 2 : 3;
  if (static_cast<int>(shared_feats.size()) >= need) {
    std::sort(shared_feats.begin(), shared_feats.end());
    const auto ents = detail::materialize(a);
    auto pos = [&](int id) -> Eigen::VectorXd {
      const detail::Entity* e = detail::find_entity(ents, feature_key(id));
      if (e == nullptr) {
        throw MissingEntityError("prepare_pair: feature position unavailable");
      }
      return e->pos;
    };
    if (a.dim == Dimension::D2) {
      for (std::size_t i = 0; i + 1 < shared_feats.size(); ++i) {
        for (std::size_t j = i + 1; j < shared_feats.size(); ++j) {
          if ((pos(shared_feats[j]) - pos(shared_feats[i])).norm() > kCoincidence) {
            const FrameDescriptor f = FeatureFrame2{shared_feats[i], shared_feats[j]};
            return {reframe_map(a, f), reframe_map(b, f)};
          }
        }
      }
    } else {
      for (std::size_t i = 0; i + 2 < shared_feats.size(); ++i) {
        for (std::size_t j = i + 1; j + 1 < shared_feats.size(); ++j) {
          for (std::size_t k = j + 1; k < shared_feats.size(); ++k) {
            const Eigen::Vector3d v1 = pos(shared_feats[j]) - pos(shared_feats[i]);
            const Eigen::Vector3d u = pos(shared_feats[k]) - pos(shared_feats[i]);
            if (v1.norm() > kCoincidence && u.norm() > kCoincidence &&
                v1.cross(u).norm() > kCollinearRatio * v1.norm() * u.norm()) {
              const FrameDescriptor f = FeatureFrame3{shared_feats[i], shared_feats[j], shared_feats[k]};
              return {reframe_map(a, f), reframe_map(b, f)};
            }
          }
        }
      }
    }
  }

  throw NotJoinableError("prepare_pair: maps share no usable frame entities");
}

namespace {

LocalMap timed_join(const LocalMap& a, const LocalMap& b) {
  auto [pa, pb] = prepare_pair(a, b);
  return join_two_maps(pa, pb);
}

}  // namespace

LocalMap join_sequential(const std::vector<LocalMap>& maps, JoinTimings* timings) {
  if (maps.empty()) {
    throw InvalidInputError("join_sequential: no maps");
  }
  const auto start = std::chrono::steady_clock::now();
  LocalMap global = maps.front();
  int joins = 0;
  for (std::size_t i = 1; i < maps.size(); ++i) {
    try {
      global = timed_join(global, maps[i]);
    } catch (const NotJoinableError& e) {
      throw NotJoinableError("join_sequential: step " + std::to_string(i) + ": " + e.what());
    }
    ++joins;
  }
  if (timings) {
    timings->join_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    timings->joins = joins;
  }
  return global;
}

LocalMap join_divide_conquer(const std::vector<LocalMap>& maps, int threads, JoinTimings* timings) {
  if (maps.empty()) {
    throw InvalidInputError("join_divide_conquer: no maps");
  }
  if (threads < 1) {
    threads = 1;
  }
  const auto start = std::chrono::steady_clock::now();
  std::vector<LocalMap> level = maps;
  int joins = 0;
  int level_index = 0;
  while (level.size() > 1) {
    const std::size_t pairs = level.size() / 2;
    std::vector<LocalMap> next(pairs + (level.size() % 2));

    auto run_pair = [&](std::size_t p) {
      try {
        next[p] = timed_join(level[2 * p], level[2 * p + 1]);
      } catch (const NotJoinableError& e) {
        throw NotJoinableError("join_divide_conquer: level " + std::to_string(level_index) +
                               ", pair " + std::to_string(p) + ": " + e.what());
      }
    };

    if (threads > 1 && pairs > 1) {
      std::vector<std::future<void>> futs;
      futs.reserve(pairs);
      for (std::size_t p = 0; p < pairs; ++p) {
        futs.push_back(std::async(std::launch::async, run_pair, p));
      }
      for (auto& f : futs) {
        f.get();
      }
    } else {
      for (std::size_t p = 0; p < pairs; ++p) {
        run_pair(p);
      }
    }
    if (level.size() % 2) {
      next.back() = level.back();  // odd leftover moves up unmerged
    }
    joins += static_cast<int>(pairs);
    level = std::move(next);
    ++level_index;
  }
  if (timings) {
    timings->join_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    timings->joins = joins;
  }
  return level.front();
}

}  // namespace mapjoin
