#include <doctest.h>

#include "mapjoin/build.hpp"
#include "mapjoin/complexity.hpp"
#include "mapjoin/errors.hpp"
#include "mapjoin/metrics.hpp"
#include "mapjoin/oracle.hpp"
#include "mapjoin/rotation.hpp"
#include "mapjoin/sim.hpp"
#include "mapjoin/strategy.hpp"
#include "mapjoin/transform.hpp"
#include "support/oracles.hpp"

using namespace mapjoin;

namespace {

std::vector<LocalMap> build_chunks(const Scenario& sc) {
  std::vector<LocalMap> maps;
  for (std::size_t c = 0; c < sc.chunks.size(); ++c) {
    // start-pose frames; the drivers re-frame as needed
    maps.push_back(build_local_map(sc.chunks[c], PoseFrame{sc.chunks[c].pose_ids.front()}).map);
  }
  return maps;
}

LocalMap truth_map(const Scenario& sc) {
  // ground truth re-gauged to pose 0 via the library transform
  LocalMap tm;
  tm.dim = sc.dim;
  tm.translation_only = sc.translation_only;
  tm.frame = PoseFrame{-1};  // placeholder; construct directly below
  const int td = trans_dim(sc.dim);
  const int rd = sc.translation_only ? 0 : rot_dim(sc.dim);
  const Eigen::VectorXd p0 = sc.truth.block_of(pose_key(0));
  Eigen::MatrixXd m0 = Eigen::MatrixXd::Identity(td, td);
  if (rd > 0) {
    m0 = rot_from_angles(p0.tail(rd));
  }
  tm.frame = PoseFrame{0};
  for (const auto& e : sc.truth.entries()) {
    if (e.key == pose_key(0)) {
      continue;
    }
    const Eigen::VectorXd v = sc.truth.values().segment(e.offset, e.dim);
    if (e.key.kind == EntityKind::Feature) {
      tm.estimate.add(e.key, m0 * (v - p0.head(td)));
    } else {
      Eigen::VectorXd b(td + rd);
      b.head(td) = m0 * (v.head(td) - p0.head(td));
      if (rd > 0) {
        b.tail(rd) =
            angles_from_rot(Eigen::MatrixXd(rot_from_angles(v.tail(rd)) * m0.transpose()));
      }
      tm.estimate.add(e.key, b);
    }
  }
  tm.info = SparseSymMatrix::identity(tm.estimate.dim());
  return tm;
}

}  // namespace

TEST_CASE("sequential: single map and noiseless chains") {
  ScenarioConfig cfg;
  cfg.pose_count = 9;
  cfg.chunk_size = 3;
  cfg.feature_density = 0.08;
  cfg.seed = 2;
  cfg.noise_scale = 0.0;
  const Scenario sc = generate(cfg);
  const std::vector<LocalMap> maps = build_chunks(sc);
  REQUIRE(maps.size() == 3);

  const LocalMap single = join_sequential({maps[0]});
  CHECK(oracles::state_rel_error(maps[0], single) == 0.0);

  JoinTimings t;
  const LocalMap g = join_sequential(maps, &t);
  CHECK(t.joins == 2);
  // noiseless: chi-square against the inputs is zero and truth is recovered
  CHECK(chi2(g, maps) < 1e-10);
  const LocalMap tm = truth_map(sc);
  const RmseResult r = rmse(g, tm, PoseFrame{0});
  CHECK(r.abs_pose < 1e-6);
  CHECK(r.abs_feature < 1e-6);
}

TEST_CASE("divide and conquer: two maps equal one pairwise join") {
  ScenarioConfig cfg;
  cfg.pose_count = 8;
  cfg.chunk_size = 4;
  cfg.feature_density = 0.08;
  cfg.seed = 3;
  const Scenario sc = generate(cfg);
  const std::vector<LocalMap> maps = build_chunks(sc);
  REQUIRE(maps.size() == 2);

  const LocalMap dc = join_divide_conquer(maps);
  auto [a, b] = prepare_pair(maps[0], maps[1]);
  const LocalMap direct = join_two_maps(a, b);
  CHECK(oracles::state_rel_error(dc, direct) < 1e-12);
  CHECK(oracles::info_rel_error(dc, direct) < 1e-12);
}

TEST_CASE("divide and conquer: four noiseless maps recover truth") {
  ScenarioConfig cfg;
  cfg.pose_count = 12;
  cfg.chunk_size = 3;
  cfg.feature_density = 0.08;
  cfg.seed = 4;
  cfg.noise_scale = 0.0;
  const Scenario sc = generate(cfg);
  const std::vector<LocalMap> maps = build_chunks(sc);
  REQUIRE(maps.size() == 4);
  JoinTimings t;
  const LocalMap g = join_divide_conquer(maps, 1, &t);
  CHECK(t.joins == 3);
  const RmseResult r = rmse(g, truth_map(sc), PoseFrame{0});
  CHECK(r.abs_pose < 1e-6);
  CHECK(r.abs_feature < 1e-6);
}

TEST_CASE("drivers: ten-map sim stays near the full nonlinear solution") {
  ScenarioConfig cfg;
  cfg.pose_count = 40;
  cfg.chunk_size = 4;
  cfg.feature_density = 0.25;
  cfg.seed = 11;
  const Scenario sc = generate(cfg);
  const std::vector<LocalMap> maps = build_chunks(sc);
  REQUIRE(maps.size() == 10);

  JoinTimings ts, td;
  const LocalMap seq = join_sequential(maps, &ts);
  const LocalMap dc = join_divide_conquer(maps, 1, &td);
  CHECK(ts.joins == 9);
  CHECK(td.joins == 9);

  const OracleReport full = full_nonlinear_ls(maps, seq);
  CHECK(full.converged);
  const double chi_seq = chi2(seq, maps);
  const double chi_dc = chi2(dc, maps);
  CHECK(full.final_objective <= chi_seq + 1e-9);
  CHECK(chi_seq < 1.05 * full.final_objective + 1e-9);
  CHECK(chi_dc < 1.05 * full.final_objective + 1e-9);

  // re-framed to the first pose, the two drivers agree closely
  const LocalMap seq0 = reframe_map(seq, PoseFrame{0});
  const LocalMap dc0 = reframe_map(dc, PoseFrame{0});
  const RmseResult r = rmse(seq0, dc0, PoseFrame{0});
  CHECK(r.abs_pose < 1e-3);
  CHECK(r.abs_feature < 1e-3);
}

TEST_CASE("drivers: thread count does not change the result") {
  ScenarioConfig cfg;
  cfg.pose_count = 24;
  cfg.chunk_size = 4;
  cfg.feature_density = 0.15;
  cfg.seed = 12;
  const Scenario sc = generate(cfg);
  const std::vector<LocalMap> maps = build_chunks(sc);
  const LocalMap one = join_divide_conquer(maps, 1);
  const LocalMap four = join_divide_conquer(maps, 4);
  CHECK(one.estimate.values() == four.estimate.values());
  CHECK((one.info.dense() - four.info.dense()).norm() == 0.0);
}

TEST_CASE("drivers: not-joinable reports the step") {
  ScenarioConfig cfg;
  cfg.pose_count = 8;
  cfg.chunk_size = 4;
  cfg.feature_density = 0.08;
  cfg.seed = 13;
  const Scenario sc = generate(cfg);
  std::vector<LocalMap> maps = build_chunks(sc);
  // a disjoint pose-only map that shares nothing
  LocalMap stray;
  stray.dim = Dimension::D2;
  stray.frame = PoseFrame{100};
  stray.estimate.add(pose_key(101), Eigen::Vector3d(1, 0, 0));
  stray.info = SparseSymMatrix::identity(3);
  maps.push_back(stray);
  try {
    join_sequential(maps);
    FAIL("expected NotJoinableError");
  } catch (const NotJoinableError& e) {
    CHECK(std::string(e.what()).find("step 2") != std::string::npos);
  }
}

TEST_CASE("complexity: reference cost table") {
  ComplexityParams p;
  p.total_observations = 52288;
  p.total_state_size = 7197;
  p.iterations = 10;

  struct Row {
    int n;
    double local, seq_join, seq_total, dc_join, dc_total;
    double nl_seq_join, nl_seq_total, nl_dc_join, nl_dc_total;
  };
  const Row rows[] = {
      {5, 0.0400, 0.1792, 0.2192, 0.1640, 0.2040, 1.7920, 1.8320, 1.6400, 1.6800},
      {10, 0.0100, 0.3024, 0.3124, 0.1680, 0.1780, 3.0240, 3.0340, 1.6800, 1.6900},
      {20, 0.0025, 0.5512, 0.5537, 0.1690, 0.1715, 5.5124, 5.5149, 1.6900, 1.6925},
      {50, 4.0e-4, 1.3005, 1.3009, 0.1393, 0.1397, 13.005, 13.005, 1.3928, 1.3932},
      {100, 1.0e-4, 2.5502, 2.5503, 0.1393, 0.1394, 25.502, 25.503, 1.3932, 1.3933},
  };
  for (const Row& row : rows) {
    p.map_count = row.n;
    const ComplexityRatios r = complexity_model(p);
    // compare at each entry's printed resolution (the table rounds the small
    // entries to two significant digits and the large ones to five)
    auto close = [](double got, double want) {
      const double ulp = want >= 10.0 ? 1e-3 : (want < 1e-3 ? 1e-5 : 1e-4);
      CHECK(std::abs(got - want) <= 0.6 * ulp);
    };
    close(r.local_build, row.local);
    close(r.seq_join, row.seq_join);
    close(r.seq_total, row.seq_total);
    close(r.dc_join, row.dc_join);
    close(r.dc_total, row.dc_total);
    close(r.nl_seq_join, row.nl_seq_join);
    close(r.nl_seq_total, row.nl_seq_total);
    close(r.nl_dc_join, row.nl_dc_join);
    close(r.nl_dc_total, row.nl_dc_total);
  }
}

TEST_CASE("complexity: structural properties") {
  ComplexityParams p;
  p.total_observations = 52288;
  p.total_state_size = 7197;
  p.iterations = 10;
  p.map_count = 2;
  const ComplexityRatios r2 = complexity_model(p);
  CHECK(r2.seq_join == doctest::Approx(r2.dc_join).epsilon(1e-12));

  double prev = 0.0;
  for (int n = 2; n <= 64; ++n) {
    p.map_count = n;
    const double s = complexity_model(p).seq_join;
    CHECK(s > prev);
    prev = s;
  }
  p.map_count = 1;
  CHECK_THROWS_AS(complexity_model(p), InvalidInputError);
}
