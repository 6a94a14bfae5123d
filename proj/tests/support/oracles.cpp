#include "support/oracles.hpp"

#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>

#include "mapjoin/angle.hpp"
#include "mapjoin/errors.hpp"
#include "mapjoin/marginalize.hpp"
#include "mapjoin/rotation.hpp"
#include "mapjoin/sim.hpp"
#include "mapjoin/build.hpp"
#include "mapjoin/transform.hpp"

namespace oracles {

using namespace mapjoin;

Eigen::VectorXd dense_solve(Eigen::MatrixXd a, Eigen::VectorXd b) {
  const int n = static_cast<int>(a.rows());
  for (int col = 0; col < n; ++col) {
    int piv = col;
    for (int r = col + 1; r < n; ++r) {
      if (std::abs(a(r, col)) > std::abs(a(piv, col))) {
        piv = r;
      }
    }
    if (a(piv, col) == 0.0) {
      throw std::runtime_error("dense_solve: singular matrix");
    }
    if (piv != col) {
      a.row(piv).swap(a.row(col));
      std::swap(b[piv], b[col]);
    }
    for (int r = col + 1; r < n; ++r) {
      const double f = a(r, col) / a(col, col);
      if (f != 0.0) {
        a.row(r).tail(n - col) -= f * a.row(col).tail(n - col);
        b[r] -= f * b[col];
      }
    }
  }
  Eigen::VectorXd x(n);
  for (int r = n - 1; r >= 0; --r) {
    double s = b[r];
    for (int c = r + 1; c < n; ++c) {
      s -= a(r, c) * x[c];
    }
    x[r] = s / a(r, r);
  }
  return x;
}

Eigen::MatrixXd dense_inverse(const Eigen::MatrixXd& a) {
  const int n = static_cast<int>(a.rows());
  Eigen::MatrixXd aug(n, 2 * n);
  aug << a, Eigen::MatrixXd::Identity(n, n);
  for (int col = 0; col < n; ++col) {
    int piv = col;
    for (int r = col + 1; r < n; ++r) {
      if (std::abs(aug(r, col)) > std::abs(aug(piv, col))) {
        piv = r;
      }
    }
    if (aug(piv, col) == 0.0) {
      throw std::runtime_error("dense_inverse: singular matrix");
    }
    if (piv != col) {
      aug.row(piv).swap(aug.row(col));
    }
    aug.row(col) /= aug(col, col);
    for (int r = 0; r < n; ++r) {
      if (r != col && aug(r, col) != 0.0) {
        aug.row(r) -= aug(r, col) * aug.row(col);
      }
    }
  }
  return aug.rightCols(n);
}

Eigen::MatrixXd fd_jacobian(const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& f,
                            const Eigen::VectorXd& x, double h) {
  const Eigen::VectorXd f0 = f(x);
  Eigen::MatrixXd j(f0.size(), x.size());
  for (int c = 0; c < x.size(); ++c) {
    Eigen::VectorXd xp = x, xm = x;
    xp[c] += h;
    xm[c] -= h;
    const Eigen::VectorXd fp = f(xp);
    const Eigen::VectorXd fm = f(xm);
    for (int r = 0; r < f0.size(); ++r) {
      double d = fp[r] - fm[r];
      if (d > kPi) {
        d -= kTwoPi;
      } else if (d <= -kPi) {
        d += kTwoPi;
      }
      j(r, c) = d / (2.0 * h);
    }
  }
  return j;
}

namespace {

double chi2_pdf(double x, int df) {
  const double a = 0.5 * df;
  return std::exp((a - 1.0) * std::log(x) - 0.5 * x - a * std::log(2.0) - std::lgamma(a));
}

double simpson(const std::function<double(double)>& f, double a, double b, double fa, double fb,
               double fm, double eps, int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m);
  const double rm = 0.5 * (m + b);
  const double flm = f(lm);
  const double frm = f(rm);
  const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  if (depth <= 0 || std::abs(left + right - whole) < 15.0 * eps) {
    return left + right + (left + right - whole) / 15.0;
  }
  return simpson(f, a, m, fa, fm, flm, 0.5 * eps, depth - 1) +
         simpson(f, m, b, fm, fb, frm, 0.5 * eps, depth - 1);
}

}  // namespace

double quadrature_chi2_cdf(double x, int df) {
  if (x <= 0.0) {
    return 0.0;
  }
  // substitute x = t^2 so the df=1 singularity at the origin vanishes
  auto g = [df](double t) { return t == 0.0 ? 0.0 : 2.0 * t * chi2_pdf(t * t, df); };
  const double hi = std::sqrt(x);
  return simpson(g, 0.0, hi, g(0.0), g(hi), g(0.5 * hi), 1e-11, 30);
}

double bisect_chi2_quantile(double p, int df) {
  double lo = 0.0;
  double hi = std::max(4.0, 4.0 * df);
  while (quadrature_chi2_cdf(hi, df) < p) {
    hi *= 2.0;
  }
  for (int i = 0; i < 80; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (quadrature_chi2_cdf(mid, df) < p) {
      lo = mid;
    } else {
      hi = mid;
    }
    if (hi - lo < 1e-9 * std::max(1.0, hi)) {
      break;
    }
  }
  return 0.5 * (lo + hi);
}

namespace {

/// Stacked raw-chunk residual in a fixed layout, for numeric differentiation.
struct ChunkModel {
  const RawLocalData& data;
  int gauge;
  StateVector layout;
  int td;
  int rd;

  ChunkModel(const RawLocalData& d, int gauge_pose) : data(d), gauge(gauge_pose) {
    td = trans_dim(d.dim);
    rd = d.translation_only ? 0 : rot_dim(d.dim);
    for (int id : d.pose_ids) {
      if (id != gauge) {
        layout.add(pose_key(id), Eigen::VectorXd::Zero(td + rd));
      }
    }
    for (int id : d.feature_ids()) {
      layout.add(feature_key(id), Eigen::VectorXd::Zero(td));
    }
  }

  std::pair<Eigen::VectorXd, Eigen::MatrixXd> pose_at(const Eigen::VectorXd& x, int id) const {
    if (id == gauge) {
      return {Eigen::VectorXd::Zero(td), Eigen::MatrixXd::Identity(td, td)};
    }
    const auto& e = layout.entry(pose_key(id));
    Eigen::MatrixXd m = Eigen::MatrixXd::Identity(td, td);
    if (rd > 0) {
      m = rot_from_angles(x.segment(e.offset + td, rd));
    }
    return {x.segment(e.offset, td), m};
  }

  Eigen::VectorXd residual(const Eigen::VectorXd& x) const {
    Eigen::VectorXd r(static_cast<int>(data.odometry.size()) * (td + rd) +
                      static_cast<int>(data.observations.size()) * td);
    int at = 0;
    for (const auto& e : data.odometry) {
      const auto [ta, ma] = pose_at(x, e.from);
      const auto [tb, mb] = pose_at(x, e.to);
      r.segment(at, td) = ma * (tb - ta) - e.meas.head(td);
      if (rd > 0) {
        const Eigen::VectorXd rel = angles_from_rot(Eigen::MatrixXd(mb * ma.transpose()));
        for (int k = 0; k < rd; ++k) {
          r[at + td + k] = wrap_angle(rel[k] - e.meas[td + k]);
        }
      }
      at += td + rd;
    }
    for (const auto& o : data.observations) {
      const auto [ta, ma] = pose_at(x, o.pose);
      const auto& f = layout.entry(feature_key(o.feature));
      r.segment(at, td) = ma * (x.segment(f.offset, td) - ta) - o.meas;
      at += td;
    }
    return r;
  }

  Eigen::MatrixXd weight() const {
    const int n = static_cast<int>(data.odometry.size()) * (td + rd) +
                  static_cast<int>(data.observations.size()) * td;
    Eigen::MatrixXd w = Eigen::MatrixXd::Zero(n, n);
    int at = 0;
    for (const auto& e : data.odometry) {
      w.block(at, at, td + rd, td + rd) = e.info;
      at += td + rd;
    }
    for (const auto& o : data.observations) {
      w.block(at, at, td, td) = o.info;
      at += td;
    }
    return w;
  }

  Eigen::VectorXd init() const {
    Eigen::VectorXd x = Eigen::VectorXd::Zero(layout.dim());
    std::set<int> known{gauge};
    std::map<int, Eigen::VectorXd> t{{gauge, Eigen::VectorXd::Zero(td)}};
    std::map<int, Eigen::MatrixXd> m{{gauge, Eigen::MatrixXd::Identity(td, td)}};
    bool changed = true;
    while (changed) {
      changed = false;
      for (const auto& e : data.odometry) {
        Eigen::MatrixXd rz = Eigen::MatrixXd::Identity(td, td);
        if (rd > 0) {
          rz = rot_from_angles(e.meas.tail(rd));
        }
        if (known.count(e.from) && !known.count(e.to)) {
          m[e.to] = rz * m[e.from];
          t[e.to] = t[e.from] + m[e.from].transpose() * e.meas.head(td);
          known.insert(e.to);
          changed = true;
        } else if (known.count(e.to) && !known.count(e.from)) {
          m[e.from] = rz.transpose() * m[e.to];
          t[e.from] = t[e.to] - m[e.from].transpose() * e.meas.head(td);
          known.insert(e.from);
          changed = true;
        }
      }
    }
    for (int id : data.pose_ids) {
      if (id == gauge) {
        continue;
      }
      const auto& e = layout.entry(pose_key(id));
      x.segment(e.offset, td) = t.at(id);
      if (rd > 0) {
        x.segment(e.offset + td, rd) = angles_from_rot(m.at(id));
      }
    }
    std::set<int> seen;
    for (const auto& o : data.observations) {
      if (seen.insert(o.feature).second) {
        const auto& f = layout.entry(feature_key(o.feature));
        x.segment(f.offset, td) = t.at(o.pose) + m.at(o.pose).transpose() * o.meas;
      }
    }
    return x;
  }
};

}  // namespace

DenseGnResult dense_chunk_gn(const RawLocalData& data, int gauge_pose, int iters) {
  ChunkModel model(data, gauge_pose);
  Eigen::VectorXd x = model.init();
  const Eigen::MatrixXd w = model.weight();

  auto f = [&](const Eigen::VectorXd& v) { return model.residual(v); };
  for (int it = 0; it < iters; ++it) {
    const Eigen::VectorXd r = model.residual(x);
    const Eigen::MatrixXd j = fd_jacobian(f, x);
    const Eigen::MatrixXd n = j.transpose() * w * j;
    const Eigen::VectorXd g = j.transpose() * w * r;
    const Eigen::VectorXd delta = dense_solve(n, -g);
    x += delta;
    if (delta.lpNorm<Eigen::Infinity>() < 1e-12) {
      break;
    }
  }

  DenseGnResult out;
  out.estimate = model.layout;
  out.estimate.values() = x;
  const Eigen::MatrixXd j = fd_jacobian(f, x);
  out.info = j.transpose() * w * j;
  const Eigen::VectorXd r = model.residual(x);
  out.objective = r.dot(w * r);
  return out;
}

namespace {

/// Ground truth re-gauged so the first pose is the origin, as a map object
/// that the frame-change machinery can move anywhere.
LocalMap truth_as_map(const Scenario& sc) {
  const int td = trans_dim(sc.dim);
  const int rd = sc.translation_only ? 0 : rot_dim(sc.dim);

  const Eigen::VectorXd p0 = sc.truth.block_of(pose_key(0));
  const Eigen::VectorXd t0 = p0.head(td);
  Eigen::MatrixXd m0 = Eigen::MatrixXd::Identity(td, td);
  if (rd > 0) {
    m0 = rot_from_angles(p0.tail(rd));
  }

  LocalMap tm;
  tm.dim = sc.dim;
  tm.translation_only = sc.translation_only;
  tm.frame = PoseFrame{0};
  for (const auto& e : sc.truth.entries()) {
    if (e.key == pose_key(0)) {
      continue;
    }
    const Eigen::VectorXd v = sc.truth.values().segment(e.offset, e.dim);
    if (e.key.kind == EntityKind::Feature) {
      tm.estimate.add(e.key, m0 * (v - t0));
    } else {
      Eigen::VectorXd block(td + rd);
      block.head(td) = m0 * (v.head(td) - t0);
      if (rd > 0) {
        block.tail(rd) =
            angles_from_rot(Eigen::MatrixXd(rot_from_angles(v.tail(rd)) * m0.transpose()));
      }
      tm.estimate.add(e.key, block);
    }
  }
  tm.info = SparseSymMatrix::identity(tm.estimate.dim());
  return tm;
}

std::uint64_t mix(std::uint64_t seed, std::uint64_t salt) {
  seed ^= salt + 0x9e3779b97f4a7c15ull + (seed << 6) + (seed >> 2);
  return seed;
}

TwoMapInstance try_make_instance(std::uint64_t seed, Dimension dim, JoinVariant variant) {
  ScenarioConfig cfg;
  cfg.dim = dim;
  cfg.pose_count = 8;
  cfg.chunk_size = 4;
  cfg.sensor_range = 6.0;
  cfg.step_length = 1.0;
  cfg.feature_density = dim == Dimension::D2 ? 0.10 : 0.018;
  cfg.seed = seed;
  const Scenario sc = generate(cfg);
  if (sc.chunks.size() != 2) {
    throw InvalidInputError("instance: unexpected chunk count");
  }

  const int boundary = cfg.chunk_size - 1;
  LocalMap m1 = build_local_map(sc.chunks[0], PoseFrame{boundary}).map;
  LocalMap m2 = build_local_map(sc.chunks[1], PoseFrame{boundary}).map;

  if (variant == JoinVariant::PoseOnly) {
    std::vector<StateKey> rm1, rm2;
    for (const auto& e : m1.estimate.entries()) {
      if (e.key.kind == EntityKind::Feature) {
        rm1.push_back(e.key);
      }
    }
    for (const auto& e : m2.estimate.entries()) {
      if (e.key.kind == EntityKind::Feature) {
        rm2.push_back(e.key);
      }
    }
    m1 = marginalize(m1, rm1);
    m2 = marginalize(m2, rm2);
  } else if (variant == JoinVariant::FeatureOnly) {
    // Move both maps into a frame defined by shared features, then drop poses.
    std::vector<StateKey> k1 = m1.estimate.keys();
    std::vector<StateKey> k2 = m2.estimate.keys();
    std::sort(k1.begin(), k1.end());
    std::sort(k2.begin(), k2.end());
    std::vector<StateKey> shared;
    std::set_intersection(k1.begin(), k1.end(), k2.begin(), k2.end(), std::back_inserter(shared));
    std::vector<int> feats;
    for (StateKey k : shared) {
      if (k.kind == EntityKind::Feature) {
        feats.push_back(k.id);
      }
    }
    const int need = dim == Dimension::D2 ? 2 : 3;
    if (static_cast<int>(feats.size()) < need) {
      throw NotJoinableError("instance: not enough shared features");
    }
    FrameDescriptor ff;
    if (dim == Dimension::D2) {
      ff = FeatureFrame2{feats[0], feats[1]};
    } else {
      ff = FeatureFrame3{feats[0], feats[1], feats[2]};
    }
    m1 = marginalize_poses(reframe_map(m1, ff));
    m2 = marginalize_poses(reframe_map(m2, ff));
  }

  const JoinKind kind = classify_join(m1, m2);
  std::optional<FrameDescriptor> target = default_join_target(m1, m2, kind);
  if (!target) {
    target = m1.frame;
  }

  TwoMapInstance inst;
  inst.m1 = m1;
  inst.m2 = m2;
  inst.target = *target;
  inst.linear = join_two_maps_to(m1, m2, *target);

  const LocalMap truth_in_target = reframe_map(truth_as_map(sc), *target);
  StateVector init;
  for (const auto& e : inst.linear.estimate.entries()) {
    const Eigen::VectorXd t = truth_in_target.estimate.block_of(e.key);
    if (t.size() != e.dim) {
      throw InvalidInputError("instance: truth block dimension mismatch");
    }
    init.add(e.key, t);
  }
  inst.init_truth = std::move(init);
  return inst;
}

}  // namespace

TwoMapInstance make_two_map_instance(std::uint64_t seed, Dimension dim, JoinVariant variant) {
  std::uint64_t s = seed;
  for (int attempt = 0; attempt < 24; ++attempt) {
    try {
      return try_make_instance(s, dim, variant);
    } catch (const Error&) {
      s = mix(s, attempt + 1);
    }
  }
  throw std::runtime_error("make_two_map_instance: no viable instance after 24 attempts");
}

double state_rel_error(const LocalMap& a, const LocalMap& b) {
  if (a.estimate.size() != b.estimate.size()) {
    throw std::runtime_error("state_rel_error: key sets differ");
  }
  const int td = trans_dim(a.dim);
  const int rd = a.translation_only ? 0 : rot_dim(a.dim);
  double num = 0.0;
  double den = 0.0;
  for (const auto& e : a.estimate.entries()) {
    const Eigen::VectorXd va = a.estimate.values().segment(e.offset, e.dim);
    const Eigen::VectorXd vb = b.estimate.block_of(e.key);
    Eigen::VectorXd d = va - vb;
    if (e.key.kind == EntityKind::Pose && rd > 0) {
      for (int k = 0; k < rd; ++k) {
        d[td + k] = wrap_angle(d[td + k]);
      }
    }
    num += d.squaredNorm();
    den += vb.squaredNorm();
  }
  return std::sqrt(num) / std::max(std::sqrt(den), 1e-12);
}

double info_rel_error(const LocalMap& a, const LocalMap& b) {
  std::vector<int> perm;  // b scalar index for each a scalar index
  perm.reserve(a.estimate.dim());
  for (const auto& e : a.estimate.entries()) {
    const auto& eb = b.estimate.entry(e.key);
    if (eb.dim != e.dim) {
      throw std::runtime_error("info_rel_error: block dims differ");
    }
    for (int k = 0; k < e.dim; ++k) {
      perm.push_back(eb.offset + k);
    }
  }
  const Eigen::MatrixXd da = a.info.dense();
  const Eigen::MatrixXd dbfull = b.info.dense();
  Eigen::MatrixXd db(da.rows(), da.cols());
  for (int i = 0; i < da.rows(); ++i) {
    for (int j = 0; j < da.cols(); ++j) {
      db(i, j) = dbfull(perm[i], perm[j]);
    }
  }
  return (da - db).norm() / std::max(db.norm(), 1e-12);
}

}  // namespace oracles
