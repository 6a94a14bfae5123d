#include "mapjoin/metrics.hpp"

#include <Eigen/Geometry>

#include <Eigen/SparseCholesky>
#include <algorithm>
#include <cmath>
#include <set>

#include "mapjoin/angle.hpp"
#include "mapjoin/errors.hpp"
#include "mapjoin/rotation.hpp"
#include "mapjoin/transform.hpp"
#include "text_util.hpp"

namespace mapjoin {

double chi2(const LocalMap& solution, const std::vector<LocalMap>& maps) {
  double total = 0.0;
  for (const auto& m : maps) {
    const FrameChange fc = change_frame(solution, m.frame, false);
    const int td = trans_dim(m.dim);
    const int rd = m.translation_only ? 0 : rot_dim(m.dim);
    Eigen::VectorXd r(m.estimate.dim());
    for (const auto& e : m.estimate.entries()) {
      const auto& h = fc.state.entry(e.key);  // throws MissingEntityError
      if (h.dim != e.dim) {
        throw InvalidInputError("chi2: block dimension mismatch");
      }
      r.segment(e.offset, e.dim) = fc.state.values().segment(h.offset, h.dim) -
                                   m.estimate.values().segment(e.offset, e.dim);
      if (e.key.kind == EntityKind::Pose && rd > 0) {
        for (int k = 0; k < rd; ++k) {
          r[e.offset + td + k] = wrap_angle(r[e.offset + td + k]);
        }
      }
    }
    total += r.dot(m.info.apply(r));
  }
  return total;
}

namespace {

std::set<StateKey> all_keys(const LocalMap& m) {
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

RmseResult rmse(const LocalMap& solution, const LocalMap& reference,
                const FrameDescriptor& align_frame) {
  const LocalMap s = reframe_map(solution, align_frame);
  const LocalMap r = reframe_map(reference, align_frame);
  const int td = trans_dim(s.dim);
  const int rd = s.translation_only ? 0 : rot_dim(s.dim);

  std::vector<StateKey> common;
  {
    std::vector<StateKey> ks = s.estimate.keys();
    std::vector<StateKey> kr = r.estimate.keys();
    std::sort(ks.begin(), ks.end());
    std::sort(kr.begin(), kr.end());
    std::set_intersection(ks.begin(), ks.end(), kr.begin(), kr.end(), std::back_inserter(common));
  }
  if (common.empty()) {
    throw MissingEntityError("rmse: the maps share no state entries");
  }

  RmseResult out;
  double pose_sq = 0.0, feat_sq = 0.0;
  std::vector<int> common_pose_ids;
  for (StateKey k : common) {
    const int ds = s.estimate.dim_of(k);
    if (ds != r.estimate.dim_of(k)) {
      continue;  // reduced on one side only
    }
    const Eigen::VectorXd d = s.estimate.block_of(k) - r.estimate.block_of(k);
    if (k.kind == EntityKind::Pose) {
      pose_sq += d.head(td).squaredNorm();
      ++out.common_poses;
      common_pose_ids.push_back(k.id);
    } else {
      feat_sq += d.head(std::min(ds, td)).squaredNorm();
      ++out.common_features;
    }
  }
  out.abs_pose = out.common_poses ? std::sqrt(pose_sq / out.common_poses) : 0.0;
  out.abs_feature = out.common_features ? std::sqrt(feat_sq / out.common_features) : 0.0;

  // Relative errors over consecutive common poses.
  std::sort(common_pose_ids.begin(), common_pose_ids.end());
  double rel_sq = 0.0, rot_sq = 0.0;
  int rel_n = 0;
  for (std::size_t i = 0; i + 1 < common_pose_ids.size(); ++i) {
    const StateKey ka = pose_key(common_pose_ids[i]);
    const StateKey kb = pose_key(common_pose_ids[i + 1]);
    auto rel = [&](const LocalMap& m) {
      const Eigen::VectorXd a = m.estimate.block_of(ka);
      const Eigen::VectorXd b = m.estimate.block_of(kb);
      Eigen::MatrixXd ma = Eigen::MatrixXd::Identity(td, td);
      if (rd > 0) {
        ma = rot_from_angles(a.tail(rd));
      }
      Eigen::VectorXd dt = ma * (b.head(td) - a.head(td));
      Eigen::VectorXd dr;
      if (rd > 0) {
        dr = angles_from_rot(Eigen::MatrixXd(rot_from_angles(b.tail(rd)) * ma.transpose()));
      }
      return std::make_pair(dt, dr);
    };
    const auto [dts, drs] = rel(s);
    const auto [dtr, drr] = rel(r);
    rel_sq += (dts - dtr).squaredNorm();
    if (rd > 0) {
      double a2 = 0.0;
      for (int k = 0; k < rd; ++k) {
        const double da = wrap_angle(drs[k] - drr[k]);
        a2 += da * da;
      }
      rot_sq += a2;
    }
    ++rel_n;
  }
  out.rel_pose = rel_n ? std::sqrt(rel_sq / rel_n) : 0.0;
  out.rel_rot = rel_n ? std::sqrt(rot_sq / rel_n) : 0.0;
  return out;
}

FrameDescriptor default_alignment_frame(const LocalMap& a, const LocalMap& b) {
  const std::set<StateKey> ka = all_keys(a);
  const std::set<StateKey> kb = all_keys(b);
  std::vector<StateKey> common;
  std::set_intersection(ka.begin(), ka.end(), kb.begin(), kb.end(), std::back_inserter(common));

  for (StateKey k : common) {
    if (k.kind == EntityKind::Pose) {
      return PoseFrame{k.id};
    }
  }

  std::vector<int> feats;
  for (StateKey k : common) {
    if (k.kind == EntityKind::Feature) {
      feats.push_back(k.id);
    }
  }
  std::sort(feats.begin(), feats.end());
  const auto ents = detail::materialize(a);
  auto pos = [&](int id) -> Eigen::VectorXd {
    const detail::Entity* e = detail::find_entity(ents, feature_key(id));
    if (e == nullptr) {
      throw MissingEntityError("default_alignment_frame: feature position unavailable");
    }
    return e->pos;
  };
  if (a.dim == Dimension::D2) {
    for (std::size_t i = 0; i + 1 < feats.size(); ++i) {
      for (std::size_t j = i + 1; j < feats.size(); ++j) {
        if ((pos(feats[j]) - pos(feats[i])).norm() > 1e-9) {
          return FeatureFrame2{feats[i], feats[j]};
        }
      }
    }
  } else {
    for (std::size_t i = 0; i + 2 < feats.size(); ++i) {
      for (std::size_t j = i + 1; j + 1 < feats.size(); ++j) {
        for (std::size_t k = j + 1; k < feats.size(); ++k) {
          const Eigen::Vector3d v1 = pos(feats[j]) - pos(feats[i]);
          const Eigen::Vector3d u = pos(feats[k]) - pos(feats[i]);
          if (v1.norm() > 1e-9 && u.norm() > 1e-9 &&
              v1.cross(u).norm() > 1e-8 * v1.norm() * u.norm()) {
            return FeatureFrame3{feats[i], feats[j], feats[k]};
          }
        }
      }
    }
  }
  throw MissingEntityError("default_alignment_frame: no usable common entities");
}

double nees(const StateVector& estimate, const SparseSymMatrix& info, const StateVector& truth) {
  if (estimate.dim() != info.dim()) {
    throw InvalidInputError("nees: estimate/information dimensions differ");
  }
  for (const auto& e : estimate.entries()) {
    if (e.key.kind == EntityKind::Pose) {
      throw InvalidInputError("nees: estimate contains poses; marginalize them out first");
    }
  }

  Eigen::VectorXd err(estimate.dim());
  for (const auto& e : estimate.entries()) {
    const Eigen::VectorXd t = truth.block_of(e.key);  // throws MissingEntityError
    if (t.size() < e.dim) {
      throw InvalidInputError("nees: truth block shorter than estimate block");
    }
    err.segment(e.offset, e.dim) =
        estimate.values().segment(e.offset, e.dim) - t.head(e.dim);
  }

  Eigen::SimplicialLLT<Eigen::SparseMatrix<double>, Eigen::Lower, Eigen::AMDOrdering<int>> llt(
      info.full());
  if (llt.info() != Eigen::Success) {
    throw SingularSystemError("nees: information matrix is not positive definite");
  }
  return err.dot(info.apply(err));
}

namespace {

/// Regularized lower incomplete gamma P(a, x) by series / continued fraction.
double gamma_p(double a, double x) {
  if (x <= 0.0) {
    return 0.0;
  }
  const double lg = std::lgamma(a);
  if (x < a + 1.0) {
    double term = 1.0 / a;
    double sum = term;
    double ap = a;
    for (int i = 0; i < 500; ++i) {
      ap += 1.0;
      term *= x / ap;
      sum += term;
      if (std::abs(term) < std::abs(sum) * 1e-16) {
        break;
      }
    }
    return sum * std::exp(-x + a * std::log(x) - lg);
  }
  // Lentz continued fraction for Q(a, x).
  const double tiny = 1e-300;
  double b = x + 1.0 - a;
  double c = 1.0 / tiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i <= 500; ++i) {
    const double an = -i * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < tiny) {
      d = tiny;
    }
    c = b + an / c;
    if (std::abs(c) < tiny) {
      c = tiny;
    }
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < 1e-16) {
      break;
    }
  }
  const double q = std::exp(-x + a * std::log(x) - lg) * h;
  return 1.0 - q;
}

double chi2_log_pdf(double x, double k) {
  const double a = 0.5 * k;
  return (a - 1.0) * std::log(x) - 0.5 * x - a * std::log(2.0) - std::lgamma(a);
}

}  // namespace

double chi2_quantile(double p, int df) {
  if (!(p > 0.0 && p < 1.0)) {
    throw InvalidInputError("chi2_quantile: probability must be in (0, 1)");
  }
  if (df < 1) {
    throw InvalidInputError("chi2_quantile: df must be >= 1");
  }
  const double k = df;

  // Wilson-Hilferty start.
  // Rational approximation of the standard normal quantile (Acklam-style
  // coefficients are overkill; a Newton loop cleans up whatever we start with).
  auto normal_quantile = [](double q) {
    // Beasley-Springer-Moro
    static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                               -2.759285104469687e+02, 1.383577518672690e+02,
                               -3.066479806614716e+01, 2.506628277459239e+00};
    static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                               -1.556989798598866e+02, 6.680131188771972e+01,
                               -1.328068155288572e+01};
    static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                               -2.400758277161838e+00, -2.549732539343734e+00,
                               4.374664141464968e+00,  2.938163982698783e+00};
    static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                               2.445134137142996e+00, 3.754408661907416e+00};
    const double plow = 0.02425;
    if (q < plow) {
      const double u = std::sqrt(-2.0 * std::log(q));
      return (((((c[0] * u + c[1]) * u + c[2]) * u + c[3]) * u + c[4]) * u + c[5]) /
             ((((d[0] * u + d[1]) * u + d[2]) * u + d[3]) * u + 1.0);
    }
    if (q > 1.0 - plow) {
      const double u = std::sqrt(-2.0 * std::log(1.0 - q));
      return -(((((c[0] * u + c[1]) * u + c[2]) * u + c[3]) * u + c[4]) * u + c[5]) /
             ((((d[0] * u + d[1]) * u + d[2]) * u + d[3]) * u + 1.0);
    }
    const double u = q - 0.5;
    const double t = u * u;
    return (((((a[0] * t + a[1]) * t + a[2]) * t + a[3]) * t + a[4]) * t + a[5]) * u /
           (((((b[0] * t + b[1]) * t + b[2]) * t + b[3]) * t + b[4]) * t + 1.0);
  };

  const double z = normal_quantile(p);
  const double h = 2.0 / (9.0 * k);
  double x = k * std::pow(1.0 - h + z * std::sqrt(h), 3.0);
  if (!(x > 0.0)) {
    x = 0.5;
  }

  // Newton refinement on the CDF.
  for (int it = 0; it < 60; ++it) {
    const double f = gamma_p(0.5 * k, 0.5 * x) - p;
    const double pdf = std::exp(chi2_log_pdf(x, k));
    if (pdf <= 0.0) {
      break;
    }
    double step = f / pdf;
    // Keep the iterate positive.
    if (step > 0.5 * x) {
      step = 0.5 * x;
    }
    x -= step;
    if (std::abs(step) < 1e-12 * std::max(1.0, x)) {
      break;
    }
  }
  return x;
}

LocalMap truth_as_map(const StateVector& truth, Dimension dim, bool translation_only) {
  const int td = trans_dim(dim);
  const int rd = translation_only ? 0 : rot_dim(dim);

  int gauge = -1;
  for (const auto& e : truth.entries()) {
    if (e.key.kind == EntityKind::Pose) {
      gauge = gauge < 0 ? e.key.id : std::min(gauge, e.key.id);
    }
  }
  if (gauge < 0) {
    throw MissingEntityError("truth_as_map: truth contains no pose to gauge by");
  }
  const Eigen::VectorXd p0 = truth.block_of(pose_key(gauge));
  Eigen::MatrixXd m0 = Eigen::MatrixXd::Identity(td, td);
  if (rd > 0) {
    m0 = rot_from_angles(p0.tail(rd));
  }

  LocalMap tm;
  tm.dim = dim;
  tm.translation_only = translation_only;
  tm.frame = PoseFrame{gauge};
  for (const auto& e : truth.entries()) {
    if (e.key == pose_key(gauge)) {
      continue;
    }
    const Eigen::VectorXd v = truth.values().segment(e.offset, e.dim);
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

std::string metric_report_text(const MetricReport& r) {
  using detail::format_double;
  std::string out;
  auto kv = [&](const char* key, double v) {
    if (v >= 0.0) {
      out += key;
      out += "=";
      out += format_double(v);
      out += "\n";
    }
  };
  kv("chi2", r.chi2);
  kv("rmse_abs_pose", r.rmse_abs_pose);
  kv("rmse_abs_feature", r.rmse_abs_feature);
  kv("rmse_rel_pose", r.rmse_rel_pose);
  kv("rmse_rel_rot", r.rmse_rel_rot);
  kv("nees", r.nees);
  kv("nees_bound_95", r.nees_bound_95);
  if (r.dims > 0) {
    out += "dims=" + std::to_string(r.dims) + "\n";
  }
  return out;
}

std::string metric_report_json(const MetricReport& r) {
  using detail::format_double;
  std::string out = "{";
  bool first = true;
  auto kv = [&](const char* key, double v) {
    if (v >= 0.0) {
      if (!first) {
        out += ", ";
      }
      first = false;
      out += "\"";
      out += key;
      out += "\": ";
      out += format_double(v);
    }
  };
  kv("chi2", r.chi2);
  kv("rmse_abs_pose", r.rmse_abs_pose);
  kv("rmse_abs_feature", r.rmse_abs_feature);
  kv("rmse_rel_pose", r.rmse_rel_pose);
  kv("rmse_rel_rot", r.rmse_rel_rot);
  kv("nees", r.nees);
  kv("nees_bound_95", r.nees_bound_95);
  if (r.dims > 0) {
    if (!first) {
      out += ", ";
    }
    out += "\"dims\": " + std::to_string(r.dims);
  }
  out += "}";
  return out;
}

}  // namespace mapjoin
