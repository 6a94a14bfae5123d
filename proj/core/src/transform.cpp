#include "mapjoin/transform.hpp"

#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>

#include "mapjoin/angle.hpp"
#include "mapjoin/errors.hpp"
#include "mapjoin/rotation.hpp"

namespace mapjoin {

namespace detail {

std::vector<Entity> materialize(const LocalMap& m) {
  const int td = trans_dim(m.dim);
  const int rd = m.translation_only ? 0 : rot_dim(m.dim);

  int x_axis_feat = -1;
  int plane_feat = -1;
  if (const auto* f2 = std::get_if<FeatureFrame2>(&m.frame)) {
    x_axis_feat = f2->x_axis_id;
  } else if (const auto* f3 = std::get_if<FeatureFrame3>(&m.frame)) {
    x_axis_feat = f3->x_axis_id;
    plane_feat = f3->plane_id;
  }

  std::vector<Entity> out;
  out.reserve(m.estimate.size() + 3);
  for (const auto& e : m.estimate.entries()) {
    Entity ent;
    ent.key = e.key;
    if (e.key.kind == EntityKind::Pose) {
      ent.pos = m.estimate.values().segment(e.offset, td);
      ent.pos_src.resize(td);
      for (int i = 0; i < td; ++i) {
        ent.pos_src[i] = e.offset + i;
      }
      if (rd > 0) {
        ent.ang = m.estimate.values().segment(e.offset + td, rd);
        ent.ang_src.resize(rd);
        for (int i = 0; i < rd; ++i) {
          ent.ang_src[i] = e.offset + td + i;
        }
      }
    } else {
      ent.pos = Eigen::VectorXd::Zero(td);
      ent.pos_src.assign(td, -1);
      int free_dims = td;
      if (e.key.id == x_axis_feat) {
        free_dims = 1;
      } else if (e.key.id == plane_feat) {
        free_dims = 2;
      }
      free_dims = std::min(free_dims, e.dim);
      for (int i = 0; i < free_dims; ++i) {
        ent.pos[i] = m.estimate.values()[e.offset + i];
        ent.pos_src[i] = e.offset + i;
      }
    }
    out.push_back(std::move(ent));
  }

  // Implicit frame entities.
  if (const auto* p = std::get_if<PoseFrame>(&m.frame)) {
    Entity ent;
    ent.key = pose_key(p->pose_id);
    ent.pos = Eigen::VectorXd::Zero(td);
    ent.pos_src.assign(td, -1);
    if (rd > 0) {
      ent.ang = Eigen::VectorXd::Zero(rd);
      ent.ang_src.assign(rd, -1);
    }
    out.push_back(std::move(ent));
  } else {
    int origin = std::holds_alternative<FeatureFrame2>(m.frame)
                     ? std::get<FeatureFrame2>(m.frame).origin_id
                     : std::get<FeatureFrame3>(m.frame).origin_id;
    Entity ent;
    ent.key = feature_key(origin);
    ent.pos = Eigen::VectorXd::Zero(td);
    ent.pos_src.assign(td, -1);
    out.push_back(std::move(ent));
  }

  std::sort(out.begin(), out.end(), [](const Entity& a, const Entity& b) { return a.key < b.key; });
  return out;
}

const Entity* find_entity(const std::vector<Entity>& es, StateKey key) {
  auto it = std::lower_bound(es.begin(), es.end(), key,
                             [](const Entity& e, StateKey k) { return e.key < k; });
  if (it == es.end() || it->key != key) {
    return nullptr;
  }
  return &*it;
}

}  // namespace detail

namespace {

using detail::Entity;

constexpr double kCoincidence = 1e-9;   // meters
constexpr double kCollinearity = 1e-8;  // sine of the spanned angle

/// The rigid transform into the target frame, with the derivatives of (R, t)
/// with respect to the input-state coordinates it depends on.
struct TargetFrame {
  Eigen::MatrixXd r;  // maps current coordinates into the new frame
  Eigen::VectorXd t;  // new-frame origin in current coordinates
  struct Dep {
    int src;
    Eigen::MatrixXd dr;
    Eigen::VectorXd dt;
  };
  std::vector<Dep> deps;
  // 2D only: R = rot2(psi); pose headings transform as theta - psi.
  double psi = 0.0;
  std::vector<std::pair<int, double>> dpsi;  // (src, d psi / d src)
};

const Entity& require_entity(const std::vector<Entity>& es, StateKey key, const char* what) {
  const Entity* e = detail::find_entity(es, key);
  if (e == nullptr) {
    throw MissingEntityError(std::string(what) + ": entity " +
                             (key.kind == EntityKind::Pose ? "pose " : "feature ") +
                             std::to_string(key.id) + " not recoverable from the map");
  }
  return *e;
}

TargetFrame build_pose_target(const std::vector<Entity>& es, int pose_id, Dimension dim,
                              bool translation_only) {
  const Entity& p = require_entity(es, pose_key(pose_id), "change_frame");
  const int td = trans_dim(dim);
  TargetFrame tf;
  tf.t = p.pos;
  if (translation_only) {
    tf.r = Eigen::MatrixXd::Identity(td, td);
  } else if (dim == Dimension::D2) {
    tf.psi = p.ang[0];
    tf.r = rot2(tf.psi);
  } else {
    tf.r = rot3(p.ang);
  }
  for (int i = 0; i < td; ++i) {
    if (p.pos_src[i] >= 0) {
      TargetFrame::Dep d;
      d.src = p.pos_src[i];
      d.dr = Eigen::MatrixXd::Zero(td, td);
      d.dt = Eigen::VectorXd::Unit(td, i);
      tf.deps.push_back(std::move(d));
    }
  }
  if (!translation_only) {
    for (int k = 0; k < rot_dim(dim); ++k) {
      if (p.ang_src[k] < 0) {
        continue;
      }
      TargetFrame::Dep d;
      d.src = p.ang_src[k];
      d.dr = (dim == Dimension::D2) ? Eigen::MatrixXd(drot2(p.ang[0]))
                                    : Eigen::MatrixXd(drot3(p.ang, k));
      d.dt = Eigen::VectorXd::Zero(td);
      tf.deps.push_back(std::move(d));
      if (dim == Dimension::D2) {
        tf.dpsi.emplace_back(p.ang_src[k], 1.0);
      }
    }
  }
  return tf;
}

TargetFrame build_feature2_target(const std::vector<Entity>& es, const FeatureFrame2& f) {
  const Entity& o = require_entity(es, feature_key(f.origin_id), "change_frame");
  const Entity& x = require_entity(es, feature_key(f.x_axis_id), "change_frame");
  const Eigen::Vector2d d = x.pos.head<2>() - o.pos.head<2>();
  const double q = d.squaredNorm();
  if (std::sqrt(q) < kCoincidence) {
    throw DegenerateFrameError("change_frame: frame features coincide");
  }
  const double phi = std::atan2(d.y(), d.x());

  TargetFrame tf;
  tf.t = o.pos;
  tf.psi = -phi;
  tf.r = rot2(-phi);
  Eigen::Matrix2d dr_dphi = drot2(-phi) * -1.0;  // d rot2(-phi) / d phi

  const Eigen::Vector2d dphi_dd(-d.y() / q, d.x() / q);
  for (int i = 0; i < 2; ++i) {
    if (o.pos_src[i] >= 0) {
      TargetFrame::Dep dep;
      dep.src = o.pos_src[i];
      const double dphi = -dphi_dd[i];
      dep.dr = dr_dphi * dphi;
      dep.dt = Eigen::Vector2d::Unit(i);
      tf.dpsi.emplace_back(dep.src, -dphi);
      tf.deps.push_back(std::move(dep));
    }
    if (x.pos_src[i] >= 0) {
      TargetFrame::Dep dep;
      dep.src = x.pos_src[i];
      const double dphi = dphi_dd[i];
      dep.dr = dr_dphi * dphi;
      dep.dt = Eigen::Vector2d::Zero();
      tf.dpsi.emplace_back(dep.src, -dphi);
      tf.deps.push_back(std::move(dep));
    }
  }
  return tf;
}

TargetFrame build_feature3_target(const std::vector<Entity>& es, const FeatureFrame3& f) {
  const Entity& o = require_entity(es, feature_key(f.origin_id), "change_frame");
  const Entity& x = require_entity(es, feature_key(f.x_axis_id), "change_frame");
  const Entity& y = require_entity(es, feature_key(f.plane_id), "change_frame");

  const Eigen::Vector3d v1 = x.pos.head<3>() - o.pos.head<3>();
  const Eigen::Vector3d u = y.pos.head<3>() - o.pos.head<3>();
  const double n1 = v1.norm();
  const double nu = u.norm();
  if (n1 < kCoincidence || nu < kCoincidence) {
    throw DegenerateFrameError("change_frame: frame features coincide");
  }
  const Eigen::Vector3d v3 = v1.cross(u);
  if (v3.norm() < kCollinearity * n1 * nu) {
    throw DegenerateFrameError("change_frame: frame features are collinear");
  }
  const Eigen::Vector3d v2 = v3.cross(v1);

  const Eigen::Vector3d vs[3] = {v1, v2, v3};
  Eigen::Matrix3d r;
  for (int i = 0; i < 3; ++i) {
    r.row(i) = vs[i].normalized();
  }

  TargetFrame tf;
  tf.t = o.pos;
  tf.r = r;

  // d(v / |v|) = (I - vhat vhat^T) / |v| dv
  auto dnorm = [](const Eigen::Vector3d& v, const Eigen::Vector3d& dv) -> Eigen::Vector3d {
    const double n = v.norm();
    const Eigen::Vector3d vh = v / n;
    return (dv - vh * vh.dot(dv)) / n;
  };

  // Free coordinates of O, X, Y perturb v1 and u along basis directions.
  struct Source {
    const Entity* e;
    double dv1_sign;  // d v1 / d coord
    double du_sign;   // d u / d coord
    bool is_origin;
  };
  const Source sources[3] = {{&o, -1.0, -1.0, true}, {&x, 1.0, 0.0, false}, {&y, 0.0, 1.0, false}};

  for (const Source& s : sources) {
    for (int i = 0; i < 3; ++i) {
      if (s.e->pos_src[i] < 0) {
        continue;
      }
      const Eigen::Vector3d basis = Eigen::Vector3d::Unit(i);
      const Eigen::Vector3d dv1 = s.dv1_sign * basis;
      const Eigen::Vector3d du = s.du_sign * basis;
      const Eigen::Vector3d dv3 = dv1.cross(u) + v1.cross(du);
      const Eigen::Vector3d dv2 = dv3.cross(v1) + v3.cross(dv1);
      TargetFrame::Dep dep;
      dep.src = s.e->pos_src[i];
      dep.dr = Eigen::MatrixXd::Zero(3, 3);
      dep.dr.row(0) = dnorm(v1, dv1).transpose();
      dep.dr.row(1) = dnorm(v2, dv2).transpose();
      dep.dr.row(2) = dnorm(v3, dv3).transpose();
      dep.dt = s.is_origin ? Eigen::Vector3d(basis) : Eigen::Vector3d::Zero();
      tf.deps.push_back(std::move(dep));
    }
  }
  return tf;
}

TargetFrame build_target(const std::vector<Entity>& es, const FrameDescriptor& target,
                         Dimension dim, bool translation_only) {
  if (const auto* p = std::get_if<PoseFrame>(&target)) {
    return build_pose_target(es, p->pose_id, dim, translation_only);
  }
  if (const auto* f2 = std::get_if<FeatureFrame2>(&target)) {
    if (dim != Dimension::D2) {
      throw InvalidInputError("change_frame: 2-feature frame on a 3D map");
    }
    return build_feature2_target(es, *f2);
  }
  if (dim != Dimension::D3) {
    throw InvalidInputError("change_frame: 3-feature frame on a 2D map");
  }
  return build_feature3_target(es, std::get<FeatureFrame3>(target));
}

}  // namespace

FrameChange change_frame(const LocalMap& m, const FrameDescriptor& target, bool with_jacobian) {
  const int td = trans_dim(m.dim);
  const int rd = m.translation_only ? 0 : rot_dim(m.dim);

  FrameChange out;
  if (target == m.frame) {
    out.state = m.estimate;
    if (with_jacobian) {
      out.jacobian.resize(m.estimate.dim(), m.estimate.dim());
      out.jacobian.setIdentity();
    }
    return out;
  }

  const std::vector<Entity> entities = detail::materialize(m);
  const TargetFrame tf = build_target(entities, target, m.dim, m.translation_only);

  // Which entities leave the state, and which keep reduced blocks.
  StateKey drop_key = pose_key(-1);
  int out_x_axis = -1;
  int out_plane = -1;
  if (const auto* p = std::get_if<PoseFrame>(&target)) {
    drop_key = pose_key(p->pose_id);
  } else if (const auto* f2 = std::get_if<FeatureFrame2>(&target)) {
    drop_key = feature_key(f2->origin_id);
    out_x_axis = f2->x_axis_id;
  } else {
    const auto& f3 = std::get<FeatureFrame3>(target);
    drop_key = feature_key(f3.origin_id);
    out_x_axis = f3.x_axis_id;
    out_plane = f3.plane_id;
  }

  std::vector<Eigen::Triplet<double>> jac;
  const int in_dim = m.estimate.dim();

  for (const Entity& e : entities) {
    if (e.key == drop_key) {
      continue;
    }
    int emit_pos = td;
    if (e.key.kind == EntityKind::Feature && e.key.id == out_x_axis) {
      emit_pos = 1;
    } else if (e.key.kind == EntityKind::Feature && e.key.id == out_plane) {
      emit_pos = 2;
    }

    const Eigen::VectorXd rel = e.pos - tf.t;
    const Eigen::VectorXd new_pos = tf.r * rel;

    Eigen::VectorXd block(emit_pos + (e.is_pose() ? rd : 0));
    block.head(emit_pos) = new_pos.head(emit_pos);

    const int row0 = out.state.dim();
    if (with_jacobian) {
      for (int i = 0; i < td; ++i) {
        if (e.pos_src[i] < 0) {
          continue;
        }
        for (int r = 0; r < emit_pos; ++r) {
          jac.emplace_back(row0 + r, e.pos_src[i], tf.r(r, i));
        }
      }
      for (const auto& dep : tf.deps) {
        const Eigen::VectorXd contrib = dep.dr * rel - tf.r * dep.dt;
        for (int r = 0; r < emit_pos; ++r) {
          if (contrib[r] != 0.0) {
            jac.emplace_back(row0 + r, dep.src, contrib[r]);
          }
        }
      }
    }

    if (e.is_pose() && rd > 0) {
      if (m.dim == Dimension::D2) {
        block[emit_pos] = wrap_angle(e.ang[0] - tf.psi);
        if (with_jacobian) {
          if (e.ang_src[0] >= 0) {
            jac.emplace_back(row0 + emit_pos, e.ang_src[0], 1.0);
          }
          for (const auto& [src, d] : tf.dpsi) {
            jac.emplace_back(row0 + emit_pos, src, -d);
          }
        }
      } else {
        const Eigen::Matrix3d me = rot3(e.ang);
        const Eigen::Matrix3d mnew = me * tf.r.transpose();
        const Eigen::Vector3d ang = angles_from_rot3(mnew);
        for (int k = 0; k < 3; ++k) {
          block[emit_pos + k] = wrap_angle(ang[k]);
        }
        if (with_jacobian) {
          const Eigen::Matrix<double, 3, 9> dang = dangles_drot3(mnew);
          for (int k = 0; k < 3; ++k) {
            if (e.ang_src[k] < 0) {
              continue;
            }
            const Eigen::Vector3d col = dang * vec3x3(drot3(e.ang, k) * tf.r.transpose());
            for (int r = 0; r < 3; ++r) {
              if (col[r] != 0.0) {
                jac.emplace_back(row0 + emit_pos + r, e.ang_src[k], col[r]);
              }
            }
          }
          for (const auto& dep : tf.deps) {
            if (dep.dr.isZero(0.0)) {
              continue;
            }
            const Eigen::Vector3d col = dang * vec3x3(me * Eigen::Matrix3d(dep.dr).transpose());
            for (int r = 0; r < 3; ++r) {
              if (col[r] != 0.0) {
                jac.emplace_back(row0 + emit_pos + r, dep.src, col[r]);
              }
            }
          }
        }
      }
    }

    out.state.add(e.key, block);
  }

  if (with_jacobian) {
    out.jacobian.resize(out.state.dim(), in_dim);
    out.jacobian.setFromTriplets(jac.begin(), jac.end());
  }
  return out;
}

LocalMap reframe_map(const LocalMap& m, const FrameDescriptor& target) {
  if (target == m.frame) {
    return m;
  }
  const LocalMap mc = canonicalize(m);
  FrameChange fwd = change_frame(mc, target, false);

  LocalMap out;
  out.dim = mc.dim;
  out.translation_only = mc.translation_only;
  out.frame = target;
  out.estimate = std::move(fwd.state);

  // Jacobian of the reverse transform, evaluated at the new estimate. The
  // information matrix transforms by congruence through it.
  FrameChange rev = change_frame(out, mc.frame, true);
  if (rev.state.dim() != mc.estimate.dim()) {
    throw MissingEntityError("reframe_map: frame change is not invertible for this map");
  }
  out.info = mc.info.congruence(rev.jacobian);
  return out;
}

}  // namespace mapjoin
