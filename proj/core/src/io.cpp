#include "mapjoin/io.hpp"

#include <Eigen/Cholesky>
#include <Eigen/SparseCholesky>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <set>

#include "mapjoin/angle.hpp"
#include "mapjoin/errors.hpp"
#include "mapjoin/rotation.hpp"
#include "text_util.hpp"

namespace mapjoin {

namespace {

using detail::format_double;
using detail::parse_double;
using detail::parse_int;

std::vector<std::string> split_tokens(const std::string& line) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) {
      ++i;
    }
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t') {
      ++j;
    }
    if (j > i) {
      out.emplace_back(line.substr(i, j - i));
    }
    i = j;
  }
  return out;
}

std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw InvalidInputError("cannot open " + path);
  }
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') {
      line.pop_back();
    }
    lines.push_back(line);
  }
  return lines;
}

double want_double(const std::string& path, int line, const std::string& tok) {
  double v;
  if (!parse_double(tok, v) || !std::isfinite(v)) {
    throw ParseError(path, line, "expected a number, got '" + tok + "'");
  }
  return v;
}

int want_int(const std::string& path, int line, const std::string& tok) {
  int v;
  if (!parse_int(tok, v)) {
    throw ParseError(path, line, "expected an integer, got '" + tok + "'");
  }
  return v;
}

Eigen::MatrixXd upper_tri_info(const std::string& path, int line,
                               const std::vector<std::string>& toks, std::size_t first, int n) {
  Eigen::MatrixXd m(n, n);
  std::size_t idx = first;
  for (int i = 0; i < n; ++i) {
    for (int j = i; j < n; ++j) {
      const double v = want_double(path, line, toks[idx++]);
      m(i, j) = v;
      m(j, i) = v;
    }
  }
  // information blocks must be positive semidefinite
  const double ridge = 1e-12 * std::max(1.0, std::abs(m.trace())) / n;
  Eigen::LLT<Eigen::MatrixXd> llt(m + ridge * Eigen::MatrixXd::Identity(n, n));
  if (llt.info() != Eigen::Success) {
    throw InvalidInputError(path + ":" + std::to_string(line) +
                            ": information block is not positive semidefinite");
  }
  return m;
}

void append_upper_tri(std::string& out, const Eigen::MatrixXd& m) {
  for (int i = 0; i < m.rows(); ++i) {
    for (int j = i; j < m.cols(); ++j) {
      out += " ";
      out += format_double(0.5 * (m(i, j) + m(j, i)));
    }
  }
}

Eigen::Matrix3d quat_to_rot(double qx, double qy, double qz, double qw) {
  Eigen::Matrix3d r;
  r << 1 - 2 * (qy * qy + qz * qz), 2 * (qx * qy - qz * qw), 2 * (qx * qz + qy * qw),
      2 * (qx * qy + qz * qw), 1 - 2 * (qx * qx + qz * qz), 2 * (qy * qz - qx * qw),
      2 * (qx * qz - qy * qw), 2 * (qy * qz + qx * qw), 1 - 2 * (qx * qx + qy * qy);
  return r;
}

Eigen::Vector4d rot_to_quat(const Eigen::Matrix3d& r) {
  // Returns (qx, qy, qz, qw) with qw >= 0.
  Eigen::Vector4d q;
  const double tr = r.trace();
  if (tr > 0.0) {
    double s = std::sqrt(tr + 1.0) * 2.0;
    q << (r(2, 1) - r(1, 2)) / s, (r(0, 2) - r(2, 0)) / s, (r(1, 0) - r(0, 1)) / s, 0.25 * s;
  } else if (r(0, 0) > r(1, 1) && r(0, 0) > r(2, 2)) {
    double s = std::sqrt(1.0 + r(0, 0) - r(1, 1) - r(2, 2)) * 2.0;
    q << 0.25 * s, (r(0, 1) + r(1, 0)) / s, (r(0, 2) + r(2, 0)) / s, (r(2, 1) - r(1, 2)) / s;
  } else if (r(1, 1) > r(2, 2)) {
    double s = std::sqrt(1.0 + r(1, 1) - r(0, 0) - r(2, 2)) * 2.0;
    q << (r(0, 1) + r(1, 0)) / s, 0.25 * s, (r(1, 2) + r(2, 1)) / s, (r(0, 2) - r(2, 0)) / s;
  } else {
    double s = std::sqrt(1.0 + r(2, 2) - r(0, 0) - r(1, 1)) * 2.0;
    q << (r(0, 2) + r(2, 0)) / s, (r(1, 2) + r(2, 1)) / s, 0.25 * s, (r(1, 0) - r(0, 1)) / s;
  }
  if (q[3] < 0.0) {
    q = -q;
  }
  return q;
}

/// Euler extraction tolerant of the pitch singularity; flags instead of
/// throwing so dataset import survives gimbal-adjacent rotations.
Eigen::Vector3d euler_lenient(const Eigen::Matrix3d& r, bool& gimbal) {
  if (std::abs(r(2, 0)) < 1.0 - 1e-9) {
    gimbal = false;
    return angles_from_rot3(r);
  }
  gimbal = true;
  Eigen::Vector3d ypr;
  ypr[1] = -std::asin(std::clamp(r(2, 0), -1.0, 1.0));
  ypr[2] = 0.0;
  ypr[0] = std::atan2(-r(0, 1), r(1, 1));
  return ypr;
}

// The permutation-with-sign map between file rotation blocks (x, y, z order,
// heading sign as stored on disk) and library Euler blocks. Involutory, so
// the same congruence converts information matrices in both directions.
Eigen::MatrixXd rot_block_conversion(Dimension dim) {
  if (dim == Dimension::D2) {
    Eigen::MatrixXd b = Eigen::MatrixXd::Identity(3, 3);
    b(2, 2) = -1.0;
    return b;
  }
  Eigen::MatrixXd b = Eigen::MatrixXd::Zero(6, 6);
  b.topLeftCorner(3, 3).setIdentity();
  b(3, 5) = -1.0;
  b(4, 4) = -1.0;
  b(5, 3) = -1.0;
  return b;
}

}  // namespace

LocalMap read_map_file(const std::string& path) {
  const std::vector<std::string> lines = read_lines(path);
  std::size_t li = 0;

  auto next_tokens = [&](const char* what) -> std::vector<std::string> {
    while (li < lines.size()) {
      const std::string& line = lines[li];
      ++li;
      if (line.empty() || line[0] == '#') {
        continue;
      }
      return split_tokens(line);
    }
    throw ParseError(path, static_cast<int>(lines.size()), std::string("missing ") + what);
  };
  auto here = [&]() { return static_cast<int>(li); };

  {
    const auto t = next_tokens("LMAP header");
    if (t.size() != 2 || t[0] != "LMAP" || t[1] != "1") {
      throw ParseError(path, here(), "expected 'LMAP 1' header");
    }
  }

  LocalMap m;
  {
    const auto t = next_tokens("dim record");
    if (t.size() != 2 || t[0] != "dim") {
      throw ParseError(path, here(), "expected 'dim 2|3'");
    }
    const int d = want_int(path, here(), t[1]);
    if (d != 2 && d != 3) {
      throw ParseError(path, here(), "dim must be 2 or 3");
    }
    m.dim = d == 2 ? Dimension::D2 : Dimension::D3;
  }
  {
    const auto t = next_tokens("transonly record");
    if (t.size() != 2 || t[0] != "transonly") {
      throw ParseError(path, here(), "expected 'transonly 0|1'");
    }
    const int v = want_int(path, here(), t[1]);
    if (v != 0 && v != 1) {
      throw ParseError(path, here(), "transonly must be 0 or 1");
    }
    m.translation_only = v == 1;
  }
  {
    const auto t = next_tokens("frame record");
    if (t.size() >= 3 && t[0] == "frame" && t[1] == "pose" && t.size() == 3) {
      m.frame = PoseFrame{want_int(path, here(), t[2])};
    } else if (t.size() == 4 && t[0] == "frame" && t[1] == "feat2") {
      m.frame = FeatureFrame2{want_int(path, here(), t[2]), want_int(path, here(), t[3])};
    } else if (t.size() == 5 && t[0] == "frame" && t[1] == "feat3") {
      m.frame = FeatureFrame3{want_int(path, here(), t[2]), want_int(path, here(), t[3]),
                              want_int(path, here(), t[4])};
    } else {
      throw ParseError(path, here(), "expected 'frame pose|feat2|feat3 <ids>'");
    }
  }

  int n_entries = 0;
  {
    const auto t = next_tokens("state record");
    if (t.size() != 2 || t[0] != "state") {
      throw ParseError(path, here(), "expected 'state <count>'");
    }
    n_entries = want_int(path, here(), t[1]);
    if (n_entries < 0) {
      throw ParseError(path, here(), "negative state count");
    }
  }

  const int td = trans_dim(m.dim);
  const int pd = pose_dim(m.dim, m.translation_only);
  for (int i = 0; i < n_entries; ++i) {
    const auto t = next_tokens("state entry");
    if (t.size() < 2) {
      throw ParseError(path, here(), "truncated state entry");
    }
    int want = 0;
    StateKey key;
    if (t[0] == "P") {
      key = pose_key(want_int(path, here(), t[1]));
      want = pd;
    } else if (t[0] == "F") {
      key = feature_key(want_int(path, here(), t[1]));
      want = td;
    } else if (t[0] == "FX") {
      key = feature_key(want_int(path, here(), t[1]));
      want = 1;
    } else if (t[0] == "FP") {
      key = feature_key(want_int(path, here(), t[1]));
      want = 2;
    } else {
      throw ParseError(path, here(), "unknown state entry tag '" + t[0] + "'");
    }
    if (static_cast<int>(t.size()) != 2 + want) {
      throw ParseError(path, here(), "state entry has wrong value count");
    }
    Eigen::VectorXd block(want);
    for (int k = 0; k < want; ++k) {
      block[k] = want_double(path, here(), t[2 + k]);
    }
    try {
      m.estimate.add(key, block);
    } catch (const InvalidInputError& e) {
      throw ParseError(path, here(), e.what());
    }
  }

  int nnz = 0;
  {
    const auto t = next_tokens("info record");
    if (t.size() != 2 || t[0] != "info") {
      throw ParseError(path, here(), "expected 'info <nnz>'");
    }
    nnz = want_int(path, here(), t[1]);
    if (nnz < 0) {
      throw ParseError(path, here(), "negative triplet count");
    }
  }
  std::vector<Eigen::Triplet<double>> ts;
  ts.reserve(std::min(nnz, 1 << 20));
  for (int i = 0; i < nnz; ++i) {
    const auto t = next_tokens("info triplet");
    if (t.size() != 3) {
      throw ParseError(path, here(), "info triplet needs 'row col value'");
    }
    const int r = want_int(path, here(), t[0]);
    const int c = want_int(path, here(), t[1]);
    const double v = want_double(path, here(), t[2]);
    if (r < 0 || c < 0 || r >= m.estimate.dim() || c >= m.estimate.dim() || c > r) {
      throw ParseError(path, here(), "info triplet index out of range or above diagonal");
    }
    ts.emplace_back(r, c, v);
  }
  {
    const auto t = next_tokens("end record");
    if (t.size() != 1 || t[0] != "end") {
      throw ParseError(path, here(), "expected 'end'");
    }
  }

  m.info = SparseSymMatrix::from_triplets(m.estimate.dim(), ts);
  try {
    m.validate();
  } catch (const Error& e) {
    throw InvalidInputError(path + ": " + e.what());
  }
  return m;
}

void write_map_file(const LocalMap& m, const std::string& path) {
  std::string out;
  out += "LMAP 1\n";
  out += "dim " + std::to_string(m.dim == Dimension::D2 ? 2 : 3) + "\n";
  out += std::string("transonly ") + (m.translation_only ? "1" : "0") + "\n";
  if (const auto* p = std::get_if<PoseFrame>(&m.frame)) {
    out += "frame pose " + std::to_string(p->pose_id) + "\n";
  } else if (const auto* f2 = std::get_if<FeatureFrame2>(&m.frame)) {
    out += "frame feat2 " + std::to_string(f2->origin_id) + " " + std::to_string(f2->x_axis_id) +
           "\n";
  } else {
    const auto& f3 = std::get<FeatureFrame3>(m.frame);
    out += "frame feat3 " + std::to_string(f3.origin_id) + " " + std::to_string(f3.x_axis_id) +
           " " + std::to_string(f3.plane_id) + "\n";
  }

  out += "state " + std::to_string(m.estimate.size()) + "\n";
  const int td = trans_dim(m.dim);
  for (const auto& e : m.estimate.entries()) {
    if (e.key.kind == EntityKind::Pose) {
      out += "P";
    } else if (e.dim == 1) {
      out += "FX";
    } else if (e.dim == 2 && td == 3) {
      out += "FP";
    } else {
      out += "F";
    }
    out += " " + std::to_string(e.key.id);
    for (int k = 0; k < e.dim; ++k) {
      out += " " + format_double(m.estimate.values()[e.offset + k]);
    }
    out += "\n";
  }

  const auto ts = m.info.lower_triplets();
  out += "info " + std::to_string(ts.size()) + "\n";
  for (const auto& t : ts) {
    out += std::to_string(t.row()) + " " + std::to_string(t.col()) + " " + format_double(t.value()) +
           "\n";
  }
  out += "end\n";

  std::ofstream f(path, std::ios::binary);
  if (!f) {
    throw InvalidInputError("cannot write " + path);
  }
  f << out;
}

PoseGraph read_pose_graph(const std::string& path) {
  const std::vector<std::string> lines = read_lines(path);

  PoseGraph g;
  std::optional<Dimension> dim;
  std::optional<bool> transonly;

  auto require_mode = [&](int line, Dimension d, std::optional<bool> t) {
    if (dim && *dim != d) {
      throw ParseError(path, line, "mixed 2D and 3D records");
    }
    dim = d;
    if (t) {
      if (transonly && *transonly != *t) {
        throw ParseError(path, line, "mixed full and translation-only records");
      }
      transonly = *t;
    }
  };

  for (std::size_t li = 0; li < lines.size(); ++li) {
    const int ln = static_cast<int>(li + 1);
    const std::string& raw = lines[li];
    if (raw.empty() || raw[0] == '#') {
      continue;
    }
    const auto t = split_tokens(raw);
    if (t.empty()) {
      continue;
    }
    const std::string& tag = t[0];

    if (tag == "FIX") {
      continue;  // gauge hints are not needed; chunks pick their own frames
    }

    if (tag == "VERTEX_SE2") {
      require_mode(ln, Dimension::D2, false);
      if (t.size() != 5) {
        throw ParseError(path, ln, "VERTEX_SE2 needs id x y theta");
      }
      PoseGraph::Vertex v;
      v.id = want_int(path, ln, t[1]);
      v.pose.resize(3);
      v.pose[0] = want_double(path, ln, t[2]);
      v.pose[1] = want_double(path, ln, t[3]);
      v.pose[2] = wrap_angle(-want_double(path, ln, t[4]));
      g.vertices.push_back(std::move(v));
    } else if (tag == "VERTEX_T2") {
      require_mode(ln, Dimension::D2, true);
      if (t.size() != 4) {
        throw ParseError(path, ln, "VERTEX_T2 needs id x y");
      }
      PoseGraph::Vertex v;
      v.id = want_int(path, ln, t[1]);
      v.pose.resize(2);
      v.pose[0] = want_double(path, ln, t[2]);
      v.pose[1] = want_double(path, ln, t[3]);
      g.vertices.push_back(std::move(v));
    } else if (tag == "VERTEX_T3") {
      require_mode(ln, Dimension::D3, true);
      if (t.size() != 5) {
        throw ParseError(path, ln, "VERTEX_T3 needs id x y z");
      }
      PoseGraph::Vertex v;
      v.id = want_int(path, ln, t[1]);
      v.pose.resize(3);
      for (int k = 0; k < 3; ++k) {
        v.pose[k] = want_double(path, ln, t[2 + k]);
      }
      g.vertices.push_back(std::move(v));
    } else if (tag == "VERTEX_SE3:QUAT") {
      require_mode(ln, Dimension::D3, false);
      if (t.size() != 9) {
        throw ParseError(path, ln, "VERTEX_SE3:QUAT needs id x y z qx qy qz qw");
      }
      PoseGraph::Vertex v;
      v.id = want_int(path, ln, t[1]);
      double num[7];
      for (int k = 0; k < 7; ++k) {
        num[k] = want_double(path, ln, t[2 + k]);
      }
      const double qn = std::sqrt(num[3] * num[3] + num[4] * num[4] + num[5] * num[5] +
                                  num[6] * num[6]);
      if (std::abs(qn - 1.0) > 1e-6) {
        throw InvalidInputError(path + ":" + std::to_string(ln) + ": non-unit quaternion");
      }
      const Eigen::Matrix3d r = quat_to_rot(num[3] / qn, num[4] / qn, num[5] / qn, num[6] / qn);
      bool gimbal = false;
      v.pose.resize(6);
      v.pose.head(3) << num[0], num[1], num[2];
      v.pose.tail(3) = euler_lenient(r.transpose(), gimbal);
      if (gimbal) {
        g.warnings.push_back("vertex " + std::to_string(v.id) + " near the Euler singularity");
      }
      g.vertices.push_back(std::move(v));
    } else if (tag == "VERTEX_XY") {
      require_mode(ln, Dimension::D2, std::nullopt);
      if (t.size() != 4) {
        throw ParseError(path, ln, "VERTEX_XY needs id x y");
      }
      PoseGraph::Landmark l;
      l.id = want_int(path, ln, t[1]);
      l.pos.resize(2);
      l.pos[0] = want_double(path, ln, t[2]);
      l.pos[1] = want_double(path, ln, t[3]);
      g.landmarks.push_back(std::move(l));
    } else if (tag == "VERTEX_TRACKXYZ" || tag == "VERTEX_XYZ") {
      require_mode(ln, Dimension::D3, std::nullopt);
      if (t.size() != 5) {
        throw ParseError(path, ln, tag + " needs id x y z");
      }
      PoseGraph::Landmark l;
      l.id = want_int(path, ln, t[1]);
      l.pos.resize(3);
      for (int k = 0; k < 3; ++k) {
        l.pos[k] = want_double(path, ln, t[2 + k]);
      }
      g.landmarks.push_back(std::move(l));
    } else if (tag == "EDGE_SE2") {
      require_mode(ln, Dimension::D2, false);
      if (t.size() != 12) {
        throw ParseError(path, ln, "EDGE_SE2 needs i j dx dy dth and 6 info values");
      }
      PoseGraph::Edge e;
      e.from = want_int(path, ln, t[1]);
      e.to = want_int(path, ln, t[2]);
      e.meas.resize(3);
      e.meas[0] = want_double(path, ln, t[3]);
      e.meas[1] = want_double(path, ln, t[4]);
      e.meas[2] = wrap_angle(-want_double(path, ln, t[5]));
      const Eigen::MatrixXd b = rot_block_conversion(Dimension::D2);
      e.info = b * upper_tri_info(path, ln, t, 6, 3) * b;
      g.edges.push_back(std::move(e));
    } else if (tag == "EDGE_T2") {
      require_mode(ln, Dimension::D2, true);
      if (t.size() != 8) {
        throw ParseError(path, ln, "EDGE_T2 needs i j dx dy and 3 info values");
      }
      PoseGraph::Edge e;
      e.from = want_int(path, ln, t[1]);
      e.to = want_int(path, ln, t[2]);
      e.meas.resize(2);
      e.meas[0] = want_double(path, ln, t[3]);
      e.meas[1] = want_double(path, ln, t[4]);
      e.info = upper_tri_info(path, ln, t, 5, 2);
      g.edges.push_back(std::move(e));
    } else if (tag == "EDGE_T3") {
      require_mode(ln, Dimension::D3, true);
      if (t.size() != 12) {
        throw ParseError(path, ln, "EDGE_T3 needs i j dx dy dz and 6 info values");
      }
      PoseGraph::Edge e;
      e.from = want_int(path, ln, t[1]);
      e.to = want_int(path, ln, t[2]);
      e.meas.resize(3);
      for (int k = 0; k < 3; ++k) {
        e.meas[k] = want_double(path, ln, t[3 + k]);
      }
      e.info = upper_tri_info(path, ln, t, 6, 3);
      g.edges.push_back(std::move(e));
    } else if (tag == "EDGE_SE3:QUAT") {
      require_mode(ln, Dimension::D3, false);
      if (t.size() != 31) {
        throw ParseError(path, ln, "EDGE_SE3:QUAT needs i j, 7 measurement and 21 info values");
      }
      PoseGraph::Edge e;
      e.from = want_int(path, ln, t[1]);
      e.to = want_int(path, ln, t[2]);
      double num[7];
      for (int k = 0; k < 7; ++k) {
        num[k] = want_double(path, ln, t[3 + k]);
      }
      const double qn = std::sqrt(num[3] * num[3] + num[4] * num[4] + num[5] * num[5] +
                                  num[6] * num[6]);
      if (std::abs(qn - 1.0) > 1e-6) {
        throw InvalidInputError(path + ":" + std::to_string(ln) + ": non-unit quaternion");
      }
      const Eigen::Matrix3d r = quat_to_rot(num[3] / qn, num[4] / qn, num[5] / qn, num[6] / qn);
      bool gimbal = false;
      e.meas.resize(6);
      e.meas.head(3) << num[0], num[1], num[2];
      e.meas.tail(3) = euler_lenient(r.transpose(), gimbal);
      if (gimbal) {
        g.warnings.push_back("edge " + std::to_string(e.from) + "->" + std::to_string(e.to) +
                             " near the Euler singularity");
      }
      const Eigen::MatrixXd b = rot_block_conversion(Dimension::D3);
      e.info = b * upper_tri_info(path, ln, t, 10, 6) * b;
      g.edges.push_back(std::move(e));
    } else if (tag == "EDGE_SE2_XY" || tag == "EDGE_T2_XY") {
      require_mode(ln, Dimension::D2, tag == "EDGE_T2_XY" ? std::optional<bool>(true)
                                                          : std::optional<bool>(false));
      if (t.size() != 8) {
        throw ParseError(path, ln, tag + " needs i j dx dy and 3 info values");
      }
      PoseGraph::LandmarkEdge e;
      e.pose = want_int(path, ln, t[1]);
      e.feature = want_int(path, ln, t[2]);
      e.meas.resize(2);
      e.meas[0] = want_double(path, ln, t[3]);
      e.meas[1] = want_double(path, ln, t[4]);
      e.info = upper_tri_info(path, ln, t, 5, 2);
      g.landmark_edges.push_back(std::move(e));
    } else if (tag == "EDGE_SE3_TRACKXYZ" || tag == "EDGE_SE3_XYZ" || tag == "EDGE_T3_XYZ") {
      require_mode(ln, Dimension::D3, tag == "EDGE_T3_XYZ" ? std::optional<bool>(true)
                                                           : std::optional<bool>(false));
      if (t.size() != 12) {
        throw ParseError(path, ln, tag + " needs i j dx dy dz and 6 info values");
      }
      PoseGraph::LandmarkEdge e;
      e.pose = want_int(path, ln, t[1]);
      e.feature = want_int(path, ln, t[2]);
      e.meas.resize(3);
      for (int k = 0; k < 3; ++k) {
        e.meas[k] = want_double(path, ln, t[3 + k]);
      }
      e.info = upper_tri_info(path, ln, t, 6, 3);
      g.landmark_edges.push_back(std::move(e));
    } else {
      throw ParseError(path, ln, "unknown record '" + tag + "'");
    }
  }

  if (dim) {
    g.dim = *dim;
  }
  g.translation_only = transonly.value_or(false);
  return g;
}

void write_pose_graph(const PoseGraph& g, const std::string& path) {
  std::string out;
  const bool d2 = g.dim == Dimension::D2;

  for (const auto& v : g.vertices) {
    if (g.translation_only) {
      out += d2 ? "VERTEX_T2 " : "VERTEX_T3 ";
      out += std::to_string(v.id);
      for (int k = 0; k < v.pose.size(); ++k) {
        out += " " + format_double(v.pose[k]);
      }
    } else if (d2) {
      out += "VERTEX_SE2 " + std::to_string(v.id) + " " + format_double(v.pose[0]) + " " +
             format_double(v.pose[1]) + " " + format_double(wrap_angle(-v.pose[2]));
    } else {
      const Eigen::Vector4d q = rot_to_quat(rot3(v.pose.tail(3)).transpose());
      out += "VERTEX_SE3:QUAT " + std::to_string(v.id);
      for (int k = 0; k < 3; ++k) {
        out += " " + format_double(v.pose[k]);
      }
      for (int k = 0; k < 4; ++k) {
        out += " " + format_double(q[k]);
      }
    }
    out += "\n";
  }

  for (const auto& l : g.landmarks) {
    out += d2 ? "VERTEX_XY " : "VERTEX_TRACKXYZ ";
    out += std::to_string(l.id);
    for (int k = 0; k < l.pos.size(); ++k) {
      out += " " + format_double(l.pos[k]);
    }
    out += "\n";
  }

  for (const auto& e : g.edges) {
    if (g.translation_only) {
      out += d2 ? "EDGE_T2 " : "EDGE_T3 ";
      out += std::to_string(e.from) + " " + std::to_string(e.to);
      for (int k = 0; k < e.meas.size(); ++k) {
        out += " " + format_double(e.meas[k]);
      }
      append_upper_tri(out, e.info);
    } else if (d2) {
      out += "EDGE_SE2 " + std::to_string(e.from) + " " + std::to_string(e.to) + " " +
             format_double(e.meas[0]) + " " + format_double(e.meas[1]) + " " +
             format_double(wrap_angle(-e.meas[2]));
      const Eigen::MatrixXd b = rot_block_conversion(Dimension::D2);
      append_upper_tri(out, Eigen::MatrixXd(b * e.info * b));
    } else {
      const Eigen::Vector4d q = rot_to_quat(rot3(e.meas.tail(3)).transpose());
      out += "EDGE_SE3:QUAT " + std::to_string(e.from) + " " + std::to_string(e.to);
      for (int k = 0; k < 3; ++k) {
        out += " " + format_double(e.meas[k]);
      }
      for (int k = 0; k < 4; ++k) {
        out += " " + format_double(q[k]);
      }
      const Eigen::MatrixXd b = rot_block_conversion(Dimension::D3);
      append_upper_tri(out, Eigen::MatrixXd(b * e.info * b));
    }
    out += "\n";
  }

  for (const auto& e : g.landmark_edges) {
    if (d2) {
      out += g.translation_only ? "EDGE_T2_XY " : "EDGE_SE2_XY ";
    } else {
      out += g.translation_only ? "EDGE_T3_XYZ " : "EDGE_SE3_TRACKXYZ ";
    }
    out += std::to_string(e.pose) + " " + std::to_string(e.feature);
    for (int k = 0; k < e.meas.size(); ++k) {
      out += " " + format_double(e.meas[k]);
    }
    append_upper_tri(out, e.info);
    out += "\n";
  }

  std::ofstream f(path, std::ios::binary);
  if (!f) {
    throw InvalidInputError("cannot write " + path);
  }
  f << out;
}

RawLocalData raw_from_graph(const PoseGraph& g) {
  RawLocalData raw;
  raw.dim = g.dim;
  raw.translation_only = g.translation_only;

  std::set<int> poses;
  for (const auto& v : g.vertices) {
    poses.insert(v.id);
  }
  for (const auto& e : g.edges) {
    poses.insert(e.from);
    poses.insert(e.to);
  }
  for (const auto& e : g.landmark_edges) {
    poses.insert(e.pose);
  }
  raw.pose_ids.assign(poses.begin(), poses.end());

  for (const auto& e : g.edges) {
    raw.odometry.push_back({e.from, e.to, e.meas, e.info});
  }
  for (const auto& e : g.landmark_edges) {
    raw.observations.push_back({e.pose, e.feature, e.meas, e.info});
  }
  return raw;
}

PoseGraph graph_from_raw(const RawLocalData& raw) {
  PoseGraph g;
  g.dim = raw.dim;
  g.translation_only = raw.translation_only;
  for (const auto& e : raw.odometry) {
    g.edges.push_back({e.from, e.to, e.meas, e.info});
  }
  for (const auto& o : raw.observations) {
    g.landmark_edges.push_back({o.pose, o.feature, o.meas, o.info});
  }
  return g;
}

StateVector truth_from_graph(const PoseGraph& g) {
  std::map<int, const PoseGraph::Vertex*> vs;
  for (const auto& v : g.vertices) {
    vs[v.id] = &v;
  }
  std::map<int, const PoseGraph::Landmark*> ls;
  for (const auto& l : g.landmarks) {
    ls[l.id] = &l;
  }
  StateVector sv;
  for (const auto& [id, v] : vs) {
    sv.add(pose_key(id), v->pose);
  }
  for (const auto& [id, l] : ls) {
    sv.add(feature_key(id), l->pos);
  }
  return sv;
}

PoseGraph graph_from_truth(const StateVector& truth, Dimension dim, bool translation_only) {
  PoseGraph g;
  g.dim = dim;
  g.translation_only = translation_only;
  for (const auto& e : truth.entries()) {
    if (e.key.kind == EntityKind::Pose) {
      g.vertices.push_back({e.key.id, truth.values().segment(e.offset, e.dim)});
    } else {
      g.landmarks.push_back({e.key.id, truth.values().segment(e.offset, e.dim)});
    }
  }
  return g;
}

std::vector<RawLocalData> partition_pose_graph(const PoseGraph& g, int chunk_size) {
  if (chunk_size < 2) {
    throw InvalidInputError("partition_pose_graph: chunk size must be >= 2");
  }
  if (!g.landmark_edges.empty()) {
    throw InvalidInputError("partition_pose_graph: expects a pose-only graph");
  }

  std::set<int> pose_set;
  for (const auto& v : g.vertices) {
    pose_set.insert(v.id);
  }
  for (const auto& e : g.edges) {
    pose_set.insert(e.from);
    pose_set.insert(e.to);
  }
  const std::vector<int> poses(pose_set.begin(), pose_set.end());
  const int n = static_cast<int>(poses.size());
  if (n < 2) {
    throw InvalidInputError("partition_pose_graph: needs at least two poses");
  }

  // Whole-graph connectivity.
  {
    std::map<int, int> comp;
    int next = 0;
    for (int id : poses) {
      comp[id] = next++;
    }
    std::vector<int> parent(n);
    for (int i = 0; i < n; ++i) {
      parent[i] = i;
    }
    std::function<int(int)> find = [&](int a) {
      return parent[a] == a ? a : parent[a] = find(parent[a]);
    };
    for (const auto& e : g.edges) {
      parent[find(comp[e.from])] = find(comp[e.to]);
    }
    for (int i = 1; i < n; ++i) {
      if (find(i) != find(0)) {
        throw InvalidInputError("partition_pose_graph: graph is disconnected");
      }
    }
  }

  std::map<int, int> group;  // pose id -> owning group index
  const int n_groups = (n + chunk_size - 1) / chunk_size;
  for (int i = 0; i < n; ++i) {
    group[poses[i]] = i / chunk_size;
  }

  std::vector<RawLocalData> chunks(n_groups);
  std::vector<std::set<int>> chunk_poses(n_groups);
  for (int c = 0; c < n_groups; ++c) {
    chunks[c].dim = g.dim;
    chunks[c].translation_only = g.translation_only;
    const int first = c * chunk_size;
    const int last = std::min(n, first + chunk_size);
    for (int i = first; i < last; ++i) {
      chunk_poses[c].insert(poses[i]);
    }
    if (c > 0) {
      chunk_poses[c].insert(poses[first - 1]);  // shared boundary pose
    }
  }

  for (const auto& e : g.edges) {
    const int ga = group[e.from];
    const int gb = group[e.to];
    int target = -1;
    for (int cand : {std::min(ga, gb), std::max(ga, gb), std::max(ga, gb) + 1}) {
      if (cand >= 0 && cand < n_groups && chunk_poses[cand].count(e.from) &&
          chunk_poses[cand].count(e.to)) {
        target = cand;
        break;
      }
    }
    if (target < 0) {
      // Loop closure: the chunk of the later pose imports the earlier one.
      const int later = std::max(e.from, e.to);
      const int earlier = std::min(e.from, e.to);
      target = group[later];
      chunk_poses[target].insert(earlier);
    }
    chunks[target].odometry.push_back({e.from, e.to, e.meas, e.info});
  }

  for (int c = 0; c < n_groups; ++c) {
    chunks[c].pose_ids.assign(chunk_poses[c].begin(), chunk_poses[c].end());
  }
  return chunks;
}

void write_plot_data(const LocalMap& m, const std::string& path) {
  const int td = trans_dim(m.dim);
  std::string out = td == 2 ? "kind,id,x,y,sigma_x,sigma_y\n" : "kind,id,x,y,z,sigma_x,sigma_y,sigma_z\n";

  // Marginal standard deviations: one solve per state column.
  bool have_cov = true;
  Eigen::SimplicialLLT<Eigen::SparseMatrix<double>, Eigen::Lower, Eigen::AMDOrdering<int>> llt;
  if (m.estimate.dim() > 0) {
    llt.compute(m.info.full());
    have_cov = llt.info() == Eigen::Success;
  }
  auto sigma_of = [&](int col) -> std::string {
    if (!have_cov) {
      return "";
    }
    Eigen::VectorXd e = Eigen::VectorXd::Zero(m.estimate.dim());
    e[col] = 1.0;
    const Eigen::VectorXd u = llt.solve(e);
    const double var = u[col];
    if (!(var >= 0.0)) {
      return "";
    }
    return format_double(std::sqrt(var));
  };

  for (const auto& e : m.estimate.entries()) {
    out += e.key.kind == EntityKind::Pose ? "pose," : "feature,";
    out += std::to_string(e.key.id);
    const int free_pos = e.key.kind == EntityKind::Pose ? td : std::min(e.dim, td);
    // Coordinates fixed by the frame are exactly zero with zero deviation.
    for (int k = 0; k < td; ++k) {
      out += ",";
      out += k < free_pos ? format_double(m.estimate.values()[e.offset + k]) : "0";
    }
    for (int k = 0; k < td; ++k) {
      out += ",";
      out += k < free_pos ? sigma_of(e.offset + k) : "0";
    }
    out += "\n";
  }

  std::ofstream f(path, std::ios::binary);
  if (!f) {
    throw InvalidInputError("cannot write " + path);
  }
  f << out;
}

}  // namespace mapjoin
