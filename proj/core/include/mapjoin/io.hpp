#pragma once

#include <string>
#include <vector>

#include "mapjoin/local_map.hpp"
#include "mapjoin/raw_data.hpp"

namespace mapjoin {

/// In-memory image of a pose-graph text file (g2o-style tags), converted to
/// the library's rotation conventions. See docs/formats.md for the grammar
/// and the conversion rules.
struct PoseGraph {
  Dimension dim = Dimension::D2;
  bool translation_only = false;

  struct Vertex {
    int id = 0;
    Eigen::VectorXd pose;  // pose block in library convention
  };
  struct Landmark {
    int id = 0;
    Eigen::VectorXd pos;
  };
  struct Edge {
    int from = 0;
    int to = 0;
    Eigen::VectorXd meas;
    Eigen::MatrixXd info;
  };
  struct LandmarkEdge {
    int pose = 0;
    int feature = 0;
    Eigen::VectorXd meas;
    Eigen::MatrixXd info;
  };

  std::vector<Vertex> vertices;
  std::vector<Landmark> landmarks;
  std::vector<Edge> edges;
  std::vector<LandmarkEdge> landmark_edges;
  /// Non-fatal conversion notes, e.g. near-gimbal rotations.
  std::vector<std::string> warnings;
};

/// Local-map exchange files (one map per file, text).
LocalMap read_map_file(const std::string& path);
void write_map_file(const LocalMap& m, const std::string& path);

/// Pose-graph text files. Vertices are optional for edges (endpoints may be
/// implied); information blocks are symmetrized; non-unit quaternions are
/// rejected; near-gimbal rotations are flagged in warnings, not fatal.
PoseGraph read_pose_graph(const std::string& path);
void write_pose_graph(const PoseGraph& g, const std::string& path);

/// The whole graph as one chunk of raw build input.
RawLocalData raw_from_graph(const PoseGraph& g);
PoseGraph graph_from_raw(const RawLocalData& raw);

/// Ground-truth carriers: a vertices-only graph.
StateVector truth_from_graph(const PoseGraph& g);
PoseGraph graph_from_truth(const StateVector& truth, Dimension dim, bool translation_only = false);

/// Splits a connected pose-only graph into chunks of `chunk_size` new poses,
/// consecutive chunks sharing one boundary pose. Every edge lands in exactly
/// one chunk: within the chunk containing both endpoints when possible,
/// otherwise in the chunk of the later pose, with the earlier pose imported
/// as a shared entity.
std::vector<RawLocalData> partition_pose_graph(const PoseGraph& g, int chunk_size);

/// CSV of entity positions with marginal standard deviations from the
/// information matrix (one linear solve per column). Singular information
/// yields empty sigma fields rather than failure.
void write_plot_data(const LocalMap& m, const std::string& path);

}  // namespace mapjoin
