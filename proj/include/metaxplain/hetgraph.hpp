#pragma once

#include <string>
#include <utility>
#include <vector>

#include "metaxplain/tensor.hpp"

namespace metaxplain {

struct Relation {
  std::string name;
  std::string source_type;
  std::string target_type;
};

struct Schema {
  std::vector<std::string> node_types;
  std::vector<Relation> relations;

  int node_type_index(const std::string& name) const;  // -1 when absent
  int relation_index(const std::string& name) const;
};

using EdgeList = std::vector<std::pair<int, int>>;

// Typed multigraph with per-type feature matrices. Immutable by convention
// once built; construction code fills the fields and calls validate().
struct HeteroGraph {
  Schema schema;
  std::vector<long> node_counts;  // aligned with schema.node_types
  std::vector<EdgeList> edges;    // aligned with schema.relations
  std::vector<Mat> features;      // aligned with schema.node_types
  std::string target_type;
  int num_classes = 0;
  std::vector<int> labels;  // one per target-type node
  std::vector<int> train_idx, val_idx, test_idx;

  int target_type_index() const { return schema.node_type_index(target_type); }
  long target_count() const { return node_counts[target_type_index()]; }
  const Mat& target_features() const { return features[target_type_index()]; }
};

struct MetaPathStep {
  std::string relation;
  bool reverse = false;  // traverse the relation target -> source
};

struct MetaPath {
  std::string name;
  std::vector<MetaPathStep> steps;
};

// Homogeneous view over target-type nodes: (u, v) connected iff at least one
// instance path matches the meta-path. Stored as undirected pairs (u < v),
// sorted and deduplicated; self pairs excluded.
struct MetaPathView {
  MetaPath meta_path;
  int n = 0;
  EdgeList edges;
};

struct LocalView {
  std::vector<int> nodes;  // local -> global map, ascending
  EdgeList edges;          // local undirected pairs (u < v)
  Mat features;            // rows aligned with `nodes`
  int target_local = -1;
};

// k-hop ego subgraphs of one target node, one per meta-path view. The target
// is present in every view, as an isolated node when it has no neighbors.
struct LocalViewSet {
  int target = -1;
  std::vector<LocalView> views;
};

struct ValidationIssue {
  std::string location;
  std::string message;
};
using ValidationReport = std::vector<ValidationIssue>;

// Checks every HeteroGraph invariant; empty report means the graph is valid.
ValidationReport validate(const HeteroGraph& g);

// Resolved endpoint types of a meta-path step.
std::pair<std::string, std::string> step_endpoints(const Schema& schema, const MetaPathStep& step);

// True when the reversed step sequence traverses the same relations backwards.
bool is_palindromic(const Schema& schema, const MetaPath& mp);

// Boolean-reachability composition of the step adjacencies. Throws SchemaError
// when the meta-path does not compose over the schema or does not start and
// end at the target type.
MetaPathView induce_view(const HeteroGraph& g, const MetaPath& mp);

// Per-view BFS to depth k around v; nodes re-indexed ascending by global id,
// features gathered per view from `target_features`.
LocalViewSet extract_local_views(const std::vector<MetaPathView>& views, const Mat& target_features,
                                 int v, int k);

}  // namespace metaxplain
