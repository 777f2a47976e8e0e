#include "metaxplain/hetgraph.hpp"

#include <algorithm>
#include <deque>
#include <set>
#include <unordered_set>

#include "metaxplain/common.hpp"

namespace metaxplain {

int Schema::node_type_index(const std::string& name) const {
  for (std::size_t i = 0; i < node_types.size(); ++i)
    if (node_types[i] == name) return static_cast<int>(i);
  return -1;
}

int Schema::relation_index(const std::string& name) const {
  for (std::size_t i = 0; i < relations.size(); ++i)
    if (relations[i].name == name) return static_cast<int>(i);
  return -1;
}

ValidationReport validate(const HeteroGraph& g) {
  ValidationReport report;
  auto issue = [&report](std::string where, std::string what) {
    report.push_back({std::move(where), std::move(what)});
  };

  // Schema
  {
    std::unordered_set<std::string> seen;
    for (const auto& t : g.schema.node_types)
      if (!seen.insert(t).second) issue("schema", "duplicate node type '" + t + "'");
    seen.clear();
    for (const auto& r : g.schema.relations) {
      if (!seen.insert(r.name).second) issue("schema", "duplicate relation '" + r.name + "'");
      if (g.schema.node_type_index(r.source_type) < 0)
        issue("schema.relation." + r.name, "unknown source type '" + r.source_type + "'");
      if (g.schema.node_type_index(r.target_type) < 0)
        issue("schema.relation." + r.name, "unknown target type '" + r.target_type + "'");
    }
  }
  if (g.node_counts.size() != g.schema.node_types.size())
    issue("node_counts", "expected one count per node type");
  if (g.edges.size() != g.schema.relations.size()) issue("edges", "expected one edge list per relation");
  if (g.features.size() != g.schema.node_types.size())
    issue("features", "expected one feature matrix per node type");
  const int tt = g.schema.node_type_index(g.target_type);
  if (tt < 0) issue("target_type", "unknown node type '" + g.target_type + "'");
  if (!report.empty()) return report;  // structural mismatches make further checks meaningless

  for (std::size_t t = 0; t < g.node_counts.size(); ++t)
    if (g.node_counts[t] < 0) issue("node_counts." + g.schema.node_types[t], "negative count");

  // Edge endpoint ranges
  for (std::size_t r = 0; r < g.edges.size(); ++r) {
    const auto& rel = g.schema.relations[r];
    const long ns = g.node_counts[g.schema.node_type_index(rel.source_type)];
    const long nt = g.node_counts[g.schema.node_type_index(rel.target_type)];
    for (std::size_t e = 0; e < g.edges[r].size(); ++e) {
      const auto [s, d] = g.edges[r][e];
      if (s < 0 || s >= ns)
        issue("edges." + rel.name + "[" + std::to_string(e) + "]",
              "source index " + std::to_string(s) + " out of range [0, " + std::to_string(ns) + ")");
      if (d < 0 || d >= nt)
        issue("edges." + rel.name + "[" + std::to_string(e) + "]",
              "target index " + std::to_string(d) + " out of range [0, " + std::to_string(nt) + ")");
    }
  }

  // Feature shapes
  for (std::size_t t = 0; t < g.features.size(); ++t) {
    if (g.features[t].rows() != g.node_counts[t])
      issue("features." + g.schema.node_types[t],
            "feature matrix has " + std::to_string(g.features[t].rows()) + " rows for " +
                std::to_string(g.node_counts[t]) + " nodes");
  }

  // Labels
  const long n_target = g.node_counts[tt];
  if (static_cast<long>(g.labels.size()) != n_target)
    issue("labels", "expected " + std::to_string(n_target) + " labels, got " + std::to_string(g.labels.size()));
  else
    for (long i = 0; i < n_target; ++i)
      if (g.labels[i] < 0 || g.labels[i] >= g.num_classes)
        issue("labels[" + std::to_string(i) + "]",
              "label " + std::to_string(g.labels[i]) + " outside [0, " + std::to_string(g.num_classes) + ")");

  // Splits: in range, pairwise disjoint
  auto check_split = [&](const char* name, const std::vector<int>& idx) {
    for (int v : idx)
      if (v < 0 || v >= n_target)
        issue(std::string("splits.") + name, "index " + std::to_string(v) + " out of range");
  };
  check_split("train", g.train_idx);
  check_split("val", g.val_idx);
  check_split("test", g.test_idx);
  std::set<int> train(g.train_idx.begin(), g.train_idx.end());
  std::set<int> val(g.val_idx.begin(), g.val_idx.end());
  for (int v : g.val_idx)
    if (train.count(v)) issue("splits", "index " + std::to_string(v) + " in both train and val");
  for (int v : g.test_idx)
    if (train.count(v) || val.count(v))
      issue("splits", "index " + std::to_string(v) + " in test and another split");

  return report;
}

std::pair<std::string, std::string> step_endpoints(const Schema& schema, const MetaPathStep& step) {
  const int r = schema.relation_index(step.relation);
  if (r < 0) throw SchemaError("meta-path step references unknown relation '" + step.relation + "'");
  const Relation& rel = schema.relations[r];
  return step.reverse ? std::make_pair(rel.target_type, rel.source_type)
                      : std::make_pair(rel.source_type, rel.target_type);
}

bool is_palindromic(const Schema& schema, const MetaPath& mp) {
  const std::size_t L = mp.steps.size();
  for (std::size_t i = 0; i < L; ++i) {
    const auto& a = mp.steps[i];
    const auto& b = mp.steps[L - 1 - i];
    if (a.relation != b.relation) return false;
    if (i != L - 1 - i && a.reverse == b.reverse) return false;
  }
  (void)schema;
  return true;
}

MetaPathView induce_view(const HeteroGraph& g, const MetaPath& mp) {
  if (mp.steps.empty()) throw SchemaError("meta-path '" + mp.name + "' has no steps");

  // Type-compose the step sequence, target type to target type.
  std::string cur = g.target_type;
  for (std::size_t i = 0; i < mp.steps.size(); ++i) {
    const auto [from, to] = step_endpoints(g.schema, mp.steps[i]);
    if (from != cur)
      throw SchemaError("meta-path '" + mp.name + "' step " + std::to_string(i) + " ('" +
                        mp.steps[i].relation + "') expects source type '" + from +
                        "' but the path is at type '" + cur + "'");
    cur = to;
  }
  if (cur != g.target_type)
    throw SchemaError("meta-path '" + mp.name + "' ends at type '" + cur + "', expected target type '" +
                      g.target_type + "'");

  // Per-step adjacency lists in traversal direction.
  std::vector<std::vector<std::vector<int>>> step_adj(mp.steps.size());
  for (std::size_t i = 0; i < mp.steps.size(); ++i) {
    const int r = g.schema.relation_index(mp.steps[i].relation);
    const auto [from, to] = step_endpoints(g.schema, mp.steps[i]);
    const long n_from = g.node_counts[g.schema.node_type_index(from)];
    step_adj[i].assign(n_from, {});
    for (const auto& [s, d] : g.edges[r]) {
      if (mp.steps[i].reverse)
        step_adj[i][d].push_back(s);
      else
        step_adj[i][s].push_back(d);
    }
  }

  const long n = g.target_count();
  std::set<std::pair<int, int>> found;
  std::vector<char> mark;
  std::vector<int> frontier, next;
  for (int u = 0; u < n; ++u) {
    frontier.assign(1, u);
    for (std::size_t i = 0; i < mp.steps.size(); ++i) {
      const auto [from, to] = step_endpoints(g.schema, mp.steps[i]);
      const long n_to = g.node_counts[g.schema.node_type_index(to)];
      mark.assign(n_to, 0);
      next.clear();
      for (int a : frontier)
        for (int b : step_adj[i][a])
          if (!mark[b]) {
            mark[b] = 1;
            next.push_back(b);
          }
      frontier.swap(next);
      if (frontier.empty()) break;
    }
    for (int v : frontier) {
      if (v == u) continue;  // self pairs excluded; encoders add self-loops themselves
      found.emplace(std::min(u, v), std::max(u, v));
    }
  }

  MetaPathView view;
  view.meta_path = mp;
  view.n = static_cast<int>(n);
  view.edges.assign(found.begin(), found.end());
  return view;
}

LocalViewSet extract_local_views(const std::vector<MetaPathView>& views, const Mat& target_features,
                                 int v, int k) {
  if (k < 1) throw ParameterError("extract_local_views: k must be >= 1, got " + std::to_string(k));
  if (v < 0 || v >= target_features.rows())
    throw ParameterError("extract_local_views: node " + std::to_string(v) + " out of range");

  LocalViewSet out;
  out.target = v;
  out.views.reserve(views.size());
  for (const auto& view : views) {
    std::vector<std::vector<int>> adj(view.n);
    for (const auto& [a, b] : view.edges) {
      adj[a].push_back(b);
      adj[b].push_back(a);
    }
    std::vector<int> dist(view.n, -1);
    std::deque<int> queue;
    dist[v] = 0;
    queue.push_back(v);
    std::vector<int> nodes{v};
    while (!queue.empty()) {
      const int u = queue.front();
      queue.pop_front();
      if (dist[u] == k) continue;
      for (int w : adj[u])
        if (dist[w] < 0) {
          dist[w] = dist[u] + 1;
          nodes.push_back(w);
          queue.push_back(w);
        }
    }
    std::sort(nodes.begin(), nodes.end());

    LocalView lv;
    lv.nodes = nodes;
    std::vector<int> local_of(view.n, -1);
    for (std::size_t i = 0; i < nodes.size(); ++i) local_of[nodes[i]] = static_cast<int>(i);
    lv.target_local = local_of[v];
    for (const auto& [a, b] : view.edges)
      if (local_of[a] >= 0 && local_of[b] >= 0)
        lv.edges.emplace_back(std::min(local_of[a], local_of[b]), std::max(local_of[a], local_of[b]));
    std::sort(lv.edges.begin(), lv.edges.end());
    lv.features.resize(static_cast<Eigen::Index>(nodes.size()), target_features.cols());
    for (std::size_t i = 0; i < nodes.size(); ++i)
      lv.features.row(static_cast<Eigen::Index>(i)) = target_features.row(nodes[i]);
    out.views.push_back(std::move(lv));
  }
  return out;
}

}  // namespace metaxplain
