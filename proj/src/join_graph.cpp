#include "modeljoin/join_graph.hpp"

#include <algorithm>
#include <map>
#include <set>

#include "modeljoin/errors.hpp"
#include "modeljoin/logging.hpp"
#include "modeljoin/table_model.hpp"

namespace modeljoin {

bool SkeletonNode::contains(const AttrRef& ref) const {
  return std::find(members.begin(), members.end(), ref) != members.end();
}

int SkeletonLayout::node_of(const AttrRef& ref) const {
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (nodes[i].contains(ref)) return static_cast<int>(i);
  }
  return -1;
}

std::vector<std::string> SkeletonGraph::column_labels() const {
  std::vector<std::string> out;
  out.reserve(nodes.size());
  for (const auto& n : nodes) out.push_back(n.label);
  return out;
}

namespace {

struct UnionFind {
  std::map<AttrRef, AttrRef> parent;

  AttrRef find(const AttrRef& x) {
    auto it = parent.find(x);
    if (it == parent.end()) {
      parent[x] = x;
      return x;
    }
    if (it->second == x) return x;
    AttrRef root = find(it->second);
    parent[x] = root;
    return root;
  }

  void unite(const AttrRef& a, const AttrRef& b) { parent[find(a)] = find(b); }
};

struct GraphEdge {
  std::string table_id;
  std::string first_attr;
  std::string second_attr;
  int first_class = -1;
  int second_class = -1;
  bool active = true;

  int other(int cls) const { return cls == first_class ? second_class : first_class; }
};

// Non-bridge (cycle) edges of the active multigraph, via DFS low-links.
std::vector<int> cycle_edges(int class_count, const std::vector<GraphEdge>& edges) {
  std::vector<std::vector<std::pair<int, int>>> adj(class_count);  // (neighbor, edge id)
  for (std::size_t e = 0; e < edges.size(); ++e) {
    if (!edges[e].active) continue;
    adj[edges[e].first_class].push_back({edges[e].second_class, static_cast<int>(e)});
    adj[edges[e].second_class].push_back({edges[e].first_class, static_cast<int>(e)});
  }
  std::vector<int> disc(class_count, -1), low(class_count, 0);
  std::vector<bool> is_bridge(edges.size(), false);
  int timer = 0;

  // Iterative DFS; parallel edges are distinct ids, so a doubled edge is never
  // classified as a bridge.
  struct Frame {
    int node;
    int parent_edge;
    std::size_t next_child = 0;
  };
  for (int start = 0; start < class_count; ++start) {
    if (disc[start] != -1) continue;
    std::vector<Frame> stack{{start, -1}};
    disc[start] = low[start] = timer++;
    while (!stack.empty()) {
      Frame& f = stack.back();
      if (f.next_child < adj[f.node].size()) {
        auto [to, eid] = adj[f.node][f.next_child++];
        if (eid == f.parent_edge) continue;
        if (disc[to] == -1) {
          disc[to] = low[to] = timer++;
          stack.push_back({to, eid});
        } else {
          low[f.node] = std::min(low[f.node], disc[to]);
        }
      } else {
        if (stack.size() > 1) {
          Frame& parent = stack[stack.size() - 2];
          low[parent.node] = std::min(low[parent.node], low[f.node]);
          if (low[f.node] > disc[parent.node]) is_bridge[f.parent_edge] = true;
        }
        stack.pop_back();
      }
    }
  }

  std::vector<int> out;
  for (std::size_t e = 0; e < edges.size(); ++e) {
    if (edges[e].active && !is_bridge[e]) out.push_back(static_cast<int>(e));
  }
  return out;
}

const TableMeta& meta_of(const std::vector<TableMeta>& tables, const std::string& id) {
  for (const auto& t : tables) {
    if (t.table_id == id) return t;
  }
  raise(ErrorKind::Internal, "layout lost table " + id);
}

}  // namespace

SkeletonLayout compute_skeleton_layout(const std::vector<TableMeta>& tables,
                                       const std::vector<QueryCondition>& conditions,
                                       const std::vector<AttrRef>& selected,
                                       const NdpLookup& distinct_pairs,
                                       const std::optional<std::string>& root_choice) {
  SkeletonLayout layout;

  if (conditions.empty()) {
    if (tables.size() != 1) {
      raise(ErrorKind::UnsupportedShape,
            "disconnected join graph: multiple tables with no join conditions");
    }
    // Single-table query: the first declared JA stands in as the skeleton node
    // so sampling draws uniform rows of the table.
    const TableMeta& t = tables.front();
    const std::string& ja = t.join_attrs.front().attr;
    SkeletonNode node;
    node.members.push_back({t.table_id, ja});
    node.label = node.members.front().qualified();
    layout.nodes.push_back(node);
    layout.root_anchor = AnchorInfo{t.table_id, ja};
    std::set<AttrRef> attached;
    for (const auto& sel : selected) {
      if (sel.attr == ja || !attached.insert(sel).second) continue;
      layout.attachments.push_back(AttachmentInfo{sel, t.table_id, {{ja, 0}}});
    }
    return layout;
  }

  // Attribute classes induced by the equality conditions.
  UnionFind uf;
  for (const auto& c : conditions) uf.unite(c.left, c.right);

  std::vector<std::vector<AttrRef>> classes;
  std::map<AttrRef, int> class_of;
  auto register_ref = [&](const AttrRef& ref) {
    AttrRef root = uf.find(ref);
    auto it = class_of.find(root);
    int cls;
    if (it == class_of.end()) {
      cls = static_cast<int>(classes.size());
      classes.push_back({});
      class_of[root] = cls;
    } else {
      cls = it->second;
    }
    auto& members = classes[cls];
    if (std::find(members.begin(), members.end(), ref) == members.end()) members.push_back(ref);
    return cls;
  };
  for (const auto& c : conditions) {
    register_ref(c.left);
    register_ref(c.right);
  }
  const int class_count = static_cast<int>(classes.size());

  // Classify tables into chain edges (two participating classes) and anchors.
  std::vector<GraphEdge> edges;
  std::vector<std::pair<AnchorInfo, int>> anchors;  // anchor, class
  for (const auto& t : tables) {
    std::vector<std::pair<std::string, int>> participating;  // (attr, class)
    for (const auto& ja : t.join_attrs) {
      AttrRef ref{t.table_id, ja.attr};
      AttrRef root = uf.find(ref);
      auto it = class_of.find(root);
      if (it != class_of.end() && classes[it->second].size() > 0 &&
          std::find(classes[it->second].begin(), classes[it->second].end(), ref) !=
              classes[it->second].end()) {
        participating.push_back({ja.attr, it->second});
      }
    }
    if (participating.empty()) {
      raise(ErrorKind::Resolution,
            "table " + t.table_id + " is not connected by any join condition");
    }
    if (participating.size() == 2) {
      if (participating[0].second == participating[1].second) {
        raise(ErrorKind::UnsupportedShape,
              "table " + t.table_id + " joins both its JAs into one attribute class");
      }
      GraphEdge e;
      e.table_id = t.table_id;
      const std::string* first = t.ja_attr(JaPosition::First);
      const std::string* second = t.ja_attr(JaPosition::Second);
      e.first_attr = *first;
      e.second_attr = *second;
      for (const auto& [attr, cls] : participating) {
        if (attr == *first) e.first_class = cls;
        if (attr == *second) e.second_class = cls;
      }
      edges.push_back(e);
    } else {
      anchors.push_back({AnchorInfo{t.table_id, participating[0].first}, participating[0].second});
    }
  }

  // Connectivity over classes through edge tables.
  {
    std::vector<bool> seen(class_count, false);
    std::vector<int> stack{0};
    seen[0] = true;
    while (!stack.empty()) {
      int cls = stack.back();
      stack.pop_back();
      for (const auto& e : edges) {
        if (e.first_class == cls && !seen[e.second_class]) {
          seen[e.second_class] = true;
          stack.push_back(e.second_class);
        } else if (e.second_class == cls && !seen[e.first_class]) {
          seen[e.first_class] = true;
          stack.push_back(e.first_class);
        }
      }
    }
    if (!std::all_of(seen.begin(), seen.end(), [](bool b) { return b; })) {
      raise(ErrorKind::UnsupportedShape, "disconnected join graph");
    }
  }

  // Break cycles: repeatedly drop the cycle edge whose table has the most
  // distinct JA pairs, ties to the lexicographically larger table id. Every
  // removed edge lies on a cycle at removal time, so the set is minimum-size.
  std::vector<EliminatedEdgeInfo> eliminated_raw;
  while (true) {
    int active = 0;
    for (const auto& e : edges) active += e.active ? 1 : 0;
    if (active <= class_count - 1) break;
    std::vector<int> candidates = cycle_edges(class_count, edges);
    if (candidates.empty()) {
      raise(ErrorKind::Internal, "cycle census and edge count disagree");
    }
    int pick = candidates.front();
    for (int e : candidates) {
      const std::int64_t ne = distinct_pairs(edges[e].table_id);
      const std::int64_t np = distinct_pairs(edges[pick].table_id);
      if (ne > np || (ne == np && edges[e].table_id > edges[pick].table_id)) pick = e;
    }
    edges[pick].active = false;
    eliminated_raw.push_back(EliminatedEdgeInfo{edges[pick].table_id, edges[pick].first_attr,
                                                edges[pick].second_attr, edges[pick].first_class,
                                                edges[pick].second_class});
  }

  // The residual tree must be a path, with at most two tables per node.
  std::vector<int> degree(class_count, 0);
  std::vector<int> anchor_count(class_count, 0);
  for (const auto& e : edges) {
    if (!e.active) continue;
    ++degree[e.first_class];
    ++degree[e.second_class];
  }
  for (const auto& [a, cls] : anchors) ++anchor_count[cls];
  for (int cls = 0; cls < class_count; ++cls) {
    if (degree[cls] > 2) {
      raise(ErrorKind::UnsupportedShape,
            "skeleton is a non-path tree at attribute class " + classes[cls][0].qualified());
    }
    if (degree[cls] + anchor_count[cls] > 2) {
      raise(ErrorKind::UnsupportedShape, "more than two tables share attribute class " +
                                             classes[cls][0].qualified() +
                                             "; only chain joins are supported");
    }
  }

  // Order classes along the path, starting from an endpoint.
  std::vector<int> path;
  if (class_count == 1) {
    path.push_back(0);
  } else {
    int start = -1;
    for (int cls = 0; cls < class_count; ++cls) {
      if (degree[cls] == 1) {
        start = cls;
        break;
      }
    }
    if (start < 0) raise(ErrorKind::Internal, "path without endpoints");
    std::vector<bool> used_edge(edges.size(), false);
    path.push_back(start);
    while (true) {
      int cur = path.back();
      int next = -1;
      for (std::size_t e = 0; e < edges.size(); ++e) {
        if (!edges[e].active || used_edge[e]) continue;
        if (edges[e].first_class == cur || edges[e].second_class == cur) {
          used_edge[e] = true;
          next = edges[e].other(cur);
          break;
        }
      }
      if (next < 0) break;
      path.push_back(next);
    }
    if (path.size() != static_cast<std::size_t>(class_count)) {
      raise(ErrorKind::UnsupportedShape, "skeleton is a non-path tree");
    }
  }

  auto edge_between = [&](int a, int b) -> const GraphEdge* {
    for (const auto& e : edges) {
      if (!e.active) continue;
      if ((e.first_class == a && e.second_class == b) ||
          (e.first_class == b && e.second_class == a)) {
        return &e;
      }
    }
    return nullptr;
  };

  // A direction is feasible when every edge table is traversed first-JA to
  // second-JA; that is the only conditioning direction the models provide.
  auto feasible = [&](const std::vector<int>& ordered) {
    for (std::size_t i = 0; i + 1 < ordered.size(); ++i) {
      const GraphEdge* e = edge_between(ordered[i], ordered[i + 1]);
      if (e == nullptr || e->first_class != ordered[i] || e->second_class != ordered[i + 1]) {
        return false;
      }
    }
    return true;
  };

  std::vector<int> reversed(path.rbegin(), path.rend());
  const bool forward_ok = feasible(path);
  const bool backward_ok = feasible(reversed);
  if (!forward_ok && !backward_ok) {
    raise(ErrorKind::UnsupportedShape,
          "no chain orientation matches the declared first/second JA roles of the models");
  }

  auto class_matches = [&](int cls, const std::string& name) {
    for (const auto& m : classes[cls]) {
      if (m.qualified() == name || m.attr == name) return true;
    }
    return false;
  };

  std::vector<int> ordered;
  if (root_choice) {
    if (forward_ok && class_matches(path.front(), *root_choice)) {
      ordered = path;
    } else if (backward_ok && class_matches(reversed.front(), *root_choice)) {
      ordered = reversed;
    } else if (class_matches(path.front(), *root_choice) ||
               class_matches(path.back(), *root_choice)) {
      raise(ErrorKind::UnsupportedShape,
            "requested root " + *root_choice + " conflicts with the models' JA orientation");
    } else {
      raise(ErrorKind::Resolution, "requested root " + *root_choice + " is not a chain endpoint");
    }
  } else {
    // Default root: the first JA appearing in the query's join conditions,
    // falling back to the orientation the models support.
    const int preferred = class_of.at(uf.find(conditions.front().left));
    if (forward_ok && path.front() == preferred) {
      ordered = path;
    } else if (backward_ok && reversed.front() == preferred) {
      ordered = reversed;
    } else {
      ordered = forward_ok ? path : reversed;
      if (preferred != ordered.front()) {
        log_info("default root is incompatible with model orientation; rooting at class " +
                 classes[ordered.front()][0].qualified());
      }
    }
  }

  std::vector<int> node_index(class_count, -1);
  for (std::size_t i = 0; i < ordered.size(); ++i) {
    node_index[ordered[i]] = static_cast<int>(i);
    SkeletonNode node;
    node.members = classes[ordered[i]];
    node.label = node.members.front().qualified();
    layout.nodes.push_back(node);
  }
  for (std::size_t i = 0; i + 1 < ordered.size(); ++i) {
    const GraphEdge* e = edge_between(ordered[i], ordered[i + 1]);
    layout.edge_tables.push_back(e->table_id);
  }
  for (auto& info : eliminated_raw) {
    info.first_node = node_index[info.first_node];
    info.second_node = node_index[info.second_node];
    layout.eliminated.push_back(info);
  }
  for (const auto& [anchor, cls] : anchors) {
    if (node_index[cls] == 0 && !layout.root_anchor) {
      layout.root_anchor = anchor;
    } else if (node_index[cls] == static_cast<int>(layout.nodes.size()) - 1 &&
               !layout.leaf_anchor) {
      layout.leaf_anchor = anchor;
    } else {
      raise(ErrorKind::UnsupportedShape,
            "table " + anchor.table_id + " attaches to an interior skeleton node");
    }
  }

  // Attachments for selected attributes outside the skeleton, conditioned on
  // the owning table's participating JAs.
  std::set<AttrRef> attached;
  for (const auto& sel : selected) {
    if (layout.node_of(sel) >= 0) continue;
    if (!attached.insert(sel).second) continue;
    const TableMeta& t = meta_of(tables, sel.table);
    std::vector<std::pair<std::string, int>> given;
    for (const auto& ja : t.join_attrs) {
      int node = layout.node_of({t.table_id, ja.attr});
      if (node >= 0) given.push_back({ja.attr, node});
    }
    if (given.empty()) {
      raise(ErrorKind::Internal, "table " + t.table_id + " has no skeleton JA to condition on");
    }
    layout.attachments.push_back(AttachmentInfo{sel, t.table_id, given});
  }

  return layout;
}

SkeletonBuild build_skeleton(const ResolvedQuery& rq,
                             const std::optional<std::string>& root_choice) {
  std::vector<TableMeta> metas;
  metas.reserve(rq.tables.size());
  for (const auto& t : rq.tables) metas.push_back(t.meta);

  NdpLookup ndp = [&](const std::string& table_id) {
    return rq.table(table_id).model->distinct_pair_count();
  };
  SkeletonLayout layout =
      compute_skeleton_layout(metas, rq.conditions, rq.selected, ndp, root_choice);

  SkeletonBuild out;
  out.graph.nodes = layout.nodes;
  out.graph.all_exact = true;
  for (const auto& t : rq.tables) out.graph.all_exact &= t.model->exact();
  for (const auto& table_id : layout.edge_tables) {
    out.graph.edges.push_back(SkeletonEdge{table_id, rq.table(table_id).model});
  }
  if (layout.root_anchor) {
    out.graph.root_anchor = EndAnchor{layout.root_anchor->table_id, layout.root_anchor->ja_attr,
                                      rq.table(layout.root_anchor->table_id).model};
  }
  if (layout.leaf_anchor) {
    out.graph.leaf_anchor = EndAnchor{layout.leaf_anchor->table_id, layout.leaf_anchor->ja_attr,
                                      rq.table(layout.leaf_anchor->table_id).model};
  }
  for (const auto& e : layout.eliminated) {
    out.eliminated.push_back(EliminatedEdge{e.table_id, e.first_attr, e.second_attr, e.first_node,
                                            e.second_node, rq.table(e.table_id).model});
  }
  for (const auto& a : layout.attachments) {
    out.attachments.push_back(NonJaAttachment{a.attr, rq.table(a.table_id).model, a.given});
  }
  return out;
}

std::vector<std::string> elimination_order(const SkeletonGraph& g) {
  std::vector<std::string> out;
  out.reserve(g.nodes.size());
  for (auto it = g.nodes.rbegin(); it != g.nodes.rend(); ++it) out.push_back(it->label);
  return out;
}

}  // namespace modeljoin
