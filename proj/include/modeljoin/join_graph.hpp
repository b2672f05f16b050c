#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "modeljoin/catalog.hpp"
#include "modeljoin/types.hpp"

namespace modeljoin {

class TableModel;

// One skeleton node: an equivalence class of join-equated attributes.
struct SkeletonNode {
  std::string label;              // qualified name of the first-appearing member
  std::vector<AttrRef> members;   // appearance order
  bool contains(const AttrRef& ref) const;
};

struct AnchorInfo {
  std::string table_id;
  std::string ja_attr;  // the anchor's participating join attribute
};

struct EliminatedEdgeInfo {
  std::string table_id;
  std::string first_attr;
  std::string second_attr;
  int first_node = -1;   // skeleton node carrying the table's first JA
  int second_node = -1;  // skeleton node carrying the table's second JA
};

struct AttachmentInfo {
  AttrRef attr;
  std::string table_id;
  // Observed same-table JAs: (attribute name, skeleton node index), ordered
  // first-position-then-second.
  std::vector<std::pair<std::string, int>> given;
};

// Pure structural layout: which chain the query induces, independent of which
// backend provides the numbers. The oracle reuses this so column orders match.
struct SkeletonLayout {
  std::vector<SkeletonNode> nodes;          // root to leaf
  std::vector<std::string> edge_tables;     // edge_tables[i] spans nodes i, i+1
  std::optional<AnchorInfo> root_anchor;    // single-JA table at the root, if any
  std::optional<AnchorInfo> leaf_anchor;
  std::vector<EliminatedEdgeInfo> eliminated;
  std::vector<AttachmentInfo> attachments;  // selected non-skeleton attributes

  std::size_t node_count() const { return nodes.size(); }
  int node_of(const AttrRef& ref) const;  // -1 when not a skeleton member
};

using NdpLookup = std::function<std::int64_t(const std::string& table_id)>;

SkeletonLayout compute_skeleton_layout(const std::vector<TableMeta>& tables,
                                       const std::vector<QueryCondition>& conditions,
                                       const std::vector<AttrRef>& selected,
                                       const NdpLookup& distinct_pairs,
                                       const std::optional<std::string>& root_choice);

// Layout plus bound models: the sample-generator graph.
struct SkeletonEdge {
  std::string table_id;
  std::shared_ptr<const TableModel> model;
};

struct EndAnchor {
  std::string table_id;
  std::string ja_attr;
  std::shared_ptr<const TableModel> model;
};

struct SkeletonGraph {
  std::vector<SkeletonNode> nodes;
  std::vector<SkeletonEdge> edges;  // size node_count() - 1
  std::optional<EndAnchor> root_anchor;
  std::optional<EndAnchor> leaf_anchor;
  bool all_exact = false;

  std::size_t node_count() const { return nodes.size(); }
  std::vector<std::string> column_labels() const;
};

struct NonJaAttachment {
  AttrRef attr;
  std::shared_ptr<const TableModel> model;
  std::vector<std::pair<std::string, int>> given;
};

struct EliminatedEdge {
  std::string table_id;
  std::string first_attr;
  std::string second_attr;
  int first_node = -1;
  int second_node = -1;
  std::shared_ptr<const TableModel> model;
};

struct SkeletonBuild {
  SkeletonGraph graph;
  std::vector<NonJaAttachment> attachments;
  std::vector<EliminatedEdge> eliminated;
};

SkeletonBuild build_skeleton(const ResolvedQuery& rq,
                             const std::optional<std::string>& root_choice = std::nullopt);

// Leaf-to-root node labels: the exact reverse of the sampling order.
std::vector<std::string> elimination_order(const SkeletonGraph& g);

}  // namespace modeljoin
