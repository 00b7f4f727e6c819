#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace gym {

struct edge {
  int parent = 0;
  int child = 0;
  friend bool operator==(const edge&, const edge&) = default;
  friend auto operator<=>(const edge&, const edge&) = default;
};

// Directed acyclic graph over nodes 0..node_count-1. Edges are kept sorted
// by (parent, child) and unique; factory functions enforce acyclicity.
struct dag {
  int node_count = 0;
  std::vector<edge> edges;

  std::vector<std::vector<int>> parent_lists() const;
  std::vector<std::vector<int>> child_lists() const;
  bool has_edge(int parent, int child) const;
};

enum class semantics_mode { real, random, fake };

const char* to_string(semantics_mode m);
semantics_mode semantics_mode_from_string(const std::string& s);

// A DAG with node names and per-edge polarity (+1: parent raises the
// probability of the child, -1: lowers it), plus the naming regime used.
struct labeled_dag {
  dag graph;
  semantics_mode mode = semantics_mode::fake;
  std::vector<std::string> labels;  // one per node
  std::vector<int> polarity;        // one per edge, +1 or -1, aligned with graph.edges
};

// Named variables and known cause->effect relations loaded from a
// tab-separated file:
//   name                       introduces a variable
//   name <TAB> parent <TAB> +  introduces name (if new) and a positive edge
//   name <TAB> parent <TAB> -  same with a negative edge
// '#' starts a comment; parents must be introduced before use; the relation
// graph must be acyclic.
class vocabulary {
 public:
  static vocabulary parse(const std::string& text);
  static vocabulary load(const std::string& path);

  int size() const { return static_cast<int>(names_.size()); }
  const std::vector<std::string>& names() const { return names_; }
  const std::string& name(int i) const { return names_[static_cast<std::size_t>(i)]; }
  std::optional<int> index_of(const std::string& name) const;

  // relation graph over vocabulary indices; polarity aligned with edges
  const dag& relation_graph() const { return graph_; }
  const std::vector<int>& polarities() const { return polarity_; }
  std::optional<int> relation_polarity(int parent, int child) const;

 private:
  std::vector<std::string> names_;
  dag graph_;
  std::vector<int> polarity_;
};

// Sample a random DAG: nodes are ranked by a random permutation, each
// forward pair becomes an edge with probability edge_density, and nodes
// keeping more than max_in_degree parents drop a random subset.
dag generate_dag(int node_count, double edge_density, std::uint64_t seed,
                 int max_in_degree = 4);

// Deterministic topological order (lowest index first among ready nodes).
// Throws cycle_error naming an edge on a cycle if the graph has one.
std::vector<int> topological_order(const dag& g);

// Attach names and polarities to a structural graph.
//   fake:   unique pronounceable-free 4-letter lowercase strings, coin-flip
//           polarities
//   random: names sampled from the vocabulary, coin-flip polarities (the
//           edges stay as generated, so the names carry no usable knowledge)
//   real:   an injective embedding of the graph into the vocabulary relation
//           graph; polarities are the known ones. Throws data_error when no
//           embedding exists.
labeled_dag assign_semantics(const dag& g, semantics_mode mode, const vocabulary& vocab,
                             std::uint64_t seed);

// Induced subgraph of the vocabulary relation graph on node_count distinct
// sampled variables; always a valid real-mode graph.
labeled_dag sample_vocabulary_subgraph(const vocabulary& vocab, int node_count,
                                       std::uint64_t seed);

}  // namespace gym
