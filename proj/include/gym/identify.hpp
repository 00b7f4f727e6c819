#pragma once

#include <vector>

#include "gym/graph.hpp"

namespace gym {

// Strict descendants / ancestors of `node`, sorted ascending.
std::vector<int> descendants(const dag& g, int node);
std::vector<int> ancestors(const dag& g, int node);

// d-separation of node sets a and b given z (a, b, z pairwise disjoint),
// decided by directional reachability.
bool is_d_separated(const dag& g, const std::vector<int>& a, const std::vector<int>& b,
                    const std::vector<int>& z);

struct adjustment_result {
  std::vector<int> backdoor_set;  // smallest valid set, lexicographically least
  bool minimal = true;
  std::vector<int> mediator_set;  // descendants of treatment that are ancestors of outcome
};

// Smallest backdoor adjustment set for (treatment, outcome): candidates are
// non-descendants of the treatment, validity means treatment and outcome are
// d-separated given the set once the treatment's outgoing edges are removed.
// Ties broken lexicographically; the parent set of the treatment is always
// valid, so the search is total.
adjustment_result backdoor_sets(const dag& g, int treatment, int outcome);

std::vector<int> mediators(const dag& g, int treatment, int outcome);

// Merged multi-world graph for counterfactual independence checks: world 0 is
// factual; world w >= 1 applies do() to a node set. Nodes unaffected by a
// world's intervention share the factual copy; intervened nodes are removed
// from their world (they carry constants); a shared exogenous node feeds all
// copies of a variable that exists in more than one version.
class parallel_worlds {
 public:
  parallel_worlds(const dag& g, const std::vector<std::vector<int>>& interventions);

  const dag& graph() const { return graph_; }
  // id of variable v as seen in world w (0 = factual); -1 when v is
  // intervened in that world
  int node_id(int world, int v) const;

 private:
  dag graph_;
  std::vector<std::vector<int>> ids_;  // [world][v]
};

// Smallest (lexicographically least) set Z of non-descendants of the
// intervened nodes with Y_t d-separated from T given Z across worlds, i.e.
// P(y | t, z) = P(Y_t = y | z) holds and sum_z P(y | t, z) P(z) recovers the
// interventional distribution.
std::vector<int> joint_adjustment_set(const dag& g, const std::vector<int>& treatments,
                                      int outcome);

// Smallest set Z making the mediation formula over the full mediator set M
// exact: checks, in the merged graph over worlds do(x) and do(x, M), that
//   Y_{x',m} is independent of {X} u M given Z,
//   Y_{x',m} is independent of M_x given Z,
//   M_x is independent of X given Z, and
//   Y_x is independent of X given Z.
// The union of the parents of X, M and Y (minus {X} u M u {Y}) always
// qualifies, so the search is total.
std::vector<int> mediation_adjustment_set(const dag& g, int treatment, int outcome,
                                          const std::vector<int>& mediator_set);

}  // namespace gym
