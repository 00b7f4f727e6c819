#pragma once

#include <cstdint>
#include <initializer_list>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "gym/graph.hpp"
#include "gym/kernels.hpp"

#include "json.hpp"

namespace gym {

inline constexpr const char* k_schema_version = "1.0";

// Partial assignment of binary values to nodes, kept sorted by node index.
class assignment {
 public:
  assignment() = default;
  assignment(std::initializer_list<std::pair<int, int>> items);

  void set(int node, int value);
  std::optional<int> value(int node) const;
  bool contains(int node) const { return value(node).has_value(); }
  bool empty() const { return items_.empty(); }
  std::size_t size() const { return items_.size(); }
  const std::vector<std::pair<int, int>>& items() const { return items_; }

  // node-set and value masks for filtering joint-table states
  std::uint32_t mask() const;
  std::uint32_t bits() const;

  bool disjoint_with(const assignment& other) const;
  // union of two assignments; throws std::invalid_argument on conflicting values
  assignment merged(const assignment& other) const;

  friend bool operator==(const assignment&, const assignment&) = default;

 private:
  std::vector<std::pair<int, int>> items_;
};

// Structural model over binary nodes: each node v is 1 exactly when its
// exogenous U_v ~ Uniform[0,1] falls below
//   logistic(bias_v + sum_j weight_vj * value(parent_j)).
struct scm {
  labeled_dag structure;
  std::vector<std::vector<int>> parents;    // sorted parent list per node
  std::vector<std::vector<double>> weight;  // aligned with parents
  std::vector<double> bias;

  int node_count() const { return structure.graph.node_count; }
  kernels::cpt_tables tables() const;
};

struct scm_params {
  double weight_min = 0.5;
  double weight_max = 3.0;
  double bias_min = -2.0;
  double bias_max = 2.0;
};

// Exact joint over all 2^node_count states; bit v of the state index carries
// the value of node v.
struct joint_distribution {
  int node_count = 0;
  std::vector<double> p;

  double mass(const assignment& a) const;  // total probability of matching states
};

double logistic(double x);

// Draw mechanism parameters: |weight| uniform in [weight_min, weight_max]
// signed by the edge polarity, bias uniform in [bias_min, bias_max].
scm instantiate_scm(const labeled_dag& structure, std::uint64_t seed,
                    const scm_params& params = {});

// P(node = 1 | parent values), parent_values aligned with the node's sorted
// parent list.
double cpt(const scm& m, int node, const std::vector<int>& parent_values);

// Exact joint by enumerating all states; capacity_error beyond 16 nodes.
joint_distribution exact_joint(const scm& m, bool parallel = false);

// Ancestral sampling of `count` complete rows (bit v = value of node v).
std::vector<std::uint32_t> sample(const scm& m, std::uint64_t count, std::uint64_t seed,
                                  bool parallel = false);

// P(targets | conditions) from an exact joint. Throws
// undefined_conditional_error when the conditioning event has zero mass and
// std::invalid_argument when targets are empty or overlap conditions.
double query(const joint_distribution& joint, const assignment& targets,
             const assignment& conditions = {});

nlohmann::ordered_json labeled_dag_to_json(const labeled_dag& g);
labeled_dag labeled_dag_from_json(const nlohmann::json& j);
nlohmann::ordered_json scm_to_json(const scm& m);
scm scm_from_json(const nlohmann::json& j);

// "<major>.<minor>" version accepted iff major matches k_schema_version's.
void check_schema_version(const std::string& version);

}  // namespace gym
