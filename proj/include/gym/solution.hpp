#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "gym/scm.hpp"

#include "json.hpp"

namespace gym {

// A probability the solution refers to: P(targets | conditions) with joint
// (multi-node) targets allowed.
struct prob_ref {
  assignment targets;
  assignment conditions;

  std::string key() const;  // canonical form for de-duplication
  std::string render(const std::vector<std::string>& labels) const;
  friend bool operator==(const prob_ref&, const prob_ref&) = default;
};

struct prob_statement {
  prob_ref ref;
  double value = 0.0;  // rounded to the corpus render precision
  std::string text;    // e.g. "P(smoking = 1 | stress = 0) = 0.3772"
};

struct solution_step {
  std::string text;
  int node = -1;  // expression node whose value this step establishes, -1 if prose only
};

// Arithmetic over referenced probabilities, stored as a small arena tree.
// Scalar answers use `root`; bound-pair answers use `root` (lower) and
// `root_upper`.
class solution_expr {
 public:
  enum class op { constant, prob, sum, diff, prod, quot, vmin, vmax, clamp01 };

  struct expr_node {
    op kind = op::constant;
    double value = 0.0;     // constant
    int ref = -1;           // prob
    std::vector<int> args;  // operators
  };

  int constant(double v);
  int prob(const prob_ref& r);  // same ref yields the same node
  int sum(std::vector<int> args);
  int diff(int a, int b);
  int prod(std::vector<int> args);
  int quot(int numerator, int denominator);
  int vmin(int a, int b);
  int vmax(int a, int b);
  int clamp01(int a);

  int root = -1;
  int root_upper = -1;
  std::vector<solution_step> steps;

  const std::vector<expr_node>& nodes() const { return nodes_; }
  const std::vector<prob_ref>& refs() const { return refs_; }

  // referenced probabilities in first-use order of a post-order walk from
  // root then root_upper
  std::vector<int> ordered_refs() const;

  struct eval_result {
    std::optional<double> value;
    std::vector<int> missing;  // refs the lookup could not resolve
    bool degenerate = false;   // division by ~0 or non-finite arithmetic
  };
  using ref_lookup = std::function<std::optional<double>(const prob_ref&)>;
  eval_result eval(int node, const ref_lookup& lookup) const;

  std::string to_text(int node, const std::vector<std::string>& labels) const;

  nlohmann::ordered_json to_json() const;
  static solution_expr from_json(const nlohmann::json& j);

 private:
  int push(expr_node n);
  std::vector<expr_node> nodes_;
  std::vector<prob_ref> refs_;
};

// half-away-from-zero rounding to `digits` decimals
double round_to(double v, int digits);
// fixed-point rendering with `digits` decimals ("0.3772")
std::string format_fixed(double v, int digits);

// statement lookup table keyed by canonical ref form
solution_expr::ref_lookup statement_lookup(const std::vector<prob_statement>& statements);

}  // namespace gym
