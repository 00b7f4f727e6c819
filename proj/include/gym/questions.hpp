#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gym/graph.hpp"
#include "gym/oracle.hpp"
#include "gym/scm.hpp"
#include "gym/solution.hpp"

#include "json.hpp"

namespace gym {

enum class answer_mode { binary, numeric, bounds };
const char* to_string(answer_mode m);
answer_mode answer_mode_from_string(const std::string& s);

struct answer {
  enum class kind { yes_no, numeric, bounds, lack_condition };
  kind k = kind::yes_no;
  bool yes = false;
  double value = 0.0;
  double lower = 0.0, upper = 0.0;

  std::string text(int precision) const;  // canonical answer string
  friend bool operator==(const answer&, const answer&) = default;
};

struct instance_meta {
  scm model;  // includes the labeled graph
  estimand_spec espec;
  std::vector<int> backdoor_set;    // smallest (treatment, outcome) backdoor set
  std::vector<int> adjustment_set;  // set the solution formula sums over
  std::uint64_t base_seed = 0;
  std::uint64_t index = 0;
  int attempt = 0;
  int render_precision = 4;
  int answer_precision = 4;
  // question-oriented unrounded value(s); for bound answers value=lower
  double oracle_value = 0.0;
  double oracle_upper = 0.0;
  // value(s) of the estimand itself (ETT answers are oriented opposite to it)
  double estimand_value = 0.0;
  double estimand_upper = 0.0;
  // same formula evaluated with an empty adjustment set
  bool has_naive = false;
  double naive_value = 0.0;
  double naive_upper = 0.0;
  // stress-variant bookkeeping
  std::string source_id;
  std::vector<int> removed_refs;
  std::vector<int> added_statements;
  bool rewriter_fallback = false;
};

struct question_instance {
  std::string id;
  task kind = task::ate;
  semantics_mode mode = semantics_mode::fake;
  answer_mode amode = answer_mode::binary;
  std::string variant = "base";
  std::vector<prob_statement> given_info;
  std::string instruction;
  std::string query;
  answer gold;
  solution_expr solution;
  instance_meta meta;
};

// Identification formula for the estimand as arithmetic over conditional
// probabilities, summing over joint configurations of adjustment_set (and of
// the mediator set for NDE/NIE), plus prose derivation steps.
solution_expr build_symbolic_solution(const labeled_dag& g, const estimand_spec& spec,
                                      const std::vector<int>& adjustment_set,
                                      answer_mode amode);

// One statement per referenced probability, in first-use order of the
// solution tree, valued from the exact joint and rounded to `precision`
// decimals.
std::vector<prob_statement> select_given_statements(const solution_expr& solution,
                                                    const joint_distribution& joint,
                                                    const labeled_dag& g, int precision);

struct rendered_question {
  std::string instruction;
  std::string query;
};
rendered_question render_question(const labeled_dag& g, const estimand_spec& spec,
                                  answer_mode amode, int answer_precision);

// Appended to the instruction of insufficient-variant instances and honored
// by the grader as a first-class answer.
inline constexpr const char* k_lack_condition = "LACK_CONDITION";
std::string lack_condition_instruction();

struct answer_outcome {
  answer value;
  bool degenerate = false;        // quotient by ~0 or inverted bounds
  std::vector<int> missing_refs;  // nonempty => answer is LACK_CONDITION
  double eval_value = 0.0;        // evaluated lower/scalar before conversion
  double eval_upper = 0.0;
};

// Evaluate the solution against the (rounded) statements and convert to the
// answer shape; unresolvable references yield LACK_CONDITION.
answer_outcome compute_answer(const solution_expr& solution,
                              const std::vector<prob_statement>& statements,
                              answer_mode amode, int answer_precision);

struct gen_params {
  int node_min = 3;
  int node_max = 10;
  double edge_density = 0.35;
  int max_in_degree = 4;
  scm_params mechanisms;
  int render_precision = 4;
  int answer_precision = 4;
  double sign_margin = 0.02;     // minimum |effect| for yes/no answers
  int max_statements = 12;
  double fake_weight = 1.0;      // semantics-mode mix
  double random_weight = 1.0;
  double real_weight = 1.0;
  answer_mode effect_answer_mode = answer_mode::binary;  // ATE/CDE/ETT/NDE/NIE
  double no_effect_fraction = 0.1;                       // ATE instances with a null effect
  bool require_confounding = false;  // nonempty minimal backdoor set + naive disagreement
  int retry_cap = 1000;
  std::uint64_t exact_budget = 10'000'000;
  std::string id_prefix = "train";
};

// Deterministic instance generation: every random choice flows from
// (base_seed, index, attempt), so any instance can be regenerated in
// isolation. Throws generation_error when retry_cap attempts cannot satisfy
// the constraints.
question_instance generate_instance(const gen_params& params, const vocabulary& vocab,
                                    task kind, std::uint64_t base_seed, std::uint64_t index);

nlohmann::ordered_json instance_to_json(const question_instance& q);
question_instance instance_from_json(const nlohmann::json& j);

// prompt shown to a model: given statements, instruction, question
std::string compose_prompt(const question_instance& q);

nlohmann::ordered_json estimand_spec_to_json(const estimand_spec& spec);
estimand_spec estimand_spec_from_json(const nlohmann::json& j);

}  // namespace gym
