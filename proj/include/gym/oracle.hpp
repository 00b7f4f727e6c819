#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "gym/scm.hpp"

namespace gym {

enum class task { ate, cde, ett, nde, nie, pn, ps };
inline constexpr task k_all_tasks[] = {task::ate, task::cde, task::ett, task::nde,
                                       task::nie, task::pn,  task::ps};

const char* to_string(task t);
task task_from_string(const std::string& s);

struct estimand_spec {
  task kind = task::ate;
  int treatment = 0;
  int x = 1;      // primary treatment value
  int x_alt = 0;  // contrasted treatment value
  int outcome = 0;
  int y = 1;                     // outcome value of interest
  assignment mediator_values;    // CDE: fixed values for every mediator
  std::vector<int> mediator_set; // CDE/NDE/NIE: all treatment->outcome mediators
};

struct estimand_value {
  enum class shape { scalar, bound_pair };
  shape kind = shape::scalar;
  double value = 0.0;  // scalar estimands
  double lower = 0.0;  // bound-pair estimands
  double upper = 0.0;
};

// Joint under do(do_assign): intervened nodes become point masses, the other
// mechanisms are untouched.
joint_distribution interventional(const scm& m, const assignment& do_assign,
                                  bool parallel = false);

struct cf_options {
  std::uint64_t exact_budget = 10'000'000;  // max enumerated response types
  std::uint64_t mc_draws = 200'000;
  std::uint64_t mc_seed = 0;
  bool parallel = false;
  enum class mode { automatic, exact, monte_carlo };
  mode forced = mode::automatic;
};

struct cf_result {
  double value = 0.0;
  bool exact = true;
  double std_error = 0.0;    // 0 for exact evaluation
  std::uint64_t draws = 0;   // response types enumerated or MC draws used
};

// Exact counterfactual evaluation by enumerating joint response types.
// Each node's exogenous draw only matters through which interval between
// adjacent mechanism output levels it falls into, so the finite product of
// per-node intervals carries the entire counterfactual distribution. When the
// product exceeds exact_budget the engine falls back to stratified Monte
// Carlo over the exogenous draws (unless a mode is forced).
class counterfactual_engine {
  struct frame;  // per-query relevant-set context

 public:
  explicit counterfactual_engine(const scm& m, cf_options opt = {});

  // One joint configuration of the exogenous variables (a response type or a
  // sampled draw). Event callbacks must be pure: they may be invoked from
  // several threads.
  class world_state {
   public:
    std::uint32_t factual() const { return factual_; }
    // state under do(a); a's nodes must lie inside the relevant set
    std::uint32_t intervene(const assignment& a) const;

   private:
    friend class counterfactual_engine;
    const frame* fr_ = nullptr;
    const double* u_ = nullptr;  // per relevant node, in relevant order
    std::uint32_t factual_ = 0;
  };

  // E[f] over the counterfactual distribution; `mentioned` lists every node
  // the callback inspects or intervenes on (the engine works on its
  // ancestral closure).
  cf_result expectation(const std::vector<int>& mentioned,
                        const std::function<double(const world_state&)>& f) const;

  // P(target | given); throws undefined_conditional_error when the
  // conditioning event has zero probability.
  cf_result conditional(const std::vector<int>& mentioned,
                        const std::function<bool(const world_state&)>& target,
                        const std::function<bool(const world_state&)>& given) const;

  const scm& model() const { return *model_; }

 private:
  struct node_profile {
    std::vector<int> parents;
    std::vector<double> row;     // P(node=1 | parent bits)
    std::vector<double> upper;   // interval upper endpoints, ascending, last = 1
    std::vector<double> length;  // interval lengths, sums to 1
  };

  cf_result run(const std::vector<int>& mentioned,
                const std::function<void(const world_state&, double&, double&)>& accumulate,
                bool conditional_query) const;

  const scm* model_;
  cf_options opt_;
  std::vector<node_profile> profiles_;
  std::vector<int> topo_;
};

inline int state_bit(std::uint32_t state, int node) {
  return static_cast<int>((state >> node) & 1u);
}

// Probability (optionally conditional) of an event reading the factual world
// and one counterfactual world per intervention, all sharing exogenous draws.
using cf_event =
    std::function<bool(std::uint32_t factual, const std::vector<std::uint32_t>& worlds)>;
cf_result counterfactual(const scm& m, const std::vector<assignment>& worlds,
                         const cf_event& event, const std::vector<int>& mentioned,
                         const cf_options& opt = {});
cf_result counterfactual(const scm& m, const std::vector<assignment>& worlds,
                         const cf_event& event, const cf_event& given,
                         const std::vector<int>& mentioned, const cf_options& opt = {});

// The seven supported estimands. Scalars for ATE/CDE/ETT/NDE/NIE; PN/PS
// return the bound pair (the exact probabilities are available through
// pn_exact / ps_exact).
estimand_value estimand(const scm& m, const estimand_spec& spec, const cf_options& opt = {});

cf_result pn_exact(const scm& m, const estimand_spec& spec, const cf_options& opt = {});
cf_result ps_exact(const scm& m, const estimand_spec& spec, const cf_options& opt = {});

// Consistency-based bounds on PN/PS from the observational joint and the two
// interventional joints, clamped to [0, 1].
estimand_value pn_ps_bounds(const joint_distribution& observational,
                            const joint_distribution& do_x,
                            const joint_distribution& do_x_alt, const estimand_spec& spec);

}  // namespace gym
