#include <cctype>
#include "gym/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "gym/errors.hpp"
#include "gym/random.hpp"

namespace gym {

const char* to_string(task t) {
  switch (t) {
    case task::ate: return "ATE";
    case task::cde: return "CDE";
    case task::ett: return "ETT";
    case task::nde: return "NDE";
    case task::nie: return "NIE";
    case task::pn: return "PN";
    case task::ps: return "PS";
  }
  return "ATE";
}

task task_from_string(const std::string& s) {
  std::string up = s;
  for (char& c : up) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  for (task t : k_all_tasks)
    if (up == to_string(t)) return t;
  throw config_error("unknown task: " + s);
}

joint_distribution interventional(const scm& m, const assignment& do_assign, bool parallel) {
  int n = m.node_count();
  if (n < 1 || n > 16) throw capacity_error("interventional joint supports 1..16 nodes");
  kernels::cpt_tables t = m.tables();
  for (const auto& [node, value] : do_assign.items()) {
    if (node >= n) throw std::invalid_argument("intervened node out of range");
    t.parents[static_cast<std::size_t>(node)].clear();
    t.table[static_cast<std::size_t>(node)] = {static_cast<double>(value)};
  }
  joint_distribution joint;
  joint.node_count = n;
  if (parallel)
    kernels::joint_table_parallel(t, joint.p);
  else
    kernels::joint_table_serial(t, joint.p);
  return joint;
}

counterfactual_engine::counterfactual_engine(const scm& m, cf_options opt)
    : model_(&m), opt_(opt) {
  kernels::cpt_tables t = m.tables();
  topo_ = topological_order(m.structure.graph);
  profiles_.resize(static_cast<std::size_t>(m.node_count()));
  for (int v = 0; v < m.node_count(); ++v) {
    node_profile& p = profiles_[static_cast<std::size_t>(v)];
    p.parents = t.parents[static_cast<std::size_t>(v)];
    p.row = t.table[static_cast<std::size_t>(v)];

    std::vector<double> levels = p.row;
    std::sort(levels.begin(), levels.end());
    levels.erase(std::unique(levels.begin(), levels.end()), levels.end());
    if (levels.empty() || levels.back() < 1.0) levels.push_back(1.0);
    double lo = 0.0;
    for (double up : levels) {
      if (up > lo) {
        p.upper.push_back(up);
        p.length.push_back(up - lo);
      }
      lo = up;
    }
  }
}

namespace {

// ancestral closure of `mentioned`, listed in topological order
std::vector<int> relevant_closure(const dag& g, const std::vector<int>& topo,
                                  const std::vector<int>& mentioned) {
  if (mentioned.empty()) throw std::invalid_argument("no nodes mentioned");
  std::vector<char> in(static_cast<std::size_t>(g.node_count), 0);
  auto parents = g.parent_lists();
  std::vector<int> stack;
  for (int v : mentioned) {
    if (v < 0 || v >= g.node_count) throw std::invalid_argument("mentioned node out of range");
    if (!in[static_cast<std::size_t>(v)]) {
      in[static_cast<std::size_t>(v)] = 1;
      stack.push_back(v);
    }
  }
  while (!stack.empty()) {
    int v = stack.back();
    stack.pop_back();
    for (int p : parents[static_cast<std::size_t>(v)])
      if (!in[static_cast<std::size_t>(p)]) {
        in[static_cast<std::size_t>(p)] = 1;
        stack.push_back(p);
      }
  }
  std::vector<int> out;
  for (int v : topo)
    if (in[static_cast<std::size_t>(v)]) out.push_back(v);
  return out;
}

}  // namespace

struct counterfactual_engine::frame {
  const counterfactual_engine* eng = nullptr;
  std::vector<int> relevant;  // topo order
  std::vector<int> pos_of;    // node -> index into relevant, -1 otherwise

  std::uint32_t propagate(const double* u, std::uint32_t override_mask,
                          std::uint32_t override_bits) const {
    std::uint32_t state = 0;
    for (std::size_t idx = 0; idx < relevant.size(); ++idx) {
      int v = relevant[idx];
      int bit;
      if ((override_mask >> v) & 1u) {
        bit = static_cast<int>((override_bits >> v) & 1u);
      } else {
        const node_profile& p = eng->profiles_[static_cast<std::size_t>(v)];
        std::uint32_t pa_bits = 0;
        for (std::size_t j = 0; j < p.parents.size(); ++j)
          pa_bits |= ((state >> p.parents[j]) & 1u) << j;
        bit = u[idx] <= p.row[pa_bits] ? 1 : 0;
      }
      if (bit) state |= 1u << v;
    }
    return state;
  }
};

std::uint32_t counterfactual_engine::world_state::intervene(const assignment& a) const {
  for (const auto& [node, value] : a.items())
    if (fr_->pos_of[static_cast<std::size_t>(node)] < 0)
      throw std::invalid_argument("intervention outside the mentioned closure");
  return fr_->propagate(u_, a.mask(), a.bits());
}

cf_result counterfactual_engine::run(
    const std::vector<int>& mentioned,
    const std::function<void(const world_state&, double&, double&)>& accumulate,
    bool conditional_query) const {
  frame fr;
  fr.eng = this;
  fr.relevant = relevant_closure(model_->structure.graph, topo_, mentioned);
  fr.pos_of.assign(static_cast<std::size_t>(model_->node_count()), -1);
  for (std::size_t i = 0; i < fr.relevant.size(); ++i)
    fr.pos_of[static_cast<std::size_t>(fr.relevant[i])] = static_cast<int>(i);

  std::size_t r = fr.relevant.size();

  // exact enumeration size with saturation
  std::uint64_t total = 1;
  bool overflow = false;
  for (int v : fr.relevant) {
    std::uint64_t k = profiles_[static_cast<std::size_t>(v)].length.size();
    if (total > (opt_.exact_budget / k) + 1) overflow = true;
    total *= k;
    if (overflow) break;
  }
  bool exact = !overflow && total <= opt_.exact_budget;
  if (opt_.forced == cf_options::mode::exact && !exact)
    throw capacity_error("exact counterfactual enumeration exceeds budget");
  if (opt_.forced == cf_options::mode::monte_carlo) exact = false;

  std::array<double, 2> sums{0.0, 0.0};
  std::uint64_t n = 0;

  if (exact) {
    n = total;
    kernels::chunk_fn body = [&](std::uint64_t lo, std::uint64_t hi) {
      std::array<double, 2> acc{0.0, 0.0};
      std::vector<std::size_t> digit(r, 0);
      std::vector<double> u(r, 0.0);
      // decode mixed-radix digits of lo (last relevant node varies fastest)
      std::uint64_t rest = lo;
      for (std::size_t idx = r; idx-- > 0;) {
        const node_profile& p = profiles_[static_cast<std::size_t>(fr.relevant[idx])];
        digit[idx] = rest % p.length.size();
        rest /= p.length.size();
      }
      for (std::uint64_t i = lo; i < hi; ++i) {
        double weight = 1.0;
        for (std::size_t idx = 0; idx < r; ++idx) {
          const node_profile& p = profiles_[static_cast<std::size_t>(fr.relevant[idx])];
          weight *= p.length[digit[idx]];
          u[idx] = p.upper[digit[idx]];
        }
        world_state ws;
        ws.fr_ = &fr;
        ws.u_ = u.data();
        ws.factual_ = fr.propagate(u.data(), 0, 0);
        double v0 = 0.0, v1 = 0.0;
        accumulate(ws, v0, v1);
        acc[0] += weight * v0;
        acc[1] += weight * v1;
        // odometer step
        for (std::size_t idx = r; idx-- > 0;) {
          const node_profile& p = profiles_[static_cast<std::size_t>(fr.relevant[idx])];
          if (++digit[idx] < p.length.size()) break;
          digit[idx] = 0;
        }
      }
      return acc;
    };
    sums = opt_.parallel ? kernels::chunked_sum_parallel(total, body)
                         : kernels::chunked_sum_serial(total, body);
  } else {
    std::uint64_t draws = opt_.mc_draws;
    if (draws == 0) throw std::invalid_argument("mc_draws must be positive");
    n = draws;
    // stratified exogenous draws: each node's D values occupy the D equal
    // subintervals of [0,1] in a shuffled order
    std::vector<std::vector<double>> us(r);
    for (std::size_t idx = 0; idx < r; ++idx) {
      rng rv(derive_seed(opt_.mc_seed, static_cast<std::uint64_t>(fr.relevant[idx])));
      auto& vals = us[idx];
      vals.resize(draws);
      for (std::uint64_t s = 0; s < draws; ++s)
        vals[s] = (static_cast<double>(s) + rv.u01()) / static_cast<double>(draws);
      rv.shuffle(vals);
    }
    kernels::chunk_fn body = [&](std::uint64_t lo, std::uint64_t hi) {
      std::array<double, 2> acc{0.0, 0.0};
      std::vector<double> u(r, 0.0);
      for (std::uint64_t i = lo; i < hi; ++i) {
        for (std::size_t idx = 0; idx < r; ++idx) u[idx] = us[idx][i];
        world_state ws;
        ws.fr_ = &fr;
        ws.u_ = u.data();
        ws.factual_ = fr.propagate(u.data(), 0, 0);
        double v0 = 0.0, v1 = 0.0;
        accumulate(ws, v0, v1);
        acc[0] += v0;
        acc[1] += v1;
      }
      return acc;
    };
    sums = opt_.parallel ? kernels::chunked_sum_parallel(draws, body)
                         : kernels::chunked_sum_serial(draws, body);
  }

  if (sums[1] <= 0.0) {
    if (conditional_query)
      throw undefined_conditional_error("counterfactual conditioning event has zero probability");
    throw undefined_conditional_error("counterfactual normalizer vanished");
  }
  cf_result out;
  out.value = sums[0] / sums[1];
  out.exact = exact;
  out.draws = n;
  if (!exact) {
    double p = std::min(1.0, std::max(0.0, out.value));
    out.std_error = std::sqrt(std::max(0.0, p * (1.0 - p)) / sums[1]);
  }
  return out;
}

cf_result counterfactual_engine::expectation(
    const std::vector<int>& mentioned,
    const std::function<double(const world_state&)>& f) const {
  return run(
      mentioned,
      [&](const world_state& ws, double& v0, double& v1) {
        v0 = f(ws);
        v1 = 1.0;
      },
      false);
}

cf_result counterfactual_engine::conditional(
    const std::vector<int>& mentioned, const std::function<bool(const world_state&)>& target,
    const std::function<bool(const world_state&)>& given) const {
  return run(
      mentioned,
      [&](const world_state& ws, double& v0, double& v1) {
        if (given(ws)) {
          v1 = 1.0;
          if (target(ws)) v0 = 1.0;
        }
      },
      true);
}

namespace {

std::vector<int> with_world_nodes(const std::vector<int>& mentioned,
                                  const std::vector<assignment>& worlds) {
  std::vector<int> out = mentioned;
  for (const assignment& a : worlds)
    for (const auto& [node, value] : a.items()) out.push_back(node);
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

}  // namespace

cf_result counterfactual(const scm& m, const std::vector<assignment>& worlds,
                         const cf_event& event, const std::vector<int>& mentioned,
                         const cf_options& opt) {
  return counterfactual(
      m, worlds, event, [](std::uint32_t, const std::vector<std::uint32_t>&) { return true; },
      mentioned, opt);
}

cf_result counterfactual(const scm& m, const std::vector<assignment>& worlds,
                         const cf_event& event, const cf_event& given,
                         const std::vector<int>& mentioned, const cf_options& opt) {
  counterfactual_engine engine(m, opt);
  auto eval_worlds = [&worlds](const counterfactual_engine::world_state& ws) {
    thread_local std::vector<std::uint32_t> buf;
    buf.clear();
    for (const assignment& a : worlds) buf.push_back(ws.intervene(a));
    return &buf;
  };
  return engine.conditional(
      with_world_nodes(mentioned, worlds),
      [&](const counterfactual_engine::world_state& ws) {
        return event(ws.factual(), *eval_worlds(ws));
      },
      [&](const counterfactual_engine::world_state& ws) {
        return given(ws.factual(), *eval_worlds(ws));
      });
}

namespace {

void validate_spec(const scm& m, const estimand_spec& spec) {
  int n = m.node_count();
  if (spec.treatment < 0 || spec.treatment >= n || spec.outcome < 0 || spec.outcome >= n)
    throw std::invalid_argument("treatment or outcome out of range");
  if (spec.treatment == spec.outcome)
    throw std::invalid_argument("treatment equals outcome");
  auto binary = [](int v) { return v == 0 || v == 1; };
  if (!binary(spec.x) || !binary(spec.x_alt) || !binary(spec.y))
    throw std::invalid_argument("treatment/outcome values must be 0 or 1");
  if (spec.x == spec.x_alt) throw std::invalid_argument("treatment contrast is degenerate");

  bool needs_mediators =
      spec.kind == task::cde || spec.kind == task::nde || spec.kind == task::nie;
  if (needs_mediators && spec.mediator_set.empty())
    throw std::invalid_argument("mediator set required for this estimand");
  for (int mm : spec.mediator_set) {
    if (mm < 0 || mm >= n) throw std::invalid_argument("mediator out of range");
    if (mm == spec.treatment || mm == spec.outcome)
      throw std::invalid_argument("mediator overlaps treatment or outcome");
  }
  if (spec.kind == task::cde) {
    if (spec.mediator_values.size() != spec.mediator_set.size())
      throw std::invalid_argument("CDE must fix every mediator");
    for (int mm : spec.mediator_set)
      if (!spec.mediator_values.contains(mm))
        throw std::invalid_argument("CDE mediator values must cover the mediator set");
  } else if (!spec.mediator_values.empty()) {
    throw std::invalid_argument("fixed mediator values only apply to CDE");
  }
}

double nested_mediation_term(const scm& m, const estimand_spec& spec, int first_x,
                             int second_x, const cf_options& opt) {
  // P(Y = y) in the world do(treatment = second_x, M = M_{first_x})
  counterfactual_engine engine(m, opt);
  std::vector<int> mentioned = spec.mediator_set;
  mentioned.push_back(spec.treatment);
  mentioned.push_back(spec.outcome);
  assignment first;
  first.set(spec.treatment, first_x);
  cf_result r = engine.expectation(
      mentioned, [&](const counterfactual_engine::world_state& ws) -> double {
        std::uint32_t w1 = ws.intervene(first);
        assignment second;
        second.set(spec.treatment, second_x);
        for (int mm : spec.mediator_set) second.set(mm, state_bit(w1, mm));
        return state_bit(ws.intervene(second), spec.outcome) == spec.y ? 1.0 : 0.0;
      });
  return r.value;
}

}  // namespace

estimand_value estimand(const scm& m, const estimand_spec& spec, const cf_options& opt) {
  validate_spec(m, spec);
  estimand_value out;
  assignment t_x, t_alt;
  t_x.set(spec.treatment, spec.x);
  t_alt.set(spec.treatment, spec.x_alt);
  assignment target_y;
  target_y.set(spec.outcome, spec.y);

  switch (spec.kind) {
    case task::ate: {
      out.value = query(interventional(m, t_x, opt.parallel), target_y) -
                  query(interventional(m, t_alt, opt.parallel), target_y);
      break;
    }
    case task::cde: {
      assignment do_x = t_x.merged(spec.mediator_values);
      assignment do_alt = t_alt.merged(spec.mediator_values);
      out.value = query(interventional(m, do_x, opt.parallel), target_y) -
                  query(interventional(m, do_alt, opt.parallel), target_y);
      break;
    }
    case task::ett: {
      counterfactual_engine engine(m, opt);
      std::vector<int> mentioned{spec.treatment, spec.outcome};
      auto given = [&](const counterfactual_engine::world_state& ws) {
        return state_bit(ws.factual(), spec.treatment) == spec.x;
      };
      auto term = [&](const assignment& do_t) {
        return engine
            .conditional(mentioned,
                         [&](const counterfactual_engine::world_state& ws) {
                           return state_bit(ws.intervene(do_t), spec.outcome) == spec.y;
                         },
                         given)
            .value;
      };
      out.value = term(t_x) - term(t_alt);
      break;
    }
    case task::nde: {
      double nested = nested_mediation_term(m, spec, spec.x, spec.x_alt, opt);
      out.value = nested - query(interventional(m, t_x, opt.parallel), target_y);
      break;
    }
    case task::nie: {
      double nested = nested_mediation_term(m, spec, spec.x_alt, spec.x, opt);
      out.value = nested - query(interventional(m, t_x, opt.parallel), target_y);
      break;
    }
    case task::pn:
    case task::ps: {
      joint_distribution obs = exact_joint(m, opt.parallel);
      return pn_ps_bounds(obs, interventional(m, t_x, opt.parallel),
                          interventional(m, t_alt, opt.parallel), spec);
    }
  }
  out.kind = estimand_value::shape::scalar;
  return out;
}

cf_result pn_exact(const scm& m, const estimand_spec& spec, const cf_options& opt) {
  validate_spec(m, spec);
  counterfactual_engine engine(m, opt);
  assignment do_alt;
  do_alt.set(spec.treatment, spec.x_alt);
  return engine.conditional(
      {spec.treatment, spec.outcome},
      [&](const counterfactual_engine::world_state& ws) {
        return state_bit(ws.intervene(do_alt), spec.outcome) == 1 - spec.y;
      },
      [&](const counterfactual_engine::world_state& ws) {
        return state_bit(ws.factual(), spec.treatment) == spec.x &&
               state_bit(ws.factual(), spec.outcome) == spec.y;
      });
}

cf_result ps_exact(const scm& m, const estimand_spec& spec, const cf_options& opt) {
  validate_spec(m, spec);
  counterfactual_engine engine(m, opt);
  assignment do_x;
  do_x.set(spec.treatment, spec.x);
  return engine.conditional(
      {spec.treatment, spec.outcome},
      [&](const counterfactual_engine::world_state& ws) {
        return state_bit(ws.intervene(do_x), spec.outcome) == spec.y;
      },
      [&](const counterfactual_engine::world_state& ws) {
        return state_bit(ws.factual(), spec.treatment) == spec.x_alt &&
               state_bit(ws.factual(), spec.outcome) == 1 - spec.y;
      });
}

estimand_value pn_ps_bounds(const joint_distribution& observational,
                            const joint_distribution& do_x,
                            const joint_distribution& do_x_alt, const estimand_spec& spec) {
  if (spec.kind != task::pn && spec.kind != task::ps)
    throw std::invalid_argument("bounds only apply to PN and PS");
  assignment y1, y0, xy, xy_alt;
  y1.set(spec.outcome, spec.y);
  y0.set(spec.outcome, 1 - spec.y);
  xy.set(spec.treatment, spec.x);
  xy.set(spec.outcome, spec.y);
  xy_alt.set(spec.treatment, spec.x_alt);
  xy_alt.set(spec.outcome, 1 - spec.y);

  double p_y = query(observational, y1);
  double p_xy = query(observational, xy);
  double p_xy_alt = query(observational, xy_alt);
  double p_y_do_x = query(do_x, y1);
  double p_y_do_alt = query(do_x_alt, y1);
  double p_ynot_do_alt = query(do_x_alt, y0);

  auto clamp01 = [](double v) { return std::min(1.0, std::max(0.0, v)); };
  estimand_value out;
  out.kind = estimand_value::shape::bound_pair;
  if (spec.kind == task::pn) {
    if (p_xy <= 0.0)
      throw undefined_conditional_error("PN needs positive joint treatment-outcome mass");
    out.lower = clamp01(std::max(0.0, (p_y - p_y_do_alt) / p_xy));
    out.upper = clamp01(std::min(1.0, (p_ynot_do_alt - p_xy_alt) / p_xy));
  } else {
    if (p_xy_alt <= 0.0)
      throw undefined_conditional_error("PS needs positive joint mass of the complements");
    out.lower = clamp01(std::max(0.0, (p_y_do_x - p_y) / p_xy_alt));
    out.upper = clamp01(std::min(1.0, (p_y_do_x - p_xy) / p_xy_alt));
  }
  return out;
}

}  // namespace gym
