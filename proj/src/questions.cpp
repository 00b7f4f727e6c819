#include "gym/questions.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "gym/errors.hpp"
#include "gym/identify.hpp"
#include "gym/random.hpp"

namespace gym {

const char* to_string(answer_mode m) {
  switch (m) {
    case answer_mode::binary: return "binary";
    case answer_mode::numeric: return "numeric";
    case answer_mode::bounds: return "bounds";
  }
  return "binary";
}

answer_mode answer_mode_from_string(const std::string& s) {
  if (s == "binary") return answer_mode::binary;
  if (s == "numeric") return answer_mode::numeric;
  if (s == "bounds") return answer_mode::bounds;
  throw config_error("unknown answer mode: " + s);
}

std::string answer::text(int precision) const {
  switch (k) {
    case kind::yes_no: return yes ? "yes" : "no";
    case kind::numeric: return format_fixed(value, precision);
    case kind::bounds:
      return "[" + format_fixed(lower, precision) + ", " + format_fixed(upper, precision) +
             "]";
    case kind::lack_condition: return k_lack_condition;
  }
  return "";
}

namespace {

std::string lower_name(task t) {
  std::string s = to_string(t);
  for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

assignment config_of(const std::vector<int>& set, std::uint32_t bits) {
  assignment a;
  for (std::size_t i = 0; i < set.size(); ++i)
    a.set(set[i], static_cast<int>((bits >> i) & 1u));
  return a;
}

std::string join_labels(const std::vector<int>& nodes, const std::vector<std::string>& labels) {
  std::string out;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (i) out += ", ";
    out += labels[static_cast<std::size_t>(nodes[i])];
  }
  return out;
}

// Builds identification formulas; folds single-node value-0 targets into
// 1 - P(node = 1 | ...) so complementary terms share one statement.
struct formula_builder {
  solution_expr e;
  const estimand_spec& spec;
  std::vector<int> zset;

  explicit formula_builder(const estimand_spec& s, const std::vector<int>& adjustment)
      : spec(s), zset(adjustment) {
    std::sort(zset.begin(), zset.end());
  }

  int term(const assignment& targets, const assignment& conditions) {
    const auto& items = targets.items();
    if (items.size() == 1 && items[0].second == 0) {
      assignment pos;
      pos.set(items[0].first, 1);
      return e.diff(e.constant(1.0), e.prob(prob_ref{pos, conditions}));
    }
    return e.prob(prob_ref{targets, conditions});
  }

  // P(set = cfg | extra); single-node sets fold, joint sets stay whole
  int weight(const std::vector<int>& set, std::uint32_t bits, const assignment& extra) {
    assignment cfg = config_of(set, bits);
    if (set.size() == 1) return term(cfg, extra);
    return e.prob(prob_ref{cfg, extra});
  }

  assignment with_treatment(int value, const assignment& more) const {
    assignment a = more;
    a.set(spec.treatment, value);
    return a;
  }

  assignment outcome_is(int value) const {
    assignment a;
    a.set(spec.outcome, value);
    return a;
  }

  // sum_z P(outcome = y_val | treatment = t_val, extra, z) * P(z | z_cond)
  int adjusted(int t_val, int y_val, const assignment& extra, const assignment& z_cond) {
    if (zset.empty()) return term(outcome_is(y_val), with_treatment(t_val, extra));
    std::vector<int> parts;
    for (std::uint32_t c = 0; c < (1u << zset.size()); ++c) {
      assignment zc = config_of(zset, c);
      int py = term(outcome_is(y_val), with_treatment(t_val, extra.merged(zc)));
      parts.push_back(e.prod({py, weight(zset, c, z_cond)}));
    }
    return e.sum(std::move(parts));
  }
};

}  // namespace

solution_expr build_symbolic_solution(const labeled_dag& g, const estimand_spec& spec,
                                      const std::vector<int>& adjustment_set,
                                      answer_mode amode) {
  formula_builder b(spec, adjustment_set);
  const auto& labels = g.labels;
  const std::string& lt = labels[static_cast<std::size_t>(spec.treatment)];
  const std::string& lo = labels[static_cast<std::size_t>(spec.outcome)];
  solution_expr& e = b.e;
  assignment none;

  auto adjust_note = [&]() {
    if (adjustment_set.empty()) return std::string("No adjustment is needed (empty set).");
    return "Adjust for the joint configurations of {" + join_labels(b.zset, labels) + "}.";
  };

  switch (spec.kind) {
    case task::ate: {
      int a = b.adjusted(spec.x, spec.y, none, none);
      int c = b.adjusted(spec.x_alt, spec.y, none, none);
      e.root = e.diff(a, c);
      e.steps.push_back({"Compare how likely " + lo + " = " + std::to_string(spec.y) +
                             " is when " + lt + " is set to " + std::to_string(spec.x) +
                             " versus " + std::to_string(spec.x_alt) + ".",
                         -1});
      e.steps.push_back({adjust_note(), -1});
      break;
    }
    case task::cde: {
      int a = b.adjusted(spec.x, spec.y, spec.mediator_values, none);
      int c = b.adjusted(spec.x_alt, spec.y, spec.mediator_values, none);
      e.root = e.diff(a, c);
      e.steps.push_back({"Holding {" + join_labels(spec.mediator_set, labels) +
                             "} fixed, compare how likely " + lo + " = " +
                             std::to_string(spec.y) + " is when " + lt + " is set to " +
                             std::to_string(spec.x) + " versus " + std::to_string(spec.x_alt) +
                             ".",
                         -1});
      e.steps.push_back({adjust_note(), -1});
      break;
    }
    case task::ett: {
      assignment factual;
      factual.set(spec.treatment, spec.x);
      int hypo = b.adjusted(spec.x_alt, spec.y, none, factual);
      int fact = b.term(b.outcome_is(spec.y), factual);
      e.root = e.diff(hypo, fact);
      e.steps.push_back({"Among cases where " + lt + " was actually " +
                             std::to_string(spec.x) + ", compare the counterfactual chance of " +
                             lo + " = " + std::to_string(spec.y) + " under " + lt + " = " +
                             std::to_string(spec.x_alt) + " with the observed one.",
                         -1});
      e.steps.push_back({adjust_note() +
                             " Weight configurations by their distribution among the " + lt +
                             " = " + std::to_string(spec.x) + " cases.",
                         -1});
      break;
    }
    case task::nde:
    case task::nie: {
      std::vector<int> mset = spec.mediator_set;
      std::sort(mset.begin(), mset.end());
      std::vector<int> parts;
      for (std::uint32_t zc = 0; zc < (1u << b.zset.size()); ++zc) {
        assignment zcfg = config_of(b.zset, zc);
        for (std::uint32_t mc = 0; mc < (1u << mset.size()); ++mc) {
          assignment mcfg = config_of(mset, mc);
          std::vector<int> factors;
          if (spec.kind == task::nde) {
            int y_alt =
                b.term(b.outcome_is(spec.y), b.with_treatment(spec.x_alt, mcfg.merged(zcfg)));
            int y_base =
                b.term(b.outcome_is(spec.y), b.with_treatment(spec.x, mcfg.merged(zcfg)));
            factors.push_back(e.diff(y_alt, y_base));
            factors.push_back(b.weight(mset, mc, b.with_treatment(spec.x, zcfg)));
          } else {
            factors.push_back(
                b.term(b.outcome_is(spec.y), b.with_treatment(spec.x, mcfg.merged(zcfg))));
            int w_alt = b.weight(mset, mc, b.with_treatment(spec.x_alt, zcfg));
            int w_base = b.weight(mset, mc, b.with_treatment(spec.x, zcfg));
            factors.push_back(e.diff(w_alt, w_base));
          }
          if (!b.zset.empty()) factors.push_back(b.weight(b.zset, zc, none));
          parts.push_back(e.prod(std::move(factors)));
        }
      }
      e.root = e.sum(std::move(parts));
      if (spec.kind == task::nde) {
        e.steps.push_back({"Change " + lt + " to " + std::to_string(spec.x_alt) +
                               " while the mediators {" + join_labels(mset, labels) +
                               "} keep the distribution they have under " + lt + " = " +
                               std::to_string(spec.x) + ".",
                           -1});
      } else {
        e.steps.push_back({"Keep " + lt + " at " + std::to_string(spec.x) +
                               " while the mediators {" + join_labels(mset, labels) +
                               "} shift to the distribution they would have under " + lt +
                               " = " + std::to_string(spec.x_alt) + ".",
                           -1});
      }
      e.steps.push_back({adjust_note(), -1});
      break;
    }
    case task::pn:
    case task::ps: {
      int py = b.term(b.outcome_is(spec.y), none);
      assignment xy;
      xy.set(spec.treatment, spec.x);
      xy.set(spec.outcome, spec.y);
      assignment xy_alt;
      xy_alt.set(spec.treatment, spec.x_alt);
      xy_alt.set(spec.outcome, 1 - spec.y);
      int pxy = e.prob(prob_ref{xy, none});
      int pxy_alt = e.prob(prob_ref{xy_alt, none});
      int zero = e.constant(0.0);
      int one = e.constant(1.0);
      int lower_raw, upper_raw;
      if (spec.kind == task::pn) {
        int do_alt_y = b.adjusted(spec.x_alt, spec.y, none, none);
        int do_alt_ynot = b.adjusted(spec.x_alt, 1 - spec.y, none, none);
        lower_raw = e.quot(e.diff(py, do_alt_y), pxy);
        upper_raw = e.quot(e.diff(do_alt_ynot, pxy_alt), pxy);
        e.steps.push_back(
            {"Bound the probability that " + lo + " = " + std::to_string(spec.y) +
                 " would not have occurred without " + lt + " = " + std::to_string(spec.x) +
                 ", using the interventional probability of " + lo + " under " + lt + " = " +
                 std::to_string(spec.x_alt) + ".",
             -1});
      } else {
        int do_x_y = b.adjusted(spec.x, spec.y, none, none);
        lower_raw = e.quot(e.diff(do_x_y, py), pxy_alt);
        upper_raw = e.quot(e.diff(do_x_y, pxy), pxy_alt);
        e.steps.push_back(
            {"Bound the probability that setting " + lt + " = " + std::to_string(spec.x) +
                 " would produce " + lo + " = " + std::to_string(spec.y) +
                 " in cases where neither held, using the interventional probability of " + lo +
                 " under " + lt + " = " + std::to_string(spec.x) + ".",
             -1});
      }
      e.steps.push_back({adjust_note(), -1});
      e.root = e.clamp01(e.vmax(zero, lower_raw));
      e.root_upper = e.clamp01(e.vmin(one, upper_raw));
      break;
    }
  }

  if (e.root_upper >= 0) {
    e.steps.push_back({"Lower bound: " + e.to_text(e.root, labels) + ".", e.root});
    e.steps.push_back({"Upper bound: " + e.to_text(e.root_upper, labels) + ".", e.root_upper});
    e.steps.push_back({"Report [lower, upper], each bound clamped to [0, 1].", -1});
  } else {
    e.steps.push_back({"Evaluate: " + e.to_text(e.root, labels) + ".", e.root});
    if (amode == answer_mode::binary)
      e.steps.push_back({"Answer yes exactly when the value is positive.", -1});
    else
      e.steps.push_back({"Report the value.", -1});
  }
  return e;
}

std::vector<prob_statement> select_given_statements(const solution_expr& solution,
                                                    const joint_distribution& joint,
                                                    const labeled_dag& g, int precision) {
  std::vector<prob_statement> out;
  for (int ref_id : solution.ordered_refs()) {
    const prob_ref& r = solution.refs()[static_cast<std::size_t>(ref_id)];
    prob_statement s;
    s.ref = r;
    s.value = round_to(query(joint, r.targets, r.conditions), precision);
    s.text = r.render(g.labels) + " = " + format_fixed(s.value, precision);
    out.push_back(std::move(s));
  }
  return out;
}

std::string lack_condition_instruction() {
  return std::string(" If the information given is not sufficient to determine the answer, "
                     "finish with {\"answer\": \"") +
         k_lack_condition + "\"} instead.";
}

rendered_question render_question(const labeled_dag& g, const estimand_spec& spec,
                                  answer_mode amode, int answer_precision) {
  const std::string& lt = g.labels[static_cast<std::size_t>(spec.treatment)];
  const std::string& lo = g.labels[static_cast<std::size_t>(spec.outcome)];
  auto num = [](int v) { return std::to_string(v); };

  rendered_question out;
  switch (spec.kind) {
    case task::ate:
      out.query = "If " + lt + " is changed to be " + num(spec.x) + ", will the " + lo +
                  " be more likely to be " + num(spec.y) + "?";
      break;
    case task::cde: {
      std::string held;
      for (const auto& [node, value] : spec.mediator_values.items()) {
        if (!held.empty()) held += " and ";
        held += g.labels[static_cast<std::size_t>(node)] + " being " + num(value);
      }
      out.query = "Conditioned on " + held + ", if " + lt + " is changed to be " +
                  num(spec.x) + ", will the " + lo + " be more likely to be " + num(spec.y) +
                  "?";
      break;
    }
    case task::ett:
      out.query = "Given that " + lt + " was " + num(spec.x) + ", if " + lt + " had been " +
                  num(spec.x_alt) + " instead, would the " + lo +
                  " have been more likely to be " + num(spec.y) + "?";
      break;
    case task::nde:
      out.query = "Suppose the mediator keeps constant when " + lt + " is changed to be " +
                  num(spec.x_alt) + "; would the " + lo + " have been more likely to be " +
                  num(spec.y) + "?";
      break;
    case task::nie:
      out.query = "Suppose " + lt + " is held constant, and the mediator changes to whatever "
                  "value it would have attained under " +
                  lt + " changing to be " + num(spec.x_alt) + "; would the " + lo +
                  " have been more likely to be " + num(spec.y) + "?";
      break;
    case task::pn:
      out.query = "Given that " + lt + " was " + num(spec.x) + " and the " + lo + " was " +
                  num(spec.y) + ", what are the lower and upper bounds of the probability "
                  "that the " +
                  lo + " would have been " + num(1 - spec.y) + " if " + lt + " had been " +
                  num(spec.x_alt) + "?";
      break;
    case task::ps:
      out.query = "Given that " + lt + " was " + num(spec.x_alt) + " and the " + lo + " was " +
                  num(1 - spec.y) + ", what are the lower and upper bounds of the probability "
                  "that the " +
                  lo + " would be " + num(spec.y) + " if " + lt + " were " + num(spec.x) + "?";
      break;
  }

  std::string p = std::to_string(answer_precision);
  switch (amode) {
    case answer_mode::binary:
      out.instruction =
          "Estimate the effect using only the probabilities given above. Reason step by "
          "step, and finish with a JSON object in the form {\"answer\": \"yes\"} or "
          "{\"answer\": \"no\"}.";
      break;
    case answer_mode::numeric:
      out.instruction =
          "Estimate the quantity using only the probabilities given above. Reason step by "
          "step, and finish with a JSON object in the form {\"answer\": 0.1234}, rounding "
          "the value to " +
          p + " decimal places.";
      break;
    case answer_mode::bounds:
      out.instruction =
          "Estimate the bounds using only the probabilities given above. Reason step by "
          "step, and finish with a JSON object in the form {\"answer\": [0.1234, 0.5678]}, "
          "rounding both bounds to " +
          p + " decimal places.";
      break;
  }
  return out;
}

answer_outcome compute_answer(const solution_expr& solution,
                              const std::vector<prob_statement>& statements,
                              answer_mode amode, int answer_precision) {
  if (amode == answer_mode::bounds && solution.root_upper < 0)
    throw std::invalid_argument("bound answers need an upper-bound root");

  auto lookup = statement_lookup(statements);
  answer_outcome out;
  solution_expr::eval_result lo = solution.eval(solution.root, lookup);
  solution_expr::eval_result hi;
  if (amode == answer_mode::bounds) hi = solution.eval(solution.root_upper, lookup);

  out.missing_refs = lo.missing;
  for (int m : hi.missing)
    if (std::find(out.missing_refs.begin(), out.missing_refs.end(), m) ==
        out.missing_refs.end())
      out.missing_refs.push_back(m);
  if (!out.missing_refs.empty()) {
    out.value.k = answer::kind::lack_condition;
    return out;
  }
  if (lo.degenerate || !lo.value || (amode == answer_mode::bounds && (hi.degenerate || !hi.value))) {
    out.degenerate = true;
    return out;
  }

  out.eval_value = *lo.value;
  switch (amode) {
    case answer_mode::binary:
      out.value.k = answer::kind::yes_no;
      out.value.yes = *lo.value > 0.0;
      break;
    case answer_mode::numeric:
      out.value.k = answer::kind::numeric;
      out.value.value = round_to(*lo.value, answer_precision);
      break;
    case answer_mode::bounds: {
      out.eval_upper = *hi.value;
      out.value.k = answer::kind::bounds;
      out.value.lower = round_to(*lo.value, answer_precision);
      out.value.upper = round_to(*hi.value, answer_precision);
      if (out.value.lower > out.value.upper) out.degenerate = true;
      break;
    }
  }
  return out;
}

namespace {

struct candidate_pair {
  int treatment, outcome;
};

std::vector<candidate_pair> eligible_pairs(const dag& g, task kind, bool want_null) {
  std::vector<candidate_pair> out;
  for (int t = 0; t < g.node_count; ++t) {
    std::vector<int> down = descendants(g, t);
    for (int o = 0; o < g.node_count; ++o) {
      if (o == t) continue;
      bool is_desc = std::binary_search(down.begin(), down.end(), o);
      switch (kind) {
        case task::ate:
          // a direct edge o -> t leaves the backdoor path t <- o permanently
          // open, so no adjustment set exists for that pair
          if (want_null ? (!is_desc && !g.has_edge(o, t)) : is_desc) out.push_back({t, o});
          break;
        case task::ett:
        case task::pn:
        case task::ps:
          if (is_desc) out.push_back({t, o});
          break;
        case task::cde:
        case task::nde:
        case task::nie:
          if (is_desc && !mediators(g, t, o).empty()) out.push_back({t, o});
          break;
      }
    }
  }
  return out;
}

solution_expr::ref_lookup joint_lookup(const joint_distribution& joint) {
  return [&joint](const prob_ref& r) -> std::optional<double> {
    return query(joint, r.targets, r.conditions);
  };
}

struct unrounded_eval {
  double value = 0.0;
  double upper = 0.0;
  bool ok = false;
};

unrounded_eval eval_from_joint(const solution_expr& sol, const joint_distribution& joint,
                               bool bounds) {
  unrounded_eval out;
  auto lookup = joint_lookup(joint);
  auto lo = sol.eval(sol.root, lookup);
  if (!lo.value) return out;
  out.value = *lo.value;
  if (bounds) {
    auto hi = sol.eval(sol.root_upper, lookup);
    if (!hi.value) return out;
    out.upper = *hi.value;
  }
  out.ok = true;
  return out;
}

}  // namespace

question_instance generate_instance(const gen_params& params, const vocabulary& vocab,
                                    task kind, std::uint64_t base_seed, std::uint64_t index) {
  if (params.node_min < 2 || params.node_max < params.node_min || params.node_max > 16)
    throw config_error("node count range must satisfy 2 <= min <= max <= 16");
  double mode_total = params.fake_weight + params.random_weight + params.real_weight;
  if (!(mode_total > 0.0)) throw config_error("semantics mode weights must not all be zero");
  if ((params.random_weight > 0.0 || params.real_weight > 0.0) &&
      vocab.size() < params.node_min)
    throw config_error("vocabulary too small for the requested semantics modes");

  bool bounds_task = kind == task::pn || kind == task::ps;
  answer_mode amode = bounds_task ? answer_mode::bounds : params.effect_answer_mode;

  for (int attempt = 1; attempt <= params.retry_cap; ++attempt) {
    rng r(derive_seed(base_seed, index, static_cast<std::uint64_t>(attempt)));

    double mode_draw = r.u01() * mode_total;
    semantics_mode mode =
        mode_draw < params.fake_weight
            ? semantics_mode::fake
            : (mode_draw < params.fake_weight + params.random_weight ? semantics_mode::random
                                                                     : semantics_mode::real);

    int n = r.range(params.node_min, params.node_max);
    labeled_dag labeled;
    try {
      if (mode == semantics_mode::real) {
        n = std::min(n, vocab.size());
        labeled = sample_vocabulary_subgraph(vocab, n, r.next_u64());
      } else {
        dag d = generate_dag(n, params.edge_density, r.next_u64(), params.max_in_degree);
        labeled = assign_semantics(d, mode, vocab, r.next_u64());
      }
    } catch (const data_error&) {
      continue;
    }

    scm model = instantiate_scm(labeled, r.next_u64(), params.mechanisms);
    joint_distribution joint = exact_joint(model);
    const dag& g = labeled.graph;

    bool want_null = kind == task::ate && r.u01() < params.no_effect_fraction;
    std::vector<candidate_pair> pairs = eligible_pairs(g, kind, want_null);
    if (pairs.empty()) continue;
    candidate_pair pick = pairs[static_cast<std::size_t>(r.below(pairs.size()))];

    estimand_spec spec;
    spec.kind = kind;
    spec.treatment = pick.treatment;
    spec.outcome = pick.outcome;
    switch (kind) {
      case task::pn:
      case task::ps:
        spec.x = 1;
        spec.x_alt = 0;
        spec.y = 1;
        break;
      case task::nde:
      case task::nie:
        spec.x_alt = r.coin() ? 1 : 0;
        spec.x = 1 - spec.x_alt;
        spec.y = r.coin() ? 1 : 0;
        break;
      default:
        spec.x = r.coin() ? 1 : 0;
        spec.x_alt = 1 - spec.x;
        spec.y = r.coin() ? 1 : 0;
        break;
    }

    adjustment_result backdoor = backdoor_sets(g, spec.treatment, spec.outcome);
    if (params.require_confounding && backdoor.backdoor_set.empty()) continue;

    std::vector<int> adjustment;
    if (kind == task::cde || kind == task::nde || kind == task::nie) {
      spec.mediator_set = mediators(g, spec.treatment, spec.outcome);
      if (kind == task::cde) {
        for (int mnode : spec.mediator_set) spec.mediator_values.set(mnode, r.coin() ? 1 : 0);
        std::vector<int> joint_treatment = spec.mediator_set;
        joint_treatment.push_back(spec.treatment);
        adjustment = joint_adjustment_set(g, joint_treatment, spec.outcome);
      } else {
        adjustment =
            mediation_adjustment_set(g, spec.treatment, spec.outcome, spec.mediator_set);
      }
    } else {
      adjustment = backdoor.backdoor_set;
    }

    solution_expr solution = build_symbolic_solution(labeled, spec, adjustment, amode);
    if (static_cast<int>(solution.refs().size()) > params.max_statements) continue;

    std::vector<prob_statement> statements;
    try {
      statements = select_given_statements(solution, joint, labeled, params.render_precision);
    } catch (const undefined_conditional_error&) {
      continue;
    }

    unrounded_eval exact = eval_from_joint(solution, joint, bounds_task);
    if (!exact.ok) continue;

    if (kind == task::ate || kind == task::cde) {
      // the adjustment identity must reproduce the truncated-factorization
      // intervention exactly; a mismatch is a bug, not bad luck
      estimand_value direct = estimand(model, spec);
      if (std::abs(direct.value - exact.value) > 1e-9)
        throw std::logic_error("adjustment formula disagrees with intervention oracle");
    }

    if (amode == answer_mode::binary) {
      if (want_null) {
        if (std::abs(exact.value) > 1e-9) continue;
      } else if (std::abs(exact.value) < params.sign_margin) {
        continue;
      }
    }

    answer_outcome outcome =
        compute_answer(solution, statements, amode, params.answer_precision);
    if (!outcome.missing_refs.empty())
      throw std::logic_error("statements do not cover the solution references");
    if (outcome.degenerate) continue;
    if (amode == answer_mode::binary && !want_null &&
        (outcome.eval_value > 0.0) != (exact.value > 0.0))
      continue;

    solution_expr naive_solution = build_symbolic_solution(labeled, spec, {}, amode);
    unrounded_eval naive = eval_from_joint(naive_solution, joint, bounds_task);
    if (params.require_confounding) {
      if (!naive.ok) continue;
      bool disagrees;
      if (amode == answer_mode::binary) {
        disagrees = (naive.value > 0.0) != (exact.value > 0.0);
      } else if (bounds_task) {
        disagrees = round_to(naive.value, params.render_precision) !=
                        round_to(exact.value, params.render_precision) ||
                    round_to(naive.upper, params.render_precision) !=
                        round_to(exact.upper, params.render_precision);
      } else {
        disagrees = round_to(naive.value, params.render_precision) !=
                    round_to(exact.value, params.render_precision);
      }
      if (!disagrees) continue;
    }

    question_instance q;
    char idx_buf[32];
    std::snprintf(idx_buf, sizeof(idx_buf), "%05llu",
                  static_cast<unsigned long long>(index));
    q.id = params.id_prefix + "-" + lower_name(kind) + "-" + idx_buf;
    q.kind = kind;
    q.mode = mode;
    q.amode = amode;
    q.given_info = std::move(statements);
    rendered_question rendered =
        render_question(labeled, spec, amode, params.answer_precision);
    q.instruction = rendered.instruction;
    q.query = rendered.query;
    q.gold = outcome.value;
    q.solution = std::move(solution);

    q.meta.model = std::move(model);
    q.meta.espec = spec;
    q.meta.backdoor_set = backdoor.backdoor_set;
    q.meta.adjustment_set = adjustment;
    q.meta.base_seed = base_seed;
    q.meta.index = index;
    q.meta.attempt = attempt;
    q.meta.render_precision = params.render_precision;
    q.meta.answer_precision = params.answer_precision;
    q.meta.oracle_value = exact.value;
    q.meta.oracle_upper = exact.upper;
    if (bounds_task) {
      q.meta.estimand_value = exact.value;
      q.meta.estimand_upper = exact.upper;
    } else {
      q.meta.estimand_value = kind == task::ett ? -exact.value : exact.value;
      q.meta.estimand_upper = 0.0;
    }
    q.meta.has_naive = naive.ok;
    q.meta.naive_value = naive.value;
    q.meta.naive_upper = naive.upper;
    return q;
  }
  throw generation_error("could not generate a " + std::string(to_string(kind)) +
                         " instance within " + std::to_string(params.retry_cap) +
                         " attempts (seed " + std::to_string(base_seed) + ", index " +
                         std::to_string(index) + ")");
}

std::string compose_prompt(const question_instance& q) {
  std::string out = "Given information:\n";
  for (const prob_statement& s : q.given_info) {
    out += "- ";
    out += s.text;
    out += "\n";
  }
  out += "\n";
  if (!q.instruction.empty()) {
    out += "Instruction: ";
    out += q.instruction;
    out += "\n\n";
  }
  out += "Question: ";
  out += q.query;
  return out;
}

namespace {

nlohmann::ordered_json assignment_to_json(const assignment& a) {
  nlohmann::ordered_json out = nlohmann::ordered_json::array();
  for (const auto& [node, value] : a.items()) out.push_back({node, value});
  return out;
}

assignment assignment_from_json(const nlohmann::json& j) {
  assignment a;
  for (const auto& item : j) a.set(item.at(0).get<int>(), item.at(1).get<int>());
  return a;
}

nlohmann::ordered_json answer_to_json(const answer& a) {
  nlohmann::ordered_json j;
  switch (a.k) {
    case answer::kind::yes_no:
      j["kind"] = "yes_no";
      j["yes"] = a.yes;
      break;
    case answer::kind::numeric:
      j["kind"] = "numeric";
      j["value"] = a.value;
      break;
    case answer::kind::bounds:
      j["kind"] = "bounds";
      j["lower"] = a.lower;
      j["upper"] = a.upper;
      break;
    case answer::kind::lack_condition:
      j["kind"] = "lack_condition";
      break;
  }
  return j;
}

answer answer_from_json(const nlohmann::json& j) {
  answer a;
  std::string kind = j.at("kind").get<std::string>();
  if (kind == "yes_no") {
    a.k = answer::kind::yes_no;
    a.yes = j.at("yes").get<bool>();
  } else if (kind == "numeric") {
    a.k = answer::kind::numeric;
    a.value = j.at("value").get<double>();
  } else if (kind == "bounds") {
    a.k = answer::kind::bounds;
    a.lower = j.at("lower").get<double>();
    a.upper = j.at("upper").get<double>();
  } else if (kind == "lack_condition") {
    a.k = answer::kind::lack_condition;
  } else {
    throw data_error("unknown answer kind: " + kind);
  }
  return a;
}

}  // namespace

nlohmann::ordered_json estimand_spec_to_json(const estimand_spec& spec) {
  nlohmann::ordered_json j;
  j["task"] = to_string(spec.kind);
  j["treatment"] = spec.treatment;
  j["x"] = spec.x;
  j["x_alt"] = spec.x_alt;
  j["outcome"] = spec.outcome;
  j["y"] = spec.y;
  j["mediator_set"] = spec.mediator_set;
  j["mediator_values"] = assignment_to_json(spec.mediator_values);
  return j;
}

estimand_spec estimand_spec_from_json(const nlohmann::json& j) {
  estimand_spec spec;
  spec.kind = task_from_string(j.at("task").get<std::string>());
  spec.treatment = j.at("treatment").get<int>();
  spec.x = j.at("x").get<int>();
  spec.x_alt = j.at("x_alt").get<int>();
  spec.outcome = j.at("outcome").get<int>();
  spec.y = j.at("y").get<int>();
  spec.mediator_set = j.at("mediator_set").get<std::vector<int>>();
  spec.mediator_values = assignment_from_json(j.at("mediator_values"));
  return spec;
}

nlohmann::ordered_json instance_to_json(const question_instance& q) {
  nlohmann::ordered_json j;
  j["schema_version"] = k_schema_version;
  j["id"] = q.id;
  j["task"] = to_string(q.kind);
  j["mode"] = to_string(q.mode);
  j["answer_mode"] = to_string(q.amode);
  j["variant"] = q.variant;

  nlohmann::ordered_json given = nlohmann::ordered_json::array();
  for (const prob_statement& s : q.given_info) {
    nlohmann::ordered_json js;
    js["targets"] = assignment_to_json(s.ref.targets);
    js["conditions"] = assignment_to_json(s.ref.conditions);
    js["value"] = s.value;
    js["text"] = s.text;
    given.push_back(js);
  }
  j["given_info"] = given;
  j["instruction"] = q.instruction;
  j["query"] = q.query;
  j["answer"] = q.gold.text(q.meta.answer_precision);
  j["answer_detail"] = answer_to_json(q.gold);
  j["solution"] = q.solution.to_json();

  nlohmann::ordered_json meta;
  meta["model"] = scm_to_json(q.meta.model);
  meta["estimand"] = estimand_spec_to_json(q.meta.espec);
  meta["backdoor_set"] = q.meta.backdoor_set;
  meta["adjustment_set"] = q.meta.adjustment_set;
  meta["seeds"] = {{"base", q.meta.base_seed}, {"index", q.meta.index},
                   {"attempt", q.meta.attempt}};
  meta["precision"] = {{"render", q.meta.render_precision},
                       {"answer", q.meta.answer_precision}};
  nlohmann::ordered_json oracle;
  oracle["question_value"] = q.meta.oracle_value;
  oracle["question_upper"] = q.meta.oracle_upper;
  oracle["estimand_value"] = q.meta.estimand_value;
  oracle["estimand_upper"] = q.meta.estimand_upper;
  oracle["has_naive"] = q.meta.has_naive;
  oracle["naive_value"] = q.meta.naive_value;
  oracle["naive_upper"] = q.meta.naive_upper;
  meta["oracle"] = oracle;
  nlohmann::ordered_json stress;
  stress["source_id"] = q.meta.source_id;
  stress["removed_refs"] = q.meta.removed_refs;
  stress["added_statements"] = q.meta.added_statements;
  stress["rewriter_fallback"] = q.meta.rewriter_fallback;
  meta["stress"] = stress;
  j["metadata"] = meta;
  return j;
}

question_instance instance_from_json(const nlohmann::json& j) {
  check_schema_version(j.at("schema_version").get<std::string>());
  question_instance q;
  q.id = j.at("id").get<std::string>();
  q.kind = task_from_string(j.at("task").get<std::string>());
  q.mode = semantics_mode_from_string(j.at("mode").get<std::string>());
  q.amode = answer_mode_from_string(j.at("answer_mode").get<std::string>());
  q.variant = j.at("variant").get<std::string>();
  for (const auto& js : j.at("given_info")) {
    prob_statement s;
    s.ref.targets = assignment_from_json(js.at("targets"));
    s.ref.conditions = assignment_from_json(js.at("conditions"));
    s.value = js.at("value").get<double>();
    s.text = js.at("text").get<std::string>();
    q.given_info.push_back(std::move(s));
  }
  q.instruction = j.at("instruction").get<std::string>();
  q.query = j.at("query").get<std::string>();
  q.gold = answer_from_json(j.at("answer_detail"));
  q.solution = solution_expr::from_json(j.at("solution"));

  const auto& meta = j.at("metadata");
  q.meta.model = scm_from_json(meta.at("model"));
  q.meta.espec = estimand_spec_from_json(meta.at("estimand"));
  q.meta.backdoor_set = meta.at("backdoor_set").get<std::vector<int>>();
  q.meta.adjustment_set = meta.at("adjustment_set").get<std::vector<int>>();
  q.meta.base_seed = meta.at("seeds").at("base").get<std::uint64_t>();
  q.meta.index = meta.at("seeds").at("index").get<std::uint64_t>();
  q.meta.attempt = meta.at("seeds").at("attempt").get<int>();
  q.meta.render_precision = meta.at("precision").at("render").get<int>();
  q.meta.answer_precision = meta.at("precision").at("answer").get<int>();
  const auto& oracle = meta.at("oracle");
  q.meta.oracle_value = oracle.at("question_value").get<double>();
  q.meta.oracle_upper = oracle.at("question_upper").get<double>();
  q.meta.estimand_value = oracle.at("estimand_value").get<double>();
  q.meta.estimand_upper = oracle.at("estimand_upper").get<double>();
  q.meta.has_naive = oracle.at("has_naive").get<bool>();
  q.meta.naive_value = oracle.at("naive_value").get<double>();
  q.meta.naive_upper = oracle.at("naive_upper").get<double>();
  const auto& stress = meta.at("stress");
  q.meta.source_id = stress.at("source_id").get<std::string>();
  q.meta.removed_refs = stress.at("removed_refs").get<std::vector<int>>();
  q.meta.added_statements = stress.at("added_statements").get<std::vector<int>>();
  q.meta.rewriter_fallback = stress.at("rewriter_fallback").get<bool>();
  return q;
}

}  // namespace gym
