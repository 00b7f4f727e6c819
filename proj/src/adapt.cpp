#include "gym/adapt.hpp"

#include <algorithm>
#include <cmath>

#include "gym/errors.hpp"
#include "gym/random.hpp"

namespace gym {

const char* to_string(kto_label l) {
  return l == kto_label::desirable ? "desirable" : "undesirable";
}

namespace {

std::string answer_sentence(const question_instance& q) {
  int p = q.meta.answer_precision;
  answer_outcome out = compute_answer(q.solution, q.given_info, q.amode, p);
  switch (out.value.k) {
    case answer::kind::lack_condition: {
      std::string refs;
      for (int id : out.missing_refs) {
        if (!refs.empty()) refs += ", ";
        refs += q.solution.refs()[static_cast<std::size_t>(id)].render(
            q.meta.model.structure.labels);
      }
      return "The expression needs " + refs +
             ", which the given information does not provide, so the answer is " +
             k_lack_condition + ".";
    }
    case answer::kind::bounds:
      return "Substituting the given probabilities gives the interval " +
             out.value.text(p) + ".";
    case answer::kind::numeric:
      return "Substituting the given probabilities gives " + out.value.text(p) + ".";
    case answer::kind::yes_no:
      return "Substituting the given probabilities gives " + format_fixed(out.eval_value, p) +
             ", which is " + (out.value.yes ? "positive" : "not positive") +
             ", so the answer is " + out.value.text(p) + ".";
  }
  return "";
}

}  // namespace

std::string reference_reasoning(const question_instance& q) {
  std::string out;
  int i = 1;
  for (const solution_step& s : q.solution.steps) {
    out += "Step " + std::to_string(i++) + ": " + s.text + "\n";
  }
  out += answer_sentence(q);
  out += "\n";
  return out;
}

std::string answer_json_line(const answer& a, int precision) {
  nlohmann::ordered_json j;
  switch (a.k) {
    case answer::kind::yes_no: j["answer"] = a.yes ? "yes" : "no"; break;
    case answer::kind::numeric: j["answer"] = round_to(a.value, precision); break;
    case answer::kind::bounds:
      j["answer"] = {round_to(a.lower, precision), round_to(a.upper, precision)};
      break;
    case answer::kind::lack_condition: j["answer"] = k_lack_condition; break;
  }
  return j.dump();
}

std::string gold_response(const question_instance& q) {
  return "<think>\n" + reference_reasoning(q) + "</think>\n" +
         answer_json_line(q.gold, q.meta.answer_precision);
}

namespace {

std::string polish_system_prompt() {
  return "Rewrite the following derivation so it reads as natural prose. Keep every number "
         "exactly as written, keep every variable name exactly as written, keep the order "
         "of the derivation, and keep the stated answer. Reply with the rewritten "
         "derivation only.";
}

bool polish_ok(const question_instance& q, const std::string& reference,
               const std::string& polished) {
  if (!same_decimal_multiset(reference, polished)) return false;
  parsed_answer stated = parse_final_answer(polished, q.amode);
  if (stated.k == parsed_answer::kind::none) return true;  // no answer claim to contradict
  parsed_answer gold = parse_final_answer(q.gold.text(q.meta.answer_precision), q.amode);
  return score(q.id, stated, gold, q.amode).correct;
}

}  // namespace

sft_record to_sft(const question_instance& q, rewriter_port& reasoner, int retries) {
  sft_record rec;
  rec.id = q.id;
  rec.prompt = compose_prompt(q);
  rec.answer = q.gold.text(q.meta.answer_precision);

  std::string reference = reference_reasoning(q);
  for (int i = 0; i < retries; ++i) {
    try {
      std::string polished = reasoner.rewrite(polish_system_prompt(), reference);
      if (polish_ok(q, reference, polished)) {
        rec.reasoning = polished;
        return rec;
      }
    } catch (const data_error&) {
      // transport failure: retriable
    }
  }
  rec.reasoning = reference;
  rec.polished_fallback = true;
  return rec;
}

namespace {

std::string canonical_text(const parsed_answer& p, int precision) {
  switch (p.k) {
    case parsed_answer::kind::yes_no: return p.yes ? "yes" : "no";
    case parsed_answer::kind::numeric: return format_fixed(p.value, precision);
    case parsed_answer::kind::bounds:
      return "[" + format_fixed(p.lower, precision) + ", " +
             format_fixed(p.upper, precision) + "]";
    case parsed_answer::kind::lack_condition: return k_lack_condition;
    case parsed_answer::kind::none: return "";
  }
  return "";
}

}  // namespace

std::optional<preference_side> mine_negative(const question_instance& q,
                                             const std::vector<std::string>& candidate_traces,
                                             const negative_params& np) {
  int p = q.meta.answer_precision;
  parsed_answer gold = parse_final_answer(q.gold.text(p), q.amode);

  for (const std::string& trace : candidate_traces) {
    parsed_answer stated = parse_final_answer(trace, q.amode);
    if (stated.k == parsed_answer::kind::none) continue;
    if (!score(q.id, stated, gold, q.amode).correct)
      return preference_side{trace, canonical_text(stated, p)};
  }

  std::string reference = reference_reasoning(q);
  std::string gold_text = q.gold.text(p);
  for (const std::string& trace : candidate_traces) {
    if (static_cast<double>(trace.size()) >
        np.length_multiple * static_cast<double>(reference.size()))
      return preference_side{trace, gold_text};  // verbose

    // every given value must be mentioned, in statement order
    std::size_t cursor = 0;
    bool missing = false, disordered = false;
    for (const prob_statement& s : q.given_info) {
      std::string value = format_fixed(s.value, q.meta.render_precision);
      std::size_t anywhere = trace.find(value);
      if (anywhere == std::string::npos) {
        missing = true;
        break;
      }
      std::size_t from_cursor = trace.find(value, cursor);
      if (from_cursor == std::string::npos) {
        disordered = true;
        break;
      }
      cursor = from_cursor + value.size();
    }
    if (missing || disordered) return preference_side{trace, gold_text};
  }
  return std::nullopt;
}

preference_side fabricate_negative(const question_instance& q, std::uint64_t seed) {
  int p = q.meta.answer_precision;
  std::string gold_text = q.gold.text(p);

  if (q.meta.has_naive && q.gold.k != answer::kind::lack_condition) {
    answer naive;
    bool differs = false;
    if (q.gold.k == answer::kind::yes_no) {
      naive.k = answer::kind::yes_no;
      naive.yes = q.meta.naive_value > 0.0;
      differs = naive.yes != q.gold.yes;
    } else if (q.gold.k == answer::kind::numeric) {
      naive.k = answer::kind::numeric;
      naive.value = round_to(q.meta.naive_value, p);
      differs = naive.value != q.gold.value;
    } else {
      naive.k = answer::kind::bounds;
      naive.lower = round_to(q.meta.naive_value, p);
      naive.upper = round_to(q.meta.naive_upper, p);
      differs = naive.lower != q.gold.lower || naive.upper != q.gold.upper;
    }
    if (differs) {
      const labeled_dag& g = q.meta.model.structure;
      solution_expr naive_solution =
          build_symbolic_solution(g, q.meta.espec, {}, q.amode);
      std::string reasoning =
          "Read the effect directly off the conditional probabilities, without adjusting "
          "for anything: " +
          naive_solution.to_text(naive_solution.root, g.labels) +
          ". That evaluates to about " + format_fixed(q.meta.naive_value, p) +
          ", so the answer is " + naive.text(p) + ".\n";
      return {reasoning, naive.text(p)};
    }
  }

  // verbose trace: correct answer, flagged by the length heuristic
  std::string reference = reference_reasoning(q);
  rng r(derive_seed(seed, 0x6e656761ULL));
  const std::vector<std::string> fillers = {
      "To be thorough, restate the whole derivation once more.",
      "Double-checking the same computation from the top.",
      "Repeating the argument to make sure nothing was missed.",
  };
  std::string reasoning = reference;
  while (static_cast<double>(reasoning.size()) <= 3.2 * static_cast<double>(reference.size()))
    reasoning += r.pick(fillers) + "\n" + reference;
  return {reasoning, gold_text};
}

preference_pair to_preference_pair(const question_instance& q, const preference_side& positive,
                                   const preference_side& negative) {
  preference_pair pair;
  pair.id = q.id;
  pair.prompt = compose_prompt(q);
  pair.chosen = positive;
  pair.rejected = negative;
  if (pair.chosen.answer != q.gold.text(q.meta.answer_precision))
    throw data_error("preference pair for " + q.id + " has a non-gold chosen answer");
  if (pair.rejected.reasoning == pair.chosen.reasoning &&
      pair.rejected.answer == pair.chosen.answer)
    throw data_error("preference pair for " + q.id + " has identical sides");
  return pair;
}

std::vector<kto_record> to_kto_corpus(const std::vector<kto_record>& desirable,
                                      const std::vector<kto_record>& undesirable,
                                      std::uint64_t seed) {
  if (desirable.empty() || undesirable.empty())
    throw data_error("kto corpus needs at least one record per label");
  std::size_t keep = std::min(desirable.size(), undesirable.size());

  auto subsample = [&](const std::vector<kto_record>& side, std::uint64_t salt) {
    std::vector<std::size_t> idx(side.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    rng r(derive_seed(seed, salt));
    r.shuffle(idx);
    idx.resize(keep);
    std::sort(idx.begin(), idx.end());  // keep original corpus order
    std::vector<kto_record> out;
    out.reserve(keep);
    for (std::size_t i : idx) out.push_back(side[i]);
    return out;
  };

  std::vector<kto_record> pos = subsample(desirable, 1);
  std::vector<kto_record> neg = subsample(undesirable, 2);
  std::vector<kto_record> out;
  out.reserve(2 * keep);
  for (std::size_t i = 0; i < keep; ++i) {
    out.push_back(pos[i]);
    out.push_back(neg[i]);
  }
  return out;
}

rl_record to_rl_record(const question_instance& q) {
  rl_record r;
  r.id = q.id;
  r.kind = q.kind;
  r.amode = q.amode;
  r.prompt = compose_prompt(q);
  r.gold_answer = q.gold.text(q.meta.answer_precision);
  return r;
}

reward_breakdown reward(const std::string& response_text, const rl_record& record,
                        const reward_weights& weights) {
  reward_breakdown out;

  parsed_answer gold = parse_final_answer(record.gold_answer, record.amode);
  parsed_answer got = parse_final_answer(response_text, record.amode);
  out.answer_ok = score(record.id, got, gold, record.amode).correct;

  out.json_ok = has_final_answer_object(response_text);

  std::size_t open = response_text.find("<think>");
  std::size_t close = response_text.find("</think>");
  bool single = open != std::string::npos && close != std::string::npos && open < close &&
                response_text.find("<think>", open + 1) == std::string::npos &&
                response_text.find("</think>", close + 1) == std::string::npos;
  if (single) {
    // the final answer must live after the reasoning block
    std::string tail = response_text.substr(close + 8);
    out.think_ok = parse_final_answer(tail, record.amode).k != parsed_answer::kind::none;
  }

  out.total = (out.answer_ok ? weights.answer : 0.0) + (out.think_ok ? weights.think : 0.0) +
              (out.json_ok ? weights.json : 0.0);
  return out;
}

nlohmann::ordered_json sft_to_json(const sft_record& r) {
  nlohmann::ordered_json j;
  j["schema_version"] = k_schema_version;
  j["id"] = r.id;
  j["prompt"] = r.prompt;
  j["reasoning"] = r.reasoning;
  j["answer"] = r.answer;
  return j;
}

nlohmann::ordered_json pair_to_json(const preference_pair& r) {
  nlohmann::ordered_json j;
  j["schema_version"] = k_schema_version;
  j["id"] = r.id;
  j["prompt"] = r.prompt;
  j["chosen"] = {{"reasoning", r.chosen.reasoning}, {"answer", r.chosen.answer}};
  j["rejected"] = {{"reasoning", r.rejected.reasoning}, {"answer", r.rejected.answer}};
  return j;
}

nlohmann::ordered_json kto_to_json(const kto_record& r) {
  nlohmann::ordered_json j;
  j["schema_version"] = k_schema_version;
  j["id"] = r.id;
  j["prompt"] = r.prompt;
  j["completion"] = r.completion;
  j["label"] = to_string(r.label);
  return j;
}

nlohmann::ordered_json rl_to_json(const rl_record& r) {
  nlohmann::ordered_json j;
  j["schema_version"] = k_schema_version;
  j["id"] = r.id;
  j["task"] = to_string(r.kind);
  j["answer_mode"] = to_string(r.amode);
  j["prompt"] = r.prompt;
  j["answer"] = r.gold_answer;
  return j;
}

rl_record rl_from_json(const nlohmann::json& j) {
  check_schema_version(j.at("schema_version").get<std::string>());
  rl_record r;
  r.id = j.at("id").get<std::string>();
  r.kind = task_from_string(j.at("task").get<std::string>());
  r.amode = answer_mode_from_string(j.at("answer_mode").get<std::string>());
  r.prompt = j.at("prompt").get<std::string>();
  r.gold_answer = j.at("answer").get<std::string>();
  return r;
}

}  // namespace gym
