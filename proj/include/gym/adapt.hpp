#pragma once

#include <optional>
#include <string>
#include <vector>

#include "gym/grade.hpp"
#include "gym/questions.hpp"
#include "gym/stressors.hpp"

#include "json.hpp"

namespace gym {

struct sft_record {
  std::string id;
  std::string prompt;
  std::string reasoning;
  std::string answer;
  bool polished_fallback = false;  // reasoner output rejected, template prose used
};

struct preference_side {
  std::string reasoning;
  std::string answer;
};

struct preference_pair {
  std::string id;
  std::string prompt;
  preference_side chosen;
  preference_side rejected;
};

enum class kto_label { desirable, undesirable };
const char* to_string(kto_label l);

struct kto_record {
  std::string id;
  std::string prompt;
  std::string completion;
  kto_label label = kto_label::desirable;
};

struct rl_record {
  std::string id;
  task kind = task::ate;
  answer_mode amode = answer_mode::binary;
  std::string prompt;
  std::string gold_answer;  // canonical answer text; no reasoning anywhere
};

// Narration of the solution steps with the evaluated value(s) substituted;
// ends by stating the answer.
std::string reference_reasoning(const question_instance& q);

// {"answer": ...} line in the shape the instruction asks for
std::string answer_json_line(const answer& a, int precision);

// "<think>...</think>" reasoning block followed by the JSON answer line
std::string gold_response(const question_instance& q);

// Polishes the reference reasoning through the port; rejects rewrites that
// change any numeral or state a different final answer (retries, then
// template prose + flag).
sft_record to_sft(const question_instance& q, rewriter_port& reasoner, int retries = 3);

struct negative_params {
  double length_multiple = 3.0;  // verbose threshold vs reference reasoning
};

// First candidate with a wrong final answer; else the first flagged by the
// quality heuristics (too long, missing a given value, derivation order
// disagreeing with the statement order); else nullopt.
std::optional<preference_side> mine_negative(const question_instance& q,
                                             const std::vector<std::string>& candidate_traces,
                                             const negative_params& np = {});

// Deterministic negative when no candidate traces exist: the unadjusted
// estimate when it disagrees with gold, otherwise a verbose trace flagged by
// the same heuristics mine_negative applies.
preference_side fabricate_negative(const question_instance& q, std::uint64_t seed);

preference_pair to_preference_pair(const question_instance& q, const preference_side& positive,
                                   const preference_side& negative);

// Balances to an exact 1:1 label ratio by seeded subsampling of the larger
// side, then interleaves the sides.
std::vector<kto_record> to_kto_corpus(const std::vector<kto_record>& desirable,
                                      const std::vector<kto_record>& undesirable,
                                      std::uint64_t seed);

rl_record to_rl_record(const question_instance& q);

struct reward_weights {
  double answer = 1.0;
  double think = 0.1;
  double json = 0.1;
};

struct reward_breakdown {
  bool answer_ok = false;
  bool think_ok = false;
  bool json_ok = false;
  double total = 0.0;
};

// answer: parsed final answer matches gold; think: exactly one
// <think>...</think> block with the final answer after it; json: a
// well-formed {"answer": ...} object is present.
reward_breakdown reward(const std::string& response_text, const rl_record& record,
                        const reward_weights& weights = {});

nlohmann::ordered_json sft_to_json(const sft_record& r);
nlohmann::ordered_json pair_to_json(const preference_pair& r);
nlohmann::ordered_json kto_to_json(const kto_record& r);
nlohmann::ordered_json rl_to_json(const rl_record& r);
rl_record rl_from_json(const nlohmann::json& j);

}  // namespace gym
