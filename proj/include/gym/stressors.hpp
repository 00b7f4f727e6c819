#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "gym/questions.hpp"

namespace gym {

// Text-rewriting capability used for rephrasing and reasoning polish.
// Implementations must keep every numeric literal and every node label
// verbatim; callers validate that post-hoc and fall back when violated.
class rewriter_port {
 public:
  virtual ~rewriter_port() = default;
  virtual std::string rewrite(const std::string& system_prompt, const std::string& content) = 0;
};

class identity_rewriter final : public rewriter_port {
 public:
  std::string rewrite(const std::string&, const std::string& content) override {
    return content;
  }
};

// Deterministic surface paraphraser: seeded choice among clause reordering
// and phrase substitutions that never touch digits or node labels.
class rule_based_rewriter final : public rewriter_port {
 public:
  explicit rule_based_rewriter(std::uint64_t seed) : seed_(seed) {}
  std::string rewrite(const std::string& system_prompt, const std::string& content) override;

 private:
  std::uint64_t seed_;
  std::uint64_t calls_ = 0;
};

struct llm_settings {
  std::string url;    // full endpoint, e.g. http://host:8080/v1/chat/completions
  std::string key;    // bearer token; never persisted
  std::string model = "default";
  double temperature = 0.7;
  int timeout_seconds = 30;
};

// OpenAI-compatible chat-completion client. Throws data_error on transport,
// HTTP, or payload errors; callers treat those as retriable.
class llm_rewriter final : public rewriter_port {
 public:
  explicit llm_rewriter(llm_settings settings) : settings_(std::move(settings)) {}
  std::string rewrite(const std::string& system_prompt, const std::string& content) override;

 private:
  llm_settings settings_;
};

// kind: identity | rule | llm (llm requires settings.url; key read by caller
// from GYM_LLM_KEY)
std::unique_ptr<rewriter_port> make_rewriter(const std::string& kind, std::uint64_t seed,
                                             const llm_settings& settings = {});

// numeric literals in order of appearance ("0.1234", "1", ...)
std::vector<std::string> extract_decimals(const std::string& text);
// equal numeric-literal multisets
bool same_decimal_multiset(const std::string& before, const std::string& after);
// every label occurs exactly as often after as before
bool preserves_labels(const std::string& before, const std::string& after,
                      const std::vector<std::string>& labels);

// Prose rewritten (statements, instruction, query); values, solution, and
// answer unchanged. Validation failure after `retries` rewrites falls back to
// the rule-based paraphraser and flags metadata.
question_instance rephrase(const question_instance& base, rewriter_port& rewriter,
                           std::uint64_t seed, int retries = 3);

// Instruction emptied, query optionally paraphrased; the task stays
// recoverable from metadata only.
question_instance omit_instruction(const question_instance& base, rewriter_port& rewriter,
                                   std::uint64_t seed, int retries = 3);

// Appends `count` true statements whose references the solution never uses,
// at seeded random positions; answer unchanged.
question_instance add_redundant(const question_instance& base, std::uint64_t seed,
                                int count = 2);

// Deletes `count` randomly chosen statements the solution references; the
// gold answer becomes LACK_CONDITION and the instruction points that escape
// hatch out.
question_instance remove_necessary(const question_instance& base, std::uint64_t seed,
                                   int count = 2);

}  // namespace gym
