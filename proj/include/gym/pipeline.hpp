#pragma once

#include <string>
#include <vector>

#include "gym/config.hpp"
#include "gym/questions.hpp"

#include "json.hpp"

namespace gym {

inline const std::vector<std::string> k_stress_kinds = {
    "rephrased", "omitted", "deconfounding", "redundant", "insufficient"};

struct corpus_result {
  std::vector<question_instance> instances;  // task-major, then by index
  std::vector<std::string> errors;           // one entry per failed slot
};

// loads cfg.vocabulary_path; an empty path yields an empty vocabulary (only
// valid when the mode mix is fake-only)
vocabulary load_vocabulary(const gym_config& cfg);

// per_task instances for each listed task (empty = all seven), generated in
// parallel with per-(task, index) seeds; output order never depends on thread
// count, and a task subset reproduces the matching slice of a full run
corpus_result generate_corpus(const gym_config& cfg, const vocabulary& vocab, int per_task,
                              const std::string& id_prefix, bool require_confounding,
                              const std::vector<task>& tasks = {});

// One stress variant. deconfounding generates a fresh constrained pool and
// ignores `base`; the other kinds transform `base` one-to-one.
corpus_result make_stress_set(const gym_config& cfg, const vocabulary& vocab,
                              const std::string& kind,
                              const std::vector<question_instance>& base);

struct adapt_result {
  std::vector<nlohmann::ordered_json> records;
  std::vector<std::string> errors;
};

// first per_task instances of each task, in corpus order
std::vector<question_instance> select_per_task(const std::vector<question_instance>& corpus,
                                               int per_task);

// method: sft | dpo | kto | rl
adapt_result make_adapt_records(const gym_config& cfg, const std::string& method,
                                const std::vector<question_instance>& input);

struct written_corpus {
  std::string corpus_path;
  std::string manifest_path;
  int records = 0;
};

written_corpus write_corpus(const gym_config& cfg, const std::string& command,
                            const std::string& name,
                            const std::vector<question_instance>& instances);

std::vector<question_instance> read_corpus(const std::string& path);

nlohmann::ordered_json corpus_stats(const std::vector<question_instance>& corpus);

}  // namespace gym
