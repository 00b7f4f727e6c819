#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gym/adapt.hpp"
#include "gym/questions.hpp"
#include "gym/stressors.hpp"

#include "json.hpp"

namespace gym {

// Flat typed key=value configuration ('#' comments, blank lines ignored).
// Unknown keys are rejected; GYM_LLM_URL / GYM_LLM_KEY environment variables
// override only the LLM endpoint settings.
struct gym_config {
  std::uint64_t seed = 7;
  gen_params gen;

  int train_per_task = 2500;
  int stress_per_task = 100;
  int adapt_per_task = 500;

  std::string vocabulary_path = "data/vocabulary.tsv";

  std::string rewriter = "rule";  // identity | rule | llm
  int redundant_count = 2;
  int insufficient_count = 2;

  reward_weights rewards;
  double negative_length_multiple = 3.0;

  llm_settings llm;  // key comes from the environment only

  std::string out_dir = "out";
  int jobs = 0;  // 0 = library default

  static gym_config parse(const std::string& text);
  static gym_config load(const std::string& path);

  // pull GYM_LLM_URL / GYM_LLM_KEY into the llm settings
  void apply_env();
  void validate() const;

  // every key=value pair in a fixed order; hashing this pins a corpus
  std::string canonical_text() const;
};

std::uint64_t fnv1a64(const std::string& text);
std::string hex64(std::uint64_t v);

// --- file plumbing ---

std::string read_text_file(const std::string& path);
// temp file + rename so readers never observe partial writes
void atomic_write_text(const std::string& path, const std::string& content);
void write_jsonl(const std::string& path, const std::vector<nlohmann::ordered_json>& records);
std::vector<nlohmann::json> read_jsonl(const std::string& path);

// --- manifest ---

struct manifest {
  std::string command;          // generate | stress-<kind> | adapt-<method>
  std::uint64_t seed = 0;
  std::string config_hash;      // hex of fnv1a64(canonical config text)
  std::string config_text;      // embedded so a corpus is regenerable from it
  std::vector<std::pair<std::string, int>> counts;  // bucket -> records
  std::vector<std::string> files;

  nlohmann::ordered_json to_json() const;
  static manifest from_json(const nlohmann::json& j);
};

manifest make_manifest(const std::string& command, const gym_config& cfg);

}  // namespace gym
