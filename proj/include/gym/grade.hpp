#pragma once

#include <array>
#include <string>
#include <unordered_map>
#include <vector>

#include "gym/questions.hpp"

#include "json.hpp"

namespace gym {

enum class failure_kind { none, parse, wrong, missing_lack_condition, spurious_lack_condition };
const char* to_string(failure_kind f);

struct parsed_answer {
  enum class kind { none, yes_no, numeric, bounds, lack_condition };
  kind k = kind::none;
  bool yes = false;
  double value = 0.0;
  double lower = 0.0, upper = 0.0;

  friend bool operator==(const parsed_answer&, const parsed_answer&) = default;
};

// Extraction order: (1) last well-formed JSON object with an "answer" field,
// (2) last line matching a mode pattern (LACK_CONDITION literal, yes/no
// token, decimal, "[lo, up]" pair). Returns kind::none when nothing matches.
parsed_answer parse_final_answer(const std::string& text, answer_mode amode);

// whether extraction stage (1) would succeed (format-reward check)
bool has_final_answer_object(const std::string& text);

struct grade_result {
  std::string instance_id;
  parsed_answer parsed;
  bool correct = false;
  failure_kind failure = failure_kind::parse;
};

// Exact match after normalization; `tolerance` loosens numeric/bounds
// comparison (default strict). Lack-condition golds are correct only on a
// parsed lack-condition marker.
grade_result score(const std::string& instance_id, const parsed_answer& parsed,
                   const parsed_answer& gold, answer_mode amode, double tolerance = 0.0);

grade_result grade_response(const std::string& instance_id, const std::string& response_text,
                            const std::string& gold_text, answer_mode amode,
                            double tolerance = 0.0);

struct run_results {
  std::string name;
  std::vector<grade_result> results;
};

// Accuracy columns follow the seven-task order of k_all_tasks plus a macro
// average; multi-run input reports per-run rows and their mean.
struct grade_report {
  std::vector<std::string> run_names;
  std::vector<std::array<double, 7>> run_task_accuracy;
  std::vector<double> run_average;
  std::array<double, 7> task_accuracy{};  // mean over runs that scored the task
  double average = 0.0;                   // mean of the seven columns
  std::array<int, 7> task_total{};        // pooled over runs
  std::array<int, 7> task_correct{};
  std::array<int, 5> failure_counts{};    // indexed by failure_kind
};

// Joins every result to its task; unknown ids raise data_error listing them.
grade_report aggregate(const std::vector<run_results>& runs,
                       const std::unordered_map<std::string, task>& id_to_task);

std::string render_report(const grade_report& report);
nlohmann::ordered_json report_to_json(const grade_report& report);

}  // namespace gym
