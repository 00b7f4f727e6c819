#include "gym/grade.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <optional>
#include <regex>

#include "gym/errors.hpp"

namespace gym {

const char* to_string(failure_kind f) {
  switch (f) {
    case failure_kind::none: return "none";
    case failure_kind::parse: return "parse";
    case failure_kind::wrong: return "wrong";
    case failure_kind::missing_lack_condition: return "missing_lack_condition";
    case failure_kind::spurious_lack_condition: return "spurious_lack_condition";
  }
  return "none";
}

namespace {

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::string fold(const std::string& s) {
  std::string out = s;
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

// last balanced {...} (string-aware) that parses and carries an "answer" key
std::optional<nlohmann::json> last_answer_object(const std::string& text) {
  std::optional<nlohmann::json> found;
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (text[i] != '{') continue;
    int depth = 0;
    bool in_string = false, escaped = false;
    std::size_t j = i;
    for (; j < text.size(); ++j) {
      char c = text[j];
      if (in_string) {
        if (escaped)
          escaped = false;
        else if (c == '\\')
          escaped = true;
        else if (c == '"')
          in_string = false;
        continue;
      }
      if (c == '"') in_string = true;
      else if (c == '{') ++depth;
      else if (c == '}') {
        if (--depth == 0) break;
      }
    }
    if (j >= text.size()) continue;
    nlohmann::json candidate =
        nlohmann::json::parse(text.substr(i, j - i + 1), nullptr, false);
    if (!candidate.is_discarded() && candidate.is_object() && candidate.contains("answer"))
      found = std::move(candidate);
  }
  return found;
}

const std::regex k_decimal(R"(-?\d+(?:\.\d+)?)");
const std::regex k_bound_pair(R"(\[\s*(-?\d+(?:\.\d+)?)\s*,\s*(-?\d+(?:\.\d+)?)\s*\])");
const std::regex k_yes_no(R"(\b([Yy][Ee][Ss]|[Nn][Oo])\b)");

std::optional<parsed_answer> parse_bounds_text(const std::string& s) {
  std::optional<parsed_answer> out;
  for (auto it = std::sregex_iterator(s.begin(), s.end(), k_bound_pair);
       it != std::sregex_iterator(); ++it) {
    parsed_answer p;
    p.k = parsed_answer::kind::bounds;
    p.lower = std::stod((*it)[1].str());
    p.upper = std::stod((*it)[2].str());
    out = p;  // keep the last match
  }
  return out;
}

parsed_answer from_answer_value(const nlohmann::json& v, answer_mode amode) {
  parsed_answer p;
  if (v.is_string()) {
    std::string s = trim(v.get<std::string>());
    if (fold(s) == fold(k_lack_condition)) {
      p.k = parsed_answer::kind::lack_condition;
      return p;
    }
    std::string f = fold(s);
    if (f == "yes" || f == "no") {
      p.k = parsed_answer::kind::yes_no;
      p.yes = f == "yes";
      return p;
    }
    if (amode == answer_mode::bounds) {
      if (auto b = parse_bounds_text(s)) return *b;
    }
    std::smatch m;
    if (std::regex_match(s, m, k_decimal)) {
      p.k = parsed_answer::kind::numeric;
      p.value = std::stod(s);
    }
    return p;
  }
  if (v.is_boolean()) {
    p.k = parsed_answer::kind::yes_no;
    p.yes = v.get<bool>();
    return p;
  }
  if (v.is_number()) {
    p.k = parsed_answer::kind::numeric;
    p.value = v.get<double>();
    return p;
  }
  if (v.is_array() && v.size() == 2 && v[0].is_number() && v[1].is_number()) {
    p.k = parsed_answer::kind::bounds;
    p.lower = v[0].get<double>();
    p.upper = v[1].get<double>();
    return p;
  }
  return p;
}

std::vector<std::string> split_lines(const std::string& text) {
  std::vector<std::string> lines;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string::npos) {
      lines.push_back(text.substr(start));
      break;
    }
    lines.push_back(text.substr(start, end - start));
    start = end + 1;
  }
  return lines;
}

parsed_answer parse_line(const std::string& line, answer_mode amode) {
  parsed_answer p;
  if (line.find(k_lack_condition) != std::string::npos) {
    p.k = parsed_answer::kind::lack_condition;
    return p;
  }
  switch (amode) {
    case answer_mode::binary: {
      std::string last;
      for (auto it = std::sregex_iterator(line.begin(), line.end(), k_yes_no);
           it != std::sregex_iterator(); ++it)
        last = it->str();
      if (!last.empty()) {
        p.k = parsed_answer::kind::yes_no;
        p.yes = fold(last) == "yes";
      }
      break;
    }
    case answer_mode::numeric: {
      std::string last;
      for (auto it = std::sregex_iterator(line.begin(), line.end(), k_decimal);
           it != std::sregex_iterator(); ++it)
        last = it->str();
      if (!last.empty()) {
        p.k = parsed_answer::kind::numeric;
        p.value = std::stod(last);
      }
      break;
    }
    case answer_mode::bounds: {
      if (auto b = parse_bounds_text(line)) p = *b;
      break;
    }
  }
  return p;
}

}  // namespace

bool has_final_answer_object(const std::string& text) {
  return last_answer_object(text).has_value();
}

parsed_answer parse_final_answer(const std::string& text, answer_mode amode) {
  if (auto obj = last_answer_object(text)) return from_answer_value((*obj)["answer"], amode);
  std::vector<std::string> lines = split_lines(text);
  for (auto it = lines.rbegin(); it != lines.rend(); ++it) {
    if (trim(*it).empty()) continue;
    parsed_answer p = parse_line(*it, amode);
    if (p.k != parsed_answer::kind::none) return p;
  }
  return {};
}

grade_result score(const std::string& instance_id, const parsed_answer& parsed,
                   const parsed_answer& gold, answer_mode amode, double tolerance) {
  grade_result r;
  r.instance_id = instance_id;
  r.parsed = parsed;

  if (gold.k == parsed_answer::kind::lack_condition) {
    if (parsed.k == parsed_answer::kind::none) {
      r.failure = failure_kind::parse;
    } else if (parsed.k == parsed_answer::kind::lack_condition) {
      r.correct = true;
      r.failure = failure_kind::none;
    } else {
      r.failure = failure_kind::missing_lack_condition;
    }
    return r;
  }
  if (parsed.k == parsed_answer::kind::none) {
    r.failure = failure_kind::parse;
    return r;
  }
  if (parsed.k == parsed_answer::kind::lack_condition) {
    r.failure = failure_kind::spurious_lack_condition;
    return r;
  }
  if (parsed.k != gold.k) {
    r.failure = failure_kind::wrong;
    return r;
  }
  bool match = false;
  switch (gold.k) {
    case parsed_answer::kind::yes_no: match = parsed.yes == gold.yes; break;
    case parsed_answer::kind::numeric:
      match = std::abs(parsed.value - gold.value) <= tolerance;
      break;
    case parsed_answer::kind::bounds:
      match = std::abs(parsed.lower - gold.lower) <= tolerance &&
              std::abs(parsed.upper - gold.upper) <= tolerance;
      break;
    default: break;
  }
  r.correct = match;
  r.failure = match ? failure_kind::none : failure_kind::wrong;
  (void)amode;
  return r;
}

grade_result grade_response(const std::string& instance_id, const std::string& response_text,
                            const std::string& gold_text, answer_mode amode,
                            double tolerance) {
  parsed_answer gold = parse_final_answer(gold_text, amode);
  if (gold.k == parsed_answer::kind::none)
    throw data_error("gold answer for " + instance_id + " is not parseable: " + gold_text);
  parsed_answer got = parse_final_answer(response_text, amode);
  return score(instance_id, got, gold, amode, tolerance);
}

grade_report aggregate(const std::vector<run_results>& runs,
                       const std::unordered_map<std::string, task>& id_to_task) {
  grade_report rep;
  std::string orphans;
  std::array<std::array<int, 7>, 2> pooled{};  // [correct/total][task]

  for (const run_results& run : runs) {
    std::array<int, 7> correct{}, total{};
    for (const grade_result& r : run.results) {
      auto it = id_to_task.find(r.instance_id);
      if (it == id_to_task.end()) {
        if (!orphans.empty()) orphans += ", ";
        orphans += r.instance_id;
        continue;
      }
      int t = static_cast<int>(it->second);
      ++total[static_cast<std::size_t>(t)];
      if (r.correct) ++correct[static_cast<std::size_t>(t)];
      ++rep.failure_counts[static_cast<std::size_t>(r.failure)];
    }
    std::array<double, 7> acc{};
    double avg = 0.0;
    for (int t = 0; t < 7; ++t) {
      auto ts = static_cast<std::size_t>(t);
      acc[ts] = total[ts] ? static_cast<double>(correct[ts]) / total[ts] : 0.0;
      avg += acc[ts];
      pooled[0][ts] += correct[ts];
      pooled[1][ts] += total[ts];
    }
    rep.run_names.push_back(run.name);
    rep.run_task_accuracy.push_back(acc);
    rep.run_average.push_back(avg / 7.0);
  }
  if (!orphans.empty())
    throw data_error("responses reference unknown instance ids: " + orphans);

  for (int t = 0; t < 7; ++t) {
    auto ts = static_cast<std::size_t>(t);
    rep.task_correct[ts] = pooled[0][ts];
    rep.task_total[ts] = pooled[1][ts];
    double sum = 0.0;
    int counted = 0;
    for (std::size_t run = 0; run < rep.run_names.size(); ++run) {
      // only runs that scored this task contribute to its column mean
      bool scored = false;
      for (const grade_result& r : runs[run].results) {
        auto it = id_to_task.find(r.instance_id);
        if (it != id_to_task.end() && static_cast<int>(it->second) == t) {
          scored = true;
          break;
        }
      }
      if (scored) {
        sum += rep.run_task_accuracy[run][ts];
        ++counted;
      }
    }
    rep.task_accuracy[ts] = counted ? sum / counted : 0.0;
    rep.average += rep.task_accuracy[ts];
  }
  rep.average /= 7.0;
  return rep;
}

std::string render_report(const grade_report& rep) {
  auto cell = [](double v) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%7.3f", v);
    return std::string(buf);
  };
  std::string out = "Run            ";
  for (task t : k_all_tasks) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%7s", to_string(t));
    out += buf;
  }
  out += "    Avg\n";
  for (std::size_t run = 0; run < rep.run_names.size(); ++run) {
    char name[32];
    std::snprintf(name, sizeof(name), "%-15s", rep.run_names[run].substr(0, 15).c_str());
    out += name;
    for (double v : rep.run_task_accuracy[run]) out += cell(v);
    out += cell(rep.run_average[run]);
    out += "\n";
  }
  if (rep.run_names.size() > 1) {
    out += "Mean           ";
    for (double v : rep.task_accuracy) out += cell(v);
    out += cell(rep.average);
    out += "\n";
  }
  return out;
}

nlohmann::ordered_json report_to_json(const grade_report& rep) {
  nlohmann::ordered_json j;
  j["schema_version"] = k_schema_version;
  nlohmann::ordered_json runs = nlohmann::ordered_json::array();
  for (std::size_t run = 0; run < rep.run_names.size(); ++run) {
    nlohmann::ordered_json jr;
    jr["name"] = rep.run_names[run];
    nlohmann::ordered_json acc;
    for (int t = 0; t < 7; ++t)
      acc[to_string(k_all_tasks[static_cast<std::size_t>(t)])] =
          rep.run_task_accuracy[run][static_cast<std::size_t>(t)];
    jr["accuracy"] = acc;
    jr["average"] = rep.run_average[run];
    runs.push_back(jr);
  }
  j["runs"] = runs;
  nlohmann::ordered_json acc;
  for (int t = 0; t < 7; ++t)
    acc[to_string(k_all_tasks[static_cast<std::size_t>(t)])] =
        rep.task_accuracy[static_cast<std::size_t>(t)];
  j["accuracy"] = acc;
  j["average"] = rep.average;
  nlohmann::ordered_json totals;
  for (int t = 0; t < 7; ++t) {
    auto ts = static_cast<std::size_t>(t);
    totals[to_string(k_all_tasks[ts])] = {{"correct", rep.task_correct[ts]},
                                          {"total", rep.task_total[ts]}};
  }
  j["counts"] = totals;
  nlohmann::ordered_json failures;
  const failure_kind kinds[] = {failure_kind::none, failure_kind::parse, failure_kind::wrong,
                                failure_kind::missing_lack_condition,
                                failure_kind::spurious_lack_condition};
  for (failure_kind f : kinds)
    failures[to_string(f)] = rep.failure_counts[static_cast<std::size_t>(f)];
  j["failures"] = failures;
  return j;
}

}  // namespace gym
