#include "gym/config.hpp"

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "gym/errors.hpp"

namespace gym {

namespace {

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

// key registry: one parse function and one printer per key keeps the file
// format, validation, and the canonical dump in lockstep
struct key_binding {
  std::function<void(gym_config&, const std::string&)> parse;
  std::function<std::string(const gym_config&)> print;
};

std::uint64_t parse_u64(const std::string& value) {
  try {
    // stoull wraps negative input around instead of rejecting it
    if (value.empty() || value[0] == '-') throw std::invalid_argument(value);
    std::size_t used = 0;
    unsigned long long v = std::stoull(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw config_error("needs an unsigned integer, got '" + value + "'");
  }
}

long long parse_int(const std::string& value) {
  try {
    std::size_t used = 0;
    long long v = std::stoll(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw config_error("needs an integer, got '" + value + "'");
  }
}

double parse_double(const std::string& value) {
  try {
    std::size_t used = 0;
    double v = std::stod(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw config_error("needs a number, got '" + value + "'");
  }
}

std::string print_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%g", v);
  return buf;
}

const std::map<std::string, key_binding>& key_registry() {
  auto u64 = [](std::uint64_t gym_config::* field) {
    return key_binding{
        [field](gym_config& c, const std::string& v) { c.*field = parse_u64(v); },
        [field](const gym_config& c) { return std::to_string(c.*field); }};
  };
  auto int_at = [](std::function<int&(gym_config&)> ref) {
    return key_binding{[ref](gym_config& c, const std::string& v) {
                         ref(c) = static_cast<int>(parse_int(v));
                       },
                       [ref](const gym_config& c) {
                         return std::to_string(ref(const_cast<gym_config&>(c)));
                       }};
  };
  auto dbl_at = [](std::function<double&(gym_config&)> ref) {
    return key_binding{[ref](gym_config& c, const std::string& v) { ref(c) = parse_double(v); },
                       [ref](const gym_config& c) {
                         return print_double(ref(const_cast<gym_config&>(c)));
                       }};
  };
  auto str_at = [](std::function<std::string&(gym_config&)> ref) {
    return key_binding{[ref](gym_config& c, const std::string& v) { ref(c) = v; },
                       [ref](const gym_config& c) { return ref(const_cast<gym_config&>(c)); }};
  };

  static const std::map<std::string, key_binding> registry = {
      {"seed", u64(&gym_config::seed)},
      {"node_min", int_at([](gym_config& c) -> int& { return c.gen.node_min; })},
      {"node_max", int_at([](gym_config& c) -> int& { return c.gen.node_max; })},
      {"edge_density", dbl_at([](gym_config& c) -> double& { return c.gen.edge_density; })},
      {"max_in_degree", int_at([](gym_config& c) -> int& { return c.gen.max_in_degree; })},
      {"weight_min", dbl_at([](gym_config& c) -> double& { return c.gen.mechanisms.weight_min; })},
      {"weight_max", dbl_at([](gym_config& c) -> double& { return c.gen.mechanisms.weight_max; })},
      {"bias_min", dbl_at([](gym_config& c) -> double& { return c.gen.mechanisms.bias_min; })},
      {"bias_max", dbl_at([](gym_config& c) -> double& { return c.gen.mechanisms.bias_max; })},
      {"render_precision",
       int_at([](gym_config& c) -> int& { return c.gen.render_precision; })},
      {"answer_precision",
       int_at([](gym_config& c) -> int& { return c.gen.answer_precision; })},
      {"sign_margin", dbl_at([](gym_config& c) -> double& { return c.gen.sign_margin; })},
      {"max_statements", int_at([](gym_config& c) -> int& { return c.gen.max_statements; })},
      {"fake_weight", dbl_at([](gym_config& c) -> double& { return c.gen.fake_weight; })},
      {"random_weight", dbl_at([](gym_config& c) -> double& { return c.gen.random_weight; })},
      {"real_weight", dbl_at([](gym_config& c) -> double& { return c.gen.real_weight; })},
      {"effect_answer_mode",
       {[](gym_config& c, const std::string& v) {
          c.gen.effect_answer_mode = answer_mode_from_string(v);
        },
        [](const gym_config& c) { return std::string(to_string(c.gen.effect_answer_mode)); }}},
      {"no_effect_fraction",
       dbl_at([](gym_config& c) -> double& { return c.gen.no_effect_fraction; })},
      {"retry_cap", int_at([](gym_config& c) -> int& { return c.gen.retry_cap; })},
      {"exact_budget",
       {[](gym_config& c, const std::string& v) { c.gen.exact_budget = parse_u64(v); },
        [](const gym_config& c) { return std::to_string(c.gen.exact_budget); }}},
      {"train_per_task", int_at([](gym_config& c) -> int& { return c.train_per_task; })},
      {"stress_per_task", int_at([](gym_config& c) -> int& { return c.stress_per_task; })},
      {"adapt_per_task", int_at([](gym_config& c) -> int& { return c.adapt_per_task; })},
      {"vocabulary_path",
       str_at([](gym_config& c) -> std::string& { return c.vocabulary_path; })},
      {"rewriter", str_at([](gym_config& c) -> std::string& { return c.rewriter; })},
      {"redundant_count", int_at([](gym_config& c) -> int& { return c.redundant_count; })},
      {"insufficient_count",
       int_at([](gym_config& c) -> int& { return c.insufficient_count; })},
      {"reward_answer", dbl_at([](gym_config& c) -> double& { return c.rewards.answer; })},
      {"reward_think", dbl_at([](gym_config& c) -> double& { return c.rewards.think; })},
      {"reward_json", dbl_at([](gym_config& c) -> double& { return c.rewards.json; })},
      {"negative_length_multiple",
       dbl_at([](gym_config& c) -> double& { return c.negative_length_multiple; })},
      {"llm_url", str_at([](gym_config& c) -> std::string& { return c.llm.url; })},
      {"llm_model", str_at([](gym_config& c) -> std::string& { return c.llm.model; })},
      {"llm_temperature", dbl_at([](gym_config& c) -> double& { return c.llm.temperature; })},
      {"llm_timeout_seconds",
       int_at([](gym_config& c) -> int& { return c.llm.timeout_seconds; })},
      {"out_dir", str_at([](gym_config& c) -> std::string& { return c.out_dir; })},
      {"jobs", int_at([](gym_config& c) -> int& { return c.jobs; })},
  };
  return registry;
}

}  // namespace

gym_config gym_config::parse(const std::string& text) {
  gym_config cfg;
  const auto& registry = key_registry();
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw config_error("line " + std::to_string(line_no) + ": expected key=value, got '" +
                         line + "'");
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    auto it = registry.find(key);
    if (it == registry.end())
      throw config_error("line " + std::to_string(line_no) + ": unknown key '" + key + "'");
    try {
      it->second.parse(cfg, value);
    } catch (const config_error& e) {
      throw config_error("line " + std::to_string(line_no) + ", key " + key + ": " +
                         e.what());
    }
  }
  cfg.validate();
  return cfg;
}

gym_config gym_config::load(const std::string& path) {
  return parse(read_text_file(path));
}

void gym_config::apply_env() {
  if (const char* url = std::getenv("GYM_LLM_URL")) llm.url = url;
  if (const char* key = std::getenv("GYM_LLM_KEY")) llm.key = key;
}

void gym_config::validate() const {
  auto fail = [](const std::string& msg) { throw config_error(msg); };
  if (gen.node_min < 2 || gen.node_max < gen.node_min || gen.node_max > 16)
    fail("node_min/node_max must satisfy 2 <= min <= max <= 16");
  if (gen.edge_density < 0.0 || gen.edge_density > 1.0)
    fail("edge_density must lie in [0, 1]");
  if (gen.max_in_degree < 1) fail("max_in_degree must be at least 1");
  if (gen.mechanisms.weight_min <= 0.0 ||
      gen.mechanisms.weight_max < gen.mechanisms.weight_min)
    fail("weight range must satisfy 0 < min <= max");
  if (gen.mechanisms.bias_max < gen.mechanisms.bias_min) fail("bias range is inverted");
  if (gen.render_precision < 1 || gen.render_precision > 10)
    fail("render_precision must lie in [1, 10]");
  if (gen.answer_precision < 1 || gen.answer_precision > 10)
    fail("answer_precision must lie in [1, 10]");
  if (gen.sign_margin < 0.0 || gen.sign_margin >= 1.0) fail("sign_margin must lie in [0, 1)");
  if (gen.max_statements < 2) fail("max_statements must be at least 2");
  if (gen.fake_weight < 0.0 || gen.random_weight < 0.0 || gen.real_weight < 0.0)
    fail("semantics mode weights must be nonnegative");
  if (gen.fake_weight + gen.random_weight + gen.real_weight <= 0.0)
    fail("semantics mode weights must not all be zero");
  if (gen.no_effect_fraction < 0.0 || gen.no_effect_fraction > 1.0)
    fail("no_effect_fraction must lie in [0, 1]");
  if (gen.retry_cap < 1) fail("retry_cap must be positive");
  if (train_per_task < 1 || stress_per_task < 1 || adapt_per_task < 1)
    fail("per-task counts must be positive");
  if (adapt_per_task > train_per_task)
    fail("adapt_per_task cannot exceed train_per_task");
  if (rewriter != "identity" && rewriter != "rule" && rewriter != "llm")
    fail("rewriter must be identity, rule, or llm");
  if (redundant_count < 1 || insufficient_count < 1)
    fail("stressor statement counts must be positive");
  if (rewards.answer < 0.0 || rewards.think < 0.0 || rewards.json < 0.0)
    fail("reward weights must be nonnegative");
  if (negative_length_multiple <= 1.0) fail("negative_length_multiple must exceed 1");
  if (llm.temperature < 0.0 || llm.temperature > 2.0)
    fail("llm_temperature must lie in [0, 2]");
  if (llm.timeout_seconds < 1) fail("llm_timeout_seconds must be positive");
  if (jobs < 0) fail("jobs must be nonnegative");
}

std::string gym_config::canonical_text() const {
  std::string out;
  for (const auto& [key, binding] : key_registry())
    out += key + "=" + binding.print(*this) + "\n";
  return out;
}

std::uint64_t fnv1a64(const std::string& text) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw data_error("cannot open " + path);
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

void atomic_write_text(const std::string& path, const std::string& content) {
  std::filesystem::path target(path);
  if (target.has_parent_path()) std::filesystem::create_directories(target.parent_path());
  std::filesystem::path temp = target;
  temp += ".tmp";
  {
    std::ofstream out(temp, std::ios::binary | std::ios::trunc);
    if (!out) throw data_error("cannot write " + temp.string());
    out << content;
    out.flush();
    if (!out) throw data_error("write failed for " + temp.string());
  }
  std::filesystem::rename(temp, target);
}

void write_jsonl(const std::string& path,
                 const std::vector<nlohmann::ordered_json>& records) {
  std::string content;
  for (const auto& r : records) {
    content += r.dump();
    content += "\n";
  }
  atomic_write_text(path, content);
}

std::vector<nlohmann::json> read_jsonl(const std::string& path) {
  std::string text = read_text_file(path);
  std::vector<nlohmann::json> out;
  std::size_t start = 0, line_no = 0;
  while (start < text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string::npos) end = text.size();
    ++line_no;
    std::string line = text.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) {
      nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
      if (j.is_discarded())
        throw data_error(path + ":" + std::to_string(line_no) + ": malformed record");
      out.push_back(std::move(j));
    }
    start = end + 1;
  }
  return out;
}

nlohmann::ordered_json manifest::to_json() const {
  nlohmann::ordered_json j;
  j["schema_version"] = k_schema_version;
  j["command"] = command;
  j["seed"] = seed;
  j["config_hash"] = config_hash;
  j["config_text"] = config_text;
  nlohmann::ordered_json jcounts;
  for (const auto& [bucket, n] : counts) jcounts[bucket] = n;
  j["counts"] = jcounts;
  j["files"] = files;
  return j;
}

manifest manifest::from_json(const nlohmann::json& j) {
  check_schema_version(j.at("schema_version").get<std::string>());
  manifest m;
  m.command = j.at("command").get<std::string>();
  m.seed = j.at("seed").get<std::uint64_t>();
  m.config_hash = j.at("config_hash").get<std::string>();
  m.config_text = j.at("config_text").get<std::string>();
  for (const auto& [bucket, n] : j.at("counts").items())
    m.counts.emplace_back(bucket, n.get<int>());
  m.files = j.at("files").get<std::vector<std::string>>();
  return m;
}

manifest make_manifest(const std::string& command, const gym_config& cfg) {
  manifest m;
  m.command = command;
  m.seed = cfg.seed;
  m.config_text = cfg.canonical_text();
  m.config_hash = hex64(fnv1a64(m.config_text));
  return m;
}

}  // namespace gym
