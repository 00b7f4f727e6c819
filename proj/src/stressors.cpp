#include "gym/stressors.hpp"

#include <algorithm>
#include <map>
#include <regex>
#include <utility>

#include "gym/errors.hpp"
#include "gym/random.hpp"

#include "httplib.h"
#include "json.hpp"

namespace gym {

namespace {

// phrase -> replacement; multi-word or sentence-initial only, so entries can
// never collide with a node label or a numeral
const std::vector<std::pair<std::string, std::string>>& phrase_map() {
  static const std::vector<std::pair<std::string, std::string>> map = {
      {"is changed to be", "is set to"},
      {"more likely", "likelier"},
      {"Given that", "Knowing that"},
      {"Suppose", "Assume"},
      {"Conditioned on", "Holding fixed"},
      {"Estimate the", "Work out the"},
      {"using only the probabilities given above", "relying only on the probabilities above"},
      {"Reason step by step", "Think through the steps"},
      {"finish with a JSON object", "end with a JSON object"},
      {"what are the lower and upper bounds", "what are the tightest lower and upper bounds"},
      {"would have been", "would then have been"},
  };
  return map;
}

void replace_all_in(std::string& text, const std::string& from, const std::string& to) {
  std::size_t pos = 0;
  while ((pos = text.find(from, pos)) != std::string::npos) {
    text.replace(pos, from.size(), to);
    pos += to.size();
  }
}

std::string rephrase_system_prompt() {
  return "Rewrite the following text with different surface phrasing. Keep every number "
         "exactly as written, keep every variable name exactly as written, and keep the "
         "meaning unchanged. Reply with the rewritten text only.";
}

}  // namespace

std::string rule_based_rewriter::rewrite(const std::string&, const std::string& content) {
  rng r(derive_seed(seed_, calls_++));
  std::string text = content;

  // "If A, will B?" -> "Will B, if A?" keeps every token intact
  static const std::regex if_will(R"(^If (.+), will (.+)\?$)");
  std::smatch m;
  if (std::regex_match(text, m, if_will) && r.coin())
    text = "Will " + m[2].str() + ", if " + m[1].str() + "?";

  for (const auto& [from, to] : phrase_map())
    if (r.coin(0.7)) replace_all_in(text, from, to);
  return text;
}

std::string llm_rewriter::rewrite(const std::string& system_prompt, const std::string& content) {
  const std::string& url = settings_.url;
  if (url.empty()) throw config_error("llm rewriter needs an endpoint url");
  std::size_t scheme = url.find("://");
  if (scheme == std::string::npos) throw config_error("llm endpoint url needs a scheme");
  std::size_t slash = url.find('/', scheme + 3);
  std::string base = slash == std::string::npos ? url : url.substr(0, slash);
  std::string path = slash == std::string::npos ? "/v1/chat/completions" : url.substr(slash);

  httplib::Client client(base);
  client.set_connection_timeout(settings_.timeout_seconds);
  client.set_read_timeout(settings_.timeout_seconds);
  httplib::Headers headers;
  if (!settings_.key.empty()) headers.emplace("Authorization", "Bearer " + settings_.key);

  nlohmann::json body;
  body["model"] = settings_.model;
  body["temperature"] = settings_.temperature;
  body["messages"] = {{{"role", "system"}, {"content", system_prompt}},
                      {{"role", "user"}, {"content", content}}};

  auto res = client.Post(path, headers, body.dump(), "application/json");
  if (!res) throw data_error("llm rewriter transport failure");
  if (res->status != 200)
    throw data_error("llm rewriter http status " + std::to_string(res->status));
  nlohmann::json reply = nlohmann::json::parse(res->body, nullptr, false);
  if (reply.is_discarded() || !reply.contains("choices") || reply["choices"].empty())
    throw data_error("llm rewriter malformed response");
  const auto& msg = reply["choices"][0];
  if (!msg.contains("message") || !msg["message"].contains("content"))
    throw data_error("llm rewriter response missing content");
  return msg["message"]["content"].get<std::string>();
}

std::unique_ptr<rewriter_port> make_rewriter(const std::string& kind, std::uint64_t seed,
                                             const llm_settings& settings) {
  if (kind == "identity") return std::make_unique<identity_rewriter>();
  if (kind == "rule") return std::make_unique<rule_based_rewriter>(seed);
  if (kind == "llm") return std::make_unique<llm_rewriter>(settings);
  throw config_error("unknown rewriter kind: " + kind);
}

std::vector<std::string> extract_decimals(const std::string& text) {
  static const std::regex number(R"(\d+\.\d+|\d+)");
  std::vector<std::string> out;
  for (auto it = std::sregex_iterator(text.begin(), text.end(), number);
       it != std::sregex_iterator(); ++it)
    out.push_back(it->str());
  return out;
}

bool same_decimal_multiset(const std::string& before, const std::string& after) {
  std::vector<std::string> a = extract_decimals(before);
  std::vector<std::string> b = extract_decimals(after);
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  return a == b;
}

namespace {

std::size_t count_occurrences(const std::string& text, const std::string& needle) {
  if (needle.empty()) return 0;
  std::size_t count = 0, pos = 0;
  while ((pos = text.find(needle, pos)) != std::string::npos) {
    ++count;
    pos += needle.size();
  }
  return count;
}

}  // namespace

bool preserves_labels(const std::string& before, const std::string& after,
                      const std::vector<std::string>& labels) {
  for (const std::string& label : labels)
    if (count_occurrences(before, label) != count_occurrences(after, label)) return false;
  return true;
}

namespace {

std::string instance_prose(const question_instance& q) {
  std::string all;
  for (const auto& s : q.given_info) all += s.text + "\n";
  all += q.instruction + "\n" + q.query;
  return all;
}

std::vector<std::string> used_labels(const question_instance& q) {
  std::vector<int> nodes = {q.meta.espec.treatment, q.meta.espec.outcome};
  for (int m : q.meta.espec.mediator_set) nodes.push_back(m);
  for (const auto& s : q.given_info) {
    for (const auto& [node, value] : s.ref.targets.items()) nodes.push_back(node);
    for (const auto& [node, value] : s.ref.conditions.items()) nodes.push_back(node);
  }
  std::sort(nodes.begin(), nodes.end());
  nodes.erase(std::unique(nodes.begin(), nodes.end()), nodes.end());
  std::vector<std::string> labels;
  for (int n : nodes)
    labels.push_back(q.meta.model.structure.labels[static_cast<std::size_t>(n)]);
  return labels;
}

// Rewrite every prose field; returns false when numerals or labels changed.
bool rewrite_prose(question_instance& q, rewriter_port& rewriter, bool include_instruction) {
  question_instance draft = q;
  const std::string prompt = rephrase_system_prompt();
  for (auto& s : draft.given_info) s.text = rewriter.rewrite(prompt, s.text);
  if (include_instruction && !draft.instruction.empty())
    draft.instruction = rewriter.rewrite(prompt, draft.instruction);
  draft.query = rewriter.rewrite(prompt, draft.query);

  std::string before = instance_prose(q);
  std::string after = instance_prose(draft);
  if (!same_decimal_multiset(before, after)) return false;
  if (!preserves_labels(before, after, used_labels(q))) return false;
  q = std::move(draft);
  return true;
}

// retries the port, then falls back to the seeded rule-based paraphraser
void rewrite_with_fallback(question_instance& q, rewriter_port& rewriter, std::uint64_t seed,
                           int retries, bool include_instruction) {
  for (int i = 0; i < retries; ++i) {
    try {
      if (rewrite_prose(q, rewriter, include_instruction)) return;
    } catch (const data_error&) {
      // transport failure: retriable
    }
  }
  rule_based_rewriter fallback(derive_seed(seed, 0x66616c6cULL));
  if (!rewrite_prose(q, fallback, include_instruction))
    throw std::logic_error("rule-based paraphrase altered protected tokens");
  q.meta.rewriter_fallback = true;
}

}  // namespace

question_instance rephrase(const question_instance& base, rewriter_port& rewriter,
                           std::uint64_t seed, int retries) {
  question_instance q = base;
  q.variant = "rephrased";
  q.meta.source_id = base.id;
  rewrite_with_fallback(q, rewriter, seed, retries, /*include_instruction=*/true);
  return q;
}

question_instance omit_instruction(const question_instance& base, rewriter_port& rewriter,
                                   std::uint64_t seed, int retries) {
  question_instance q = base;
  q.variant = "omitted";
  q.meta.source_id = base.id;
  q.instruction.clear();
  rewrite_with_fallback(q, rewriter, seed, retries, /*include_instruction=*/false);
  return q;
}

question_instance add_redundant(const question_instance& base, std::uint64_t seed, int count) {
  question_instance q = base;
  q.variant = "redundant";
  q.meta.source_id = base.id;

  const labeled_dag& g = q.meta.model.structure;
  int n = g.graph.node_count;
  joint_distribution joint = exact_joint(q.meta.model);

  // candidate refs: marginals and single-condition conditionals over existing
  // nodes, minus anything the solution references
  std::vector<prob_ref> candidates;
  for (int v = 0; v < n; ++v) {
    assignment t;
    t.set(v, 1);
    candidates.push_back({t, {}});
    for (int w = 0; w < n; ++w) {
      if (w == v) continue;
      for (int val : {0, 1}) {
        assignment c;
        c.set(w, val);
        candidates.push_back({t, c});
      }
    }
  }
  const auto& used = q.solution.refs();
  candidates.erase(std::remove_if(candidates.begin(), candidates.end(),
                                  [&](const prob_ref& r) {
                                    return std::find(used.begin(), used.end(), r) != used.end();
                                  }),
                   candidates.end());

  rng r(derive_seed(seed, 0x7265645fULL));
  r.shuffle(candidates);
  if (static_cast<int>(candidates.size()) < count)
    throw generation_error("not enough novel statements for the redundant variant");

  q.meta.added_statements.clear();
  for (int i = 0; i < count; ++i) {
    prob_statement s;
    s.ref = candidates[static_cast<std::size_t>(i)];
    s.value = round_to(query(joint, s.ref.targets, s.ref.conditions), q.meta.render_precision);
    s.text = s.ref.render(g.labels) + " = " + format_fixed(s.value, q.meta.render_precision);
    std::size_t pos = static_cast<std::size_t>(r.below(q.given_info.size() + 1));
    q.given_info.insert(q.given_info.begin() + static_cast<std::ptrdiff_t>(pos),
                        std::move(s));
    // earlier recorded positions shift when we insert before them
    for (int& p : q.meta.added_statements)
      if (p >= static_cast<int>(pos)) ++p;
    q.meta.added_statements.push_back(static_cast<int>(pos));
  }
  std::sort(q.meta.added_statements.begin(), q.meta.added_statements.end());
  return q;
}

question_instance remove_necessary(const question_instance& base, std::uint64_t seed,
                                   int count) {
  if (static_cast<int>(base.given_info.size()) < count)
    throw generation_error("instance has fewer statements than the removal count");
  question_instance q = base;
  q.variant = "insufficient";
  q.meta.source_id = base.id;

  rng r(derive_seed(seed, 0x696e7375ULL));
  std::vector<int> order(q.given_info.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
  r.shuffle(order);
  std::vector<int> doomed(order.begin(), order.begin() + count);
  std::sort(doomed.begin(), doomed.end(), std::greater<int>());

  const auto& refs = q.solution.refs();
  q.meta.removed_refs.clear();
  for (int idx : doomed) {
    const prob_ref& ref = q.given_info[static_cast<std::size_t>(idx)].ref;
    auto it = std::find(refs.begin(), refs.end(), ref);
    if (it != refs.end())
      q.meta.removed_refs.push_back(static_cast<int>(it - refs.begin()));
    q.given_info.erase(q.given_info.begin() + idx);
  }
  std::sort(q.meta.removed_refs.begin(), q.meta.removed_refs.end());

  q.gold = answer{};
  q.gold.k = answer::kind::lack_condition;
  if (!q.instruction.empty()) q.instruction += lack_condition_instruction();
  return q;
}

}  // namespace gym
