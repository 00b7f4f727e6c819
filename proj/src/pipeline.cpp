#include "gym/pipeline.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <map>

#include "gym/adapt.hpp"
#include "gym/errors.hpp"
#include "gym/kernels.hpp"
#include "gym/random.hpp"
#include "gym/stressors.hpp"

namespace gym {

vocabulary load_vocabulary(const gym_config& cfg) {
  if (cfg.vocabulary_path.empty()) {
    if (cfg.gen.random_weight > 0.0 || cfg.gen.real_weight > 0.0)
      throw config_error("random/real semantics modes need a vocabulary_path");
    return {};
  }
  return vocabulary::load(cfg.vocabulary_path);
}

namespace {

std::string task_slug(task t) {
  std::string s = to_string(t);
  for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

std::string make_id(const std::string& prefix, task t, int index) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%05d", index);
  return prefix + "-" + task_slug(t) + "-" + buf;
}

}  // namespace

corpus_result generate_corpus(const gym_config& cfg, const vocabulary& vocab, int per_task,
                              const std::string& id_prefix, bool require_confounding,
                              const std::vector<task>& tasks) {
  gen_params params = cfg.gen;
  params.id_prefix = id_prefix;
  if (require_confounding) {
    params.require_confounding = true;
    params.no_effect_fraction = 0.0;  // spurious-only pairs have no backdoor story
  }

  std::vector<task> list(std::begin(k_all_tasks), std::end(k_all_tasks));
  if (!tasks.empty()) list = tasks;
  const int total = static_cast<int>(list.size()) * per_task;
  std::vector<question_instance> slots(static_cast<std::size_t>(total));
  std::vector<std::string> slot_errors(static_cast<std::size_t>(total));

  int previous_threads = kernels::thread_count();
  if (cfg.jobs > 0) kernels::set_thread_count(cfg.jobs);
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic)
#endif
  for (int i = 0; i < total; ++i) {
    task t = list[static_cast<std::size_t>(i / per_task)];
    int index = i % per_task;
    // seeded by the task's fixed ordinal so a subset run reproduces the
    // matching instances of a full run
    std::uint64_t task_seed = derive_seed(cfg.seed, static_cast<std::uint64_t>(t));
    try {
      // per-instance engine work stays serial; parallelism lives out here
      slots[static_cast<std::size_t>(i)] = generate_instance(
          params, vocab, t, task_seed, static_cast<std::uint64_t>(index));
    } catch (const std::exception& e) {
      slot_errors[static_cast<std::size_t>(i)] = e.what();
    }
  }
  if (cfg.jobs > 0) kernels::set_thread_count(previous_threads);

  corpus_result out;
  out.instances.reserve(static_cast<std::size_t>(total));
  for (int i = 0; i < total; ++i) {
    auto is = static_cast<std::size_t>(i);
    if (!slot_errors[is].empty()) {
      task t = list[static_cast<std::size_t>(i / per_task)];
      out.errors.push_back(make_id(id_prefix, t, i % per_task) + ": " + slot_errors[is]);
    } else {
      out.instances.push_back(std::move(slots[is]));
    }
  }
  return out;
}

corpus_result make_stress_set(const gym_config& cfg, const vocabulary& vocab,
                              const std::string& kind,
                              const std::vector<question_instance>& base) {
  if (std::find(k_stress_kinds.begin(), k_stress_kinds.end(), kind) == k_stress_kinds.end())
    throw config_error("unknown stress kind: " + kind);

  if (kind == "deconfounding") {
    gym_config fresh = cfg;
    fresh.seed = derive_seed(cfg.seed, fnv1a64(kind));
    // Binary questions in this pool need the naive contrast to flip the
    // answer's sign, and mediation questions only fit under the statement
    // cap with one mediator plus one adjustment variable.  Small dense
    // graphs are the confounder triangles where both happen often enough;
    // the raised retry cap covers the remaining tail.
    fresh.gen.node_min = 4;
    fresh.gen.node_max = 5;
    fresh.gen.edge_density = std::max(0.75, cfg.gen.edge_density);
    fresh.gen.retry_cap = std::max(50000, cfg.gen.retry_cap);
    return generate_corpus(fresh, vocab, cfg.stress_per_task, kind,
                           /*require_confounding=*/true);
  }

  const std::uint64_t tag = fnv1a64(kind);
  const int total = static_cast<int>(base.size());
  std::vector<question_instance> slots(base.size());
  std::vector<std::string> slot_errors(base.size());

  int previous_threads = kernels::thread_count();
  if (cfg.jobs > 0) kernels::set_thread_count(cfg.jobs);
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic)
#endif
  for (int i = 0; i < total; ++i) {
    auto is = static_cast<std::size_t>(i);
    std::uint64_t seed = derive_seed(cfg.seed, tag, static_cast<std::uint64_t>(i));
    try {
      if (kind == "rephrased") {
        auto rewriter = make_rewriter(cfg.rewriter, seed, cfg.llm);
        slots[is] = rephrase(base[is], *rewriter, seed);
      } else if (kind == "omitted") {
        auto rewriter = make_rewriter(cfg.rewriter, seed, cfg.llm);
        slots[is] = omit_instruction(base[is], *rewriter, seed);
      } else if (kind == "redundant") {
        slots[is] = add_redundant(base[is], seed, cfg.redundant_count);
      } else {
        slots[is] = remove_necessary(base[is], seed, cfg.insufficient_count);
      }
    } catch (const std::exception& e) {
      slot_errors[is] = e.what();
    }
  }
  if (cfg.jobs > 0) kernels::set_thread_count(previous_threads);

  corpus_result out;
  std::map<task, int> position;
  for (int i = 0; i < total; ++i) {
    auto is = static_cast<std::size_t>(i);
    if (!slot_errors[is].empty()) {
      out.errors.push_back(base[is].id + ": " + slot_errors[is]);
      continue;
    }
    slots[is].id = make_id(kind, slots[is].kind, position[slots[is].kind]++);
    out.instances.push_back(std::move(slots[is]));
  }
  return out;
}

std::vector<question_instance> select_per_task(const std::vector<question_instance>& corpus,
                                               int per_task) {
  std::map<task, int> taken;
  std::vector<question_instance> out;
  for (const question_instance& q : corpus)
    if (taken[q.kind]++ < per_task) out.push_back(q);
  return out;
}

namespace {

nlohmann::json answer_text_as_json(const std::string& text, answer_mode amode) {
  parsed_answer p = parse_final_answer(text, amode);
  switch (p.k) {
    case parsed_answer::kind::yes_no: return p.yes ? "yes" : "no";
    case parsed_answer::kind::numeric: return p.value;
    case parsed_answer::kind::bounds: return nlohmann::json::array({p.lower, p.upper});
    default: return k_lack_condition;
  }
}

std::string completion_text(const std::string& reasoning, const std::string& answer_text,
                            answer_mode amode) {
  nlohmann::ordered_json j;
  j["answer"] = answer_text_as_json(answer_text, amode);
  std::string body = reasoning;
  if (body.empty() || body.back() != '\n') body += "\n";
  return "<think>\n" + body + "</think>\n" + j.dump();
}

}  // namespace

adapt_result make_adapt_records(const gym_config& cfg, const std::string& method,
                                const std::vector<question_instance>& input) {
  adapt_result out;
  out.records.reserve(input.size());

  if (method == "rl") {
    for (const question_instance& q : input) out.records.push_back(rl_to_json(to_rl_record(q)));
    return out;
  }

  if (method == "sft") {
    for (std::size_t i = 0; i < input.size(); ++i) {
      auto reasoner =
          make_rewriter(cfg.rewriter, derive_seed(cfg.seed, fnv1a64(method), i), cfg.llm);
      out.records.push_back(sft_to_json(to_sft(input[i], *reasoner)));
    }
    return out;
  }

  if (method == "dpo" || method == "kto") {
    std::vector<kto_record> desirable, undesirable;
    for (std::size_t i = 0; i < input.size(); ++i) {
      const question_instance& q = input[i];
      std::uint64_t seed = derive_seed(cfg.seed, fnv1a64(method), i);
      preference_side positive{reference_reasoning(q),
                               q.gold.text(q.meta.answer_precision)};
      preference_side negative = fabricate_negative(q, seed);
      if (method == "dpo") {
        try {
          out.records.push_back(pair_to_json(to_preference_pair(q, positive, negative)));
        } catch (const data_error& e) {
          out.errors.push_back(q.id + ": " + e.what());
        }
      } else {
        desirable.push_back(
            {q.id, compose_prompt(q),
             completion_text(positive.reasoning, positive.answer, q.amode),
             kto_label::desirable});
        undesirable.push_back(
            {q.id, compose_prompt(q),
             completion_text(negative.reasoning, negative.answer, q.amode),
             kto_label::undesirable});
      }
    }
    if (method == "kto") {
      for (const kto_record& r :
           to_kto_corpus(desirable, undesirable, derive_seed(cfg.seed, fnv1a64(method))))
        out.records.push_back(kto_to_json(r));
    }
    return out;
  }

  throw config_error("unknown adapt method: " + method);
}

written_corpus write_corpus(const gym_config& cfg, const std::string& command,
                            const std::string& name,
                            const std::vector<question_instance>& instances) {
  std::vector<nlohmann::ordered_json> records;
  records.reserve(instances.size());
  std::map<std::string, int> counts;
  for (const question_instance& q : instances) {
    records.push_back(instance_to_json(q));
    ++counts[to_string(q.kind)];
  }

  written_corpus w;
  w.records = static_cast<int>(records.size());
  w.corpus_path = cfg.out_dir + "/" + name + ".jsonl";
  w.manifest_path = cfg.out_dir + "/" + name + ".manifest.json";
  write_jsonl(w.corpus_path, records);

  manifest m = make_manifest(command, cfg);
  for (const auto& [bucket, n] : counts) m.counts.emplace_back(bucket, n);
  m.counts.emplace_back("total", w.records);
  m.files.push_back(name + ".jsonl");
  atomic_write_text(w.manifest_path, m.to_json().dump(2) + "\n");
  return w;
}

std::vector<question_instance> read_corpus(const std::string& path) {
  std::vector<question_instance> out;
  for (const nlohmann::json& j : read_jsonl(path)) out.push_back(instance_from_json(j));
  return out;
}

nlohmann::ordered_json corpus_stats(const std::vector<question_instance>& corpus) {
  nlohmann::ordered_json j;
  j["instances"] = corpus.size();

  std::map<std::string, int> per_task, per_mode, per_variant, per_answer;
  std::size_t statement_sum = 0, statement_max = 0;
  std::size_t node_sum = 0, node_max = 0;
  for (const question_instance& q : corpus) {
    ++per_task[to_string(q.kind)];
    ++per_mode[to_string(q.mode)];
    ++per_variant[q.variant];
    ++per_answer[q.gold.text(q.meta.answer_precision)];
    statement_sum += q.given_info.size();
    statement_max = std::max(statement_max, q.given_info.size());
    std::size_t n = static_cast<std::size_t>(q.meta.model.node_count());
    node_sum += n;
    node_max = std::max(node_max, n);
  }
  auto to_object = [](const std::map<std::string, int>& m) {
    nlohmann::ordered_json o;
    for (const auto& [k, v] : m) o[k] = v;
    return o;
  };
  j["per_task"] = to_object(per_task);
  j["per_mode"] = to_object(per_mode);
  j["per_variant"] = to_object(per_variant);
  j["statements"] = {
      {"mean", corpus.empty() ? 0.0
                              : static_cast<double>(statement_sum) /
                                    static_cast<double>(corpus.size())},
      {"max", statement_max}};
  j["nodes"] = {{"mean", corpus.empty() ? 0.0
                                        : static_cast<double>(node_sum) /
                                              static_cast<double>(corpus.size())},
                {"max", node_max}};

  // answers: bucket yes/no/LACK_CONDITION, collapse the numeric long tail
  nlohmann::ordered_json answers;
  int other = 0;
  for (const auto& [text, n] : per_answer) {
    if (text == "yes" || text == "no" || text == k_lack_condition)
      answers[text] = n;
    else
      other += n;
  }
  if (other) answers["numeric_or_bounds"] = other;
  j["answers"] = answers;
  return j;
}

}  // namespace gym
