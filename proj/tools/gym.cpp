#include <cstdint>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "gym/adapt.hpp"
#include "gym/config.hpp"
#include "gym/errors.hpp"
#include "gym/grade.hpp"
#include "gym/pipeline.hpp"
#include "gym/questions.hpp"
#include "gym/random.hpp"

#include "CLI11.hpp"
#include "json.hpp"

namespace {

using namespace gym;

int report_errors(const std::vector<std::string>& errors) {
  for (const std::string& e : errors) std::cerr << "error: " << e << "\n";
  return errors.empty() ? 0 : 1;
}

std::vector<task> parse_task_list(const std::string& csv) {
  std::vector<task> out;
  std::size_t start = 0;
  while (start <= csv.size()) {
    std::size_t comma = csv.find(',', start);
    std::string item = csv.substr(
        start, comma == std::string::npos ? std::string::npos : comma - start);
    if (!item.empty()) out.push_back(task_from_string(item));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

void print_counts(const std::string& label, const std::vector<question_instance>& instances) {
  std::cout << label << ": " << instances.size() << " instances\n";
}

int cmd_generate(gym_config cfg, const std::string& tasks_csv, int count,
                 const std::string& prefix, const std::string& from_manifest) {
  if (!from_manifest.empty()) {
    nlohmann::json j = nlohmann::json::parse(read_text_file(from_manifest));
    manifest m = manifest::from_json(j);
    std::string out_dir = cfg.out_dir;
    cfg = gym_config::parse(m.config_text);
    cfg.apply_env();
    cfg.out_dir = out_dir;  // regenerate elsewhere, content stays identical
  }
  vocabulary vocab = load_vocabulary(cfg);
  int per_task = count > 0 ? count : cfg.train_per_task;
  std::vector<task> tasks = tasks_csv.empty() ? std::vector<task>{} : parse_task_list(tasks_csv);

  corpus_result corpus =
      generate_corpus(cfg, vocab, per_task, prefix, /*require_confounding=*/false, tasks);
  written_corpus w = write_corpus(cfg, "generate", prefix, corpus.instances);
  print_counts(w.corpus_path, corpus.instances);
  return report_errors(corpus.errors);
}

int cmd_stress(const gym_config& cfg, const std::string& kind, const std::string& input) {
  vocabulary vocab = load_vocabulary(cfg);
  std::vector<std::string> kinds =
      kind == "all" ? k_stress_kinds : std::vector<std::string>{kind};

  std::vector<question_instance> base;
  bool need_base = false;
  for (const std::string& k : kinds)
    if (k != "deconfounding") need_base = true;
  std::vector<std::string> errors;
  if (need_base) {
    if (!input.empty()) {
      base = select_per_task(read_corpus(input), cfg.stress_per_task);
    } else {
      gym_config base_cfg = cfg;
      base_cfg.seed = derive_seed(cfg.seed, fnv1a64("stress-base"));
      corpus_result fresh = generate_corpus(base_cfg, vocab, cfg.stress_per_task, "test",
                                            /*require_confounding=*/false);
      errors.insert(errors.end(), fresh.errors.begin(), fresh.errors.end());
      base = std::move(fresh.instances);
      written_corpus wb = write_corpus(base_cfg, "stress-base", "test", base);
      print_counts(wb.corpus_path, base);
    }
  }

  for (const std::string& k : kinds) {
    corpus_result variant = make_stress_set(cfg, vocab, k, base);
    errors.insert(errors.end(), variant.errors.begin(), variant.errors.end());
    written_corpus w = write_corpus(cfg, "stress-" + k, k, variant.instances);
    print_counts(w.corpus_path, variant.instances);
  }
  return report_errors(errors);
}

int cmd_adapt(const gym_config& cfg, const std::string& method, const std::string& input) {
  std::vector<question_instance> corpus = read_corpus(input);
  std::vector<question_instance> subset = select_per_task(corpus, cfg.adapt_per_task);
  adapt_result result = make_adapt_records(cfg, method, subset);

  std::string path = cfg.out_dir + "/" + method + ".jsonl";
  write_jsonl(path, result.records);
  manifest m = make_manifest("adapt-" + method, cfg);
  m.counts.emplace_back("records", static_cast<int>(result.records.size()));
  m.counts.emplace_back("input", static_cast<int>(subset.size()));
  m.files.push_back(method + ".jsonl");
  atomic_write_text(cfg.out_dir + "/" + method + ".manifest.json",
                    m.to_json().dump(2) + "\n");
  std::cout << path << ": " << result.records.size() << " records\n";
  return report_errors(result.errors);
}

int cmd_grade(const gym_config& cfg, const std::string& corpus_path,
              const std::vector<std::string>& response_paths, double tolerance) {
  std::vector<question_instance> corpus = read_corpus(corpus_path);
  std::unordered_map<std::string, task> id_to_task;
  struct gold_entry {
    std::string text;
    answer_mode amode;
  };
  std::unordered_map<std::string, gold_entry> gold;
  for (const question_instance& q : corpus) {
    id_to_task[q.id] = q.kind;
    gold[q.id] = {q.gold.text(q.meta.answer_precision), q.amode};
  }

  std::vector<std::string> errors;
  std::vector<run_results> runs;
  for (const std::string& path : response_paths) {
    run_results run;
    run.name = std::filesystem::path(path).stem().string();
    for (const nlohmann::json& j : read_jsonl(path)) {
      std::string id = j.at("id").get<std::string>();
      std::string response = j.at("response").get<std::string>();
      auto it = gold.find(id);
      if (it == gold.end()) {
        errors.push_back("response file " + path + " references unknown id " + id);
        continue;
      }
      run.results.push_back(
          grade_response(id, response, it->second.text, it->second.amode, tolerance));
    }
    if (run.results.empty())
      errors.push_back("response file " + path + " holds no records");
    runs.push_back(std::move(run));
  }

  grade_report report = aggregate(runs, id_to_task);
  std::string table = render_report(report);
  std::cout << table;
  atomic_write_text(cfg.out_dir + "/report.txt", table);
  atomic_write_text(cfg.out_dir + "/report.json", report_to_json(report).dump(2) + "\n");
  return report_errors(errors);
}

int cmd_stats(const std::string& input) {
  std::vector<question_instance> corpus = read_corpus(input);
  std::cout << corpus_stats(corpus).dump(2) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"exact-SCM benchmark generator for causal-reasoning post-training"};
  app.require_subcommand(1);

  std::string config_path;
  std::uint64_t seed = 0;
  int jobs = -1;
  std::string out_dir;
  app.add_option("--config", config_path, "key=value configuration file");
  auto* seed_opt = app.add_option("--seed", seed, "override the configured seed");
  app.add_option("--jobs", jobs, "worker threads (0 = library default)");
  app.add_option("--out", out_dir, "output directory override");

  auto* gen = app.add_subcommand("generate", "emit the base corpus and its manifest");
  std::string tasks_csv, prefix = "train", from_manifest;
  int count = -1;
  gen->add_option("--tasks", tasks_csv, "comma-separated task subset (default: all seven)");
  gen->add_option("--count", count, "instances per task (default: train_per_task)");
  gen->add_option("--prefix", prefix, "corpus name and instance id prefix");
  gen->add_option("--from-manifest", from_manifest, "regenerate a corpus from its manifest");

  auto* stress = app.add_subcommand("stress", "emit evaluation variants");
  std::string kind = "all", stress_input;
  stress->add_option("--kind", kind,
                     "rephrased|omitted|deconfounding|redundant|insufficient|all");
  stress->add_option("--input", stress_input,
                     "base corpus to transform (generated fresh when omitted)");

  auto* adapt_cmd = app.add_subcommand("adapt", "emit post-training record files");
  std::string method, adapt_input;
  adapt_cmd->add_option("--method", method, "sft|dpo|kto|rl")->required();
  adapt_cmd->add_option("--input", adapt_input, "base corpus")->required();

  auto* grade_cmd = app.add_subcommand("grade", "score model responses against a corpus");
  std::string grade_corpus;
  std::vector<std::string> response_paths;
  double tolerance = 0.0;
  grade_cmd->add_option("--corpus", grade_corpus, "graded corpus")->required();
  grade_cmd->add_option("--responses", response_paths, "response files, one per run")
      ->required();
  grade_cmd->add_option("--tolerance", tolerance, "numeric comparison tolerance");

  auto* stats_cmd = app.add_subcommand("stats", "summarize a corpus");
  std::string stats_input;
  stats_cmd->add_option("--input", stats_input, "corpus file")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    gym::gym_config cfg =
        config_path.empty() ? gym::gym_config{} : gym::gym_config::load(config_path);
    cfg.apply_env();
    if (seed_opt->count() > 0) cfg.seed = seed;
    if (jobs >= 0) cfg.jobs = jobs;
    if (!out_dir.empty()) cfg.out_dir = out_dir;
    cfg.validate();

    if (gen->parsed()) return cmd_generate(cfg, tasks_csv, count, prefix, from_manifest);
    if (stress->parsed()) return cmd_stress(cfg, kind, stress_input);
    if (adapt_cmd->parsed()) return cmd_adapt(cfg, method, adapt_input);
    if (grade_cmd->parsed()) return cmd_grade(cfg, grade_corpus, response_paths, tolerance);
    if (stats_cmd->parsed()) return cmd_stats(stats_input);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
