#include <cstdlib>
#include <filesystem>
#include <string>
#include <vector>

#include "doctest.h"
#include "gym/config.hpp"
#include "gym/errors.hpp"

#include "json.hpp"

using namespace gym;
namespace fs = std::filesystem;

namespace {

struct temp_dir {
  fs::path path;
  temp_dir() {
    path = fs::temp_directory_path() /
           ("gym_config_test_" + std::to_string(::getpid()));
    fs::create_directories(path);
  }
  ~temp_dir() { fs::remove_all(path); }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

}  // namespace

TEST_CASE("default configuration is valid and round-trips through its dump") {
  gym_config cfg;
  CHECK_NOTHROW(cfg.validate());

  std::string text = cfg.canonical_text();
  gym_config back = gym_config::parse(text);
  CHECK(back.canonical_text() == text);
  CHECK(back.seed == cfg.seed);
  CHECK(back.gen.edge_density == cfg.gen.edge_density);
  CHECK(back.train_per_task == cfg.train_per_task);
  CHECK(back.rewriter == cfg.rewriter);
}

TEST_CASE("parsing handles comments, blanks, and whitespace") {
  gym_config cfg = gym_config::parse(
      "# corpus settings\n"
      "\n"
      "  seed = 42   # inline comment\n"
      "node_max=8\n"
      "\tedge_density\t=\t0.5\n"
      "rewriter = identity\n");
  CHECK(cfg.seed == 42);
  CHECK(cfg.gen.node_max == 8);
  CHECK(cfg.gen.edge_density == 0.5);
  CHECK(cfg.rewriter == "identity");
  // untouched keys keep their defaults
  CHECK(cfg.gen.node_min == gym_config{}.gen.node_min);
}

TEST_CASE("parse errors carry line numbers and key names") {
  CHECK_THROWS_WITH_AS(gym_config::parse("seed=1\nnode_min=3\nwibble=9\n"),
                       "line 3: unknown key 'wibble'", config_error);
  CHECK_THROWS_WITH_AS(gym_config::parse("seed=1\njust some words\n"),
                       "line 2: expected key=value, got 'just some words'", config_error);
  CHECK_THROWS_WITH_AS(gym_config::parse("node_min=lots\n"),
                       "line 1, key node_min: needs an integer, got 'lots'", config_error);
  CHECK_THROWS_WITH_AS(gym_config::parse("edge_density=dense\n"),
                       "line 1, key edge_density: needs a number, got 'dense'", config_error);
  CHECK_THROWS_AS(gym_config::parse("seed=-4\n"), config_error);
  CHECK_THROWS_AS(gym_config::parse("effect_answer_mode=sideways\n"), config_error);
}

TEST_CASE("validation rejects out-of-range settings") {
  auto broken = [](const std::string& line) { return gym_config::parse(line + "\n"); };
  CHECK_THROWS_AS(broken("node_min=1"), config_error);
  CHECK_THROWS_AS(broken("node_max=17"), config_error);
  CHECK_THROWS_AS(broken("node_min=9\nnode_max=8"), config_error);
  CHECK_THROWS_AS(broken("edge_density=1.5"), config_error);
  CHECK_THROWS_AS(broken("max_in_degree=0"), config_error);
  CHECK_THROWS_AS(broken("weight_min=0"), config_error);
  CHECK_THROWS_AS(broken("bias_min=3\nbias_max=-3"), config_error);
  CHECK_THROWS_AS(broken("render_precision=0"), config_error);
  CHECK_THROWS_AS(broken("answer_precision=11"), config_error);
  CHECK_THROWS_AS(broken("sign_margin=1"), config_error);
  CHECK_THROWS_AS(broken("max_statements=1"), config_error);
  CHECK_THROWS_AS(broken("fake_weight=-1"), config_error);
  CHECK_THROWS_AS(broken("fake_weight=0\nrandom_weight=0\nreal_weight=0"), config_error);
  CHECK_THROWS_AS(broken("no_effect_fraction=2"), config_error);
  CHECK_THROWS_AS(broken("retry_cap=0"), config_error);
  CHECK_THROWS_AS(broken("train_per_task=0"), config_error);
  CHECK_THROWS_AS(broken("adapt_per_task=3000"), config_error);
  CHECK_THROWS_AS(broken("rewriter=psychic"), config_error);
  CHECK_THROWS_AS(broken("redundant_count=0"), config_error);
  CHECK_THROWS_AS(broken("reward_answer=-0.5"), config_error);
  CHECK_THROWS_AS(broken("negative_length_multiple=1"), config_error);
  CHECK_THROWS_AS(broken("llm_temperature=3"), config_error);
  CHECK_THROWS_AS(broken("llm_timeout_seconds=0"), config_error);
  CHECK_THROWS_AS(broken("jobs=-1"), config_error);
}

TEST_CASE("environment variables override only the llm endpoint") {
  ::setenv("GYM_LLM_URL", "http://env-host:9/v1/chat/completions", 1);
  ::setenv("GYM_LLM_KEY", "env-secret", 1);
  gym_config cfg;
  std::uint64_t seed_before = cfg.seed;
  cfg.apply_env();
  CHECK(cfg.llm.url == "http://env-host:9/v1/chat/completions");
  CHECK(cfg.llm.key == "env-secret");
  CHECK(cfg.seed == seed_before);

  ::unsetenv("GYM_LLM_URL");
  ::unsetenv("GYM_LLM_KEY");
  gym_config keep;
  keep.llm.url = "http://file-host/v1";
  keep.apply_env();
  CHECK(keep.llm.url == "http://file-host/v1");
  CHECK(keep.llm.key.empty());
}

TEST_CASE("the llm key never appears in persisted configuration") {
  gym_config cfg;
  cfg.llm.key = "do-not-write-me";
  std::string text = cfg.canonical_text();
  CHECK(text.find("do-not-write-me") == std::string::npos);
  CHECK(text.find("llm_key") == std::string::npos);
  CHECK_THROWS_AS(gym_config::parse("llm_key=x\n"), config_error);
}

TEST_CASE("fnv1a64 and hex64 are frozen") {
  CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
  CHECK(fnv1a64("abc") == 0xe71fa2190541574bULL);
  CHECK(fnv1a64("a") != fnv1a64("b"));
  CHECK(hex64(0) == "0000000000000000");
  CHECK(hex64(0xdeadbeefULL) == "00000000deadbeef");
  CHECK(hex64(0xcbf29ce484222325ULL) == "cbf29ce484222325");
}

TEST_CASE("atomic writes land complete and leave no temp files") {
  temp_dir tmp;
  std::string path = tmp.file("nested/dir/out.txt");
  atomic_write_text(path, "first\n");
  CHECK(read_text_file(path) == "first\n");
  atomic_write_text(path, "second\n");
  CHECK(read_text_file(path) == "second\n");
  CHECK(!fs::exists(path + ".tmp"));
  CHECK_THROWS_AS(read_text_file(tmp.file("missing.txt")), data_error);
}

TEST_CASE("jsonl files round-trip and report malformed lines") {
  temp_dir tmp;
  std::string path = tmp.file("records.jsonl");
  std::vector<nlohmann::ordered_json> records;
  records.push_back({{"id", "a"}, {"value", 1}});
  records.push_back({{"id", "b"}, {"value", 2.5}});
  write_jsonl(path, records);

  std::vector<nlohmann::json> back = read_jsonl(path);
  REQUIRE(back.size() == 2);
  CHECK(back[0]["id"] == "a");
  CHECK(back[1]["value"] == 2.5);

  std::string bad = tmp.file("bad.jsonl");
  atomic_write_text(bad, "{\"ok\": 1}\n{oops\n");
  try {
    read_jsonl(bad);
    FAIL("expected data_error");
  } catch (const data_error& e) {
    CHECK(std::string(e.what()).find(":2:") != std::string::npos);
  }

  // empty trailing lines are tolerated
  std::string sparse = tmp.file("sparse.jsonl");
  atomic_write_text(sparse, "{\"ok\": 1}\n\n\n");
  CHECK(read_jsonl(sparse).size() == 1);
}

TEST_CASE("manifests pin the command, seed, and configuration hash") {
  gym_config cfg;
  cfg.seed = 1234;
  manifest m = make_manifest("generate", cfg);
  CHECK(m.command == "generate");
  CHECK(m.seed == 1234);
  CHECK(m.config_text == cfg.canonical_text());
  CHECK(m.config_hash == hex64(fnv1a64(m.config_text)));

  m.counts = {{"ATE", 2500}, {"CDE", 2500}};
  m.files = {"train.jsonl", "manifest.json"};
  manifest back = manifest::from_json(m.to_json());
  CHECK(back.command == m.command);
  CHECK(back.seed == m.seed);
  CHECK(back.config_hash == m.config_hash);
  CHECK(back.config_text == m.config_text);
  CHECK(back.counts == m.counts);
  CHECK(back.files == m.files);
  CHECK(back.to_json().dump() == m.to_json().dump());

  // a different configuration yields a different hash
  gym_config other = cfg;
  other.gen.edge_density = 0.9;
  CHECK(make_manifest("generate", other).config_hash != m.config_hash);
}
