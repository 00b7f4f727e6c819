#include <algorithm>
#include <optional>
#include <string>
#include <vector>

#include "doctest.h"
#include "gym/adapt.hpp"
#include "gym/errors.hpp"
#include "gym/grade.hpp"
#include "gym/questions.hpp"
#include "gym/stressors.hpp"

using namespace gym;

namespace {

question_instance base_instance(task kind = task::ate, std::uint64_t index = 0) {
  static vocabulary vocab = vocabulary::load("data/vocabulary.tsv");
  gen_params p;
  p.node_min = 3;
  p.node_max = 6;
  return generate_instance(p, vocab, kind, 616, index);
}

question_instance confounded_instance(task kind, std::uint64_t index) {
  static vocabulary vocab = vocabulary::load("data/vocabulary.tsv");
  gen_params p;
  p.node_min = 4;
  p.node_max = 5;
  p.edge_density = 0.75;
  p.require_confounding = true;
  p.no_effect_fraction = 0.0;
  p.retry_cap = 50000;
  return generate_instance(p, vocab, kind, 616, index);
}

// rewriter that mangles numerals, so polish validation always rejects it
struct vandal_rewriter final : rewriter_port {
  std::string rewrite(const std::string&, const std::string&) override {
    return "the value is 99 and that settles it";
  }
};

// rewriter that restyles prose but keeps numerals and the stated answer
struct cosmetic_rewriter final : rewriter_port {
  std::string rewrite(const std::string&, const std::string& content) override {
    std::string out = content;
    std::size_t pos = 0;
    while ((pos = out.find("Step", pos)) != std::string::npos) {
      out.replace(pos, 4, "Part");
      pos += 4;
    }
    return out;
  }
};

}  // namespace

TEST_CASE("reference reasoning narrates every step and states the answer") {
  question_instance q = base_instance();
  std::string text = reference_reasoning(q);
  for (std::size_t i = 0; i < q.solution.steps.size(); ++i) {
    std::string tag = "Step " + std::to_string(i + 1) + ": ";
    CHECK(text.find(tag + q.solution.steps[i].text) != std::string::npos);
  }
  std::string gold_text = q.gold.text(q.meta.answer_precision);
  CHECK(text.find("so the answer is " + gold_text + ".") != std::string::npos);
  CHECK(text.back() == '\n');
}

TEST_CASE("answer json lines match the instructed shapes") {
  answer a;
  a.k = answer::kind::yes_no;
  a.yes = true;
  CHECK(answer_json_line(a, 4) == R"({"answer":"yes"})");
  a.yes = false;
  CHECK(answer_json_line(a, 4) == R"({"answer":"no"})");

  a.k = answer::kind::numeric;
  a.value = 0.1234;
  CHECK(answer_json_line(a, 4) == R"({"answer":0.1234})");

  a.k = answer::kind::bounds;
  a.lower = 0.25;
  a.upper = 0.75;
  CHECK(answer_json_line(a, 4) == R"({"answer":[0.25,0.75]})");

  a.k = answer::kind::lack_condition;
  CHECK(answer_json_line(a, 4) == R"({"answer":"LACK_CONDITION"})");
}

TEST_CASE("gold responses wrap the reasoning in a single think block") {
  for (task kind : {task::ate, task::pn}) {
    question_instance q = base_instance(kind, 1);
    std::string r = gold_response(q);
    CHECK(r.substr(0, 8) == "<think>\n");
    std::size_t close = r.find("</think>\n");
    REQUIRE(close != std::string::npos);
    CHECK(r.substr(8, close - 8) == reference_reasoning(q));
    CHECK(r.substr(close + 9) == answer_json_line(q.gold, q.meta.answer_precision));
  }
}

TEST_CASE("sft keeps the polished reasoning when it survives validation") {
  question_instance q = base_instance(task::ett, 2);
  cosmetic_rewriter polisher;
  sft_record rec = to_sft(q, polisher);
  CHECK(rec.id == q.id);
  CHECK(rec.prompt == compose_prompt(q));
  CHECK(rec.answer == q.gold.text(q.meta.answer_precision));
  CHECK(!rec.polished_fallback);
  CHECK(rec.reasoning.find("Part 1: ") != std::string::npos);
  CHECK(rec.reasoning.find("Step 1: ") == std::string::npos);
  CHECK(same_decimal_multiset(reference_reasoning(q), rec.reasoning));
}

TEST_CASE("sft falls back to template prose when the polisher misbehaves") {
  question_instance q = base_instance(task::cde, 3);
  vandal_rewriter vandal;
  sft_record rec = to_sft(q, vandal, /*retries=*/2);
  CHECK(rec.polished_fallback);
  CHECK(rec.reasoning == reference_reasoning(q));
  CHECK(rec.answer == q.gold.text(q.meta.answer_precision));

  identity_rewriter id;
  sft_record plain = to_sft(q, id);
  CHECK(!plain.polished_fallback);
  CHECK(plain.reasoning == reference_reasoning(q));
}

TEST_CASE("negative mining prefers wrong answers over quality flags") {
  question_instance q = base_instance();
  REQUIRE(q.gold.k == answer::kind::yes_no);
  std::string wrong_text = q.gold.yes ? "no" : "yes";

  std::string reference = reference_reasoning(q);
  std::string verbose = reference;
  while (verbose.size() <= 4 * reference.size()) verbose += reference;

  std::string wrong_trace =
      "A quick look suggests {\"answer\": \"" + wrong_text + "\"}";
  auto neg = mine_negative(q, {verbose, wrong_trace});
  REQUIRE(neg.has_value());
  CHECK(neg->reasoning == wrong_trace);
  CHECK(neg->answer == wrong_text);
}

TEST_CASE("negative mining flags verbose, forgetful, and disordered traces") {
  question_instance q = base_instance(task::ett, 4);
  std::string gold_text = q.gold.text(q.meta.answer_precision);
  std::string good_line = answer_json_line(q.gold, q.meta.answer_precision);
  std::string reference = reference_reasoning(q);

  std::vector<std::string> values;
  for (const prob_statement& s : q.given_info)
    values.push_back(format_fixed(s.value, q.meta.render_precision));

  auto join = [&](const std::vector<std::string>& vs) {
    std::string out = "Using ";
    for (const std::string& v : vs) out += v + " ";
    return out + "gives " + good_line;
  };

  // verbose: everything correct, but over the length threshold
  std::string verbose = reference;
  while (verbose.size() <= 4 * reference.size()) verbose += reference;
  auto v = mine_negative(q, {verbose});
  REQUIRE(v.has_value());
  CHECK(v->reasoning == verbose);
  CHECK(v->answer == gold_text);

  // forgetful: drops the first given value entirely
  if (values.size() >= 2 &&
      std::count(values.begin(), values.end(), values.front()) == 1) {
    std::vector<std::string> partial(values.begin() + 1, values.end());
    auto m = mine_negative(q, {join(partial)});
    REQUIRE(m.has_value());
    CHECK(m->answer == gold_text);
  }

  // disordered: every value present, but not in statement order
  std::vector<std::string> unique_sorted = values;
  std::sort(unique_sorted.begin(), unique_sorted.end());
  bool all_distinct = std::adjacent_find(unique_sorted.begin(), unique_sorted.end()) ==
                      unique_sorted.end();
  if (values.size() >= 2 && all_distinct) {
    std::vector<std::string> reversed(values.rbegin(), values.rend());
    auto d = mine_negative(q, {join(reversed)});
    REQUIRE(d.has_value());
    CHECK(d->answer == gold_text);
  }

  // a clean short trace that walks the values in order is not a negative
  CHECK(!mine_negative(q, {join(values)}).has_value());
  CHECK(!mine_negative(q, {}).has_value());
}

TEST_CASE("fabricated negatives use the unadjusted reading when it disagrees") {
  question_instance q = confounded_instance(task::ate, 0);
  preference_side neg = fabricate_negative(q, 7);
  std::string gold_text = q.gold.text(q.meta.answer_precision);
  CHECK(neg.answer != gold_text);
  CHECK(neg.reasoning.find("without adjusting") != std::string::npos);
  CHECK(neg.reasoning.find(format_fixed(q.meta.naive_value, q.meta.answer_precision)) !=
        std::string::npos);
  // the naive path ignores the seed entirely
  CHECK(fabricate_negative(q, 8).reasoning == neg.reasoning);
}

TEST_CASE("fabricated negatives fall back to a verbose correct trace") {
  // a null-effect instance agrees with its naive reading, forcing the filler path
  static vocabulary vocab = vocabulary::load("data/vocabulary.tsv");
  gen_params p;
  p.node_min = 3;
  p.node_max = 6;
  p.no_effect_fraction = 1.0;
  question_instance q;
  bool found = false;
  for (std::uint64_t i = 0; i < 20 && !found; ++i) {
    q = generate_instance(p, vocab, task::ate, 99, i);
    found = q.meta.has_naive && (q.meta.naive_value > 0.0) == q.gold.yes;
  }
  REQUIRE(found);
  preference_side neg = fabricate_negative(q, 13);
  std::string reference = reference_reasoning(q);
  CHECK(neg.answer == q.gold.text(q.meta.answer_precision));
  CHECK(neg.reasoning.size() > 3 * reference.size());
  CHECK(neg.reasoning.substr(0, reference.size()) == reference);
  CHECK(fabricate_negative(q, 13).reasoning == neg.reasoning);

  // the verbose trace is exactly what the mining heuristics catch
  auto mined = mine_negative(q, {neg.reasoning});
  REQUIRE(mined.has_value());
  CHECK(mined->reasoning == neg.reasoning);
}

TEST_CASE("preference pairs insist on a gold chosen side") {
  question_instance q = base_instance(task::nie, 5);
  std::string gold_text = q.gold.text(q.meta.answer_precision);
  preference_side pos{reference_reasoning(q), gold_text};
  preference_side neg = fabricate_negative(q, 3);

  preference_pair pair = to_preference_pair(q, pos, neg);
  CHECK(pair.id == q.id);
  CHECK(pair.prompt == compose_prompt(q));
  CHECK(pair.chosen.answer == gold_text);
  CHECK(pair.rejected.reasoning == neg.reasoning);

  preference_side bad_pos{reference_reasoning(q), "definitely"};
  CHECK_THROWS_AS(to_preference_pair(q, bad_pos, neg), data_error);
  CHECK_THROWS_AS(to_preference_pair(q, pos, pos), data_error);
}

TEST_CASE("kto corpus balances labels one to one and interleaves") {
  auto mk = [](const std::string& id, kto_label l) {
    kto_record r;
    r.id = id;
    r.prompt = "p-" + id;
    r.completion = "c-" + id;
    r.label = l;
    return r;
  };
  std::vector<kto_record> pos, neg;
  for (int i = 0; i < 8; ++i) pos.push_back(mk("p" + std::to_string(i), kto_label::desirable));
  for (int i = 0; i < 7; ++i) neg.push_back(mk("n" + std::to_string(i), kto_label::undesirable));

  std::vector<kto_record> out = to_kto_corpus(pos, neg, 42);
  REQUIRE(out.size() == 14);
  int desirable = 0;
  for (std::size_t i = 0; i < out.size(); ++i) {
    kto_label want = i % 2 == 0 ? kto_label::desirable : kto_label::undesirable;
    CHECK(out[i].label == want);
    if (out[i].label == kto_label::desirable) ++desirable;
  }
  CHECK(desirable == 7);

  // the smaller side survives intact, in its original order
  for (int i = 0; i < 7; ++i) CHECK(out[static_cast<std::size_t>(2 * i + 1)].id == neg[static_cast<std::size_t>(i)].id);

  // the larger side is subsampled but stays in corpus order
  std::vector<std::string> kept_pos;
  for (std::size_t i = 0; i < out.size(); i += 2) kept_pos.push_back(out[i].id);
  std::vector<std::string> sorted_pos = kept_pos;
  std::sort(sorted_pos.begin(), sorted_pos.end());
  CHECK(kept_pos == sorted_pos);  // p0..p7 sort lexicographically in order

  std::vector<kto_record> again = to_kto_corpus(pos, neg, 42);
  for (std::size_t i = 0; i < out.size(); ++i) CHECK(again[i].id == out[i].id);

  CHECK_THROWS_AS(to_kto_corpus({}, neg, 1), data_error);
  CHECK_THROWS_AS(to_kto_corpus(pos, {}, 1), data_error);
}

TEST_CASE("rl records carry the question and answer but never reasoning") {
  question_instance q = base_instance(task::ps, 6);
  rl_record r = to_rl_record(q);
  CHECK(r.id == q.id);
  CHECK(r.kind == q.kind);
  CHECK(r.amode == q.amode);
  CHECK(r.prompt == compose_prompt(q));
  CHECK(r.gold_answer == q.gold.text(q.meta.answer_precision));

  nlohmann::ordered_json j = rl_to_json(r);
  CHECK(!j.contains("reasoning"));
  CHECK(j.dump().find("<think>") == std::string::npos);
  std::vector<std::string> keys;
  for (auto it = j.begin(); it != j.end(); ++it) keys.push_back(it.key());
  CHECK(keys == std::vector<std::string>{"schema_version", "id", "task", "answer_mode",
                                         "prompt", "answer"});

  rl_record back = rl_from_json(j);
  CHECK(back.id == r.id);
  CHECK(back.kind == r.kind);
  CHECK(back.amode == r.amode);
  CHECK(back.prompt == r.prompt);
  CHECK(back.gold_answer == r.gold_answer);
}

TEST_CASE("reward components reflect answer, reasoning block, and json shape") {
  for (task kind : {task::ate, task::pn}) {
    question_instance q = base_instance(kind, 7);
    rl_record r = to_rl_record(q);

    // the generated gold response earns every component
    reward_breakdown full = reward(gold_response(q), r);
    CHECK(full.answer_ok);
    CHECK(full.think_ok);
    CHECK(full.json_ok);
    CHECK(full.total == doctest::Approx(1.2).epsilon(1e-12));

    // bare answer line: correct and well-formed but unreasoned
    std::string line = answer_json_line(q.gold, q.meta.answer_precision);
    reward_breakdown bare = reward(line, r);
    CHECK(bare.answer_ok);
    CHECK(!bare.think_ok);
    CHECK(bare.json_ok);
    CHECK(bare.total == doctest::Approx(1.1).epsilon(1e-12));

    // think plus json but a wrong answer keeps only the style credit
    answer wrong = q.gold;
    if (wrong.k == answer::kind::yes_no) {
      wrong.yes = !wrong.yes;
    } else {
      wrong.lower += 0.111;
      wrong.upper += 0.222;
    }
    std::string sly = "<think>\nhand-waving\n</think>\n" +
                      answer_json_line(wrong, q.meta.answer_precision);
    reward_breakdown styled = reward(sly, r);
    CHECK(!styled.answer_ok);
    CHECK(styled.think_ok);
    CHECK(styled.json_ok);
    CHECK(styled.total == doctest::Approx(0.2).epsilon(1e-12));

    CHECK(reward("complete nonsense", r).total == 0.0);
  }
}

TEST_CASE("reward rejects malformed reasoning blocks") {
  question_instance q = base_instance(task::ate, 8);
  rl_record r = to_rl_record(q);
  std::string line = answer_json_line(q.gold, q.meta.answer_precision);

  // two opening tags
  CHECK(!reward("<think>a</think><think>b</think>\n" + line, r).think_ok);
  // closing before opening
  CHECK(!reward("</think>backwards<think>\n" + line, r).think_ok);
  // answer only inside the block, nothing after it
  CHECK(!reward("<think>" + line + "</think>", r).think_ok);
  // answer before the block still counts for answer/json but not reasoning
  reward_breakdown early = reward(line + "\n<think>afterthought</think>", r);
  CHECK(early.answer_ok);
  CHECK(early.json_ok);
  CHECK(!early.think_ok);

  reward_weights w;
  w.answer = 2.0;
  w.think = 0.5;
  w.json = 0.25;
  CHECK(reward(gold_response(q), r, w).total == doctest::Approx(2.75).epsilon(1e-12));
}

TEST_CASE("adapter records serialize with stable field layouts") {
  question_instance q = base_instance(task::nde, 9);
  identity_rewriter id;

  sft_record s = to_sft(q, id);
  nlohmann::ordered_json sj = sft_to_json(s);
  std::vector<std::string> skeys;
  for (auto it = sj.begin(); it != sj.end(); ++it) skeys.push_back(it.key());
  CHECK(skeys == std::vector<std::string>{"schema_version", "id", "prompt", "reasoning",
                                          "answer"});

  preference_side pos{reference_reasoning(q), q.gold.text(q.meta.answer_precision)};
  preference_pair pair = to_preference_pair(q, pos, fabricate_negative(q, 1));
  nlohmann::ordered_json pj = pair_to_json(pair);
  CHECK(pj["chosen"]["answer"] == pair.chosen.answer);
  CHECK(pj["rejected"]["reasoning"] == pair.rejected.reasoning);

  kto_record k;
  k.id = "x";
  k.prompt = "p";
  k.completion = "c";
  k.label = kto_label::undesirable;
  nlohmann::ordered_json kj = kto_to_json(k);
  CHECK(kj["label"] == "undesirable");
  CHECK(std::string(to_string(kto_label::desirable)) == "desirable");
}
