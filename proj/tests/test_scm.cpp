#include <cmath>
#include <cstdlib>

#include "doctest.h"
#include "gym/errors.hpp"
#include "gym/graph.hpp"
#include "gym/random.hpp"
#include "gym/scm.hpp"

using namespace gym;

namespace {

// A -> B with fixed mechanism parameters; node 0 = A, node 1 = B.
scm chain2(double bias_a, double bias_b, double w) {
  scm m;
  m.structure.graph.node_count = 2;
  m.structure.graph.edges = {{0, 1}};
  m.structure.labels = {"a", "b"};
  m.structure.polarity = {w >= 0 ? 1 : -1};
  m.parents = {{}, {0}};
  m.weight = {{}, {w}};
  m.bias = {bias_a, bias_b};
  return m;
}

scm random_scm(int n, double density, std::uint64_t seed) {
  vocabulary empty = vocabulary::parse("");
  dag g = generate_dag(n, density, seed);
  labeled_dag l = assign_semantics(g, semantics_mode::fake, empty, derive_seed(seed, 1));
  return instantiate_scm(l, derive_seed(seed, 2));
}

}  // namespace

TEST_CASE("logistic reference values") {
  CHECK(logistic(0.0) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(logistic(2.0) == doctest::Approx(0.8807970779778823).epsilon(1e-15));
  CHECK(logistic(-1.0) == doctest::Approx(0.2689414213699951).epsilon(1e-15));
  CHECK(logistic(0.5) == doctest::Approx(0.6224593312018546).epsilon(1e-15));
  // saturation is exact in IEEE arithmetic, which deterministic-copy
  // mechanisms rely on
  CHECK(logistic(1000.0) == 1.0);
  CHECK(logistic(-1000.0) == 0.0);
}

TEST_CASE("hand-built chain joint matches frozen values") {
  scm m = chain2(0.5, -1.0, 2.0);
  CHECK(cpt(m, 0, {}) == doctest::Approx(0.6224593312018546).epsilon(1e-15));
  CHECK(cpt(m, 1, {0}) == doctest::Approx(0.2689414213699951).epsilon(1e-15));
  CHECK(cpt(m, 1, {1}) == doctest::Approx(0.7310585786300049).epsilon(1e-15));

  joint_distribution j = exact_joint(m);
  REQUIRE(j.p.size() == 4);
  // state bit 0 = A, bit 1 = B
  CHECK(j.p[0b00] == doctest::Approx(0.27600434470659363).epsilon(1e-14));
  CHECK(j.p[0b01] == doctest::Approx(0.16740509727844333).epsilon(1e-14));
  CHECK(j.p[0b10] == doctest::Approx(0.10153632409155179).epsilon(1e-14));
  CHECK(j.p[0b11] == doctest::Approx(0.45505423392341127).epsilon(1e-14));
}

TEST_CASE("query computes conditionals from the joint") {
  scm m = chain2(0.5, -1.0, 2.0);
  joint_distribution j = exact_joint(m);
  CHECK(query(j, {{1, 1}}) == doctest::Approx(0.556590558014963).epsilon(1e-14));
  CHECK(query(j, {{0, 1}}, {{1, 1}}) == doctest::Approx(0.8175744761936437).epsilon(1e-14));
  // joint target
  CHECK(query(j, {{0, 1}, {1, 1}}) == doctest::Approx(0.45505423392341127).epsilon(1e-14));
  CHECK_THROWS_AS(query(j, assignment{}), std::invalid_argument);
  CHECK_THROWS_AS(query(j, {{0, 1}}, {{0, 0}}), std::invalid_argument);
}

TEST_CASE("zero-mass conditioning is rejected") {
  // A is always 1 and B copies A, so B = 0 never happens
  scm m = chain2(1000.0, -1000.0, 2000.0);
  joint_distribution j = exact_joint(m);
  CHECK_THROWS_AS(query(j, {{0, 1}}, {{1, 0}}), undefined_conditional_error);
}

TEST_CASE("exact joints sum to one and mass splits cleanly") {
  for (std::uint64_t seed = 0; seed < 60; ++seed) {
    scm m = random_scm(3 + static_cast<int>(seed % 8), 0.5, seed);
    joint_distribution j = exact_joint(m);
    double total = 0.0;
    for (double p : j.p) {
      CHECK(p >= 0.0);
      total += p;
    }
    CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(j.mass({{0, 0}}) + j.mass({{0, 1}}) == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("instantiated mechanisms honor the parameter ranges and polarities") {
  vocabulary empty = vocabulary::parse("");
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    dag g = generate_dag(7, 0.6, seed);
    labeled_dag l = assign_semantics(g, semantics_mode::fake, empty, seed);
    scm m = instantiate_scm(l, derive_seed(seed, 9));
    CHECK(m.node_count() == 7);
    for (int v = 0; v < 7; ++v) {
      CHECK(m.bias[static_cast<std::size_t>(v)] >= -2.0);
      CHECK(m.bias[static_cast<std::size_t>(v)] <= 2.0);
      for (std::size_t k = 0; k < m.parents[static_cast<std::size_t>(v)].size(); ++k) {
        double w = m.weight[static_cast<std::size_t>(v)][k];
        CHECK(std::abs(w) >= 0.5);
        CHECK(std::abs(w) <= 3.0);
        int parent = m.parents[static_cast<std::size_t>(v)][k];
        // weight sign equals the polarity recorded for that edge
        for (std::size_t ei = 0; ei < l.graph.edges.size(); ++ei)
          if (l.graph.edges[ei].parent == parent && l.graph.edges[ei].child == v)
            CHECK((w > 0) == (l.polarity[ei] > 0));
      }
    }
  }
}

TEST_CASE("assignment set, merge, and masks") {
  assignment a{{2, 1}, {0, 0}};
  CHECK(a.items().size() == 2);
  CHECK(a.items()[0].first == 0);  // kept sorted
  CHECK(a.value(2) == 1);
  CHECK(!a.value(1).has_value());
  a.set(2, 0);
  CHECK(a.value(2) == 0);

  assignment b{{1, 1}};
  assignment merged = a.merged(b);
  CHECK(merged.size() == 3);
  assignment conflict{{0, 1}};
  CHECK_THROWS_AS(a.merged(conflict), std::invalid_argument);

  CHECK(a.mask() == 0b101u);
  CHECK(a.bits() == 0b000u);
  CHECK(a.disjoint_with(b));
  CHECK(!a.disjoint_with(conflict));
}

TEST_CASE("exact joint refuses more than 16 nodes") {
  dag g;
  g.node_count = 17;
  vocabulary empty = vocabulary::parse("");
  labeled_dag l = assign_semantics(g, semantics_mode::fake, empty, 0);
  scm m = instantiate_scm(l, 1);
  CHECK_THROWS_AS(exact_joint(m), capacity_error);
}

TEST_CASE("scm json round-trip") {
  scm m = random_scm(6, 0.5, 77);
  nlohmann::ordered_json j = scm_to_json(m);
  scm back = scm_from_json(j);
  CHECK(back.structure.graph.edges == m.structure.graph.edges);
  CHECK(back.structure.labels == m.structure.labels);
  CHECK(back.structure.polarity == m.structure.polarity);
  CHECK(back.structure.mode == m.structure.mode);
  CHECK(back.parents == m.parents);
  CHECK(back.bias == m.bias);
  CHECK(back.weight == m.weight);
  CHECK(scm_to_json(back).dump() == j.dump());
}

TEST_CASE("schema version gate accepts minor drift only") {
  CHECK_NOTHROW(check_schema_version("1.0"));
  CHECK_NOTHROW(check_schema_version("1.9"));
  CHECK_THROWS_AS(check_schema_version("2.0"), data_error);
  CHECK_THROWS_AS(check_schema_version("0.9"), data_error);
  CHECK_THROWS_AS(check_schema_version("junk"), data_error);
}

TEST_CASE("ancestral sampling approximates the joint") {
  scm m = chain2(0.5, -1.0, 2.0);
  std::vector<std::uint32_t> rows = sample(m, 200000, 4242);
  REQUIRE(rows.size() == 200000);
  double b1 = 0;
  for (std::uint32_t r : rows) b1 += static_cast<double>((r >> 1) & 1u);
  b1 /= static_cast<double>(rows.size());
  // P(B=1) = 0.5566, sigma ~ 0.0011; allow 5 sigma
  CHECK(std::abs(b1 - 0.556590558014963) < 0.0056);
}
