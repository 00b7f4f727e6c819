#include <algorithm>
#include <cmath>
#include <functional>
#include <set>
#include <vector>

#include "doctest.h"
#include "gym/graph.hpp"
#include "gym/identify.hpp"
#include "gym/oracle.hpp"
#include "gym/random.hpp"
#include "gym/scm.hpp"

using namespace gym;

namespace {

dag make_dag(int n, std::vector<edge> edges) {
  dag g;
  g.node_count = n;
  std::sort(edges.begin(), edges.end());
  g.edges = std::move(edges);
  return g;
}

// Reference d-separation by brute-force path enumeration: walk every simple
// undirected path from a to b and apply the blocking rules directly. The
// production routine uses directional reachability, so agreement between the
// two is meaningful.
bool path_oracle_connected(const dag& g, int a, int b, const std::vector<int>& z) {
  std::vector<char> in_z(static_cast<std::size_t>(g.node_count), 0);
  for (int v : z) in_z[static_cast<std::size_t>(v)] = 1;
  // z_or_below marks nodes with a descendant in z (or in z themselves)
  std::vector<char> z_or_below(in_z);
  for (int v = 0; v < g.node_count; ++v)
    for (int d : descendants(g, v))
      if (in_z[static_cast<std::size_t>(d)]) z_or_below[static_cast<std::size_t>(v)] = 1;

  // step through neighbors remembering whether we arrived along an incoming
  // or outgoing edge; interior node w with pattern (in, in) is a collider
  std::vector<std::vector<std::pair<int, bool>>> nbr(
      static_cast<std::size_t>(g.node_count));  // (next, edge points into next)
  for (const edge& e : g.edges) {
    nbr[static_cast<std::size_t>(e.parent)].push_back({e.child, true});
    nbr[static_cast<std::size_t>(e.child)].push_back({e.parent, false});
  }

  std::vector<char> on_path(static_cast<std::size_t>(g.node_count), 0);
  std::function<bool(int, bool)> walk = [&](int at, bool arrived_into_at) -> bool {
    if (at == b) return true;
    on_path[static_cast<std::size_t>(at)] = 1;
    bool open = false;
    for (auto [next, into_next] : nbr[static_cast<std::size_t>(at)]) {
      if (on_path[static_cast<std::size_t>(next)]) continue;
      bool collider = arrived_into_at && !into_next;  // -> at <-
      bool passable = collider ? z_or_below[static_cast<std::size_t>(at)] == 1
                               : in_z[static_cast<std::size_t>(at)] == 0;
      if (passable && walk(next, into_next)) {
        open = true;
        break;
      }
    }
    on_path[static_cast<std::size_t>(at)] = 0;
    return open;
  };

  for (auto [next, into_next] : nbr[static_cast<std::size_t>(a)]) {
    on_path[static_cast<std::size_t>(a)] = 1;
    bool open = walk(next, into_next);
    on_path[static_cast<std::size_t>(a)] = 0;
    if (open) return true;
  }
  return false;
}

bool path_oracle_separated(const dag& g, const std::vector<int>& a, const std::vector<int>& b,
                           const std::vector<int>& z) {
  for (int x : a)
    for (int y : b)
      if (path_oracle_connected(g, x, y, z)) return false;
  return true;
}

scm random_scm(int n, double density, std::uint64_t seed) {
  vocabulary empty = vocabulary::parse("");
  dag g = generate_dag(n, density, seed);
  labeled_dag l = assign_semantics(g, semantics_mode::fake, empty, derive_seed(seed, 1));
  return instantiate_scm(l, derive_seed(seed, 2));
}

bool backdoor_valid(const dag& g, int t, int o, const std::vector<int>& z) {
  dag pruned = g;
  pruned.edges.erase(
      std::remove_if(pruned.edges.begin(), pruned.edges.end(),
                     [&](const edge& e) { return e.parent == t; }),
      pruned.edges.end());
  return path_oracle_separated(pruned, {t}, {o}, z);
}

}  // namespace

TEST_CASE("descendants and ancestors on a known graph") {
  // 0 -> 1 -> 3, 0 -> 2, 2 -> 3
  dag g = make_dag(5, {{0, 1}, {1, 3}, {0, 2}, {2, 3}});
  CHECK(descendants(g, 0) == std::vector<int>{1, 2, 3});
  CHECK(descendants(g, 1) == std::vector<int>{3});
  CHECK(descendants(g, 4).empty());
  CHECK(ancestors(g, 3) == std::vector<int>{0, 1, 2});
  CHECK(ancestors(g, 0).empty());
}

TEST_CASE("d-separation matches the path-enumeration oracle") {
  int agree_sep = 0, agree_con = 0;
  for (std::uint64_t seed = 0; seed < 300; ++seed) {
    int n = 4 + static_cast<int>(seed % 4);
    dag g = generate_dag(n, 0.5, seed);
    rng r(derive_seed(seed, 7));
    // random disjoint singleton pair plus a random conditioning set
    int a = r.range(0, n - 1);
    int b = r.range(0, n - 1);
    if (a == b) continue;
    std::vector<int> z;
    for (int v = 0; v < n; ++v)
      if (v != a && v != b && r.coin(0.4)) z.push_back(v);
    bool got = is_d_separated(g, {a}, {b}, z);
    bool want = path_oracle_separated(g, {a}, {b}, z);
    CHECK(got == want);
    (want ? agree_sep : agree_con)++;
  }
  // the sample must exercise both outcomes for the comparison to mean much
  CHECK(agree_sep > 20);
  CHECK(agree_con > 20);
}

TEST_CASE("d-separation implies conditional independence in the joint") {
  int checked = 0;
  for (std::uint64_t seed = 0; seed < 150; ++seed) {
    int n = 4 + static_cast<int>(seed % 3);
    scm m = random_scm(n, 0.5, seed);
    joint_distribution joint = exact_joint(m);
    const dag& g = m.structure.graph;
    rng r(derive_seed(seed, 13));
    int a = r.range(0, n - 1), b = r.range(0, n - 1);
    if (a == b) continue;
    std::vector<int> z;
    for (int v = 0; v < n; ++v)
      if (v != a && v != b && r.coin(0.4)) z.push_back(v);
    if (!is_d_separated(g, {a}, {b}, z)) continue;
    ++checked;
    // every z configuration: P(a,b|z) = P(a|z) P(b|z)
    for (std::uint32_t bits = 0; bits < (1u << z.size()); ++bits) {
      assignment zc;
      for (std::size_t i = 0; i < z.size(); ++i)
        zc.set(z[i], static_cast<int>((bits >> i) & 1u));
      if (joint.mass(zc) < 1e-12) continue;
      double pab = query(joint, {{a, 1}, {b, 1}}, zc);
      double pa = query(joint, {{a, 1}}, zc);
      double pb = query(joint, {{b, 1}}, zc);
      CHECK(std::abs(pab - pa * pb) < 1e-9);
    }
  }
  CHECK(checked > 25);
}

TEST_CASE("backdoor set on textbook graphs") {
  // confounder triangle: 2 -> 0 (t), 2 -> 1 (o), 0 -> 1
  dag tri = make_dag(3, {{2, 0}, {2, 1}, {0, 1}});
  adjustment_result r = backdoor_sets(tri, 0, 1);
  CHECK(r.backdoor_set == std::vector<int>{2});
  CHECK(r.mediator_set.empty());

  // chain 0 -> 1 -> 2: nothing to adjust, node 1 mediates
  dag chain = make_dag(3, {{0, 1}, {1, 2}});
  adjustment_result c = backdoor_sets(chain, 0, 2);
  CHECK(c.backdoor_set.empty());
  CHECK(c.mediator_set == std::vector<int>{1});

  // two confounders: 2 -> 0, 2 -> 1, 3 -> 0, 3 -> 1, 0 -> 1
  dag two = make_dag(4, {{2, 0}, {2, 1}, {3, 0}, {3, 1}, {0, 1}});
  CHECK(backdoor_sets(two, 0, 1).backdoor_set == std::vector<int>{2, 3});

  // M-structure 2 -> 1, 2 -> 4, 3 -> 4, 3 -> 0(t), 0 -> 1(o): empty set works;
  // conditioning on the collider 4 would open the path
  dag mbias = make_dag(5, {{2, 1}, {2, 4}, {3, 4}, {3, 0}, {0, 1}});
  CHECK(backdoor_sets(mbias, 0, 1).backdoor_set.empty());
}

TEST_CASE("backdoor search returns a smallest valid set") {
  for (std::uint64_t seed = 0; seed < 150; ++seed) {
    int n = 4 + static_cast<int>(seed % 4);
    dag g = generate_dag(n, 0.55, seed);
    rng r(derive_seed(seed, 3));
    int t = r.range(0, n - 1);
    std::vector<int> down = descendants(g, t);
    if (down.empty()) continue;
    int o = down[static_cast<std::size_t>(r.below(down.size()))];
    adjustment_result res = backdoor_sets(g, t, o);
    CHECK(backdoor_valid(g, t, o, res.backdoor_set));
    // no strictly smaller candidate set passes the criterion
    std::vector<int> pool;
    std::vector<int> banned = descendants(g, t);
    for (int v = 0; v < n; ++v)
      if (v != t && v != o && !std::binary_search(banned.begin(), banned.end(), v))
        pool.push_back(v);
    std::size_t k = res.backdoor_set.size();
    bool smaller_works = false;
    for (std::uint32_t bits = 0; bits < (1u << pool.size()) && !smaller_works; ++bits) {
      std::vector<int> cand;
      for (std::size_t i = 0; i < pool.size(); ++i)
        if (bits & (1u << i)) cand.push_back(pool[i]);
      if (cand.size() < k && backdoor_valid(g, t, o, cand)) smaller_works = true;
    }
    CHECK(!smaller_works);
  }
}

TEST_CASE("mediators are descendants of t that reach o") {
  dag g = make_dag(6, {{0, 1}, {1, 2}, {0, 2}, {0, 3}, {4, 0}, {4, 2}});
  CHECK(mediators(g, 0, 2) == std::vector<int>{1});
  CHECK(mediators(g, 0, 1).empty());
  CHECK(mediators(g, 4, 2) == std::vector<int>{0, 1});
}

TEST_CASE("joint adjustment set supports the multi-node intervention formula") {
  int checked = 0;
  for (std::uint64_t seed = 0; seed < 80; ++seed) {
    int n = 4 + static_cast<int>(seed % 3);
    scm m = random_scm(n, 0.5, seed);
    const dag& g = m.structure.graph;
    rng r(derive_seed(seed, 5));
    int t = r.range(0, n - 1);
    std::vector<int> med;
    std::vector<int> down = descendants(g, t);
    if (down.empty()) continue;
    int o = down[static_cast<std::size_t>(r.below(down.size()))];
    med = mediators(g, t, o);
    std::vector<int> treatments = med;
    treatments.push_back(t);
    std::sort(treatments.begin(), treatments.end());
    std::vector<int> z = joint_adjustment_set(g, treatments, o);
    ++checked;

    // sum_z P(o=1 | do-values, z) P(z) must equal the truncated factorization
    assignment dov;
    for (std::size_t i = 0; i < treatments.size(); ++i)
      dov.set(treatments[i], static_cast<int>(derive_seed(seed, 21, i) & 1u));
    joint_distribution obs = exact_joint(m);
    joint_distribution intervened = interventional(m, dov);
    double truth = query(intervened, {{o, 1}});
    double formula = 0.0;
    bool defined = true;
    for (std::uint32_t bits = 0; bits < (1u << z.size()); ++bits) {
      assignment zc;
      for (std::size_t i = 0; i < z.size(); ++i)
        zc.set(z[i], static_cast<int>((bits >> i) & 1u));
      double pz = z.empty() ? 1.0 : obs.mass(zc);
      if (pz < 1e-14) continue;
      assignment cond = zc.merged(dov);
      if (obs.mass(cond) < 1e-14) {
        defined = false;
        break;
      }
      formula += query(obs, {{o, 1}}, cond) * pz;
    }
    if (!defined) continue;
    CHECK(std::abs(formula - truth) < 1e-9);
  }
  CHECK(checked > 30);
}

TEST_CASE("mediation adjustment set makes the mediation formula exact") {
  int checked = 0;
  for (std::uint64_t seed = 0; seed < 400 && checked < 40; ++seed) {
    int n = 4 + static_cast<int>(seed % 3);
    scm m = random_scm(n, 0.55, seed);
    const dag& g = m.structure.graph;
    rng r(derive_seed(seed, 11));
    int t = r.range(0, n - 1);
    std::vector<int> down = descendants(g, t);
    if (down.empty()) continue;
    int o = down[static_cast<std::size_t>(r.below(down.size()))];
    std::vector<int> med = mediators(g, t, o);
    if (med.empty() || med.size() > 2) continue;
    std::vector<int> z = mediation_adjustment_set(g, t, o, med);
    ++checked;

    int x = 1, x_alt = 0;
    // engine ground truth for E[Y_{x_alt, M_x} = 1]
    std::vector<int> mentioned = med;
    mentioned.push_back(t);
    mentioned.push_back(o);
    counterfactual_engine eng(m);
    cf_result truth = eng.expectation(mentioned, [&](const auto& w) {
      assignment hold;
      hold.set(t, x);
      std::uint32_t under_x = w.intervene(hold);
      assignment alt;
      alt.set(t, x_alt);
      for (int mv : med) alt.set(mv, state_bit(under_x, mv));
      return state_bit(w.intervene(alt), o) == 1 ? 1.0 : 0.0;
    });
    REQUIRE(truth.exact);

    joint_distribution obs = exact_joint(m);
    double formula = 0.0;
    bool defined = true;
    for (std::uint32_t zb = 0; zb < (1u << z.size()) && defined; ++zb) {
      assignment zc;
      for (std::size_t i = 0; i < z.size(); ++i)
        zc.set(z[i], static_cast<int>((zb >> i) & 1u));
      double pz = z.empty() ? 1.0 : obs.mass(zc);
      if (pz < 1e-14) continue;
      for (std::uint32_t mb = 0; mb < (1u << med.size()); ++mb) {
        assignment mc;
        for (std::size_t i = 0; i < med.size(); ++i)
          mc.set(med[i], static_cast<int>((mb >> i) & 1u));
        assignment y_cond = mc.merged(zc);
        y_cond.set(t, x_alt);
        assignment m_cond = zc;
        m_cond.set(t, x);
        if (obs.mass(y_cond) < 1e-14 || obs.mass(m_cond) < 1e-14) {
          defined = false;
          break;
        }
        formula += query(obs, {{o, 1}}, y_cond) * query(obs, mc, m_cond) * pz;
      }
    }
    if (!defined) continue;
    CHECK(std::abs(formula - truth.value) < 1e-9);
  }
  CHECK(checked >= 40);
}

TEST_CASE("parallel worlds share unaffected nodes and drop intervened ones") {
  // w -> t -> m -> y with confounder w -> y
  dag g = make_dag(4, {{0, 1}, {1, 2}, {2, 3}, {0, 3}});
  parallel_worlds pw(g, {{1}});  // world 1: do(t)
  CHECK(pw.node_id(1, 1) == -1);
  // the confounder is untouched by do(t), so both worlds read the same copy
  CHECK(pw.node_id(1, 0) == pw.node_id(0, 0));
  // downstream nodes get fresh copies
  CHECK(pw.node_id(1, 2) != pw.node_id(0, 2));
  CHECK(pw.node_id(1, 3) != pw.node_id(0, 3));
  CHECK(pw.node_id(0, 1) >= 0);
  // merged graph stays acyclic
  CHECK(topological_order(pw.graph()).size() ==
        static_cast<std::size_t>(pw.graph().node_count));
}
