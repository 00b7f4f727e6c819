#include "gym/identify.hpp"

#include <algorithm>
#include <deque>
#include <stdexcept>

namespace gym {

namespace {

void check_node(const dag& g, int v) {
  if (v < 0 || v >= g.node_count) throw std::invalid_argument("node out of range");
}

std::vector<int> closure(const dag& g, int start, bool forward) {
  auto next = forward ? g.child_lists() : g.parent_lists();
  std::vector<char> seen(static_cast<std::size_t>(g.node_count), 0);
  std::deque<int> frontier{start};
  while (!frontier.empty()) {
    int v = frontier.front();
    frontier.pop_front();
    for (int u : next[static_cast<std::size_t>(v)]) {
      if (!seen[static_cast<std::size_t>(u)]) {
        seen[static_cast<std::size_t>(u)] = 1;
        frontier.push_back(u);
      }
    }
  }
  std::vector<int> out;
  for (int v = 0; v < g.node_count; ++v)
    if (seen[static_cast<std::size_t>(v)] && v != start) out.push_back(v);
  return out;
}

// Directional reachability: explores (node, direction) states, where `up`
// means the trail arrives at the node from one of its children.
std::vector<char> reachable_from(const dag& g, const std::vector<int>& sources,
                                 const std::vector<int>& z) {
  std::size_t n = static_cast<std::size_t>(g.node_count);
  auto parents = g.parent_lists();
  auto children = g.child_lists();

  std::vector<char> in_z(n, 0);
  for (int v : z) in_z[static_cast<std::size_t>(v)] = 1;

  // nodes that are in z or have a descendant in z (collider openers)
  std::vector<char> anc_z(n, 0);
  {
    std::deque<int> frontier;
    for (int v : z) {
      anc_z[static_cast<std::size_t>(v)] = 1;
      frontier.push_back(v);
    }
    while (!frontier.empty()) {
      int v = frontier.front();
      frontier.pop_front();
      for (int p : parents[static_cast<std::size_t>(v)])
        if (!anc_z[static_cast<std::size_t>(p)]) {
          anc_z[static_cast<std::size_t>(p)] = 1;
          frontier.push_back(p);
        }
    }
  }

  constexpr int k_up = 0, k_down = 1;
  std::vector<char> visited(n * 2, 0);
  std::vector<char> reached(n, 0);
  std::deque<std::pair<int, int>> queue;
  for (int s : sources) queue.emplace_back(s, k_up);

  while (!queue.empty()) {
    auto [v, dir] = queue.front();
    queue.pop_front();
    char& mark = visited[static_cast<std::size_t>(v) * 2 + static_cast<std::size_t>(dir)];
    if (mark) continue;
    mark = 1;
    if (!in_z[static_cast<std::size_t>(v)]) reached[static_cast<std::size_t>(v)] = 1;

    if (dir == k_up) {
      if (!in_z[static_cast<std::size_t>(v)]) {
        for (int p : parents[static_cast<std::size_t>(v)]) queue.emplace_back(p, k_up);
        for (int c : children[static_cast<std::size_t>(v)]) queue.emplace_back(c, k_down);
      }
    } else {
      if (!in_z[static_cast<std::size_t>(v)])
        for (int c : children[static_cast<std::size_t>(v)]) queue.emplace_back(c, k_down);
      if (anc_z[static_cast<std::size_t>(v)])
        for (int p : parents[static_cast<std::size_t>(v)]) queue.emplace_back(p, k_up);
    }
  }
  return reached;
}

void check_disjoint_sets(const dag& g, const std::vector<int>& a, const std::vector<int>& b,
                         const std::vector<int>& z) {
  std::vector<int> tags(static_cast<std::size_t>(g.node_count), 0);
  auto mark = [&](const std::vector<int>& s, int tag) {
    for (int v : s) {
      check_node(g, v);
      if (tags[static_cast<std::size_t>(v)] != 0 && tags[static_cast<std::size_t>(v)] != tag)
        throw std::invalid_argument("d-separation sets must be disjoint");
      tags[static_cast<std::size_t>(v)] = tag;
    }
  };
  mark(a, 1);
  mark(b, 2);
  mark(z, 3);
  if (a.empty() || b.empty()) throw std::invalid_argument("d-separation needs nonempty a and b");
}

// subsets of `pool` visited in (size, lexicographic) order; returns false
// when exhausted
bool next_subset(const std::vector<int>& pool, std::vector<int>& picked) {
  std::size_t n = pool.size(), k = picked.size();
  // advance combination of the current size
  if (k > 0) {
    std::vector<std::size_t> idx(k);
    for (std::size_t i = 0, j = 0; i < k; ++i) {
      while (pool[j] != picked[i]) ++j;
      idx[i] = j;
    }
    std::size_t i = k;
    while (i > 0) {
      --i;
      if (idx[i] < n - (k - i)) {
        ++idx[i];
        for (std::size_t t = i + 1; t < k; ++t) idx[t] = idx[t - 1] + 1;
        for (std::size_t t = 0; t < k; ++t) picked[t] = pool[idx[t]];
        return true;
      }
    }
  }
  // grow to the next size
  if (k + 1 > n) return false;
  picked.resize(k + 1);
  for (std::size_t t = 0; t <= k; ++t) picked[t] = pool[t];
  return true;
}

dag remove_outgoing(const dag& g, int node) {
  dag out;
  out.node_count = g.node_count;
  for (const edge& e : g.edges)
    if (e.parent != node) out.edges.push_back(e);
  return out;
}

}  // namespace

std::vector<int> descendants(const dag& g, int node) {
  check_node(g, node);
  return closure(g, node, true);
}

std::vector<int> ancestors(const dag& g, int node) {
  check_node(g, node);
  return closure(g, node, false);
}

bool is_d_separated(const dag& g, const std::vector<int>& a, const std::vector<int>& b,
                    const std::vector<int>& z) {
  check_disjoint_sets(g, a, b, z);
  std::vector<char> reached = reachable_from(g, a, z);
  for (int v : b)
    if (reached[static_cast<std::size_t>(v)]) return false;
  return true;
}

adjustment_result backdoor_sets(const dag& g, int treatment, int outcome) {
  check_node(g, treatment);
  check_node(g, outcome);
  if (treatment == outcome) throw std::invalid_argument("treatment equals outcome");

  std::vector<int> banned = descendants(g, treatment);
  std::vector<char> excluded(static_cast<std::size_t>(g.node_count), 0);
  for (int v : banned) excluded[static_cast<std::size_t>(v)] = 1;
  excluded[static_cast<std::size_t>(treatment)] = 1;
  excluded[static_cast<std::size_t>(outcome)] = 1;
  std::vector<int> pool;
  for (int v = 0; v < g.node_count; ++v)
    if (!excluded[static_cast<std::size_t>(v)]) pool.push_back(v);

  dag pruned = remove_outgoing(g, treatment);
  adjustment_result result;
  result.mediator_set = mediators(g, treatment, outcome);
  std::vector<int> picked;
  while (true) {
    if (is_d_separated(pruned, {treatment}, {outcome}, picked)) {
      result.backdoor_set = picked;
      result.minimal = true;
      return result;
    }
    if (!next_subset(pool, picked))
      throw std::logic_error("backdoor search exhausted");  // parents always qualify
  }
}

std::vector<int> mediators(const dag& g, int treatment, int outcome) {
  check_node(g, treatment);
  check_node(g, outcome);
  std::vector<int> down = descendants(g, treatment);
  std::vector<int> up = ancestors(g, outcome);
  std::vector<int> out;
  std::set_intersection(down.begin(), down.end(), up.begin(), up.end(),
                        std::back_inserter(out));
  out.erase(std::remove_if(out.begin(), out.end(),
                           [&](int v) { return v == treatment || v == outcome; }),
            out.end());
  return out;
}

parallel_worlds::parallel_worlds(const dag& g,
                                 const std::vector<std::vector<int>>& interventions) {
  int n = g.node_count;
  std::size_t worlds = interventions.size() + 1;
  ids_.assign(worlds, std::vector<int>(static_cast<std::size_t>(n), -1));
  for (int v = 0; v < n; ++v) ids_[0][static_cast<std::size_t>(v)] = v;
  int next_id = n;

  std::vector<std::vector<char>> intervened(worlds,
                                            std::vector<char>(static_cast<std::size_t>(n), 0));
  for (std::size_t w = 1; w < worlds; ++w) {
    std::vector<char> affected(static_cast<std::size_t>(n), 0);
    for (int t : interventions[w - 1]) {
      check_node(g, t);
      intervened[w][static_cast<std::size_t>(t)] = 1;
      affected[static_cast<std::size_t>(t)] = 1;
      for (int d : descendants(g, t)) affected[static_cast<std::size_t>(d)] = 1;
    }
    for (int v = 0; v < n; ++v) {
      if (intervened[w][static_cast<std::size_t>(v)])
        ids_[w][static_cast<std::size_t>(v)] = -1;
      else if (affected[static_cast<std::size_t>(v)])
        ids_[w][static_cast<std::size_t>(v)] = next_id++;
      else
        ids_[w][static_cast<std::size_t>(v)] = v;  // shares the factual copy
    }
  }

  // one exogenous node per variable with more than one live copy
  std::vector<int> exo(static_cast<std::size_t>(n), -1);
  for (int v = 0; v < n; ++v) {
    int copies = 0;
    for (std::size_t w = 0; w < worlds; ++w) {
      int id = ids_[w][static_cast<std::size_t>(v)];
      if (id >= 0 && (w == 0 || id != ids_[0][static_cast<std::size_t>(v)])) ++copies;
    }
    if (copies > 1) exo[static_cast<std::size_t>(v)] = next_id++;
  }

  graph_.node_count = next_id;
  auto add_edge = [&](int p, int c) { graph_.edges.push_back({p, c}); };
  for (const edge& e : g.edges) add_edge(e.parent, e.child);
  for (std::size_t w = 1; w < worlds; ++w) {
    for (int v = 0; v < n; ++v) {
      int id = ids_[w][static_cast<std::size_t>(v)];
      if (id < 0 || id < n) continue;  // removed or shared with factual
      for (const edge& e : g.edges) {
        if (e.child != v) continue;
        int p = ids_[w][static_cast<std::size_t>(e.parent)];
        if (p >= 0) add_edge(p, id);
      }
    }
  }
  for (int v = 0; v < n; ++v) {
    int u = exo[static_cast<std::size_t>(v)];
    if (u < 0) continue;
    add_edge(u, v);
    for (std::size_t w = 1; w < worlds; ++w) {
      int id = ids_[w][static_cast<std::size_t>(v)];
      if (id >= n) add_edge(u, id);
    }
  }
  std::sort(graph_.edges.begin(), graph_.edges.end());
  graph_.edges.erase(std::unique(graph_.edges.begin(), graph_.edges.end()),
                     graph_.edges.end());
}

int parallel_worlds::node_id(int world, int v) const {
  return ids_[static_cast<std::size_t>(world)][static_cast<std::size_t>(v)];
}

namespace {

std::vector<int> non_descendant_pool(const dag& g, const std::vector<int>& treatments,
                                     const std::vector<int>& also_excluded) {
  std::vector<char> excluded(static_cast<std::size_t>(g.node_count), 0);
  for (int t : treatments) {
    excluded[static_cast<std::size_t>(t)] = 1;
    for (int d : descendants(g, t)) excluded[static_cast<std::size_t>(d)] = 1;
  }
  for (int v : also_excluded) excluded[static_cast<std::size_t>(v)] = 1;
  std::vector<int> pool;
  for (int v = 0; v < g.node_count; ++v)
    if (!excluded[static_cast<std::size_t>(v)]) pool.push_back(v);
  return pool;
}

}  // namespace

std::vector<int> joint_adjustment_set(const dag& g, const std::vector<int>& treatments,
                                      int outcome) {
  check_node(g, outcome);
  if (treatments.empty()) throw std::invalid_argument("need at least one treatment");
  for (int t : treatments) {
    check_node(g, t);
    if (t == outcome) throw std::invalid_argument("treatment equals outcome");
  }

  parallel_worlds pw(g, {treatments});
  std::vector<int> b;
  for (int t : treatments) b.push_back(pw.node_id(0, t));
  int y_cf = pw.node_id(1, outcome);
  if (y_cf < 0) throw std::invalid_argument("outcome is intervened");

  std::vector<int> pool = non_descendant_pool(g, treatments, {outcome});
  std::vector<int> picked;
  while (true) {
    if (is_d_separated(pw.graph(), {y_cf}, b, picked)) return picked;
    if (!next_subset(pool, picked))
      throw std::logic_error("joint adjustment search exhausted");
  }
}

std::vector<int> mediation_adjustment_set(const dag& g, int treatment, int outcome,
                                          const std::vector<int>& mediator_set) {
  check_node(g, treatment);
  check_node(g, outcome);
  if (mediator_set.empty()) throw std::invalid_argument("mediator set is empty");
  for (int m : mediator_set) {
    check_node(g, m);
    if (m == treatment || m == outcome)
      throw std::invalid_argument("mediator overlaps treatment or outcome");
  }

  std::vector<int> joint = mediator_set;
  joint.push_back(treatment);
  std::sort(joint.begin(), joint.end());
  parallel_worlds pw(g, {{treatment}, joint});

  int x0 = pw.node_id(0, treatment);
  int y1 = pw.node_id(1, outcome);
  int y2 = pw.node_id(2, outcome);
  std::vector<int> m0, m1;
  for (int m : mediator_set) {
    m0.push_back(pw.node_id(0, m));
    m1.push_back(pw.node_id(1, m));
  }
  std::vector<int> xm0 = m0;
  xm0.push_back(x0);

  std::vector<int> also = mediator_set;
  also.push_back(outcome);
  std::vector<int> pool = non_descendant_pool(g, {treatment}, also);

  auto valid = [&](const std::vector<int>& z) {
    const dag& p = pw.graph();
    return is_d_separated(p, {y2}, xm0, z) && is_d_separated(p, {y2}, m1, z) &&
           is_d_separated(p, m1, {x0}, z) && is_d_separated(p, {y1}, {x0}, z);
  };

  std::vector<int> picked;
  while (true) {
    if (valid(picked)) return picked;
    if (!next_subset(pool, picked))
      throw std::logic_error("mediation adjustment search exhausted");
  }
}

}  // namespace gym
