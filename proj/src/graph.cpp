#include "gym/graph.hpp"

#include <algorithm>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>
#include <stdexcept>

#include "gym/errors.hpp"
#include "gym/random.hpp"

namespace gym {

namespace {

constexpr int k_max_nodes = 1024;

void validate_edges(const dag& g) {
  for (const edge& e : g.edges) {
    if (e.parent < 0 || e.parent >= g.node_count || e.child < 0 || e.child >= g.node_count)
      throw std::invalid_argument("edge endpoint out of range");
    if (e.parent == e.child) throw std::invalid_argument("self-loop");
  }
  for (std::size_t i = 1; i < g.edges.size(); ++i)
    if (g.edges[i - 1] == g.edges[i]) throw std::invalid_argument("duplicate edge");
}

void sort_edges(dag& g) { std::sort(g.edges.begin(), g.edges.end()); }

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

}  // namespace

std::vector<std::vector<int>> dag::parent_lists() const {
  std::vector<std::vector<int>> out(static_cast<std::size_t>(node_count));
  for (const edge& e : edges) out[static_cast<std::size_t>(e.child)].push_back(e.parent);
  return out;
}

std::vector<std::vector<int>> dag::child_lists() const {
  std::vector<std::vector<int>> out(static_cast<std::size_t>(node_count));
  for (const edge& e : edges) out[static_cast<std::size_t>(e.parent)].push_back(e.child);
  return out;
}

bool dag::has_edge(int parent, int child) const {
  return std::binary_search(edges.begin(), edges.end(), edge{parent, child});
}

const char* to_string(semantics_mode m) {
  switch (m) {
    case semantics_mode::real: return "real";
    case semantics_mode::random: return "random";
    case semantics_mode::fake: return "fake";
  }
  return "fake";
}

semantics_mode semantics_mode_from_string(const std::string& s) {
  if (s == "real") return semantics_mode::real;
  if (s == "random") return semantics_mode::random;
  if (s == "fake") return semantics_mode::fake;
  throw config_error("unknown semantics mode: " + s);
}

std::vector<int> topological_order(const dag& g) {
  std::size_t n = static_cast<std::size_t>(g.node_count);
  std::vector<int> in_degree(n, 0);
  auto children = g.child_lists();
  for (const edge& e : g.edges) ++in_degree[static_cast<std::size_t>(e.child)];

  std::vector<int> order;
  order.reserve(n);
  std::vector<char> placed(n, 0);
  for (std::size_t step = 0; step < n; ++step) {
    int pick = -1;
    for (int v = 0; v < g.node_count; ++v) {
      if (!placed[static_cast<std::size_t>(v)] && in_degree[static_cast<std::size_t>(v)] == 0) {
        pick = v;
        break;
      }
    }
    if (pick < 0) {
      // Every remaining node has an unprocessed parent, so the remainder
      // contains a cycle; walk parent links until a node repeats to name
      // one of its edges.
      auto parents = g.parent_lists();
      int v = 0;
      while (placed[static_cast<std::size_t>(v)]) ++v;
      std::vector<char> seen(n, 0);
      int prev = -1;
      while (!seen[static_cast<std::size_t>(v)]) {
        seen[static_cast<std::size_t>(v)] = 1;
        for (int p : parents[static_cast<std::size_t>(v)]) {
          if (!placed[static_cast<std::size_t>(p)]) {
            prev = v;
            v = p;
            break;
          }
        }
      }
      throw cycle_error("graph has a cycle through edge " + std::to_string(v) + " -> " +
                        std::to_string(prev));
    }
    placed[static_cast<std::size_t>(pick)] = 1;
    order.push_back(pick);
    for (int c : children[static_cast<std::size_t>(pick)])
      --in_degree[static_cast<std::size_t>(c)];
  }
  return order;
}

dag generate_dag(int node_count, double edge_density, std::uint64_t seed, int max_in_degree) {
  if (node_count < 1 || node_count > k_max_nodes)
    throw std::invalid_argument("node_count out of range");
  if (!(edge_density >= 0.0 && edge_density <= 1.0))
    throw std::invalid_argument("edge_density must lie in [0, 1]");
  if (max_in_degree < 1) throw std::invalid_argument("max_in_degree must be positive");

  rng r(seed);
  std::vector<int> rank(static_cast<std::size_t>(node_count));
  for (int i = 0; i < node_count; ++i) rank[static_cast<std::size_t>(i)] = i;
  r.shuffle(rank);

  std::vector<std::vector<int>> parents(static_cast<std::size_t>(node_count));
  for (int i = 0; i < node_count; ++i)
    for (int j = i + 1; j < node_count; ++j)
      if (r.coin(edge_density))
        parents[static_cast<std::size_t>(rank[static_cast<std::size_t>(j)])].push_back(
            rank[static_cast<std::size_t>(i)]);

  dag g;
  g.node_count = node_count;
  for (int v = 0; v < node_count; ++v) {
    auto& ps = parents[static_cast<std::size_t>(v)];
    if (static_cast<int>(ps.size()) > max_in_degree) {
      std::sort(ps.begin(), ps.end());
      r.shuffle(ps);
      ps.resize(static_cast<std::size_t>(max_in_degree));
    }
    for (int p : ps) g.edges.push_back({p, v});
  }
  sort_edges(g);
  validate_edges(g);
  topological_order(g);
  return g;
}

vocabulary vocabulary::parse(const std::string& text) {
  vocabulary v;
  std::istringstream in(text);
  std::string raw;
  int line_no = 0;
  auto fail = [&](const std::string& msg) {
    throw data_error("vocabulary line " + std::to_string(line_no) + ": " + msg);
  };

  std::vector<edge> edges;
  std::vector<int> polarity;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string line = raw;
    if (std::size_t hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    if (trim(line).empty()) continue;

    std::vector<std::string> fields;
    std::size_t start = 0;
    while (true) {
      std::size_t tab = line.find('\t', start);
      fields.push_back(trim(line.substr(start, tab - start)));
      if (tab == std::string::npos) break;
      start = tab + 1;
    }
    while (!fields.empty() && fields.back().empty()) fields.pop_back();

    if (fields.size() != 1 && fields.size() != 3)
      fail("expected 'name' or 'name<TAB>parent<TAB>+|-'");
    const std::string& name = fields[0];
    if (name.empty()) fail("empty variable name");

    auto intern = [&](const std::string& s) {
      for (std::size_t i = 0; i < v.names_.size(); ++i)
        if (v.names_[i] == s) return static_cast<int>(i);
      v.names_.push_back(s);
      return static_cast<int>(v.names_.size() - 1);
    };

    if (fields.size() == 1) {
      intern(name);
      continue;
    }
    const std::string& parent_name = fields[1];
    if (parent_name.empty()) fail("empty parent name");
    std::optional<int> parent = v.index_of(parent_name);
    if (!parent) fail("parent '" + parent_name + "' used before it is introduced");
    int child = intern(name);
    if (*parent == child) fail("variable cannot cause itself");
    if (fields[2] != "+" && fields[2] != "-") fail("polarity must be '+' or '-'");
    edge e{*parent, child};
    for (const edge& known : edges)
      if (known == e) fail("duplicate relation");
    edges.push_back(e);
    polarity.push_back(fields[2] == "+" ? 1 : -1);
  }

  // keep edge/polarity alignment while normalizing edge order
  std::vector<std::size_t> idx(edges.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  std::sort(idx.begin(), idx.end(),
            [&](std::size_t a, std::size_t b) { return edges[a] < edges[b]; });
  v.graph_.node_count = static_cast<int>(v.names_.size());
  for (std::size_t i : idx) {
    v.graph_.edges.push_back(edges[i]);
    v.polarity_.push_back(polarity[i]);
  }
  validate_edges(v.graph_);
  try {
    topological_order(v.graph_);
  } catch (const cycle_error&) {
    throw data_error("vocabulary relations form a cycle");
  }
  return v;
}

vocabulary vocabulary::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw data_error("cannot open vocabulary file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse(buf.str());
}

std::optional<int> vocabulary::index_of(const std::string& name) const {
  for (std::size_t i = 0; i < names_.size(); ++i)
    if (names_[i] == name) return static_cast<int>(i);
  return std::nullopt;
}

std::optional<int> vocabulary::relation_polarity(int parent, int child) const {
  for (std::size_t i = 0; i < graph_.edges.size(); ++i)
    if (graph_.edges[i].parent == parent && graph_.edges[i].child == child)
      return polarity_[i];
  return std::nullopt;
}

namespace {

std::string fake_label(rng& r) {
  std::string s(4, 'a');
  for (char& c : s) c = static_cast<char>('a' + r.below(26));
  return s;
}

std::vector<std::string> fake_labels(int count, rng& r) {
  std::set<std::string> used;
  std::vector<std::string> out;
  while (static_cast<int>(out.size()) < count) {
    std::string s = fake_label(r);
    if (used.insert(s).second) out.push_back(s);
  }
  return out;
}

std::vector<int> coin_polarities(std::size_t count, rng& r) {
  std::vector<int> out(count);
  for (int& p : out) p = r.coin() ? 1 : -1;
  return out;
}

// randomized backtracking search for an injective embedding of g into the
// vocabulary relation graph that maps every edge onto a known relation
bool embed(const dag& g, const vocabulary& vocab, rng& r, std::vector<int>& assign) {
  int n = g.node_count;
  auto parents = g.parent_lists();
  auto children = g.child_lists();

  // most-constrained-first: order nodes by descending degree
  std::vector<int> order(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    auto deg = [&](int v) {
      return parents[static_cast<std::size_t>(v)].size() +
             children[static_cast<std::size_t>(v)].size();
    };
    return deg(a) > deg(b);
  });

  assign.assign(static_cast<std::size_t>(n), -1);
  std::vector<char> used(static_cast<std::size_t>(vocab.size()), 0);

  std::vector<std::vector<int>> candidates(static_cast<std::size_t>(n));
  for (int v = 0; v < n; ++v) {
    for (int w = 0; w < vocab.size(); ++w)
      candidates[static_cast<std::size_t>(v)].push_back(w);
    r.shuffle(candidates[static_cast<std::size_t>(v)]);
  }

  std::function<bool(std::size_t)> place = [&](std::size_t depth) {
    if (depth == order.size()) return true;
    int v = order[depth];
    for (int w : candidates[static_cast<std::size_t>(v)]) {
      if (used[static_cast<std::size_t>(w)]) continue;
      bool ok = true;
      for (int p : parents[static_cast<std::size_t>(v)]) {
        int pw = assign[static_cast<std::size_t>(p)];
        if (pw >= 0 && !vocab.relation_polarity(pw, w)) { ok = false; break; }
      }
      if (ok)
        for (int c : children[static_cast<std::size_t>(v)]) {
          int cw = assign[static_cast<std::size_t>(c)];
          if (cw >= 0 && !vocab.relation_polarity(w, cw)) { ok = false; break; }
        }
      if (!ok) continue;
      assign[static_cast<std::size_t>(v)] = w;
      used[static_cast<std::size_t>(w)] = 1;
      if (place(depth + 1)) return true;
      assign[static_cast<std::size_t>(v)] = -1;
      used[static_cast<std::size_t>(w)] = 0;
    }
    return false;
  };
  return place(0);
}

}  // namespace

labeled_dag assign_semantics(const dag& g, semantics_mode mode, const vocabulary& vocab,
                             std::uint64_t seed) {
  validate_edges(g);
  rng r(seed);
  labeled_dag out;
  out.graph = g;
  out.mode = mode;

  switch (mode) {
    case semantics_mode::fake: {
      out.labels = fake_labels(g.node_count, r);
      out.polarity = coin_polarities(g.edges.size(), r);
      break;
    }
    case semantics_mode::random: {
      if (vocab.size() < g.node_count)
        throw data_error("vocabulary too small for graph");
      std::vector<int> pool(static_cast<std::size_t>(vocab.size()));
      for (int i = 0; i < vocab.size(); ++i) pool[static_cast<std::size_t>(i)] = i;
      r.shuffle(pool);
      for (int i = 0; i < g.node_count; ++i)
        out.labels.push_back(vocab.name(pool[static_cast<std::size_t>(i)]));
      out.polarity = coin_polarities(g.edges.size(), r);
      break;
    }
    case semantics_mode::real: {
      std::vector<int> assign;
      if (!embed(g, vocab, r, assign))
        throw data_error("no vocabulary embedding for graph");
      for (int i = 0; i < g.node_count; ++i)
        out.labels.push_back(vocab.name(assign[static_cast<std::size_t>(i)]));
      for (const edge& e : g.edges)
        out.polarity.push_back(*vocab.relation_polarity(
            assign[static_cast<std::size_t>(e.parent)],
            assign[static_cast<std::size_t>(e.child)]));
      break;
    }
  }
  return out;
}

labeled_dag sample_vocabulary_subgraph(const vocabulary& vocab, int node_count,
                                       std::uint64_t seed) {
  if (node_count < 1 || node_count > vocab.size())
    throw std::invalid_argument("node_count out of range for vocabulary");
  rng r(seed);
  std::vector<int> pool(static_cast<std::size_t>(vocab.size()));
  for (int i = 0; i < vocab.size(); ++i) pool[static_cast<std::size_t>(i)] = i;
  r.shuffle(pool);
  std::vector<int> chosen(pool.begin(), pool.begin() + node_count);
  std::sort(chosen.begin(), chosen.end());

  std::vector<int> back(static_cast<std::size_t>(vocab.size()), -1);
  for (int i = 0; i < node_count; ++i)
    back[static_cast<std::size_t>(chosen[static_cast<std::size_t>(i)])] = i;

  labeled_dag out;
  out.mode = semantics_mode::real;
  out.graph.node_count = node_count;
  for (int w : chosen) out.labels.push_back(vocab.name(w));
  const dag& rel = vocab.relation_graph();
  for (std::size_t i = 0; i < rel.edges.size(); ++i) {
    int p = back[static_cast<std::size_t>(rel.edges[i].parent)];
    int c = back[static_cast<std::size_t>(rel.edges[i].child)];
    if (p >= 0 && c >= 0) {
      out.graph.edges.push_back({p, c});
      out.polarity.push_back(vocab.polarities()[i]);
    }
  }
  std::vector<std::size_t> idx(out.graph.edges.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    return out.graph.edges[a] < out.graph.edges[b];
  });
  dag sorted_graph;
  sorted_graph.node_count = node_count;
  std::vector<int> sorted_pol;
  for (std::size_t i : idx) {
    sorted_graph.edges.push_back(out.graph.edges[i]);
    sorted_pol.push_back(out.polarity[i]);
  }
  out.graph = std::move(sorted_graph);
  out.polarity = std::move(sorted_pol);
  return out;
}

}  // namespace gym
