#include "gym/scm.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "gym/errors.hpp"
#include "gym/random.hpp"

namespace gym {

namespace {
constexpr int k_exact_limit = 16;
}

assignment::assignment(std::initializer_list<std::pair<int, int>> items) {
  for (const auto& [node, value] : items) set(node, value);
}

void assignment::set(int node, int value) {
  if (node < 0 || node >= 32) throw std::invalid_argument("assignment node out of range");
  if (value != 0 && value != 1) throw std::invalid_argument("assignment value must be 0 or 1");
  auto it = std::lower_bound(items_.begin(), items_.end(), std::pair<int, int>{node, -1});
  if (it != items_.end() && it->first == node)
    it->second = value;
  else
    items_.insert(it, {node, value});
}

std::optional<int> assignment::value(int node) const {
  auto it = std::lower_bound(items_.begin(), items_.end(), std::pair<int, int>{node, -1});
  if (it != items_.end() && it->first == node) return it->second;
  return std::nullopt;
}

std::uint32_t assignment::mask() const {
  std::uint32_t m = 0;
  for (const auto& [node, value] : items_) m |= 1u << node;
  return m;
}

std::uint32_t assignment::bits() const {
  std::uint32_t b = 0;
  for (const auto& [node, value] : items_)
    if (value) b |= 1u << node;
  return b;
}

bool assignment::disjoint_with(const assignment& other) const {
  return (mask() & other.mask()) == 0;
}

assignment assignment::merged(const assignment& other) const {
  assignment out = *this;
  for (const auto& [node, value] : other.items_) {
    if (auto mine = out.value(node); mine && *mine != value)
      throw std::invalid_argument("conflicting assignment merge");
    out.set(node, value);
  }
  return out;
}

double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

kernels::cpt_tables scm::tables() const {
  kernels::cpt_tables t;
  t.node_count = node_count();
  t.parents = parents;
  t.table.resize(static_cast<std::size_t>(t.node_count));
  for (int v = 0; v < t.node_count; ++v) {
    const auto& ps = parents[static_cast<std::size_t>(v)];
    if (ps.size() > 16) throw capacity_error("node has too many parents to tabulate");
    std::size_t configs = 1u << ps.size();
    auto& row = t.table[static_cast<std::size_t>(v)];
    row.resize(configs);
    for (std::size_t bits = 0; bits < configs; ++bits) {
      double z = bias[static_cast<std::size_t>(v)];
      for (std::size_t j = 0; j < ps.size(); ++j)
        if ((bits >> j) & 1u) z += weight[static_cast<std::size_t>(v)][j];
      row[bits] = logistic(z);
    }
  }
  return t;
}

double joint_distribution::mass(const assignment& a) const {
  std::uint32_t m = a.mask(), b = a.bits();
  double total = 0.0;
  for (std::size_t s = 0; s < p.size(); ++s)
    if ((static_cast<std::uint32_t>(s) & m) == b) total += p[s];
  return total;
}

scm instantiate_scm(const labeled_dag& structure, std::uint64_t seed,
                    const scm_params& params) {
  if (!(params.weight_min > 0.0) || !(params.weight_max >= params.weight_min))
    throw std::invalid_argument("weight magnitude range must satisfy 0 < min <= max");
  if (!(params.bias_max >= params.bias_min))
    throw std::invalid_argument("bias range must satisfy min <= max");

  scm m;
  m.structure = structure;
  int n = structure.graph.node_count;
  m.parents = structure.graph.parent_lists();
  for (auto& ps : m.parents) std::sort(ps.begin(), ps.end());

  // edge -> polarity lookup
  auto polarity_of = [&](int parent, int child) {
    for (std::size_t i = 0; i < structure.graph.edges.size(); ++i)
      if (structure.graph.edges[i].parent == parent && structure.graph.edges[i].child == child)
        return structure.polarity[i];
    throw std::invalid_argument("edge without polarity");
  };

  rng r(seed);
  m.weight.resize(static_cast<std::size_t>(n));
  m.bias.resize(static_cast<std::size_t>(n));
  for (int v = 0; v < n; ++v) {
    m.bias[static_cast<std::size_t>(v)] = r.uniform(params.bias_min, params.bias_max);
    for (int p : m.parents[static_cast<std::size_t>(v)]) {
      double magnitude = r.uniform(params.weight_min, params.weight_max);
      m.weight[static_cast<std::size_t>(v)].push_back(magnitude * polarity_of(p, v));
    }
  }
  return m;
}

double cpt(const scm& m, int node, const std::vector<int>& parent_values) {
  if (node < 0 || node >= m.node_count()) throw std::invalid_argument("node out of range");
  const auto& ps = m.parents[static_cast<std::size_t>(node)];
  if (parent_values.size() != ps.size())
    throw std::invalid_argument("parent value count mismatch");
  double z = m.bias[static_cast<std::size_t>(node)];
  for (std::size_t j = 0; j < ps.size(); ++j) {
    if (parent_values[j] != 0 && parent_values[j] != 1)
      throw std::invalid_argument("parent values must be 0 or 1");
    if (parent_values[j]) z += m.weight[static_cast<std::size_t>(node)][j];
  }
  return logistic(z);
}

joint_distribution exact_joint(const scm& m, bool parallel) {
  int n = m.node_count();
  if (n < 1 || n > k_exact_limit)
    throw capacity_error("exact joint supports 1.." + std::to_string(k_exact_limit) +
                         " nodes, got " + std::to_string(n));
  joint_distribution joint;
  joint.node_count = n;
  kernels::cpt_tables t = m.tables();
  if (parallel)
    kernels::joint_table_parallel(t, joint.p);
  else
    kernels::joint_table_serial(t, joint.p);
  return joint;
}

std::vector<std::uint32_t> sample(const scm& m, std::uint64_t count, std::uint64_t seed,
                                  bool parallel) {
  if (m.node_count() > 32) throw capacity_error("sampling supports at most 32 nodes");
  kernels::cpt_tables t = m.tables();
  std::vector<int> topo = topological_order(m.structure.graph);
  return parallel ? kernels::sample_rows_parallel(t, topo, count, seed)
                  : kernels::sample_rows_serial(t, topo, count, seed);
}

double query(const joint_distribution& joint, const assignment& targets,
             const assignment& conditions) {
  if (targets.empty()) throw std::invalid_argument("query needs at least one target");
  if (!targets.disjoint_with(conditions))
    throw std::invalid_argument("query targets overlap conditions");
  double denom = 0.0;
  if (conditions.empty())
    for (double v : joint.p) denom += v;
  else
    denom = joint.mass(conditions);
  if (denom <= 0.0)
    throw undefined_conditional_error("conditioning event has zero probability");
  return joint.mass(targets.merged(conditions)) / denom;
}

nlohmann::ordered_json labeled_dag_to_json(const labeled_dag& g) {
  nlohmann::ordered_json j;
  j["node_count"] = g.graph.node_count;
  j["mode"] = to_string(g.mode);
  j["labels"] = g.labels;
  nlohmann::ordered_json edges = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < g.graph.edges.size(); ++i)
    edges.push_back({g.graph.edges[i].parent, g.graph.edges[i].child, g.polarity[i]});
  j["edges"] = edges;
  return j;
}

labeled_dag labeled_dag_from_json(const nlohmann::json& j) {
  labeled_dag g;
  g.graph.node_count = j.at("node_count").get<int>();
  g.mode = semantics_mode_from_string(j.at("mode").get<std::string>());
  g.labels = j.at("labels").get<std::vector<std::string>>();
  for (const auto& e : j.at("edges")) {
    g.graph.edges.push_back({e.at(0).get<int>(), e.at(1).get<int>()});
    g.polarity.push_back(e.at(2).get<int>());
  }
  if (g.labels.size() != static_cast<std::size_t>(g.graph.node_count))
    throw data_error("graph label count mismatch");
  return g;
}

nlohmann::ordered_json scm_to_json(const scm& m) {
  nlohmann::ordered_json j;
  j["schema_version"] = k_schema_version;
  j["graph"] = labeled_dag_to_json(m.structure);
  nlohmann::ordered_json nodes = nlohmann::ordered_json::array();
  for (int v = 0; v < m.node_count(); ++v) {
    nlohmann::ordered_json node;
    node["name"] = m.structure.labels[static_cast<std::size_t>(v)];
    node["parents"] = m.parents[static_cast<std::size_t>(v)];
    node["weights"] = m.weight[static_cast<std::size_t>(v)];
    node["bias"] = m.bias[static_cast<std::size_t>(v)];
    nodes.push_back(node);
  }
  j["nodes"] = nodes;
  return j;
}

scm scm_from_json(const nlohmann::json& j) {
  check_schema_version(j.at("schema_version").get<std::string>());
  scm m;
  m.structure = labeled_dag_from_json(j.at("graph"));
  for (const auto& node : j.at("nodes")) {
    m.parents.push_back(node.at("parents").get<std::vector<int>>());
    m.weight.push_back(node.at("weights").get<std::vector<double>>());
    m.bias.push_back(node.at("bias").get<double>());
  }
  if (m.parents.size() != static_cast<std::size_t>(m.node_count()))
    throw data_error("model node count mismatch");
  for (std::size_t v = 0; v < m.parents.size(); ++v)
    if (m.parents[v].size() != m.weight[v].size())
      throw data_error("model weight count mismatch");
  return m;
}

void check_schema_version(const std::string& version) {
  std::string mine(k_schema_version);
  std::string major = version.substr(0, version.find('.'));
  std::string my_major = mine.substr(0, mine.find('.'));
  if (major != my_major)
    throw data_error("unsupported schema version: " + version + " (reader handles " +
                     my_major + ".x)");
}

}  // namespace gym
