#include "gym/solution.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>
#include <stdexcept>
#include <unordered_map>

#include "gym/errors.hpp"

namespace gym {

namespace {

void append_assignment(std::string& out, const assignment& a) {
  bool first = true;
  for (const auto& [node, value] : a.items()) {
    if (!first) out += ",";
    first = false;
    out += std::to_string(node);
    out += "=";
    out += std::to_string(value);
  }
}

std::string render_assignment(const assignment& a, const std::vector<std::string>& labels) {
  std::string out;
  bool first = true;
  for (const auto& [node, value] : a.items()) {
    if (!first) out += ", ";
    first = false;
    out += labels[static_cast<std::size_t>(node)];
    out += " = ";
    out += std::to_string(value);
  }
  return out;
}

}  // namespace

std::string prob_ref::key() const {
  std::string out = "P(";
  append_assignment(out, targets);
  if (!conditions.empty()) {
    out += "|";
    append_assignment(out, conditions);
  }
  out += ")";
  return out;
}

std::string prob_ref::render(const std::vector<std::string>& labels) const {
  std::string out = "P(";
  out += render_assignment(targets, labels);
  if (!conditions.empty()) {
    out += " | ";
    out += render_assignment(conditions, labels);
  }
  out += ")";
  return out;
}

int solution_expr::push(expr_node n) {
  nodes_.push_back(std::move(n));
  return static_cast<int>(nodes_.size() - 1);
}

int solution_expr::constant(double v) {
  expr_node n;
  n.kind = op::constant;
  n.value = v;
  return push(std::move(n));
}

int solution_expr::prob(const prob_ref& r) {
  int ref_id = -1;
  for (std::size_t i = 0; i < refs_.size(); ++i)
    if (refs_[i] == r) {
      ref_id = static_cast<int>(i);
      break;
    }
  if (ref_id < 0) {
    refs_.push_back(r);
    ref_id = static_cast<int>(refs_.size() - 1);
  }
  for (std::size_t i = 0; i < nodes_.size(); ++i)
    if (nodes_[i].kind == op::prob && nodes_[i].ref == ref_id) return static_cast<int>(i);
  expr_node n;
  n.kind = op::prob;
  n.ref = ref_id;
  return push(std::move(n));
}

int solution_expr::sum(std::vector<int> args) {
  if (args.empty()) throw std::invalid_argument("sum needs arguments");
  if (args.size() == 1) return args[0];
  expr_node n;
  n.kind = op::sum;
  n.args = std::move(args);
  return push(std::move(n));
}

int solution_expr::diff(int a, int b) {
  expr_node n;
  n.kind = op::diff;
  n.args = {a, b};
  return push(std::move(n));
}

int solution_expr::prod(std::vector<int> args) {
  if (args.empty()) throw std::invalid_argument("prod needs arguments");
  if (args.size() == 1) return args[0];
  expr_node n;
  n.kind = op::prod;
  n.args = std::move(args);
  return push(std::move(n));
}

int solution_expr::quot(int numerator, int denominator) {
  expr_node n;
  n.kind = op::quot;
  n.args = {numerator, denominator};
  return push(std::move(n));
}

int solution_expr::vmin(int a, int b) {
  expr_node n;
  n.kind = op::vmin;
  n.args = {a, b};
  return push(std::move(n));
}

int solution_expr::vmax(int a, int b) {
  expr_node n;
  n.kind = op::vmax;
  n.args = {a, b};
  return push(std::move(n));
}

int solution_expr::clamp01(int a) {
  expr_node n;
  n.kind = op::clamp01;
  n.args = {a};
  return push(std::move(n));
}

std::vector<int> solution_expr::ordered_refs() const {
  std::vector<int> order;
  std::vector<char> seen_ref(refs_.size(), 0);
  std::vector<char> seen_node(nodes_.size(), 0);
  std::function<void(int)> walk = [&](int id) {
    if (id < 0 || seen_node[static_cast<std::size_t>(id)]) return;
    seen_node[static_cast<std::size_t>(id)] = 1;
    const expr_node& n = nodes_[static_cast<std::size_t>(id)];
    for (int a : n.args) walk(a);
    if (n.kind == op::prob && !seen_ref[static_cast<std::size_t>(n.ref)]) {
      seen_ref[static_cast<std::size_t>(n.ref)] = 1;
      order.push_back(n.ref);
    }
  };
  walk(root);
  walk(root_upper);
  return order;
}

solution_expr::eval_result solution_expr::eval(int node, const ref_lookup& lookup) const {
  eval_result out;
  std::vector<char> missing_mark(refs_.size(), 0);
  bool degenerate = false;

  std::function<std::optional<double>(int)> go = [&](int id) -> std::optional<double> {
    const expr_node& n = nodes_[static_cast<std::size_t>(id)];
    switch (n.kind) {
      case op::constant: return n.value;
      case op::prob: {
        std::optional<double> v = lookup(refs_[static_cast<std::size_t>(n.ref)]);
        if (!v && !missing_mark[static_cast<std::size_t>(n.ref)]) {
          missing_mark[static_cast<std::size_t>(n.ref)] = 1;
          out.missing.push_back(n.ref);
        }
        return v;
      }
      case op::sum:
      case op::prod: {
        double acc = n.kind == op::sum ? 0.0 : 1.0;
        bool ok = true;
        for (int a : n.args) {
          std::optional<double> v = go(a);
          if (!v) {
            ok = false;
            continue;  // keep walking to report every missing ref
          }
          acc = n.kind == op::sum ? acc + *v : acc * *v;
        }
        if (!ok) return std::nullopt;
        return acc;
      }
      case op::diff: {
        std::optional<double> a = go(n.args[0]), b = go(n.args[1]);
        if (!a || !b) return std::nullopt;
        return *a - *b;
      }
      case op::quot: {
        std::optional<double> a = go(n.args[0]), b = go(n.args[1]);
        if (!a || !b) return std::nullopt;
        if (std::abs(*b) < 1e-12) {
          degenerate = true;
          return std::nullopt;
        }
        return *a / *b;
      }
      case op::vmin: {
        std::optional<double> a = go(n.args[0]), b = go(n.args[1]);
        if (!a || !b) return std::nullopt;
        return std::min(*a, *b);
      }
      case op::vmax: {
        std::optional<double> a = go(n.args[0]), b = go(n.args[1]);
        if (!a || !b) return std::nullopt;
        return std::max(*a, *b);
      }
      case op::clamp01: {
        std::optional<double> a = go(n.args[0]);
        if (!a) return std::nullopt;
        return std::min(1.0, std::max(0.0, *a));
      }
    }
    return std::nullopt;
  };

  if (node < 0 || node >= static_cast<int>(nodes_.size()))
    throw std::invalid_argument("expression node out of range");
  out.value = go(node);
  if (out.value && !std::isfinite(*out.value)) {
    out.value = std::nullopt;
    degenerate = true;
  }
  out.degenerate = degenerate && out.missing.empty();
  return out;
}

std::string solution_expr::to_text(int node, const std::vector<std::string>& labels) const {
  const expr_node& n = nodes_[static_cast<std::size_t>(node)];
  auto join = [&](const char* sep) {
    std::string out;
    for (std::size_t i = 0; i < n.args.size(); ++i) {
      if (i) out += sep;
      out += to_text(n.args[i], labels);
    }
    return out;
  };
  switch (n.kind) {
    case op::constant: {
      double v = n.value;
      if (v == static_cast<long long>(v))
        return std::to_string(static_cast<long long>(v));
      return format_fixed(v, 4);
    }
    case op::prob: return refs_[static_cast<std::size_t>(n.ref)].render(labels);
    case op::sum: return "(" + join(" + ") + ")";
    case op::diff: return "(" + join(" - ") + ")";
    case op::prod: return join(" * ");
    case op::quot: return "(" + join(" / ") + ")";
    case op::vmin: return "min(" + join(", ") + ")";
    case op::vmax: return "max(" + join(", ") + ")";
    case op::clamp01: return "clamp01(" + join(", ") + ")";
  }
  return "";
}

namespace {

const char* op_name(solution_expr::op o) {
  switch (o) {
    case solution_expr::op::constant: return "const";
    case solution_expr::op::prob: return "prob";
    case solution_expr::op::sum: return "sum";
    case solution_expr::op::diff: return "diff";
    case solution_expr::op::prod: return "prod";
    case solution_expr::op::quot: return "quot";
    case solution_expr::op::vmin: return "min";
    case solution_expr::op::vmax: return "max";
    case solution_expr::op::clamp01: return "clamp";
  }
  return "const";
}

solution_expr::op op_from_name(const std::string& s) {
  for (solution_expr::op o :
       {solution_expr::op::constant, solution_expr::op::prob, solution_expr::op::sum,
        solution_expr::op::diff, solution_expr::op::prod, solution_expr::op::quot,
        solution_expr::op::vmin, solution_expr::op::vmax, solution_expr::op::clamp01})
    if (s == op_name(o)) return o;
  throw data_error("unknown expression op: " + s);
}

nlohmann::ordered_json assignment_to_json(const assignment& a) {
  nlohmann::ordered_json out = nlohmann::ordered_json::array();
  for (const auto& [node, value] : a.items()) out.push_back({node, value});
  return out;
}

assignment assignment_from_json(const nlohmann::json& j) {
  assignment a;
  for (const auto& item : j) a.set(item.at(0).get<int>(), item.at(1).get<int>());
  return a;
}

}  // namespace

nlohmann::ordered_json solution_expr::to_json() const {
  nlohmann::ordered_json j;
  nlohmann::ordered_json refs = nlohmann::ordered_json::array();
  for (const prob_ref& r : refs_) {
    nlohmann::ordered_json jr;
    jr["targets"] = assignment_to_json(r.targets);
    jr["conditions"] = assignment_to_json(r.conditions);
    refs.push_back(jr);
  }
  j["refs"] = refs;
  nlohmann::ordered_json nodes = nlohmann::ordered_json::array();
  for (const expr_node& n : nodes_) {
    nlohmann::ordered_json jn;
    jn["op"] = op_name(n.kind);
    if (n.kind == op::constant) jn["value"] = n.value;
    if (n.kind == op::prob) jn["ref"] = n.ref;
    if (!n.args.empty()) jn["args"] = n.args;
    nodes.push_back(jn);
  }
  j["nodes"] = nodes;
  j["root"] = root;
  j["root_upper"] = root_upper;
  nlohmann::ordered_json jsteps = nlohmann::ordered_json::array();
  for (const solution_step& s : steps) {
    nlohmann::ordered_json js;
    js["text"] = s.text;
    js["node"] = s.node;
    jsteps.push_back(js);
  }
  j["steps"] = jsteps;
  return j;
}

solution_expr solution_expr::from_json(const nlohmann::json& j) {
  solution_expr e;
  for (const auto& jr : j.at("refs")) {
    prob_ref r;
    r.targets = assignment_from_json(jr.at("targets"));
    r.conditions = assignment_from_json(jr.at("conditions"));
    e.refs_.push_back(r);
  }
  for (const auto& jn : j.at("nodes")) {
    expr_node n;
    n.kind = op_from_name(jn.at("op").get<std::string>());
    if (jn.contains("value")) n.value = jn.at("value").get<double>();
    if (jn.contains("ref")) n.ref = jn.at("ref").get<int>();
    if (jn.contains("args")) n.args = jn.at("args").get<std::vector<int>>();
    e.nodes_.push_back(n);
  }
  e.root = j.at("root").get<int>();
  e.root_upper = j.at("root_upper").get<int>();
  for (const auto& js : j.at("steps")) {
    solution_step s;
    s.text = js.at("text").get<std::string>();
    s.node = js.at("node").get<int>();
    e.steps.push_back(s);
  }
  // basic structural validation
  int node_count = static_cast<int>(e.nodes_.size());
  for (const expr_node& n : e.nodes_) {
    if (n.kind == op::prob && (n.ref < 0 || n.ref >= static_cast<int>(e.refs_.size())))
      throw data_error("expression ref out of range");
    for (int a : n.args)
      if (a < 0 || a >= node_count) throw data_error("expression arg out of range");
  }
  if (e.root < 0 || e.root >= node_count) throw data_error("expression root out of range");
  if (e.root_upper >= node_count) throw data_error("expression upper root out of range");
  return e;
}

double round_to(double v, int digits) {
  double scale = std::pow(10.0, digits);
  double r = std::round(v * scale) / scale;
  return r == 0.0 ? 0.0 : r;  // normalize -0
}

std::string format_fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  std::string s(buf);
  if (s == "-0" || s.rfind("-0.", 0) == 0) {
    bool all_zero = true;
    for (char c : s)
      if (c >= '1' && c <= '9') all_zero = false;
    if (all_zero) s.erase(0, 1);
  }
  return s;
}

solution_expr::ref_lookup statement_lookup(const std::vector<prob_statement>& statements) {
  auto table = std::make_shared<std::unordered_map<std::string, double>>();
  for (const prob_statement& s : statements) (*table)[s.ref.key()] = s.value;
  return [table](const prob_ref& r) -> std::optional<double> {
    auto it = table->find(r.key());
    if (it == table->end()) return std::nullopt;
    return it->second;
  };
}

}  // namespace gym
