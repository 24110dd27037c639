#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include <json.hpp>

#define TOML_HEADER_ONLY 1
#define TOML_ENABLE_FORMATTERS 0
#include <toml.hpp>

#include "impactlab/dataforge.hpp"

namespace impactlab {

namespace {

using nlohmann::json;

// Where a key came from, for diagnostics ("cfg.toml:12:3" or "cfg.json").
using Locator = std::function<std::string(const std::string& key)>;

double number(const json& v, const std::string& key, const Locator& at) {
  if (!v.is_number()) throw InvalidInput(at(key) + ": '" + key + "' must be a number");
  return v.get<double>();
}

std::uint64_t count(const json& v, const std::string& key, const Locator& at) {
  if (!v.is_number_integer() || v.get<long long>() < 0) {
    throw InvalidInput(at(key) + ": '" + key + "' must be a non-negative integer");
  }
  return v.get<std::uint64_t>();
}

Range range(const json& v, const std::string& key, const Locator& at) {
  if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number()) {
    throw InvalidInput(at(key) + ": '" + key + "' must be a [lo, hi] pair of numbers");
  }
  return {v[0].get<double>(), v[1].get<double>()};
}

const json& section(const json& root, const std::string& name, const Locator& at) {
  const json& s = root.at(name);
  if (!s.is_object()) throw InvalidInput(at(name) + ": '" + name + "' must be a table");
  return s;
}

GenConfig config_from_tree(const json& root, const Locator& at) {
  if (!root.is_object()) throw InvalidInput(at("") + ": config must be a table");
  GenConfig c;
  using Handler = std::function<void(const json&, const std::string&)>;
  const std::map<std::string, std::map<std::string, Handler>> schema = {
      {"",
       {{"n_trials", [&](const json& v, const std::string& k) { c.n_trials = count(v, k, at); }},
        {"seed", [&](const json& v, const std::string& k) { c.seed = count(v, k, at); }}}},
      {"body",
       {{"mass", [&](const json& v, const std::string& k) { c.mass = number(v, k, at); }},
        {"a", [&](const json& v, const std::string& k) { c.shape.a = number(v, k, at); }},
        {"b", [&](const json& v, const std::string& k) { c.shape.b = number(v, k, at); }},
        {"inertia", [&](const json& v, const std::string& k) { c.inertia = number(v, k, at); }}}},
      {"contact",
       {{"stiffness", [&](const json& v, const std::string& k) { c.stiffness = number(v, k, at); }},
        {"damping", [&](const json& v, const std::string& k) { c.damping = number(v, k, at); }},
        {"mu", [&](const json& v, const std::string& k) { c.mu_true = number(v, k, at); }},
        {"v_reg", [&](const json& v, const std::string& k) { c.v_reg = number(v, k, at); }}}},
      {"initial",
       {{"clearance", [&](const json& v, const std::string& k) { c.clearance = range(v, k, at); }},
        {"vx", [&](const json& v, const std::string& k) { c.vx = range(v, k, at); }},
        {"vy", [&](const json& v, const std::string& k) { c.vy = range(v, k, at); }},
        {"omega", [&](const json& v, const std::string& k) { c.omega = range(v, k, at); }},
        {"theta", [&](const json& v, const std::string& k) { c.theta = range(v, k, at); }}}},
      {"noise",
       {{"std",
         [&](const json& v, const std::string& k) {
           if (!v.is_array() || v.size() != 3) {
             throw InvalidInput(at(k) + ": '" + k + "' must list three numbers (xdot, ydot, thetadot)");
           }
           for (std::size_t i = 0; i < 3; ++i) c.noise_std[i] = number(v[i], k, at);
         }}}},
      {"integrator",
       {{"dt", [&](const json& v, const std::string& k) { c.dt = number(v, k, at); }},
        {"horizon", [&](const json& v, const std::string& k) { c.horizon = number(v, k, at); }},
        {"post_window", [&](const json& v, const std::string& k) { c.post_window = number(v, k, at); }},
        {"gravity", [&](const json& v, const std::string& k) { c.gravity = number(v, k, at); }}}},
  };

  for (const auto& [key, value] : root.items()) {
    const auto top = schema.at("").find(key);
    if (top != schema.at("").end()) {
      top->second(value, key);
      continue;
    }
    const auto sec = schema.find(key);
    if (sec == schema.end() || key.empty()) throw InvalidInput(at(key) + ": unknown key '" + key + "'");
    for (const auto& [sub, v] : section(root, key, at).items()) {
      const std::string path = key + "." + sub;
      const auto h = sec->second.find(sub);
      if (h == sec->second.end()) throw InvalidInput(at(path) + ": unknown key '" + path + "'");
      h->second(v, path);
    }
  }
  try {
    c.validate();
  } catch (const InvalidInput& e) {
    throw InvalidInput(at("") + ": " + e.what());
  }
  return c;
}

json toml_to_json(const toml::node& node, const std::string& path,
                  std::map<std::string, std::string>& where, const std::string& source) {
  const auto& src = node.source();
  where[path] = source + ":" + std::to_string(src.begin.line) + ":" + std::to_string(src.begin.column);
  if (const auto* t = node.as_table()) {
    json out = json::object();
    for (const auto& [k, v] : *t) {
      const std::string key(k.str());
      out[key] = toml_to_json(v, path.empty() ? key : path + "." + key, where, source);
    }
    return out;
  }
  if (const auto* a = node.as_array()) {
    json out = json::array();
    for (std::size_t i = 0; i < a->size(); ++i) {
      out.push_back(toml_to_json(*a->get(i), path + "[" + std::to_string(i) + "]", where, source));
    }
    return out;
  }
  if (const auto* v = node.as_integer()) return v->get();
  if (const auto* v = node.as_floating_point()) return v->get();
  if (const auto* v = node.as_boolean()) return v->get();
  if (const auto* v = node.as_string()) return v->get();
  throw InvalidInput(where[path] + ": unsupported value type for '" + path + "'");
}

}  // namespace

GenConfig parse_gen_config_toml(const std::string& text, const std::string& source) {
  toml::table table;
  try {
    table = toml::parse(text, source);
  } catch (const toml::parse_error& e) {
    const auto& b = e.source().begin;
    throw InvalidInput(source + ":" + std::to_string(b.line) + ":" + std::to_string(b.column) + ": " +
                       std::string(e.description()));
  }
  std::map<std::string, std::string> where;
  const json root = toml_to_json(table, "", where, source);
  return config_from_tree(root, [&](const std::string& key) {
    const auto it = where.find(key);
    return it == where.end() || key.empty() ? source : it->second;
  });
}

GenConfig parse_gen_config_json(const std::string& text, const std::string& source) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw InvalidInput(source + ": " + e.what());
  }
  return config_from_tree(root, [&](const std::string& key) {
    return key.empty() ? source : source + " (" + key + ")";
  });
}

GenConfig load_gen_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidInput("cannot read config " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return path.extension() == ".json" ? parse_gen_config_json(ss.str(), path.string())
                                     : parse_gen_config_toml(ss.str(), path.string());
}

std::string gen_config_to_json(const GenConfig& c) {
  nlohmann::ordered_json j;
  j["n_trials"] = c.n_trials;
  j["seed"] = c.seed;
  j["body"] = {{"mass", c.mass}, {"a", c.shape.a}, {"b", c.shape.b}, {"inertia", c.inertia}};
  j["contact"] = {{"stiffness", c.stiffness}, {"damping", c.damping}, {"mu", c.mu_true}, {"v_reg", c.v_reg}};
  j["initial"] = {{"clearance", {c.clearance.lo, c.clearance.hi}},
                  {"vx", {c.vx.lo, c.vx.hi}},
                  {"vy", {c.vy.lo, c.vy.hi}},
                  {"omega", {c.omega.lo, c.omega.hi}},
                  {"theta", {c.theta.lo, c.theta.hi}}};
  j["noise"] = {{"std", c.noise_std}};
  j["integrator"] = {{"dt", c.dt}, {"horizon", c.horizon}, {"post_window", c.post_window}, {"gravity", c.gravity}};
  return j.dump(2);
}

}  // namespace impactlab
