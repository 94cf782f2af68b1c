#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "thermocap/error.hpp"
#include "thermocap/geometry.hpp"
#include "thermocap/refinement.hpp"

namespace thermocap {

enum class Mode { Capacity, Dimension, Hit, GammaStar, Codimension, FullBattery };

inline const char* to_string(Mode m) {
  switch (m) {
    case Mode::Capacity: return "capacity";
    case Mode::Dimension: return "dimension";
    case Mode::Hit: return "hit";
    case Mode::GammaStar: return "gamma_star";
    case Mode::Codimension: return "codimension";
    case Mode::FullBattery: return "full_battery";
  }
  return "?";
}

inline std::optional<Mode> parse_mode(const std::string& s) {
  for (Mode m : {Mode::Capacity, Mode::Dimension, Mode::Hit, Mode::GammaStar, Mode::Codimension, Mode::FullBattery})
    if (s == to_string(m)) return m;
  return std::nullopt;
}

inline bool operator==(const RefinementSchedule& a, const RefinementSchedule& b) { return a.levels == b.levels; }

/// Default refinement schedule: parabolic, h = 2^-1 .. 2^-5, time floor 1/64.
inline RefinementSchedule default_schedule() { return parabolic_schedule(0.5, 0.5, 5, 1.0 / 64.0); }

struct ExperimentConfig {
  Mode mode = Mode::Capacity;
  std::string name;
  std::optional<SetSpec> E, F;
  std::optional<double> gamma;
  /// Increasing gammas for a numerical gamma* scan.
  std::vector<double> gammas;
  std::optional<RefinementSchedule> refinement_schedule;
  /// Strictly decreasing.
  std::vector<double> epsilon_schedule;
  /// Single epsilon for intersection dimensions and the codimension probe.
  std::optional<double> epsilon;
  std::optional<std::size_t> n_paths;
  std::optional<double> alpha;
  std::optional<int> n;
  /// Parameter-lattice resolution for hit studies (0: automatic).
  std::optional<double> resolution;
  std::optional<std::uint64_t> seed;
  std::string output;
  /// Performance only; never affects results or the config hash.
  unsigned threads = 1;

  bool operator==(const ExperimentConfig&) const = default;

  RefinementSchedule schedule() const { return refinement_schedule ? *refinement_schedule : default_schedule(); }
};

struct ConfigIssue {
  /// Dotted field path ("E.ratio", "epsilon_schedule[2]"); empty for syntax errors.
  std::string field;
  std::string message;
  /// 1-based line for syntax errors, 0 otherwise.
  std::size_t line = 0;
};

/// All validation problems of one config text.
class ConfigError : public Error {
 public:
  explicit ConfigError(std::vector<ConfigIssue> issues) : Error(ErrorKind::InvalidConfig, render(issues)), issues_(std::move(issues)) {}
  const std::vector<ConfigIssue>& issues() const { return issues_; }

 private:
  static std::string render(const std::vector<ConfigIssue>& issues) {
    std::string s = std::to_string(issues.size()) + " config error(s)";
    for (const auto& i : issues) {
      s += "\n  ";
      if (i.line > 0) s += "line " + std::to_string(i.line) + ": ";
      if (!i.field.empty()) s += i.field + ": ";
      s += i.message;
    }
    return s;
  }
  std::vector<ConfigIssue> issues_;
};

namespace detail {

using nlohmann::json;

class ConfigReader {
 public:
  std::vector<ConfigIssue> issues;

  void issue(const std::string& field, const std::string& msg) { issues.push_back({field, msg, 0}); }

  void check_keys(const json& obj, const std::string& path, const std::set<std::string>& allowed) {
    for (const auto& [k, v] : obj.items())
      if (!allowed.count(k)) issue(join(path, k), "unknown key");
  }

  static std::string join(const std::string& path, const std::string& key) { return path.empty() ? key : path + "." + key; }

  std::optional<double> number(const json& obj, const std::string& path, const std::string& key, bool required) {
    if (!obj.contains(key)) {
      if (required) issue(join(path, key), "missing required key");
      return std::nullopt;
    }
    const auto& v = obj.at(key);
    if (!v.is_number()) {
      issue(join(path, key), "expected a number");
      return std::nullopt;
    }
    return v.get<double>();
  }

  std::optional<std::int64_t> integer(const json& obj, const std::string& path, const std::string& key, bool required) {
    if (!obj.contains(key)) {
      if (required) issue(join(path, key), "missing required key");
      return std::nullopt;
    }
    const auto& v = obj.at(key);
    if (!v.is_number_integer()) {
      issue(join(path, key), "expected an integer");
      return std::nullopt;
    }
    return v.get<std::int64_t>();
  }

  std::optional<std::string> string(const json& obj, const std::string& path, const std::string& key, bool required) {
    if (!obj.contains(key)) {
      if (required) issue(join(path, key), "missing required key");
      return std::nullopt;
    }
    const auto& v = obj.at(key);
    if (!v.is_string()) {
      issue(join(path, key), "expected a string");
      return std::nullopt;
    }
    return v.get<std::string>();
  }

  std::optional<std::vector<double>> vector(const json& v, const std::string& path) {
    if (!v.is_array()) {
      issue(path, "expected an array of numbers");
      return std::nullopt;
    }
    std::vector<double> out;
    bool ok = true;
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (!v[i].is_number()) {
        issue(path + "[" + std::to_string(i) + "]", "expected a number");
        ok = false;
      } else {
        out.push_back(v[i].get<double>());
      }
    }
    return ok ? std::optional(out) : std::nullopt;
  }

  std::optional<std::vector<double>> vector(const json& obj, const std::string& path, const std::string& key,
                                            bool required) {
    if (!obj.contains(key)) {
      if (required) issue(join(path, key), "missing required key");
      return std::nullopt;
    }
    return vector(obj.at(key), join(path, key));
  }

  std::optional<std::vector<std::vector<double>>> matrix(const json& obj, const std::string& path,
                                                         const std::string& key) {
    const std::string p = join(path, key);
    if (!obj.contains(key)) {
      issue(p, "missing required key");
      return std::nullopt;
    }
    const auto& v = obj.at(key);
    if (!v.is_array()) {
      issue(p, "expected an array of arrays");
      return std::nullopt;
    }
    std::vector<std::vector<double>> out;
    bool ok = true;
    for (std::size_t i = 0; i < v.size(); ++i) {
      auto row = vector(v[i], p + "[" + std::to_string(i) + "]");
      if (row)
        out.push_back(*row);
      else
        ok = false;
    }
    return ok ? std::optional(out) : std::nullopt;
  }

  std::optional<SetSpec> set(const json& obj, const std::string& key, bool required) {
    if (!obj.contains(key)) {
      if (required) issue(key, "missing required key");
      return std::nullopt;
    }
    return set_value(obj.at(key), key);
  }

  std::optional<SetSpec> set_value(const json& v, const std::string& path) {
    if (!v.is_object()) {
      issue(path, "expected a set object");
      return std::nullopt;
    }
    const auto type = string(v, path, "type", true);
    if (!type) return std::nullopt;
    const std::size_t before = issues.size();
    std::optional<SetSpec> out;
    try {
      if (*type == "box") {
        check_keys(v, path, {"type", "lo", "hi"});
        auto lo = vector(v, path, "lo", true), hi = vector(v, path, "hi", true);
        if (lo && hi) out = SetSpec::box(*lo, *hi);
      } else if (*type == "interval") {
        check_keys(v, path, {"type", "lo", "hi"});
        auto lo = number(v, path, "lo", true), hi = number(v, path, "hi", true);
        if (lo && hi) out = SetSpec::interval(*lo, *hi);
      } else if (*type == "ifs") {
        check_keys(v, path, {"type", "ratio", "offsets", "depth", "origin", "scale"});
        auto r = number(v, path, "ratio", true);
        auto off = matrix(v, path, "offsets");
        auto depth = integer(v, path, "depth", true);
        auto origin = vector(v, path, "origin", true);
        auto scale = number(v, path, "scale", false);
        if (r && off && depth && origin && issues.size() == before)
          out = SetSpec::ifs(*r, *off, static_cast<int>(*depth), *origin, scale.value_or(1.0));
      } else if (*type == "cantor") {
        check_keys(v, path, {"type", "ratio", "branches", "depth", "origin", "scale"});
        auto r = number(v, path, "ratio", true);
        auto m = integer(v, path, "branches", false);
        auto depth = integer(v, path, "depth", true);
        auto origin = number(v, path, "origin", false);
        auto scale = number(v, path, "scale", false);
        if (m && *m < 1) issue(join(path, "branches"), "must be positive");
        if (r && depth && issues.size() == before)
          out = SetSpec::cantor(*r, static_cast<int>(m.value_or(2)), static_cast<int>(*depth), origin.value_or(0.0),
                                scale.value_or(1.0));
      } else if (*type == "ball") {
        check_keys(v, path, {"type", "center", "radius"});
        auto c = vector(v, path, "center", true);
        auto r = number(v, path, "radius", true);
        if (c && r) out = SetSpec::ball(*c, *r);
      } else if (*type == "point") {
        check_keys(v, path, {"type", "at"});
        auto at = vector(v, path, "at", true);
        if (at) out = SetSpec::point(*at);
      } else if (*type == "points") {
        check_keys(v, path, {"type", "dim", "points"});
        auto dim = integer(v, path, "dim", true);
        auto pts = matrix(v, path, "points");
        if (dim && *dim < 1) issue(join(path, "dim"), "must be positive");
        if (dim && pts && issues.size() == before) out = SetSpec::points(*pts, static_cast<std::size_t>(*dim));
      } else if (*type == "union") {
        check_keys(v, path, {"type", "members"});
        const std::string p = join(path, "members");
        if (!v.contains("members") || !v.at("members").is_array()) {
          issue(p, "expected an array of sets");
        } else {
          std::vector<SetSpec> members;
          const auto& arr = v.at("members");
          for (std::size_t i = 0; i < arr.size(); ++i)
            if (auto m = set_value(arr[i], p + "[" + std::to_string(i) + "]")) members.push_back(*m);
          if (issues.size() == before) out = SetSpec::union_of(members);
        }
      } else {
        issue(join(path, "type"), "unknown set type '" + *type + "'");
      }
      if (out) out->validate();
    } catch (const Error& e) {
      issue(path, e.what());
      out.reset();
    }
    return out;
  }
};

}  // namespace detail

/// Canonical JSON for a set: boxes, IFS, balls, point clouds and unions.
inline nlohmann::json set_to_json(const SetSpec& s) {
  using nlohmann::json;
  return std::visit(
      [&](const auto& k) -> json {
        using T = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<T, IntervalBox>) {
          return {{"type", "box"}, {"lo", k.lo}, {"hi", k.hi}};
        } else if constexpr (std::is_same_v<T, SelfSimilarIFS>) {
          return {{"type", "ifs"}, {"ratio", k.ratio}, {"offsets", k.offsets}, {"depth", k.depth},
                  {"origin", k.origin}, {"scale", k.scale}};
        } else if constexpr (std::is_same_v<T, Ball>) {
          return {{"type", "ball"}, {"center", k.center}, {"radius", k.radius}};
        } else if constexpr (std::is_same_v<T, PointCloud>) {
          return {{"type", "points"}, {"dim", s.ambient_dim}, {"points", k.points}};
        } else {
          json m = json::array();
          for (const auto& x : k.members) m.push_back(set_to_json(x));
          return {{"type", "union"}, {"members", m}};
        }
      },
      s.kind);
}

/// Parses and validates a JSON config. Throws ConfigError listing every
/// problem found.
inline ExperimentConfig parse_config(const std::string& text) {
  using nlohmann::json;
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    std::size_t line = 1;
    for (std::size_t i = 0; i < std::min(e.byte, text.size() + 1) && i < text.size(); ++i) line += text[i] == '\n';
    throw ConfigError({{"", e.what(), line}});
  }
  detail::ConfigReader rd;
  ExperimentConfig c;
  if (!root.is_object()) throw ConfigError({{"", "config must be a JSON object", 0}});
  rd.check_keys(root, "",
                {"mode", "name", "E", "F", "gamma", "gammas", "refinement_schedule", "epsilon_schedule", "epsilon",
                 "n_paths", "alpha", "n", "resolution", "seed", "output", "threads"});

  const auto mode_s = rd.string(root, "", "mode", true);
  std::optional<Mode> mode;
  if (mode_s) {
    mode = parse_mode(*mode_s);
    if (!mode) rd.issue("mode", "unknown mode '" + *mode_s + "'");
  }
  if (mode) c.mode = *mode;
  if (auto s = rd.string(root, "", "name", false)) c.name = *s;
  if (auto s = rd.string(root, "", "output", false)) c.output = *s;

  if (root.contains("seed")) {
    const auto& v = root.at("seed");
    if (v.is_number_unsigned())
      c.seed = v.get<std::uint64_t>();
    else if (v.is_number_integer())
      rd.issue("seed", "must be nonnegative");
    else
      rd.issue("seed", "expected an integer");
  } else {
    rd.issue("seed", "missing required key");
  }
  if (auto t = rd.integer(root, "", "threads", false)) {
    if (*t < 1)
      rd.issue("threads", "must be positive");
    else
      c.threads = static_cast<unsigned>(*t);
  }

  c.E = rd.set(root, "E", true);
  c.F = rd.set(root, "F", true);
  c.gamma = rd.number(root, "", "gamma", false);
  if (c.gamma && !(*c.gamma >= 0.0)) rd.issue("gamma", "must be nonnegative");

  if (root.contains("gammas")) {
    if (auto g = rd.vector(root.at("gammas"), "gammas")) {
      c.gammas = *g;
      for (std::size_t i = 0; i < c.gammas.size(); ++i) {
        if (!(c.gammas[i] >= 0.0)) rd.issue("gammas[" + std::to_string(i) + "]", "must be nonnegative");
        if (i > 0 && !(c.gammas[i] > c.gammas[i - 1]))
          rd.issue("gammas[" + std::to_string(i) + "]", "gammas must be strictly increasing");
      }
    }
  }

  if (root.contains("refinement_schedule")) {
    const auto& v = root.at("refinement_schedule");
    const std::string p = "refinement_schedule";
    if (!v.is_object()) {
      rd.issue(p, "expected an object");
    } else if (v.contains("levels")) {
      rd.check_keys(v, p, {"levels"});
      if (auto m = rd.matrix(v, p, "levels")) {
        RefinementSchedule s;
        bool ok = true;
        for (std::size_t i = 0; i < m->size(); ++i) {
          if ((*m)[i].size() != 2) {
            rd.issue(p + ".levels[" + std::to_string(i) + "]", "expected [time_resolution, space_resolution]");
            ok = false;
          } else {
            s.levels.emplace_back((*m)[i][0], (*m)[i][1]);
          }
        }
        if (ok) {
          try {
            s.validate();
            c.refinement_schedule = s;
          } catch (const Error& e) {
            rd.issue(p, e.what());
          }
        }
      }
    } else {
      rd.check_keys(v, p, {"h0", "factor", "count", "time_floor"});
      auto h0 = rd.number(v, p, "h0", true), f = rd.number(v, p, "factor", true);
      auto count = rd.integer(v, p, "count", true);
      auto floor = rd.number(v, p, "time_floor", false);
      if (h0 && f && count) {
        try {
          require(*count >= 1, ErrorKind::InvalidConfig, "count must be positive");
          c.refinement_schedule =
              parabolic_schedule(*h0, *f, static_cast<std::size_t>(*count), floor.value_or(0.0));
          c.refinement_schedule->validate();
        } catch (const Error& e) {
          rd.issue(p, e.what());
        }
      }
    }
  }

  if (root.contains("epsilon_schedule")) {
    if (auto e = rd.vector(root.at("epsilon_schedule"), "epsilon_schedule")) {
      c.epsilon_schedule = *e;
      if (e->empty()) rd.issue("epsilon_schedule", "must not be empty");
      for (std::size_t i = 0; i < e->size(); ++i) {
        const std::string p = "epsilon_schedule[" + std::to_string(i) + "]";
        if (!((*e)[i] > 0.0)) rd.issue(p, "must be positive");
        if (i > 0 && !((*e)[i] < (*e)[i - 1])) rd.issue(p, "epsilon_schedule must be strictly decreasing");
      }
    }
  }
  c.epsilon = rd.number(root, "", "epsilon", false);
  if (c.epsilon && !(*c.epsilon > 0.0)) rd.issue("epsilon", "must be positive");
  if (auto np = rd.integer(root, "", "n_paths", false)) {
    if (*np < 1)
      rd.issue("n_paths", "must be positive");
    else
      c.n_paths = static_cast<std::size_t>(*np);
  }
  c.alpha = rd.number(root, "", "alpha", false);
  if (c.alpha && !(*c.alpha > 0.0 && *c.alpha < 2.0)) rd.issue("alpha", "must lie in (0, 2)");
  if (auto n = rd.integer(root, "", "n", false)) {
    if (*n < 1)
      rd.issue("n", "must be positive");
    else
      c.n = static_cast<int>(*n);
  }
  c.resolution = rd.number(root, "", "resolution", false);
  if (c.resolution && !(*c.resolution > 0.0)) rd.issue("resolution", "must be positive");

  if (mode) {
    auto need = [&](bool present, const char* key) {
      if (!present && !root.contains(key)) rd.issue(key, std::string("required in ") + to_string(*mode) + " mode");
    };
    switch (*mode) {
      case Mode::Hit:
      case Mode::FullBattery:
        need(!c.epsilon_schedule.empty(), "epsilon_schedule");
        need(c.n_paths.has_value(), "n_paths");
        break;
      case Mode::Codimension:
        need(c.alpha.has_value(), "alpha");
        need(c.n.has_value(), "n");
        need(c.n_paths.has_value(), "n_paths");
        break;
      case Mode::Dimension:
        if (c.epsilon.has_value() != c.n_paths.has_value())
          rd.issue(c.epsilon ? "n_paths" : "epsilon", "epsilon and n_paths go together in dimension mode");
        break;
      default: break;
    }
  }
  if (c.F && mode == Mode::Codimension && c.alpha && c.n &&
      !(static_cast<double>(c.F->ambient_dim) - *c.alpha * *c.n > 0.0))
    rd.issue("alpha", "needs d - alpha n > 0");
  if (!rd.issues.empty()) throw ConfigError(rd.issues);
  return c;
}

/// Canonical JSON text; parse_config(serialize_config(c)) == c.
inline std::string serialize_config(const ExperimentConfig& c, bool with_runtime = true) {
  using nlohmann::ordered_json;
  ordered_json j;
  j["mode"] = to_string(c.mode);
  if (!c.name.empty()) j["name"] = c.name;
  if (c.seed) j["seed"] = *c.seed;
  if (c.E) j["E"] = set_to_json(*c.E);
  if (c.F) j["F"] = set_to_json(*c.F);
  if (c.gamma) j["gamma"] = *c.gamma;
  if (!c.gammas.empty()) j["gammas"] = c.gammas;
  if (c.refinement_schedule) {
    ordered_json lv = ordered_json::array();
    for (const auto& [t, s] : c.refinement_schedule->levels) lv.push_back({t, s});
    j["refinement_schedule"] = {{"levels", lv}};
  }
  if (!c.epsilon_schedule.empty()) j["epsilon_schedule"] = c.epsilon_schedule;
  if (c.epsilon) j["epsilon"] = *c.epsilon;
  if (c.n_paths) j["n_paths"] = *c.n_paths;
  if (c.alpha) j["alpha"] = *c.alpha;
  if (c.n) j["n"] = *c.n;
  if (c.resolution) j["resolution"] = *c.resolution;
  if (with_runtime) {
    if (!c.output.empty()) j["output"] = c.output;
    if (c.threads != 1) j["threads"] = c.threads;
  }
  return j.dump(2) + "\n";
}

/// 64-bit FNV-1a of the canonical config without runtime-only fields
/// (output path, threads).
inline std::uint64_t config_hash(const ExperimentConfig& c) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : serialize_config(c, false)) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace thermocap
