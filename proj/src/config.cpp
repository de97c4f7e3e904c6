#include <algorithm>
#include <charconv>
#include <cstdio>
#include <sstream>

#include <json.hpp>
#include <openssl/evp.h>

#include "rescbf/io.hpp"

namespace rescbf {

namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(first, last - first + 1));
}

std::string unquote(std::string s) {
  if (s.size() >= 2 && ((s.front() == '"' && s.back() == '"') || (s.front() == '\'' && s.back() == '\'')))
    return s.substr(1, s.size() - 2);
  return s;
}

void flatten(const nlohmann::json& j, const std::string& prefix, KeyValues& out) {
  if (j.is_object()) {
    for (auto it = j.begin(); it != j.end(); ++it)
      flatten(it.value(), prefix.empty() ? it.key() : prefix + "." + it.key(), out);
    return;
  }
  if (j.is_array()) {
    std::string joined;
    for (std::size_t k = 0; k < j.size(); ++k) {
      if (k) joined += ',';
      joined += j[k].is_string() ? j[k].get<std::string>() : j[k].dump();
    }
    out[prefix] = joined;
    return;
  }
  out[prefix] = j.is_string() ? j.get<std::string>() : j.dump();
}

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

double to_double(const std::string& key, const std::string& value) {
  double v = 0.0;
  const char* begin = value.data();
  const char* end = begin + value.size();
  if (!value.empty() && *begin == '+') ++begin;
  auto res = std::from_chars(begin, end, v);
  if (res.ec != std::errc{} || res.ptr != end || value.empty())
    throw ConfigError(key, "expected a number, got '" + value + "'");
  return v;
}

long long to_integer(const std::string& key, const std::string& value) {
  long long v = 0;
  auto res = std::from_chars(value.data(), value.data() + value.size(), v);
  if (res.ec != std::errc{} || res.ptr != value.data() + value.size() || value.empty())
    throw ConfigError(key, "expected an integer, got '" + value + "'");
  return v;
}

std::vector<std::string> split_list(const std::string& value) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream ss(value);
  while (std::getline(ss, cur, ',')) {
    cur = trim(cur);
    if (!cur.empty()) out.push_back(cur);
  }
  return out;
}

Vecd to_vector(const std::string& key, const std::string& value) {
  const auto parts = split_list(value);
  Vecd v(static_cast<Eigen::Index>(parts.size()));
  for (std::size_t k = 0; k < parts.size(); ++k) v(static_cast<Eigen::Index>(k)) = to_double(key, parts[k]);
  return v;
}

std::string join(const Vecd& v) {
  std::string out;
  for (Eigen::Index k = 0; k < v.size(); ++k) {
    if (k) out += ", ";
    out += format_double(v(k));
  }
  return out;
}

const std::vector<int> kDefaultMalicious{2, 7};

}  // namespace

KeyValues parse_key_values(std::string_view text) {
  KeyValues kv;
  const std::string trimmed = trim(text);
  if (!trimmed.empty() && trimmed.front() == '{') {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(trimmed);
    } catch (const nlohmann::json::parse_error& e) {
      throw ConfigError("config", std::string("invalid JSON: ") + e.what());
    }
    flatten(j, "", kv);
    return kv;
  }
  std::istringstream in{std::string(text)};
  std::string line;
  std::string section;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError("config", "bad section header on line " + std::to_string(line_no));
      section = trim(std::string_view(line).substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find_first_of("=:");
    if (eq == std::string::npos)
      throw ConfigError("config", "expected `key = value` on line " + std::to_string(line_no));
    std::string key = trim(std::string_view(line).substr(0, eq));
    std::string value = unquote(trim(std::string_view(line).substr(eq + 1)));
    if (!value.empty() && value.front() == '[' && value.back() == ']') value = value.substr(1, value.size() - 2);
    if (!section.empty()) key = section + "." + key;
    kv[key] = value;
  }
  return kv;
}

const std::vector<std::string>& required_config_keys() {
  static const std::vector<std::string> keys{"n", "F", "R", "delta_d", "dt", "tau1", "tau2", "t_end"};
  return keys;
}

WorldConfig apply_key_values(WorldConfig cfg, const KeyValues& kv) {
  bool q1_given = false;
  bool box_given = false;
  bool malicious_given = false;
  for (const auto& [key, value] : kv) {
    if (key == "n") cfg.n = static_cast<int>(to_integer(key, value));
    else if (key == "F") cfg.F = static_cast<int>(to_integer(key, value));
    else if (key == "m") cfg.m = static_cast<int>(to_integer(key, value));
    else if (key == "R") cfg.R = to_double(key, value);
    else if (key == "delta_d") cfg.delta_d = to_double(key, value);
    else if (key == "seed") cfg.seed = static_cast<std::uint64_t>(to_integer(key, value));
    else if (key == "dt") cfg.dt = to_double(key, value);
    else if (key == "tau1") cfg.tau1 = to_double(key, value);
    else if (key == "tau2") cfg.tau2 = to_double(key, value);
    else if (key == "t_end") cfg.t_end = to_double(key, value);
    else if (key == "adjacency.q1") { cfg.adjacency.q1 = to_double(key, value); q1_given = true; }
    else if (key == "adjacency.q2") cfg.adjacency.q2 = to_double(key, value);
    else if (key == "cbf.w_r") cfg.weights.w_r = to_double(key, value);
    else if (key == "cbf.w_c") cfg.weights.w_c = to_double(key, value);
    else if (key == "cbf.gamma") cfg.weights.gamma = to_double(key, value);
    else if (key == "box.lo") { cfg.box.lo = to_vector(key, value); box_given = true; }
    else if (key == "box.hi") { cfg.box.hi = to_vector(key, value); box_given = true; }
    else if (key == "attack.bias") cfg.attack.connectivity_bias = to_double(key, value);
    else if (key == "attack.consensus") {
      if (value == "random") cfg.attack.consensus = ConsensusBehavior::kUniformRandom;
      else if (value == "wmsr") cfg.attack.consensus = ConsensusBehavior::kFollowWmsr;
      else throw ConfigError(key, "expected 'random' or 'wmsr'");
    } else if (key == "attack.scenario") {
      const auto s = parse_scenario(value);
      if (!s) throw ConfigError(key, "unknown scenario '" + value + "'");
      cfg.attack.connectivity_bias = scenario_bias(*s);
    } else if (key == "malicious") {
      cfg.malicious.clear();
      for (const auto& part : split_list(value)) cfg.malicious.push_back(static_cast<int>(to_integer(key, part)));
      malicious_given = true;
    } else if (key == "desired") {
      if (value == "four_way") cfg.desired = DesiredController::kFourWay;
      else if (value == "zero") cfg.desired = DesiredController::kZero;
      else throw ConfigError(key, "expected 'four_way' or 'zero'");
    } else if (key == "self_connectivity") {
      if (value == "sampled") cfg.instantaneous_self_connectivity = false;
      else if (value == "instantaneous") cfg.instantaneous_self_connectivity = true;
      else throw ConfigError(key, "expected 'sampled' or 'instantaneous'");
    } else if (key == "consensus.y_lo") cfg.consensus.y_lo = to_double(key, value);
    else if (key == "consensus.y_hi") cfg.consensus.y_hi = to_double(key, value);
    else if (key == "consensus.tolerance") cfg.consensus.tolerance = to_double(key, value);
    else if (key == "init.radius") cfg.init.radius = to_double(key, value);
    else if (key == "init.min_separation") cfg.init.min_separation = to_double(key, value);
    else if (key == "init.max_attempts") cfg.init.max_attempts = static_cast<int>(to_integer(key, value));
    else throw ConfigError(key, "unknown key");
  }

  if (cfg.n < 2) throw ConfigError("n", "must be >= 2");
  if (!q1_given && kv.count("n")) cfg.adjacency.q1 = AdjacencyParamsd::defaults(cfg.n, cfg.R).q1;
  cfg.adjacency.n = cfg.n;
  cfg.adjacency.R = cfg.R;
  cfg.consensus.F = cfg.F;
  if (!box_given && cfg.box.dim() != cfg.m) cfg.box = InputBox<double>::symmetric(cfg.m, 1.5);
  if (!malicious_given && (kv.count("n") || kv.count("F"))) {
    cfg.malicious.clear();
    for (int i : kDefaultMalicious)
      if (i < cfg.n && static_cast<int>(cfg.malicious.size()) < cfg.F) cfg.malicious.push_back(i);
  }
  cfg.validate();
  return cfg;
}

WorldConfig parse_config(std::string_view text) {
  const KeyValues kv = parse_key_values(text);
  for (const auto& key : required_config_keys())
    if (!kv.count(key)) throw ConfigError(key, "required field missing");
  return apply_key_values(WorldConfig{}, kv);
}

std::string serialize_config(const WorldConfig& cfg) {
  std::ostringstream out;
  auto kvline = [&](std::string_view k, const std::string& v) { out << k << " = " << v << '\n'; };
  kvline("n", std::to_string(cfg.n));
  kvline("F", std::to_string(cfg.F));
  kvline("m", std::to_string(cfg.m));
  kvline("R", format_double(cfg.R));
  kvline("delta_d", format_double(cfg.delta_d));
  kvline("seed", std::to_string(cfg.seed));
  kvline("dt", format_double(cfg.dt));
  kvline("tau1", format_double(cfg.tau1));
  kvline("tau2", format_double(cfg.tau2));
  kvline("t_end", format_double(cfg.t_end));
  std::string mal;
  for (std::size_t k = 0; k < cfg.malicious.size(); ++k) mal += (k ? ", " : "") + std::to_string(cfg.malicious[k]);
  kvline("malicious", mal);
  kvline("desired", cfg.desired == DesiredController::kFourWay ? "four_way" : "zero");
  kvline("self_connectivity", cfg.instantaneous_self_connectivity ? "instantaneous" : "sampled");
  kvline("adjacency.q1", format_double(cfg.adjacency.q1));
  kvline("adjacency.q2", format_double(cfg.adjacency.q2));
  kvline("cbf.w_r", format_double(cfg.weights.w_r));
  kvline("cbf.w_c", format_double(cfg.weights.w_c));
  kvline("cbf.gamma", format_double(cfg.weights.gamma));
  kvline("box.lo", join(cfg.box.lo));
  kvline("box.hi", join(cfg.box.hi));
  kvline("attack.bias", format_double(cfg.attack.connectivity_bias));
  kvline("attack.consensus", cfg.attack.consensus == ConsensusBehavior::kUniformRandom ? "random" : "wmsr");
  kvline("consensus.y_lo", format_double(cfg.consensus.y_lo));
  kvline("consensus.y_hi", format_double(cfg.consensus.y_hi));
  kvline("consensus.tolerance", format_double(cfg.consensus.tolerance));
  kvline("init.radius", format_double(cfg.init.radius));
  kvline("init.min_separation", format_double(cfg.init.min_separation));
  kvline("init.max_attempts", std::to_string(cfg.init.max_attempts));
  return out.str();
}

std::string git_blob_hash(std::string_view content) {
  const std::string header = "blob " + std::to_string(content.size()) + '\0';
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  EVP_DigestInit_ex(ctx, EVP_sha1(), nullptr);
  EVP_DigestUpdate(ctx, header.data(), header.size());
  EVP_DigestUpdate(ctx, content.data(), content.size());
  EVP_DigestFinal_ex(ctx, digest, &len);
  EVP_MD_CTX_free(ctx);
  std::string hex;
  char buf[3];
  for (unsigned int k = 0; k < len; ++k) {
    std::snprintf(buf, sizeof(buf), "%02x", digest[k]);
    hex += buf;
  }
  return hex;
}

}  // namespace rescbf
