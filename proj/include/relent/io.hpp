#pragma once

#include <openssl/evp.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <variant>
#include <string>
#include <vector>

#include <json.hpp>

#include "relent/code.hpp"
#include "relent/errors.hpp"
#include "relent/markov.hpp"
#include "relent/sft.hpp"

namespace relent::io {

namespace fs = std::filesystem;
using nlohmann::json;

inline std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const fs::path& p, const std::string& body) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + p.string());
  out << body;
  if (!out) throw Error(ErrorCode::Io, "write failed for " + p.string());
}

inline std::string sha256_hex(const std::string& bytes) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) != 1)
    throw Error(ErrorCode::Io, "SHA-256 failed");
  static constexpr char hex[] = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[md[i] >> 4];
    out += hex[md[i] & 15];
  }
  return out;
}

/// Fixed 12 significant digits.
inline std::string fmt12(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.11e", v);
  return buf;
}

// ---------------------------------------------------------------------------
// Strict schema helpers

inline json parse_json(const std::string& text, const std::string& what) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::Schema, what + ": " + e.what());
  }
}

inline void require_object(const json& j, const std::string& what, const std::set<std::string>& required,
                           const std::set<std::string>& optional = {}) {
  if (!j.is_object()) throw Error(ErrorCode::Schema, what + ": expected an object");
  for (const auto& [k, v] : j.items())
    if (!required.count(k) && !optional.count(k)) throw Error(ErrorCode::Schema, what + ": unknown field '" + k + "'");
  for (const auto& k : required)
    if (!j.contains(k)) throw Error(ErrorCode::Schema, what + ": missing field '" + k + "'");
}

inline std::string get_string(const json& j, const std::string& key, const std::string& what) {
  if (!j.at(key).is_string()) throw Error(ErrorCode::Schema, what + ": '" + key + "' must be a string");
  return j.at(key).get<std::string>();
}

inline std::vector<std::pair<std::string, std::string>> string_pairs(const json& j, const std::string& what) {
  if (!j.is_array()) throw Error(ErrorCode::Schema, what + ": expected a list of pairs");
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& e : j) {
    if (!e.is_array() || e.size() != 2 || !e[0].is_string() || !e[1].is_string())
      throw Error(ErrorCode::Schema, what + ": every entry must be a 2-element list of strings");
    out.emplace_back(e[0].get<std::string>(), e[1].get<std::string>());
  }
  return out;
}

// ---------------------------------------------------------------------------
// Documents

inline Sft graph_from_json(const json& j, const std::string& what = "graph") {
  require_object(j, what, {"symbols", "edges"});
  if (!j["symbols"].is_array()) throw Error(ErrorCode::Schema, what + ": 'symbols' must be a list");
  std::vector<std::string> symbols;
  for (const auto& s : j["symbols"]) {
    if (!s.is_string()) throw Error(ErrorCode::Schema, what + ": symbols must be strings");
    symbols.push_back(s.get<std::string>());
  }
  return build_sft(symbols, string_pairs(j["edges"], what + ".edges"));
}

inline json graph_to_json(const Sft& g) {
  json e = json::array();
  for (const auto& ed : g.edges()) e.push_back({g.symbol(ed.from), g.symbol(ed.to)});
  return {{"symbols", g.symbols()}, {"edges", e}};
}

/// A loaded input: content hash plus the file it came from.
struct InputRecord {
  std::string role;
  std::string path;
  std::string sha256;
};

/// Loads graph, measure, code and problem documents, resolving references
/// relative to the referring file and caching each file once.
class Loader {
 public:
  const std::vector<InputRecord>& records() const noexcept { return records_; }

  Sft graph(const fs::path& p, const std::string& role = "graph") {
    const auto key = canonical(p);
    if (auto it = graphs_.find(key); it != graphs_.end()) return it->second;
    const auto doc = load(key, role);
    return graphs_.emplace(key, graph_from_json(doc, key)).first->second;
  }

  /// {"sft": path, "edge_freq": [...]} with frequencies in canonical edge order.
  MarkovMeasure measure(const fs::path& p, const std::string& role = "measure") {
    const auto key = canonical(p);
    const auto doc = load(key, role);
    require_object(doc, key, {"sft", "edge_freq"});
    const Sft g = graph(resolve(key, get_string(doc, "sft", key)), role + ".sft");
    if (!doc["edge_freq"].is_array()) throw Error(ErrorCode::Schema, key + ": 'edge_freq' must be a list");
    std::vector<double> q;
    for (const auto& v : doc["edge_freq"]) {
      if (!v.is_number()) throw Error(ErrorCode::Schema, key + ": edge_freq entries must be numbers");
      q.push_back(v.get<double>());
    }
    return make_measure(g, std::move(q));
  }

  /// {"source": path, "target": path, "map": [[x, y], ...]}
  OneBlockCode code(const fs::path& p, const std::string& role = "code") {
    const auto key = canonical(p);
    const auto doc = load(key, role);
    require_object(doc, key, {"source", "target", "map"});
    const Sft src = graph(resolve(key, get_string(doc, "source", key)), role + ".source");
    const Sft tgt = graph(resolve(key, get_string(doc, "target", key)), role + ".target");
    std::map<std::string, std::string> m;
    for (const auto& [a, b] : string_pairs(doc["map"], key + ".map"))
      if (!m.emplace(a, b).second) throw Error(ErrorCode::Schema, key + ": symbol '" + a + "' mapped twice");
    return validate_code(src, tgt, m);
  }

  /// {"pairs": [[P, R], ...]} naming base and fibre symbols.
  std::vector<std::pair<std::string, std::string>> overlap(const fs::path& p, const std::string& role = "overlap") {
    const auto key = canonical(p);
    const auto doc = load(key, role);
    require_object(doc, key, {"pairs"});
    return string_pairs(doc["pairs"], key + ".pairs");
  }

  struct Problem {
    OneBlockCode code;
    MarkovMeasure nu;
    int order = 1;
  };

  /// {"code": path, "nu": path, "order": m} plus an optional "graph" that must be the code source.
  Problem problem(const fs::path& p, const std::string& role = "problem") {
    const auto key = canonical(p);
    const auto doc = load(key, role);
    require_object(doc, key, {"code", "nu", "order"}, {"graph"});
    Problem pr{code(resolve(key, get_string(doc, "code", key)), role + ".code"),
               measure(resolve(key, get_string(doc, "nu", key)), role + ".nu"), 1};
    if (!doc["order"].is_number_integer() || doc["order"].get<int>() < 1)
      throw Error(ErrorCode::Schema, key + ": 'order' must be a positive integer");
    pr.order = doc["order"].get<int>();
    if (doc.contains("graph") && !(graph(resolve(key, get_string(doc, "graph", key)), role + ".graph") == pr.code.source))
      throw Error(ErrorCode::CodeMismatch, key + ": 'graph' differs from the code source");
    return pr;
  }

 private:
  static std::string canonical(const fs::path& p) {
    std::error_code ec;
    auto c = fs::weakly_canonical(p, ec);
    return (ec ? p : c).string();
  }
  static fs::path resolve(const std::string& from, const std::string& ref) {
    fs::path r(ref);
    return r.is_absolute() ? r : fs::path(from).parent_path() / r;
  }
  json load(const std::string& key, const std::string& role) {
    if (!fs::exists(key)) throw Error(ErrorCode::Io, "missing input " + key);
    const std::string text = read_file(key);
    if (!seen_.count(key)) {
      seen_.insert(key);
      records_.push_back({role, key, sha256_hex(text)});
    }
    return parse_json(text, key);
  }

  std::map<std::string, Sft> graphs_;
  std::set<std::string> seen_;
  std::vector<InputRecord> records_;
};

// ---------------------------------------------------------------------------
// Paths: a header line, then the symbols on one line separated by spaces.

inline std::string path_to_text(const Sft& g, const std::vector<int>& path) {
  std::string out = "relent-path length=" + std::to_string(path.size()) + " alphabet=";
  for (std::size_t i = 0; i < g.size(); ++i) out += (i ? "," : "") + g.symbol(static_cast<int>(i));
  out += "\n";
  for (std::size_t i = 0; i < path.size(); ++i) out += (i ? " " : "") + g.symbol(path[i]);
  return out + "\n";
}

inline std::vector<int> path_from_text(const Sft& g, const std::string& text) {
  std::istringstream in(text);
  std::string header, body;
  std::getline(in, header);
  std::getline(in, body);
  const std::string tag = "relent-path length=";
  if (header.rfind(tag, 0) != 0) throw Error(ErrorCode::Schema, "path header missing");
  const std::size_t n = std::stoul(header.substr(tag.size()));
  std::vector<int> path;
  std::istringstream words(body);
  for (std::string s; words >> s;) path.push_back(g.index_of(s));
  if (path.size() != n) throw Error(ErrorCode::Schema, "path length does not match its header");
  return path;
}

// ---------------------------------------------------------------------------
// CSV

class Csv {
 public:
  explicit Csv(std::vector<std::string> columns) : columns_(std::move(columns)) {}

  using Cell = std::variant<std::string, double, long long>;
  void row(const std::vector<Cell>& cells) {
    if (cells.size() != columns_.size()) throw Error(ErrorCode::InvalidArgument, "CSV row width mismatch");
    std::string line;
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) line += ",";
      if (const auto* s = std::get_if<std::string>(&cells[i])) line += *s;
      else if (const auto* d = std::get_if<double>(&cells[i])) line += fmt12(*d);
      else line += std::to_string(std::get<long long>(cells[i]));
    }
    rows_.push_back(line);
  }
  std::string str() const {
    std::string out;
    for (std::size_t i = 0; i < columns_.size(); ++i) out += (i ? "," : "") + columns_[i];
    out += "\n";
    for (const auto& r : rows_) out += r + "\n";
    return out;
  }
  std::size_t size() const noexcept { return rows_.size(); }

 private:
  std::vector<std::string> columns_;
  std::vector<std::string> rows_;
};

}  // namespace relent::io
