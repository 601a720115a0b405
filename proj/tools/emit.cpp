#include "emit.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace critwalk::cli {

std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  if (x == 0.0) return std::signbit(x) ? "-0" : "0";
  return fmt::format("{:.17g}", x);
}

namespace {

void write_string(std::string& out, const std::string& s) {
  out += Json(s).dump();
}

void write_json(std::string& out, const Json& j, int indent, int level) {
  const auto pad = [&](int l) {
    if (indent > 0) {
      out += '\n';
      out.append(static_cast<std::size_t>(indent * l), ' ');
    }
  };
  switch (j.type()) {
    case Json::value_t::object: {
      if (j.empty()) {
        out += "{}";
        return;
      }
      out += '{';
      bool first = true;
      for (auto it = j.begin(); it != j.end(); ++it) {
        if (!first) out += ',';
        first = false;
        pad(level + 1);
        write_string(out, it.key());
        out += indent > 0 ? ": " : ":";
        write_json(out, it.value(), indent, level + 1);
      }
      pad(level);
      out += '}';
      return;
    }
    case Json::value_t::array: {
      if (j.empty()) {
        out += "[]";
        return;
      }
      out += '[';
      bool first = true;
      for (const auto& v : j) {
        if (!first) out += ',';
        first = false;
        pad(level + 1);
        write_json(out, v, indent, level + 1);
      }
      pad(level);
      out += ']';
      return;
    }
    case Json::value_t::number_float: {
      const double x = j.get<double>();
      if (std::isfinite(x)) {
        out += format_double(x);
      } else {
        write_string(out, format_double(x));
      }
      return;
    }
    default:
      out += j.dump();
  }
}

Json sorted(const Json& j) {
  if (j.is_object()) {
    std::vector<std::string> keys;
    for (auto it = j.begin(); it != j.end(); ++it) keys.push_back(it.key());
    std::sort(keys.begin(), keys.end());
    Json out = Json::object();
    for (const auto& k : keys) out[k] = sorted(j.at(k));
    return out;
  }
  if (j.is_array()) {
    Json out = Json::array();
    for (const auto& v : j) out.push_back(sorted(v));
    return out;
  }
  return j;
}

std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

}  // namespace

std::string dump_json(const Json& j, int indent) {
  std::string out;
  write_json(out, j, indent, 0);
  return out;
}

std::string canonical_json(const Json& j) {
  return dump_json(sorted(j), 0);
}

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string config_digest(const Json& resolved_config) {
  return fmt::format("fnv1a64:{:016x}", fnv1a64(canonical_json(resolved_config)));
}

Json rational_json(const Rational& r) {
  return to_string(r);
}

void Table::add(std::vector<Cell> row) {
  if (row.size() != columns.size()) {
    throw std::logic_error(fmt::format("table row has {} cells, expected {}", row.size(), columns.size()));
  }
  rows.push_back(std::move(row));
}

std::string Table::to_csv() const {
  std::string out;
  for (std::size_t i = 0; i < columns.size(); ++i) {
    if (i) out += ',';
    out += csv_escape(columns[i]);
  }
  out += '\n';
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) out += ',';
      std::visit(
          [&](const auto& v) {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, double>) {
              out += format_double(v);
            } else if constexpr (std::is_same_v<T, std::string>) {
              out += csv_escape(v);
            } else {
              out += std::to_string(v);
            }
          },
          row[i]);
    }
    out += '\n';
  }
  return out;
}

Json Table::to_json() const {
  Json arr = Json::array();
  for (const auto& row : rows) {
    Json obj = Json::object();
    for (std::size_t i = 0; i < row.size(); ++i) {
      std::visit([&](const auto& v) { obj[columns[i]] = v; }, row[i]);
    }
    arr.push_back(std::move(obj));
  }
  return arr;
}

Json tree_to_json(const ExplicitTree& tree) {
  Json j = Json::object();
  j["children"] = tree.level_counts();
  j["depth"] = tree.depth();
  return j;
}

ExplicitTree tree_from_json(const Json& j, int max_degree) {
  if (!j.is_object()) throw TreeError("tree JSON must be an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (it.key() != "children" && it.key() != "depth") throw TreeError("unknown tree key '" + it.key() + "'");
  }
  if (!j.contains("children")) throw TreeError("tree JSON needs \"children\"");
  const auto counts = j.at("children").get<std::vector<std::vector<int>>>();
  ExplicitTree t = build_explicit(counts, max_degree);
  if (j.contains("depth") && j.at("depth").get<int>() != t.depth()) {
    throw TreeError(fmt::format("tree JSON says depth {} but lists {} levels", j.at("depth").get<int>(), t.depth()));
  }
  return t;
}

ExplicitTree read_tree_file(const std::string& path, int max_degree) {
  Json j;
  try {
    j = Json::parse(read_file(path));
  } catch (const Json::parse_error& e) {
    throw std::invalid_argument(fmt::format("{}: {}", path, e.what()));
  }
  return tree_from_json(j, max_degree);
}

std::vector<std::int64_t> parse_int_list(const std::string& text, const std::string& what) {
  std::vector<std::int64_t> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      const double v = std::stod(item, &used);
      if (used != item.size() || v != std::floor(v) || std::abs(v) > 9e15) throw std::invalid_argument(item);
      out.push_back(static_cast<std::int64_t>(v));
    } catch (const std::exception&) {
      throw std::invalid_argument(fmt::format("{}: '{}' is not an integer", what, item));
    }
  }
  if (out.empty()) throw std::invalid_argument(what + ": empty list");
  return out;
}

std::vector<double> parse_double_list(const std::string& text, const std::string& what) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw std::invalid_argument(fmt::format("{}: '{}' is not a number", what, item));
    }
  }
  if (out.empty()) throw std::invalid_argument(what + ": empty list");
  return out;
}

GrowthProfile parse_profile(const std::string& spec) {
  const auto colon = spec.find(':');
  const std::string head = spec.substr(0, colon);
  const std::string rest = colon == std::string::npos ? "" : spec.substr(colon + 1);
  if (head == "list" && !rest.empty()) {
    std::vector<Rational> growth;
    std::stringstream ss(rest);
    std::string item;
    while (std::getline(ss, item, ',')) growth.push_back(parse_rational(item));
    return GrowthProfile(std::move(growth));
  }
  const auto second = rest.find(':');
  if ((head == "const" || head == "envelope") && second != std::string::npos) {
    const auto depth = parse_int_list(rest.substr(second + 1), "profile depth");
    if (depth.size() != 1 || depth[0] < 1) throw std::invalid_argument("profile depth must be one integer >= 1");
    if (head == "const") {
      const auto k = parse_int_list(rest.substr(0, second), "profile growth");
      if (k.size() != 1) throw std::invalid_argument("const profile takes one growth number");
      return GrowthProfile::constant(static_cast<int>(k[0]), static_cast<int>(depth[0]));
    }
    const auto g = parse_double_list(rest.substr(0, second), "profile exponent");
    if (g.size() != 1) throw std::invalid_argument("envelope profile takes one exponent");
    return GrowthProfile::power_of_two_envelope(g[0], static_cast<int>(depth[0]));
  }
  throw std::invalid_argument("unknown profile spec '" + spec + "' (const:K:N, list:F1,..., envelope:G:N)");
}

void write_file(const std::string& path, const std::string& contents) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open '" + path + "' for writing");
  f << contents;
  if (!f) throw std::runtime_error("failed writing '" + path + "'");
}

std::string read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::invalid_argument("cannot read '" + path + "'");
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

}  // namespace critwalk::cli
