#pragma once

#include "critwalk/rational.hpp"
#include "critwalk/tree.hpp"

#include <json.hpp>

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

namespace critwalk::cli {

using Json = nlohmann::ordered_json;

/// 17 significant digits; "inf", "-inf", "nan" for non-finite values.
std::string format_double(double x);

/// Compact JSON with doubles through format_double (non-finite values become
/// strings). Key order is preserved.
std::string dump_json(const Json& j, int indent = 2);

/// Keys sorted recursively, no whitespace: the form the digest is taken over.
std::string canonical_json(const Json& j);

std::uint64_t fnv1a64(std::string_view bytes);
std::string config_digest(const Json& resolved_config);

Json rational_json(const Rational& r);

/// Tabular result with a fixed column order.
struct Table {
  using Cell = std::variant<std::int64_t, std::uint64_t, double, std::string>;
  std::vector<std::string> columns;
  std::vector<std::vector<Cell>> rows;

  void add(std::vector<Cell> row);
  std::string to_csv() const;
  Json to_json() const;
};

/// {"children": [[...], ...], "depth": N}; children[k][i] is the child count
/// of the i-th vertex at level k in breadth-first order.
Json tree_to_json(const ExplicitTree& tree);
ExplicitTree tree_from_json(const Json& j, int max_degree = kDefaultMaxDegree);
ExplicitTree read_tree_file(const std::string& path, int max_degree = kDefaultMaxDegree);

/// "const:K:N", "list:F1,F2,...", "envelope:GAMMA:N".
GrowthProfile parse_profile(const std::string& spec);

std::vector<std::int64_t> parse_int_list(const std::string& text, const std::string& what);
std::vector<double> parse_double_list(const std::string& text, const std::string& what);

void write_file(const std::string& path, const std::string& contents);
std::string read_file(const std::string& path);

}  // namespace critwalk::cli
