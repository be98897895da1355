#pragma once

#include <charconv>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "efp/grid.hpp"

namespace efp {

// 17 significant digits round-trip every double.
inline std::string format_double(double v) {
  char buf[32];
  const int n = std::snprintf(buf, sizeof(buf), "%.17g", v);
  return std::string(buf, static_cast<std::size_t>(n));
}

/// One line per y row, x values comma separated. The optional header names
/// the columns x0..x{nx-1}.
inline void write_csv(std::ostream& os, const Field& field, bool header = false) {
  const auto& g = field.grid();
  if (header) {
    for (std::size_t i = 0; i < g.nx(); ++i) os << (i ? ",x" : "x") << i;
    os << '\n';
  }
  for (std::size_t j = 0; j < g.ny(); ++j) {
    for (std::size_t i = 0; i < g.nx(); ++i) {
      if (i) os << ',';
      os << format_double(field.at(i, j));
    }
    os << '\n';
  }
}

inline Field read_csv(std::istream& is, const GridPtr& grid) {
  std::vector<double> values;
  values.reserve(grid->size());
  std::string line;
  std::size_t rows = 0;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    if (rows == 0 && values.empty() && line.front() == 'x') continue;  // header
    std::size_t cols = 0;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      double v = 0.0;
      const auto* first = cell.data();
      const auto* last = cell.data() + cell.size();
      auto [ptr, ec] = std::from_chars(first, last, v);
      if (ec != std::errc{} || ptr != last) throw std::runtime_error("bad CSV value '" + cell + "'");
      values.push_back(v);
      ++cols;
    }
    if (cols != grid->nx()) throw std::runtime_error("CSV row has wrong column count");
    ++rows;
  }
  if (rows != grid->ny()) throw std::runtime_error("CSV has wrong row count");
  return Field(grid, std::move(values));
}

inline nlohmann::json to_json(const Field& field) {
  const auto& g = field.grid();
  return nlohmann::json{{"nx", g.nx()},
                        {"ny", g.ny()},
                        {"hx", g.hx()},
                        {"hy", g.hy()},
                        {"kind", to_string(g.kind())},
                        {"values", std::vector<double>(field.values().begin(), field.values().end())}};
}

inline Field field_from_json(const nlohmann::json& j) {
  const auto nx = j.at("nx").get<std::size_t>();
  const auto ny = j.at("ny").get<std::size_t>();
  const double hy = j.at("hy").get<double>();
  GridKind kind = GridKind::Spatial2D;
  if (j.contains("kind") && j["kind"].get<std::string>() == "spacetime1dp1") kind = GridKind::SpaceTime1Dp1;
  auto grid = make_grid(kind, nx, ny, hy * static_cast<double>(ny - 1));
  return Field(grid, j.at("values").get<std::vector<double>>());
}

}  // namespace efp
