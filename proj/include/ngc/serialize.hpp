#pragma once

// JSON document for a nested gradient code:
//
//   {
//     "format": "ngc-code", "version": 1,
//     "n": 8, "s_max": 3, "seed": 42,
//     "components": [
//       {"sigma": 0, "entries": [...n*n row-major...], "check": [...sigma*n...]},
//       ...
//     ]
//   }
//
// Entries are written with 17 significant digits so doubles round-trip exactly.

#include <cstdint>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "ngc/codes.hpp"

namespace ngc {

namespace detail {

inline void write_matrix_entries(std::ostream& os, const Matrix& m) {
  os << '[';
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      if (r != 0 || c != 0) os << ", ";
      os << std::scientific << std::setprecision(16) << m(r, c);
    }
  os << ']';
}

inline Matrix read_matrix_entries(const nlohmann::json& values, Eigen::Index rows, Eigen::Index cols) {
  if (!values.is_array() || static_cast<Eigen::Index>(values.size()) != rows * cols)
    throw InvalidArgument("matrix entry count does not match its shape");
  Matrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) {
      const auto& v = values[static_cast<std::size_t>(r * cols + c)];
      if (!v.is_number()) throw InvalidArgument("matrix entries must be numbers");
      m(r, c) = v.get<double>();
    }
  return m;
}

}  // namespace detail

inline std::string to_json(const NestedGradientCode& code) {
  std::ostringstream os;
  os << "{\n  \"format\": \"ngc-code\",\n  \"version\": 1,\n";
  os << "  \"n\": " << code.n() << ",\n  \"s_max\": " << code.s_max() << ",\n  \"seed\": " << code.seed()
     << ",\n  \"components\": [\n";
  for (std::size_t i = 0; i < code.components().size(); ++i) {
    const auto& c = code.components()[i];
    os << "    {\"sigma\": " << c.sigma() << ",\n     \"entries\": ";
    detail::write_matrix_entries(os, c.entries());
    os << ",\n     \"check\": ";
    detail::write_matrix_entries(os, c.check());
    os << "}" << (i + 1 < code.components().size() ? "," : "") << "\n";
  }
  os << "  ]\n}\n";
  return os.str();
}

inline NestedGradientCode from_json(std::string_view text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw InvalidArgument(std::string("malformed code document: ") + e.what());
  }
  try {
    if (doc.value("format", std::string()) != "ngc-code") throw InvalidArgument("not an ngc-code document");
    const int n = doc.at("n").get<int>();
    const int s_max = doc.at("s_max").get<int>();
    const auto seed = doc.at("seed").get<std::uint64_t>();
    const auto& comps = doc.at("components");
    if (n < 1 || s_max < 0 || s_max > n - 1) throw InvalidArgument("n / s_max out of range");
    if (!comps.is_array() || static_cast<int>(comps.size()) != s_max + 1)
      throw InvalidArgument("component count does not match s_max");
    std::vector<EncodingMatrix> components;
    for (const auto& c : comps) {
      const int sigma = c.at("sigma").get<int>();
      if (sigma < 0 || sigma > n - 1) throw InvalidArgument("component sigma out of range");
      Matrix entries = detail::read_matrix_entries(c.at("entries"), n, n);
      const auto& check_json = c.contains("check") ? c.at("check") : nlohmann::json::array();
      Matrix check = check_json.empty() ? Matrix() : detail::read_matrix_entries(check_json, sigma, n);
      components.emplace_back(sigma, std::move(entries), std::move(check));
    }
    return NestedGradientCode(n, seed, std::move(components));
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument(std::string("invalid code document: ") + e.what());
  }
}

inline void save_code(const NestedGradientCode& code, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw InvalidArgument("cannot open " + path + " for writing");
  out << to_json(code);
  if (!out) throw InvalidArgument("failed writing " + path);
}

inline NestedGradientCode load_code(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot open " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return from_json(buf.str());
}

}  // namespace ngc
