#include "icac/system_io.hpp"

#include <array>
#include <fstream>
#include <sstream>

#include "icac/errors.hpp"

namespace icac {
namespace {

constexpr std::array<const char*, 9> kMatrixKeys = {"F", "G", "H", "J", "W",
                                                  "V", "Q", "R", "L"};

bool is_known_key(const std::string& key) {
  for (const char* k : kMatrixKeys) {
    if (key == k) return true;
  }
  return key == "Sigma1";
}

}  // namespace

Matrix matrix_from_json(const nlohmann::json& value, const std::string& name) {
  if (!value.is_array()) {
    throw Error(ErrorCode::kConfig, "\"" + name + "\" must be an array of rows");
  }
  const auto rows = static_cast<Eigen::Index>(value.size());
  Eigen::Index cols = -1;
  Matrix m;
  for (Eigen::Index i = 0; i < rows; ++i) {
    const auto& row = value[static_cast<std::size_t>(i)];
    if (!row.is_array()) {
      throw Error(ErrorCode::kConfig,
                  "\"" + name + "\" row " + std::to_string(i) +
                      " is not an array");
    }
    if (cols < 0) {
      cols = static_cast<Eigen::Index>(row.size());
      m.resize(rows, cols);
    } else if (static_cast<Eigen::Index>(row.size()) != cols) {
      throw Error(ErrorCode::kConfig,
                  "\"" + name + "\" is ragged (row " + std::to_string(i) +
                      " has " + std::to_string(row.size()) + " entries)");
    }
    for (Eigen::Index j = 0; j < cols; ++j) {
      const auto& x = row[static_cast<std::size_t>(j)];
      if (!x.is_number()) {
        throw Error(ErrorCode::kConfig,
                    "\"" + name + "\" has a non-numeric entry");
      }
      m(i, j) = x.get<double>();
    }
  }
  if (rows == 0) m.resize(0, 0);
  return m;
}

nlohmann::json matrix_to_json(const Matrix& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

LqgSystem parse_system_json(const nlohmann::json& doc) {
  if (!doc.is_object()) {
    throw Error(ErrorCode::kConfig, "system file must be a JSON object");
  }
  for (const auto& item : doc.items()) {
    if (!is_known_key(item.key())) {
      throw Error(ErrorCode::kConfig, "unknown key \"" + item.key() + "\"");
    }
  }
  auto get = [&doc](const char* key, bool required) -> Matrix {
    if (!doc.contains(key)) {
      if (required) {
        throw Error(ErrorCode::kConfig,
                    std::string("missing key \"") + key + "\"");
      }
      return Matrix();
    }
    return matrix_from_json(doc.at(key), key);
  };
  LqgSystem sys;
  sys.F = get("F", true);
  sys.G = get("G", true);
  sys.H = get("H", true);
  sys.J = get("J", true);
  sys.W = get("W", true);
  sys.V = get("V", true);
  sys.Q = get("Q", true);
  sys.R = get("R", true);
  sys.L = get("L", false);
  sys.Sigma1 = get("Sigma1", false);
  return validate_system(sys);
}

LqgSystem parse_system_json_text(const std::string& text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::kConfig, std::string("invalid JSON: ") + e.what());
  }
  return parse_system_json(doc);
}

LqgSystem load_system_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw Error(ErrorCode::kConfig, "cannot open " + path.string());
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_system_json_text(buf.str());
}

nlohmann::json system_to_json(const LqgSystem& sys) {
  return {{"F", matrix_to_json(sys.F)},   {"G", matrix_to_json(sys.G)},
          {"H", matrix_to_json(sys.H)},   {"J", matrix_to_json(sys.J)},
          {"W", matrix_to_json(sys.W)},   {"V", matrix_to_json(sys.V)},
          {"L", matrix_to_json(sys.L)},   {"Q", matrix_to_json(sys.Q)},
          {"R", matrix_to_json(sys.R)},   {"Sigma1", matrix_to_json(sys.Sigma1)}};
}

}  // namespace icac
