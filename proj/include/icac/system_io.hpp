#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

#include "icac/model.hpp"

namespace icac {

// JSON system file: an object with keys "F","G","H","J","W","V","L","Q","R"
// and optional "Sigma1", each a row-major array of arrays of numbers.
// Missing "L"/"Sigma1" default to zero. Unknown keys are rejected.
// Throws Error{kConfig} on malformed input; the result is validated.
LqgSystem parse_system_json(const nlohmann::json& doc);
LqgSystem parse_system_json_text(const std::string& text);
LqgSystem load_system_file(const std::filesystem::path& path);

nlohmann::json matrix_to_json(const Matrix& m);
Matrix matrix_from_json(const nlohmann::json& value, const std::string& name);
nlohmann::json system_to_json(const LqgSystem& sys);

}  // namespace icac
