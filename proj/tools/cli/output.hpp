#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace tsmfg::cli {

class OutputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Shortest decimal string that parses back to the same double.
std::string format_double(double value);

// Rows are written in order; every cell already formatted.
void write_csv(const std::filesystem::path& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows);

void write_json(const std::filesystem::path& path, const nlohmann::json& doc);

}  // namespace tsmfg::cli
