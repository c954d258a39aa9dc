#pragma once

#include <nlohmann/json.hpp>
#include <string>
#include <vector>

#include "cowsec/config.hpp"
#include "cowsec/observed.hpp"

namespace cowsec {

/// Shortest round-trip decimal representation, locale independent.
std::string format_double(double v);

struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> footer_comments;
};

/// Every artifact carries the command, the fully resolved configuration and
/// the seed in its header so results can be reproduced byte for byte.
std::vector<std::string> artifact_header(const std::string& command, const RunConfig& cfg);

void write_csv(const std::string& path, const std::vector<std::string>& header_comments,
               const Table& table);
void write_json_file(const std::string& path, const nlohmann::ordered_json& payload);

nlohmann::ordered_json stats_to_json(const ObservedStats& st);

/// Long-format stats table: metric, value, stderr, flag.
Table stats_table(const ObservedStats& st);

}  // namespace cowsec
