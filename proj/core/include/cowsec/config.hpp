#pragma once

#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "cowsec/attack.hpp"
#include "cowsec/optimize.hpp"
#include "cowsec/protocol.hpp"

namespace cowsec {

enum class OutputFormat : std::uint8_t { Csv, Json };

struct OutputConfig {
  std::string directory = "out";
  OutputFormat format = OutputFormat::Csv;
};

struct SweepConfig {
  std::vector<double> eta_grid;
  std::vector<double> gain_grid;
};

/// Fully resolved run configuration. Parsing is strict: unknown keys and
/// out-of-range values are rejected before any computation starts.
struct RunConfig {
  ProtocolParams protocol;
  std::optional<AttackParams> attack;
  std::optional<OptimizationTarget> target;
  int budget = 600;
  SimOptions sim;
  SweepConfig sweep;
  std::vector<ExperimentPoint> experiments;
  OutputConfig output;

  /// The configuration as re-serialized JSON, embedded in output headers.
  nlohmann::ordered_json resolved;
};

RunConfig parse_config(const nlohmann::ordered_json& j);
RunConfig load_config(const std::string& path);

}  // namespace cowsec
