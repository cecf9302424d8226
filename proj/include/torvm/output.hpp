#pragma once

#include "torvm/config.hpp"

#include <json.hpp>

#include <string>

namespace torvm {

using Json = nlohmann::ordered_json;

Json to_json(const HypothesisReport& h);
Json to_json(const WitnessDecomposition& w);
Json to_json(const StabilityReport& rep);
Json to_json(const ScanResult& scan);
Json to_json(const GrowingMode& mode);
Json equilibrium_summary(const Equilibrium& eq);

// Pretty-printed JSON with the config hash inserted as the first key.
void write_json(const std::string& path, const Json& body, const std::string& config_hash);

// CSV files start with a "# config_hash=..." comment line.
void write_equilibrium_csv(const std::string& path, const Equilibrium& eq, const std::string& config_hash);
void write_scan_csv(const std::string& path, const ScanResult& scan, const std::string& config_hash);
void write_mode_fields_csv(const std::string& path, const Equilibrium& eq, const GrowingMode& mode,
                           const std::string& config_hash);

// Dense operator dump. Binary layout, little-endian:
//   "TVMOPS01" | u64 matrix count | u64 N | N doubles (w-metric)
//   then per matrix: u64 name length | name | u64 rows | u64 cols | rows*cols doubles, row-major.
// A JSON sidecar lists names, shapes and diagnostics.
void write_operator_dump(const std::string& bin_path, const std::string& json_path, const OperatorSet& ops,
                         const std::string& config_hash);

struct OperatorDump {
  Vec w;
  std::vector<std::pair<std::string, Mat>> matrices;
  const Mat& get(const std::string& name) const;
};
OperatorDump read_operator_dump(const std::string& bin_path);

}  // namespace torvm
