#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

namespace seqacq::numerics {

inline constexpr const char* kCheckpointMagic = "PCAFE";
inline constexpr int kCheckpointVersion = 1;

struct ParameterArray {
  std::string name;
  std::vector<double> values;
};

// Versioned model envelope: magic, version, schema hash, an architecture
// descriptor, then flat parameter arrays in declared order. `extra` carries
// component-specific stanzas (standardization statistics, agent config).
struct CheckpointEnvelope {
  std::string kind;
  std::string schema_hash;
  nlohmann::json architecture = nlohmann::json::object();
  std::vector<ParameterArray> arrays;
  nlohmann::json extra = nlohmann::json::object();

  const ParameterArray& array(const std::string& name) const;
};

nlohmann::json envelope_to_json(const CheckpointEnvelope& envelope);
// Validates magic/version and (if non-empty) the expected kind.
CheckpointEnvelope envelope_from_json(const nlohmann::json& doc,
                                      const std::string& expected_kind = "");

void write_checkpoint(const std::filesystem::path& path,
                      const CheckpointEnvelope& envelope);
CheckpointEnvelope read_checkpoint(const std::filesystem::path& path,
                                   const std::string& expected_kind = "");

}  // namespace seqacq::numerics
