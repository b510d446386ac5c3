#include "seqacq/numerics/checkpoint.hpp"

#include <cmath>
#include <fstream>

#include "seqacq/errors.hpp"

namespace seqacq::numerics {

const ParameterArray& CheckpointEnvelope::array(const std::string& name) const {
  for (const auto& a : arrays) {
    if (a.name == name) return a;
  }
  throw CheckpointError("checkpoint has no parameter array '" + name + "'");
}

nlohmann::json envelope_to_json(const CheckpointEnvelope& envelope) {
  nlohmann::json doc;
  doc["magic"] = kCheckpointMagic;
  doc["version"] = kCheckpointVersion;
  doc["kind"] = envelope.kind;
  doc["schema_hash"] = envelope.schema_hash;
  doc["architecture"] = envelope.architecture;
  auto arrays = nlohmann::json::array();
  for (const auto& a : envelope.arrays) {
    for (double v : a.values) {
      if (!std::isfinite(v)) {
        throw CheckpointError("refusing to write non-finite parameter in '" +
                              a.name + "'");
      }
    }
    arrays.push_back({{"name", a.name}, {"size", a.values.size()}, {"values", a.values}});
  }
  doc["parameters"] = std::move(arrays);
  doc["extra"] = envelope.extra;
  return doc;
}

CheckpointEnvelope envelope_from_json(const nlohmann::json& doc,
                                      const std::string& expected_kind) {
  try {
    if (doc.at("magic").get<std::string>() != kCheckpointMagic) {
      throw CheckpointError("bad checkpoint magic");
    }
    const int version = doc.at("version").get<int>();
    if (version != kCheckpointVersion) {
      throw CheckpointError("unsupported checkpoint version " +
                            std::to_string(version));
    }
    CheckpointEnvelope env;
    env.kind = doc.at("kind").get<std::string>();
    if (!expected_kind.empty() && env.kind != expected_kind) {
      throw CheckpointError("checkpoint kind '" + env.kind + "', expected '" +
                            expected_kind + "'");
    }
    env.schema_hash = doc.at("schema_hash").get<std::string>();
    env.architecture = doc.at("architecture");
    for (const auto& a : doc.at("parameters")) {
      ParameterArray arr;
      arr.name = a.at("name").get<std::string>();
      arr.values = a.at("values").get<std::vector<double>>();
      if (arr.values.size() != a.at("size").get<std::size_t>()) {
        throw CheckpointError("parameter array '" + arr.name +
                              "' size does not match its declared size");
      }
      env.arrays.push_back(std::move(arr));
    }
    if (doc.contains("extra")) env.extra = doc.at("extra");
    return env;
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("malformed checkpoint: ") + e.what());
  }
}

void write_checkpoint(const std::filesystem::path& path,
                      const CheckpointEnvelope& envelope) {
  std::ofstream out(path);
  if (!out) throw CheckpointError("cannot write checkpoint " + path.string());
  out << envelope_to_json(envelope).dump(1) << '\n';
}

CheckpointEnvelope read_checkpoint(const std::filesystem::path& path,
                                   const std::string& expected_kind) {
  std::ifstream in(path);
  if (!in) throw CheckpointError("cannot read checkpoint " + path.string());
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError("checkpoint " + path.string() +
                          " is not valid JSON: " + e.what());
  }
  return envelope_from_json(doc, expected_kind);
}

}  // namespace seqacq::numerics
