#pragma once

#include <memory>

#include <nlohmann/json.hpp>

#include "seqacq/interface/config.hpp"

namespace seqacq::interface {

// Each command reads the config, writes its artifacts and returns a
// machine-readable summary.
nlohmann::json run_gen_data(const nlohmann::json& config);
nlohmann::json run_train_guesser(const nlohmann::json& config);
nlohmann::json run_train_agent(const nlohmann::json& config);
nlohmann::json run_evaluate(const nlohmann::json& config);
nlohmann::json run_sweep_budget(const nlohmann::json& config);
nlohmann::json run_oracle(const nlohmann::json& config);

// Loads the dataset named by the config (splits kept from the file).
data::Dataset load_configured_dataset(const nlohmann::json& config);
std::shared_ptr<const guesser::GuesserModel> load_configured_guesser(const nlohmann::json& config);

// Applies the guesser's stored standardization to every record.
data::Dataset prepare_for(const guesser::GuesserModel& model, data::Dataset dataset);

}  // namespace seqacq::interface
