#pragma once

#include "divgan/trainer.hpp"

#include <json.hpp>

#include <stdexcept>
#include <string>
#include <vector>

namespace divgan {

/// Invalid run configuration. `keys` lists the offending key paths.
class ConfigError : public std::runtime_error {
public:
    ConfigError(const std::string& what, std::vector<std::string> keys = {})
        : std::runtime_error(what), keys_(std::move(keys))
    {
    }
    const std::vector<std::string>& keys() const noexcept { return keys_; }

private:
    std::vector<std::string> keys_;
};

/// Builds a TrainConfig from a JSON run file, starting from the task
/// defaults. Unknown keys are rejected, all of them named in one error.
TrainConfig config_from_json(const nlohmann::json& doc);
TrainConfig parse_config(const std::string& text);
TrainConfig read_config_file(const std::string& path);

/// The fully resolved config in the same key layout config_from_json reads.
nlohmann::json config_to_json(const TrainConfig& cfg);

} // namespace divgan
