#pragma once

#include "divgan/trainer.hpp"

#include <json.hpp>

#include <stdexcept>
#include <string>

namespace divgan {

inline constexpr int kCheckpointVersion = 1;

class CheckpointError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct Checkpoint {
    NetworkSpec spec_g;
    NetworkSpec spec_d;
    TrainState state;
};

nlohmann::json to_json(const NetworkSpec& spec);
NetworkSpec network_spec_from_json(const nlohmann::json& j);

/// Versioned JSON document; doubles are written with round-trip precision.
std::string save_checkpoint(const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& text);
/// Also requires the stored network specs to equal the expected ones.
Checkpoint load_checkpoint(const std::string& text, const NetworkSpec& expected_g, const NetworkSpec& expected_d);

Checkpoint read_checkpoint_file(const std::string& path);
void write_checkpoint_file(const std::string& path, const Checkpoint& ckpt);

} // namespace divgan
