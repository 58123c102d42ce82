#pragma once

#include "bohmsim/scenarios.hpp"

#include <json.hpp>

namespace bohmsim {

/// Full configuration document; every field is written, so the result can be
/// fed back through config_from_json unchanged.
nlohmann::json config_to_json(const ExperimentConfig& cfg);

/// Missing keys keep their defaults; unknown keys and wrong types raise
/// ConfigError. A run manifest (a document with a "config" object) is
/// accepted and its embedded config is used.
ExperimentConfig config_from_json(const nlohmann::json& doc);

/// Assigns `value` at a dotted path such as "beam.v_y" inside a config
/// document, creating intermediate objects. Throws ConfigError on an empty
/// path or a non-object intermediate.
void set_config_path(nlohmann::json& doc, const std::string& dotted_path,
                     const nlohmann::json& value);

} // namespace bohmsim
