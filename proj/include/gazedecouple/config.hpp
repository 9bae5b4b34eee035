#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "gazedecouple/backends.hpp"
#include "gazedecouple/evaluation.hpp"
#include "gazedecouple/objectives.hpp"
#include "gazedecouple/pipeline.hpp"

namespace gazedecouple {

inline constexpr const char* kEnvPrefix = "GAZEDECOUPLE_";

/// Every tunable of the tool. Sources, lowest precedence first: defaults, YAML config file,
/// GAZEDECOUPLE_<KEY> environment variables, command-line overrides.
struct CliConfig {
    double tau_attn = 0.2;
    double tau_high = 0.5;
    double tau_low = 0.05;
    int n_fallback = 3;
    double iou_threshold = kDefaultIouThreshold;
    bool segment_with_bbox = false;

    double fixation_level = kDefaultFixationLevel;
    int n_splits = kDefaultBorjiSplits;

    double w_min = 0.2;
    double w_max = 3.0;
    double lambda1 = 0.2;
    double lambda2 = 3.0;
    double alpha = 0.5;
    double epsilon = kDefaultEpsilon;

    std::uint64_t seed = 0;
    int workers = 1;

    std::string propose_url;
    std::string segment_url;
    int retry_attempts = 3;
    int retry_base_delay_ms = 100;
    int max_in_flight = 4;

    /// Where each key's value came from: "default", "file", "env" or "flag".
    std::map<std::string, std::string> provenance;

    /// Throws ConfigError naming the offending field.
    void validate() const;

    PipelineConfig pipeline() const;
    LossConfig loss() const;
    EvalConfig eval() const;
    RetryPolicy retry() const;

    nlohmann::json to_json() const;
};

const std::vector<std::string>& config_keys();

/// Applies key = value, parsing value for the key's type. Unknown keys and unparsable
/// values raise ConfigError.
void set_config_value(CliConfig& cfg, const std::string& key, const std::string& value, const std::string& source);

/// Flat YAML mapping of key: scalar.
void apply_config_file(CliConfig& cfg, const std::string& path);

/// env is a list of NAME=VALUE strings (as in environ); only GAZEDECOUPLE_* entries are read.
void apply_environment(CliConfig& cfg, const std::vector<std::string>& env);
std::vector<std::string> current_environment();

/// file, then environment, then overrides; validates the result.
CliConfig load_config(const std::string& file, const std::vector<std::string>& env,
                      const std::vector<std::pair<std::string, std::string>>& overrides);

} // namespace gazedecouple
