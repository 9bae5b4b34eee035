#include "gazedecouple/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <functional>
#include <sstream>

#include <yaml-cpp/yaml.h>

#include "gazedecouple/error.hpp"

extern char** environ;

namespace gazedecouple {

namespace {

double parse_double(const std::string& key, const std::string& v) {
    double out = 0.0;
    const char* end = v.data() + v.size();
    const auto [ptr, ec] = std::from_chars(v.data(), end, out);
    if (ec != std::errc() || ptr != end || !std::isfinite(out)) {
        throw ConfigError(key + ": expected a number, got '" + v + "'");
    }
    return out;
}

long long parse_integer(const std::string& key, const std::string& v) {
    long long out = 0;
    const char* end = v.data() + v.size();
    const auto [ptr, ec] = std::from_chars(v.data(), end, out);
    if (ec != std::errc() || ptr != end) {
        throw ConfigError(key + ": expected an integer, got '" + v + "'");
    }
    return out;
}

int parse_int(const std::string& key, const std::string& v) {
    const long long x = parse_integer(key, v);
    if (x < std::numeric_limits<int>::min() || x > std::numeric_limits<int>::max()) {
        throw ConfigError(key + ": integer out of range");
    }
    return static_cast<int>(x);
}

bool parse_bool(const std::string& key, std::string v) {
    std::transform(v.begin(), v.end(), v.begin(), [](unsigned char c) { return std::tolower(c); });
    if (v == "true" || v == "1" || v == "yes" || v == "on") {
        return true;
    }
    if (v == "false" || v == "0" || v == "no" || v == "off") {
        return false;
    }
    throw ConfigError(key + ": expected a boolean, got '" + v + "'");
}

using Setter = std::function<void(CliConfig&, const std::string& key, const std::string&)>;

template <typename T>
Setter field(T CliConfig::*member) {
    return [member](CliConfig& c, const std::string& key, const std::string& v) {
        if constexpr (std::is_same_v<T, double>) {
            c.*member = parse_double(key, v);
        } else if constexpr (std::is_same_v<T, int>) {
            c.*member = parse_int(key, v);
        } else if constexpr (std::is_same_v<T, bool>) {
            c.*member = parse_bool(key, v);
        } else if constexpr (std::is_same_v<T, std::uint64_t>) {
            const long long x = parse_integer(key, v);
            if (x < 0) {
                throw ConfigError(key + ": must be non-negative");
            }
            c.*member = static_cast<std::uint64_t>(x);
        } else {
            c.*member = v;
        }
    };
}

const std::vector<std::pair<std::string, Setter>>& setters() {
    static const std::vector<std::pair<std::string, Setter>> table{
        {"tau_attn", field(&CliConfig::tau_attn)},
        {"tau_high", field(&CliConfig::tau_high)},
        {"tau_low", field(&CliConfig::tau_low)},
        {"n_fallback", field(&CliConfig::n_fallback)},
        {"iou_threshold", field(&CliConfig::iou_threshold)},
        {"segment_with_bbox", field(&CliConfig::segment_with_bbox)},
        {"fixation_level", field(&CliConfig::fixation_level)},
        {"n_splits", field(&CliConfig::n_splits)},
        {"w_min", field(&CliConfig::w_min)},
        {"w_max", field(&CliConfig::w_max)},
        {"lambda1", field(&CliConfig::lambda1)},
        {"lambda2", field(&CliConfig::lambda2)},
        {"alpha", field(&CliConfig::alpha)},
        {"epsilon", field(&CliConfig::epsilon)},
        {"seed", field(&CliConfig::seed)},
        {"workers", field(&CliConfig::workers)},
        {"propose_url", field(&CliConfig::propose_url)},
        {"segment_url", field(&CliConfig::segment_url)},
        {"retry_attempts", field(&CliConfig::retry_attempts)},
        {"retry_base_delay_ms", field(&CliConfig::retry_base_delay_ms)},
        {"max_in_flight", field(&CliConfig::max_in_flight)},
    };
    return table;
}

void require(bool ok, const std::string& key, const std::string& rule, double value) {
    if (!ok) {
        std::ostringstream os;
        os << key << ": must be " << rule << ", got " << value;
        throw ConfigError(os.str());
    }
}

} // namespace

const std::vector<std::string>& config_keys() {
    static const std::vector<std::string> keys = [] {
        std::vector<std::string> k;
        for (const auto& [name, setter] : setters()) {
            k.push_back(name);
        }
        return k;
    }();
    return keys;
}

void set_config_value(CliConfig& cfg, const std::string& key, const std::string& value, const std::string& source) {
    for (const auto& [name, setter] : setters()) {
        if (name == key) {
            setter(cfg, key, value);
            cfg.provenance[key] = source;
            return;
        }
    }
    throw ConfigError("unknown configuration key '" + key + "'");
}

void apply_config_file(CliConfig& cfg, const std::string& path) {
    YAML::Node root;
    try {
        root = YAML::LoadFile(path);
    } catch (const YAML::Exception& e) {
        throw ConfigError(path + ": " + e.what());
    }
    if (root.IsNull()) {
        return;
    }
    if (!root.IsMap()) {
        throw ConfigError(path + ": top level must be a mapping of key: value");
    }
    for (const auto& kv : root) {
        const std::string key = kv.first.as<std::string>();
        if (!kv.second.IsScalar()) {
            throw ConfigError(key + ": value must be a scalar");
        }
        set_config_value(cfg, key, kv.second.as<std::string>(), "file");
    }
}

void apply_environment(CliConfig& cfg, const std::vector<std::string>& env) {
    const std::string prefix = kEnvPrefix;
    for (const auto& entry : env) {
        if (entry.rfind(prefix, 0) != 0) {
            continue;
        }
        const auto eq = entry.find('=');
        if (eq == std::string::npos) {
            continue;
        }
        std::string key = entry.substr(prefix.size(), eq - prefix.size());
        std::transform(key.begin(), key.end(), key.begin(), [](unsigned char c) { return std::tolower(c); });
        set_config_value(cfg, key, entry.substr(eq + 1), "env");
    }
}

std::vector<std::string> current_environment() {
    std::vector<std::string> out;
    for (char** e = environ; e != nullptr && *e != nullptr; ++e) {
        out.emplace_back(*e);
    }
    return out;
}

CliConfig load_config(const std::string& file, const std::vector<std::string>& env,
                      const std::vector<std::pair<std::string, std::string>>& overrides) {
    CliConfig cfg;
    for (const auto& key : config_keys()) {
        cfg.provenance[key] = "default";
    }
    if (!file.empty()) {
        apply_config_file(cfg, file);
    }
    apply_environment(cfg, env);
    for (const auto& [key, value] : overrides) {
        set_config_value(cfg, key, value, "flag");
    }
    cfg.validate();
    return cfg;
}

void CliConfig::validate() const {
    require(tau_attn > 0.0 && tau_attn < 1.0, "tau_attn", "in (0,1)", tau_attn);
    require(tau_high > 0.0 && tau_high <= 1.0, "tau_high", "in (0,1]", tau_high);
    require(tau_low > 0.0 && tau_low < tau_high, "tau_low", "in (0, tau_high)", tau_low);
    require(n_fallback >= 1, "n_fallback", ">= 1", n_fallback);
    require(iou_threshold > 0.0 && iou_threshold <= 1.0, "iou_threshold", "in (0,1]", iou_threshold);
    require(fixation_level > 0.0 && fixation_level < 1.0, "fixation_level", "in (0,1)", fixation_level);
    require(n_splits >= 1, "n_splits", ">= 1", n_splits);
    require(w_min > 0.0, "w_min", "> 0", w_min);
    require(w_max > w_min, "w_max", "> w_min", w_max);
    require(lambda1 >= 0.0, "lambda1", ">= 0", lambda1);
    require(lambda2 >= 0.0, "lambda2", ">= 0", lambda2);
    require(alpha >= 0.0, "alpha", ">= 0", alpha);
    require(epsilon > 0.0, "epsilon", "> 0", epsilon);
    require(workers >= 1, "workers", ">= 1", workers);
    require(retry_attempts >= 1, "retry_attempts", ">= 1", retry_attempts);
    require(retry_base_delay_ms >= 0, "retry_base_delay_ms", ">= 0", retry_base_delay_ms);
    require(max_in_flight >= 1, "max_in_flight", ">= 1", max_in_flight);
}

PipelineConfig CliConfig::pipeline() const {
    PipelineConfig p;
    p.validation.tau_attn = tau_attn;
    p.fallback = {tau_high, tau_low, n_fallback};
    p.iou_threshold = iou_threshold;
    p.segment_with_bbox = segment_with_bbox;
    p.workers = workers;
    return p;
}

LossConfig CliConfig::loss() const { return {lambda1, lambda2, alpha, w_min, w_max, epsilon}; }

EvalConfig CliConfig::eval() const { return {fixation_level, n_splits, seed, epsilon}; }

RetryPolicy CliConfig::retry() const { return {retry_attempts, std::chrono::milliseconds(retry_base_delay_ms)}; }

nlohmann::json CliConfig::to_json() const {
    return {{"tau_attn", tau_attn},
            {"tau_high", tau_high},
            {"tau_low", tau_low},
            {"n_fallback", n_fallback},
            {"iou_threshold", iou_threshold},
            {"segment_with_bbox", segment_with_bbox},
            {"fixation_level", fixation_level},
            {"n_splits", n_splits},
            {"w_min", w_min},
            {"w_max", w_max},
            {"lambda1", lambda1},
            {"lambda2", lambda2},
            {"alpha", alpha},
            {"epsilon", epsilon},
            {"seed", seed},
            {"workers", workers},
            {"propose_url", propose_url},
            {"segment_url", segment_url},
            {"retry_attempts", retry_attempts},
            {"retry_base_delay_ms", retry_base_delay_ms},
            {"max_in_flight", max_in_flight}};
}

} // namespace gazedecouple
