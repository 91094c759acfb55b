#include "sysid/config.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <limits>

namespace sysid {

namespace {

double parse_double_token(const std::string& text) {
    double value = 0.0;
    const char* begin = text.data();
    const char* end = begin + text.size();
    auto [ptr, ec] = std::from_chars(begin, end, value);
    if (ec != std::errc() || ptr != end) {
        throw ConfigError("config: cannot parse number '" + text + "'");
    }
    return value;
}

std::string strip_spaces(const std::string& s) {
    std::string out;
    for (char c : s) {
        if (!std::isspace(static_cast<unsigned char>(c))) out.push_back(c);
    }
    return out;
}

double parse_frequency_string(const std::string& raw) {
    const std::string text = strip_spaces(raw);
    if (text.empty()) {
        throw ConfigError("config: empty frequency string");
    }
    const auto pi_pos = text.find("pi");
    if (pi_pos == std::string::npos) {
        return parse_double_token(text);
    }
    double coefficient = 1.0;
    if (pi_pos > 0) {
        std::string prefix = text.substr(0, pi_pos);
        if (prefix == "-") {
            coefficient = -1.0;
        } else {
            coefficient = parse_double_token(prefix);
        }
    }
    double divisor = 1.0;
    const std::string suffix = text.substr(pi_pos + 2);
    if (!suffix.empty()) {
        if (suffix[0] != '/' || suffix.size() < 2) {
            throw ConfigError("config: malformed frequency string '" + raw + "'");
        }
        divisor = parse_double_token(suffix.substr(1));
        if (divisor == 0.0) {
            throw ConfigError("config: zero divisor in frequency string '" + raw + "'");
        }
    }
    return coefficient * kPi / divisor;
}

const nlohmann::json& require_field(const nlohmann::json& j, const char* key) {
    const auto it = j.find(key);
    if (it == j.end()) {
        throw ConfigError(std::string("config: missing field '") + key + "'");
    }
    return *it;
}

double require_number(const nlohmann::json& j, const char* key) {
    const auto& v = require_field(j, key);
    if (!v.is_number()) {
        throw ConfigError(std::string("config: field '") + key + "' must be a number");
    }
    return v.get<double>();
}

std::vector<double> number_list(const nlohmann::json& v, const char* key) {
    if (!v.is_array() || v.empty()) {
        throw ConfigError(std::string("config: field '") + key +
                          "' must be a non-empty array of numbers");
    }
    std::vector<double> out;
    out.reserve(v.size());
    for (const auto& e : v) {
        if (!e.is_number()) {
            throw ConfigError(std::string("config: field '") + key + "' must contain numbers");
        }
        out.push_back(e.get<double>());
    }
    return out;
}

}  // namespace

double parse_frequency_value(const nlohmann::json& value) {
    if (value.is_number()) {
        return value.get<double>();
    }
    if (value.is_string()) {
        return parse_frequency_string(value.get<std::string>());
    }
    throw ConfigError("config: frequency must be a number or a string like \"5pi\" or \"pi/3\"");
}

ExperimentConfig config_from_json(const nlohmann::json& j) {
    if (!j.is_object()) {
        throw ConfigError("config: top-level document must be an object");
    }
    ExperimentConfig config;
    try {
        if (j.contains("system")) {
            const auto& sys = j.at("system");
            config.system = RationalTransferFunction(
                number_list(require_field(sys, "numerator"), "system.numerator"),
                number_list(require_field(sys, "denominator"), "system.denominator"));
        }

        const auto& input = require_field(j, "input");
        std::vector<SineComponent> components;
        if (input.contains("components")) {
            for (const auto& c : input.at("components")) {
                components.push_back({require_number(c, "amplitude"),
                                      parse_frequency_value(require_field(c, "frequency")),
                                      require_number(c, "phase")});
            }
        }
        config.input =
            MultisineSignal(require_number(input, "dc_amplitude"), std::move(components));

        const auto& grid = require_field(j, "grid");
        config.grid.period = require_number(grid, "period");
        config.grid.count = static_cast<int>(require_number(grid, "count"));
        if (!(config.grid.period > 0.0) || config.grid.count < 1) {
            throw ConfigError("config: grid needs period > 0 and count >= 1");
        }

        if (j.contains("snr_db")) {
            const auto& snr = j.at("snr_db");
            if (snr.is_string() && snr.get<std::string>() == "inf") {
                config.snr_db = std::numeric_limits<double>::infinity();
            } else if (snr.is_number()) {
                config.snr_db = snr.get<double>();
            } else {
                throw ConfigError("config: snr_db must be a number or \"inf\"");
            }
        }
        if (j.contains("sigma")) {
            config.sigma_override = require_number(j, "sigma");
        }
        if (j.contains("runs")) {
            config.runs = static_cast<int>(require_number(j, "runs"));
            if (config.runs < 1) throw ConfigError("config: runs must be >= 1");
        }
        if (j.contains("master_seed")) {
            const auto& seed = j.at("master_seed");
            if (!seed.is_number_unsigned() && !seed.is_number_integer()) {
                throw ConfigError("config: master_seed must be an unsigned integer");
            }
            config.master_seed = seed.get<std::uint64_t>();
        }
        if (j.contains("mode")) {
            const std::string mode = j.at("mode").get<std::string>();
            if (mode == "frf") {
                config.mode = ExperimentMode::frf;
            } else if (mode == "pem") {
                config.mode = ExperimentMode::pem;
            } else {
                throw ConfigError("config: mode must be \"frf\" or \"pem\"");
            }
        }
        if (j.contains("pem")) {
            const auto& pem = j.at("pem");
            if (pem.contains("max_iterations")) {
                config.pem_options.max_iterations =
                    static_cast<int>(require_number(pem, "max_iterations"));
            }
            if (pem.contains("step_tolerance")) {
                config.pem_options.step_tolerance = require_number(pem, "step_tolerance");
            }
            if (pem.contains("residual_tolerance")) {
                config.pem_options.residual_tolerance = require_number(pem, "residual_tolerance");
            }
            if (pem.contains("damping")) {
                config.pem_options.damping = require_number(pem, "damping");
            }
            if (pem.contains("init_perturbation")) {
                config.init_perturbation = require_number(pem, "init_perturbation");
            }
        }
        if (j.contains("model")) {
            const auto& model = j.at("model");
            config.model = ModelStructure{
                static_cast<int>(require_number(model, "numerator_degree")),
                static_cast<int>(require_number(model, "denominator_degree"))};
        }
        if (j.contains("init_theta")) {
            const auto values = number_list(j.at("init_theta"), "init_theta");
            Eigen::VectorXd theta(static_cast<Eigen::Index>(values.size()));
            for (std::size_t i = 0; i < values.size(); ++i) theta(i) = values[i];
            config.init_theta = std::move(theta);
        }
        if (j.contains("n_grid")) {
            for (const auto& n : number_list(j.at("n_grid"), "n_grid")) {
                config.n_grid.push_back(static_cast<int>(n));
            }
        }
    } catch (const ConfigError&) {
        throw;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    return config;
}

nlohmann::json config_to_json(const ExperimentConfig& config) {
    nlohmann::json j;
    if (config.system) {
        j["system"] = {{"numerator", config.system->numerator()},
                       {"denominator", config.system->denominator()}};
    }
    nlohmann::json comps = nlohmann::json::array();
    for (const auto& c : config.input.components()) {
        comps.push_back({{"amplitude", c.amplitude},
                         {"frequency", c.angular_frequency},
                         {"phase", c.phase}});
    }
    j["input"] = {{"dc_amplitude", config.input.dc_amplitude()}, {"components", comps}};
    j["grid"] = {{"period", config.grid.period}, {"count", config.grid.count}};
    if (config.snr_db) {
        if (std::isinf(*config.snr_db)) {
            j["snr_db"] = "inf";
        } else {
            j["snr_db"] = *config.snr_db;
        }
    }
    if (config.sigma_override) j["sigma"] = *config.sigma_override;
    j["runs"] = config.runs;
    j["master_seed"] = config.master_seed;
    if (config.mode) {
        j["mode"] = (*config.mode == ExperimentMode::frf) ? "frf" : "pem";
    }
    j["pem"] = {{"max_iterations", config.pem_options.max_iterations},
                {"step_tolerance", config.pem_options.step_tolerance},
                {"residual_tolerance", config.pem_options.residual_tolerance},
                {"damping", config.pem_options.damping},
                {"init_perturbation", config.init_perturbation}};
    if (config.model) {
        j["model"] = {{"numerator_degree", config.model->numerator_degree},
                      {"denominator_degree", config.model->denominator_degree}};
    }
    if (config.init_theta) {
        j["init_theta"] = std::vector<double>(config.init_theta->data(),
                                              config.init_theta->data() +
                                                  config.init_theta->size());
    }
    if (!config.n_grid.empty()) j["n_grid"] = config.n_grid;
    return j;
}

ExperimentConfig load_config_file(const std::string& path) {
    std::ifstream file(path);
    if (!file) {
        throw ConfigError("config: cannot open '" + path + "'");
    }
    nlohmann::json j;
    try {
        file >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("config: parse failure in '") + path + "': " + e.what());
    }
    return config_from_json(j);
}

std::string config_digest(const nlohmann::json& j) {
    const std::string canonical = j.dump();  // object keys are already sorted
    std::uint64_t hash = 0xCBF29CE484222325ULL;
    for (unsigned char c : canonical) {
        hash ^= c;
        hash *= 0x100000001B3ULL;
    }
    char out[17];
    std::snprintf(out, sizeof(out), "%016llx", static_cast<unsigned long long>(hash));
    return out;
}

std::string format_number(double value) {
    char out[64];
    std::snprintf(out, sizeof(out), "%.17g", value);
    return out;
}

}  // namespace sysid
