/*
 * Copyright 2026 snnspace contributors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "snnspace/config.hpp"

#include <charconv>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <sstream>
#include <unordered_set>

namespace snnspace {

namespace {

// ---------------------------------------------------------------------------
// Scalar lexing: strict (whole token consumed), locale-independent
// ---------------------------------------------------------------------------

std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

long long lex_i64(const std::string& v) {
    long long out = 0;
    auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || ptr != v.data() + v.size()) {
        throw ParseError("'" + v + "' is not an integer");
    }
    return out;
}

std::uint64_t lex_u64(const std::string& v) {
    std::uint64_t out = 0;
    auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || ptr != v.data() + v.size()) {
        throw ParseError("'" + v + "' is not an unsigned integer");
    }
    return out;
}

double lex_f64(const std::string& v) {
    double out = 0.0;
    auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || ptr != v.data() + v.size()) {
        throw ParseError("'" + v + "' is not a number");
    }
    return out;
}

bool lex_bool(const std::string& v) {
    if (v == "true") return true;
    if (v == "false") return false;
    throw ParseError("'" + v + "' is not a boolean (use true/false)");
}

std::string fmt_f64(double value) {
    // Shortest digit string that parses back to the same double, so
    // serialize -> parse is lossless without printing 17 digits for 0.5.
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
    (void)ec;
    return std::string(buf, ptr);
}

std::string fmt_int_list(const std::vector<int>& xs) {
    std::string out;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        if (i) out += ',';
        out += std::to_string(xs[i]);
    }
    return out;
}

std::vector<int> lex_int_list(const std::string& v) {
    std::vector<int> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) {
        out.push_back(static_cast<int>(lex_i64(trim(item))));
    }
    if (out.empty()) throw ParseError("expected a comma-separated integer list");
    return out;
}

// ---------------------------------------------------------------------------
// Field table: one row per key, shared by parse and serialize so the two
// can never drift apart
// ---------------------------------------------------------------------------

struct FieldDef {
    const char* key;
    std::function<std::string(const ExperimentConfig&)> get;
    std::function<void(ExperimentConfig&, const std::string&)> set;
};

// Each maker takes an accessor `ExperimentConfig& -> T&` used for both
// directions (reading goes through a const_cast that never writes).
template <class Ref>
ExperimentConfig& mut(const ExperimentConfig& c) {
    return const_cast<ExperimentConfig&>(c);
}

template <class Ref>
FieldDef f64_field(const char* key, Ref ref) {
    return {key,
            [ref](const ExperimentConfig& c) { return fmt_f64(ref(mut<Ref>(c))); },
            [ref](ExperimentConfig& c, const std::string& v) { ref(c) = lex_f64(v); }};
}

template <class Ref>
FieldDef int_field(const char* key, Ref ref) {
    return {key,
            [ref](const ExperimentConfig& c) { return std::to_string(ref(mut<Ref>(c))); },
            [ref](ExperimentConfig& c, const std::string& v) {
                ref(c) = static_cast<int>(lex_i64(v));
            }};
}

template <class Ref>
FieldDef u64_field(const char* key, Ref ref) {
    return {key,
            [ref](const ExperimentConfig& c) { return std::to_string(ref(mut<Ref>(c))); },
            [ref](ExperimentConfig& c, const std::string& v) { ref(c) = lex_u64(v); }};
}

template <class Ref>
FieldDef bool_field(const char* key, Ref ref) {
    return {key,
            [ref](const ExperimentConfig& c) {
                return std::string(ref(mut<Ref>(c)) ? "true" : "false");
            },
            [ref](ExperimentConfig& c, const std::string& v) { ref(c) = lex_bool(v); }};
}

template <class Ref>
FieldDef str_field(const char* key, Ref ref) {
    return {key,
            [ref](const ExperimentConfig& c) { return ref(mut<Ref>(c)); },
            [ref](ExperimentConfig& c, const std::string& v) { ref(c) = v; }};
}

const std::vector<FieldDef>& field_table() {
    static const std::vector<FieldDef> table = [] {
        std::vector<FieldDef> t;

        t.push_back(u64_field("run.seed",
                              [](ExperimentConfig& c) -> std::uint64_t& { return c.seed; }));
        t.push_back({"run.method",
                     [](const ExperimentConfig& c) { return std::string(method_name(c.method)); },
                     [](ExperimentConfig& c, const std::string& v) {
                         c.method = method_from_name(v);
                     }});
        t.push_back(str_field("run.checkpoint",
                              [](ExperimentConfig& c) -> std::string& { return c.checkpoint; }));
        t.push_back(str_field("run.dataset_cache", [](ExperimentConfig& c) -> std::string& {
            return c.dataset_cache;
        }));
        t.push_back(str_field("run.output_dir",
                              [](ExperimentConfig& c) -> std::string& { return c.output_dir; }));
        t.push_back(int_field("run.threads",
                              [](ExperimentConfig& c) -> int& { return c.threads; }));

        t.push_back({"corrupt.kind",
                     [](const ExperimentConfig& c) {
                         return std::string(corruption_name(c.corruption));
                     },
                     [](ExperimentConfig& c, const std::string& v) {
                         c.corruption = corruption_from_name(v);
                     }});
        t.push_back(int_field("corrupt.level",
                              [](ExperimentConfig& c) -> int& { return c.corruption_level; }));

        t.push_back(u64_field(
            "data.seed", [](ExperimentConfig& c) -> std::uint64_t& { return c.data_seed; }));
        t.push_back(int_field("data.image_size",
                              [](ExperimentConfig& c) -> int& { return c.data.image_size; }));
        t.push_back(int_field("data.train_per_class", [](ExperimentConfig& c) -> int& {
            return c.data.train_per_class;
        }));
        t.push_back(int_field("data.test_per_class", [](ExperimentConfig& c) -> int& {
            return c.data.test_per_class;
        }));
        t.push_back(f64_field("data.noise_floor", [](ExperimentConfig& c) -> double& {
            return c.data.noise_floor;
        }));
        t.push_back(
            f64_field("data.jitter", [](ExperimentConfig& c) -> double& { return c.data.jitter; }));

        t.push_back({"arch.conv_channels",
                     [](const ExperimentConfig& c) { return fmt_int_list(c.arch.conv_channels); },
                     [](ExperimentConfig& c, const std::string& v) {
                         c.arch.conv_channels = lex_int_list(v);
                     }});
        t.push_back(int_field("arch.dense_units", [](ExperimentConfig& c) -> int& {
            return c.arch.dense_units;
        }));
        t.push_back(
            bool_field("arch.bias", [](ExperimentConfig& c) -> bool& { return c.arch.bias; }));
        t.push_back(f64_field("arch.init_gain", [](ExperimentConfig& c) -> double& {
            return c.arch.init_gain;
        }));
        t.push_back(bool_field("arch.collapse_spatial", [](ExperimentConfig& c) -> bool& {
            return c.arch.collapse_spatial;
        }));

        t.push_back(f64_field("neuron.tau_m", [](ExperimentConfig& c) -> double& {
            return c.neuron.tau_m;
        }));
        t.push_back(
            f64_field("neuron.u_th", [](ExperimentConfig& c) -> double& { return c.neuron.u_th; }));
        t.push_back(f64_field("neuron.resistance", [](ExperimentConfig& c) -> double& {
            return c.neuron.resistance;
        }));

        t.push_back(
            int_field("train.epochs", [](ExperimentConfig& c) -> int& { return c.train.epochs; }));
        t.push_back(int_field("train.batch_size", [](ExperimentConfig& c) -> int& {
            return c.train.batch_size;
        }));
        t.push_back(
            f64_field("train.eta", [](ExperimentConfig& c) -> double& { return c.train.eta; }));
        t.push_back(f64_field("train.eta_decay", [](ExperimentConfig& c) -> double& {
            return c.train.eta_decay;
        }));
        t.push_back(f64_field("train.momentum", [](ExperimentConfig& c) -> double& {
            return c.train.momentum;
        }));
        t.push_back(f64_field("train.clip_norm", [](ExperimentConfig& c) -> double& {
            return c.train.clip_norm;
        }));
        t.push_back(int_field("train.time_steps", [](ExperimentConfig& c) -> int& {
            return c.train.time_steps;
        }));
        t.push_back(int_field("train.patience", [](ExperimentConfig& c) -> int& {
            return c.train.patience;
        }));
        t.push_back(f64_field("train.augment_prob", [](ExperimentConfig& c) -> double& {
            return c.train.augment_prob;
        }));
        t.push_back(f64_field("train.divergence_factor", [](ExperimentConfig& c) -> double& {
            return c.train.divergence_factor;
        }));
        t.push_back(f64_field("train.calibrate_target", [](ExperimentConfig& c) -> double& {
            return c.train.calibrate_target;
        }));
        t.push_back(int_field("train.calibrate_rounds", [](ExperimentConfig& c) -> int& {
            return c.train.calibrate_rounds;
        }));
        t.push_back(int_field("train.calibrate_samples", [](ExperimentConfig& c) -> int& {
            return c.train.calibrate_samples;
        }));
        t.push_back(bool_field("train.refit", [](ExperimentConfig& c) -> bool& {
            return c.train.refit;
        }));
        t.push_back(int_field("train.refit_iters", [](ExperimentConfig& c) -> int& {
            return c.train.refit_iters;
        }));
        t.push_back(f64_field("train.refit_eta", [](ExperimentConfig& c) -> double& {
            return c.train.refit_eta;
        }));
        t.push_back(f64_field("train.augment.severity", [](ExperimentConfig& c) -> double& {
            return c.train.augment.severity;
        }));
        t.push_back(int_field("train.augment.mixture_width", [](ExperimentConfig& c) -> int& {
            return c.train.augment.mixture_width;
        }));
        t.push_back(int_field("train.augment.min_depth", [](ExperimentConfig& c) -> int& {
            return c.train.augment.min_depth;
        }));
        t.push_back(int_field("train.augment.max_depth", [](ExperimentConfig& c) -> int& {
            return c.train.augment.max_depth;
        }));

        t.push_back(
            f64_field("adapt.eta", [](ExperimentConfig& c) -> double& { return c.adapt.eta; }));
        t.push_back(int_field("adapt.num_views", [](ExperimentConfig& c) -> int& {
            return c.adapt.num_views;
        }));
        t.push_back(int_field("adapt.time_steps", [](ExperimentConfig& c) -> int& {
            return c.adapt.time_steps;
        }));
        t.push_back({"adapt.aggregation",
                     [](const ExperimentConfig& c) {
                         return std::string(aggregation_name(c.adapt.aggregation));
                     },
                     [](ExperimentConfig& c, const std::string& v) {
                         c.adapt.aggregation = aggregation_from_name(v);
                     }});
        t.push_back(f64_field("adapt.smoothing_sigma", [](ExperimentConfig& c) -> double& {
            return c.adapt.smoothing_sigma;
        }));
        t.push_back({"adapt.scope",
                     [](const ExperimentConfig& c) {
                         return std::string(scope_name(c.adapt.scope));
                     },
                     [](ExperimentConfig& c, const std::string& v) {
                         c.adapt.scope = scope_from_name(v);
                     }});
        t.push_back(f64_field("adapt.lambda_mmd", [](ExperimentConfig& c) -> double& {
            return c.adapt.lambda_mmd;
        }));
        t.push_back(f64_field("adapt.mmd_bandwidth", [](ExperimentConfig& c) -> double& {
            return c.adapt.mmd_bandwidth;
        }));
        t.push_back(f64_field("adapt.augment.severity", [](ExperimentConfig& c) -> double& {
            return c.adapt.augment.severity;
        }));
        t.push_back(int_field("adapt.augment.mixture_width", [](ExperimentConfig& c) -> int& {
            return c.adapt.augment.mixture_width;
        }));
        t.push_back(int_field("adapt.augment.min_depth", [](ExperimentConfig& c) -> int& {
            return c.adapt.augment.min_depth;
        }));
        t.push_back(int_field("adapt.augment.max_depth", [](ExperimentConfig& c) -> int& {
            return c.adapt.augment.max_depth;
        }));
        return t;
    }();
    return table;
}

const FieldDef* find_field(const std::string& key) {
    for (const FieldDef& f : field_table()) {
        if (key == f.key) return &f;
    }
    return nullptr;
}

} // namespace

std::string format_double(double value) { return fmt_f64(value); }

const char* method_name(Method method) {
    switch (method) {
        case Method::NoAdapt: return "no_adapt";
        case Method::Space: return "space";
    }
    return "unknown";
}

Method method_from_name(const std::string& name) {
    if (name == "no_adapt") return Method::NoAdapt;
    if (name == "space") return Method::Space;
    throw ParseError("unknown method '" + name + "' (use no_adapt or space)");
}

const char* aggregation_name(Aggregation aggregation) {
    switch (aggregation) {
        case Aggregation::SpikeCount: return "count";
        case Aggregation::MeanPotential: return "mean_potential";
        case Aggregation::PerStep: return "per_step";
    }
    return "unknown";
}

Aggregation aggregation_from_name(const std::string& name) {
    if (name == "count") return Aggregation::SpikeCount;
    if (name == "mean_potential") return Aggregation::MeanPotential;
    if (name == "per_step") return Aggregation::PerStep;
    throw ParseError("unknown aggregation '" + name +
                     "' (use count, mean_potential or per_step)");
}

const char* scope_name(DistScope scope) {
    switch (scope) {
        case DistScope::PerChannel: return "per_channel";
        case DistScope::Global: return "global";
    }
    return "unknown";
}

DistScope scope_from_name(const std::string& name) {
    if (name == "per_channel") return DistScope::PerChannel;
    if (name == "global") return DistScope::Global;
    throw ParseError("unknown scope '" + name + "' (use per_channel or global)");
}

void ExperimentConfig::validate() const {
    data.validate();
    train.validate();
    adapt.validate();
    if (corruption != CorruptionKind::None &&
        (corruption_level < 1 || corruption_level > 5)) {
        throw ConfigError("config: corrupt.level must be in 1..5");
    }
    if (arch.conv_channels.empty()) {
        throw ConfigError("config: arch.conv_channels must not be empty");
    }
    for (int c : arch.conv_channels) {
        if (c < 1) throw ConfigError("config: arch.conv_channels entries must be positive");
    }
    if (arch.dense_units < 0) {
        throw ConfigError("config: arch.dense_units must be non-negative");
    }
    if (!(arch.init_gain > 0.0)) {
        throw ConfigError("config: arch.init_gain must be positive");
    }
    if (!(neuron.tau_m >= 1.0)) {
        throw ConfigError("config: neuron.tau_m must be at least 1");
    }
    if (!(neuron.u_th > 0.0)) {
        throw ConfigError("config: neuron.u_th must be positive");
    }
    if (!(neuron.resistance > 0.0)) {
        throw ConfigError("config: neuron.resistance must be positive");
    }
    if (threads < 0) {
        throw ConfigError("config: run.threads must be non-negative");
    }
}

ExperimentConfig parse_config(const std::string& text) {
    ExperimentConfig config;
    std::unordered_set<std::string> seen;
    std::istringstream in(text);
    std::string raw;
    int line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        const std::size_t hash = raw.find('#');
        if (hash != std::string::npos) raw.erase(hash);
        const std::string line = trim(raw);
        if (line.empty()) continue;

        const std::size_t eq = line.find('=');
        if (eq == std::string::npos) {
            throw ParseError("line " + std::to_string(line_no) +
                             ": expected 'key = value', got '" + line + "'");
        }
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty()) {
            throw ParseError("line " + std::to_string(line_no) + ": missing key");
        }
        const FieldDef* field = find_field(key);
        if (field == nullptr) {
            throw ParseError("line " + std::to_string(line_no) + ": unknown key '" +
                             key + "'");
        }
        if (!seen.insert(key).second) {
            throw ParseError("line " + std::to_string(line_no) + ": duplicate key '" +
                             key + "'");
        }
        try {
            field->set(config, value);
        } catch (const Error& e) {
            throw ParseError("line " + std::to_string(line_no) + ": key '" + key +
                             "': " + e.what());
        }
    }
    return config;
}

void set_config_field(ExperimentConfig& config, const std::string& key,
                      const std::string& value) {
    const FieldDef* field = find_field(key);
    if (field == nullptr) throw ParseError("unknown key '" + key + "'");
    try {
        field->set(config, value);
    } catch (const Error& e) {
        throw ParseError("key '" + key + "': " + e.what());
    }
}

std::string get_config_field(const ExperimentConfig& config, const std::string& key) {
    const FieldDef* field = find_field(key);
    if (field == nullptr) throw ParseError("unknown key '" + key + "'");
    return field->get(config);
}

std::string serialize_config(const ExperimentConfig& config) {
    std::string out;
    std::string group;
    for (const FieldDef& f : field_table()) {
        // Blank line between groups (prefix up to the first dot).
        const std::string key(f.key);
        const std::string g = key.substr(0, key.find('.'));
        if (g != group) {
            if (!out.empty()) out += '\n';
            group = g;
        }
        out += key;
        out += " = ";
        out += f.get(config);
        out += '\n';
    }
    return out;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("config: cannot open '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config(buf.str());
}

void save_config(const ExperimentConfig& config, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("config: cannot write '" + path + "'");
    out << serialize_config(config);
    if (!out) throw IoError("config: write to '" + path + "' failed");
}

bool apply_env_overrides(ExperimentConfig& config) {
    const char* env = std::getenv("SPACE_SEED");
    if (env == nullptr || *env == '\0') return false;
    try {
        config.seed = lex_u64(env);
    } catch (const Error&) {
        throw ConfigError("SPACE_SEED must be a decimal unsigned integer, got '" +
                          std::string(env) + "'");
    }
    return true;
}

} // namespace snnspace
