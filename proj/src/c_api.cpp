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

#include "snnspace/c_api.h"

#include <cstdlib>
#include <cstring>
#include <exception>
#include <new>
#include <string>
#include <vector>

#include "json.hpp"

#include "snnspace/config.hpp"
#include "snnspace/errors.hpp"
#include "snnspace/harness.hpp"
#include "snnspace/stats.hpp"

using namespace snnspace;

// The opaque handle types are plain wrappers: the C surface owns exactly
// one C++ value per handle and nothing else, so lifetime is a new/delete
// pair and every operation borrows the wrapped value.
struct space_config {
    ExperimentConfig value;
};
struct space_report {
    RunReport value;
};
struct space_sweep {
    SweepReport value;
};
struct space_traces {
    std::vector<AdaptTrace> value;
};

namespace {

// Most recent failure message per thread. Success clears it, so
// space_last_error() after SPACE_OK is the empty string, never stale.
thread_local std::string g_last_error;

space_status fail(space_status code, const std::string& message) {
    g_last_error = message;
    return code;
}

space_status ok() {
    g_last_error.clear();
    return SPACE_OK;
}

// Run `fn`, translating the library's exception taxonomy into status
// codes. The catch order only needs the library types ahead of
// std::exception; they are siblings of one another.
template <class Fn>
space_status guarded(Fn&& fn) {
    try {
        fn();
        return ok();
    } catch (const ParseError& e) {
        return fail(SPACE_ERR_PARSE, e.what());
    } catch (const ConfigError& e) {
        return fail(SPACE_ERR_CONFIG, e.what());
    } catch (const ShapeError& e) {
        return fail(SPACE_ERR_INVALID_ARGUMENT, e.what());
    } catch (const NumericError& e) {
        return fail(SPACE_ERR_NUMERIC, e.what());
    } catch (const IoError& e) {
        return fail(SPACE_ERR_IO, e.what());
    } catch (const IntegrityError& e) {
        return fail(SPACE_ERR_IO, e.what());
    } catch (const std::exception& e) {
        return fail(SPACE_ERR_INTERNAL, e.what());
    } catch (...) {
        return fail(SPACE_ERR_INTERNAL, "unknown error");
    }
}

// malloc (not new[]) so the string can be released from C with free()
// semantics via space_string_free.
char* copy_string(const std::string& text) {
    char* out = static_cast<char*>(std::malloc(text.size() + 1));
    if (out == nullptr) throw std::bad_alloc();
    std::memcpy(out, text.c_str(), text.size() + 1);
    return out;
}

std::string trimmed(const std::string& text) {
    std::size_t begin = text.find_first_not_of(" \t");
    if (begin == std::string::npos) return "";
    std::size_t end = text.find_last_not_of(" \t");
    return text.substr(begin, end - begin + 1);
}

SweepAxis axis_from_name(const std::string& name) {
    // Accept the short CLI spelling and the dotted config key it varies.
    if (name == "eta" || name == "adapt.eta") return SweepAxis::Eta;
    if (name == "views" || name == "adapt.num_views") return SweepAxis::Views;
    if (name == "severity" || name == "adapt.augment.severity") {
        return SweepAxis::Severity;
    }
    if (name == "scope" || name == "adapt.scope") return SweepAxis::Scope;
    if (name == "aggregation" || name == "adapt.aggregation") {
        return SweepAxis::Aggregation;
    }
    throw ParseError("unknown sweep axis '" + name +
                     "' (want eta, views, severity, scope or aggregation)");
}

std::vector<std::string> grid_from_csv(const std::string& text) {
    std::vector<std::string> out;
    std::string item;
    for (char ch : text) {
        if (ch == ',') {
            out.push_back(trimmed(item));
            item.clear();
        } else {
            item += ch;
        }
    }
    out.push_back(trimmed(item));
    for (const std::string& value : out) {
        if (value.empty()) throw ParseError("empty value in sweep grid '" + text + "'");
    }
    return out;
}

Sidedness sidedness_from_name(const std::string& name) {
    if (name == "greater") return Sidedness::Greater;
    if (name == "less") return Sidedness::Less;
    if (name == "two_sided") return Sidedness::TwoSided;
    throw ParseError("unknown sidedness '" + name +
                     "' (want greater, less or two_sided)");
}

} // namespace

extern "C" {

const char* space_version(void) { return kVersion; }

const char* space_last_error(void) { return g_last_error.c_str(); }

void space_string_free(char* text) { std::free(text); }

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

space_status space_config_create(space_config** out) {
    if (out == nullptr) return fail(SPACE_ERR_INVALID_ARGUMENT, "out pointer is null");
    return guarded([&] { *out = new space_config{}; });
}

space_status space_config_parse(const char* text, space_config** out) {
    if (text == nullptr) return fail(SPACE_ERR_INVALID_ARGUMENT, "config text is null");
    if (out == nullptr) return fail(SPACE_ERR_INVALID_ARGUMENT, "out pointer is null");
    return guarded([&] { *out = new space_config{parse_config(text)}; });
}

space_status space_config_load(const char* path, space_config** out) {
    if (path == nullptr) return fail(SPACE_ERR_INVALID_ARGUMENT, "path is null");
    if (out == nullptr) return fail(SPACE_ERR_INVALID_ARGUMENT, "out pointer is null");
    return guarded([&] { *out = new space_config{load_config(path)}; });
}

space_status space_config_set(space_config* config, const char* key,
                              const char* value) {
    if (config == nullptr) return fail(SPACE_ERR_INVALID_ARGUMENT, "config handle is null");
    if (key == nullptr) return fail(SPACE_ERR_INVALID_ARGUMENT, "key is null");
    if (value == nullptr) return fail(SPACE_ERR_INVALID_ARGUMENT, "value is null");
    return guarded([&] { set_config_field(config->value, key, value); });
}

space_status space_config_get(const space_config* config, const char* key,
                              char** out_value) {
    if (config == nullptr) return fail(SPACE_ERR_INVALID_ARGUMENT, "config handle is null");
    if (key == nullptr) return fail(SPACE_ERR_INVALID_ARGUMENT, "key is null");
    if (out_value == nullptr) return fail(SPACE_ERR_INVALID_ARGUMENT, "out pointer is null");
    return guarded([&] { *out_value = copy_string(get_config_field(config->value, key)); });
}

space_status space_config_serialize(const space_config* config, char** out_text) {
    if (config == nullptr) return fail(SPACE_ERR_INVALID_ARGUMENT, "config handle is null");
    if (out_text == nullptr) return fail(SPACE_ERR_INVALID_ARGUMENT, "out pointer is null");
    return guarded([&] { *out_text = copy_string(serialize_config(config->value)); });
}

space_status space_config_save(const space_config* config, const char* path) {
    if (config == nullptr) return fail(SPACE_ERR_INVALID_ARGUMENT, "config handle is null");
    if (path == nullptr) return fail(SPACE_ERR_INVALID_ARGUMENT, "path is null");
    return guarded([&] { save_config(config->value, path); });
}

space_status space_config_apply_env(space_config* config, int* out_changed) {
    if (config == nullptr) return fail(SPACE_ERR_INVALID_ARGUMENT, "config handle is null");
    return guarded([&] {
        const bool changed = apply_env_overrides(config->value);
        if (out_changed != nullptr) *out_changed = changed ? 1 : 0;
    });
}

space_status space_config_validate(const space_config* config) {
    if (config == nullptr) return fail(SPACE_ERR_INVALID_ARGUMENT, "config handle is null");
    return guarded([&] { config->value.validate(); });
}

void space_config_free(space_config* config) { delete config; }

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

space_status space_train(const space_config* config, char** out_summary_json) {
    if (config == nullptr) return fail(SPACE_ERR_INVALID_ARGUMENT, "config handle is null");
    return guarded([&] {
        const TrainPipelineResult result = train_pipeline(config->value);
        if (out_summary_json == nullptr) return;
        nlohmann::ordered_json summary;
        summary["test_accuracy"] = result.test_accuracy;
        summary["epochs_run"] = result.stats.epochs_run;
        summary["best_epoch"] = result.stats.best_epoch;
        summary["diverged"] = result.stats.diverged;
        summary["refitted"] = result.refitted;
        if (result.refitted) {
            summary["refit_train_accuracy"] = result.refit.train_accuracy;
            summary["refit_final_loss"] = result.refit.final_loss;
        } else {
            summary["refit_train_accuracy"] = nullptr;
            summary["refit_final_loss"] = nullptr;
        }
        summary["train_seconds"] = result.train_seconds;
        *out_summary_json = copy_string(summary.dump(2) + "\n");
    });
}

// ---------------------------------------------------------------------------
// Experiments
// ---------------------------------------------------------------------------

space_status space_run(const space_config* config, space_report** out) {
    if (config == nullptr) return fail(SPACE_ERR_INVALID_ARGUMENT, "config handle is null");
    if (out == nullptr) return fail(SPACE_ERR_INVALID_ARGUMENT, "out pointer is null");
    return guarded([&] { *out = new space_report{run_experiment(config->value)}; });
}

space_status space_report_json(const space_report* report, char** out_json) {
    if (report == nullptr) return fail(SPACE_ERR_INVALID_ARGUMENT, "report handle is null");
    if (out_json == nullptr) return fail(SPACE_ERR_INVALID_ARGUMENT, "out pointer is null");
    return guarded([&] { *out_json = copy_string(report_json_text(report->value)); });
}

space_status space_report_accuracy(const space_report* report, double* out) {
    if (report == nullptr) return fail(SPACE_ERR_INVALID_ARGUMENT, "report handle is null");
    if (out == nullptr) return fail(SPACE_ERR_INVALID_ARGUMENT, "out pointer is null");
    *out = report->value.accuracy;
    return ok();
}

space_status space_report_noadapt_accuracy(const space_report* report, double* out) {
    if (report == nullptr) return fail(SPACE_ERR_INVALID_ARGUMENT, "report handle is null");
    if (out == nullptr) return fail(SPACE_ERR_INVALID_ARGUMENT, "out pointer is null");
    *out = report->value.noadapt_accuracy;
    return ok();
}

space_status space_report_clean_accuracy(const space_report* report, double* out) {
    if (report == nullptr) return fail(SPACE_ERR_INVALID_ARGUMENT, "report handle is null");
    if (out == nullptr) return fail(SPACE_ERR_INVALID_ARGUMENT, "out pointer is null");
    *out = report->value.clean_accuracy;
    return ok();
}

space_status space_report_frac_similarity_up(const space_report* report, double* out) {
    if (report == nullptr) return fail(SPACE_ERR_INVALID_ARGUMENT, "report handle is null");
    if (out == nullptr) return fail(SPACE_ERR_INVALID_ARGUMENT, "out pointer is null");
    *out = report->value.frac_similarity_up;
    return ok();
}

space_status space_report_num_samples(const space_report* report, int* out) {
    if (report == nullptr) return fail(SPACE_ERR_INVALID_ARGUMENT, "report handle is null");
    if (out == nullptr) return fail(SPACE_ERR_INVALID_ARGUMENT, "out pointer is null");
    *out = report->value.samples;
    return ok();
}

void space_report_free(space_report* report) { delete report; }

// ---------------------------------------------------------------------------
// Sweeps
// ---------------------------------------------------------------------------

space_status space_sweep_run(const space_config* base, const char* axis,
                             const char* grid_csv, space_sweep** out) {
    if (base == nullptr) return fail(SPACE_ERR_INVALID_ARGUMENT, "config handle is null");
    if (axis == nullptr) return fail(SPACE_ERR_INVALID_ARGUMENT, "axis is null");
    if (out == nullptr) return fail(SPACE_ERR_INVALID_ARGUMENT, "out pointer is null");
    return guarded([&] {
        const SweepAxis parsed = axis_from_name(axis);
        if (grid_csv == nullptr || *grid_csv == '\0') {
            *out = new space_sweep{sweep(base->value, parsed)};
        } else {
            *out = new space_sweep{sweep(base->value, parsed, grid_from_csv(grid_csv))};
        }
    });
}

space_status space_sweep_csv(const space_sweep* sweep, char** out_csv) {
    if (sweep == nullptr) return fail(SPACE_ERR_INVALID_ARGUMENT, "sweep handle is null");
    if (out_csv == nullptr) return fail(SPACE_ERR_INVALID_ARGUMENT, "out pointer is null");
    return guarded([&] { *out_csv = copy_string(sweep_csv_text(sweep->value)); });
}

space_status space_sweep_num_points(const space_sweep* sweep, int* out) {
    if (sweep == nullptr) return fail(SPACE_ERR_INVALID_ARGUMENT, "sweep handle is null");
    if (out == nullptr) return fail(SPACE_ERR_INVALID_ARGUMENT, "out pointer is null");
    *out = static_cast<int>(sweep->value.points.size());
    return ok();
}

void space_sweep_free(space_sweep* sweep) { delete sweep; }

// ---------------------------------------------------------------------------
// Significance testing
// ---------------------------------------------------------------------------

space_status space_wilcoxon(const double* x, const double* y, int n,
                            const char* sidedness, double* out_w, double* out_p,
                            int* out_n_used, int* out_exact) {
    if (x == nullptr || y == nullptr) {
        return fail(SPACE_ERR_INVALID_ARGUMENT, "sample array is null");
    }
    if (n <= 0) return fail(SPACE_ERR_INVALID_ARGUMENT, "sample count must be positive");
    if (sidedness == nullptr) return fail(SPACE_ERR_INVALID_ARGUMENT, "sidedness is null");
    return guarded([&] {
        const WilcoxonResult result = wilcoxon_signed_rank(
            std::vector<double>(x, x + n), std::vector<double>(y, y + n),
            sidedness_from_name(sidedness));
        if (out_w != nullptr) *out_w = result.w;
        if (out_p != nullptr) *out_p = result.p;
        if (out_n_used != nullptr) *out_n_used = result.n;
        if (out_exact != nullptr) *out_exact = result.exact ? 1 : 0;
    });
}

// ---------------------------------------------------------------------------
// Trace re-reading
// ---------------------------------------------------------------------------

space_status space_traces_load(const char* path, space_traces** out) {
    if (path == nullptr) return fail(SPACE_ERR_INVALID_ARGUMENT, "path is null");
    if (out == nullptr) return fail(SPACE_ERR_INVALID_ARGUMENT, "out pointer is null");
    return guarded([&] { *out = new space_traces{load_traces(path)}; });
}

space_status space_traces_count(const space_traces* traces, int* out) {
    if (traces == nullptr) return fail(SPACE_ERR_INVALID_ARGUMENT, "traces handle is null");
    if (out == nullptr) return fail(SPACE_ERR_INVALID_ARGUMENT, "out pointer is null");
    *out = static_cast<int>(traces->value.size());
    return ok();
}

space_status space_traces_summary_json(const space_traces* traces, char** out_json) {
    if (traces == nullptr) return fail(SPACE_ERR_INVALID_ARGUMENT, "traces handle is null");
    if (out_json == nullptr) return fail(SPACE_ERR_INVALID_ARGUMENT, "out pointer is null");
    return guarded([&] {
        const TraceSummary summary = summarize_traces(traces->value);
        nlohmann::ordered_json doc;
        doc["samples"] = summary.samples;
        doc["accuracy"] = summary.accuracy;
        doc["noadapt_accuracy"] = summary.noadapt_accuracy;
        doc["mean_pre_similarity"] = summary.mean_pre_similarity;
        doc["mean_post_similarity"] = summary.mean_post_similarity;
        doc["frac_similarity_up"] = summary.frac_similarity_up;
        doc["fallbacks"] = summary.fallbacks;
        *out_json = copy_string(doc.dump(2) + "\n");
    });
}

space_status space_traces_histogram_csv(const space_traces* traces, int bins,
                                        char** out_csv) {
    if (traces == nullptr) return fail(SPACE_ERR_INVALID_ARGUMENT, "traces handle is null");
    if (out_csv == nullptr) return fail(SPACE_ERR_INVALID_ARGUMENT, "out pointer is null");
    return guarded([&] {
        *out_csv = copy_string(histogram_csv_text(similarity_histogram(traces->value, bins)));
    });
}

void space_traces_free(space_traces* traces) { delete traces; }

} // extern "C"
