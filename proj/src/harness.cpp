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

#include "snnspace/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <exception>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <thread>

#include "json.hpp"

#include "snnspace/adapt.hpp"
#include "snnspace/augment.hpp"
#include "snnspace/checkpoint.hpp"
#include "snnspace/encode.hpp"

namespace snnspace {

namespace {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;
using clock_type = std::chrono::steady_clock;

double seconds_since(clock_type::time_point start) {
    return std::chrono::duration<double>(clock_type::now() - start).count();
}

void ensure_parent_dir(const std::string& path) {
    const fs::path parent = fs::path(path).parent_path();
    if (!parent.empty()) fs::create_directories(parent);
}

std::ofstream open_out(const std::string& path) {
    std::ofstream out(path, std::ios::binary); // LF line ends on every platform
    if (!out) throw IoError("cannot open " + path + " for writing");
    return out;
}

/// Build/calibrate/train/refit per the config on an already resolved
/// dataset. All randomness descends from run.seed.
struct PipelineModel {
    NetworkParams params;
    TrainStats stats;
    RefitReport refit;
    bool refitted = false;
};

PipelineModel run_pipeline(const ExperimentConfig& config, const DatasetPair& data) {
    Rng root(config.seed);
    PipelineModel out;
    Rng init_rng = root.split("model-init");
    out.params = build_network(config.arch, 1, config.data.image_size,
                               config.data.image_size, init_rng);
    out.params.neuron = config.neuron;
    if (config.train.calibrate_rounds > 0) {
        Rng cal_rng = root.split("calibrate");
        calibrate_firing_rates(out.params, data.train, config.train.time_steps,
                               config.train.calibrate_samples, config.train.calibrate_target,
                               config.train.calibrate_rounds, cal_rng);
    }
    Rng train_rng = root.split("train");
    out.stats = train_source(out.params, data.train, config.train, train_rng);
    if (config.train.refit) {
        Rng refit_rng = root.split("refit");
        out.refit = refit_readout(out.params, data.train, config.train, refit_rng);
        out.refitted = true;
    }
    return out;
}

NetworkParams resolve_model(const ExperimentConfig& config, const DatasetPair& data) {
    if (!config.checkpoint.empty()) {
        NetworkParams params = load_checkpoint(config.checkpoint);
        finalize_network(params, config.neuron, 1, config.data.image_size,
                         config.data.image_size);
        return params;
    }
    return run_pipeline(config, data).params;
}

/// One test sample's episode. `root` is the run stream; the sample only
/// ever touches its own child, so episodes are order-independent.
AdaptTrace run_sample(const NetworkParams& model, const Tensor& input, int label,
                      std::size_t index, const ExperimentConfig& config, const Rng& root) {
    Rng sample_rng = root.split("sample", index);
    AdaptTrace trace;
    trace.sample_id = static_cast<int>(index);
    trace.label = label;
    trace.seed = sample_rng.key();
    if (config.method == Method::NoAdapt) {
        // Mirrors evaluate()'s per-sample body, stream and all.
        Rng enc = sample_rng.split("encode-original");
        const SpikeTrain spikes = poisson_encode(input, config.adapt.time_steps, enc);
        const ForwardRecord rec = forward(model, spikes, /*record_tape=*/false);
        trace.pred_before = trace.pred_after = argmax_score(rec.scores);
    } else {
        const AdaptOutcome out = adapt_single(model, input, config.adapt, sample_rng);
        trace.pred_before = out.pred_before;
        trace.pred_after = out.pred_after;
        trace.pre_loss = out.pre_loss;
        trace.post_loss = out.post_loss;
        trace.pre_mean_sim = out.pre_mean_similarity;
        trace.post_mean_sim = out.post_mean_similarity;
        trace.fallback = out.fallback;
        trace.num_updates = out.num_updates;
    }
    return trace;
}

std::string csv_escape(const std::string& value) {
    if (value.find_first_of(",\"\n") == std::string::npos) return value;
    std::string quoted = "\"";
    for (char c : value) {
        if (c == '"') quoted += '"';
        quoted += c;
    }
    quoted += '"';
    return quoted;
}

} // namespace

DatasetPair resolve_dataset(const ExperimentConfig& config) {
    config.data.validate();
    const std::string train_path = config.dataset_cache.empty()
                                       ? std::string()
                                       : config.dataset_cache + ".train.snnd";
    const std::string test_path = config.dataset_cache.empty()
                                      ? std::string()
                                      : config.dataset_cache + ".test.snnd";
    if (!train_path.empty() && fs::exists(train_path) && fs::exists(test_path)) {
        DatasetPair pair;
        pair.train = load_dataset(train_path);
        pair.test = load_dataset(test_path);
        for (const Dataset* split : {&pair.train, &pair.test}) {
            if (split->size() == 0) {
                throw IoError("dataset cache " + config.dataset_cache + " holds an empty split");
            }
            const auto& shape = split->images.front().shape();
            if (shape.size() != 2 || shape[0] != config.data.image_size ||
                shape[1] != config.data.image_size) {
                throw IoError("dataset cache " + config.dataset_cache +
                              " image size does not match data.image_size = " +
                              std::to_string(config.data.image_size));
            }
        }
        return pair;
    }
    Rng data_rng(config.data_seed);
    DatasetPair pair = synth_dataset(config.data, data_rng);
    if (!train_path.empty()) {
        ensure_parent_dir(train_path);
        save_dataset(pair.train, train_path);
        save_dataset(pair.test, test_path);
    }
    return pair;
}

TrainPipelineResult train_pipeline(const ExperimentConfig& config) {
    config.validate();
    const auto start = clock_type::now();
    const DatasetPair data = resolve_dataset(config);
    PipelineModel model = run_pipeline(config, data);

    TrainPipelineResult out;
    out.params = std::move(model.params);
    out.stats = std::move(model.stats);
    out.refit = model.refit;
    out.refitted = model.refitted;

    Rng root(config.seed);
    Rng eval_rng = root.split("clean-eval");
    out.test_accuracy = evaluate(out.params, data.test, config.adapt.time_steps, eval_rng);
    if (!config.checkpoint.empty()) {
        ensure_parent_dir(config.checkpoint);
        save_checkpoint(out.params, config.checkpoint);
    }
    out.train_seconds = seconds_since(start);
    return out;
}

TraceSummary summarize_traces(const std::vector<AdaptTrace>& traces) {
    if (traces.empty()) throw ConfigError("summarize_traces: no traces");
    TraceSummary s;
    s.samples = static_cast<int>(traces.size());
    int after = 0, before = 0, up = 0;
    double pre_sum = 0.0, post_sum = 0.0;
    for (const AdaptTrace& t : traces) {
        after += t.pred_after == t.label;
        before += t.pred_before == t.label;
        up += t.post_mean_sim > t.pre_mean_sim;
        pre_sum += t.pre_mean_sim;
        post_sum += t.post_mean_sim;
        s.fallbacks += t.fallback;
    }
    s.accuracy = static_cast<double>(after) / s.samples;
    s.noadapt_accuracy = static_cast<double>(before) / s.samples;
    s.mean_pre_similarity = pre_sum / s.samples;
    s.mean_post_similarity = post_sum / s.samples;
    s.frac_similarity_up = static_cast<double>(up) / s.samples;
    return s;
}

RunReport run_experiment(const ExperimentConfig& config) {
    config.validate();
    const auto start = clock_type::now();
    const DatasetPair data = resolve_dataset(config);
    const NetworkParams model = resolve_model(config, data);

    RunReport report;
    report.version = kVersion;
    report.method = method_name(config.method);
    report.config_text = serialize_config(config);

    const Rng root(config.seed);
    {
        Rng clean_rng = root.split("clean-eval");
        report.clean_accuracy =
            evaluate(model, data.test, config.adapt.time_steps, clean_rng);
    }

    // Corrupt up front so NoAdapt and SPACE runs with the same seed see
    // identical inputs.
    const std::size_t n = data.test.size();
    std::vector<Tensor> inputs(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (config.corruption == CorruptionKind::None) {
            inputs[i] = data.test.images[i];
        } else {
            Rng crng = root.split("corrupt", i);
            inputs[i] = corrupt(data.test.images[i], config.corruption,
                                config.corruption_level, crng);
        }
    }

    report.samples = static_cast<int>(n);
    report.traces.resize(n);
    std::vector<double> sample_seconds(n, 0.0);

    const unsigned hardware = std::max(1u, std::thread::hardware_concurrency());
    const std::size_t workers = std::min<std::size_t>(
        n, config.threads > 0 ? static_cast<unsigned>(config.threads) : hardware);

    std::atomic<std::size_t> next{0};
    std::atomic<bool> failed{false};
    std::exception_ptr error;
    std::mutex error_mu;
    const auto work = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= n || failed.load()) return;
            const auto t0 = clock_type::now();
            try {
                report.traces[i] = run_sample(model, inputs[i], data.test.labels[i], i,
                                              config, root);
            } catch (...) {
                const std::lock_guard<std::mutex> lock(error_mu);
                if (!failed.exchange(true)) error = std::current_exception();
                return;
            }
            sample_seconds[i] = seconds_since(t0);
        }
    };
    if (workers <= 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(workers);
        for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
        for (std::thread& t : pool) t.join();
    }
    if (failed.load()) std::rethrow_exception(error);

    const TraceSummary summary = summarize_traces(report.traces);
    report.accuracy = summary.accuracy;
    report.noadapt_accuracy = summary.noadapt_accuracy;
    report.mean_pre_similarity = summary.mean_pre_similarity;
    report.mean_post_similarity = summary.mean_post_similarity;
    report.frac_similarity_up = summary.frac_similarity_up;
    report.fallbacks = summary.fallbacks;

    double adapt_total = 0.0;
    for (double s : sample_seconds) adapt_total += s;
    report.mean_sample_seconds = adapt_total / static_cast<double>(n);
    report.total_seconds = seconds_since(start);

    if (!config.output_dir.empty()) write_run_artifacts(report, config.output_dir);
    return report;
}

// ---------------------------------------------------------------------------
// Sweeps
// ---------------------------------------------------------------------------

const char* sweep_axis_key(SweepAxis axis) {
    switch (axis) {
        case SweepAxis::Eta: return "adapt.eta";
        case SweepAxis::Views: return "adapt.num_views";
        case SweepAxis::Severity: return "adapt.augment.severity";
        case SweepAxis::Scope: return "adapt.scope";
        case SweepAxis::Aggregation: return "adapt.aggregation";
    }
    throw ConfigError("sweep: unknown axis");
}

std::vector<std::string> sweep_axis_grid(SweepAxis axis) {
    switch (axis) {
        case SweepAxis::Eta:
            return {"0.001", "0.003", "0.01", "0.03", "0.1", "0.3", "0.8"};
        case SweepAxis::Views:
            return {"2", "4", "8", "16", "32", "64", "128"};
        case SweepAxis::Severity:
            return {"1", "3", "5", "7", "10"};
        case SweepAxis::Scope:
            return {"per_channel", "global"};
        case SweepAxis::Aggregation:
            return {"count", "mean_potential", "per_step"};
    }
    throw ConfigError("sweep: unknown axis");
}

SweepReport sweep(const ExperimentConfig& base, SweepAxis axis) {
    return sweep(base, axis, sweep_axis_grid(axis));
}

SweepReport sweep(const ExperimentConfig& base, SweepAxis axis,
                  const std::vector<std::string>& grid) {
    if (grid.empty()) throw ConfigError("sweep: empty grid");
    SweepReport out;
    out.axis_key = sweep_axis_key(axis);
    for (const std::string& value : grid) {
        ExperimentConfig config = base;
        // Through the text path, so the sweep accepts exactly the values
        // a config file or CLI flag would.
        set_config_field(config, out.axis_key, value);
        config.output_dir.clear(); // the sweep table is the artifact
        RunReport run = run_experiment(config);
        SweepPoint point;
        point.value = value;
        point.accuracy = run.accuracy;
        point.noadapt_accuracy = run.noadapt_accuracy;
        point.mean_post_similarity = run.mean_post_similarity;
        point.frac_similarity_up = run.frac_similarity_up;
        point.mean_sample_seconds = run.mean_sample_seconds;
        out.points.push_back(std::move(point));
        out.runs.push_back(std::move(run));
    }
    if (!base.output_dir.empty()) {
        fs::create_directories(base.output_dir);
        write_sweep_csv(out, base.output_dir + "/sweep.csv");
    }
    return out;
}

// ---------------------------------------------------------------------------
// Similarity histogram
// ---------------------------------------------------------------------------

SimilarityHistogram similarity_histogram(const std::vector<AdaptTrace>& traces, int bins) {
    if (traces.empty()) throw ConfigError("similarity_histogram: no traces");
    if (bins < 1) throw ConfigError("similarity_histogram: bins must be positive");
    SimilarityHistogram h;
    h.edges.resize(bins + 1);
    for (int b = 0; b <= bins; ++b) {
        h.edges[b] = static_cast<double>(b) / bins;
    }
    h.pre_counts.assign(bins, 0);
    h.post_counts.assign(bins, 0);
    const auto bin_of = [bins](double sim) {
        const int b = static_cast<int>(sim * bins);
        return std::clamp(b, 0, bins - 1);
    };
    int up = 0;
    for (const AdaptTrace& t : traces) {
        ++h.pre_counts[bin_of(t.pre_mean_sim)];
        ++h.post_counts[bin_of(t.post_mean_sim)];
        h.pre_mean += t.pre_mean_sim;
        h.post_mean += t.post_mean_sim;
        up += t.post_mean_sim > t.pre_mean_sim;
    }
    h.pre_mean /= static_cast<double>(traces.size());
    h.post_mean /= static_cast<double>(traces.size());
    h.frac_up = static_cast<double>(up) / static_cast<double>(traces.size());
    return h;
}

// ---------------------------------------------------------------------------
// Artifacts
// ---------------------------------------------------------------------------

std::string report_json_text(const RunReport& report) {
    // Volatile wall-clock fields live in "metadata"; everything under
    // "report" is reproduced byte-for-byte by an identical config.
    ordered_json body;
    body["version"] = report.version;
    body["method"] = report.method;
    body["samples"] = report.samples;
    body["accuracy"] = report.accuracy;
    body["noadapt_accuracy"] = report.noadapt_accuracy;
    body["clean_accuracy"] = report.clean_accuracy;
    body["mean_pre_similarity"] = report.mean_pre_similarity;
    body["mean_post_similarity"] = report.mean_post_similarity;
    body["frac_similarity_up"] = report.frac_similarity_up;
    body["fallbacks"] = report.fallbacks;
    body["config"] = report.config_text;
    ordered_json metadata;
    metadata["mean_sample_seconds"] = report.mean_sample_seconds;
    metadata["total_seconds"] = report.total_seconds;
    ordered_json doc;
    doc["report"] = std::move(body);
    doc["metadata"] = std::move(metadata);
    return doc.dump(2) + '\n';
}

std::string traces_jsonl_text(const RunReport& report) {
    std::string out;
    for (const AdaptTrace& t : report.traces) {
        ordered_json j;
        j["sample_id"] = t.sample_id;
        j["pre_loss"] = t.pre_loss;
        j["post_loss"] = t.post_loss;
        j["pre_mean_sim"] = t.pre_mean_sim;
        j["post_mean_sim"] = t.post_mean_sim;
        j["pred_before"] = t.pred_before;
        j["pred_after"] = t.pred_after;
        j["fallback_flag"] = t.fallback;
        j["seed"] = t.seed;
        j["label"] = t.label;
        j["num_updates"] = t.num_updates;
        out += j.dump();
        out += '\n';
    }
    return out;
}

std::string metrics_csv_text(const RunReport& report) {
    std::string out =
        "sample_id,label,pred_before,pred_after,pre_loss,post_loss,"
        "pre_mean_sim,post_mean_sim,fallback,num_updates,seed\n";
    for (const AdaptTrace& t : report.traces) {
        out += std::to_string(t.sample_id) + ',' + std::to_string(t.label) + ',' +
               std::to_string(t.pred_before) + ',' + std::to_string(t.pred_after) + ',' +
               format_double(t.pre_loss) + ',' + format_double(t.post_loss) + ',' +
               format_double(t.pre_mean_sim) + ',' + format_double(t.post_mean_sim) + ',' +
               (t.fallback ? "1" : "0") + ',' + std::to_string(t.num_updates) + ',' +
               std::to_string(t.seed) + '\n';
    }
    return out;
}

std::string histogram_csv_text(const SimilarityHistogram& hist) {
    std::string out = "bin_start,bin_end,pre_count,post_count\n";
    for (std::size_t b = 0; b + 1 < hist.edges.size(); ++b) {
        out += format_double(hist.edges[b]) + ',' + format_double(hist.edges[b + 1]) + ',' +
               std::to_string(hist.pre_counts[b]) + ',' +
               std::to_string(hist.post_counts[b]) + '\n';
    }
    return out;
}

std::string sweep_csv_text(const SweepReport& report) {
    std::string out =
        "axis,value,accuracy,noadapt_accuracy,mean_post_similarity,"
        "frac_similarity_up,mean_sample_seconds\n";
    for (const SweepPoint& p : report.points) {
        out += csv_escape(report.axis_key) + ',' + csv_escape(p.value) + ',' +
               format_double(p.accuracy) + ',' + format_double(p.noadapt_accuracy) + ',' +
               format_double(p.mean_post_similarity) + ',' +
               format_double(p.frac_similarity_up) + ',' +
               format_double(p.mean_sample_seconds) + '\n';
    }
    return out;
}

void write_run_artifacts(const RunReport& report, const std::string& dir) {
    if (dir.empty()) throw ConfigError("write_run_artifacts: empty directory");
    fs::create_directories(dir);
    open_out(dir + "/report.json") << report_json_text(report);
    open_out(dir + "/traces.jsonl") << traces_jsonl_text(report);
    open_out(dir + "/metrics.csv") << metrics_csv_text(report);
    open_out(dir + "/similarity_hist.csv")
        << histogram_csv_text(similarity_histogram(report.traces, 20));
}

std::vector<AdaptTrace> load_traces(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    std::vector<AdaptTrace> traces;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        ordered_json j;
        try {
            j = ordered_json::parse(line);
        } catch (const std::exception& e) {
            throw ParseError(path + ":" + std::to_string(line_no) + ": " + e.what());
        }
        try {
            AdaptTrace t;
            t.sample_id = j.at("sample_id").get<int>();
            t.pre_loss = j.at("pre_loss").get<double>();
            t.post_loss = j.at("post_loss").get<double>();
            t.pre_mean_sim = j.at("pre_mean_sim").get<double>();
            t.post_mean_sim = j.at("post_mean_sim").get<double>();
            t.pred_before = j.at("pred_before").get<int>();
            t.pred_after = j.at("pred_after").get<int>();
            t.fallback = j.at("fallback_flag").get<bool>();
            t.seed = j.at("seed").get<std::uint64_t>();
            t.label = j.at("label").get<int>();
            t.num_updates = j.at("num_updates").get<int>();
            traces.push_back(t);
        } catch (const std::exception& e) {
            throw ParseError(path + ":" + std::to_string(line_no) +
                             ": missing or mistyped field: " + e.what());
        }
    }
    return traces;
}

void write_sweep_csv(const SweepReport& report, const std::string& path) {
    open_out(path) << sweep_csv_text(report);
}

} // namespace snnspace
