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

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "snnspace/config.hpp"
#include "snnspace/trainer.hpp"

namespace snnspace {

/// Library version, echoed into every report so an artifact names the
/// code that produced it.
inline constexpr const char* kVersion = "snnspace 1.0.0";

/// One test sample's adaptation episode, as written to traces.jsonl.
/// Losses and similarities are zero for a NoAdapt run (there is no view
/// batch to measure).
struct AdaptTrace {
    int sample_id = 0;
    int label = 0;
    int pred_before = 0;  // source model on the (corrupted) sample
    int pred_after = 0;   // adapted model on the same sample
    double pre_loss = 0.0;
    double post_loss = 0.0;      // same frozen view batch, updated params
    double pre_mean_sim = 0.0;   // mean pairwise view similarity
    double post_mean_sim = 0.0;
    bool fallback = false;       // update refused (non-finite gradients)
    int num_updates = 0;         // 0 or 1 by construction
    std::uint64_t seed = 0;      // the sample's rng stream key
};

/// Everything run_experiment measures. The deterministic part of this
/// struct is reproduced byte-for-byte by identical configs; the wall
/// clock fields are volatile and kept out of the written report body.
struct RunReport {
    std::string version;
    std::string method;
    std::string config_text;     // exact serialized config of the run
    int samples = 0;
    double accuracy = 0.0;          // fraction correct after adaptation
    double noadapt_accuracy = 0.0;  // fraction correct before the update
    double clean_accuracy = 0.0;    // same model, uncorrupted test set
    double mean_pre_similarity = 0.0;
    double mean_post_similarity = 0.0;
    double frac_similarity_up = 0.0; // post_mean_sim > pre_mean_sim
    int fallbacks = 0;
    std::vector<AdaptTrace> traces;  // ordered by sample_id

    // Volatile: never part of the deterministic report body.
    double mean_sample_seconds = 0.0;
    double total_seconds = 0.0;
};

/// Result of the training pipeline (build, calibrate, train, refit).
struct TrainPipelineResult {
    NetworkParams params;
    TrainStats stats;
    RefitReport refit;   // meaningful only when refitted
    bool refitted = false;
    double test_accuracy = 0.0; // clean accuracy on the held-out split
    double train_seconds = 0.0; // volatile
};

/// Resolve the config's dataset: load `<dataset_cache>.train.snnd` /
/// `<dataset_cache>.test.snnd` when both exist, otherwise synthesize
/// from data.* under data.seed (and write the cache files when a stem is
/// configured). The synthetic path is bit-exactly equal to a cache round
/// trip, so either route yields the same task.
DatasetPair resolve_dataset(const ExperimentConfig& config);

/// Build, calibrate, train and (when train.refit is set) refit a source
/// model on the config's dataset, then score it on the held-out split.
/// All training randomness descends from run.seed; the dataset comes
/// from data.seed. Writes the model to run.checkpoint when that path is
/// set.
TrainPipelineResult train_pipeline(const ExperimentConfig& config);

/// Run one full experiment: resolve dataset and model (load the
/// checkpoint if configured, else train in-process), corrupt the test
/// set per corrupt.*, then walk it with batch size 1 — straight
/// evaluation for NoAdapt, one adapt_single episode per sample for
/// SPACE. Writes report.json, traces.jsonl, metrics.csv and
/// similarity_hist.csv to run.output_dir unless it is empty.
///
/// Streams: sample i's corruption comes from the "corrupt"/i child of
/// run.seed and its episode from the "sample"/i child, whose
/// "encode-original" grandchild is exactly what evaluate() uses — so a
/// NoAdapt run equals evaluate() on the corrupted set, and an eta = 0
/// SPACE run equals NoAdapt, both bit for bit. Samples may be processed
/// by run.threads workers; results are identical for any thread count.
RunReport run_experiment(const ExperimentConfig& config);

/// Aggregate accuracy et al. recomputed from a trace stream, for checking
/// a report against its own per-sample records (they must agree exactly).
struct TraceSummary {
    int samples = 0;
    double accuracy = 0.0;
    double noadapt_accuracy = 0.0;
    double mean_pre_similarity = 0.0;
    double mean_post_similarity = 0.0;
    double frac_similarity_up = 0.0;
    int fallbacks = 0;
};
TraceSummary summarize_traces(const std::vector<AdaptTrace>& traces);

// ---------------------------------------------------------------------------
// Sweeps
// ---------------------------------------------------------------------------

/// One dial to vary while the rest of the config stays put.
enum class SweepAxis : int {
    Eta = 0,     // adapt.eta
    Views,       // adapt.num_views (M)
    Severity,    // adapt.augment.severity (s)
    Scope,       // adapt.scope
    Aggregation, // adapt.aggregation
};

const char* sweep_axis_key(SweepAxis axis);

/// The default grid per axis: eta log-spaced over the supported range,
/// M doubling, severity spanning the augmentation scale, and both
/// categorical dials in full.
std::vector<std::string> sweep_axis_grid(SweepAxis axis);

struct SweepPoint {
    std::string value;  // grid value, as config text
    double accuracy = 0.0;
    double noadapt_accuracy = 0.0;
    double mean_post_similarity = 0.0;
    double frac_similarity_up = 0.0;
    double mean_sample_seconds = 0.0; // volatile
};

struct SweepReport {
    std::string axis_key;
    std::vector<SweepPoint> points;
    std::vector<RunReport> runs; // full per-point reports, same order
};

/// One run_experiment per grid value, all sharing the base config (and
/// seed); per-point artifact writing is suppressed, and sweep.csv lands
/// in base.output_dir unless that is empty.
SweepReport sweep(const ExperimentConfig& base, SweepAxis axis);
SweepReport sweep(const ExperimentConfig& base, SweepAxis axis,
                  const std::vector<std::string>& grid);

// ---------------------------------------------------------------------------
// Similarity histogram
// ---------------------------------------------------------------------------

/// Equal-width histograms of the per-sample mean pairwise similarity
/// before and after adaptation, over [0, 1].
struct SimilarityHistogram {
    std::vector<double> edges; // bins + 1 ascending edges, 0 to 1
    std::vector<int> pre_counts;
    std::vector<int> post_counts;
    double pre_mean = 0.0;
    double post_mean = 0.0;
    double frac_up = 0.0; // samples with post > pre
};

/// Bin the traces' similarities; similarity 1.0 lands in the last bin.
SimilarityHistogram similarity_histogram(const std::vector<AdaptTrace>& traces, int bins);

// ---------------------------------------------------------------------------
// Artifacts
// ---------------------------------------------------------------------------

/// The artifact texts, byte-deterministic given the report. report.json
/// keeps the volatile wall-clock fields in a separate "metadata" object
/// so its "report" object is reproducible too.
std::string report_json_text(const RunReport& report);
std::string traces_jsonl_text(const RunReport& report);
std::string metrics_csv_text(const RunReport& report);
std::string histogram_csv_text(const SimilarityHistogram& hist);
std::string sweep_csv_text(const SweepReport& report);

/// Write report.json, traces.jsonl, metrics.csv and similarity_hist.csv
/// into `dir` (created if missing).
void write_run_artifacts(const RunReport& report, const std::string& dir);

/// Append-free re-reader for traces.jsonl files.
std::vector<AdaptTrace> load_traces(const std::string& path);

/// The sweep table as CSV (one row per grid point).
void write_sweep_csv(const SweepReport& report, const std::string& path);

} // namespace snnspace
