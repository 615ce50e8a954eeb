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

// The `space` command-line frontend. Deliberately a pure client of the
// C API: everything it can do, any other language binding can do too.

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "snnspace/c_api.h"

namespace {

// Errors exit with the space_status value (1..6), so scripts can tell a
// parse problem from a missing file without scraping stderr.
[[noreturn]] void fail_exit(space_status status) {
    std::fprintf(stderr, "space: %s\n", space_last_error());
    std::exit(static_cast<int>(status));
}

void check(space_status status) {
    if (status != SPACE_OK) fail_exit(status);
}

[[noreturn]] void usage_exit(const std::string& message) {
    std::fprintf(stderr, "space: %s\n", message.c_str());
    std::exit(static_cast<int>(SPACE_ERR_INVALID_ARGUMENT));
}

/// Take ownership of an API string.
std::string take(char* text) {
    std::string out = (text != nullptr) ? text : "";
    space_string_free(text);
    return out;
}

/// Turn the tokens CLI11 could not claim into key/value pairs: every
/// `--group.key value` or `--group.key=value` becomes one override.
std::vector<std::pair<std::string, std::string>> override_pairs(
    const std::vector<std::string>& tokens) {
    std::vector<std::pair<std::string, std::string>> out;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        const std::string& token = tokens[i];
        if (token.rfind("--", 0) != 0 || token.size() <= 2) {
            usage_exit("unexpected argument '" + token +
                       "' (config overrides look like --adapt.eta 0.003)");
        }
        const std::string body = token.substr(2);
        const std::size_t eq = body.find('=');
        if (eq != std::string::npos) {
            out.emplace_back(body.substr(0, eq), body.substr(eq + 1));
        } else {
            if (i + 1 >= tokens.size()) {
                usage_exit("flag '" + token + "' is missing a value");
            }
            out.emplace_back(body, tokens[++i]);
        }
    }
    return out;
}

/// Build the effective config: file (when given), then flag overrides in
/// order, then the SPACE_SEED environment override on top.
space_config* make_config(const std::string& config_path,
                          const std::vector<std::string>& extras) {
    space_config* cfg = nullptr;
    if (config_path.empty()) {
        check(space_config_create(&cfg));
    } else {
        check(space_config_load(config_path.c_str(), &cfg));
    }
    for (const auto& [key, value] : override_pairs(extras)) {
        check(space_config_set(cfg, key.c_str(), value.c_str()));
    }
    check(space_config_apply_env(cfg, nullptr));
    return cfg;
}

/// Comma-separated real list ("0.81,0.84,0.79").
std::vector<double> parse_doubles(const std::string& text, const char* flag) {
    std::vector<double> out;
    std::size_t begin = 0;
    while (begin <= text.size()) {
        std::size_t end = text.find(',', begin);
        if (end == std::string::npos) end = text.size();
        const std::string item = text.substr(begin, end - begin);
        char* tail = nullptr;
        const double value = std::strtod(item.c_str(), &tail);
        if (item.empty() || tail == item.c_str() || *tail != '\0') {
            usage_exit(std::string(flag) + ": '" + item + "' is not a number");
        }
        out.push_back(value);
        begin = end + 1;
    }
    return out;
}

int run_train(const std::string& config_path, const std::vector<std::string>& extras) {
    space_config* cfg = make_config(config_path, extras);
    char* checkpoint = nullptr;
    check(space_config_get(cfg, "run.checkpoint", &checkpoint));
    if (take(checkpoint).empty()) {
        usage_exit("train: run.checkpoint is empty; pass --run.checkpoint PATH "
                   "so the trained model lands somewhere");
    }
    char* summary = nullptr;
    check(space_train(cfg, &summary));
    std::fputs(take(summary).c_str(), stdout);
    space_config_free(cfg);
    return 0;
}

int run_run(const std::string& config_path, const std::vector<std::string>& extras) {
    space_config* cfg = make_config(config_path, extras);
    space_report* report = nullptr;
    check(space_run(cfg, &report));
    char* json = nullptr;
    check(space_report_json(report, &json));
    std::fputs(take(json).c_str(), stdout);
    space_report_free(report);
    space_config_free(cfg);
    return 0;
}

int run_sweep(const std::string& config_path, const std::vector<std::string>& extras,
              const std::string& axis, const std::string& grid) {
    space_config* cfg = make_config(config_path, extras);
    space_sweep* sweep = nullptr;
    check(space_sweep_run(cfg, axis.c_str(), grid.empty() ? nullptr : grid.c_str(),
                          &sweep));
    char* csv = nullptr;
    check(space_sweep_csv(sweep, &csv));
    std::fputs(take(csv).c_str(), stdout);
    space_sweep_free(sweep);
    space_config_free(cfg);
    return 0;
}

int run_wilcoxon(const std::string& x_text, const std::string& y_text) {
    const std::vector<double> x = parse_doubles(x_text, "--x");
    const std::vector<double> y = parse_doubles(y_text, "--y");
    if (x.size() != y.size()) {
        usage_exit("wilcoxon: --x and --y must pair up (got " +
                   std::to_string(x.size()) + " vs " + std::to_string(y.size()) + ")");
    }

    // Every sidedness is reported; picking one is the caller's judgement
    // call about which direction was hypothesised before looking.
    double w = 0.0;
    int n_used = 0;
    int exact = 0;
    nlohmann::ordered_json p;
    for (const char* side : {"greater", "less", "two_sided"}) {
        double value = 0.0;
        check(space_wilcoxon(x.data(), y.data(), static_cast<int>(x.size()), side,
                             &w, &value, &n_used, &exact));
        p[side] = value;
    }
    nlohmann::ordered_json doc;
    doc["n"] = n_used;
    doc["w"] = w;
    doc["exact"] = exact != 0;
    doc["p"] = p;
    std::fputs((doc.dump(2) + "\n").c_str(), stdout);
    return 0;
}

int run_report(const std::string& traces_path, int bins, const std::string& hist_path) {
    space_traces* traces = nullptr;
    check(space_traces_load(traces_path.c_str(), &traces));
    char* summary = nullptr;
    check(space_traces_summary_json(traces, &summary));
    std::fputs(take(summary).c_str(), stdout);
    if (!hist_path.empty()) {
        char* csv = nullptr;
        check(space_traces_histogram_csv(traces, bins, &csv));
        const std::string text = take(csv);
        std::ofstream out(hist_path, std::ios::binary);
        out << text;
        if (!out.good()) {
            std::fprintf(stderr, "space: report: cannot write '%s'\n",
                         hist_path.c_str());
            return static_cast<int>(SPACE_ERR_IO);
        }
    }
    space_traces_free(traces);
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Spiking-network test-time adaptation experiments"};
    app.set_version_flag("--version", space_version());
    app.require_subcommand(1);

    // Every experiment subcommand takes -c/--config plus any number of
    // --group.key value overrides (the dotted keys of the config format).
    std::string config_path;

    CLI::App* train = app.add_subcommand(
        "train", "Train a source model and write it to run.checkpoint");
    train->allow_extras();
    train->add_option("-c,--config", config_path, "Config file (key = value lines)");

    CLI::App* run = app.add_subcommand(
        "run", "Run the adaptation experiment; artifacts go to run.output_dir");
    run->allow_extras();
    run->add_option("-c,--config", config_path, "Config file (key = value lines)");

    std::string axis;
    std::string grid;
    CLI::App* sweep = app.add_subcommand(
        "sweep", "Run the experiment once per value of one dial");
    sweep->allow_extras();
    sweep->add_option("-c,--config", config_path, "Config file (key = value lines)");
    sweep->add_option("--axis", axis,
                      "Dial to vary: eta, views, severity, scope or aggregation")
        ->required();
    sweep->add_option("--grid", grid,
                      "Comma-separated values (defaults to the axis's standard grid)");

    std::string x_text;
    std::string y_text;
    CLI::App* wilcoxon = app.add_subcommand(
        "wilcoxon", "Paired signed-rank test; reports every sidedness");
    wilcoxon->add_option("--x", x_text, "Comma-separated sample")->required();
    wilcoxon->add_option("--y", y_text, "Comma-separated paired sample")->required();

    std::string traces_path;
    std::string hist_path;
    int bins = 20;
    CLI::App* report = app.add_subcommand(
        "report", "Recompute the summary from a traces.jsonl file");
    report->add_option("traces", traces_path, "Path to traces.jsonl")->required();
    report->add_option("--bins", bins, "Similarity histogram bins");
    report->add_option("--hist", hist_path,
                       "Also write the pre/post similarity histogram CSV here");

    CLI11_PARSE(app, argc, argv);

    if (train->parsed()) return run_train(config_path, train->remaining());
    if (run->parsed()) return run_run(config_path, run->remaining());
    if (sweep->parsed()) return run_sweep(config_path, sweep->remaining(), axis, grid);
    if (wilcoxon->parsed()) return run_wilcoxon(x_text, y_text);
    if (report->parsed()) return run_report(traces_path, bins, hist_path);
    return 0;
}
