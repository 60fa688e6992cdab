#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "plast/config.hpp"
#include "plast/metrics.hpp"

namespace plast {

inline constexpr const char* kToolVersion = "plab 0.1.0";

struct ResultRow {
    std::string experiment;
    std::string hash;        // per-cell config hash
    std::string activation;  // human-readable cell label
    std::uint64_t seed = 0;
    std::string metric;
    double value = 0.0;
    std::string units;
};

struct CellStatus {
    std::string activation;
    std::uint64_t seed = 0;
    std::string status;  // "ok" or the error message
};

struct RunOutcome {
    std::vector<ResultRow> rows;
    std::vector<CellStatus> cells;
    std::vector<std::string> warnings;
};

// Short distinguishing label for one sweep cell, e.g. "leaky_relu[alpha=0.7]".
std::string act_label(const ActivationSpec& spec);

// Executes activations x seeds; each cell is independent and deterministic.
// Writes <out>/manifest.json, <out>/times.json, <out>/results.csv and per-run
// trace CSVs. Refuses to reuse a populated directory unless `overwrite`.
// A cell failure is recorded in the manifest; other cells are unaffected.
RunOutcome run_experiment(const ExperimentConfig& cfg, const std::string& out,
                          bool overwrite = false, int jobs = 1);

// Aggregates results.csv across seeds. Kinds: "summary" (mean + bootstrap CI
// per activation/metric), "floor_class" (zero- vs non-zero-floor groups),
// "correlation" (dead-band width vs mean shock-response area).
// Returns the paths written.
std::vector<std::string> write_report(const std::string& dir,
                                      const std::string& kind);

std::vector<ResultRow> read_results(const std::string& dir);

}  // namespace plast
