#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"
#include "plast/net.hpp"
#include "plast/stream.hpp"
#include "plast/stress.hpp"

namespace plast {

enum class ExperimentKind {
    GoldilocksSweep, ShockStudy, ContinualBenchmark, RlMetrics, PropertyGrid,
};

std::string experiment_kind_name(ExperimentKind k);
ExperimentKind experiment_kind_from_name(const std::string& name);

// One self-contained experiment description: a sweep of activation specs
// crossed with seeds, plus everything the runner needs to realize each cell.
struct ExperimentConfig {
    std::string name;  // experiment id; also the default output subdirectory
    ExperimentKind kind = ExperimentKind::PropertyGrid;
    std::vector<ActivationSpec> activations;
    std::vector<int> widths = {78, 100, 100, 10};  // desk-scale backbone
    double alpha_init = 0.25;
    StreamConfig stream;
    ShockSchedule schedule;
    OptKind opt = OptKind::Adam;
    double lr = 0.001;
    int epochs = 50;          // stress-protocol epochs
    int scale = 10;           // desk-scale divisor, echoed for provenance
    std::vector<std::uint64_t> seeds;
    std::string out_dir;
    std::string returns_csv;  // RlMetrics input log

    void validate() const;
    // The backbone with `act` installed on every hidden layer.
    NetworkSpec net_for(const ActivationSpec& act) const;
};

void to_json(nlohmann::json& j, const ActivationSpec& s);
void from_json(const nlohmann::json& j, ActivationSpec& s);
void to_json(nlohmann::json& j, const StreamConfig& s);
void from_json(const nlohmann::json& j, StreamConfig& s);
void to_json(nlohmann::json& j, const ShockSchedule& s);
void from_json(const nlohmann::json& j, ShockSchedule& s);
void to_json(nlohmann::json& j, const ExperimentConfig& c);
void from_json(const nlohmann::json& j, ExperimentConfig& c);

// FNV-1a 64 over the canonical serialized form, as fixed-width hex.
std::string config_hash(const ExperimentConfig& c);

// Schema errors carry the offending field path.
ExperimentConfig load_config(const std::string& path);
void save_config(const ExperimentConfig& c, const std::string& path);

// JSON checkpoints; doubles round-trip bit-exactly.
void save_params(const NetworkSpec& spec, const NetworkParams& params,
                 const std::string& path);
NetworkParams load_params(const NetworkSpec& spec, const std::string& path);

}  // namespace plast
