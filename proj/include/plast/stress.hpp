#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "plast/net.hpp"
#include "plast/stream.hpp"

namespace plast {

struct ShockSchedule {
    std::vector<double> gammas = {1.5, 0.5, 0.25, 2.0};
    int cycle = 10;  // C_l epochs between shocks

    void validate() const;
    // Epoch 0 is never a shock; shocks land at positive multiples of `cycle`,
    // advancing one gamma per shock (cyclically).
    bool is_shock(int epoch) const;
    double gamma_at(int epoch) const;
};

// Fraction of (unit, sample) pairs with |phi'(z)| < eps, per hidden layer,
// on the recorded (already gamma-scaled) pre-activations.
std::vector<double> saturation_fraction(const NetworkSpec& spec,
                                        const NetworkParams& params,
                                        const ForwardTape& tape,
                                        double eps = 1e-3);

// Unit-weighted mean over hidden layers.
double network_sf(const NetworkSpec& spec, const std::vector<double>& per_layer);

struct EpochRecord {
    int epoch = 0;
    double gamma = 1.0;
    double sf_network = 0.0;
    std::vector<double> sf_layers;
    double accuracy = 0.0;
    bool shock = false;
    bool aborted = false;
};

struct SaturationTrace {
    std::vector<EpochRecord> records;
    bool aborted = false;

    std::string to_csv() const;
};

struct StressConfig {
    NetworkSpec net;
    StreamConfig stream;       // defines the training task (task 0)
    ShockSchedule schedule;
    int epochs = 50;
    OptKind opt = OptKind::Adam;
    double lr = 0.001;
    int eval_samples = 512;    // held-out measurement batch size
    std::uint64_t seed = 0;
};

// Trains on task 0 of the stream, applying gamma through the forward hook on
// shock epochs only; SF and accuracy are measured each epoch on a fixed
// held-out batch with that epoch's gamma applied. Deterministic given seed.
// On NaN divergence the trace is truncated with an abort record.
SaturationTrace run_stress_experiment(const StressConfig& cfg,
                                      const Dataset& base);

}  // namespace plast
