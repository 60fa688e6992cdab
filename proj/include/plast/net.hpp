#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <random>
#include <vector>

#include "plast/activation.hpp"

namespace plast {

// Fully-connected topology. `widths` lists the interface widths
// [input, hidden..., output]; every hidden layer gets its own activation.
// A width-doubling activation (CReLU) halves the producer linear so the
// consumer still sees the declared hidden width.
struct NetworkSpec {
    std::vector<int> widths;
    std::vector<ActivationSpec> activations;
    double alpha_init = 0.25;  // PReLU starting slope / BoPReLU alpha init

    void validate() const;
    int hidden_layers() const { return static_cast<int>(widths.size()) - 2; }
    int num_layers() const { return static_cast<int>(widths.size()) - 1; }
    // Number of pre-activations emitted by linear layer l (halved producer
    // for width-doubling activations on hidden layers).
    int producer_width(int l) const;
    // Width consumed by layer l+1 (the declared interface width).
    int consumer_width(int l) const { return widths[l + 1]; }
    long param_count() const;
};

struct NetworkParams {
    std::vector<Eigen::MatrixXd> W;  // W[l] is fan_in x producer_width(l)
    std::vector<Eigen::VectorXd> b;
    std::vector<ActivationState> act;  // one per hidden layer

    void check_finite() const;  // throws with the parameter path
};

struct NetGrads {
    std::vector<Eigen::MatrixXd> dW;
    std::vector<Eigen::VectorXd> db;
    std::vector<ActGrads> dact;
};

// Record of one forward pass; backward replays it exactly, including the
// gamma pre-activation scaling.
struct ForwardTape {
    std::vector<Eigen::MatrixXd> inputs;  // layer inputs, inputs[0] = batch
    std::vector<Eigen::MatrixXd> z;       // scaled pre-activations per hidden layer
    std::vector<ActTape> act_tapes;       // flattened row-major tapes
    double gamma = 1.0;
    int batch = 0;
};

// Kaiming fan-in normal init with the slope-aware gain; biases zero.
// Deterministic given (spec, seed).
NetworkParams init_network(const NetworkSpec& spec, std::uint64_t seed);

// Hidden pre-activations are multiplied by gamma before their nonlinearity;
// the logits layer is unscaled and un-activated. `rng` is required when a
// Train-mode randomized activation is present.
std::pair<Eigen::MatrixXd, ForwardTape> forward(const NetworkSpec& spec,
                                                const NetworkParams& params,
                                                const Eigen::MatrixXd& batch,
                                                double gamma = 1.0,
                                                Mode mode = Mode::Train,
                                                std::mt19937_64* rng = nullptr);

NetGrads backward(const NetworkSpec& spec, const NetworkParams& params,
                  const ForwardTape& tape, const Eigen::MatrixXd& dlogits);

// Mean softmax cross-entropy and its logits gradient (d mean loss / d logits).
std::pair<double, Eigen::MatrixXd> softmax_xent(const Eigen::MatrixXd& logits,
                                                const std::vector<int>& labels);

enum class OptKind { SGD, Adam };

struct OptimizerState {
    OptKind kind = OptKind::SGD;
    double lr = 0.01;
    double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    long t = 0;
    std::vector<Eigen::MatrixXd> mW, vW;
    std::vector<Eigen::VectorXd> mb, vb;
    std::vector<std::vector<double>> ma, va;  // activation params per layer

    static OptimizerState init(OptKind kind, double lr,
                               const NetworkParams& params);
};

// In-place parameter update. BoPReLU updates the raw parameter; Global-scope
// PReLU/BoPReLU sums gradients across layers and keeps layer copies in sync.
void step(OptimizerState& opt, const NetworkSpec& spec, NetworkParams& params,
          const NetGrads& grads);

// Columns are per-sample gradients of the selected linear layer's weights
// (row-major flattened), per-sample cross-entropy without batch averaging.
Eigen::MatrixXd per_sample_gradients(const NetworkSpec& spec,
                                     const NetworkParams& params,
                                     const Eigen::MatrixXd& batch,
                                     const std::vector<int>& labels, int layer);

// A hidden unit is dead iff |phi'(z)| < eps for every probe sample.
double dead_unit_fraction(const NetworkSpec& spec, const NetworkParams& params,
                          const std::vector<Eigen::MatrixXd>& probe_batches,
                          double eps = 1e-3);

}  // namespace plast
