#pragma once

#include <Eigen/Core>
#include <random>
#include <string>
#include <vector>

namespace plast {

enum class ActKind {
    ReLU, LeakyReLU, PReLU, RReLU, Sigmoid, Tanh, Swish, GeLU,
    ELU, CELU, SELU, CReLU, Rational, SmoothLeaky, RandSmoothLeaky,
    BoPReLU, RSELU,
};

enum class PreluScope { Global, Layer, Neuron };
enum class Mode { Train, Eval };

// SELU self-normalizing constants; RSELU keeps the same lambda and centers its
// sampling bounds on this alpha.
constexpr double kSeluLambda = 1.0507009873554805;
constexpr double kSeluAlpha  = 1.6732632423543772;

std::string act_kind_name(ActKind k);
ActKind act_kind_from_name(const std::string& name);

// Immutable shape description of a nonlinearity. Fields irrelevant to `kind`
// are ignored (e.g. `c`/`p` for anything outside the Smooth-Leaky family).
struct ActivationSpec {
    ActKind kind = ActKind::ReLU;
    double alpha = 0.01;   // leak / ELU-family scale, meaning per kind
    double beta = 1.0;     // Swish/GeLU temperature
    double c = 1.0;        // Smooth-Leaky transition steepness
    double p = 1.0;        // Smooth-Leaky transition width
    double lower = 0.0;    // sampling bounds (RReLU/RandSmoothLeaky/RSELU),
    double upper = 0.0;    // clamp range (alpha_min, alpha_max) for BoPReLU
    PreluScope scope = PreluScope::Neuron;
    int deg_p = 5;         // Rational numerator degree
    int deg_q = 4;         // Rational denominator degree

    // Throws std::invalid_argument on an inconsistent spec.
    void validate() const;

    bool randomized() const;    // samples a slope per element in Train mode
    bool learnable() const;     // carries trainable parameters
    bool doubles_width() const { return kind == ActKind::CReLU; }

    // Initial negative slope `a` used by the Kaiming gain (midpoint of bounds
    // for randomized kinds, alpha for leaky/PReLU init, 0 for ReLU/CReLU).
    double init_negative_slope() const;
};

// Mutable learnable / mode state owned by one activation layer.
struct ActivationState {
    std::vector<double> alpha;       // PReLU alphas or BoPReLU raw parameters
    std::vector<double> num_coeffs;  // Rational a_0..a_degP
    std::vector<double> den_coeffs;  // Rational b_1..b_degQ
    Mode mode = Mode::Train;

    // Sized for `units` outputs; PReLU-style kinds get one parameter entry
    // (Global/Layer) or `units` entries (Neuron). `alpha_init` seeds PReLU
    // alphas; BoPReLU stores the raw (pre-sigmoid) parameter instead.
    static ActivationState init(const ActivationSpec& spec, int units,
                                double alpha_init = 0.25);
};

// Forward record needed by the exact backward pass.
struct ActTape {
    Eigen::ArrayXd x;      // pre-activations as seen by the nonlinearity
    Eigen::ArrayXd slope;  // per-element sampled r (randomized kinds only)
    int units = 0;         // producer width; element i belongs to unit i % units
};

struct ActGrads {
    Eigen::ArrayXd dx;
    std::vector<double> dalpha;       // per PReLU/BoPReLU scope entry
    std::vector<double> dnum_coeffs;  // Rational
    std::vector<double> dden_coeffs;
};

// Elementwise forward. `x` is a flattened row-major [batch x units] block;
// `units` drives per-neuron parameter lookup. CReLU doubles the length.
// Train-mode randomized kinds draw r per element from `rng`.
std::pair<Eigen::ArrayXd, ActTape> act_forward(const ActivationSpec& spec,
                                               const ActivationState& state,
                                               const Eigen::ArrayXd& x, int units,
                                               std::mt19937_64* rng = nullptr);

ActGrads act_backward(const ActivationSpec& spec, const ActivationState& state,
                      const ActTape& tape, const Eigen::ArrayXd& upstream);

// [max(z,0) || max(-z,0)]: doubles the width.
Eigen::ArrayXd crelu_concat(const Eigen::ArrayXd& z);

// alpha_min + (alpha_max - alpha_min) * sigmoid(alpha_raw)
double bo_prelu_alpha(double alpha_raw, double alpha_min, double alpha_max);
// Inverse of the reparameterization, for initializing alpha_raw.
double bo_prelu_raw(double alpha, double alpha_min, double alpha_max);

Eigen::ArrayXd rselu_forward(const Eigen::ArrayXd& x, double lower, double upper,
                             Mode mode, std::mt19937_64* rng = nullptr);

Eigen::ArrayXd rational_forward(const Eigen::ArrayXd& x,
                                const std::vector<double>& num_coeffs,
                                const std::vector<double>& den_coeffs);

// Least-squares fit of version-A rational coefficients to a target activation
// on 1001 uniform points in [-3,3]. Returns the achieved max grid error.
double rational_fit(const ActivationSpec& target, ActivationState& state,
                    int deg_p, int deg_q);

// sqrt(2/(1+a^2)) for rectifier-like kinds, 1 for the self-normalizing and
// squashing kinds; smooth kinds use the analytic effective negative slope as a.
double kaiming_gain(const ActivationSpec& spec);

// Deterministic scalar value/derivative (randomized kinds at the Eval
// midpoint). CReLU is excluded here; analytic probes handle it separately.
double act_value(const ActivationSpec& spec, const ActivationState& state, double x);
double act_deriv(const ActivationSpec& spec, const ActivationState& state, double x);

// |phi'(x)| as used by dead-band / saturation probes. For CReLU this is the
// summed magnitude over both branches, so only x=0 is dead. `entry` selects
// the per-neuron parameter for Neuron-scope learnable slopes.
double act_deriv_mag(const ActivationSpec& spec, const ActivationState& state,
                     double x, int entry = 0);

inline double sigmoid(double x) {
    return x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

}  // namespace plast
