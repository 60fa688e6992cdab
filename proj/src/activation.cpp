#include "plast/activation.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <map>
#include <stdexcept>

#include "plast/analytic.hpp"
#include "plast/rng.hpp"

namespace plast {

namespace {

constexpr double kInvSqrt2Pi = 0.3989422804014327;

const std::map<std::string, ActKind> kKindNames = {
    {"relu", ActKind::ReLU},
    {"leaky_relu", ActKind::LeakyReLU},
    {"prelu", ActKind::PReLU},
    {"rrelu", ActKind::RReLU},
    {"sigmoid", ActKind::Sigmoid},
    {"tanh", ActKind::Tanh},
    {"swish", ActKind::Swish},
    {"gelu", ActKind::GeLU},
    {"elu", ActKind::ELU},
    {"celu", ActKind::CELU},
    {"selu", ActKind::SELU},
    {"crelu", ActKind::CReLU},
    {"rational", ActKind::Rational},
    {"smooth_leaky", ActKind::SmoothLeaky},
    {"rand_smooth_leaky", ActKind::RandSmoothLeaky},
    {"bo_prelu", ActKind::BoPReLU},
    {"rselu", ActKind::RSELU},
};

// Value and derivative of one element. `slope` carries the effective negative
// slope for leaky-family and randomized kinds; other kinds ignore it.
// Kinked kinds use the left-derivative convention at x=0.
void eval_elem(const ActivationSpec& spec, const ActivationState& state,
               double x, double slope, double& v, double& d) {
    switch (spec.kind) {
        case ActKind::ReLU:
            v = x > 0 ? x : 0.0;
            d = x > 0 ? 1.0 : 0.0;
            return;
        case ActKind::LeakyReLU:
        case ActKind::PReLU:
        case ActKind::RReLU:
        case ActKind::BoPReLU:
            v = x > 0 ? x : slope * x;
            d = x > 0 ? 1.0 : slope;
            return;
        case ActKind::Sigmoid: {
            double s = sigmoid(x);
            v = s;
            d = s * (1.0 - s);
            return;
        }
        case ActKind::Tanh: {
            double t = std::tanh(x);
            v = t;
            d = 1.0 - t * t;
            return;
        }
        case ActKind::Swish: {
            double t = spec.beta * x;
            double s = sigmoid(t);
            v = x * s;
            d = s * (1.0 + t * (1.0 - s));
            return;
        }
        case ActKind::GeLU: {
            // x * Phi(beta x): beta temperature-scales the Gaussian CDF input.
            double t = spec.beta * x;
            double cdf = 0.5 * std::erfc(-t * M_SQRT1_2);
            double pdf = kInvSqrt2Pi * std::exp(-0.5 * t * t);
            v = x * cdf;
            d = cdf + x * spec.beta * pdf;
            return;
        }
        case ActKind::ELU:
            if (x > 0) {
                v = x;
                d = 1.0;
            } else {
                double e = std::exp(x);
                v = spec.alpha * (e - 1.0);
                d = spec.alpha * e;
            }
            return;
        case ActKind::CELU:
            if (x > 0) {
                v = x;
                d = 1.0;
            } else {
                double e = std::exp(x / spec.alpha);
                v = spec.alpha * (e - 1.0);
                d = e;
            }
            return;
        case ActKind::SELU:
            if (x > 0) {
                v = kSeluLambda * x;
                d = kSeluLambda;
            } else {
                double e = std::exp(x);
                v = kSeluLambda * spec.alpha * (e - 1.0);
                d = kSeluLambda * spec.alpha * e;
            }
            return;
        case ActKind::RSELU:
            if (x > 0) {
                v = kSeluLambda * x;
                d = kSeluLambda;
            } else {
                double e = std::exp(x);
                v = kSeluLambda * slope * (e - 1.0);
                d = kSeluLambda * slope * e;
            }
            return;
        case ActKind::SmoothLeaky:
        case ActKind::RandSmoothLeaky: {
            // f(x) = a x + (1-a) x sigma(c x / p); d/dx[t sigma(t)] in t units.
            double t = spec.c * x / spec.p;
            double s = sigmoid(t);
            v = slope * x + (1.0 - slope) * x * s;
            d = slope + (1.0 - slope) * (s + t * s * (1.0 - s));
            return;
        }
        case ActKind::Rational: {
            double pn = 0.0, pd = 0.0;  // P(x), P'(x)
            double xp = 1.0;
            for (size_t j = 0; j < state.num_coeffs.size(); ++j) {
                pn += state.num_coeffs[j] * xp;
                if (j + 1 < state.num_coeffs.size())
                    pd += state.num_coeffs[j + 1] * (j + 1) * xp;
                xp *= x;
            }
            double sn = 0.0, sd = 0.0;  // S(x) = sum_{j>=1} b_j x^j, S'(x)
            xp = 1.0;
            for (size_t j = 0; j < state.den_coeffs.size(); ++j) {
                sn += state.den_coeffs[j] * xp * x;
                sd += state.den_coeffs[j] * (j + 1) * xp;
                xp *= x;
            }
            double sgn = sn > 0 ? 1.0 : (sn < 0 ? -1.0 : 0.0);
            double den = 1.0 + std::abs(sn);
            v = pn / den;
            d = (pd * den - pn * sgn * sd) / (den * den);
            return;
        }
        case ActKind::CReLU:
            throw std::invalid_argument("CReLU has no scalar elementwise form");
    }
    throw std::invalid_argument("unknown activation kind");
}

double scope_slope(const ActivationSpec& spec, const ActivationState& state,
                   int entry) {
    if (spec.kind == ActKind::BoPReLU)
        return bo_prelu_alpha(state.alpha.at(entry), spec.lower, spec.upper);
    if (spec.kind == ActKind::PReLU) return state.alpha.at(entry);
    if (spec.randomized()) return 0.5 * (spec.lower + spec.upper);
    return spec.alpha;
}

int scope_entries(const ActivationSpec& spec, int units) {
    return spec.scope == PreluScope::Neuron ? units : 1;
}

int scope_entry(const ActivationSpec& spec, int elem, int units) {
    return spec.scope == PreluScope::Neuron ? elem % units : 0;
}

}  // namespace

std::string act_kind_name(ActKind k) {
    for (const auto& [name, kind] : kKindNames)
        if (kind == k) return name;
    return "?";
}

ActKind act_kind_from_name(const std::string& name) {
    auto it = kKindNames.find(name);
    if (it == kKindNames.end())
        throw std::invalid_argument("unknown activation kind: " + name);
    return it->second;
}

void ActivationSpec::validate() const {
    if (kind == ActKind::SmoothLeaky || kind == ActKind::RandSmoothLeaky) {
        if (c <= 0 || p <= 0)
            throw std::invalid_argument("smooth-leaky requires c > 0 and p > 0");
    }
    if (kind == ActKind::RReLU || kind == ActKind::RandSmoothLeaky ||
        kind == ActKind::RSELU) {
        if (lower > upper)
            throw std::invalid_argument("sampling bounds require l <= u");
    }
    if (kind == ActKind::BoPReLU && !(lower < upper))
        throw std::invalid_argument("BoPReLU requires alpha_min < alpha_max");
    if (kind == ActKind::Rational && deg_p < 1)
        throw std::invalid_argument("rational numerator degree must be >= 1");
}

bool ActivationSpec::randomized() const {
    return kind == ActKind::RReLU || kind == ActKind::RandSmoothLeaky ||
           kind == ActKind::RSELU;
}

bool ActivationSpec::learnable() const {
    return kind == ActKind::PReLU || kind == ActKind::BoPReLU ||
           kind == ActKind::Rational;
}

double ActivationSpec::init_negative_slope() const {
    switch (kind) {
        case ActKind::ReLU:
        case ActKind::CReLU:
            return 0.0;
        case ActKind::LeakyReLU:
        case ActKind::PReLU:
            return alpha;
        case ActKind::RReLU:
        case ActKind::RandSmoothLeaky:
        case ActKind::RSELU:
            return 0.5 * (lower + upper);
        case ActKind::BoPReLU:
            return 0.5 * (lower + upper);
        default:
            return alpha;
    }
}

ActivationState ActivationState::init(const ActivationSpec& spec, int units,
                                      double alpha_init) {
    spec.validate();
    ActivationState st;
    if (spec.kind == ActKind::PReLU) {
        st.alpha.assign(scope_entries(spec, units), alpha_init);
    } else if (spec.kind == ActKind::BoPReLU) {
        double a = alpha_init;
        if (!(spec.lower < a && a < spec.upper)) a = spec.alpha;
        if (!(spec.lower < a && a < spec.upper)) a = 0.5 * (spec.lower + spec.upper);
        st.alpha.assign(scope_entries(spec, units), bo_prelu_raw(a, spec.lower, spec.upper));
    } else if (spec.kind == ActKind::Rational) {
        rational_fit(ActivationSpec{.kind = ActKind::LeakyReLU, .alpha = 0.01},
                     st, spec.deg_p, spec.deg_q);
    }
    return st;
}

std::pair<Eigen::ArrayXd, ActTape> act_forward(const ActivationSpec& spec,
                                               const ActivationState& state,
                                               const Eigen::ArrayXd& x, int units,
                                               std::mt19937_64* rng) {
    spec.validate();
    for (Eigen::Index i = 0; i < x.size(); ++i)
        if (!std::isfinite(x[i]))
            throw std::invalid_argument("non-finite pre-activation at element " +
                                        std::to_string(i));
    if (units <= 0 || x.size() % units != 0)
        throw std::invalid_argument("input length must be a multiple of units");
    if ((spec.kind == ActKind::PReLU || spec.kind == ActKind::BoPReLU) &&
        static_cast<int>(state.alpha.size()) != scope_entries(spec, units))
        throw std::invalid_argument("activation state does not match scope/width");

    ActTape tape;
    tape.x = x;
    tape.units = units;

    if (spec.kind == ActKind::CReLU) return {crelu_concat(x), tape};

    bool sample = spec.randomized() && state.mode == Mode::Train;
    if (sample) {
        if (!rng)
            throw std::invalid_argument(
                "train-mode randomized activation needs an rng");
        tape.slope.resize(x.size());
        std::uniform_real_distribution<double> dist(spec.lower, spec.upper);
        for (Eigen::Index i = 0; i < x.size(); ++i) tape.slope[i] = dist(*rng);
    }

    Eigen::ArrayXd y(x.size());
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        double slope = sample ? tape.slope[i]
                              : scope_slope(spec, state,
                                            scope_entry(spec, static_cast<int>(i),
                                                        units));
        double v, d;
        eval_elem(spec, state, x[i], slope, v, d);
        y[i] = v;
    }
    return {y, tape};
}

ActGrads act_backward(const ActivationSpec& spec, const ActivationState& state,
                      const ActTape& tape, const Eigen::ArrayXd& upstream) {
    ActGrads g;
    const Eigen::ArrayXd& x = tape.x;

    if (spec.kind == ActKind::CReLU) {
        if (upstream.size() != 2 * x.size())
            throw std::invalid_argument("CReLU upstream must be twice tape length");
        g.dx.resize(x.size());
        for (Eigen::Index i = 0; i < x.size(); ++i) {
            double d = 0.0;
            if (x[i] > 0) d += upstream[i];
            if (-x[i] > 0) d -= upstream[x.size() + i];
            g.dx[i] = d;
        }
        return g;
    }
    if (upstream.size() != x.size())
        throw std::invalid_argument("upstream/tape length mismatch");
    bool sampled = tape.slope.size() > 0;

    g.dx.resize(x.size());
    if (spec.kind == ActKind::PReLU || spec.kind == ActKind::BoPReLU)
        g.dalpha.assign(scope_entries(spec, tape.units), 0.0);
    if (spec.kind == ActKind::Rational) {
        g.dnum_coeffs.assign(state.num_coeffs.size(), 0.0);
        g.dden_coeffs.assign(state.den_coeffs.size(), 0.0);
    }

    for (Eigen::Index i = 0; i < x.size(); ++i) {
        int entry = scope_entry(spec, static_cast<int>(i), tape.units);
        double slope =
            sampled ? tape.slope[i] : scope_slope(spec, state, entry);
        double v, d;
        eval_elem(spec, state, x[i], slope, v, d);
        g.dx[i] = upstream[i] * d;

        if (spec.kind == ActKind::PReLU) {
            if (x[i] <= 0) g.dalpha[entry] += upstream[i] * x[i];
        } else if (spec.kind == ActKind::BoPReLU) {
            if (x[i] <= 0) {
                // chain through alpha = l + (u-l) sigma(raw)
                double s = sigmoid(state.alpha.at(entry));
                g.dalpha[entry] += upstream[i] * x[i] *
                                   (spec.upper - spec.lower) * s * (1.0 - s);
            }
        } else if (spec.kind == ActKind::Rational) {
            double sn = 0.0, xp = x[i];
            for (size_t j = 0; j < state.den_coeffs.size(); ++j) {
                sn += state.den_coeffs[j] * xp;
                xp *= x[i];
            }
            double sgn = sn > 0 ? 1.0 : (sn < 0 ? -1.0 : 0.0);
            double den = 1.0 + std::abs(sn);
            double pn = 0.0;
            xp = 1.0;
            for (size_t j = 0; j < state.num_coeffs.size(); ++j) {
                g.dnum_coeffs[j] += upstream[i] * xp / den;
                pn += state.num_coeffs[j] * xp;
                xp *= x[i];
            }
            xp = x[i];
            for (size_t j = 0; j < state.den_coeffs.size(); ++j) {
                g.dden_coeffs[j] += upstream[i] * (-pn * sgn * xp) / (den * den);
                xp *= x[i];
            }
        }
    }
    return g;
}

Eigen::ArrayXd crelu_concat(const Eigen::ArrayXd& z) {
    Eigen::ArrayXd y(2 * z.size());
    y.head(z.size()) = z.max(0.0);
    y.tail(z.size()) = (-z).max(0.0);
    return y;
}

double bo_prelu_alpha(double alpha_raw, double alpha_min, double alpha_max) {
    if (!(alpha_min < alpha_max))
        throw std::invalid_argument("bo_prelu_alpha: alpha_min must be < alpha_max");
    return alpha_min + (alpha_max - alpha_min) * sigmoid(alpha_raw);
}

double bo_prelu_raw(double alpha, double alpha_min, double alpha_max) {
    if (!(alpha_min < alpha && alpha < alpha_max))
        throw std::invalid_argument("bo_prelu_raw: alpha outside (min, max)");
    double q = (alpha - alpha_min) / (alpha_max - alpha_min);
    return std::log(q / (1.0 - q));
}

Eigen::ArrayXd rselu_forward(const Eigen::ArrayXd& x, double lower, double upper,
                             Mode mode, std::mt19937_64* rng) {
    ActivationSpec spec{.kind = ActKind::RSELU, .lower = lower, .upper = upper};
    ActivationState st;
    st.mode = mode;
    return act_forward(spec, st, x, static_cast<int>(x.size()), rng).first;
}

Eigen::ArrayXd rational_forward(const Eigen::ArrayXd& x,
                                const std::vector<double>& num_coeffs,
                                const std::vector<double>& den_coeffs) {
    if (num_coeffs.size() < 2)
        throw std::invalid_argument("rational numerator degree must be >= 1");
    ActivationSpec spec{.kind = ActKind::Rational};
    ActivationState st;
    st.num_coeffs = num_coeffs;
    st.den_coeffs = den_coeffs;
    Eigen::ArrayXd y(x.size());
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        double v, d;
        eval_elem(spec, st, x[i], 0.0, v, d);
        y[i] = v;
    }
    return y;
}

double rational_fit(const ActivationSpec& target, ActivationState& state,
                    int deg_p, int deg_q) {
    if (deg_p < 1)
        throw std::invalid_argument("rational numerator degree must be >= 1");
    const int n = 1001;
    Eigen::ArrayXd xs(n), ys(n);
    ActivationState tstate = ActivationState::init(target, 1);
    tstate.mode = Mode::Eval;
    for (int i = 0; i < n; ++i) {
        xs[i] = -3.0 + 6.0 * i / (n - 1);
        ys[i] = act_value(target, tstate, xs[i]);
    }

    // a_0 is pinned to the target value at 0 (the |S| kink sits at x=0, and
    // P(0)=f(0) keeps the left/right derivatives there consistent).
    const double f0 = act_value(target, tstate, 0.0);

    // Plain polynomial least squares for the numerator, denominator seeded
    // slightly off zero so |S| has a usable subgradient.
    Eigen::MatrixXd V(n, deg_p);
    for (int i = 0; i < n; ++i) {
        double xp = xs[i];
        for (int j = 0; j < deg_p; ++j) {
            V(i, j) = xp;
            xp *= xs[i];
        }
    }
    Eigen::VectorXd afree = V.colPivHouseholderQr().solve((ys - f0).matrix());
    Eigen::VectorXd a(deg_p + 1);
    a[0] = f0;
    a.tail(deg_p) = afree;
    Eigen::VectorXd b = Eigen::VectorXd::Constant(deg_q, 1e-2);
    for (int j = 1; j < deg_q; j += 2) b[j] = -1e-2;

    ActivationSpec rspec{.kind = ActKind::Rational};
    rspec.deg_p = deg_p;
    rspec.deg_q = deg_q;
    auto set_state = [&](ActivationState& st) {
        st.num_coeffs.assign(a.data(), a.data() + a.size());
        st.den_coeffs.assign(b.data(), b.data() + b.size());
    };

    // Levenberg-Marquardt on the full residual.
    double lambda = 1e-3;
    auto residual = [&](const Eigen::VectorXd& av, const Eigen::VectorXd& bv,
                        Eigen::VectorXd& r) {
        for (int i = 0; i < n; ++i) {
            double pn = 0.0, xp = 1.0;
            for (int j = 0; j <= deg_p; ++j) {
                pn += av[j] * xp;
                xp *= xs[i];
            }
            double sn = 0.0;
            xp = xs[i];
            for (int j = 0; j < deg_q; ++j) {
                sn += bv[j] * xp;
                xp *= xs[i];
            }
            r[i] = pn / (1.0 + std::abs(sn)) - ys[i];
        }
    };
    int dim = deg_p + deg_q;  // a_0 stays fixed
    Eigen::VectorXd r(n), rtry(n);
    residual(a, b, r);
    double cost = r.squaredNorm();
    for (int it = 0; it < 200; ++it) {
        Eigen::MatrixXd J(n, dim);
        for (int i = 0; i < n; ++i) {
            double pn = 0.0, sn = 0.0, xp = 1.0;
            for (int j = 0; j <= deg_p; ++j) {
                pn += a[j] * xp;
                xp *= xs[i];
            }
            xp = xs[i];
            for (int j = 0; j < deg_q; ++j) {
                sn += b[j] * xp;
                xp *= xs[i];
            }
            double sgn = sn > 0 ? 1.0 : (sn < 0 ? -1.0 : 0.0);
            double den = 1.0 + std::abs(sn);
            xp = xs[i];
            for (int j = 0; j < deg_p; ++j) {
                J(i, j) = xp / den;
                xp *= xs[i];
            }
            xp = xs[i];
            for (int j = 0; j < deg_q; ++j) {
                J(i, deg_p + j) = -pn * sgn * xp / (den * den);
                xp *= xs[i];
            }
        }
        Eigen::MatrixXd H = J.transpose() * J;
        H.diagonal().array() += lambda * (H.diagonal().array() + 1e-12);
        Eigen::VectorXd step = H.ldlt().solve(-J.transpose() * r);
        Eigen::VectorXd atry = a;
        atry.tail(deg_p) += step.head(deg_p);
        Eigen::VectorXd btry = b + step.tail(deg_q);
        residual(atry, btry, rtry);
        double ctry = rtry.squaredNorm();
        if (ctry < cost) {
            a = atry;
            b = btry;
            r = rtry;
            if (cost - ctry < 1e-14 * cost) {
                cost = ctry;
                break;
            }
            cost = ctry;
            lambda = std::max(lambda * 0.5, 1e-12);
        } else {
            lambda *= 4.0;
            if (lambda > 1e8) break;
        }
    }
    set_state(state);
    return r.cwiseAbs().maxCoeff();
}

double kaiming_gain(const ActivationSpec& spec) {
    switch (spec.kind) {
        case ActKind::Sigmoid:
        case ActKind::Tanh:
        case ActKind::SELU:
        case ActKind::RSELU:
            return 1.0;
        case ActKind::ReLU:
        case ActKind::CReLU:
        case ActKind::LeakyReLU:
        case ActKind::PReLU:
        case ActKind::BoPReLU:
        case ActKind::RReLU:
        case ActKind::RandSmoothLeaky: {
            double a = spec.init_negative_slope();
            return std::sqrt(2.0 / (1.0 + a * a));
        }
        default: {
            // smooth kinds: effective negative slope as the slope proxy
            ActivationState st = ActivationState::init(spec, 1);
            st.mode = Mode::Eval;
            double a = effective_negative_slope(
                spec, st, SlopeDistribution::TruncatedStandardNormalNegative);
            return std::sqrt(2.0 / (1.0 + a * a));
        }
    }
}

double act_value(const ActivationSpec& spec, const ActivationState& state,
                 double x) {
    double slope = scope_slope(spec, state, 0);
    double v, d;
    eval_elem(spec, state, x, slope, v, d);
    return v;
}

double act_deriv(const ActivationSpec& spec, const ActivationState& state,
                 double x) {
    double slope = scope_slope(spec, state, 0);
    double v, d;
    eval_elem(spec, state, x, slope, v, d);
    return d;
}

double act_deriv_mag(const ActivationSpec& spec, const ActivationState& state,
                     double x, int entry) {
    if (spec.kind == ActKind::CReLU) {
        double d = 0.0;
        if (x > 0) d += 1.0;
        if (-x > 0) d += 1.0;
        return d;
    }
    int e = state.alpha.empty() ? 0
                                : entry % static_cast<int>(state.alpha.size());
    double slope = scope_slope(spec, state, e);
    double v, d;
    eval_elem(spec, state, x, slope, v, d);
    return std::abs(d);
}

}  // namespace plast
