#include "plast/analytic.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace plast {

namespace {

// Adaptive Simpson on a pair of integrands sharing one subdivision, so a
// constant phi' divides out of the weighted mean exactly.
struct PairIntegrand {
    const ActivationSpec& spec;
    const ActivationState& state;
    bool gaussian_weight;

    void eval(double x, double& f, double& w) const {
        w = gaussian_weight ? std::exp(-0.5 * x * x) : 1.0;
        f = act_deriv(spec, state, x) * w;
    }
};

void simpson_pair(const PairIntegrand& g, double a, double b, double fa,
                  double wa, double fm, double wm, double fb, double wb,
                  double sf, double sw, double tol, int depth, double& outf,
                  double& outw) {
    double m = 0.5 * (a + b);
    double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
    double flm, wlm, frm, wrm;
    g.eval(lm, flm, wlm);
    g.eval(rm, frm, wrm);
    double h = b - a;
    double sfl = h / 12.0 * (fa + 4 * flm + fm);
    double sfr = h / 12.0 * (fm + 4 * frm + fb);
    double swl = h / 12.0 * (wa + 4 * wlm + wm);
    double swr = h / 12.0 * (wm + 4 * wrm + wb);
    double errf = std::abs(sfl + sfr - sf);
    double errw = std::abs(swl + swr - sw);
    if (depth <= 0 || (errf < tol && errw < tol)) {
        outf = sfl + sfr + (sfl + sfr - sf) / 15.0;
        outw = swl + swr + (swl + swr - sw) / 15.0;
        return;
    }
    double lf, lw, rf, rw;
    simpson_pair(g, a, m, fa, wa, flm, wlm, fm, wm, sfl, swl, tol / 2, depth - 1,
                 lf, lw);
    simpson_pair(g, m, b, fm, wm, frm, wrm, fb, wb, sfr, swr, tol / 2, depth - 1,
                 rf, rw);
    outf = lf + rf;
    outw = lw + rw;
}

double second_deriv_probe(const ActivationSpec& spec,
                          const ActivationState& state) {
    // central difference of phi' away from the origin kink
    const double probes[] = {-3.1, -1.7, -0.9, 0.9, 1.7, 3.1};
    const double h = 1e-5;
    double best = 0.0;
    for (double x : probes) {
        double d2 = (act_deriv(spec, state, x + h) - act_deriv(spec, state, x - h)) /
                    (2 * h);
        best = std::max(best, std::abs(d2));
    }
    return best;
}

}  // namespace

double effective_negative_slope(const ActivationSpec& spec,
                                const ActivationState& state,
                                SlopeDistribution dist) {
    double a = dist == SlopeDistribution::UniformNegative ? -3.0 : -10.0;
    double b = -1e-12;
    PairIntegrand g{spec, state,
                    dist == SlopeDistribution::TruncatedStandardNormalNegative};
    double fa, wa, fm, wm, fb, wb;
    double m = 0.5 * (a + b);
    g.eval(a, fa, wa);
    g.eval(m, fm, wm);
    g.eval(b, fb, wb);
    double h = b - a;
    double sf = h / 6.0 * (fa + 4 * fm + fb);
    double sw = h / 6.0 * (wa + 4 * wm + wb);
    double outf, outw;
    simpson_pair(g, a, b, fa, wa, fm, wm, fb, wb, sf, sw, 1e-10, 40, outf, outw);
    return outf / outw;
}

double dead_band_width(const ActivationSpec& spec, const ActivationState& state,
                       double range_lo, double range_hi, double eps,
                       long grid_n) {
    if (eps <= 0) throw std::invalid_argument("dead_band_width: eps must be > 0");
    if (grid_n < 3 || grid_n % 2 == 0)
        throw std::invalid_argument("dead_band_width: grid_n must be odd and >= 3");
    long dead = 0;
    for (long i = 0; i < grid_n; ++i) {
        double x = range_lo + (range_hi - range_lo) * i / (grid_n - 1);
        if (act_deriv_mag(spec, state, x) < eps) ++dead;
    }
    return static_cast<double>(dead) / grid_n;
}

PropertyGrid property_grid(const ActivationSpec& spec,
                           const ActivationState& state) {
    PropertyGrid g;
    const double tail_tol = 1e-6;
    const double zero_tol = 1e-12;

    auto deriv = [&](double x) {
        if (spec.kind == ActKind::CReLU) {
            // combined two-branch gradient magnitude, signed by the live branch
            if (x > 0) return 1.0;
            if (x < 0) return 1.0;  // second branch, magnitude
            return 0.0;
        }
        return act_deriv(spec, state, x);
    };

    // hard dead zone: a run of exactly-zero derivative on x < 0. For CReLU
    // each branch alone retains the ReLU dead zone.
    {
        auto branch_deriv = [&](double x) {
            if (spec.kind == ActKind::CReLU) return x > 0 ? 1.0 : 0.0;
            return act_deriv(spec, state, x);
        };
        int run = 0;
        for (int i = 0; i < 400; ++i) {
            double x = -10.0 + i * (10.0 - 1e-6) / 400.0;
            if (std::abs(branch_deriv(x)) < zero_tol)
                ++run;
            else
                run = 0;
            if (run >= 3) {
                g.hdz = true;
                break;
            }
        }
    }

    // non-zero gradient for almost all x < 0
    {
        int nonzero = 0, total = 0;
        for (int i = 0; i < 400; ++i) {
            double x = -10.0 + i * (10.0 - 1e-3) / 400.0;
            ++total;
            if (std::abs(deriv(x)) > 1e-9) ++nonzero;
        }
        g.nzg = nonzero >= static_cast<int>(0.99 * total);
    }

    bool neg_tail = std::abs(deriv(-50.0)) < tail_tol;
    bool pos_tail = std::abs(deriv(50.0)) < tail_tol;
    g.sat_neg = neg_tail;
    g.sat_both = neg_tail && pos_tail;

    {
        double h = 1e-8;
        double left = deriv(-h), right = deriv(h);
        g.c1 = std::abs(left - right) < 1e-6;
        if (spec.kind == ActKind::CReLU) g.c1 = false;  // kink in each branch
    }

    {
        double lo = 0.0, hi = 0.0;
        for (int i = 0; i <= 2000; ++i) {
            double x = -10.0 + 20.0 * i / 2000.0;
            if (std::abs(x) < 1e-6) continue;
            double d = spec.kind == ActKind::CReLU ? 1.0 : act_deriv(spec, state, x);
            lo = std::min(lo, d);
            hi = std::max(hi, d);
        }
        g.non_monotonic = lo < -zero_tol && hi > zero_tol;
    }

    g.self_normalizing =
        spec.kind == ActKind::SELU || spec.kind == ActKind::RSELU;
    g.learnable_or_random_slope =
        spec.kind == ActKind::PReLU || spec.kind == ActKind::RReLU ||
        spec.kind == ActKind::RandSmoothLeaky || spec.kind == ActKind::BoPReLU ||
        spec.kind == ActKind::RSELU;
    g.nonzero_second_derivative =
        spec.kind != ActKind::CReLU && second_deriv_probe(spec, state) > 1e-6;
    return g;
}

std::vector<ActivationSpec> canonical_specs() {
    using K = ActKind;
    return {
        {.kind = K::ReLU, .alpha = 0.0},
        {.kind = K::LeakyReLU, .alpha = 0.7},
        {.kind = K::PReLU, .alpha = 0.25, .scope = PreluScope::Neuron},
        {.kind = K::RReLU, .lower = 0.6, .upper = 0.8},
        {.kind = K::Sigmoid},
        {.kind = K::Tanh},
        {.kind = K::Swish, .beta = 0.2},
        {.kind = K::GeLU, .beta = 0.1},
        {.kind = K::ELU, .alpha = 1.0},
        {.kind = K::CELU, .alpha = 2.0},
        {.kind = K::SELU, .alpha = kSeluAlpha},
        {.kind = K::CReLU, .alpha = 0.0},
        {.kind = K::Rational, .deg_p = 5, .deg_q = 4},
        {.kind = K::SmoothLeaky, .alpha = 0.05, .c = 5.0, .p = 3.0},
        {.kind = K::RandSmoothLeaky, .c = 5.0, .p = 3.0, .lower = 0.01,
         .upper = 0.05},
    };
}

std::vector<ActivationSpec> appendix_specs() {
    return {
        {.kind = ActKind::BoPReLU, .alpha = 0.65, .lower = 0.6, .upper = 0.8,
         .scope = PreluScope::Neuron},
        {.kind = ActKind::RSELU, .lower = 0.9232, .upper = 2.4232},
    };
}

std::string property_grid_csv(const std::vector<ActivationSpec>& specs) {
    std::ostringstream out;
    out << "kind,hdz,nzg,sat_both,sat_neg,c1,non_monotonic,self_normalizing,"
           "learnable_or_random_slope,nonzero_second_derivative\n";
    for (const auto& spec : specs) {
        ActivationState st = ActivationState::init(spec, 1);
        st.mode = Mode::Eval;
        PropertyGrid g = property_grid(spec, st);
        out << act_kind_name(spec.kind) << ',' << g.hdz << ',' << g.nzg << ','
            << g.sat_both << ',' << g.sat_neg << ',' << g.c1 << ','
            << g.non_monotonic << ',' << g.self_normalizing << ','
            << g.learnable_or_random_slope << ','
            << g.nonzero_second_derivative << '\n';
    }
    return out.str();
}

}  // namespace plast
