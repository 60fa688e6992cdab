#pragma once

#include <string>
#include <vector>

#include "plast/activation.hpp"

namespace plast {

// Measure over x < 0 for the effective negative slope.
enum class SlopeDistribution { TruncatedStandardNormalNegative, UniformNegative };

// s_bar = E_{x<0}[phi'(x)] by adaptive quadrature on [-10, 0). Randomized
// kinds are evaluated at their Eval midpoint slope. UniformNegative uses
// [-3, 0).
double effective_negative_slope(const ActivationSpec& spec,
                                const ActivationState& state,
                                SlopeDistribution dist);

// Fraction of an odd uniform grid on [range_lo, range_hi] where
// |phi'(x)| < eps.
double dead_band_width(const ActivationSpec& spec, const ActivationState& state,
                       double range_lo = -100.0, double range_hi = 100.0,
                       double eps = 1e-3, long grid_n = 200001);

struct PropertyGrid {
    bool hdz = false;         // hard dead zone: phi' == 0 on an open negative interval
    bool nzg = false;         // non-zero gradient for almost all x < 0
    bool sat_both = false;    // both tails vanish
    bool sat_neg = false;     // negative tail vanishes
    bool c1 = false;          // left/right derivatives agree at 0
    bool non_monotonic = false;
    bool self_normalizing = false;          // declared per kind
    bool learnable_or_random_slope = false; // declared per kind
    bool nonzero_second_derivative = false;
};

PropertyGrid property_grid(const ActivationSpec& spec,
                           const ActivationState& state);

// Canonical parameterization for each of the 15 zoo rows (the settings the
// property grid is documented against). Swish/GeLU use small temperatures so
// their negative-side responsiveness sits in the probed window; Smooth-Leaky
// rows use a leak below the ~1/11 non-monotonicity threshold.
std::vector<ActivationSpec> canonical_specs();

// Canonical rows for the two appendix designs (Bo-PReLU, RSELU).
std::vector<ActivationSpec> appendix_specs();

// One row per spec in Table-style column order:
// kind,hdz,nzg,sat_both,sat_neg,c1,non_monotonic,self_norm,lr_slope,f2
std::string property_grid_csv(const std::vector<ActivationSpec>& specs);

}  // namespace plast
