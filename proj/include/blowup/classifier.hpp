#pragma once

#include "blowup/profile.hpp"
#include "blowup/solver.hpp"
#include "blowup/spectral.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace blowup {

/// Least squares y = limit + slope * s^-exponent.
struct LimitFit {
    double limit = 0.0;
    double slope = 0.0;
    double limit_err = 0.0;   // standard error of the intercept
    double rms = 0.0;         // root-mean-square residual
    int count = 0;
};

LimitFit richardson_limit(const std::vector<double>& s, const std::vector<double>& y, double exponent);

/// Least squares y = a + b x; returns {a, b}.
std::pair<double, double> linear_fit(const std::vector<double>& x, const std::vector<double>& y);

struct FitWindow {
    double lo = 0.0;
    double hi = 0.0;
};

struct ModeNormSeries {
    int k_max = 5;
    std::vector<double> s;
    std::vector<Vec> ell;      // ell[i][k] = ||P_k(chi g)||_rho at s[i]
    std::vector<double> I;     // ||g||_rho
};

ModeNormSeries mode_norms(const Trajectory& g, int k_max = 5, const CutoffSpec& cutoff = {});

struct FitBOptions {
    /// Exponent q of the subleading term c / s^q in the regression of s^2 g2.
    double exponent = 1.0;
    double max_spread = 0.5;
    CutoffSpec cutoff;
};

struct FitB {
    SymmetricMatrix B;
    SymmetricMatrix err;       // intercept standard errors
    SymmetricMatrix spread;    // (max - min) / |mean| of s^2 g2 over the window
    double rms = 0.0;
    int count = 0;
};

/// s^2 * v2 of chi g at every stride inside the window.
std::vector<SymmetricMatrix> scaled_null_mode(const Trajectory& g, const FitWindow& w, std::vector<double>& s_out,
                                              const CutoffSpec& cutoff = {});

FitB fit_B(const Trajectory& g, const FitWindow& w, const FitBOptions& opt = {});
FitB fit_B_series(const std::vector<double>& s, const std::vector<SymmetricMatrix>& s2g2, const FitBOptions& opt = {});

enum class Variant { Case1, Case2, Undetermined, ExactMatch };

std::string to_string(Variant v);

struct ClassifyOptions {
    FitBOptions fit;
    int k_max = 5;
    double noise_floor = 1e-13;     // I below this everywhere in the window: exact match
    double dominance = 0.9;         // mean of ell_2 / I over the window's second half
    double case2_slope = -0.4;      // d log I / ds at or below this: Case2
    int min_strides = 10;
};

struct Classification {
    Variant variant = Variant::Undetermined;
    SymmetricMatrix B;              // Case1
    FitB fit;                       // Case1
    double decay_rate = 0.0;        // Case2: -d log I / ds
    double log_slope = 0.0;         // d log I / ds over the window
    double dominance = 0.0;         // mean ell_2 / I over the window's second half
    double fit_residual = 0.0;
    std::string diagnostics;
};

Classification classify(const Trajectory& g, const FitWindow& w, const ClassifyOptions& opt = {});

void write_mode_norms_csv(std::ostream& os, const ModeNormSeries& m);
/// Structured text (JSON) summary.
std::string classification_json(const Classification& c);

} // namespace blowup
