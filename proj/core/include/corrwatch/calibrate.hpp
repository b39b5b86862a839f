#pragma once

#include <random>
#include <string>
#include <vector>

#include "corrwatch/detectors.hpp"

namespace corrwatch {

struct SignFlipTrial {
    int trial_index = 0;                     // 1-based
    std::vector<double> statistic_sequence;  // S_t for t = 2..M (length M-1)
};

enum class CalibrationMethod { EmpiricalQuantile, TailFit, TheoreticalInversion };
std::string to_string(CalibrationMethod m);
CalibrationMethod calibration_method_from_string(const std::string& s);

struct CalibrationDiagnostics {
    double crossing_rate = 0;   // fraction of post-burn-in values >= threshold
    long pooled_count = 0;
    int burn_in = 0;            // values dropped per trial (the first w)
    long per_trial_length = 0;  // values kept per trial after burn-in
    double level = 0;           // trial-max quantile level exp(-L/gamma) when used
    bool used_tail_fit = false;
    double tail_mu = 0, tail_sigma = 0;
    bool extrapolation_flagged = false;
    std::string rule;  // "mean-crossing" | "trial-max-quantile" | "tail-fit"
};

struct CalibrationResult {
    double threshold = 0;
    double gamma = 0;
    CalibrationMethod method = CalibrationMethod::EmpiricalQuantile;
    CalibrationDiagnostics diagnostics;
};

// One Rademacher vector per trial applied to every column of `prechange` (p x M,
// columns ordered in time); each trial records the statistic sequence for t = 2..M
// with the growing-then-sliding window. Shewhart entries before t = w+1 are stored
// as 0 (they fall inside the burn-in that threshold_from_sequences drops).
std::vector<SignFlipTrial> signflip_sequences(const Matrix& prechange,
                                              const ReferenceModel& ref,
                                              const DetectorConfig& cfg, int q,
                                              std::mt19937_64& rng);

// Shared-flip variant: the same q flips evaluated under several configurations in one
// pass. Configs must agree on w and estimator, use no enhancement, and not be Full.
std::vector<std::vector<SignFlipTrial>> signflip_sequences_multi(
    const Matrix& prechange, const ReferenceModel& ref,
    const std::vector<DetectorConfig>& cfgs, int q, std::mt19937_64& rng);

CalibrationResult threshold_from_sequences(const std::vector<SignFlipTrial>& trials,
                                           double gamma, int w);

// (2/y)(Phi(y/2) - 1/2) / ((y/2) Phi(y/2) + phi(y/2)); returns 1 for y <= 1e-8.
double zeta(double y);

double arl_approx(const ArlApproxInput& in);
double arl_approx_log(const ArlApproxInput& in);  // log of the same quantity

struct Moments {
    double mu = 0;
    double sigma_d = 0;
};

// Closed-form pre-change moments of the Sum statistics: per-entry mean from the
// expectation of v on the w-lag candidate window, per-entry variance 2*mean^2
// (leading order of the squared-difference expansion), aggregated over p(p-1)/2
// entries as if uncorrelated; window-limited kinds carry the weight w*H/(H+w).
// Max kinds have no closed form here -> use prechange_moments_mc.
Moments prechange_moments_analytic(StatKind kind, Variant variant, const MomentSpec& moments,
                                   int p, int w, int H, EstimatorMode mode);

// Monte Carlo moments of the full configured statistic over independent pre-change
// windows (fresh reference every 50 windows).
Moments prechange_moments_mc(StatKind kind, Variant variant, const Matrix& R0, int w, int H,
                             EstimatorMode mode, int n_windows, std::uint64_t seed);

double threshold_from_arl(double gamma, const Moments& m, int w);
CalibrationResult calibration_from_arl(double gamma, const Moments& m, int w);

// b / Delta1 for Sum, b / Delta2 for Max.
double edd_approx(double b, const SignalStrength& strength, StatKind kind);
// Window-size guidance: w should be at least b / min(Delta1, Delta2).
double recommended_min_window(double b, const SignalStrength& strength);

}  // namespace corrwatch
