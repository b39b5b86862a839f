#include "corrwatch/calibrate.hpp"

#include <algorithm>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/erf.hpp>
#include <cmath>
#include <limits>
#include <numbers>

#include "corrwatch/enhance.hpp"

namespace corrwatch {

std::string to_string(CalibrationMethod m) {
    switch (m) {
        case CalibrationMethod::EmpiricalQuantile: return "empirical-quantile";
        case CalibrationMethod::TailFit: return "tail-fit";
        case CalibrationMethod::TheoreticalInversion: return "theoretical-inversion";
    }
    throw Error("unknown calibration method");
}

CalibrationMethod calibration_method_from_string(const std::string& s) {
    if (s == "empirical-quantile") return CalibrationMethod::EmpiricalQuantile;
    if (s == "tail-fit") return CalibrationMethod::TailFit;
    if (s == "theoretical-inversion") return CalibrationMethod::TheoreticalInversion;
    throw Error("unknown calibration method '" + s + "'");
}

namespace {

double inv_phi(double p) { return std::numbers::sqrt2 * boost::math::erf_inv(2.0 * p - 1.0); }

// statistic at time t (1-based) over the flipped history; Shewhart is 0 before t = w+1
double trial_value(const Matrix& flipped, const ReferenceModel& ref, const DetectorConfig& cfg,
                   long t, std::mt19937_64& rng) {
    if (cfg.variant == Variant::Shewhart && t < cfg.w + 1) return 0.0;
    const long n = (cfg.variant == Variant::Full) ? t : std::min<long>(t, cfg.w + 1);
    Matrix win = flipped.middleCols(t - n, n);
    if (cfg.enhancement != Enhancement::None && cfg.variant == Variant::WindowLimited)
        return enhanced_step(ref, win, cfg, rng, t).statistic;
    return detail::evaluate_window(cfg.kind, cfg.variant, ref, win, cfg, t, 2).statistic;
}

}  // namespace

std::vector<SignFlipTrial> signflip_sequences(const Matrix& prechange,
                                              const ReferenceModel& ref,
                                              const DetectorConfig& cfg, int q,
                                              std::mt19937_64& rng) {
    const int p = ref.dim();
    if (prechange.rows() != p) throw DimensionError("pre-change data dimension mismatch");
    cfg.validate(p);
    const long M = prechange.cols();
    if (M < cfg.w + 2) throw InsufficientDataError("need at least w+2 pre-change samples");
    if (q < 1) throw Error("q must be >= 1");

    std::uniform_int_distribution<int> coin(0, 1);
    std::vector<SignFlipTrial> out(q);
    Vector R(p);
    for (int l = 0; l < q; ++l) {
        for (int i = 0; i < p; ++i) R(i) = coin(rng) ? 1.0 : -1.0;
        Matrix flipped = R.asDiagonal() * prechange;
        out[l].trial_index = l + 1;
        out[l].statistic_sequence.reserve(M - 1);
        for (long t = 2; t <= M; ++t)
            out[l].statistic_sequence.push_back(trial_value(flipped, ref, cfg, t, rng));
    }
    return out;
}

std::vector<std::vector<SignFlipTrial>> signflip_sequences_multi(
    const Matrix& prechange, const ReferenceModel& ref,
    const std::vector<DetectorConfig>& cfgs, int q, std::mt19937_64& rng) {
    if (cfgs.empty()) throw Error("no configurations given");
    const int p = ref.dim();
    const int w = cfgs.front().w;
    const EstimatorMode mode = cfgs.front().estimator;
    for (const auto& c : cfgs) {
        c.validate(p);
        if (c.w != w || c.estimator != mode)
            throw Error("shared-flip calibration needs equal w and estimator");
        if (c.enhancement != Enhancement::None || c.variant == Variant::Full ||
            c.kind == StatKind::Combined)
            throw Error("shared-flip calibration covers plain window-limited and Shewhart "
                        "Sum/Max only");
    }
    if (prechange.rows() != p) throw DimensionError("pre-change data dimension mismatch");
    const long M = prechange.cols();
    if (M < w + 2) throw InsufficientDataError("need at least w+2 pre-change samples");
    if (q < 1) throw Error("q must be >= 1");

    std::vector<std::vector<SignFlipTrial>> out(cfgs.size(), std::vector<SignFlipTrial>(q));
    std::uniform_int_distribution<int> coin(0, 1);
    Vector R(p);
    for (int l = 0; l < q; ++l) {
        for (int i = 0; i < p; ++i) R(i) = coin(rng) ? 1.0 : -1.0;
        Matrix flipped = R.asDiagonal() * prechange;
        for (std::size_t c = 0; c < cfgs.size(); ++c) {
            out[c][l].trial_index = l + 1;
            out[c][l].statistic_sequence.reserve(M - 1);
        }
        for (long t = 2; t <= M; ++t) {
            const long n = std::min<long>(t, w + 1);
            Matrix win = flipped.middleCols(t - n, n);
            auto ev = detail::eval_suffixes(win, ref.r0_lower, mode);
            for (std::size_t c = 0; c < cfgs.size(); ++c) {
                const auto& cfg = cfgs[c];
                double v = 0;
                if (cfg.variant != Variant::Shewhart || t >= w + 1) {
                    auto r = detail::apply_policy(ev, cfg.kind, cfg.variant, cfg.H, 2,
                                                  static_cast<int>(n), 1, t);
                    if (!r.any)
                        throw DegenerateWindowError("all candidate windows degenerate");
                    v = r.value;
                }
                out[c][l].statistic_sequence.push_back(v);
            }
        }
    }
    return out;
}

namespace {

double quantile7(const std::vector<double>& sorted, double level) {
    const long n = static_cast<long>(sorted.size());
    if (n == 1) return sorted[0];
    const double h = (n - 1) * std::clamp(level, 0.0, 1.0);
    const long lo = static_cast<long>(h);
    if (lo >= n - 1) return sorted[n - 1];
    return sorted[lo] + (h - lo) * (sorted[lo + 1] - sorted[lo]);
}

}  // namespace

CalibrationResult threshold_from_sequences(const std::vector<SignFlipTrial>& trials,
                                           double gamma, int w) {
    if (trials.empty()) throw Error("no sign-flip trials");
    if (!(gamma > 1)) throw Error("gamma must exceed 1");
    if (w < 0) throw Error("w must be nonnegative");
    const long seq_len = static_cast<long>(trials.front().statistic_sequence.size());
    for (const auto& tr : trials)
        if (static_cast<long>(tr.statistic_sequence.size()) != seq_len)
            throw Error("trials have unequal sequence lengths");
    const long L = seq_len - w;  // values kept per trial after burn-in
    if (L < 1) throw InsufficientDataError("sequences do not outlast the burn-in");
    const long q = static_cast<long>(trials.size());

    std::vector<double> pooled;
    pooled.reserve(q * L);
    for (const auto& tr : trials)
        pooled.insert(pooled.end(), tr.statistic_sequence.begin() + w,
                      tr.statistic_sequence.end());
    std::vector<double> sorted_pooled = pooled;
    std::sort(sorted_pooled.begin(), sorted_pooled.end());

    // mean first time a trial reaches v (crossing uses >=); trials that never do count L
    auto mean_crossing = [&](double v) {
        double s = 0;
        for (const auto& tr : trials) {
            const double* vals = tr.statistic_sequence.data() + w;
            long idx = L;
            for (long i = 0; i < L; ++i)
                if (vals[i] >= v) {
                    idx = i + 1;
                    break;
                }
            s += static_cast<double>(idx);
        }
        return s / static_cast<double>(q);
    };
    // largest pooled value whose estimated mean crossing time still fits the budget g
    auto direct_value = [&](double g) {
        if (mean_crossing(sorted_pooled.front()) > g) return sorted_pooled.front();
        long lo = 0, hi = static_cast<long>(sorted_pooled.size()) - 1;
        while (lo < hi) {
            const long mid = (lo + hi + 1) / 2;
            if (mean_crossing(sorted_pooled[mid]) <= g)
                lo = mid;
            else
                hi = mid - 1;
        }
        return sorted_pooled[lo];
    };

    CalibrationResult res;
    res.gamma = gamma;
    auto& d = res.diagnostics;
    d.pooled_count = static_cast<long>(pooled.size());
    d.burn_in = w;
    d.per_trial_length = L;

    if (gamma <= L / 5.0) {
        res.threshold = direct_value(gamma);
        res.method = CalibrationMethod::EmpiricalQuantile;
        d.rule = "mean-crossing";
    } else {
        // run lengths beyond a single trial: per-trial maxima at level exp(-L/gamma)
        std::vector<double> maxima(q);
        for (long i = 0; i < q; ++i)
            maxima[i] = *std::max_element(trials[i].statistic_sequence.begin() + w,
                                          trials[i].statistic_sequence.end());
        std::sort(maxima.begin(), maxima.end());
        const double level = std::exp(-static_cast<double>(L) / gamma);
        d.level = level;
        const double b_seam = direct_value(L / 5.0);
        double b;
        if (q * (1.0 - level) >= 20) {
            b = quantile7(maxima, level);
            res.method = CalibrationMethod::EmpiricalQuantile;
            d.rule = "trial-max-quantile";
        } else {
            // Gaussian tail fitted through the top 5% of the maxima (QQ regression)
            long n_tail = std::min<long>(q, std::max<long>(3, std::lround(std::ceil(0.05 * q))));
            double sx = 0, sy = 0, sxx = 0, sxy = 0;
            for (long i = q - n_tail; i < q; ++i) {
                const double x = inv_phi((i + 0.5) / q);
                sx += x;
                sy += maxima[i];
                sxx += x * x;
                sxy += x * maxima[i];
            }
            const double denom = n_tail * sxx - sx * sx;
            double slope = denom > 0 ? (n_tail * sxy - sx * sy) / denom : 0.0;
            if (slope < 0) slope = 0;
            const double mu_t = (sy - slope * sx) / n_tail;
            b = mu_t + slope * inv_phi(level);
            if (q >= 20) b = std::max(b, quantile7(maxima, 1.0 - 20.0 / q));
            d.used_tail_fit = true;
            d.tail_mu = mu_t;
            d.tail_sigma = slope;
            res.method = CalibrationMethod::TailFit;
            d.rule = "tail-fit";
        }
        d.extrapolation_flagged = q * (1.0 - level) < 2;
        res.threshold = std::max(b, b_seam);
    }
    d.crossing_rate =
        static_cast<double>(std::count_if(pooled.begin(), pooled.end(),
                                          [&](double v) { return v >= res.threshold; })) /
        static_cast<double>(d.pooled_count);
    return res;
}

double zeta(double y) {
    if (y <= 1e-8) return 1.0;
    const double h = 0.5 * y;
    const double Phi = 0.5 * std::erfc(-h / std::numbers::sqrt2);
    const double phi = std::exp(-0.5 * h * h) / std::sqrt(2.0 * std::numbers::pi);
    return (2.0 / y) * (Phi - 0.5) / (h * Phi + phi);
}

double arl_approx_log(const ArlApproxInput& in) {
    if (!(in.sigma_d > 0)) throw NumericError("sigma_d must be positive");
    if (!(in.b > in.mu)) throw NumericError("ARL approximation needs b > mu");
    if (in.w < 2) throw Error("w must be >= 2");
    const double integral = boost::math::quadrature::gauss_kronrod<double, 15>::integrate(
        [](double y) {
            const double z = zeta(y);
            return y * z * z;
        },
        in.xi1, in.xi2, 15, 1e-8);
    if (!(integral > 0)) throw NumericError("ARL integral vanished");
    return 0.5 * std::log(2.0 * std::numbers::pi / in.kappa) - std::log(2.0) + 0.5 * in.kappa -
           std::log(integral);
}

double arl_approx(const ArlApproxInput& in) { return std::exp(arl_approx_log(in)); }

Moments prechange_moments_analytic(StatKind kind, Variant variant, const MomentSpec& moments,
                                   int p, int w, int H, EstimatorMode mode) {
    if (p < 2 || w < 2 || H < 2) throw Error("p, w and H must all be at least 2");
    if (kind != StatKind::Sum)
        throw Error("closed-form moments cover the Sum kinds; use prechange_moments_mc");
    if (variant == Variant::Full)
        throw Error("the full-history variant has no stationary moments");
    const int t = w + 1;  // the t-w candidate covers w+1 samples
    const double mu_e = (mode == EstimatorMode::KnownMean)
                            ? expected_v_known_mean(moments, H, t)
                            : expected_v_unknown_mean(moments, H, t);
    const double var_e = 2.0 * mu_e * mu_e;
    const double N = static_cast<double>(vecho_size(p));
    double mu = N * mu_e;
    double sd = std::sqrt(N * var_e);
    if (variant == Variant::WindowLimited) {
        const double om = weight(w, H);
        mu *= om;
        sd *= om;
    }
    return {mu, sd};
}

Moments prechange_moments_mc(StatKind kind, Variant variant, const Matrix& R0, int w, int H,
                             EstimatorMode mode, int n_windows, std::uint64_t seed) {
    const int p = static_cast<int>(R0.rows());
    if (R0.cols() != p) throw DimensionError("R0 must be square");
    if (p < 2 || w < 2 || H < 2) throw Error("p, w and H must all be at least 2");
    if (n_windows < 2) throw Error("need at least 2 Monte Carlo windows");
    if (kind == StatKind::Combined) throw Error("the combined kind has no scalar moments");
    if (variant == Variant::Full)
        throw Error("the full-history variant has no stationary moments");
    Eigen::LLT<Matrix> llt(R0);
    if (llt.info() != Eigen::Success) throw NumericError("R0 is not positive definite");
    const Matrix Lc = llt.matrixL();

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    auto draw = [&](int n) {
        Matrix Z(p, n);
        for (int j = 0; j < n; ++j)
            for (int i = 0; i < p; ++i) Z(i, j) = gauss(rng);
        return Matrix(Lc * Z);
    };

    DetectorConfig cfg;
    cfg.kind = kind;
    cfg.variant = variant;
    cfg.w = w;
    cfg.H = H;
    cfg.estimator = mode;

    ReferenceModel ref;
    double mean = 0, m2 = 0;
    long n = 0;
    for (int i = 0; i < n_windows; ++i) {
        if (i % 50 == 0) ref = build_reference(draw(H + 1), mode);
        const Matrix win = draw(w + 1);
        const double v = detail::evaluate_window(kind, variant, ref, win, cfg, w + 1, 2).statistic;
        ++n;
        const double d1 = v - mean;
        mean += d1 / n;
        m2 += d1 * (v - mean);
    }
    return {mean, std::sqrt(m2 / (n - 1))};
}

double threshold_from_arl(double gamma, const Moments& m, int w) {
    if (!(gamma > 1)) throw Error("gamma must exceed 1");
    if (!(m.sigma_d > 0)) throw NumericError("sigma_d must be positive");
    const double lg = std::log(gamma);
    auto larl = [&](double b) {
        return arl_approx_log(ArlApproxInput::make(b, m.mu, m.sigma_d, w));
    };

    // the approximation diverges as b -> mu+ and grows for large b; locate the minimum
    // first, then bisect on the increasing branch right of it
    const double s_lo = 1e-3, s_hi = 50.0;
    double best_s = s_lo, best_v = std::numeric_limits<double>::infinity();
    for (int i = 0; i <= 400; ++i) {
        const double s = s_lo * std::pow(s_hi / s_lo, i / 400.0);
        const double v = larl(m.mu + s * m.sigma_d);
        if (v < best_v) {
            best_v = v;
            best_s = s;
        }
    }
    if (best_v > lg)
        throw NumericError("ARL target " + std::to_string(gamma) +
                           " lies below the achievable minimum exp(" + std::to_string(best_v) +
                           ") at b = " + std::to_string(m.mu + best_s * m.sigma_d));
    double lo = m.mu + best_s * m.sigma_d, hi = m.mu + s_hi * m.sigma_d;
    if (larl(hi) < lg)
        throw NumericError("ARL target exceeds the bracket [" + std::to_string(lo) + ", " +
                           std::to_string(hi) + "]");
    double mid = 0.5 * (lo + hi);
    for (int it = 0; it < 300; ++it) {
        mid = 0.5 * (lo + hi);
        const double v = larl(mid);
        if (std::abs(v - lg) <= 1e-6) return mid;
        (v < lg ? lo : hi) = mid;
        if (hi - lo <= 1e-12 * std::max(1.0, std::abs(hi))) break;
    }
    return mid;
}

CalibrationResult calibration_from_arl(double gamma, const Moments& m, int w) {
    CalibrationResult res;
    res.threshold = threshold_from_arl(gamma, m, w);
    res.gamma = gamma;
    res.method = CalibrationMethod::TheoreticalInversion;
    res.diagnostics.rule = "arl-inversion";
    return res;
}

double edd_approx(double b, const SignalStrength& strength, StatKind kind) {
    if (kind == StatKind::Combined)
        throw Error("EDD approximation covers the Sum and Max kinds");
    const double delta = (kind == StatKind::Sum) ? strength.delta1 : strength.delta2;
    if (!(delta > 0)) throw Error("zero signal strength");
    return b / delta;
}

double recommended_min_window(double b, const SignalStrength& strength) {
    const double d = std::min(strength.delta1, strength.delta2);
    if (!(d > 0)) throw Error("zero signal strength");
    return b / d;
}

}  // namespace corrwatch
