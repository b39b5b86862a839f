#include "corrwatch/corrstat.hpp"

#include <cmath>

namespace corrwatch {

namespace {

void check_finite(const Matrix& window) {
    if (!window.allFinite()) throw Error("window contains non-finite values");
}

}  // namespace

Matrix sample_covariance(const Matrix& window) {
    const long n = window.cols();
    if (n < 2) throw InsufficientDataError("sample_covariance needs at least 2 observations");
    check_finite(window);
    Vector mean = window.rowwise().mean();
    Matrix centered = window.colwise() - mean;
    return centered * centered.transpose() / static_cast<double>(n - 1);
}

CorrelationEstimate sample_correlation(const Matrix& window, EstimatorMode mode,
                                       long start, long end) {
    const long n = window.cols();
    const int p = static_cast<int>(window.rows());
    if (n < 2) throw InsufficientDataError("sample_correlation needs at least 2 observations");
    check_finite(window);

    Matrix cov;
    if (mode == EstimatorMode::Centered) {
        cov = sample_covariance(window);
    } else {
        cov = window * window.transpose() / static_cast<double>(n);
    }

    Vector d = cov.diagonal();
    for (int i = 0; i < p; ++i)
        if (!(d[i] > 0))
            throw DegenerateWindowError(
                "degenerate window: coordinate " + std::to_string(i) + " has zero variance", i);

    Vector inv_sd = d.cwiseSqrt().cwiseInverse();
    CorrelationEstimate est;
    est.entries = inv_sd.asDiagonal() * cov * inv_sd.asDiagonal();
    // clamp off-diagonals against floating-point overshoot; pin the diagonal
    est.entries = est.entries.cwiseMax(-1.0).cwiseMin(1.0);
    est.entries.diagonal().setOnes();
    est.n_samples = static_cast<int>(n);
    est.start = start;
    est.end = end;
    return est;
}

ReferenceModel build_reference(const Matrix& reference, EstimatorMode mode) {
    const long n = reference.cols();
    if (n < 3) throw InsufficientDataError("reference needs at least 3 observations (H+1 >= 3)");
    ReferenceModel ref;
    ref.H = static_cast<int>(n - 1);
    ref.mode = mode;
    ref.R0 = sample_correlation(reference, mode, -ref.H, 0);
    if (mode == EstimatorMode::Centered) {
        ref.mean = reference.rowwise().mean();
        Matrix centered = reference.colwise() - ref.mean;
        ref.scale = (centered.array().square().rowwise().sum() / static_cast<double>(n - 1))
                        .sqrt()
                        .matrix();
    } else {
        ref.mean = Vector::Zero(reference.rows());
        ref.scale = (reference.array().square().rowwise().sum() / static_cast<double>(n))
                        .sqrt()
                        .matrix();
    }
    vecho_lower(ref.R0.entries, ref.r0_lower);
    return ref;
}

DiffVector diff_vector(const CorrelationEstimate& R0, const CorrelationEstimate& R) {
    if (R0.dim() != R.dim()) throw DimensionError("diff_vector: dimension mismatch");
    const int p = R.dim();
    DiffVector v;
    v.values.resize(vecho_size(p));
    long k = 0;
    for (int j = 0; j < p; ++j)
        for (int i = j + 1; i < p; ++i) {
            double d = R0.entries(i, j) - R.entries(i, j);
            v.values[k++] = d * d;
        }
    v.candidate_start = R.start;
    v.end = R.end;
    return v;
}

double expected_v_known_mean(const MomentSpec& m, int H, int t) {
    if (H < 1 || t < 1) throw Error("expected_v_known_mean requires H >= 1, t >= 1");
    double d = m.rho0 - m.rho1;
    return d * d + (m.beta20 - m.rho0 * m.rho0) / (H + 1.0) +
           (m.beta21 - m.rho1 * m.rho1) / static_cast<double>(t);
}

double expected_v_unknown_mean(const MomentSpec& m, int H, int t) {
    if (H < 2 || t < 2) throw Error("expected_v_unknown_mean requires H >= 2, t >= 2");
    double d = m.rho0 - m.rho1;
    double Hd = H;
    return d * d + m.beta20 / Hd + m.beta21 / (t - 1.0) +
           m.rho1 * m.rho1 * (5.0 - t) / (t * (t - 1.0)) +
           m.rho0 * m.rho0 * (3 * Hd + 4 - Hd * Hd) / (Hd * (Hd + 1) * (Hd + 1));
}

}  // namespace corrwatch
