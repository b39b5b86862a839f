#include "corrwatch/enhance.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>

namespace corrwatch {

Vector smote_interpolate(const Vector& x, const Vector& xstar, double u) {
    return x + u * (xstar - x);
}

AugmentedWindow smote_augment(const Matrix& X, int k_neighbors, std::mt19937_64& rng) {
    const int p = static_cast<int>(X.rows()), m0 = static_cast<int>(X.cols());
    if (m0 < 2) throw InsufficientDataError("SMOTE needs at least 2 window columns");
    if (k_neighbors < 1) throw Error("k_neighbors must be >= 1");
    const int k = std::min(k_neighbors, m0 - 1);

    // pairwise squared distances between columns
    Matrix d2(m0, m0);
    for (int i = 0; i < m0; ++i) {
        d2(i, i) = 0;
        for (int j = i + 1; j < m0; ++j)
            d2(i, j) = d2(j, i) = (X.col(i) - X.col(j)).squaredNorm();
    }

    AugmentedWindow out;
    out.m0 = m0;
    out.mode = Enhancement::Smote;
    out.columns.resize(p, 2 * m0);
    out.columns.leftCols(m0) = X;

    std::uniform_int_distribution<int> pick(0, k - 1);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (int j = 0; j < m0; ++j) {
        std::vector<int> order(m0);
        std::iota(order.begin(), order.end(), 0);
        order.erase(order.begin() + j);
        // k nearest, ties broken by column index for determinism
        std::partial_sort(order.begin(), order.begin() + k, order.end(), [&](int a, int b) {
            return d2(j, a) != d2(j, b) ? d2(j, a) < d2(j, b) : a < b;
        });
        const int star = order[pick(rng)];
        const double u = unif(rng);
        out.columns.col(m0 + j) = X.col(j) + u * (X.col(star) - X.col(j));
    }
    return out;
}

AugmentedWindow smote_augment(const Matrix& X, std::mt19937_64& rng) {
    return smote_augment(X, 5, rng);
}

Vector choose_z(const Matrix& sigma) {
    const int m = static_cast<int>(sigma.rows());
    if (sigma.cols() != m) throw DimensionError("Sigma must be square");
    for (int j = 0; j < m; ++j)
        if (std::abs(sigma(j, j) - 1.0) > 1e-8)
            throw Error("Sigma must have unit diagonal");
    Eigen::SelfAdjointEigenSolver<Matrix> es(sigma, Eigen::EigenvaluesOnly);
    const double lmin = es.eigenvalues()(0);
    const double tol = 1e-10 * sigma.trace() / m;
    if (lmin <= tol)
        throw NumericError("Gram matrix singular beyond ridge tolerance (lambda_min = " +
                           std::to_string(lmin) + ")");
    return Vector::Constant(m, std::min(1.0, 2.0 * lmin));
}

AugmentedWindow knockoff_augment(const Matrix& X, std::mt19937_64& rng,
                                 KnockoffParams* params, const Vector* z_override) {
    const int p = static_cast<int>(X.rows()), m0 = static_cast<int>(X.cols());
    if (m0 < 1) throw InsufficientDataError("knockoff needs at least one column");
    if (p < 2 * m0)
        throw DimensionError("knockoff construction needs p >= 2*m0 (p=" + std::to_string(p) +
                             ", m0=" + std::to_string(m0) + ")");

    Vector nu(m0);
    for (int j = 0; j < m0; ++j) {
        nu(j) = X.col(j).norm();
        if (!(nu(j) > 0))
            throw NumericError("zero-norm window column " + std::to_string(j + 1));
    }
    Matrix Xn = X * nu.cwiseInverse().asDiagonal();
    Matrix Sn = Xn.transpose() * Xn;
    Sn = 0.5 * (Sn + Sn.transpose()).eval();

    const double delta = 1e-10 * Sn.trace() / m0;
    Eigen::SelfAdjointEigenSolver<Matrix> esn(Sn, Eigen::EigenvaluesOnly);
    const double lmin_n = esn.eigenvalues()(0);
    if (lmin_n <= delta)
        throw NumericError("window Gram singular beyond ridge tolerance (lambda_min = " +
                           std::to_string(lmin_n) + ")");
    Matrix Sn_r = Sn;
    if (lmin_n < 1e-6 * Sn.trace() / m0) Sn_r.diagonal().array() += delta;

    Vector zn;
    if (z_override) {
        if (z_override->size() != m0) throw DimensionError("z override has wrong length");
        if ((z_override->array() < 0).any()) throw Error("z must be nonnegative");
        zn = *z_override;
    } else {
        // cap from the raw Gram; rescaling moves it to the normalized scale per column
        Eigen::SelfAdjointEigenSolver<Matrix> esr(Matrix(X.transpose() * X),
                                                  Eigen::EigenvaluesOnly);
        const double z_raw = std::min(1.0, 2.0 * esr.eigenvalues()(0));
        zn = (z_raw * nu.array().square().inverse()).matrix();
    }

    Matrix D = zn.asDiagonal();
    Matrix SinvD = Sn_r.ldlt().solve(D);
    Matrix G = 2.0 * D - D * SinvD;
    G = 0.5 * (G + G.transpose()).eval();

    Eigen::SelfAdjointEigenSolver<Matrix> esg(G);
    Vector ew = esg.eigenvalues().cwiseMax(0.0);
    Matrix Cs = esg.eigenvectors() * ew.cwiseSqrt().asDiagonal() * esg.eigenvectors().transpose();
    Eigen::HouseholderQR<Matrix> qr_c(Cs);
    Matrix C = qr_c.matrixQR().triangularView<Eigen::Upper>();
    for (int i = 0; i < m0; ++i)
        if (C(i, i) < 0) C.row(i) = -C.row(i);

    // random block orthonormalized against the window columns
    Matrix MB(p, 2 * m0);
    MB.leftCols(m0) = Xn;
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (int j = m0; j < 2 * m0; ++j)
        for (int i = 0; i < p; ++i) MB(i, j) = gauss(rng);
    Eigen::HouseholderQR<Matrix> qr_u(MB);
    Matrix Q = qr_u.householderQ() * Matrix::Identity(p, 2 * m0);
    Matrix U = Q.middleCols(m0, m0);

    Matrix Xkn = Xn * (Matrix::Identity(m0, m0) - SinvD) + U * C;

    AugmentedWindow out;
    out.m0 = m0;
    out.mode = Enhancement::Knockoff;
    out.columns.resize(p, 2 * m0);
    out.columns.leftCols(m0) = X;
    out.columns.rightCols(m0) = Xkn * nu.asDiagonal();
    if (params) {
        params->z = zn;
        params->U = U;
        params->C = C;
    }
    return out;
}

DetectionState enhanced_step(const ReferenceModel& ref, const Matrix& buffer,
                             const DetectorConfig& cfg, std::mt19937_64& rng, long t_label) {
    if (buffer.rows() != ref.dim())
        throw DimensionError("buffer dimension does not match the reference");
    if (cfg.enhancement == Enhancement::None)
        return detail::evaluate_window(cfg.kind, Variant::WindowLimited, ref, buffer, cfg,
                                       t_label, 2);

    const int m0 = static_cast<int>(buffer.cols());
    if (m0 < 2) throw InsufficientDataError("augmented evaluation needs at least 2 columns");

    AugmentedWindow aug = (cfg.enhancement == Enhancement::Smote)
                              ? smote_augment(buffer, 5, rng)
                              : knockoff_augment(buffer, rng);

    // candidate m = 1..m0-1 keeps the last 2*m0 - m + 1 augmented columns and carries
    // weight argument k = m0 - m, i.e. t' = t - k
    auto ev = detail::eval_suffixes(aug.columns, ref.r0_lower, cfg.estimator);
    const int min_len = m0 + 2, max_len = 2 * m0, offset = m0 + 1;

    DetectionState st;
    st.t = t_label;
    if (cfg.kind == StatKind::Combined) {
        auto rs = detail::apply_policy(ev, StatKind::Sum, Variant::WindowLimited, cfg.H,
                                       min_len, max_len, offset, t_label);
        auto rm = detail::apply_policy(ev, StatKind::Max, Variant::WindowLimited, cfg.H,
                                       min_len, max_len, offset, t_label);
        if (!rs.any || !rm.any)
            throw DegenerateWindowError("all augmented candidate windows degenerate");
        if (cfg.threshold_sum <= 0 || cfg.threshold_max <= 0)
            throw Error("combined statistic needs positive thresholds b1, b2");
        st.sum_part = rs.value;
        st.max_part = rm.value;
        double a = rs.value / cfg.threshold_sum, b = rm.value / cfg.threshold_max;
        st.statistic = std::max(a, b);
        st.argmax_candidate = (a >= b) ? rs.argmax : rm.argmax;
    } else {
        auto r = detail::apply_policy(ev, cfg.kind, Variant::WindowLimited, cfg.H, min_len,
                                      max_len, offset, t_label);
        if (!r.any) throw DegenerateWindowError("all augmented candidate windows degenerate");
        st.statistic = r.value;
        st.argmax_candidate = r.argmax;
    }
    return st;
}

}  // namespace corrwatch
