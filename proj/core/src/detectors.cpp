#include "corrwatch/detectors.hpp"

#include <algorithm>
#include <cmath>

namespace corrwatch {

namespace detail {

SuffixEval eval_suffixes(const Matrix& X, const Vector& r0_lower, EstimatorMode mode) {
    const int p = static_cast<int>(X.rows());
    const int n = static_cast<int>(X.cols());
    SuffixEval ev;
    ev.n = n;
    ev.sum.assign(n + 1, 0.0);
    ev.mx.assign(n + 1, 0.0);
    ev.ok.assign(n + 1, 0);
    if (n < 2) return ev;

    Matrix G = Matrix::Zero(p, p);  // lower triangle maintained
    Vector s = Vector::Zero(p);
    Vector d(p), inv_sd(p);

    // newest column first; suffix of length L spans columns n-L .. n-1
    G.selfadjointView<Eigen::Lower>().rankUpdate(X.col(n - 1));
    s = X.col(n - 1);

    for (int L = 2; L <= n; ++L) {
        const auto& x = X.col(n - L);
        G.selfadjointView<Eigen::Lower>().rankUpdate(x);
        s += x;

        bool degenerate = false;
        if (mode == EstimatorMode::Centered) {
            // Cov_ij = (G_ij - L m_i m_j) / (L-1), m = s/L
            for (int i = 0; i < p; ++i) {
                d[i] = G(i, i) - s[i] * s[i] / L;
                if (!(d[i] > 0)) { degenerate = true; break; }
            }
            if (!degenerate) {
                inv_sd = d.cwiseSqrt().cwiseInverse();
                double acc = 0, top = 0;
                long k = 0;
                const double invL = 1.0 / L;
                for (int j = 0; j < p; ++j) {
                    const double sj = s[j], wj = inv_sd[j];
                    for (int i = j + 1; i < p; ++i) {
                        double rho = (G(i, j) - s[i] * sj * invL) * inv_sd[i] * wj;
                        rho = std::clamp(rho, -1.0, 1.0);
                        double diff = r0_lower[k++] - rho;
                        diff *= diff;
                        acc += diff;
                        if (diff > top) top = diff;
                    }
                }
                ev.sum[L] = acc;
                ev.mx[L] = top;
                ev.ok[L] = 1;
            }
        } else {
            for (int i = 0; i < p; ++i) {
                d[i] = G(i, i);
                if (!(d[i] > 0)) { degenerate = true; break; }
            }
            if (!degenerate) {
                inv_sd = d.cwiseSqrt().cwiseInverse();
                double acc = 0, top = 0;
                long k = 0;
                for (int j = 0; j < p; ++j) {
                    const double wj = inv_sd[j];
                    for (int i = j + 1; i < p; ++i) {
                        double rho = G(i, j) * inv_sd[i] * wj;
                        rho = std::clamp(rho, -1.0, 1.0);
                        double diff = r0_lower[k++] - rho;
                        diff *= diff;
                        acc += diff;
                        if (diff > top) top = diff;
                    }
                }
                ev.sum[L] = acc;
                ev.mx[L] = top;
                ev.ok[L] = 1;
            }
        }
    }
    return ev;
}

PolicyResult apply_policy(const SuffixEval& ev, StatKind kind, Variant variant, int H,
                          int min_len, int max_len, int weight_offset, long t_label) {
    PolicyResult res;
    max_len = std::min(max_len, ev.n);
    const auto& raw = (kind == StatKind::Sum) ? ev.sum : ev.mx;

    if (variant == Variant::Shewhart) {
        // single candidate: the full window, no weight
        int L = max_len;
        if (L >= min_len && ev.ok[L]) {
            res.value = raw[L];
            res.argmax = t_label - (L - weight_offset);
            res.any = true;
        }
        return res;
    }

    // weighted max over candidates, ties toward the earliest t' (longest suffix)
    for (int L = max_len; L >= min_len; --L) {
        if (!ev.ok[L]) continue;
        int k = L - weight_offset;  // t - t'
        if (k < 1) continue;
        double val = weight(k, H) * raw[L];
        if (!res.any || val > res.value) {
            res.value = val;
            res.argmax = t_label - k;
            res.any = true;
        }
    }
    return res;
}

}  // namespace detail

void SubsetSpec::validate(int p) const {
    if (subsets.empty()) throw Error("subset list is empty");
    for (const auto& v : subsets) {
        if (v.size() < 2) throw Error("every subset needs at least 2 coordinates");
        for (int idx : v)
            if (idx < 0 || idx >= p)
                throw DimensionError("subset index " + std::to_string(idx + 1) +
                                     " out of range for p=" + std::to_string(p));
    }
}

namespace detail {

DetectionState evaluate_window(StatKind kind, Variant variant, const ReferenceModel& ref,
                               const Matrix& history, const DetectorConfig& cfg, long t_label,
                               int min_t) {
    const long t = history.cols();
    if (history.rows() != ref.dim())
        throw DimensionError("history dimension does not match the reference");
    if (variant == Variant::Shewhart) {
        if (t < cfg.w + 1)
            throw InsufficientDataError("Shewhart statistic needs t >= w+1");
    } else if (t < min_t) {
        throw InsufficientDataError("statistic needs t >= " + std::to_string(min_t));
    }

    // candidate t' ranges: Full 1..t-1, WindowLimited max(1,t-w)..t-1, Shewhart t-w
    long n_cols = (variant == Variant::Full) ? t : std::min<long>(t, cfg.w + 1);
    Matrix win = history.rightCols(n_cols);
    auto ev = detail::eval_suffixes(win, ref.r0_lower, ref.mode);

    DetectionState st;
    st.t = t_label;
    if (kind == StatKind::Combined) {
        auto rs = detail::apply_policy(ev, StatKind::Sum, variant, cfg.H, 2,
                                       static_cast<int>(n_cols), 1, t_label);
        auto rm = detail::apply_policy(ev, StatKind::Max, variant, cfg.H, 2,
                                       static_cast<int>(n_cols), 1, t_label);
        if (!rs.any || !rm.any)
            throw DegenerateWindowError("all candidate windows degenerate");
        if (cfg.threshold_sum <= 0 || cfg.threshold_max <= 0)
            throw Error("combined statistic needs positive thresholds b1, b2");
        st.sum_part = rs.value;
        st.max_part = rm.value;
        double a = rs.value / cfg.threshold_sum, b = rm.value / cfg.threshold_max;
        st.statistic = std::max(a, b);
        st.argmax_candidate = (a >= b) ? rs.argmax : rm.argmax;
    } else {
        auto r = detail::apply_policy(ev, kind, variant, cfg.H, 2,
                                      static_cast<int>(n_cols), 1, t_label);
        if (!r.any) throw DegenerateWindowError("all candidate windows degenerate");
        st.statistic = r.value;
        st.argmax_candidate = r.argmax;
    }
    return st;
}

}  // namespace detail

DetectionState evaluate_statistic(StatKind kind, Variant variant, const ReferenceModel& ref,
                                  const Matrix& history, const DetectorConfig& cfg) {
    return detail::evaluate_window(kind, variant, ref, history, cfg, history.cols(), 3);
}

DetectionState combined_statistic(const DetectionState& sum_state,
                                  const DetectionState& max_state, double b1, double b2) {
    if (b1 <= 0 || b2 <= 0) throw Error("combined statistic needs b1, b2 > 0");
    if (sum_state.t != max_state.t)
        throw Error("combined statistic: component states at different times");
    DetectionState st;
    st.t = sum_state.t;
    st.sum_part = sum_state.statistic;
    st.max_part = max_state.statistic;
    double a = sum_state.statistic / b1, b = max_state.statistic / b2;
    st.statistic = std::max(a, b);
    st.argmax_candidate = (a >= b) ? sum_state.argmax_candidate : max_state.argmax_candidate;
    st.alarmed = st.statistic >= 1.0;
    return st;
}

SubsetScanResult subset_scan(const ReferenceModel& ref, const Matrix& window,
                             const SubsetSpec& subsets, EstimatorMode mode) {
    const int p = static_cast<int>(window.rows());
    if (p != ref.dim()) throw DimensionError("subset_scan: window dimension mismatch");
    subsets.validate(p);

    SubsetScanResult out;
    out.per_subset.reserve(subsets.subsets.size());
    for (std::size_t si = 0; si < subsets.subsets.size(); ++si) {
        const auto& v = subsets.subsets[si];
        const int q = static_cast<int>(v.size());
        Matrix sub(q, window.cols());
        for (int i = 0; i < q; ++i) sub.row(i) = window.row(v[i]);
        CorrelationEstimate R;
        try {
            R = sample_correlation(sub, mode);
        } catch (const DegenerateWindowError& e) {
            // rename to the global coordinate for a useful message
            throw DegenerateWindowError("degenerate coordinate " +
                                            std::to_string(v[e.coordinate] + 1) +
                                            " inside subset " + std::to_string(si + 1),
                                        v[e.coordinate]);
        }
        double acc = 0;
        for (int j = 0; j < q; ++j)
            for (int i = j + 1; i < q; ++i) {
                double d = ref.R0.entries(v[i], v[j]) - R.entries(i, j);
                acc += d * d;
            }
        out.per_subset.push_back(acc);
        if (si == 0 || acc > out.value) {
            out.value = acc;
            out.winning_index = static_cast<int>(si);
        }
    }
    return out;
}

Detector::Detector(ReferenceModel ref, DetectorConfig cfg, std::uint64_t seed)
    : ref_(std::move(ref)), cfg_(cfg), rng_(seed) {
    cfg_.validate(ref_.dim());
    sliding_ = cfg_.variant != Variant::Full;
    int cap = sliding_ ? cfg_.w + 1 : 64;
    buf_.resize(ref_.dim(), cap);
}

bool Detector::is_evaluation_step() const {
    if (cfg_.lag == 1) {
        if (cfg_.variant == Variant::Shewhart) return t_ >= cfg_.w + 1;
        return t_ >= 3;
    }
    // evaluations at t = w + lag*k, k = 1, 2, ...
    return t_ >= cfg_.w + cfg_.lag && (t_ - cfg_.w) % cfg_.lag == 0;
}

DetectionState Detector::step(const Vector& x) {
    if (x.size() != ref_.dim())
        throw DimensionError("observation dimension does not match the reference");
    ++t_;
    if (sliding_ && n_ == cfg_.w + 1) {
        // slide: drop the oldest column
        buf_.leftCols(n_ - 1) = buf_.rightCols(n_ - 1).eval();
        --n_;
    } else if (n_ == buf_.cols()) {
        Matrix bigger(buf_.rows(), buf_.cols() * 2);
        bigger.leftCols(n_) = buf_.leftCols(n_);
        buf_.swap(bigger);
    }
    buf_.col(n_++) = x;

    DetectionState st;
    st.t = t_;
    if (is_evaluation_step()) {
        Matrix hist = buf_.leftCols(n_);
        if (cfg_.enhancement == Enhancement::None || cfg_.variant != Variant::WindowLimited) {
            st = detail::evaluate_window(cfg_.kind, cfg_.variant, ref_, hist, cfg_, t_, 3);
        } else {
            st = enhanced_step(ref_, hist, cfg_, rng_, t_);
        }
        if (cfg_.kind == StatKind::Combined) {
            st.alarmed = st.statistic >= 1.0 + cfg_.noise_margin;
        } else {
            st.alarmed = st.statistic >= cfg_.threshold_for(cfg_.kind) + cfg_.noise_margin;
        }
    }
    state_ = st;
    return st;
}

}  // namespace corrwatch
