#include "corrwatch/types.hpp"

#include <cmath>

namespace corrwatch {

std::string to_string(StatKind k) {
    switch (k) {
        case StatKind::Sum: return "sum";
        case StatKind::Max: return "max";
        case StatKind::Combined: return "combined";
    }
    return "?";
}

std::string to_string(Variant v) {
    switch (v) {
        case Variant::Full: return "full";
        case Variant::WindowLimited: return "wl";
        case Variant::Shewhart: return "st";
    }
    return "?";
}

std::string to_string(Enhancement e) {
    switch (e) {
        case Enhancement::None: return "none";
        case Enhancement::Smote: return "smote";
        case Enhancement::Knockoff: return "knockoff";
    }
    return "?";
}

std::string to_string(EstimatorMode m) {
    return m == EstimatorMode::Centered ? "centered" : "known-mean";
}

StatKind stat_kind_from_string(const std::string& s) {
    if (s == "sum") return StatKind::Sum;
    if (s == "max") return StatKind::Max;
    if (s == "combined") return StatKind::Combined;
    throw Error("unknown statistic kind '" + s + "' (expected sum|max|combined)");
}

Variant variant_from_string(const std::string& s) {
    if (s == "full") return Variant::Full;
    if (s == "wl") return Variant::WindowLimited;
    if (s == "st" || s == "shewhart") return Variant::Shewhart;
    throw Error("unknown variant '" + s + "' (expected full|wl|st)");
}

Enhancement enhancement_from_string(const std::string& s) {
    if (s == "none") return Enhancement::None;
    if (s == "smote") return Enhancement::Smote;
    if (s == "knockoff") return Enhancement::Knockoff;
    throw Error("unknown enhancement '" + s + "' (expected none|smote|knockoff)");
}

EstimatorMode estimator_mode_from_string(const std::string& s) {
    if (s == "centered") return EstimatorMode::Centered;
    if (s == "known-mean" || s == "knownmean") return EstimatorMode::KnownMean;
    throw Error("unknown estimator mode '" + s + "' (expected centered|known-mean)");
}

void DetectorConfig::validate(int p) const {
    if (w < 2) throw Error("window size w must be >= 2");
    if (H < 2) throw Error("reference size H must be >= 2");
    if (lag < 1 || lag > w) throw Error("lag must satisfy 1 <= lag <= w");
    if (noise_margin < 0) throw Error("noise_margin must be >= 0");
    if (threshold_sum < 0 || threshold_max < 0)
        throw Error("thresholds must be nonnegative");
    if (enhancement == Enhancement::Knockoff && p <= 2 * w + 2)
        throw DimensionError("knockoff augmentation requires p > 2w+2 (p=" +
                             std::to_string(p) + ", w=" + std::to_string(w) + ")");
}

ArlApproxInput ArlApproxInput::make(double b, double mu, double sigma_d, int w) {
    if (sigma_d <= 0) throw Error("sigma_d must be positive");
    if (w < 2) throw Error("window size w must be >= 2");
    if (b <= mu) throw NumericError("ARL approximation needs threshold b > mu");
    ArlApproxInput in;
    in.b = b;
    in.mu = mu;
    in.sigma_d = sigma_d;
    in.w = w;
    in.kappa = (b - mu) * (b - mu) / (sigma_d * sigma_d);
    in.xi1 = 2 * b / std::sqrt(static_cast<double>(w) * sigma_d * sigma_d);
    in.xi2 = 2 * b / sigma_d;
    return in;
}

void vecho_lower(const Matrix& m, Vector& out) {
    const int p = static_cast<int>(m.rows());
    out.resize(vecho_size(p));
    long k = 0;
    for (int j = 0; j < p; ++j)
        for (int i = j + 1; i < p; ++i) out[k++] = m(i, j);
}

std::pair<int, int> vecho_indices(int p, long k) {
    // invert the column-major strict-lower enumeration
    long off = 0;
    for (int j = 0; j < p - 1; ++j) {
        long len = p - 1 - j;
        if (k < off + len) return {static_cast<int>(j + 1 + (k - off)), j};
        off += len;
    }
    throw DimensionError("vecho index out of range");
}

double weight(int k, int H) {
    if (k < 1 || H < 1) throw Error("weight arguments must be >= 1");
    return static_cast<double>(k) * H / (H + static_cast<double>(k));
}

SignalStrength signal_strength(const Matrix& R0, const Matrix& R1) {
    if (R0.rows() != R1.rows() || R0.cols() != R1.cols() || R0.rows() != R0.cols())
        throw DimensionError("signal_strength: correlation matrices must be square and same size");
    SignalStrength s;
    const int p = static_cast<int>(R0.rows());
    for (int j = 0; j < p; ++j)
        for (int i = j + 1; i < p; ++i) {
            double d = R0(i, j) - R1(i, j);
            s.delta1 += d * d;
            s.delta2 = std::max(s.delta2, d * d);
        }
    return s;
}

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream_id) {
    // splitmix64 on master xor golden-ratio-multiplied stream id
    std::uint64_t z = master ^ (stream_id * 0x9e3779b97f4a7c15ULL);
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

}  // namespace corrwatch
