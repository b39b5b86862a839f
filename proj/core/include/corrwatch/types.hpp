#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace corrwatch {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// ---- error taxonomy ------------------------------------------------------

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DimensionError : Error {
    using Error::Error;
};

// A window (or a coordinate inside it) carries no usable variation.
struct DegenerateWindowError : Error {
    int coordinate = -1;
    explicit DegenerateWindowError(const std::string& msg, int coord = -1)
        : Error(msg), coordinate(coord) {}
};

struct InsufficientDataError : Error {
    using Error::Error;
};

struct NumericError : Error {
    using Error::Error;
};

struct ParseError : Error {
    std::size_t row = 0, col = 0;  // 1-based coordinates of the offending cell
    ParseError(const std::string& msg, std::size_t r, std::size_t c)
        : Error(msg), row(r), col(c) {}
};

// ---- enums ----------------------------------------------------------------

enum class StatKind { Sum, Max, Combined };
enum class Variant { Full, WindowLimited, Shewhart };
enum class Enhancement { None, Smote, Knockoff };

// Window/reference correlations: Centered subtracts the window mean and
// divides by (n-1); KnownMean assumes zero mean and divides by n.
enum class EstimatorMode { Centered, KnownMean };

std::string to_string(StatKind k);
std::string to_string(Variant v);
std::string to_string(Enhancement e);
std::string to_string(EstimatorMode m);
StatKind stat_kind_from_string(const std::string& s);
Variant variant_from_string(const std::string& s);
Enhancement enhancement_from_string(const std::string& s);
EstimatorMode estimator_mode_from_string(const std::string& s);

// ---- plain value types -----------------------------------------------------

struct Observation {
    Vector values;
    long t = 0;
};

struct CorrelationEstimate {
    Matrix entries;     // symmetric, unit diagonal, off-diagonals clamped to [-1,1]
    int n_samples = 0;  // samples the estimate was computed from
    long start = 0, end = 0;

    int dim() const { return static_cast<int>(entries.rows()); }
};

struct DiffVector {
    Vector values;       // length p(p-1)/2, entries (rho0 - rho)^2 in [0,4]
    long candidate_start = 0, end = 0;
};

struct DetectorConfig {
    StatKind kind = StatKind::Sum;
    Variant variant = Variant::WindowLimited;
    int w = 20;
    int H = 100;
    int lag = 1;                 // evaluate every step (1) or at t = w + lag*k
    Enhancement enhancement = Enhancement::None;
    double threshold_sum = 0;    // b1 (also the single threshold for Sum/Max kinds)
    double threshold_max = 0;    // b2 (Combined only)
    double noise_margin = 0;     // minimum crossing excess treated as a real alarm
    EstimatorMode estimator = EstimatorMode::Centered;

    double threshold_for(StatKind k) const {
        return k == StatKind::Max ? threshold_max : threshold_sum;
    }
    void validate(int p) const;  // throws on inconsistent settings
};

struct SignalStrength {
    double delta1 = 0;  // sum over i<j of (rho0(i,j) - rho1(i,j))^2
    double delta2 = 0;  // max over i<j of the same
};

// Entry-level moments of products x_i x_j under the pre-/post-change laws.
struct MomentSpec {
    double rho0 = 0, rho1 = 0;
    double beta20 = 1, beta21 = 1;  // E[(x_i x_j)^2] pre / post

    // Gaussian identity: E[(x_i x_j)^2] = 1 + 2 rho^2 for unit-variance pairs.
    static MomentSpec gaussian(double rho0, double rho1) {
        return {rho0, rho1, 1 + 2 * rho0 * rho0, 1 + 2 * rho1 * rho1};
    }
};

struct ArlApproxInput {
    double b = 0, mu = 0, sigma_d = 0;
    int w = 0;
    double kappa = 0, xi1 = 0, xi2 = 0;

    static ArlApproxInput make(double b, double mu, double sigma_d, int w);
};

// ---- vecho: canonical half-vectorization ----------------------------------
// Column-major strict-lower-triangle order: (1,0),(2,0),...,(p-1,0),(2,1),...

inline long vecho_size(int p) { return static_cast<long>(p) * (p - 1) / 2; }

// Writes the strict lower triangle of a symmetric matrix into `out`.
void vecho_lower(const Matrix& m, Vector& out);

// Index pair (i,j), i>j, for vecho position k.
std::pair<int, int> vecho_indices(int p, long k);

// ---- shared small helpers ---------------------------------------------------

// Weight (t-t')H / (H + t-t') applied to window-limited statistics.
double weight(int k, int H);

SignalStrength signal_strength(const Matrix& R0, const Matrix& R1);

// splitmix64 step; used to derive independent per-trial/replication seeds.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream_id);

}  // namespace corrwatch
