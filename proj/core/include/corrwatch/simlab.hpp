#pragma once

#include <functional>
#include <memory>
#include <random>
#include <utility>
#include <vector>

#include "corrwatch/calibrate.hpp"

namespace corrwatch {

enum class Metric { Arl, Edd };

// Population correlation pair for the benchmark cases:
//  1: R0 = I, all off-diagonals become r
//  2: R0 = I, leading floor(p/2) block becomes r
//  3: leading floor(p^0.3) block moves from -0.3 to 0.9
//  4: leading floor(p/2) block at 0.3 reverts while the trailing block gains 0.5
struct ScenarioSpec {
    int case_id = 0;  // 0 = custom matrices
    int p = 0;
    double r = 0;
    bool student_t = false;  // t5 innovations scaled so Cov = R
    Matrix R0, R1;

    static ScenarioSpec make(int case_id, int p, double r, bool student_t = false);
    static ScenarioSpec custom(Matrix R0, Matrix R1, bool student_t = false);
};

std::pair<Matrix, Matrix> case_matrices(int case_id, int p, double r);

// proportion of strict-lower-triangle entries that change
double dense_level(int case_id, int p);

// Observations as columns; times t < nu draw from R0, t >= nu from R1 (1-based).
class StreamGen {
public:
    StreamGen(const ScenarioSpec& spec, long nu, std::uint64_t seed);
    Vector next();
    long t() const { return t_; }

private:
    Matrix L0_, L1_;
    long nu_;
    long t_ = 0;
    bool student_t_;
    int p_;
    std::mt19937_64 rng_;
    std::normal_distribution<double> gauss_{0.0, 1.0};
    std::chi_squared_distribution<double> chi2_{5.0};
};

Matrix gen_stream(const ScenarioSpec& spec, long nu, long length, std::uint64_t seed);

// Exact Gaussian CUSUM between two zero-mean laws with covariances R0 and R1.
class CusumOracle {
public:
    CusumOracle(const Matrix& R0, const Matrix& R1, double b);

    double loglik_ratio(const Vector& x) const;
    std::pair<double, bool> step(const Vector& x);  // (updated W, alarmed)
    double W() const { return W_; }
    double threshold() const { return b_; }
    void reset() { W_ = 0; }

    double kl_f0_f1() const { return kl01_; }  // D(f0 || f1)
    double kl_f1_f0() const { return kl10_; }  // D(f1 || f0)

private:
    Matrix A_;  // R0^-1 - R1^-1
    double log_det_ratio_;  // log det(R0 R1^-1)
    double b_;
    double W_ = 0;
    double kl01_, kl10_;
};

struct ExperimentResult {
    Metric metric = Metric::Arl;
    double mean = 0;
    double std_error = 0;
    int replications = 0;
    std::vector<long> stopping_times;
    std::vector<std::uint64_t> seeds;  // per-replication master seeds
    std::vector<char> censored;
    int n_censored = 0;
};

class StreamMonitor {
public:
    virtual ~StreamMonitor() = default;
    virtual bool step(const Vector& x) = 0;  // true = alarm
};

using MonitorFactory = std::function<std::unique_ptr<StreamMonitor>(std::uint64_t seed)>;

// Mean stopping time on pure pre-change streams; runs with no alarm by max_steps are
// counted there and flagged as censored (all-censored is an error).
ExperimentResult run_arl(const MonitorFactory& factory, const ScenarioSpec& pre,
                         int replications, long max_steps, std::uint64_t seed);

// Mean stopping time with the change active from the first sample (nu = 1).
ExperimentResult run_edd(const MonitorFactory& factory, const ScenarioSpec& spec,
                         int replications, long max_steps, std::uint64_t seed);

// Monitor builders: a detector with a freshly drawn reference per replication, and the
// CUSUM oracle on the scenario's matrix pair.
MonitorFactory detector_factory(const ScenarioSpec& pre, const DetectorConfig& cfg);
MonitorFactory cusum_factory(const ScenarioSpec& spec, double b);

// Reference built from H+1 freshly generated pre-change samples.
ReferenceModel reference_from_scenario(const ScenarioSpec& pre, int H, EstimatorMode mode,
                                       std::uint64_t seed);

// Calibration trials with a fresh reference and a fresh pre-change stream per trial
// (one sign-flip each), matching how run_arl redraws the reference per replication.
std::vector<SignFlipTrial> fresh_trial_sequences(const ScenarioSpec& pre,
                                                 const DetectorConfig& cfg, int q, long M,
                                                 std::uint64_t seed);
std::vector<std::vector<SignFlipTrial>> fresh_trial_sequences_multi(
    const ScenarioSpec& pre, const std::vector<DetectorConfig>& cfgs, int q, long M,
    std::uint64_t seed);

// CUSUM run-length material for matched-gamma calibration: per trial, the reflected
// statistic max(W_t, 0) on a fresh pre-change stream, stored in the same container the
// sign-flip calibration uses.
std::vector<SignFlipTrial> cusum_trial_sequences(const ScenarioSpec& pre, int q, long M,
                                                 std::uint64_t seed);

}  // namespace corrwatch
