#pragma once

#include <random>
#include <vector>

#include "corrwatch/corrstat.hpp"

namespace corrwatch {

struct DetectionState {
    long t = 0;
    double statistic = 0;
    long argmax_candidate = 0;  // t' achieving the max (Shewhart: t-w)
    bool alarmed = false;
    double sum_part = 0, max_part = 0;  // components when kind == Combined
};

struct SubsetSpec {
    std::vector<std::vector<int>> subsets;  // 0-based coordinate indices
    void validate(int p) const;
};

struct SubsetScanResult {
    double value = 0;
    int winning_index = 0;  // 0-based; ties -> lowest
    std::vector<double> per_subset;
};

namespace detail {

// Raw (unweighted) sum / max of the diff vector for every suffix window of X.
// X is p x n, columns oldest..newest; entry L (2 <= L <= n) covers the last L columns.
// ok[L] = false marks a degenerate (zero-variance) suffix, which callers skip.
struct SuffixEval {
    int n = 0;
    std::vector<double> sum, mx;  // indexed by suffix length, [0..n]
    std::vector<char> ok;
};

SuffixEval eval_suffixes(const Matrix& X, const Vector& r0_lower, EstimatorMode mode);

// Policy layer: combine suffix stats into the configured statistic at time t_label.
// kind must be Sum or Max. min_len..max_len bound the suffix lengths considered;
// weight_offset converts a suffix length L into the weight argument k = L - weight_offset
// (1 for plain windows, m0+1 for augmented ones).
struct PolicyResult {
    double value = -1;
    long argmax = 0;
    bool any = false;
};

PolicyResult apply_policy(const SuffixEval& ev, StatKind kind, Variant variant, int H,
                          int min_len, int max_len, int weight_offset, long t_label);

// Full policy evaluation on an explicit window, shared by the plain, augmented and
// calibration paths. min_t is the earliest time label at which evaluation is legal.
DetectionState evaluate_window(StatKind kind, Variant variant, const ReferenceModel& ref,
                               const Matrix& history, const DetectorConfig& cfg,
                               long t_label, int min_t);

}  // namespace detail

// Stateless evaluation on an explicit history matrix (columns x_1..x_t).
DetectionState evaluate_statistic(StatKind kind, Variant variant, const ReferenceModel& ref,
                                  const Matrix& history, const DetectorConfig& cfg);

DetectionState combined_statistic(const DetectionState& sum_state,
                                  const DetectionState& max_state, double b1, double b2);

SubsetScanResult subset_scan(const ReferenceModel& ref, const Matrix& window,
                             const SubsetSpec& subsets,
                             EstimatorMode mode = EstimatorMode::Centered);

// Augmented evaluation (declared here, defined in the enhancement unit): builds the
// configured augmentation of `buffer` and maximizes the statistic over its candidates.
DetectionState enhanced_step(const ReferenceModel& ref, const Matrix& buffer,
                             const DetectorConfig& cfg, std::mt19937_64& rng,
                             long t_label);

// Streaming detector: owns the sliding buffer, applies the lag rule, raises alarms.
class Detector {
public:
    Detector(ReferenceModel ref, DetectorConfig cfg, std::uint64_t seed = 0);

    DetectionState step(const Vector& x);

    long t() const { return t_; }
    const DetectionState& state() const { return state_; }
    const ReferenceModel& reference() const { return ref_; }
    const DetectorConfig& config() const { return cfg_; }

private:
    bool is_evaluation_step() const;

    ReferenceModel ref_;
    DetectorConfig cfg_;
    Matrix buf_;  // p x capacity; n_ leading columns valid
    int n_ = 0;
    bool sliding_ = false;  // buffer capped at w+1 (Full keeps everything)
    long t_ = 0;
    DetectionState state_;
    std::mt19937_64 rng_;
};

}  // namespace corrwatch
