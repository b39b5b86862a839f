#pragma once

#include "corrwatch/types.hpp"

namespace corrwatch {

// Reference correlation model built once from H+1 historical observations.
struct ReferenceModel {
    CorrelationEstimate R0;
    int H = 0;            // built from H+1 samples
    Vector mean, scale;   // per-coordinate standardizer of the reference window
    EstimatorMode mode = EstimatorMode::Centered;
    Vector r0_lower;      // vecho of R0, cached for the detector hot path

    int dim() const { return R0.dim(); }
};

// Windows are p x n matrices, columns are observations.

Matrix sample_covariance(const Matrix& window);

CorrelationEstimate sample_correlation(const Matrix& window,
                                       EstimatorMode mode = EstimatorMode::Centered,
                                       long start = 0, long end = 0);

ReferenceModel build_reference(const Matrix& reference,
                               EstimatorMode mode = EstimatorMode::Centered);

DiffVector diff_vector(const CorrelationEstimate& R0, const CorrelationEstimate& R);

// Expected per-entry value of the diff vector under an entrywise moment model.
// t is the number of samples in the evaluation window.
double expected_v_known_mean(const MomentSpec& m, int H, int t);
double expected_v_unknown_mean(const MomentSpec& m, int H, int t);

}  // namespace corrwatch
