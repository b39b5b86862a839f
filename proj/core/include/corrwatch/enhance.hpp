#pragma once

#include <random>

#include "corrwatch/detectors.hpp"

namespace corrwatch {

// A window with synthetic companions appended: [originals | synthetics], originals untouched.
struct AugmentedWindow {
    Matrix columns;  // p x 2*m0
    int m0 = 0;
    Enhancement mode = Enhancement::None;
};

struct KnockoffParams {
    Vector z;  // per-column shrink, normalized scale
    Matrix U;  // p x m0, orthonormal columns orthogonal to the window columns
    Matrix C;  // m0 x m0 upper-triangular with C'C = 2 diag(z) - diag(z) Sigma^-1 diag(z)
};

// x + u * (xstar - x)
Vector smote_interpolate(const Vector& x, const Vector& xstar, double u);

// Each synthetic column interpolates its original toward one of the min(k_neighbors, m0-1)
// nearest neighbor columns (Euclidean on raw values), u ~ Uniform[0,1].
AugmentedWindow smote_augment(const Matrix& X, int k_neighbors, std::mt19937_64& rng);
AugmentedWindow smote_augment(const Matrix& X, std::mt19937_64& rng);

// Knockoff companions: columns are scaled to unit norm, the classical construction
// X~ = Xn (I - Sigma^-1 D) + U C runs in that scale with z capped by the smallest
// eigenvalue of the raw Gram X'X, and the scales are restored on output.
// z_override (normalized scale) replaces the equi-correlated choice when given.
AugmentedWindow knockoff_augment(const Matrix& X, std::mt19937_64& rng,
                                 KnockoffParams* params = nullptr,
                                 const Vector* z_override = nullptr);

// Equi-correlated shrink for a unit-diagonal Gram: z_j = min(1, 2 lambda_min(Sigma)).
Vector choose_z(const Matrix& sigma);

}  // namespace corrwatch
