#pragma once

#include <array>

#include "arht/errors.hpp"
#include "arht/types.hpp"

// High-dimensional two-sample mean-test statistics.
//
// Given two groups of p-dimensional vectors, the pipeline is
//
//   group summaries -> pooled covariance S_n -> spectral decomposition
//     -> RHT(lambda) = (n1 n2 / n) d' (S_n + lambda I)^-1 d
//     -> ARHT(lambda) = sqrt(p) (RHT/p - Theta1) / sqrt(2 Theta2),
//
// where the Theta corrections are built from the Stieltjes transform of the
// spectral distribution of S_n and make ARHT asymptotically N(0, 1) under the
// null, even when p is comparable to n. All functions here are pure; the
// SpectralCache makes the resolvent reusable across regularizer candidates.

namespace arht::hdtest {

// Sufficient statistics of one group: sample mean, centered scatter
// sum_j (x_j - mean)(x_j - mean)', and the sample count.
struct DistributionSummary {
    Vector mean;
    Matrix scatter;
    std::int64_t count = 0;

    Index dim() const { return mean.size(); }

    // Builds the summary from raw observations (one row per observation).
    static DistributionSummary from_rows(const Matrix& rows);
};

// S_n = (scatter1 + scatter2) / (n - 2) with n = n1 + n2, plus the
// dimension ratio gamma = p / n that drives the high-dimensional corrections.
struct PooledCovariance {
    Matrix matrix;
    std::int64_t n = 0;
    Index p = 0;
    double gamma = 0.0;
};

// Symmetric eigendecomposition of a pooled covariance, eigenvalues in
// nonincreasing order and clamped below at zero (S_n is PSD in exact
// arithmetic; tiny negative round-off eigenvalues are set to 0).
// Immutable after construction; shared freely across threads.
class SpectralCache {
public:
    explicit SpectralCache(const PooledCovariance& pooled);

    const Vector& eigenvalues() const { return eigenvalues_; }
    const Matrix& eigenvectors() const { return eigenvectors_; }
    const Matrix& source() const { return source_; }
    Index p() const { return eigenvalues_.size(); }
    double trace() const { return trace_; }

private:
    Vector eigenvalues_;   // nonincreasing, >= 0
    Matrix eigenvectors_;  // column i pairs with eigenvalues_[i]
    Matrix source_;
    double trace_ = 0.0;
};

// Stieltjes transform of the spectral law at z = -lambda and its derivative:
//   m_F(-lambda)  = (1/p) tr (S_n + lambda I)^-1
//   m_F'(-lambda) = (1/p) tr (S_n + lambda I)^-2
struct StieltjesPair {
    double m_f = 0.0;
    double m_f_prime = 0.0;
};

// Standardization corrections entering ARHT:
//   Theta1 = u / (1 - gamma u),                      u = 1 - lambda m_F
//   Theta2 = u / (1 - gamma u)^3
//          - lambda (m_F - lambda m_F') / (1 - gamma u)^4
struct ThetaCorrections {
    double theta1 = 0.0;
    double theta2 = 0.0;
};

struct ArhtResult {
    double statistic = 0.0;  // the ARHT value
    double rht = 0.0;        // underlying RHT(lambda)
    double lambda = 0.0;     // regularizer used
    double q_value = 0.0;    // Q at that lambda
    double theta1 = 0.0;
    double theta2 = 0.0;
};

// Outcome of the data-adaptive regularizer selection over the grid
// {lambda0, 5 lambda0, 10 lambda0}. q_values aligns with the grid order;
// entries for degenerate candidates are NaN.
struct LambdaChoice {
    double lambda = 0.0;
    std::array<double, 3> q_values{};
};

// S_n = (scatter1 + scatter2) / (n - 2).
// Throws DimensionMismatch when the group dimensions differ and
// InsufficientSamples when n1 + n2 < 3.
PooledCovariance pooled_covariance(const DistributionSummary& group1,
                                   const DistributionSummary& group2);

// Classical two-sample Hotelling statistic
//   T = [n (n - p) / (p (n - 1))] d' S_n^-1 d,  d = mean1 - mean2,
// distributed F(p, n - p) under the null. Requires n > p (DimensionError)
// and a numerically invertible S_n: smallest eigenvalue > 1e-12 * largest
// (SingularCovariance otherwise).
double hotelling_t2(const DistributionSummary& group1,
                    const DistributionSummary& group2);

// Regularized Hotelling statistic
//   RHT(lambda) = (n1 n2 / n) d' (S_n + lambda I)^-1 d
// evaluated through the spectral cache as sum_i (v_i'd)^2 / (eig_i + lambda).
// `cache` must decompose the pooled covariance of the two groups.
double rht(const DistributionSummary& group1, const DistributionSummary& group2,
           double lambda, const SpectralCache& cache);

StieltjesPair stieltjes(const SpectralCache& cache, double lambda);

// Throws DegenerateCorrection when 1 - gamma(1 - lambda m_F) <= 1e-12 or when
// the resulting theta2 is not strictly positive.
ThetaCorrections theta_corrections(double m_f, double m_f_prime, double lambda,
                                   double gamma);

// Full standardized statistic at a fixed lambda; records every intermediate.
ArhtResult arht(const DistributionSummary& group1,
                const DistributionSummary& group2, double lambda,
                const SpectralCache& cache);

// Q(lambda, gamma; xi) = sum_k xi_k rho_k(-lambda, gamma) / sqrt(gamma Theta2)
// with the fixed weight vector xi = (0, 1, 0), i.e. Theta1 / sqrt(gamma Theta2).
// rho_0 = m_F, rho_1 = Theta1, rho_2 = (1 + gamma Theta1)(tr S_n / p - lambda rho_1).
double q_function(const SpectralCache& cache, double lambda, double gamma);

// Maximizes Q over {lambda0, 5 lambda0, 10 lambda0}; ties break toward the
// smallest candidate. Degenerate candidates are skipped; when none survives,
// throws AllCandidatesDegenerate.
LambdaChoice select_lambda(const DistributionSummary& group1,
                           const DistributionSummary& group2, double lambda0,
                           const SpectralCache& cache);

}  // namespace arht::hdtest
