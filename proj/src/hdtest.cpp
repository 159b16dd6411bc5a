#include "arht/hdtest.hpp"

#include <cmath>
#include <limits>
#include <string>

namespace arht::hdtest {

namespace {

constexpr double kDenominatorFloor = 1e-12;
constexpr double kConditionFloor = 1e-12;

double pooled_count_product(const DistributionSummary& g1,
                            const DistributionSummary& g2) {
    return static_cast<double>(g1.count) * static_cast<double>(g2.count) /
           static_cast<double>(g1.count + g2.count);
}

void require_positive_lambda(double lambda) {
    if (!(lambda > 0.0)) {
        throw NonPositiveLambda("lambda must be strictly positive, got " +
                                std::to_string(lambda));
    }
}

}  // namespace

DistributionSummary DistributionSummary::from_rows(const Matrix& rows) {
    DistributionSummary s;
    s.count = rows.rows();
    s.mean = rows.colwise().mean();
    Matrix centered = rows.rowwise() - s.mean.transpose();
    s.scatter = Matrix::Zero(rows.cols(), rows.cols());
    s.scatter.selfadjointView<Eigen::Lower>().rankUpdate(centered.transpose());
    s.scatter.triangularView<Eigen::Upper>() =
        s.scatter.transpose().triangularView<Eigen::Upper>();
    return s;
}

PooledCovariance pooled_covariance(const DistributionSummary& group1,
                                   const DistributionSummary& group2) {
    if (group1.dim() != group2.dim()) {
        throw DimensionMismatch("group dimensions differ: " +
                                std::to_string(group1.dim()) + " vs " +
                                std::to_string(group2.dim()));
    }
    const std::int64_t n = group1.count + group2.count;
    if (n < 3) {
        throw InsufficientSamples("pooled covariance needs n1 + n2 >= 3, got " +
                                  std::to_string(n));
    }
    PooledCovariance pooled;
    pooled.n = n;
    pooled.p = group1.dim();
    pooled.matrix =
        (group1.scatter + group2.scatter) / static_cast<double>(n - 2);
    pooled.gamma = static_cast<double>(pooled.p) / static_cast<double>(n);
    return pooled;
}

SpectralCache::SpectralCache(const PooledCovariance& pooled)
    : source_(pooled.matrix) {
    Eigen::SelfAdjointEigenSolver<Matrix> solver(pooled.matrix);
    const Index p = pooled.p;
    eigenvalues_.resize(p);
    eigenvectors_.resize(p, p);
    // Eigen returns eigenvalues in increasing order; store nonincreasing.
    for (Index i = 0; i < p; ++i) {
        eigenvalues_[i] = std::max(solver.eigenvalues()[p - 1 - i], 0.0);
        eigenvectors_.col(i) = solver.eigenvectors().col(p - 1 - i);
    }
    trace_ = eigenvalues_.sum();
}

double hotelling_t2(const DistributionSummary& group1,
                    const DistributionSummary& group2) {
    PooledCovariance pooled = pooled_covariance(group1, group2);
    const auto n = static_cast<double>(pooled.n);
    const auto p = static_cast<double>(pooled.p);
    if (pooled.n <= pooled.p) {
        throw DimensionError("Hotelling T^2 requires n > p, got n = " +
                             std::to_string(pooled.n) +
                             ", p = " + std::to_string(pooled.p));
    }
    Eigen::SelfAdjointEigenSolver<Matrix> solver(pooled.matrix);
    const Vector& eigs = solver.eigenvalues();  // increasing, unclamped
    if (!(eigs[0] > kConditionFloor * eigs[pooled.p - 1])) {
        throw SingularCovariance(
            "pooled covariance is numerically singular (min/max eigenvalue " +
            std::to_string(eigs[0]) + " / " + std::to_string(eigs[pooled.p - 1]) +
            ")");
    }
    Vector d = group1.mean - group2.mean;
    Vector proj = solver.eigenvectors().transpose() * d;
    double quad = (proj.array().square() / eigs.array()).sum();
    return n * (n - p) / (p * (n - 1.0)) * quad;
}

double rht(const DistributionSummary& group1, const DistributionSummary& group2,
           double lambda, const SpectralCache& cache) {
    require_positive_lambda(lambda);
    Vector d = group1.mean - group2.mean;
    Vector proj = cache.eigenvectors().transpose() * d;
    double quad =
        (proj.array().square() / (cache.eigenvalues().array() + lambda)).sum();
    return pooled_count_product(group1, group2) * quad;
}

StieltjesPair stieltjes(const SpectralCache& cache, double lambda) {
    require_positive_lambda(lambda);
    const auto p = static_cast<double>(cache.p());
    auto shifted = cache.eigenvalues().array() + lambda;
    StieltjesPair out;
    out.m_f = shifted.inverse().sum() / p;
    out.m_f_prime = shifted.square().inverse().sum() / p;
    return out;
}

ThetaCorrections theta_corrections(double m_f, double m_f_prime, double lambda,
                                   double gamma) {
    const double u = 1.0 - lambda * m_f;
    const double denom = 1.0 - gamma * u;
    if (!(denom > kDenominatorFloor)) {
        throw DegenerateCorrection(
            "1 - gamma (1 - lambda m_F) = " + std::to_string(denom) +
            " is not positive; (lambda, gamma) pair is ill-posed");
    }
    ThetaCorrections out;
    const double d3 = denom * denom * denom;
    out.theta1 = u / denom;
    out.theta2 =
        u / d3 - lambda * (m_f - lambda * m_f_prime) / (d3 * denom);
    if (!(out.theta2 > 0.0)) {
        throw DegenerateCorrection("Theta2 = " + std::to_string(out.theta2) +
                                   " is not strictly positive");
    }
    return out;
}

double q_function(const SpectralCache& cache, double lambda, double gamma) {
    StieltjesPair st = stieltjes(cache, lambda);
    ThetaCorrections th = theta_corrections(st.m_f, st.m_f_prime, lambda, gamma);
    const auto p = static_cast<double>(cache.p());
    const double rho0 = st.m_f;
    const double rho1 = th.theta1;
    const double rho2 =
        (1.0 + gamma * th.theta1) * (cache.trace() / p - lambda * rho1);
    constexpr double xi0 = 0.0, xi1 = 1.0, xi2 = 0.0;
    return (xi0 * rho0 + xi1 * rho1 + xi2 * rho2) /
           std::sqrt(gamma * th.theta2);
}

ArhtResult arht(const DistributionSummary& group1,
                const DistributionSummary& group2, double lambda,
                const SpectralCache& cache) {
    const double gamma = static_cast<double>(cache.p()) /
                         static_cast<double>(group1.count + group2.count);
    StieltjesPair st = stieltjes(cache, lambda);
    ThetaCorrections th = theta_corrections(st.m_f, st.m_f_prime, lambda, gamma);

    ArhtResult out;
    out.rht = rht(group1, group2, lambda, cache);
    out.lambda = lambda;
    out.theta1 = th.theta1;
    out.theta2 = th.theta2;
    const auto p = static_cast<double>(cache.p());
    out.statistic =
        std::sqrt(p) * (out.rht / p - th.theta1) / std::sqrt(2.0 * th.theta2);
    out.q_value = q_function(cache, lambda, gamma);
    return out;
}

LambdaChoice select_lambda(const DistributionSummary& group1,
                           const DistributionSummary& group2, double lambda0,
                           const SpectralCache& cache) {
    require_positive_lambda(lambda0);
    const double gamma = static_cast<double>(cache.p()) /
                         static_cast<double>(group1.count + group2.count);
    const std::array<double, 3> grid{lambda0, 5.0 * lambda0, 10.0 * lambda0};

    LambdaChoice choice;
    choice.q_values.fill(std::numeric_limits<double>::quiet_NaN());
    int best = -1;
    for (int i = 0; i < 3; ++i) {
        try {
            choice.q_values[i] = q_function(cache, grid[i], gamma);
        } catch (const DegenerateCorrection&) {
            continue;  // candidate excluded from the argmax
        }
        // Strict > keeps ties on the smallest lambda.
        if (best < 0 || choice.q_values[i] > choice.q_values[best]) {
            best = i;
        }
    }
    if (best < 0) {
        throw AllCandidatesDegenerate(
            "no lambda in {lambda0, 5 lambda0, 10 lambda0} yields a valid "
            "correction for lambda0 = " +
            std::to_string(lambda0));
    }
    choice.lambda = grid[best];
    return choice;
}

}  // namespace arht::hdtest
