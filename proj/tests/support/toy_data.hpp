#pragma once
#include <cmath>
#include <numbers>
#include <random>
#include <Eigen/Dense>
#include <dpam/model.hpp>

namespace dpam::testing {

struct Toy
{
    Eigen::MatrixXd X;
    Eigen::VectorXd y;
};

// y = sin(2 pi x1) + 2 x2 x3 + noise, with p uniform covariates.
inline Toy toy_regression(std::size_t n, std::size_t p, unsigned seed, double noise = 0.2)
{
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::normal_distribution<double> z(0.0, noise);
    Toy t;
    t.X.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(p));
    t.y.resize(static_cast<Eigen::Index>(n));
    for (Eigen::Index i = 0; i < t.X.rows(); ++i) {
        for (Eigen::Index j = 0; j < t.X.cols(); ++j) t.X(i, j) = u(rng);
        const double x3 = p > 2 ? t.X(i, 2) : 0.5;
        t.y[i] = std::sin(2.0 * std::numbers::pi * t.X(i, 0)) + 2.0 * t.X(i, 1) * x3 + z(rng);
    }
    return t;
}

inline Toy toy_binary(std::size_t n, std::size_t p, unsigned seed)
{
    Toy t = toy_regression(n, p, seed, 0.0);
    std::mt19937_64 rng(seed + 1000);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (Eigen::Index i = 0; i < t.y.size(); ++i) {
        t.y[i] = u(rng) < 1.0 / (1.0 + std::exp(-2.0 * (t.y[i] - 0.5))) ? 1.0 : 0.0;
    }
    return t;
}

inline ModelSpec small_spec(int order = 2, std::size_t max_order = 2)
{
    ModelSpec s;
    s.order = order;
    s.max_order = max_order;
    s.n_knots = {6};
    s.grid_points = 3;
    s.threads = 1;
    return s;
}

/// Replace every block's coefficients with random values.
inline void randomize(FittedModel& m, unsigned seed)
{
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> z(0.0, 1.0);
    for (auto& b : m.blocks) {
        for (Eigen::Index c = 0; c < b.coefficients.size(); ++c) b.coefficients[c] = z(rng);
    }
}

} // namespace dpam::testing
