#pragma once
#include <random>
#include <Eigen/Dense>
#include <dpam/blocks.hpp>
#include "support/reference_solver.hpp"

namespace dpam::testing {

inline DesignBlock design_from(const Eigen::MatrixXd& raw, std::size_t id = 0)
{
    DesignBlock d;
    d.id = id;
    d.means = raw.colwise().mean().transpose();
    d.centered = raw.rowwise() - d.means.transpose();
    d.gram = d.centered.transpose() * d.centered / static_cast<double>(raw.rows());
    return d;
}

inline Eigen::MatrixXd gaussian(Eigen::Index r, Eigen::Index c, std::mt19937_64& rng)
{
    std::normal_distribution<double> z(0.0, 1.0);
    Eigen::MatrixXd m(r, c);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = z(rng);
    return m;
}

inline RefBlock ref_block(const DesignBlock& d, const Eigen::VectorXd& w, double lambda)
{
    return RefBlock{d.centered, w, lambda};
}

} // namespace dpam::testing
