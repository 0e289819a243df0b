#pragma once

#include <Eigen/Dense>

#include "confound/model.hpp"

namespace confound::support {

// Population-side quantities computed with direct solves against Sigma,
// independent of the eigenbasis machinery in the estimators.
struct PopulationTargets {
  double q1;  // <b, S (S + t)^-1 b> / |b|^2
  double q2;  // <b, S (S + t)^-2 b> / |b|^2
  double m;   // (1/d) Tr (S + t)^-1
};

inline PopulationTargets population_targets(const Eigen::MatrixXd& sigma,
                                            const Eigen::VectorXd& b, double theta) {
  const Eigen::Index d = sigma.rows();
  const Eigen::MatrixXd shifted = sigma + theta * Eigen::MatrixXd::Identity(d, d);
  const Eigen::LLT<Eigen::MatrixXd> llt(shifted);
  const Eigen::VectorXd r1 = llt.solve(b);
  const Eigen::VectorXd r2 = llt.solve(r1);
  const double nb = b.squaredNorm();
  const Eigen::MatrixXd inv = llt.solve(Eigen::MatrixXd::Identity(d, d));
  return {b.dot(sigma * r1) / nb, r1.dot(sigma * r1) / nb, inv.trace() / static_cast<double>(d)};
}

inline Eigen::MatrixXd gaussian(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  Eigen::MatrixXd x(rows, cols);
  fill_standard_normal(x, rng);
  return x;
}

}  // namespace confound::support
