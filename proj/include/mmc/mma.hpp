// Method of moving asymptotes, specialized to one inequality constraint.
// The convex subproblem separates per variable, so the dual is a scalar
// problem in the constraint multiplier and is solved by bisection.
#pragma once

#include <Eigen/Dense>

#include "mmc/mesh.hpp"

namespace mmc {

struct MmaOptions {
  double asym_init = 0.5;   // initial asymptote offset, fraction of range
  double asym_incr = 1.2;   // asymptote expansion on oscillation-free steps
  double asym_decr = 0.7;   // asymptote contraction on oscillation
  double kkt_tol = 1e-9;    // dual feasibility / complementarity tolerance
  int max_bisections = 300;
};

class Mma {
 public:
  // move: per-variable hard move limit per update (absolute).
  Mma(VariableBounds bounds, Eigen::VectorXd move, MmaOptions opt = {});

  // One design update. f0/df0: objective value and gradient; g/dg: constraint
  // in g <= 0 form and its gradient. Non-finite inputs are rejected.
  Eigen::VectorXd update(const Eigen::VectorXd& x, double f0,
                         const Eigen::VectorXd& df0, double g,
                         const Eigen::VectorXd& dg);

  int iteration() const { return iter_; }
  const Eigen::VectorXd& asymptote_low() const { return low_; }
  const Eigen::VectorXd& asymptote_upp() const { return upp_; }
  double multiplier() const { return lambda_; }

 private:
  MmaOptions opt_;
  Eigen::VectorXd xmin_, xmax_, move_;
  Eigen::VectorXd low_, upp_;
  Eigen::VectorXd xm1_, xm2_;
  double lambda_ = 0;
  int iter_ = 0;
};

}  // namespace mmc
