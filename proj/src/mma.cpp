#include "mmc/mma.hpp"

#include <cmath>
#include <stdexcept>

namespace mmc {

Mma::Mma(VariableBounds bounds, Eigen::VectorXd move, MmaOptions opt)
    : opt_(opt),
      xmin_(std::move(bounds.lower)),
      xmax_(std::move(bounds.upper)),
      move_(std::move(move)) {
  if (xmin_.size() != xmax_.size() || xmin_.size() != move_.size())
    throw std::invalid_argument("Mma: inconsistent vector sizes");
  if (((xmax_ - xmin_).array() <= 0).any())
    throw std::invalid_argument("Mma: upper bounds must exceed lower bounds");
  if ((move_.array() <= 0).any())
    throw std::invalid_argument("Mma: move limits must be positive");
}

Eigen::VectorXd Mma::update(const Eigen::VectorXd& x_in, double f0,
                            const Eigen::VectorXd& df0, double g,
                            const Eigen::VectorXd& dg) {
  const long n = xmin_.size();
  if (x_in.size() != n || df0.size() != n || dg.size() != n)
    throw std::invalid_argument("Mma::update: size mismatch");
  if (!std::isfinite(f0) || !std::isfinite(g) || !x_in.allFinite() ||
      !df0.allFinite() || !dg.allFinite())
    throw std::invalid_argument("Mma::update: non-finite input");

  const Eigen::VectorXd x = x_in.cwiseMax(xmin_).cwiseMin(xmax_);
  const Eigen::VectorXd range = xmax_ - xmin_;
  ++iter_;

  if (iter_ <= 2) {
    low_ = x - opt_.asym_init * range;
    upp_ = x + opt_.asym_init * range;
  } else {
    Eigen::VectorXd nlow(n), nupp(n);
    for (long j = 0; j < n; ++j) {
      const double osc = (x[j] - xm1_[j]) * (xm1_[j] - xm2_[j]);
      const double gamma =
          osc > 0 ? opt_.asym_incr : (osc < 0 ? opt_.asym_decr : 1.0);
      nlow[j] = x[j] - gamma * (xm1_[j] - low_[j]);
      nupp[j] = x[j] + gamma * (upp_[j] - xm1_[j]);
    }
    low_ = nlow;
    upp_ = nupp;
  }
  low_ = low_.cwiseMax(x - 10.0 * range).cwiseMin(x - 0.01 * range);
  upp_ = upp_.cwiseMin(x + 10.0 * range).cwiseMax(x + 0.01 * range);

  const Eigen::VectorXd alpha =
      xmin_.cwiseMax(low_ + 0.1 * (x - low_)).cwiseMax(x - move_);
  const Eigen::VectorXd beta =
      xmax_.cwiseMin(upp_ - 0.1 * (upp_ - x)).cwiseMin(x + move_);

  // Separable approximations. The objective carries a small positive floor
  // (raa0) so each variable stays strictly convex; the constraint terms are
  // exactly homogeneous in the constraint scale, so scaling g by kappa only
  // rescales the multiplier and leaves the step unchanged.
  const double raa0 = 1e-5;
  const Eigen::VectorXd ux = upp_ - x, xl = x - low_;
  const Eigen::VectorXd ux2 = ux.array().square().matrix();
  const Eigen::VectorXd xl2 = xl.array().square().matrix();
  const Eigen::VectorXd dfp = df0.cwiseMax(0.0), dfm = (-df0).cwiseMax(0.0);
  const Eigen::VectorXd dgp = dg.cwiseMax(0.0), dgm = (-dg).cwiseMax(0.0);
  const Eigen::VectorXd floor_term =
      (raa0 / range.cwiseMax(1e-5).array()).matrix();

  const Eigen::VectorXd p0 =
      ux2.cwiseProduct(1.001 * dfp + 0.001 * dfm + floor_term);
  const Eigen::VectorXd q0 =
      xl2.cwiseProduct(0.001 * dfp + 1.001 * dfm + floor_term);
  const Eigen::VectorXd pc = ux2.cwiseProduct(1.001 * dgp + 0.001 * dgm);
  const Eigen::VectorXd qc = xl2.cwiseProduct(0.001 * dgp + 1.001 * dgm);
  const double rc =
      g - (pc.cwiseQuotient(ux) + qc.cwiseQuotient(xl)).sum();

  Eigen::VectorXd xnew(n);
  auto primal_for = [&](double lam, Eigen::VectorXd& out) {
    for (long j = 0; j < n; ++j) {
      const double sp = std::sqrt(p0[j] + lam * pc[j]);
      const double sq = std::sqrt(q0[j] + lam * qc[j]);
      const double xj = (low_[j] * sp + upp_[j] * sq) / (sp + sq);
      out[j] = std::min(std::max(xj, alpha[j]), beta[j]);
    }
  };
  auto constraint_at = [&](double lam) {
    primal_for(lam, xnew);
    double v = rc;
    for (long j = 0; j < n; ++j)
      v += pc[j] / (upp_[j] - xnew[j]) + qc[j] / (xnew[j] - low_[j]);
    return v;
  };

  double lam = 0.0;
  if (constraint_at(0.0) > opt_.kkt_tol) {
    double lo = 0.0, hi = 1.0;
    int guard = 0;
    while (constraint_at(hi) > 0 && guard++ < 64) {
      lo = hi;
      hi *= 2;
    }
    if (guard >= 64) {
      lam = hi;  // constraint unreachable inside the move box: most feasible
    } else {
      for (int it = 0; it < opt_.max_bisections; ++it) {
        if (hi - lo <= 1e-13 * std::max(1.0, hi)) break;
        const double mid = (lo + hi) / 2;
        (constraint_at(mid) > 0 ? lo : hi) = mid;
      }
      lam = hi;
    }
  }
  constraint_at(lam);  // leaves xnew at the final multiplier
  lambda_ = lam;

  xm2_ = iter_ >= 2 ? xm1_ : x;
  xm1_ = x;
  return xnew;
}

}  // namespace mmc
