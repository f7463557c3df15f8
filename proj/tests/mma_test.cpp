#include <doctest.h>

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <random>

#include "mmc/mma.hpp"

using namespace mmc;

namespace {

Eigen::VectorXd vec(std::initializer_list<double> v) {
  Eigen::VectorXd out(static_cast<long>(v.size()));
  long i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

// min sum c_j/x_j  s.t.  a.x <= V, box [0.1, 2]. Stationarity gives
// x*_j = sqrt(c_j / (lam* a_j)) with sqrt(lam*) = sum_j sqrt(a_j c_j) / V,
// valid when every x*_j lands strictly inside the box.
struct ResourceProblem {
  Eigen::VectorXd c = vec({1.0, 2.0, 0.5, 3.0});
  Eigen::VectorXd a = vec({1.0, 1.5, 0.8, 2.0});
  double V = 4.0;

  double f0(const Eigen::VectorXd& x) const {
    return c.cwiseQuotient(x).sum();
  }
  Eigen::VectorXd df0(const Eigen::VectorXd& x) const {
    return -c.cwiseQuotient(x.cwiseProduct(x));
  }
  double g(const Eigen::VectorXd& x) const { return a.dot(x) - V; }

  double lam_star() const {
    const double s = a.cwiseProduct(c).cwiseSqrt().sum() / V;
    return s * s;
  }
  Eigen::VectorXd x_star() const {
    return (c.array() / (lam_star() * a.array())).sqrt().matrix();
  }
};

}  // namespace

TEST_CASE("constructor rejects inconsistent shapes and degenerate boxes") {
  const Eigen::VectorXd lo = vec({0.0, 0.0}), hi = vec({1.0, 1.0});
  const Eigen::VectorXd mv = vec({0.1, 0.1});
  CHECK_THROWS(Mma(VariableBounds{lo, vec({1.0})}, mv));
  CHECK_THROWS(Mma(VariableBounds{lo, hi}, vec({0.1})));
  CHECK_THROWS(Mma(VariableBounds{lo, vec({1.0, 0.0})}, mv));
  CHECK_THROWS(Mma(VariableBounds{lo, hi}, vec({0.1, 0.0})));
  CHECK_NOTHROW(Mma(VariableBounds{lo, hi}, mv));
}

TEST_CASE("update rejects mis-sized and non-finite inputs") {
  Mma m(VariableBounds{vec({0.0, 0.0}), vec({1.0, 1.0})}, vec({0.1, 0.1}));
  const Eigen::VectorXd x = vec({0.5, 0.5}), d = vec({1.0, -1.0});
  CHECK_THROWS(m.update(vec({0.5}), 1.0, d, -1.0, d));
  CHECK_THROWS(m.update(x, 1.0, vec({1.0}), -1.0, d));
  CHECK_THROWS(m.update(x, 1.0, d, -1.0, vec({1.0})));
  CHECK_THROWS(m.update(x, std::nan(""), d, -1.0, d));
  CHECK_THROWS(m.update(x, 1.0, d, std::numeric_limits<double>::infinity(), d));
  Eigen::VectorXd bad = d;
  bad[1] = std::nan("");
  CHECK_THROWS(m.update(x, 1.0, bad, -1.0, d));
  CHECK_THROWS(m.update(x, 1.0, d, -1.0, bad));
  CHECK(m.iteration() == 0);
}

TEST_CASE("every step lands inside bounds, move limits, and asymptotes") {
  std::mt19937 rng(2026u);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  auto logmag = [&](double lo, double hi) {
    const double m = std::pow(10.0, lo + (hi - lo) * u01(rng));
    return u01(rng) < 0.5 ? -m : m;
  };
  for (int trial = 0; trial < 200; ++trial) {
    const long n = 1 + static_cast<long>(u01(rng) * 6);
    Eigen::VectorXd lo(n), hi(n), mv(n), x(n), df(n), dg(n);
    for (long j = 0; j < n; ++j) {
      lo[j] = -2.0 + 3.0 * u01(rng);
      hi[j] = lo[j] + 0.1 + 2.9 * u01(rng);
      mv[j] = 0.01 + 0.99 * u01(rng);
      x[j] = lo[j] - 0.5 + (hi[j] - lo[j] + 1.0) * u01(rng);  // may be outside
      df[j] = logmag(-6.0, 6.0);
      dg[j] = trial % 17 == 0 ? 0.0 : logmag(-6.0, 6.0);
    }
    const double g = logmag(-3.0, 4.0);
    Mma m(VariableBounds{lo, hi}, mv);
    Eigen::VectorXd xc = x.cwiseMax(lo).cwiseMin(hi);
    for (int step = 0; step < 3; ++step) {
      const Eigen::VectorXd xn = m.update(x, 1.0, df, g, dg);
      REQUIRE(xn.allFinite());
      for (long j = 0; j < n; ++j) {
        CHECK(xn[j] >= std::max(lo[j], xc[j] - mv[j]));
        CHECK(xn[j] <= std::min(hi[j], xc[j] + mv[j]));
        CHECK(xn[j] > m.asymptote_low()[j]);
        CHECK(xn[j] < m.asymptote_upp()[j]);
      }
      x = xn;
      xc = x;
    }
    CHECK(m.iteration() == 3);
  }
}

TEST_CASE("with the constraint slack, steps descend along the objective") {
  const long n = 5;
  const Eigen::VectorXd lo = Eigen::VectorXd::Constant(n, -1.0);
  const Eigen::VectorXd hi = Eigen::VectorXd::Constant(n, 1.0);
  Mma m(VariableBounds{lo, hi}, Eigen::VectorXd::Constant(n, 5.0));
  const Eigen::VectorXd x = vec({-0.3, 0.0, 0.2, 0.4, -0.1});
  const Eigen::VectorXd df = vec({2.0, 0.0, -1.5, 0.7, -3.0});
  const Eigen::VectorXd dg = Eigen::VectorXd::Constant(n, 1.0);
  const Eigen::VectorXd xn = m.update(x, 1.0, df, -100.0, dg);
  CHECK(m.multiplier() == 0.0);
  for (long j = 0; j < n; ++j) {
    if (df[j] > 0) CHECK(xn[j] < x[j]);
    if (df[j] < 0) CHECK(xn[j] > x[j]);
    // Zero objective slope and symmetric first-step asymptotes hold the
    // variable in place.
    if (df[j] == 0) CHECK(xn[j] == doctest::Approx(x[j]).epsilon(1e-13));
  }
}

TEST_CASE("scaling the constraint only rescales the multiplier") {
  const double kappa = 137.0;
  ResourceProblem prob;
  const Eigen::VectorXd lo = Eigen::VectorXd::Constant(4, 0.1);
  const Eigen::VectorXd hi = Eigen::VectorXd::Constant(4, 2.0);
  const Eigen::VectorXd mv = Eigen::VectorXd::Constant(4, 0.2);
  Mma ma(VariableBounds{lo, hi}, mv);
  Mma mb(VariableBounds{lo, hi}, mv);
  Eigen::VectorXd xa = Eigen::VectorXd::Ones(4), xb = xa;
  for (int it = 0; it < 30; ++it) {
    xa = ma.update(xa, prob.f0(xa), prob.df0(xa), prob.g(xa), prob.a);
    xb = mb.update(xb, prob.f0(xb), prob.df0(xb), kappa * prob.g(xb),
                   (kappa * prob.a).eval());
    CHECK((xa - xb).cwiseAbs().maxCoeff() <= 1e-9);
  }
  CHECK(mb.multiplier() ==
        doctest::Approx(ma.multiplier() / kappa).epsilon(1e-6));
}

TEST_CASE("a convex resource problem reaches its analytic optimum and KKT") {
  ResourceProblem prob;
  const Eigen::VectorXd xs = prob.x_star();
  REQUIRE((xs.array() > 0.1 + 1e-3).all());
  REQUIRE((xs.array() < 2.0 - 1e-3).all());

  Mma m(VariableBounds{Eigen::VectorXd::Constant(4, 0.1),
                       Eigen::VectorXd::Constant(4, 2.0)},
        Eigen::VectorXd::Constant(4, 0.2));
  Eigen::VectorXd x = Eigen::VectorXd::Ones(4);
  for (int it = 0; it < 400; ++it)
    x = m.update(x, prob.f0(x), prob.df0(x), prob.g(x), prob.a);

  CHECK((x - xs).cwiseAbs().maxCoeff() <= 1e-6);
  CHECK(std::abs(prob.g(x)) <= 1e-7);
  CHECK(m.multiplier() == doctest::Approx(prob.lam_star()).epsilon(1e-5));
  const Eigen::VectorXd kkt = prob.df0(x) + m.multiplier() * prob.a;
  CHECK(kkt.cwiseAbs().maxCoeff() <=
        1e-5 * prob.df0(x).cwiseAbs().maxCoeff());
  CHECK(m.iteration() == 400);
}

TEST_CASE("oscillation contracts the asymptotes, steady progress widens them") {
  const VariableBounds b{vec({0.0}), vec({1.0})};
  const Eigen::VectorXd mv = vec({10.0});
  const auto step = [&](Mma& m, double x) {
    m.update(vec({x}), 1.0, vec({1.0}), -1.0, vec({0.3}));
  };
  // Defaults: first two spans are 0.5 of the range; gamma is 1.2 when the
  // last two moves agree in sign, 0.7 when they flip, 1.0 when one is zero.
  Mma osc(b, mv);
  step(osc, 0.5);
  step(osc, 0.6);
  step(osc, 0.5);
  CHECK(osc.asymptote_upp()[0] == doctest::Approx(0.85).epsilon(1e-12));
  CHECK(osc.asymptote_low()[0] == doctest::Approx(0.15).epsilon(1e-12));

  Mma mono(b, mv);
  step(mono, 0.4);
  step(mono, 0.5);
  step(mono, 0.6);
  CHECK(mono.asymptote_upp()[0] == doctest::Approx(1.2).epsilon(1e-12));
  CHECK(mono.asymptote_low()[0] == doctest::Approx(0.0).epsilon(1e-12));

  Mma still(b, mv);
  step(still, 0.5);
  step(still, 0.5);
  step(still, 0.5);
  CHECK(still.asymptote_upp()[0] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(still.asymptote_low()[0] == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("an unreachable constraint drives the step to its feasible edge") {
  Mma m(VariableBounds{vec({0.0}), vec({1.0})}, vec({0.1}));
  const Eigen::VectorXd xn =
      m.update(vec({0.5}), 1.0, vec({1.0}), 1000.0, vec({1e-6}));
  // No multiplier can close a gap of 1000 inside a 0.1 move box; the update
  // must still return the most feasible point, here the lower move limit.
  CHECK(xn[0] == doctest::Approx(0.4).epsilon(1e-12));
  CHECK(m.multiplier() > 1e15);

  // A constraint with zero slope everywhere is the degenerate version.
  Mma z(VariableBounds{vec({0.0}), vec({1.0})}, vec({0.1}));
  const Eigen::VectorXd xz =
      z.update(vec({0.5}), 1.0, vec({1.0}), 7.0, vec({0.0}));
  CHECK(xz.allFinite());
  CHECK(xz[0] >= 0.4);
  CHECK(xz[0] <= 0.6);
}

TEST_CASE("identical call sequences give bit-identical iterates") {
  ResourceProblem prob;
  const VariableBounds b{Eigen::VectorXd::Constant(4, 0.1),
                         Eigen::VectorXd::Constant(4, 2.0)};
  Mma ma(b, Eigen::VectorXd::Constant(4, 0.2));
  Mma mb(b, Eigen::VectorXd::Constant(4, 0.2));
  Eigen::VectorXd xa = Eigen::VectorXd::Ones(4), xb = xa;
  for (int it = 0; it < 5; ++it) {
    xa = ma.update(xa, prob.f0(xa), prob.df0(xa), prob.g(xa), prob.a);
    xb = mb.update(xb, prob.f0(xb), prob.df0(xb), prob.g(xb), prob.a);
    CHECK((xa.array() == xb.array()).all());
  }
}
