// Explicit component geometry: hyperelliptic components, topology description
// functions (TDF), smooth-max aggregation, regularized Heaviside projection,
// and the sparse nodal TDF field built from per-component support boxes.
#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "mmc/mesh.hpp"

namespace mmc {

// Parameters of the boundary regularization and aggregation.
//   epsilon: half-width of the Heaviside transition band (threshold on phi)
//   alpha_min: lower plateau of the Heaviside (ersatz modulus floor)
//   ks_l: sharpness of the smooth-max aggregation
//   p_exp: hyperellipse exponent (even, >= 2)
struct RegularizationParams {
  double epsilon = 0.1;
  double alpha_min = 1e-3;
  double ks_l = 100.0;
  int p_exp = 6;

  void validate() const {
    if (!(epsilon > 0.0)) throw std::invalid_argument("epsilon must be > 0");
    if (!(alpha_min > 0.0) || !(alpha_min < 1.0))
      throw std::invalid_argument("alpha_min must be in (0, 1)");
    if (!(ks_l > 0.0)) throw std::invalid_argument("ks_l must be > 0");
    if (p_exp < 2 || p_exp % 2 != 0)
      throw std::invalid_argument("p_exp must be even and >= 2");
  }
};

// 2D component: a bar of half-length a with linearly varying half-thickness
// (t1 at the x' = -a end, t2 at x' = +a), centered at (x0, y0), inclined by
// theta (radians, counterclockwise from the global x axis).
template <typename Scalar>
struct Component2 {
  Scalar x0{}, y0{};
  Scalar a{}, t1{}, t2{};
  Scalar theta{};

  void validate() const {
    if (!(a > Scalar(0)) || !(t1 > Scalar(0)) || !(t2 > Scalar(0)))
      throw std::invalid_argument("component sizes must be > 0");
    if (!std::isfinite(double(x0)) || !std::isfinite(double(y0)) ||
        !std::isfinite(double(theta)))
      throw std::invalid_argument("component parameters must be finite");
  }
};
using Component2d = Component2<double>;

// 3D component: a box-like solid with half-axes L1, L2, L3 centered at
// (x0, y0, z0), oriented by successive rotations theta (about z), beta
// (about y), alpha (about x). Angles restricted to [-pi/2, pi/2] so the
// orientation parametrization stays single-valued.
template <typename Scalar>
struct Component3 {
  Scalar x0{}, y0{}, z0{};
  Scalar L1{}, L2{}, L3{};
  Scalar alpha{}, beta{}, theta{};

  void validate() const {
    if (!(L1 > Scalar(0)) || !(L2 > Scalar(0)) || !(L3 > Scalar(0)))
      throw std::invalid_argument("component sizes must be > 0");
    const double half_pi = std::asin(1.0);
    for (double ang : {double(alpha), double(beta), double(theta)}) {
      if (!std::isfinite(ang) || std::abs(ang) > half_pi + 1e-12)
        throw std::invalid_argument("3D angles must lie in [-pi/2, pi/2]");
    }
  }
};
using Component3d = Component3<double>;

// x^n for integer n >= 0 (exponentiation by squaring; preserves sign for odd n).
template <typename Scalar>
inline Scalar ipow(Scalar x, int n) {
  Scalar r(1);
  while (n > 0) {
    if (n & 1) r *= x;
    x *= x;
    n >>= 1;
  }
  return r;
}

// Local-from-global 2D map: [x'; y'] = rotation_matrix(theta) * (x - x0).
template <typename Scalar>
inline Eigen::Matrix<Scalar, 2, 2> rotation_matrix(Scalar theta) {
  const Scalar c = std::cos(theta), s = std::sin(theta);
  Eigen::Matrix<Scalar, 2, 2> R;
  R << c, s, -s, c;
  return R;
}

// Local-from-global 3D map: xi = R * (x - x0) with R = Rx(alpha) Ry(beta) Rz(theta).
// Angles outside [-pi/2, pi/2] are rejected: the parametrization assumes
// non-negative cosines, callers must wrap bounds instead.
template <typename Scalar>
inline Eigen::Matrix<Scalar, 3, 3> rotation_matrix(Scalar alpha, Scalar beta,
                                                   Scalar theta) {
  const double half_pi = std::asin(1.0);
  for (double ang : {double(alpha), double(beta), double(theta)}) {
    if (!(std::abs(ang) <= half_pi + 1e-12))
      throw std::invalid_argument("3D angles must lie in [-pi/2, pi/2]");
  }
  const Scalar ca = std::cos(alpha), sa = std::sin(alpha);
  const Scalar cb = std::cos(beta), sb = std::sin(beta);
  const Scalar ct = std::cos(theta), st = std::sin(theta);
  Eigen::Matrix<Scalar, 3, 3> R;
  R << cb * ct, -cb * st, sb,
      sa * sb * ct + ca * st, -sa * sb * st + ca * ct, -sa * cb,
      -ca * sb * ct + sa * st, ca * sb * st + sa * ct, ca * cb;
  return R;
}

// TDF of a single 2D component: phi > 0 inside, = 0 on the boundary,
// < 0 outside. phi = 1 - (x'/a)^p - (y'/b(x'))^p with the half-thickness
// b(x') = (t1+t2)/2 + (t2-t1)/(2a) x' interpolating t1 at x'=-a, t2 at x'=+a.
// Where the tapered width closes (b <= 0) the point is deep outside: -inf.
template <typename Scalar>
inline Scalar eval_tdf(const Component2<Scalar>& cmp,
                       const Eigen::Matrix<Scalar, 2, 1>& x, int p_exp) {
  const Scalar c = std::cos(cmp.theta), s = std::sin(cmp.theta);
  const Scalar dx = x[0] - cmp.x0, dy = x[1] - cmp.y0;
  const Scalar xp = c * dx + s * dy;
  const Scalar yp = -s * dx + c * dy;
  const Scalar b =
      (cmp.t1 + cmp.t2) / Scalar(2) + (cmp.t2 - cmp.t1) / (Scalar(2) * cmp.a) * xp;
  if (!(b > Scalar(0))) return -std::numeric_limits<Scalar>::infinity();
  return Scalar(1) - ipow(xp / cmp.a, p_exp) - ipow(yp / b, p_exp);
}

// TDF of a single 3D component: phi = 1 - sum_k (xi_k / L_k)^p.
template <typename Scalar>
inline Scalar eval_tdf(const Component3<Scalar>& cmp,
                       const Eigen::Matrix<Scalar, 3, 1>& x, int p_exp) {
  const Eigen::Matrix<Scalar, 3, 3> R =
      rotation_matrix(cmp.alpha, cmp.beta, cmp.theta);
  const Eigen::Matrix<Scalar, 3, 1> xi =
      R * (x - Eigen::Matrix<Scalar, 3, 1>(cmp.x0, cmp.y0, cmp.z0));
  return Scalar(1) - ipow(xi[0] / cmp.L1, p_exp) - ipow(xi[1] / cmp.L2, p_exp) -
         ipow(xi[2] / cmp.L3, p_exp);
}

// Regularized Heaviside projection: 1 above the band, alpha_min below it,
// cubic blend inside |x| <= eps. C1 across the band edges.
template <typename Scalar>
inline Scalar heaviside_reg(Scalar x, Scalar eps, Scalar alpha_min) {
  if (x > eps) return Scalar(1);
  if (x < -eps) return alpha_min;
  const Scalar r = x / eps;
  return Scalar(3) * (Scalar(1) - alpha_min) / Scalar(4) *
             (r - r * r * r / Scalar(3)) +
         (Scalar(1) + alpha_min) / Scalar(2);
}

// d heaviside_reg / dx: zero outside the band.
template <typename Scalar>
inline Scalar heaviside_reg_deriv(Scalar x, Scalar eps, Scalar alpha_min) {
  if (x > eps || x < -eps) return Scalar(0);
  const Scalar r = x / eps;
  return Scalar(3) * (Scalar(1) - alpha_min) / (Scalar(4) * eps) *
         (Scalar(1) - r * r);
}

// Smooth maximum of phi values (log-sum-exp with sharpness l), computed with
// a max shift so large l stays finite. weights[i] = d(value)/d(phi[i]); the
// weights are the softmax of l*phi and sum to 1. Guarantees
//   max(phi) <= value <= max(phi) + log(n)/l.
double ks_aggregate(std::span<const double> phi, double l,
                    std::span<double> weights);
std::pair<double, Eigen::VectorXd> ks_aggregate(std::span<const double> phi,
                                                double l);

// Partial derivatives of a single-component TDF at x with respect to the
// component parameters, in flatten() order:
//   2D: (x0, y0, a, t1, t2, theta)
//   3D: (x0, y0, z0, L1, L2, L3, alpha, beta, theta)
Eigen::Matrix<double, 6, 1> tdf_partials(const Component2d& cmp,
                                         const Eigen::Vector2d& x, int p_exp);
Eigen::Matrix<double, 9, 1> tdf_partials(const Component3d& cmp,
                                         const Eigen::Vector3d& x, int p_exp);

// Inclusive node-index box on the background grid, guaranteed to contain
// every node where the component's TDF is >= -epsilon (a superset; clamped
// to the grid, possibly empty when the component is entirely outside).
struct SupportBox {
  Eigen::Array3i lo{0, 0, 0};
  Eigen::Array3i hi{-1, -1, -1};

  bool empty() const { return (hi < lo).any(); }
  long node_count() const {
    if (empty()) return 0;
    return long(hi[0] - lo[0] + 1) * long(hi[1] - lo[1] + 1) *
           long(hi[2] - lo[2] + 1);
  }
};

// Extra epsilon margin the structure build adds to each component's support
// box. Aggregating n values can exceed their max by log(n)/l, and a dropped
// out-of-box contribution must stay a negligible tail (<= 1% softmax weight)
// even against an in-band competitor, or the objective picks up micro-jumps
// when a box edge sweeps across a node.
inline double box_margin(size_t n_comps, double ks_l) {
  if (n_comps < 2) return 0.0;  // a single field has no dropped tails
  return (std::log(double(n_comps)) + std::log(100.0)) / ks_l;
}

SupportBox support_box(const Component2d& cmp, const BackgroundGrid& grid,
                       const RegularizationParams& reg);
SupportBox support_box(const Component3d& cmp, const BackgroundGrid& grid,
                       const RegularizationParams& reg);

// Nodes forced solid or void regardless of the component layout (non-design
// regions). Node ids refer to the background grid.
struct TdfOverrides {
  std::vector<int32_t> solid_nodes;
  std::vector<int32_t> void_nodes;
};

// Aggregated structural TDF sampled at the background nodes, stored sparsely:
// only nodes covered by at least one component support box (plus forced
// nodes) get a slot; every other node is void (H = alpha_min, phi treated as
// "deep void"). Per slot the field keeps the aggregated phi, its Heaviside
// value/derivative, and the contributing components with their aggregation
// weights, ordered by component index.
struct TdfField {
  int dim = 2;
  long num_nodes = 0;
  double epsilon = 0.0;
  double alpha_min = 0.0;

  std::vector<int32_t> slot_of_node;  // node -> slot, -1 when not stored
  std::vector<int32_t> node_of_slot;  // slot -> node, strictly increasing
  std::vector<double> phi;            // aggregated phi per slot (post-override)
  std::vector<double> hval;           // heaviside_reg(phi) per slot
  std::vector<double> hderiv;         // heaviside_reg_deriv(phi); 0 on forced slots
  std::vector<int64_t> offsets;       // slot -> [offsets[s], offsets[s+1]) contribs
  std::vector<int32_t> contrib_comp;  // component index per contribution
  std::vector<double> contrib_weight; // aggregation weight per contribution
  uint64_t content_hash = 0;          // deterministic digest of (node, phi) data

  long slot_count() const { return long(node_of_slot.size()); }

  double phi_at(long node) const {
    const int32_t s = slot_of_node[size_t(node)];
    return s >= 0 ? phi[size_t(s)] : -std::numeric_limits<double>::infinity();
  }
  double h_at(long node) const {
    const int32_t s = slot_of_node[size_t(node)];
    return s >= 0 ? hval[size_t(s)] : alpha_min;
  }
  double hderiv_at(long node) const {
    const int32_t s = slot_of_node[size_t(node)];
    return s >= 0 ? hderiv[size_t(s)] : 0.0;
  }
  // Deep interior: strictly above the transition band.
  bool deep_interior(long node) const { return phi_at(node) > epsilon; }
  // Boundary band: |phi| <= epsilon, the only region with nonzero H'.
  bool in_band(long node) const {
    const double p = phi_at(node);
    return p >= -epsilon && p <= epsilon;
  }
  long band_count() const {
    long n = 0;
    for (double d : hderiv) n += (d != 0.0);
    return n;
  }
};

TdfField build_structure_tdf(std::span<const Component2d> comps,
                             const BackgroundGrid& grid,
                             const RegularizationParams& reg,
                             const TdfOverrides* overrides = nullptr);
TdfField build_structure_tdf(std::span<const Component3d> comps,
                             const BackgroundGrid& grid,
                             const RegularizationParams& reg,
                             const TdfOverrides* overrides = nullptr);

// Design-vector layout: components flattened in order, tdf_partials() order
// per component.
inline constexpr int kVarsPerComponent2 = 6;
inline constexpr int kVarsPerComponent3 = 9;

Eigen::VectorXd flatten(std::span<const Component2d> comps);
Eigen::VectorXd flatten(std::span<const Component3d> comps);
std::vector<Component2d> unflatten2(const Eigen::VectorXd& x);
std::vector<Component3d> unflatten3(const Eigen::VectorXd& x);

}  // namespace mmc
