#include "mmc/geometry.hpp"

#include <algorithm>

namespace mmc {

namespace {

// Shared log-sum-exp kernel with max shift. Writes softmax weights in place.
double ks_kernel(std::span<const double> phi, double l, std::span<double> w) {
  const size_t n = phi.size();
  double m = -std::numeric_limits<double>::infinity();
  for (size_t i = 0; i < n; ++i) m = std::max(m, phi[i]);
  if (!std::isfinite(m)) {
    // All contributions are deep void; the smooth max degenerates.
    for (size_t i = 0; i < n; ++i) w[i] = 1.0 / double(n);
    return m;
  }
  double sum = 0.0;
  for (size_t i = 0; i < n; ++i) {
    w[i] = std::exp(l * (phi[i] - m));
    sum += w[i];
  }
  for (size_t i = 0; i < n; ++i) w[i] /= sum;
  return m + std::log(sum) / l;
}

}  // namespace

double ks_aggregate(std::span<const double> phi, double l,
                    std::span<double> weights) {
  if (phi.empty()) throw std::invalid_argument("ks_aggregate: empty input");
  if (!(l > 0)) throw std::invalid_argument("ks_aggregate: l must be > 0");
  if (weights.size() != phi.size())
    throw std::invalid_argument("ks_aggregate: weight span size mismatch");
  return ks_kernel(phi, l, weights);
}

std::pair<double, Eigen::VectorXd> ks_aggregate(std::span<const double> phi,
                                                double l) {
  Eigen::VectorXd w(long(phi.size()));
  const double v = ks_aggregate(phi, l, std::span<double>(w.data(), size_t(w.size())));
  return {v, std::move(w)};
}

Eigen::Matrix<double, 6, 1> tdf_partials(const Component2d& cmp,
                                         const Eigen::Vector2d& x, int p_exp) {
  Eigen::Matrix<double, 6, 1> g = Eigen::Matrix<double, 6, 1>::Zero();
  const double c = std::cos(cmp.theta), s = std::sin(cmp.theta);
  const double dx = x[0] - cmp.x0, dy = x[1] - cmp.y0;
  const double xp = c * dx + s * dy;
  const double yp = -s * dx + c * dy;
  const double bp = (cmp.t2 - cmp.t1) / (2.0 * cmp.a);
  const double b = 0.5 * (cmp.t1 + cmp.t2) + bp * xp;
  if (!(b > 0.0)) return g;  // closed taper: flat void, no usable gradient

  const int p = p_exp;
  const double up1 = ipow(xp / cmp.a, p - 1);
  const double vp1 = ipow(yp / b, p - 1);
  const double dphi_dxp = -p * up1 / cmp.a + p * vp1 * yp * bp / (b * b);
  const double dphi_dyp = -p * vp1 / b;

  g[0] = dphi_dxp * (-c) + dphi_dyp * s;    // x0
  g[1] = dphi_dxp * (-s) + dphi_dyp * (-c); // y0
  g[2] = p * up1 * xp / (cmp.a * cmp.a) -
         p * vp1 * yp * bp * xp / (cmp.a * b * b);             // a
  g[3] = p * vp1 * yp * (0.5 - xp / (2.0 * cmp.a)) / (b * b);  // t1
  g[4] = p * vp1 * yp * (0.5 + xp / (2.0 * cmp.a)) / (b * b);  // t2
  g[5] = dphi_dxp * yp - dphi_dyp * xp;                        // theta
  return g;
}

Eigen::Matrix<double, 9, 1> tdf_partials(const Component3d& cmp,
                                         const Eigen::Vector3d& x, int p_exp) {
  const double ca = std::cos(cmp.alpha), sa = std::sin(cmp.alpha);
  const double cb = std::cos(cmp.beta), sb = std::sin(cmp.beta);
  const double ct = std::cos(cmp.theta), st = std::sin(cmp.theta);
  Eigen::Matrix3d Rx, Ry, Rz, dRx, dRy, dRz;
  Rx << 1, 0, 0, 0, ca, -sa, 0, sa, ca;
  Ry << cb, 0, sb, 0, 1, 0, -sb, 0, cb;
  Rz << ct, -st, 0, st, ct, 0, 0, 0, 1;
  dRx << 0, 0, 0, 0, -sa, -ca, 0, ca, -sa;
  dRy << -sb, 0, cb, 0, 0, 0, -cb, 0, -sb;
  dRz << -st, -ct, 0, ct, -st, 0, 0, 0, 0;

  const Eigen::Matrix3d R = Rx * Ry * Rz;
  const Eigen::Vector3d d = x - Eigen::Vector3d(cmp.x0, cmp.y0, cmp.z0);
  const Eigen::Vector3d xi = R * d;
  const Eigen::Vector3d L(cmp.L1, cmp.L2, cmp.L3);

  const int p = p_exp;
  Eigen::Vector3d gxi;  // d phi / d xi
  Eigen::Matrix<double, 9, 1> g;
  for (int k = 0; k < 3; ++k) {
    const double r1 = ipow(xi[k] / L[k], p - 1);
    gxi[k] = -double(p) / L[k] * r1;
    g[3 + k] = double(p) / L[k] * r1 * (xi[k] / L[k]);  // L_k
  }
  g.segment<3>(0) = -R.transpose() * gxi;               // x0, y0, z0
  g[6] = gxi.dot(dRx * Ry * Rz * d);                    // alpha
  g[7] = gxi.dot(Rx * dRy * Rz * d);                    // beta
  g[8] = gxi.dot(Rx * Ry * dRz * d);                    // theta
  return g;
}

namespace {

// Inclusive node range [lo, hi] on one axis covering [center-extent, center+extent],
// rounded outward; empty (lo > hi) when the interval misses the grid.
void axis_range(double center, double extent, double h, int n_nodes_minus1,
                int& lo, int& hi) {
  lo = std::max(0, int(std::floor((center - extent) / h)));
  hi = std::min(n_nodes_minus1, int(std::ceil((center + extent) / h)));
}

}  // namespace

SupportBox support_box(const Component2d& cmp, const BackgroundGrid& grid,
                       const RegularizationParams& reg) {
  if (grid.dim != 2) throw std::invalid_argument("support_box: 2D component on 3D grid");
  cmp.validate();
  const double m = std::pow(1.0 + reg.epsilon, 1.0 / reg.p_exp);
  // Band nodes satisfy |x'| <= a*m; on that range the tapered half-thickness
  // is bounded by max(t1,t2)*m, so |y'| <= max(t1,t2)*m^2.
  const double hl = cmp.a * m;
  const double hw = std::max(cmp.t1, cmp.t2) * m * m;
  const double c = std::abs(std::cos(cmp.theta)), s = std::abs(std::sin(cmp.theta));
  const double ex = hl * c + hw * s;
  const double ey = hl * s + hw * c;
  SupportBox box;
  axis_range(cmp.x0, ex, grid.dx, grid.nx, box.lo[0], box.hi[0]);
  axis_range(cmp.y0, ey, grid.dy, grid.ny, box.lo[1], box.hi[1]);
  box.lo[2] = box.hi[2] = 0;
  return box;
}

SupportBox support_box(const Component3d& cmp, const BackgroundGrid& grid,
                       const RegularizationParams& reg) {
  if (grid.dim != 3) throw std::invalid_argument("support_box: 3D component on 2D grid");
  cmp.validate();
  const double m = std::pow(1.0 + reg.epsilon, 1.0 / reg.p_exp);
  const Eigen::Matrix3d R = rotation_matrix(cmp.alpha, cmp.beta, cmp.theta);
  const Eigen::Vector3d hl(cmp.L1 * m, cmp.L2 * m, cmp.L3 * m);
  // x - x0 = R^T xi, so the global extent along axis j is sum_k |R(k,j)| hl_k.
  const Eigen::Vector3d ext = R.cwiseAbs().transpose() * hl;
  SupportBox box;
  axis_range(cmp.x0, ext[0], grid.dx, grid.nx, box.lo[0], box.hi[0]);
  axis_range(cmp.y0, ext[1], grid.dy, grid.ny, box.lo[1], box.hi[1]);
  axis_range(cmp.z0, ext[2], grid.dz, grid.nz, box.lo[2], box.hi[2]);
  return box;
}

namespace {

struct Entry {
  int32_t node;
  int32_t comp;
  double phi;
};

uint64_t fnv1a(const void* data, size_t bytes, uint64_t h) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (size_t i = 0; i < bytes; ++i) {
    h ^= p[i];
    h *= 1099511628211ULL;
  }
  return h;
}

template <typename Comp>
TdfField build_impl(std::span<const Comp> comps, const BackgroundGrid& grid,
                    const RegularizationParams& reg,
                    const TdfOverrides* overrides) {
  reg.validate();
  for (const Comp& c : comps) c.validate();
  const long nn = grid.node_count();
  if (nn >= std::numeric_limits<int32_t>::max())
    throw std::invalid_argument("grid too large for 32-bit node ids");
  if (comps.size() >= size_t(std::numeric_limits<int32_t>::max()))
    throw std::invalid_argument("too many components");

  TdfField f;
  f.dim = grid.dim;
  f.num_nodes = nn;
  f.epsilon = reg.epsilon;
  f.alpha_min = reg.alpha_min;

  // Forced-node map: 1 = solid, 2 = void.
  std::vector<int8_t> forced;
  if (overrides && (!overrides->solid_nodes.empty() || !overrides->void_nodes.empty())) {
    forced.assign(size_t(nn), 0);
    for (int32_t n : overrides->solid_nodes) {
      if (n < 0 || n >= nn) throw std::invalid_argument("forced solid node out of range");
      forced[size_t(n)] = 1;
    }
    for (int32_t n : overrides->void_nodes) {
      if (n < 0 || n >= nn) throw std::invalid_argument("forced void node out of range");
      if (forced[size_t(n)] == 1)
        throw std::invalid_argument("node forced both solid and void");
      forced[size_t(n)] = 2;
    }
  }

  // Pass 1: per-component support boxes and TDF evaluations, with the margin
  // that keeps the box truncation both sound (no node outside every box can
  // aggregate above -epsilon) and smooth (dropped tails stay negligible).
  RegularizationParams reg_box = reg;
  reg_box.epsilon += box_margin(comps.size(), reg.ks_l);
  std::vector<SupportBox> boxes(comps.size());
  long total = 0;
  for (size_t ci = 0; ci < comps.size(); ++ci) {
    boxes[ci] = support_box(comps[ci], grid, reg_box);
    total += boxes[ci].node_count();
  }
  std::vector<Entry> entries;
  entries.reserve(size_t(total));
  std::vector<int32_t> count(size_t(nn), 0);
  for (size_t ci = 0; ci < comps.size(); ++ci) {
    const SupportBox& b = boxes[ci];
    if (b.empty()) continue;
    for (int k = b.lo[2]; k <= b.hi[2]; ++k)
      for (int j = b.lo[1]; j <= b.hi[1]; ++j)
        for (int i = b.lo[0]; i <= b.hi[0]; ++i) {
          const long node = grid.node_id(i, j, k);
          double phi;
          if constexpr (std::is_same_v<Comp, Component2d>) {
            phi = eval_tdf(comps[ci], Eigen::Vector2d(i * grid.dx, j * grid.dy),
                           reg.p_exp);
          } else {
            phi = eval_tdf(comps[ci],
                           Eigen::Vector3d(i * grid.dx, j * grid.dy, k * grid.dz),
                           reg.p_exp);
          }
          entries.push_back({int32_t(node), int32_t(ci), phi});
          ++count[size_t(node)];
        }
  }

  // Pass 2: slots (covered or forced nodes, in node order) and CSR offsets.
  f.slot_of_node.assign(size_t(nn), -1);
  long nslots = 0;
  for (long n = 0; n < nn; ++n) {
    if (count[size_t(n)] > 0 || (!forced.empty() && forced[size_t(n)] != 0))
      f.slot_of_node[size_t(n)] = int32_t(nslots++);
  }
  f.node_of_slot.resize(size_t(nslots));
  f.offsets.assign(size_t(nslots) + 1, 0);
  for (long n = 0; n < nn; ++n) {
    const int32_t s = f.slot_of_node[size_t(n)];
    if (s < 0) continue;
    f.node_of_slot[size_t(s)] = int32_t(n);
    f.offsets[size_t(s) + 1] = count[size_t(n)];
  }
  for (size_t s = 0; s < size_t(nslots); ++s) f.offsets[s + 1] += f.offsets[s];

  // Pass 3: scatter contributions (stable: entries are in component order per
  // node, so each slot's contributions stay sorted by component index).
  f.contrib_comp.resize(entries.size());
  f.contrib_weight.resize(entries.size());
  {
    std::vector<int64_t> cursor(f.offsets.begin(), f.offsets.end() - 1);
    for (const Entry& e : entries) {
      const int32_t s = f.slot_of_node[size_t(e.node)];
      const int64_t pos = cursor[size_t(s)]++;
      f.contrib_comp[size_t(pos)] = e.comp;
      f.contrib_weight[size_t(pos)] = e.phi;
    }
  }
  entries.clear();
  entries.shrink_to_fit();

  // Per-slot aggregation, overrides, Heaviside values.
  f.phi.resize(size_t(nslots));
  f.hval.resize(size_t(nslots));
  f.hderiv.resize(size_t(nslots));
  for (long s = 0; s < nslots; ++s) {
    const int64_t o0 = f.offsets[size_t(s)], o1 = f.offsets[size_t(s) + 1];
    const long node = f.node_of_slot[size_t(s)];
    double phi_s;
    if (o1 > o0) {
      std::span<double> vals(f.contrib_weight.data() + o0, size_t(o1 - o0));
      phi_s = ks_kernel(std::span<const double>(vals.data(), vals.size()),
                        reg.ks_l, vals);
    } else {
      phi_s = -std::numeric_limits<double>::infinity();
    }
    const int8_t fk = forced.empty() ? int8_t(0) : forced[size_t(node)];
    if (fk == 1) phi_s = std::max(phi_s, reg.epsilon);
    if (fk == 2) phi_s = std::min(phi_s, -reg.epsilon);
    f.phi[size_t(s)] = phi_s;
    f.hval[size_t(s)] = heaviside_reg(phi_s, reg.epsilon, reg.alpha_min);
    f.hderiv[size_t(s)] =
        fk != 0 ? 0.0 : heaviside_reg_deriv(phi_s, reg.epsilon, reg.alpha_min);
  }

  uint64_t h = 14695981039346656037ULL;
  h = fnv1a(&nn, sizeof(nn), h);
  if (!f.node_of_slot.empty())
    h = fnv1a(f.node_of_slot.data(), f.node_of_slot.size() * sizeof(int32_t), h);
  if (!f.phi.empty()) h = fnv1a(f.phi.data(), f.phi.size() * sizeof(double), h);
  f.content_hash = h;
  return f;
}

}  // namespace

TdfField build_structure_tdf(std::span<const Component2d> comps,
                             const BackgroundGrid& grid,
                             const RegularizationParams& reg,
                             const TdfOverrides* overrides) {
  if (grid.dim != 2) throw std::invalid_argument("build_structure_tdf: dim mismatch");
  return build_impl(comps, grid, reg, overrides);
}

TdfField build_structure_tdf(std::span<const Component3d> comps,
                             const BackgroundGrid& grid,
                             const RegularizationParams& reg,
                             const TdfOverrides* overrides) {
  if (grid.dim != 3) throw std::invalid_argument("build_structure_tdf: dim mismatch");
  return build_impl(comps, grid, reg, overrides);
}

Eigen::VectorXd flatten(std::span<const Component2d> comps) {
  Eigen::VectorXd x(long(comps.size()) * kVarsPerComponent2);
  for (size_t c = 0; c < comps.size(); ++c) {
    const long o = long(c) * kVarsPerComponent2;
    x[o] = comps[c].x0;
    x[o + 1] = comps[c].y0;
    x[o + 2] = comps[c].a;
    x[o + 3] = comps[c].t1;
    x[o + 4] = comps[c].t2;
    x[o + 5] = comps[c].theta;
  }
  return x;
}

Eigen::VectorXd flatten(std::span<const Component3d> comps) {
  Eigen::VectorXd x(long(comps.size()) * kVarsPerComponent3);
  for (size_t c = 0; c < comps.size(); ++c) {
    const long o = long(c) * kVarsPerComponent3;
    x[o] = comps[c].x0;
    x[o + 1] = comps[c].y0;
    x[o + 2] = comps[c].z0;
    x[o + 3] = comps[c].L1;
    x[o + 4] = comps[c].L2;
    x[o + 5] = comps[c].L3;
    x[o + 6] = comps[c].alpha;
    x[o + 7] = comps[c].beta;
    x[o + 8] = comps[c].theta;
  }
  return x;
}

std::vector<Component2d> unflatten2(const Eigen::VectorXd& x) {
  if (x.size() % kVarsPerComponent2 != 0)
    throw std::invalid_argument("unflatten2: bad vector length");
  std::vector<Component2d> comps(size_t(x.size() / kVarsPerComponent2));
  for (size_t c = 0; c < comps.size(); ++c) {
    const long o = long(c) * kVarsPerComponent2;
    comps[c] = {x[o], x[o + 1], x[o + 2], x[o + 3], x[o + 4], x[o + 5]};
  }
  return comps;
}

std::vector<Component3d> unflatten3(const Eigen::VectorXd& x) {
  if (x.size() % kVarsPerComponent3 != 0)
    throw std::invalid_argument("unflatten3: bad vector length");
  std::vector<Component3d> comps(size_t(x.size() / kVarsPerComponent3));
  for (size_t c = 0; c < comps.size(); ++c) {
    const long o = long(c) * kVarsPerComponent3;
    comps[c] = {x[o],     x[o + 1], x[o + 2], x[o + 3], x[o + 4],
                x[o + 5], x[o + 6], x[o + 7], x[o + 8]};
  }
  return comps;
}

}  // namespace mmc
