#include "mmc/fea.hpp"

#include <cmath>
#include <cstring>

namespace mmc {

Eigen::MatrixXd constitutive_matrix(int dim, double nu) {
  if (dim == 2) {
    Eigen::Matrix3d D;
    D << 1, nu, 0, nu, 1, 0, 0, 0, (1 - nu) / 2;
    return D / (1 - nu * nu);
  }
  const double lam = nu / ((1 + nu) * (1 - 2 * nu));
  const double mu = 0.5 / (1 + nu);
  Eigen::MatrixXd D = Eigen::MatrixXd::Zero(6, 6);
  D.topLeftCorner<3, 3>().setConstant(lam);
  D.topLeftCorner<3, 3>().diagonal().array() += 2 * mu;
  D.bottomRightCorner<3, 3>().diagonal().setConstant(mu);
  return D;
}

namespace {

// Natural coordinates of the element corner nodes (matching element_nodes()).
constexpr double kXi2[4] = {-1, 1, 1, -1};
constexpr double kEta2[4] = {-1, -1, 1, 1};
constexpr double kXi3[8] = {-1, 1, 1, -1, -1, 1, 1, -1};
constexpr double kEta3[8] = {-1, -1, 1, 1, -1, -1, 1, 1};
constexpr double kZeta3[8] = {-1, -1, -1, -1, 1, 1, 1, 1};

Eigen::MatrixXd strain_matrix2(double xi, double eta, double hx, double hy) {
  Eigen::MatrixXd B = Eigen::MatrixXd::Zero(3, 8);
  for (int i = 0; i < 4; ++i) {
    const double dndx = kXi2[i] * (1 + eta * kEta2[i]) / 4 * (2 / hx);
    const double dndy = kEta2[i] * (1 + xi * kXi2[i]) / 4 * (2 / hy);
    B(0, 2 * i) = dndx;
    B(1, 2 * i + 1) = dndy;
    B(2, 2 * i) = dndy;
    B(2, 2 * i + 1) = dndx;
  }
  return B;
}

Eigen::MatrixXd strain_matrix3(double xi, double eta, double zeta, double hx,
                               double hy, double hz) {
  Eigen::MatrixXd B = Eigen::MatrixXd::Zero(6, 24);
  for (int i = 0; i < 8; ++i) {
    const double dndx =
        kXi3[i] * (1 + eta * kEta3[i]) * (1 + zeta * kZeta3[i]) / 8 * (2 / hx);
    const double dndy =
        kEta3[i] * (1 + xi * kXi3[i]) * (1 + zeta * kZeta3[i]) / 8 * (2 / hy);
    const double dndz =
        kZeta3[i] * (1 + xi * kXi3[i]) * (1 + eta * kEta3[i]) / 8 * (2 / hz);
    const int c = 3 * i;
    B(0, c) = dndx;      // xx
    B(1, c + 1) = dndy;  // yy
    B(2, c + 2) = dndz;  // zz
    B(3, c + 1) = dndz;  // yz
    B(3, c + 2) = dndy;
    B(4, c) = dndz;      // xz
    B(4, c + 2) = dndx;
    B(5, c) = dndy;      // xy
    B(5, c + 1) = dndx;
  }
  return B;
}

}  // namespace

// K0[j] is the unit-modulus stiffness contribution of background cell j:
// the exact integral of B^T D0 B over the cell (2x2 / 2x2x2 Gauss inside the
// cell, exact because B is multilinear there). At n_be = 1 this reduces to
// the textbook fully integrated quad/hex stiffness, so a ratio-1 analysis is
// the standard reference and carries no spurious zero-energy modes.
ElementTables element_tables(const HyperMesh& mesh, const MaterialSpec& mat) {
  mat.validate();
  ElementTables t;
  t.dim = mesh.dim();
  t.ndof = t.dim == 2 ? 8 : 24;
  t.ng = mesh.cells_per_element();
  t.D0 = constitutive_matrix(t.dim, mat.nu);
  t.B.reserve(size_t(t.ng));
  t.K0.reserve(size_t(t.ng));
  const double g = 1.0 / std::sqrt(3.0);
  const int np = t.dim == 2 ? 4 : 8;  // Gauss points per cell
  const double w = mesh.grid.cell_measure() / np;
  const double r = 1.0 / mesh.n_be;  // cell half-width in natural coords
  for (int j = 0; j < t.ng; ++j) {
    const Eigen::Vector3d c = mesh.integration_point(j);  // cell center
    Eigen::MatrixXd K = Eigen::MatrixXd::Zero(t.ndof, t.ndof);
    for (int q = 0; q < np; ++q) {
      const double xi = c[0] + r * g * (q & 1 ? 1 : -1);
      const double eta = c[1] + r * g * (q & 2 ? 1 : -1);
      const double zeta = c[2] + r * g * (q & 4 ? 1 : -1);
      const Eigen::MatrixXd Bq =
          t.dim == 2 ? strain_matrix2(xi, eta, mesh.hx(), mesh.hy())
                     : strain_matrix3(xi, eta, zeta, mesh.hx(), mesh.hy(),
                                      mesh.hz());
      K.noalias() += Bq.transpose() * t.D0 * Bq * w;
    }
    K = ((K + K.transpose()) / 2).eval();  // exact symmetry
    t.B.push_back(t.dim == 2
                      ? strain_matrix2(c[0], c[1], mesh.hx(), mesh.hy())
                      : strain_matrix3(c[0], c[1], c[2], mesh.hx(), mesh.hy(),
                                       mesh.hz()));
    t.K0.push_back(std::move(K));
  }
  return t;
}

double smeared_modulus(std::span<const double> corner_phi,
                       const MaterialSpec& mat,
                       const RegularizationParams& reg) {
  if (corner_phi.size() != 4 && corner_phi.size() != 8)
    throw std::invalid_argument("smeared_modulus: need 4 or 8 corner values");
  double acc = 0;
  for (double p : corner_phi) {
    const double h = heaviside_reg(p, reg.epsilon, reg.alpha_min);
    acc += mat.q_penal == 2.0 ? h * h : std::pow(h, mat.q_penal);
  }
  return mat.E * acc / double(corner_phi.size());
}

namespace {

// Smeared modulus from precomputed Heaviside values (the assembly hot path;
// identical to smeared_modulus because hval stores H(phi) per node).
inline double cell_modulus(const BackgroundGrid& grid, const TdfField& field,
                           const MaterialSpec& mat, long cell,
                           std::array<long, 8>& scratch) {
  const int nc = grid.cell_nodes(cell, scratch);
  double acc = 0;
  if (mat.q_penal == 2.0) {
    for (int e = 0; e < nc; ++e) {
      const double h = field.h_at(scratch[size_t(e)]);
      acc += h * h;
    }
  } else {
    for (int e = 0; e < nc; ++e)
      acc += std::pow(field.h_at(scratch[size_t(e)]), mat.q_penal);
  }
  return mat.E * acc / nc;
}

}  // namespace

Eigen::MatrixXd hyper_element_stiffness(const HyperMesh& mesh,
                                        const ElementTables& tables,
                                        const TdfField& field,
                                        const MaterialSpec& mat, long elem) {
  if (elem < 0 || elem >= mesh.element_count())
    throw std::invalid_argument("hyper_element_stiffness: element out of range");
  Eigen::MatrixXd K = Eigen::MatrixXd::Zero(tables.ndof, tables.ndof);
  std::array<long, 8> scratch;
  for (int j = 0; j < tables.ng; ++j) {
    const long cell = mesh.owned_cell(elem, j);
    K += cell_modulus(mesh.grid, field, mat, cell, scratch) * tables.K0[size_t(j)];
  }
  return K;
}

GlobalSystem assemble(const HyperMesh& mesh, const ElementTables& tables,
                      const TdfField& field, const MaterialSpec& mat) {
  if (field.num_nodes != mesh.grid.node_count())
    throw std::invalid_argument("assemble: field does not match the background grid");
  const int dim = mesh.dim();
  const int ndof = tables.ndof;
  const int nen = ndof / dim;

  GlobalSystem sys;
  sys.n_dofs = mesh.dof_count();
  sys.field_hash = field.content_hash;

  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(size_t(mesh.element_count()) * size_t(ndof) * size_t(ndof));
  Eigen::MatrixXd Ke(ndof, ndof);
  std::array<long, 8> enodes{};
  std::array<long, 8> scratch{};
  std::array<int, 24> edofs{};

  for (long e = 0; e < mesh.element_count(); ++e) {
    Ke.setZero();
    for (int j = 0; j < tables.ng; ++j) {
      const long cell = mesh.owned_cell(e, j);
      const double Em = cell_modulus(mesh.grid, field, mat, cell, scratch);
      Ke.noalias() += Em * tables.K0[size_t(j)];
    }
    mesh.element_nodes(e, enodes);
    for (int a = 0; a < nen; ++a)
      for (int d = 0; d < dim; ++d)
        edofs[size_t(a * dim + d)] = int(enodes[size_t(a)] * dim + d);
    for (int r = 0; r < ndof; ++r)
      for (int c = 0; c < ndof; ++c)
        trips.emplace_back(edofs[size_t(r)], edofs[size_t(c)], Ke(r, c));
  }
  sys.K.resize(sys.n_dofs, sys.n_dofs);
  sys.K.setFromTriplets(trips.begin(), trips.end());
  return sys;
}

namespace {

// Integral of the two linear edge shape functions over the overlap of
// [a, a+h] with [c0, c1], as weights for the edge's begin/end nodes.
std::pair<double, double> edge_weights(double a, double h, double c0, double c1) {
  const double lo = std::max(a, c0), hi = std::min(a + h, c1);
  if (hi <= lo) return {0.0, 0.0};
  const double u0 = (lo - a) / h, u1 = (hi - a) / h;
  const double iu = (u1 * u1 - u0 * u0) / 2;  // integral of u
  return {h * ((u1 - u0) - iu), h * iu};
}

}  // namespace

Eigen::VectorXd distribute_load(const LoadCase& lc, const HyperMesh& mesh) {
  const int dim = mesh.dim();
  Eigen::VectorXd f = Eigen::VectorXd::Zero(mesh.dof_count());

  for (const PointLoadAt& pl : lc.point_loads) {
    if (pl.dir < 0 || pl.dir >= dim)
      throw std::invalid_argument("point load direction out of range");
    const double tol = 1e-9 * (mesh.grid.lx + mesh.grid.ly + mesh.grid.lz);
    if (pl.pos[0] < -tol || pl.pos[0] > mesh.grid.lx + tol || pl.pos[1] < -tol ||
        pl.pos[1] > mesh.grid.ly + tol ||
        (dim == 3 && (pl.pos[2] < -tol || pl.pos[2] > mesh.grid.lz + tol)))
      throw std::invalid_argument("point load outside the domain");
    auto elem_of = [](double v, double h, int n) {
      int i = int(std::floor(v / h));
      return std::clamp(i, 0, n - 1);
    };
    const int I = elem_of(pl.pos[0], mesh.hx(), mesh.ex);
    const int J = elem_of(pl.pos[1], mesh.hy(), mesh.ey);
    const int K = dim == 3 ? elem_of(pl.pos[2], mesh.hz(), mesh.ez) : 0;
    const double xi = 2 * (pl.pos[0] - I * mesh.hx()) / mesh.hx() - 1;
    const double eta = 2 * (pl.pos[1] - J * mesh.hy()) / mesh.hy() - 1;
    const double zeta = dim == 3 ? 2 * (pl.pos[2] - K * mesh.hz()) / mesh.hz() - 1 : 0;
    std::array<long, 8> enodes{};
    const int nen = mesh.element_nodes(mesh.element_id(I, J, K), enodes);
    for (int i = 0; i < nen; ++i) {
      double N;
      if (dim == 2) {
        N = (1 + xi * kXi2[i]) * (1 + eta * kEta2[i]) / 4;
      } else {
        N = (1 + xi * kXi3[i]) * (1 + eta * kEta3[i]) * (1 + zeta * kZeta3[i]) / 8;
      }
      f[enodes[size_t(i)] * dim + pl.dir] += N * pl.value;
    }
  }

  for (const TractionSpec& tr : lc.tractions) {
    if (tr.dir < 0 || tr.dir >= dim)
      throw std::invalid_argument("traction direction out of range");
    const bool xface = tr.side == Side::xmin || tr.side == Side::xmax;
    const bool yface = tr.side == Side::ymin || tr.side == Side::ymax;
    const bool zface = tr.side == Side::zmin || tr.side == Side::zmax;
    if (dim == 2 && zface)
      throw std::invalid_argument("z-side traction on a 2D mesh");

    if (dim == 2) {
      // Boundary edge along x (y-sides) or along y (x-sides).
      const bool along_x = yface;
      const int n_el = along_x ? mesh.ex : mesh.ey;
      const double h = along_x ? mesh.hx() : mesh.hy();
      const double full = along_x ? mesh.grid.lx : mesh.grid.ly;
      const double r0 = tr.r1 < tr.r0 ? 0.0 : tr.r0;
      const double r1 = tr.r1 < tr.r0 ? full : tr.r1;
      const int ifix = tr.side == Side::xmax ? mesh.ex
                       : tr.side == Side::ymax ? mesh.ey
                                               : 0;
      for (int q = 0; q < n_el; ++q) {
        auto [wa, wb] = edge_weights(q * h, h, r0, r1);
        if (wa == 0 && wb == 0) continue;
        const long na = along_x ? mesh.hnode_id(q, ifix) : mesh.hnode_id(ifix, q);
        const long nb =
            along_x ? mesh.hnode_id(q + 1, ifix) : mesh.hnode_id(ifix, q + 1);
        f[na * dim + tr.dir] += tr.density * wa;
        f[nb * dim + tr.dir] += tr.density * wb;
      }
    } else {
      // Face axes: x-sides span (y, z), y-sides (x, z), z-sides (x, y).
      const int ar = xface ? 1 : 0;
      const int as = yface || xface ? 2 : 1;
      const int n_r = ar == 0 ? mesh.ex : mesh.ey;
      const int n_s = as == 1 ? mesh.ey : mesh.ez;
      const double hr = ar == 0 ? mesh.hx() : mesh.hy();
      const double hs = as == 1 ? mesh.hy() : mesh.hz();
      const double fullr = ar == 0 ? mesh.grid.lx : mesh.grid.ly;
      const double fulls = as == 1 ? mesh.grid.ly : mesh.grid.lz;
      const double r0 = tr.r1 < tr.r0 ? 0.0 : tr.r0;
      const double r1 = tr.r1 < tr.r0 ? fullr : tr.r1;
      const double s0 = tr.s1 < tr.s0 ? 0.0 : tr.s0;
      const double s1 = tr.s1 < tr.s0 ? fulls : tr.s1;
      int fixv = 0;
      if (tr.side == Side::xmax) fixv = mesh.ex;
      if (tr.side == Side::ymax) fixv = mesh.ey;
      if (tr.side == Side::zmax) fixv = mesh.ez;
      auto node_at = [&](int r, int s) {
        if (xface) return mesh.hnode_id(fixv, r, s);
        if (yface) return mesh.hnode_id(r, fixv, s);
        return mesh.hnode_id(r, s, fixv);
      };
      for (int qs = 0; qs < n_s; ++qs) {
        auto [wsa, wsb] = edge_weights(qs * hs, hs, s0, s1);
        if (wsa == 0 && wsb == 0) continue;
        for (int qr = 0; qr < n_r; ++qr) {
          auto [wra, wrb] = edge_weights(qr * hr, hr, r0, r1);
          if (wra == 0 && wrb == 0) continue;
          f[node_at(qr, qs) * dim + tr.dir] += tr.density * wra * wsa;
          f[node_at(qr + 1, qs) * dim + tr.dir] += tr.density * wrb * wsa;
          f[node_at(qr, qs + 1) * dim + tr.dir] += tr.density * wra * wsb;
          f[node_at(qr + 1, qs + 1) * dim + tr.dir] += tr.density * wrb * wsb;
        }
      }
    }
  }
  return f;
}

FeaSolution solve(const GlobalSystem& sys, const Eigen::VectorXd& f,
                  const std::vector<long>& fixed_dofs, const SolverOptions& opt,
                  DirectCache* cache) {
  const long n = sys.n_dofs;
  if (f.size() != n) throw std::invalid_argument("solve: force vector size mismatch");

  std::vector<char> is_fixed(size_t(n), 0);
  for (long d : fixed_dofs) {
    if (d < 0 || d >= n) throw std::invalid_argument("solve: fixed dof out of range");
    is_fixed[size_t(d)] = 1;
  }
  std::vector<int32_t> newid(size_t(n), -1);
  long nf = 0;
  for (long d = 0; d < n; ++d)
    if (!is_fixed[size_t(d)]) newid[size_t(d)] = int32_t(nf++);
  if (nf == 0) throw std::invalid_argument("solve: all dofs fixed");

  Eigen::SparseMatrix<double> Kff(nf, nf);
  {
    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(size_t(sys.K.nonZeros()));
    for (long c = 0; c < n; ++c) {
      if (newid[size_t(c)] < 0) continue;
      for (Eigen::SparseMatrix<double>::InnerIterator it(sys.K, c); it; ++it) {
        const int32_t r = newid[size_t(it.row())];
        if (r >= 0) trips.emplace_back(r, newid[size_t(c)], it.value());
      }
    }
    Kff.setFromTriplets(trips.begin(), trips.end());
  }
  Eigen::VectorXd ff(nf);
  for (long d = 0; d < n; ++d)
    if (newid[size_t(d)] >= 0) ff[newid[size_t(d)]] = f[d];

  FeaSolution sol;
  sol.field_hash = sys.field_hash;
  Eigen::VectorXd uf;
  if (nf <= opt.direct_dof_cap) {
    sol.used_direct = true;
    DirectCache local;
    DirectCache& dc = cache ? *cache : local;
    if (!dc.analyzed) {
      dc.ldlt.analyzePattern(Kff);
      dc.analyzed = true;
    }
    dc.ldlt.factorize(Kff);
    if (dc.ldlt.info() != Eigen::Success)
      throw std::runtime_error("solve: direct factorization failed (singular system?)");
    uf = dc.ldlt.solve(ff);
    sol.rel_residual = (Kff * uf - ff).norm() / std::max(1e-300, ff.norm());
    // LDLT can "succeed" on a floating structure (tiny pivots, garbage u);
    // the residual is the reliable witness.
    if (!(sol.rel_residual <= 1e-6))
      throw std::runtime_error(
          "solve: direct solve residual too large (singular system?)");
  } else {
    sol.used_direct = false;
    Eigen::ConjugateGradient<Eigen::SparseMatrix<double>,
                             Eigen::Lower | Eigen::Upper,
                             Eigen::DiagonalPreconditioner<double>>
        cg;
    cg.setTolerance(opt.cg_tol);
    cg.setMaxIterations(opt.cg_max_iters);
    cg.compute(Kff);
    uf = cg.solve(ff);
    sol.iterations = cg.iterations();
    sol.rel_residual = cg.error();
    if (cg.info() != Eigen::Success)
      throw std::runtime_error("solve: conjugate gradients did not converge");
  }

  sol.u = Eigen::VectorXd::Zero(n);
  for (long d = 0; d < n; ++d)
    if (newid[size_t(d)] >= 0) sol.u[d] = uf[newid[size_t(d)]];
  sol.compliance = f.dot(sol.u);
  return sol;
}

VolumeResult volume(const TdfField& field, const BackgroundGrid& grid) {
  if (field.num_nodes != grid.node_count())
    throw std::invalid_argument("volume: field does not match the grid");
  const double ag = grid.cell_measure();
  const int corners = grid.dim == 2 ? 4 : 8;
  const double vd = ag * double(grid.cell_count());

  // Nodal form: each cell averages its corner H values, so a node with m
  // adjacent cells carries weight m / corners.
  double acc = 0;
  for (long s = 0; s < field.slot_count(); ++s) {
    int i, j, k;
    grid.node_ijk(field.node_of_slot[size_t(s)], i, j, k);
    const int mi = (i > 0 && i < grid.nx) ? 2 : 1;
    const int mj = (j > 0 && j < grid.ny) ? 2 : 1;
    const int mk = grid.dim == 3 ? ((k > 0 && k < grid.nz) ? 2 : 1) : 1;
    acc += double(mi * mj * mk) * (field.hval[size_t(s)] - field.alpha_min);
  }
  VolumeResult v;
  v.raw = field.alpha_min * vd + ag * acc / corners;
  v.floor_corrected = (v.raw - field.alpha_min * vd) / (1 - field.alpha_min);
  return v;
}

}  // namespace mmc
