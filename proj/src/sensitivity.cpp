#include "mmc/sensitivity.hpp"

#include <cmath>

namespace mmc {

namespace {

// Unit strain energies per background cell: s[cell] = u_e^T K0_j u_e for the
// integration point sitting in that cell (modulus and penalty excluded).
std::vector<double> cell_unit_energies(const HyperMesh& mesh,
                                       const ElementTables& tables,
                                       const Eigen::VectorXd& u) {
  const int dim = mesh.dim();
  const int nen = tables.ndof / dim;
  std::vector<double> s(size_t(mesh.grid.cell_count()), 0.0);
  Eigen::VectorXd ue(tables.ndof);
  std::array<long, 8> enodes{};
  for (long e = 0; e < mesh.element_count(); ++e) {
    mesh.element_nodes(e, enodes);
    for (int a = 0; a < nen; ++a)
      for (int d = 0; d < dim; ++d)
        ue[a * dim + d] = u[enodes[size_t(a)] * dim + d];
    for (int j = 0; j < tables.ng; ++j)
      s[size_t(mesh.owned_cell(e, j))] = ue.dot(tables.K0[size_t(j)] * ue);
  }
  return s;
}

// Sum of a cell quantity over the cells adjacent to a node.
double adjacent_cell_sum(const BackgroundGrid& grid, long node,
                         const std::vector<double>& s, int& m_out) {
  int i, j, k;
  grid.node_ijk(node, i, j, k);
  const int i0 = std::max(i - 1, 0), i1 = std::min(i, grid.nx - 1);
  const int j0 = std::max(j - 1, 0), j1 = std::min(j, grid.ny - 1);
  const int k0 = grid.dim == 3 ? std::max(k - 1, 0) : 0;
  const int k1 = grid.dim == 3 ? std::min(k, grid.nz - 1) : 0;
  double acc = 0;
  int m = 0;
  for (int kk = k0; kk <= k1; ++kk)
    for (int jj = j0; jj <= j1; ++jj)
      for (int ii = i0; ii <= i1; ++ii) {
        acc += s[size_t(grid.cell_id(ii, jj, kk))];
        ++m;
      }
  m_out = m;
  return acc;
}

template <typename Comp>
Eigen::VectorXd accumulate_gradient(std::span<const Comp> comps,
                                    const TdfField& field,
                                    const BackgroundGrid& grid,
                                    const RegularizationParams& reg,
                                    const SensitivityOptions& opt,
                                    // factor(node, slot, m_adjacent) -> dX/dH
                                    auto&& dX_dH) {
  constexpr int vpc = std::is_same_v<Comp, Component2d> ? 6 : 9;
  Eigen::VectorXd g = Eigen::VectorXd::Zero(long(comps.size()) * vpc);
  for (long s = 0; s < field.slot_count(); ++s) {
    const double hd = field.hderiv[size_t(s)];
    if (!opt.all_stored_nodes && hd == 0.0) continue;
    const long node = field.node_of_slot[size_t(s)];
    const double factor = dX_dH(node, s) * hd;
    const Eigen::Vector3d pos = grid.node_pos(node);
    for (int64_t o = field.offsets[size_t(s)]; o < field.offsets[size_t(s) + 1];
         ++o) {
      const int32_t ci = field.contrib_comp[size_t(o)];
      const double w = field.contrib_weight[size_t(o)];
      if constexpr (std::is_same_v<Comp, Component2d>) {
        const Eigen::Matrix<double, 6, 1> part =
            tdf_partials(comps[size_t(ci)], pos.head<2>(), reg.p_exp);
        g.segment<6>(long(ci) * 6) += factor * w * part;
      } else {
        const Eigen::Matrix<double, 9, 1> part =
            tdf_partials(comps[size_t(ci)], pos, reg.p_exp);
        g.segment<9>(long(ci) * 9) += factor * w * part;
      }
    }
  }
  return g;
}

template <typename Comp>
Eigen::VectorXd compliance_gradient_impl(std::span<const Comp> comps,
                                         const TdfField& field,
                                         const HyperMesh& mesh,
                                         const ElementTables& tables,
                                         const MaterialSpec& mat,
                                         const RegularizationParams& reg,
                                         const FeaSolution& sol,
                                         const SensitivityOptions& opt) {
  if (sol.field_hash != field.content_hash)
    throw std::invalid_argument(
        "compliance_gradient: solution is stale (solved on a different field)");
  if (sol.u.size() != mesh.dof_count())
    throw std::invalid_argument("compliance_gradient: solution size mismatch");
  const std::vector<double> s = cell_unit_energies(mesh, tables, sol.u);
  const int corners = mesh.dim() == 2 ? 4 : 8;
  auto dC_dH = [&](long node, long slot) {
    const double h = field.hval[size_t(slot)];
    const double hq1 =
        mat.q_penal == 2.0 ? h : std::pow(h, mat.q_penal - 1.0);
    int m;
    const double energy = adjacent_cell_sum(mesh.grid, node, s, m);
    return -mat.E * mat.q_penal * hq1 / corners * energy;
  };
  return accumulate_gradient(comps, field, mesh.grid, reg, opt, dC_dH);
}

template <typename Comp>
Eigen::VectorXd volume_gradient_impl(std::span<const Comp> comps,
                                     const TdfField& field,
                                     const BackgroundGrid& grid,
                                     const RegularizationParams& reg,
                                     const SensitivityOptions& opt) {
  const int corners = grid.dim == 2 ? 4 : 8;
  const double ag = grid.cell_measure();
  auto dV_dH = [&](long node, long) {
    int i, j, k;
    grid.node_ijk(node, i, j, k);
    const int mi = (i > 0 && i < grid.nx) ? 2 : 1;
    const int mj = (j > 0 && j < grid.ny) ? 2 : 1;
    const int mk = grid.dim == 3 ? ((k > 0 && k < grid.nz) ? 2 : 1) : 1;
    return ag * double(mi * mj * mk) / corners;
  };
  return accumulate_gradient(comps, field, grid, reg, opt, dV_dH);
}

}  // namespace

Eigen::VectorXd compliance_gradient(std::span<const Component2d> comps,
                                    const TdfField& field, const HyperMesh& mesh,
                                    const ElementTables& tables,
                                    const MaterialSpec& mat,
                                    const RegularizationParams& reg,
                                    const FeaSolution& sol,
                                    const SensitivityOptions& opt) {
  return compliance_gradient_impl(comps, field, mesh, tables, mat, reg, sol, opt);
}

Eigen::VectorXd compliance_gradient(std::span<const Component3d> comps,
                                    const TdfField& field, const HyperMesh& mesh,
                                    const ElementTables& tables,
                                    const MaterialSpec& mat,
                                    const RegularizationParams& reg,
                                    const FeaSolution& sol,
                                    const SensitivityOptions& opt) {
  return compliance_gradient_impl(comps, field, mesh, tables, mat, reg, sol, opt);
}

Eigen::VectorXd volume_gradient(std::span<const Component2d> comps,
                                const TdfField& field, const BackgroundGrid& grid,
                                const RegularizationParams& reg,
                                const SensitivityOptions& opt) {
  return volume_gradient_impl(comps, field, grid, reg, opt);
}

Eigen::VectorXd volume_gradient(std::span<const Component3d> comps,
                                const TdfField& field, const BackgroundGrid& grid,
                                const RegularizationParams& reg,
                                const SensitivityOptions& opt) {
  return volume_gradient_impl(comps, field, grid, reg, opt);
}

}  // namespace mmc
