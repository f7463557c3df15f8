// Finite element analysis on the coarse hyper-element mesh: each element's
// stiffness is integrated with one point per owned background cell, weighted
// by the penalized smeared modulus of that cell, so the displacement mesh
// stays coarse while the geometry stays fine.
#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <array>
#include <memory>
#include <span>
#include <vector>

#include "mmc/geometry.hpp"
#include "mmc/mesh.hpp"

namespace mmc {

struct MaterialSpec {
  double E = 1.0;       // solid Young's modulus
  double nu = 0.3;      // Poisson's ratio
  double q_penal = 2.0; // modulus penalization exponent

  void validate() const {
    if (!(E > 0)) throw std::invalid_argument("E must be > 0");
    if (!(nu > -1.0) || !(nu < 0.5))
      throw std::invalid_argument("nu must be in (-1, 0.5)");
    if (!(q_penal >= 1.0)) throw std::invalid_argument("q_penal must be >= 1");
  }
};

// Unit-modulus constitutive matrix: plane stress (3x3, unit thickness) in 2D,
// isotropic Voigt with engineering shear strains (6x6) in 3D.
Eigen::MatrixXd constitutive_matrix(int dim, double nu);

// Tables shared by every hyper-element of a uniform mesh: strain-displacement
// matrices sampled at the owned background cell centers, and per cell the
// exact unit-modulus integral of B^T D0 B over that cell (at n_be = 1 this is
// the textbook fully integrated element). K0[j] is symmetrized exactly.
struct ElementTables {
  int dim = 2;
  int ndof = 8;  // 8 in 2D, 24 in 3D
  int ng = 1;    // integration points = owned cells per element
  Eigen::MatrixXd D0;
  std::vector<Eigen::MatrixXd> B;   // (3 x ndof) or (6 x ndof)
  std::vector<Eigen::MatrixXd> K0;  // ndof x ndof
};
ElementTables element_tables(const HyperMesh& mesh, const MaterialSpec& mat);

// Penalized smeared modulus of a background cell from its corner TDF values:
// E * mean(H(phi_corner)^q).
double smeared_modulus(std::span<const double> corner_phi,
                       const MaterialSpec& mat, const RegularizationParams& reg);

// Stiffness of one hyper-element: sum over owned background cells of the
// cell's smeared modulus times the unit-modulus integration-point stiffness.
Eigen::MatrixXd hyper_element_stiffness(const HyperMesh& mesh,
                                        const ElementTables& tables,
                                        const TdfField& field,
                                        const MaterialSpec& mat, long elem);

// Assembled global stiffness, unconstrained (positive semi-definite until
// Dirichlet elimination). Tags the field it was built from.
struct GlobalSystem {
  long n_dofs = 0;
  Eigen::SparseMatrix<double> K;
  uint64_t field_hash = 0;
};
GlobalSystem assemble(const HyperMesh& mesh, const ElementTables& tables,
                      const TdfField& field, const MaterialSpec& mat);

// Loads and supports resolved against the hyper mesh.
enum class Side { xmin, xmax, ymin, ymax, zmin, zmax };

struct PointLoadAt {
  Eigen::Vector3d pos{0, 0, 0};
  int dir = 0;
  double value = 0;
};
// Constant traction density on a boundary strip: [r0, r1] spans the first
// in-face axis, [s0, s1] the second (3D faces only). r1 < r0 means the full
// extent, same for s.
struct TractionSpec {
  Side side = Side::ymax;
  int dir = 0;
  double density = 0;
  double r0 = 0, r1 = -1;
  double s0 = 0, s1 = -1;
};
struct LoadCase {
  std::vector<PointLoadAt> point_loads;
  std::vector<TractionSpec> tractions;
  std::vector<long> fixed_dofs;  // hyper dof ids (node * dim + dir)
};

// Consistent nodal force vector: point loads spread by the shape functions of
// the containing element, tractions integrated exactly against the boundary
// shape functions.
Eigen::VectorXd distribute_load(const LoadCase& lc, const HyperMesh& mesh);

struct SolverOptions {
  long direct_dof_cap = 300000;  // direct factorization at or below this size
  double cg_tol = 1e-8;          // relative residual
  long cg_max_iters = 200000;
};

struct FeaSolution {
  Eigen::VectorXd u;       // full dof vector, zero on fixed dofs
  double compliance = 0;   // f . u
  bool used_direct = true;
  long iterations = 0;     // CG iterations (0 for direct)
  double rel_residual = 0;
  uint64_t field_hash = 0;
};

// Reusable direct factorization: the sparsity pattern is analyzed once and
// only refactorized on later calls. Callers must keep mesh topology and
// fixed-dof set unchanged across calls on the same cache.
class DirectCache {
 public:
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt;
  bool analyzed = false;
};

// Eliminates the fixed dofs, solves the reduced system (direct at or below
// direct_dof_cap dofs, diagonally preconditioned conjugate gradients above),
// and scatters back. Throws on singular or non-converged systems.
FeaSolution solve(const GlobalSystem& sys, const Eigen::VectorXd& f,
                  const std::vector<long>& fixed_dofs,
                  const SolverOptions& opt = {}, DirectCache* cache = nullptr);

// Structure volume from the nodal Heaviside field: raw integrates H as is
// (includes the ersatz floor everywhere), floor_corrected rescales the floor
// away: (raw - alpha*V_domain) / (1 - alpha).
struct VolumeResult {
  double raw = 0;
  double floor_corrected = 0;
};
VolumeResult volume(const TdfField& field, const BackgroundGrid& grid);

}  // namespace mmc
