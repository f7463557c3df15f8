// Analytic design gradients: compliance via the self-adjoint identity
// dC = -u^T (dK/dd) u, volume via the nodal Heaviside chain. Both chains
// pass through the aggregation weights and the per-component TDF partials,
// and both are nonzero only inside the boundary band where H' is nonzero.
#pragma once

#include <Eigen/Dense>

#include <span>

#include "mmc/fea.hpp"
#include "mmc/geometry.hpp"
#include "mmc/mesh.hpp"

namespace mmc {

struct SensitivityOptions {
  // Traverse every stored node instead of only the boundary band. The result
  // is identical (H' vanishes off the band); exists to exercise that locality.
  bool all_stored_nodes = false;
};

// Gradient of compliance with respect to the flattened design vector.
// Rejects solutions computed on a different field (hash mismatch).
Eigen::VectorXd compliance_gradient(std::span<const Component2d> comps,
                                    const TdfField& field, const HyperMesh& mesh,
                                    const ElementTables& tables,
                                    const MaterialSpec& mat,
                                    const RegularizationParams& reg,
                                    const FeaSolution& sol,
                                    const SensitivityOptions& opt = {});
Eigen::VectorXd compliance_gradient(std::span<const Component3d> comps,
                                    const TdfField& field, const HyperMesh& mesh,
                                    const ElementTables& tables,
                                    const MaterialSpec& mat,
                                    const RegularizationParams& reg,
                                    const FeaSolution& sol,
                                    const SensitivityOptions& opt = {});

// Gradient of the raw structure volume with respect to the design vector.
Eigen::VectorXd volume_gradient(std::span<const Component2d> comps,
                                const TdfField& field,
                                const BackgroundGrid& grid,
                                const RegularizationParams& reg,
                                const SensitivityOptions& opt = {});
Eigen::VectorXd volume_gradient(std::span<const Component3d> comps,
                                const TdfField& field,
                                const BackgroundGrid& grid,
                                const RegularizationParams& reg,
                                const SensitivityOptions& opt = {});

}  // namespace mmc
