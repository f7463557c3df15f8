// Result writers: iteration history and component tables as CSV, the nodal
// density field as PGM (2D) or legacy VTK structured points (2D/3D), and a
// one-object JSON run summary.
#pragma once

#include <Eigen/Core>

#include <string>
#include <vector>

#include "mmc/driver.hpp"
#include "mmc/geometry.hpp"
#include "mmc/mesh.hpp"

namespace mmc {

// Doubles are printed with enough digits that a read round-trips bit for bit.
void write_history_csv(const std::string& path,
                       const std::vector<IterRecord>& hist);
std::vector<IterRecord> read_history_csv(const std::string& path);

// One component per row; the header fixes the parameter order per dimension.
void write_components_csv(const std::string& path,
                          const Eigen::VectorXd& design, int dim);
Eigen::VectorXd read_components_csv(const std::string& path,
                                    int* dim_out = nullptr);

// 8-bit binary PGM of nodal H, white = solid, top image row = y = ly. 2D only.
void write_field_pgm(const std::string& path, const BackgroundGrid& grid,
                     const TdfField& field);

// Legacy ASCII VTK structured-points file with nodal H as point data.
void write_field_vtk(const std::string& path, const BackgroundGrid& grid,
                     const TdfField& field);

void write_summary_json(const std::string& path, const ProblemDef& def,
                        const RunParams& params, const RunResult& result);

}  // namespace mmc
