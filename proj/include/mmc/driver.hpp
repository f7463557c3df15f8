// Optimization driver: problem presets, initial component layouts, the
// iterate-until-converged loop, and fixed-design reanalysis at other
// resolution ratios.
#pragma once

#include <Eigen/Dense>

#include <span>
#include <string>
#include <vector>

#include "mmc/fea.hpp"
#include "mmc/geometry.hpp"
#include "mmc/mesh.hpp"
#include "mmc/mma.hpp"

namespace mmc {

// Initial layout: a grid of layout cells, each holding crossing pairs of
// components along the cell diagonals (2D) or the four space diagonals (3D).
// Thickness is sized so the initial material roughly matches the volume
// budget.
struct LayoutParams {
  int cx = 4, cy = 2, cz = 1;
  int pairs = 2;             // 2D: components per cell = 2 * pairs
  double size_scale = 1.0;   // scales component half-length
  double thickness_scale = 1.0;
};

struct SupportSpec {
  bool whole_side = true;
  Side side = Side::xmin;
  Eigen::Vector3d pos{0, 0, 0};          // point support when !whole_side
  std::array<bool, 3> fix{true, true, true};
};

struct ProblemDef {
  std::string name = "custom";
  int dim = 2;
  double lx = 1, ly = 1, lz = 0;
  int nx = 1, ny = 1, nz = 0;  // background cells
  int n_be = 1;                // resolution ratio (background cells per hyper edge)
  int nsx = 1, nsy = 1, nsz = 1;
  double vol_frac = 0.4;
  MaterialSpec material;
  std::vector<PointLoadAt> point_loads;
  std::vector<TractionSpec> tractions;
  std::vector<SupportSpec> supports;
  std::vector<long> forced_solid_cells;  // background cell ids
  std::vector<long> forced_void_cells;
  LayoutParams layout;
};

struct RunParams {
  double eps_cells = 2.0;   // epsilon = eps_cells * min background cell edge
  double alpha_min = 1e-3;
  double ks_l = 100.0;
  int p_exp = 6;
  double move_frac = 0.1;   // move limit as fraction of bound range
  double move_angle = 0.1;  // radians per step
  double size_floor = 0.0;  // 0 -> 1e-3 * min domain edge
  double size_ceil = 0.0;   // half-length cap, 0 -> 0.5 * max domain edge
  double thick_ceil = 0.0;  // 2D half-thickness cap, 0 -> 0.25 * min edge
  int max_iters = 1000;
  double conv_tol = 5e-4;
  int conv_window = 5;
  int conv_start = 5;
  SolverOptions solver;
  MmaOptions mma;
  bool post_analysis = true;  // background-mesh reanalysis of the final design
  bool deterministic = true;  // bit-identical artifacts: history timing fields
                              // are zeroed (disable to collect timing tables)
  int threads = 1;
  int log_every = 0;  // stderr progress cadence, 0 = silent
};

struct IterRecord {
  int iter = 0;
  double compliance = 0;
  double volume = 0;      // raw
  double vol_limit = 0;
  double t_tdf = 0, t_fea = 0, t_sen = 0, t_mma = 0, t_total = 0;
};

struct RunResult {
  int dim = 2;
  std::vector<IterRecord> history;
  bool converged = false;
  int iterations = 0;
  double c_obj = 0;     // final compliance on the hyper mesh
  double v_final = 0;   // raw volume of the final design
  bool has_post = false;
  double c_post = 0;    // compliance of the final design on the background mesh
  double rel_error = 0; // |c_post - c_obj| / c_post
  Eigen::VectorXd design;
  double seconds = 0;
};

// Rolling window over the last few (compliance, volume) pairs.
class ConvergenceWindow {
 public:
  explicit ConvergenceWindow(int size) : size_(size) {}
  void push(double c, double v);
  bool full() const { return long(c_.size()) == size_; }
  double mean_c() const;
  double mean_v() const;

 private:
  int size_;
  std::vector<double> c_, v_;  // most recent last
};

// Converged when the newest compliance and volume sit within conv_tol of
// their window means and the volume satisfies its limit.
bool convergence_reached(const ConvergenceWindow& w, double c_now, double v_now,
                         double v_limit, double tol);

BackgroundGrid problem_grid(const ProblemDef& p);
std::vector<Component2d> initial_layout2(const ProblemDef& p);
std::vector<Component3d> initial_layout3(const ProblemDef& p);
LoadCase materialize_loads(const ProblemDef& p, const HyperMesh& mesh);
TdfOverrides materialize_overrides(const ProblemDef& p,
                                   const BackgroundGrid& grid);

RunResult run(const ProblemDef& p, const RunParams& params);

// Compliance of a fixed design analyzed with an n_be-ratio hyper mesh.
double analyze_compliance(const ProblemDef& p, const RunParams& params,
                          const Eigen::VectorXd& design, int n_be);

struct LadderRow {
  int ratio = 1;
  double compliance = 0;
  double rel_err = 0;  // against the ratio-1 value
};
std::vector<LadderRow> reanalysis_ladder(const ProblemDef& p,
                                         const RunParams& params,
                                         const Eigen::VectorXd& design,
                                         std::span<const int> ratios);

struct StudyRow {
  int ratio = 1;
  RunResult result;
};
std::vector<StudyRow> resolution_study(const ProblemDef& p,
                                       const RunParams& params,
                                       std::span<const int> ratios);

// Built-in problems: "cantilever2d", "mbb2d", "distributed2d", "box3d".
ProblemDef preset_problem(const std::string& name);
std::vector<std::string> preset_names();

}  // namespace mmc
