#include "mmc/driver.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "mmc/sensitivity.hpp"

namespace mmc {

namespace {

double now_seconds() {
  using clock = std::chrono::steady_clock;
  return std::chrono::duration<double>(clock::now().time_since_epoch()).count();
}

// Deterministic mode promises bit-identical histories across identical runs,
// so the wall-clock fields are zeroed; RunResult.seconds keeps real time.
IterRecord scrub_timings(IterRecord rec) {
  rec.t_tdf = rec.t_fea = rec.t_sen = rec.t_mma = rec.t_total = 0.0;
  return rec;
}

// Area of the unit hyperellipse |x|^p + |y|^p <= 1 for p = 6, and the volume
// of the unit hyperellipsoid: 4*Gamma(1+1/p)^2/Gamma(1+2/p) and
// 8*Gamma(1+1/p)^3/Gamma(1+3/p).
double superellipse_area_factor(int p) {
  const double g1 = std::tgamma(1.0 + 1.0 / p);
  return 4.0 * g1 * g1 / std::tgamma(1.0 + 2.0 / p);
}
double superellipsoid_volume_factor(int p) {
  const double g1 = std::tgamma(1.0 + 1.0 / p);
  return 8.0 * g1 * g1 * g1 / std::tgamma(1.0 + 3.0 / p);
}

RegularizationParams make_reg(const RunParams& rp, const BackgroundGrid& grid) {
  RegularizationParams reg;
  reg.epsilon = rp.eps_cells * grid.min_cell_edge();
  reg.alpha_min = rp.alpha_min;
  reg.ks_l = rp.ks_l;
  reg.p_exp = rp.p_exp;
  reg.validate();
  return reg;
}

void size_limits(const ProblemDef& p, const RunParams& rp, double& floor,
                 double& ceil, double& thick) {
  const double min_edge =
      p.dim == 3 ? std::min({p.lx, p.ly, p.lz}) : std::min(p.lx, p.ly);
  const double max_edge =
      p.dim == 3 ? std::max({p.lx, p.ly, p.lz}) : std::max(p.lx, p.ly);
  floor = rp.size_floor > 0 ? rp.size_floor : 1e-3 * min_edge;
  ceil = rp.size_ceil > 0 ? rp.size_ceil : 0.5 * max_edge;
  thick = rp.thick_ceil > 0 ? rp.thick_ceil : 0.25 * min_edge;
}

Eigen::VectorXd move_limits(const VariableBounds& b, int dim, double move_frac,
                            double move_angle) {
  const int vpc = dim == 3 ? 9 : 6;
  const int n_geom = dim + 3;  // center coords + sizes
  Eigen::VectorXd mv(b.lower.size());
  for (long j = 0; j < mv.size(); ++j) {
    const long r = j % vpc;
    mv[j] = r < n_geom ? move_frac * (b.upper[j] - b.lower[j]) : move_angle;
  }
  return mv;
}

}  // namespace

void ConvergenceWindow::push(double c, double v) {
  c_.push_back(c);
  v_.push_back(v);
  if (long(c_.size()) > size_) {
    c_.erase(c_.begin());
    v_.erase(v_.begin());
  }
}
double ConvergenceWindow::mean_c() const {
  return std::accumulate(c_.begin(), c_.end(), 0.0) / double(c_.size());
}
double ConvergenceWindow::mean_v() const {
  return std::accumulate(v_.begin(), v_.end(), 0.0) / double(v_.size());
}

bool convergence_reached(const ConvergenceWindow& w, double c_now, double v_now,
                         double v_limit, double tol) {
  if (!w.full()) return false;
  const double cbar = w.mean_c(), vbar = w.mean_v();
  if (!(std::abs(c_now - cbar) / std::abs(cbar) <= tol)) return false;
  if (!(v_now <= v_limit * (1 + 1e-12))) return false;
  return std::abs(v_now - vbar) / std::abs(vbar) <= tol;
}

BackgroundGrid problem_grid(const ProblemDef& p) {
  return p.dim == 3 ? make_grid3(p.nx, p.ny, p.nz, p.lx, p.ly, p.lz)
                    : make_grid2(p.nx, p.ny, p.lx, p.ly);
}

std::vector<Component2d> initial_layout2(const ProblemDef& p) {
  if (p.dim != 2) throw std::invalid_argument("initial_layout2: 2D problems only");
  const LayoutParams& L = p.layout;
  if (L.cx < 1 || L.cy < 1 || L.pairs < 1)
    throw std::invalid_argument("initial_layout2: bad layout");
  const double cw = p.lx / L.cx, ch = p.ly / L.cy;
  const double theta0 = std::atan2(ch, cw);
  const double a = L.size_scale * 0.5 * std::hypot(cw, ch);
  const long n = long(L.cx) * L.cy * 2 * L.pairs;
  const double area = superellipse_area_factor(6);
  const double t =
      L.thickness_scale * p.vol_frac * p.lx * p.ly / (double(n) * area * a);

  std::vector<Component2d> comps;
  comps.reserve(size_t(n));
  for (int cj = 0; cj < L.cy; ++cj)
    for (int ci = 0; ci < L.cx; ++ci) {
      const double xc = (ci + 0.5) * cw, yc = (cj + 0.5) * ch;
      for (int k = 1; k <= L.pairs; ++k) {
        const double ang = theta0 * double(k) / double(L.pairs);
        comps.push_back({xc, yc, a, t, t, ang});
        comps.push_back({xc, yc, a, t, t, -ang});
      }
    }
  return comps;
}

std::vector<Component3d> initial_layout3(const ProblemDef& p) {
  if (p.dim != 3) throw std::invalid_argument("initial_layout3: 3D problems only");
  const LayoutParams& L = p.layout;
  if (L.cx < 1 || L.cy < 1 || L.cz < 1)
    throw std::invalid_argument("initial_layout3: bad layout");
  const double cw = p.lx / L.cx, ch = p.ly / L.cy, cd = p.lz / L.cz;
  const double half_diag = 0.5 * std::sqrt(cw * cw + ch * ch + cd * cd);
  const double L1 = L.size_scale * half_diag;
  const long n = long(L.cx) * L.cy * L.cz * 4;
  const double volf = superellipsoid_volume_factor(6);
  const double t = std::sqrt(L.thickness_scale * p.vol_frac * p.lx * p.ly * p.lz /
                             (double(n) * volf * L1));

  std::vector<Component3d> comps;
  comps.reserve(size_t(n));
  for (int ck = 0; ck < L.cz; ++ck)
    for (int cj = 0; cj < L.cy; ++cj)
      for (int ci = 0; ci < L.cx; ++ci) {
        const Eigen::Vector3d c((ci + 0.5) * cw, (cj + 0.5) * ch,
                                (ck + 0.5) * cd);
        for (int sy : {1, -1})
          for (int sz : {1, -1}) {
            // Bar axis along the cell diagonal (positive x half-space, so the
            // angles stay inside their bounds).
            const Eigen::Vector3d u =
                Eigen::Vector3d(cw, sy * ch, sz * cd).normalized();
            const double beta = std::asin(u[2]);
            const double theta = std::atan2(-u[1], u[0]);
            comps.push_back({c[0], c[1], c[2], L1, t, t, 0.0, beta, theta});
          }
      }
  return comps;
}

LoadCase materialize_loads(const ProblemDef& p, const HyperMesh& mesh) {
  LoadCase lc;
  lc.point_loads = p.point_loads;
  lc.tractions = p.tractions;
  const int dim = mesh.dim();

  auto add_fixed = [&](long node, const std::array<bool, 3>& fix) {
    for (int d = 0; d < dim; ++d)
      if (fix[size_t(d)]) lc.fixed_dofs.push_back(node * dim + d);
  };
  for (const SupportSpec& s : p.supports) {
    if (s.whole_side) {
      const bool xs = s.side == Side::xmin || s.side == Side::xmax;
      const bool ys = s.side == Side::ymin || s.side == Side::ymax;
      if (dim == 2 && !xs && !ys)
        throw std::invalid_argument("z-side support on a 2D problem");
      for (int k = 0; k < mesh.nodes_z(); ++k)
        for (int j = 0; j < mesh.nodes_y(); ++j)
          for (int i = 0; i < mesh.nodes_x(); ++i) {
            const bool on = (s.side == Side::xmin && i == 0) ||
                            (s.side == Side::xmax && i == mesh.ex) ||
                            (s.side == Side::ymin && j == 0) ||
                            (s.side == Side::ymax && j == mesh.ey) ||
                            (s.side == Side::zmin && k == 0) ||
                            (s.side == Side::zmax && k == mesh.ez);
            if (on) add_fixed(mesh.hnode_id(i, j, k), s.fix);
          }
    } else {
      auto snap = [](double v, double h, int nmax) {
        const int i = int(std::lround(v / h));
        if (i < 0 || i > nmax || std::abs(v - i * h) > 1e-6 * h)
          throw std::invalid_argument(
              "point support does not coincide with a displacement node");
        return i;
      };
      const int i = snap(s.pos[0], mesh.hx(), mesh.ex);
      const int j = snap(s.pos[1], mesh.hy(), mesh.ey);
      const int k = dim == 3 ? snap(s.pos[2], mesh.hz(), mesh.ez) : 0;
      add_fixed(mesh.hnode_id(i, j, k), s.fix);
    }
  }
  std::sort(lc.fixed_dofs.begin(), lc.fixed_dofs.end());
  lc.fixed_dofs.erase(std::unique(lc.fixed_dofs.begin(), lc.fixed_dofs.end()),
                      lc.fixed_dofs.end());
  return lc;
}

TdfOverrides materialize_overrides(const ProblemDef& p,
                                   const BackgroundGrid& grid) {
  TdfOverrides ov;
  std::array<long, 8> nodes{};
  auto collect = [&](const std::vector<long>& cells, std::vector<int32_t>& out) {
    for (long cell : cells) {
      if (cell < 0 || cell >= grid.cell_count())
        throw std::invalid_argument("forced cell id out of range");
      const int nc = grid.cell_nodes(cell, nodes);
      for (int e = 0; e < nc; ++e) out.push_back(int32_t(nodes[size_t(e)]));
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
  };
  collect(p.forced_solid_cells, ov.solid_nodes);
  collect(p.forced_void_cells, ov.void_nodes);
  return ov;
}

namespace {

// Everything reusable across iterations of one optimization run.
struct RunContext {
  BackgroundGrid grid;
  HyperMesh mesh;
  RegularizationParams reg;
  ElementTables tables;
  LoadCase loads;
  Eigen::VectorXd f;
  TdfOverrides overrides;
  double v_limit = 0;
};

RunContext make_context(const ProblemDef& p, const RunParams& rp, int n_be) {
  RunContext c;
  c.grid = problem_grid(p);
  c.mesh = build_hyper_mesh(c.grid, n_be);
  c.reg = make_reg(rp, c.grid);
  p.material.validate();
  c.tables = element_tables(c.mesh, p.material);
  c.loads = materialize_loads(p, c.mesh);
  c.f = distribute_load(c.loads, c.mesh);
  c.overrides = materialize_overrides(p, c.grid);
  c.v_limit = p.vol_frac * c.grid.domain_measure();
  return c;
}

template <typename Comp>
RunResult run_impl(const ProblemDef& p, const RunParams& rp,
                   std::vector<Comp> comps) {
  const double t_start = now_seconds();
  Eigen::setNbThreads(rp.threads > 0 ? rp.threads : 1);
  RunContext ctx = make_context(p, rp, p.n_be);

  Eigen::VectorXd x = flatten(std::span<const Comp>(comps));
  const SubregionGrid sub = make_subregions(ctx.grid, p.nsx, p.nsy, p.nsz);
  double floor, ceil, thick;
  size_limits(p, rp, floor, ceil, thick);
  VariableBounds bounds = partition_bounds(sub, x, p.dim, floor, ceil, thick);
  Mma mma(bounds, move_limits(bounds, p.dim, rp.move_frac, rp.move_angle),
          rp.mma);

  RunResult res;
  res.dim = p.dim;
  ConvergenceWindow window(rp.conv_window);
  DirectCache cache;
  double obj_scale = 0;

  for (int it = 1; it <= rp.max_iters; ++it) {
    IterRecord rec;
    rec.iter = it;
    rec.vol_limit = ctx.v_limit;
    const double t0 = now_seconds();

    if constexpr (std::is_same_v<Comp, Component2d>) {
      comps = unflatten2(x);
    } else {
      comps = unflatten3(x);
    }
    const TdfField field = build_structure_tdf(std::span<const Comp>(comps),
                                               ctx.grid, ctx.reg, &ctx.overrides);
    const double t1 = now_seconds();
    rec.t_tdf = t1 - t0;

    const GlobalSystem sys = assemble(ctx.mesh, ctx.tables, field, p.material);
    const FeaSolution sol =
        solve(sys, ctx.f, ctx.loads.fixed_dofs, rp.solver, &cache);
    const double t2 = now_seconds();
    rec.t_fea = t2 - t1;

    const VolumeResult vol = volume(field, ctx.grid);
    rec.compliance = sol.compliance;
    rec.volume = vol.raw;
    window.push(rec.compliance, rec.volume);

    const bool done =
        it >= rp.conv_start &&
        convergence_reached(window, rec.compliance, rec.volume, ctx.v_limit,
                            rp.conv_tol);
    if (done || it == rp.max_iters) {
      rec.t_total = now_seconds() - t0;
      if (rp.deterministic) rec = scrub_timings(rec);
      res.history.push_back(rec);
      res.converged = done;
      break;
    }

    const Eigen::VectorXd dC = compliance_gradient(
        std::span<const Comp>(comps), field, ctx.mesh, ctx.tables, p.material,
        ctx.reg, sol);
    const Eigen::VectorXd dV = volume_gradient(std::span<const Comp>(comps),
                                               field, ctx.grid, ctx.reg);
    const double t3 = now_seconds();
    rec.t_sen = t3 - t2;

    if (obj_scale == 0) obj_scale = 1.0 / std::max(std::abs(rec.compliance), 1e-30);
    const double g = rec.volume / ctx.v_limit - 1.0;
    const Eigen::VectorXd dg = dV / ctx.v_limit;
    x = mma.update(x, rec.compliance * obj_scale, dC * obj_scale, g, dg);
    rec.t_mma = now_seconds() - t3;
    rec.t_total = now_seconds() - t0;
    if (rp.deterministic) rec = scrub_timings(rec);
    res.history.push_back(rec);

    if (rp.log_every > 0 && it % rp.log_every == 0)
      std::fprintf(stderr, "  it %4d  c %.6g  v/limit %.4f\n", it,
                   rec.compliance, rec.volume / ctx.v_limit);
  }

  res.iterations = int(res.history.size());
  res.c_obj = res.history.back().compliance;
  res.v_final = res.history.back().volume;
  res.design = x;
  if (rp.post_analysis) {
    res.has_post = true;
    if (p.n_be == 1) {
      res.c_post = res.c_obj;  // hyper mesh already is the background mesh
    } else {
      res.c_post = analyze_compliance(p, rp, x, 1);
    }
    res.rel_error = std::abs(res.c_post - res.c_obj) / std::abs(res.c_post);
  }
  res.seconds = now_seconds() - t_start;
  return res;
}

}  // namespace

RunResult run(const ProblemDef& p, const RunParams& rp) {
  if (p.dim == 3) return run_impl(p, rp, initial_layout3(p));
  return run_impl(p, rp, initial_layout2(p));
}

double analyze_compliance(const ProblemDef& p, const RunParams& rp,
                          const Eigen::VectorXd& design, int n_be) {
  RunContext ctx = make_context(p, rp, n_be);
  TdfField field;
  if (p.dim == 3) {
    const std::vector<Component3d> comps = unflatten3(design);
    field = build_structure_tdf(std::span<const Component3d>(comps), ctx.grid,
                                ctx.reg, &ctx.overrides);
  } else {
    const std::vector<Component2d> comps = unflatten2(design);
    field = build_structure_tdf(std::span<const Component2d>(comps), ctx.grid,
                                ctx.reg, &ctx.overrides);
  }
  const GlobalSystem sys = assemble(ctx.mesh, ctx.tables, field, p.material);
  return solve(sys, ctx.f, ctx.loads.fixed_dofs, rp.solver).compliance;
}

std::vector<LadderRow> reanalysis_ladder(const ProblemDef& p,
                                         const RunParams& rp,
                                         const Eigen::VectorXd& design,
                                         std::span<const int> ratios) {
  std::vector<LadderRow> rows;
  rows.reserve(ratios.size());
  double c_ref = 0;
  bool have_ref = false;
  for (int r : ratios) {
    LadderRow row;
    row.ratio = r;
    row.compliance = analyze_compliance(p, rp, design, r);
    if (r == 1) {
      c_ref = row.compliance;
      have_ref = true;
    }
    rows.push_back(row);
  }
  if (!have_ref) c_ref = analyze_compliance(p, rp, design, 1);
  for (LadderRow& row : rows)
    row.rel_err = std::abs(row.compliance - c_ref) / std::abs(c_ref);
  return rows;
}

std::vector<StudyRow> resolution_study(const ProblemDef& p,
                                       const RunParams& rp,
                                       std::span<const int> ratios) {
  std::vector<StudyRow> rows;
  rows.reserve(ratios.size());
  for (int r : ratios) {
    ProblemDef q = p;
    q.n_be = r;
    StudyRow row;
    row.ratio = r;
    row.result = run(q, rp);
    rows.push_back(std::move(row));
  }
  return rows;
}

ProblemDef preset_problem(const std::string& name) {
  ProblemDef p;
  p.name = name;
  if (name == "cantilever2d") {
    p.dim = 2;
    p.lx = 12;
    p.ly = 6;
    p.nx = 1280;
    p.ny = 640;
    p.n_be = 8;
    p.nsx = 12;
    p.nsy = 6;
    p.vol_frac = 0.4;
    p.supports.push_back({true, Side::xmin, {0, 0, 0}, {true, true, false}});
    p.point_loads.push_back({{12, 3, 0}, 1, -1.0});
    p.layout = {16, 9, 1, 2, 1.0, 1.0};
  } else if (name == "mbb2d") {
    // Half of the simply supported beam: symmetry plane at x = 0, half of the
    // center load, vertical roller at the far bottom corner.
    p.dim = 2;
    p.lx = 12;
    p.ly = 6;
    p.nx = 1280;
    p.ny = 640;
    p.n_be = 5;
    p.nsx = 12;
    p.nsy = 6;
    p.vol_frac = 0.4;
    p.supports.push_back({true, Side::xmin, {0, 0, 0}, {true, false, false}});
    p.supports.push_back({false, Side::xmin, {12, 0, 0}, {false, true, false}});
    p.point_loads.push_back({{0, 6, 0}, 1, -1.0});
    p.layout = {16, 9, 1, 2, 1.0, 1.0};
  } else if (name == "distributed2d") {
    p.dim = 2;
    p.lx = 12;
    p.ly = 6;
    p.nx = 1200;
    p.ny = 600;
    p.n_be = 4;
    p.nsx = 6;
    p.nsy = 3;
    p.vol_frac = 0.3;
    p.supports.push_back({true, Side::xmin, {0, 0, 0}, {true, true, false}});
    p.tractions.push_back({Side::ymax, 1, -1.0 / 12.0, 0, -1, 0, -1});
    // Top layer of background cells fixed solid so the loaded surface cannot
    // fragment.
    for (int i = 0; i < p.nx; ++i)
      p.forced_solid_cells.push_back((long(p.ny) - 1) * p.nx + i);
    p.layout = {16, 9, 1, 2, 1.0, 1.0};
  } else if (name == "box3d") {
    // Mirror-symmetric octant of a box loaded through a stiff disk on top:
    // symmetry BCs on the three interior planes, the disk region forced
    // solid, a vertical rim load on the disk edge.
    p.dim = 3;
    p.lx = 6;
    p.ly = 5;
    p.lz = 6;
    p.nx = 24;
    p.ny = 20;
    p.nz = 24;
    p.n_be = 2;
    p.nsx = 1;
    p.nsy = 1;
    p.nsz = 1;
    p.vol_frac = 0.1;
    p.supports.push_back({true, Side::xmin, {0, 0, 0}, {true, false, false}});
    p.supports.push_back({true, Side::ymin, {0, 0, 0}, {false, true, false}});
    p.supports.push_back({true, Side::zmin, {0, 0, 0}, {false, false, true}});
    p.point_loads.push_back({{1.5, 5, 0}, 1, -1.0});
    const double r_disk = 1.5;
    const double dx = p.lx / p.nx, dy = p.ly / p.ny, dz = p.lz / p.nz;
    const int top_j = p.ny - 1;
    for (int k = 0; k < p.nz; ++k)
      for (int i = 0; i < p.nx; ++i) {
        const double cx = (i + 0.5) * dx, cz = (k + 0.5) * dz;
        if (cx * cx + cz * cz <= r_disk * r_disk)
          p.forced_solid_cells.push_back((long(k) * p.ny + top_j) * p.nx + i);
      }
    (void)dy;
    p.layout = {3, 2, 3, 2, 1.0, 1.0};
  } else {
    throw std::invalid_argument("unknown preset problem: " + name);
  }
  return p;
}

std::vector<std::string> preset_names() {
  return {"cantilever2d", "mbb2d", "distributed2d", "box3d"};
}

}  // namespace mmc
