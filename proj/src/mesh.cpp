#include "mmc/mesh.hpp"

#include <cmath>

namespace mmc {

BackgroundGrid make_grid2(int nx, int ny, double lx, double ly) {
  if (nx < 1 || ny < 1) throw std::invalid_argument("grid needs >= 1 cell per axis");
  if (!(lx > 0) || !(ly > 0)) throw std::invalid_argument("grid extents must be > 0");
  BackgroundGrid g;
  g.dim = 2;
  g.nx = nx;
  g.ny = ny;
  g.nz = 0;
  g.lx = lx;
  g.ly = ly;
  g.lz = 0;
  g.dx = lx / nx;
  g.dy = ly / ny;
  g.dz = 0;
  return g;
}

BackgroundGrid make_grid3(int nx, int ny, int nz, double lx, double ly,
                          double lz) {
  if (nx < 1 || ny < 1 || nz < 1)
    throw std::invalid_argument("grid needs >= 1 cell per axis");
  if (!(lx > 0) || !(ly > 0) || !(lz > 0))
    throw std::invalid_argument("grid extents must be > 0");
  BackgroundGrid g;
  g.dim = 3;
  g.nx = nx;
  g.ny = ny;
  g.nz = nz;
  g.lx = lx;
  g.ly = ly;
  g.lz = lz;
  g.dx = lx / nx;
  g.dy = ly / ny;
  g.dz = lz / nz;
  return g;
}

HyperMesh build_hyper_mesh(const BackgroundGrid& grid, int n_be) {
  if (n_be < 1) throw std::invalid_argument("n_be must be >= 1");
  if (grid.nx % n_be != 0 || grid.ny % n_be != 0 ||
      (grid.dim == 3 && grid.nz % n_be != 0))
    throw std::invalid_argument("background cell counts must be divisible by n_be");
  HyperMesh m;
  m.grid = grid;
  m.n_be = n_be;
  m.ex = grid.nx / n_be;
  m.ey = grid.ny / n_be;
  m.ez = grid.dim == 3 ? grid.nz / n_be : 0;
  return m;
}

long SubregionGrid::region_of(const Eigen::Vector3d& p) const {
  const double tol = 1e-9 * (lx + ly + lz);
  if (p[0] < -tol || p[0] > lx + tol || p[1] < -tol || p[1] > ly + tol ||
      (dim == 3 && (p[2] < -tol || p[2] > lz + tol)))
    throw std::invalid_argument("point outside the design domain");
  auto slab = [](double v, double extent, int n) {
    int i = int(std::floor(v / (extent / n)));
    if (i < 0) i = 0;
    if (i > n - 1) i = n - 1;
    return i;
  };
  const int i = slab(p[0], lx, nsx);
  const int j = slab(p[1], ly, nsy);
  const int k = dim == 3 ? slab(p[2], lz, nsz) : 0;
  return (long(k) * nsy + j) * nsx + i;
}

void SubregionGrid::region_box(long r, Eigen::Vector3d& lo,
                               Eigen::Vector3d& hi) const {
  const int i = int(r % nsx);
  const long rest = r / nsx;
  const int j = int(rest % nsy);
  const int k = int(rest / nsy);
  const double wx = lx / nsx, wy = ly / nsy, wz = dim == 3 ? lz / nsz : 0.0;
  lo = {i * wx, j * wy, k * wz};
  hi = {(i + 1) * wx, (j + 1) * wy, dim == 3 ? (k + 1) * wz : 0.0};
}

SubregionGrid make_subregions(const BackgroundGrid& grid, int nsx, int nsy,
                              int nsz) {
  if (nsx < 1 || nsy < 1 || (grid.dim == 3 && nsz < 1))
    throw std::invalid_argument("need >= 1 sub-region per axis");
  SubregionGrid s;
  s.dim = grid.dim;
  s.nsx = nsx;
  s.nsy = nsy;
  s.nsz = grid.dim == 3 ? nsz : 1;
  s.lx = grid.lx;
  s.ly = grid.ly;
  s.lz = grid.lz;
  return s;
}

VariableBounds partition_bounds(const SubregionGrid& sub,
                                const Eigen::VectorXd& x_init, int dim,
                                double size_floor, double size_ceil,
                                double thick_ceil) {
  const int vpc = dim == 3 ? 9 : 6;
  if (x_init.size() % vpc != 0)
    throw std::invalid_argument("design vector length not a multiple of vars per component");
  if (!(size_floor > 0) || !(size_ceil > size_floor))
    throw std::invalid_argument("need 0 < size_floor < size_ceil");
  if (thick_ceil <= 0) thick_ceil = size_ceil;
  if (!(thick_ceil > size_floor))
    throw std::invalid_argument("need thick_ceil > size_floor");
  const long nc = x_init.size() / vpc;
  const double pi = 4.0 * std::atan(1.0);

  VariableBounds b;
  b.lower.resize(x_init.size());
  b.upper.resize(x_init.size());
  for (long c = 0; c < nc; ++c) {
    const long o = c * vpc;
    const Eigen::Vector3d center(x_init[o], x_init[o + 1],
                                 dim == 3 ? x_init[o + 2] : 0.0);
    Eigen::Vector3d lo, hi;
    sub.region_box(sub.region_of(center), lo, hi);
    const int ncoord = dim;
    const int nsize = 3;  // (a,t1,t2) or (L1,L2,L3)
    for (int d = 0; d < ncoord; ++d) {
      b.lower[o + d] = lo[d];
      b.upper[o + d] = hi[d];
    }
    for (int d = 0; d < nsize; ++d) {
      // 2D slots 3 and 4 are the end half-thicknesses; everything else is a
      // half-length.
      const bool thick = dim == 2 && d > 0;
      b.lower[o + ncoord + d] = size_floor;
      b.upper[o + ncoord + d] = thick ? thick_ceil : size_ceil;
    }
    const double ang = dim == 3 ? pi / 2 : pi;
    for (long v = o + ncoord + nsize; v < o + vpc; ++v) {
      b.lower[v] = -ang;
      b.upper[v] = ang;
    }
  }
  return b;
}

}  // namespace mmc
