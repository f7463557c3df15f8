// Structured meshes: the fine background grid that carries the geometry
// field, the coarse hyper-element mesh that carries displacements, and the
// sub-region partition that confines component centers.
#pragma once

#include <Eigen/Dense>

#include <array>
#include <stdexcept>
#include <vector>

namespace mmc {

// Uniform axis-aligned grid over [0,lx] x [0,ly] (x [0,lz] in 3D) with
// nx x ny (x nz) cells. Nodes are numbered x-fastest, then y, then z.
struct BackgroundGrid {
  int dim = 2;
  int nx = 0, ny = 0, nz = 0;
  double lx = 0, ly = 0, lz = 0;
  double dx = 0, dy = 0, dz = 0;

  int nodes_x() const { return nx + 1; }
  int nodes_y() const { return ny + 1; }
  int nodes_z() const { return dim == 3 ? nz + 1 : 1; }
  long node_count() const {
    return long(nodes_x()) * long(nodes_y()) * long(nodes_z());
  }
  long cell_count() const {
    return long(nx) * long(ny) * (dim == 3 ? long(nz) : 1);
  }
  double cell_measure() const { return dim == 3 ? dx * dy * dz : dx * dy; }
  double min_cell_edge() const {
    double m = dx < dy ? dx : dy;
    return dim == 3 && dz < m ? dz : m;
  }
  double domain_measure() const { return dim == 3 ? lx * ly * lz : lx * ly; }

  long node_id(int i, int j, int k = 0) const {
    return (long(k) * nodes_y() + j) * nodes_x() + i;
  }
  void node_ijk(long node, int& i, int& j, int& k) const {
    i = int(node % nodes_x());
    const long r = node / nodes_x();
    j = int(r % nodes_y());
    k = int(r / nodes_y());
  }
  Eigen::Vector3d node_pos(long node) const {
    int i, j, k;
    node_ijk(node, i, j, k);
    return {i * dx, j * dy, dim == 3 ? k * dz : 0.0};
  }

  long cell_id(int i, int j, int k = 0) const {
    return (long(k) * ny + j) * nx + i;
  }
  void cell_ijk(long cell, int& i, int& j, int& k) const {
    i = int(cell % nx);
    const long r = cell / nx;
    j = int(r % ny);
    k = int(r / ny);
  }
  // Corner node ids of a cell; 4 in 2D (counterclockwise), 8 in 3D (bottom
  // face counterclockwise, then top face).
  int cell_nodes(long cell, std::array<long, 8>& out) const {
    int i, j, k;
    cell_ijk(cell, i, j, k);
    out[0] = node_id(i, j, k);
    out[1] = node_id(i + 1, j, k);
    out[2] = node_id(i + 1, j + 1, k);
    out[3] = node_id(i, j + 1, k);
    if (dim == 2) return 4;
    out[4] = node_id(i, j, k + 1);
    out[5] = node_id(i + 1, j, k + 1);
    out[6] = node_id(i + 1, j + 1, k + 1);
    out[7] = node_id(i, j + 1, k + 1);
    return 8;
  }
};

BackgroundGrid make_grid2(int nx, int ny, double lx, double ly);
BackgroundGrid make_grid3(int nx, int ny, int nz, double lx, double ly,
                          double lz);

// Coarse displacement mesh: each hyper-element is a block of n_be x n_be
// (x n_be) background cells. Requires the background cell counts to be
// divisible by n_be. n_be = 1 reproduces the background mesh.
struct HyperMesh {
  BackgroundGrid grid;
  int n_be = 1;
  int ex = 0, ey = 0, ez = 0;

  int dim() const { return grid.dim; }
  double hx() const { return grid.dx * n_be; }
  double hy() const { return grid.dy * n_be; }
  double hz() const { return grid.dz * n_be; }

  int nodes_x() const { return ex + 1; }
  int nodes_y() const { return ey + 1; }
  int nodes_z() const { return dim() == 3 ? ez + 1 : 1; }
  long node_count() const {
    return long(nodes_x()) * long(nodes_y()) * long(nodes_z());
  }
  long dof_count() const { return node_count() * dim(); }
  long element_count() const {
    return long(ex) * long(ey) * (dim() == 3 ? long(ez) : 1);
  }
  int cells_per_element() const {
    int c = n_be * n_be;
    return dim() == 3 ? c * n_be : c;
  }

  long hnode_id(int i, int j, int k = 0) const {
    return (long(k) * nodes_y() + j) * nodes_x() + i;
  }
  void hnode_ijk(long node, int& i, int& j, int& k) const {
    i = int(node % nodes_x());
    const long r = node / nodes_x();
    j = int(r % nodes_y());
    k = int(r / nodes_y());
  }
  Eigen::Vector3d hnode_pos(long node) const {
    int i, j, k;
    hnode_ijk(node, i, j, k);
    return {i * hx(), j * hy(), dim() == 3 ? k * hz() : 0.0};
  }

  long element_id(int I, int J, int K = 0) const {
    return (long(K) * ey + J) * ex + I;
  }
  void element_ijk(long e, int& I, int& J, int& K) const {
    I = int(e % ex);
    const long r = e / ex;
    J = int(r % ey);
    K = int(r / ey);
  }
  int element_nodes(long e, std::array<long, 8>& out) const {
    int I, J, K;
    element_ijk(e, I, J, K);
    out[0] = hnode_id(I, J, K);
    out[1] = hnode_id(I + 1, J, K);
    out[2] = hnode_id(I + 1, J + 1, K);
    out[3] = hnode_id(I, J + 1, K);
    if (dim() == 2) return 4;
    out[4] = hnode_id(I, J, K + 1);
    out[5] = hnode_id(I + 1, J, K + 1);
    out[6] = hnode_id(I + 1, J + 1, K + 1);
    out[7] = hnode_id(I, J + 1, K + 1);
    return 8;
  }

  // Background cells owned by a hyper-element, local index lexicographic
  // (x-fastest). local in [0, cells_per_element()).
  long owned_cell(long e, int local) const {
    int I, J, K;
    element_ijk(e, I, J, K);
    const int u = local % n_be;
    const int r = local / n_be;
    const int v = r % n_be;
    const int w = r / n_be;
    return grid.cell_id(I * n_be + u, J * n_be + v, K * n_be + w);
  }
  long owner_element(long cell) const {
    int i, j, k;
    grid.cell_ijk(cell, i, j, k);
    return element_id(i / n_be, j / n_be, k / n_be);
  }
  std::vector<long> owned_cells(long e) const {
    std::vector<long> cells(static_cast<size_t>(cells_per_element()));
    for (int l = 0; l < cells_per_element(); ++l) cells[size_t(l)] = owned_cell(e, l);
    return cells;
  }

  // Natural coordinates (in [-1,1]^dim) of the integration point of a local
  // background cell: the cell center.
  Eigen::Vector3d integration_point(int local) const {
    const int u = local % n_be;
    const int r = local / n_be;
    const int v = r % n_be;
    const int w = r / n_be;
    auto nat = [this](int q) { return -1.0 + (2.0 * q + 1.0) / n_be; };
    return {nat(u), nat(v), dim() == 3 ? nat(w) : 0.0};
  }
};

HyperMesh build_hyper_mesh(const BackgroundGrid& grid, int n_be);

// Non-overlapping rectangular sub-regions tiling the domain. Assignment is
// half-open ([x0, x1) per axis) with the last slab closed, so every point of
// the domain belongs to exactly one region.
struct SubregionGrid {
  int dim = 2;
  int nsx = 1, nsy = 1, nsz = 1;
  double lx = 0, ly = 0, lz = 0;

  long region_count() const {
    return long(nsx) * long(nsy) * (dim == 3 ? long(nsz) : 1);
  }
  long region_of(const Eigen::Vector3d& p) const;
  void region_box(long r, Eigen::Vector3d& lo, Eigen::Vector3d& hi) const;
};

SubregionGrid make_subregions(const BackgroundGrid& grid, int nsx, int nsy,
                              int nsz = 1);

// Per-variable box bounds for the flattened design vector.
struct VariableBounds {
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;
};

// Bounds for the whole design: each component's center is confined to the
// sub-region containing its initial center; half-lengths to
// [size_floor, size_ceil], 2D half-thicknesses to [size_floor, thick_ceil]
// (thick_ceil <= 0 means size_ceil); angles to [-pi, pi] in 2D and
// [-pi/2, pi/2] in 3D. x_init is the flattened initial design (6 vars per 2D
// component, 9 per 3D).
VariableBounds partition_bounds(const SubregionGrid& sub,
                                const Eigen::VectorXd& x_init, int dim,
                                double size_floor, double size_ceil,
                                double thick_ceil = 0.0);

}  // namespace mmc
