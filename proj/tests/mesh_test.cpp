#include <doctest.h>

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <random>
#include <vector>

#include "mmc/geometry.hpp"
#include "mmc/mesh.hpp"

using namespace mmc;

TEST_CASE("background grid: counts, spacing, id round-trips (2D)") {
  const BackgroundGrid g = make_grid2(8, 5, 4.0, 2.5);
  CHECK(g.dim == 2);
  CHECK(g.nodes_x() == 9);
  CHECK(g.nodes_y() == 6);
  CHECK(g.nodes_z() == 1);
  CHECK(g.node_count() == 54);
  CHECK(g.cell_count() == 40);
  CHECK(g.dx == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(g.dy == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(g.cell_measure() == doctest::Approx(0.25).epsilon(1e-15));
  CHECK(g.min_cell_edge() == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(g.domain_measure() == doctest::Approx(10.0).epsilon(1e-15));

  for (long n = 0; n < g.node_count(); ++n) {
    int i, j, k;
    g.node_ijk(n, i, j, k);
    CHECK(g.node_id(i, j, k) == n);
    CHECK(k == 0);
    const Eigen::Vector3d p = g.node_pos(n);
    CHECK(p[0] == i * g.dx);
    CHECK(p[1] == j * g.dy);
    CHECK(p[2] == 0.0);
  }
  for (long c = 0; c < g.cell_count(); ++c) {
    int i, j, k;
    g.cell_ijk(c, i, j, k);
    CHECK(g.cell_id(i, j, k) == c);
  }
}

TEST_CASE("background grid: id round-trips and cell corners (3D)") {
  const BackgroundGrid g = make_grid3(4, 3, 5, 2.0, 1.5, 2.5);
  CHECK(g.node_count() == 5 * 4 * 6);
  CHECK(g.cell_count() == 60);
  CHECK(g.cell_measure() == doctest::Approx(0.125).epsilon(1e-15));
  for (long n = 0; n < g.node_count(); ++n) {
    int i, j, k;
    g.node_ijk(n, i, j, k);
    CHECK(g.node_id(i, j, k) == n);
  }
  // Node numbering is x-fastest, then y, then z.
  CHECK(g.node_id(1, 0, 0) == 1);
  CHECK(g.node_id(0, 1, 0) == g.nodes_x());
  CHECK(g.node_id(0, 0, 1) == long(g.nodes_x()) * g.nodes_y());

  std::array<long, 8> c{};
  REQUIRE(g.cell_nodes(0, c) == 8);
  // Bottom face counterclockwise, then the top face in the same order.
  CHECK(c[0] == g.node_id(0, 0, 0));
  CHECK(c[1] == g.node_id(1, 0, 0));
  CHECK(c[2] == g.node_id(1, 1, 0));
  CHECK(c[3] == g.node_id(0, 1, 0));
  CHECK(c[4] == g.node_id(0, 0, 1));
  CHECK(c[5] == g.node_id(1, 0, 1));
  CHECK(c[6] == g.node_id(1, 1, 1));
  CHECK(c[7] == g.node_id(0, 1, 1));

  const BackgroundGrid g2 = make_grid2(6, 4, 3.0, 2.0);
  std::array<long, 8> q{};
  REQUIRE(g2.cell_nodes(g2.cell_id(2, 1), q) == 4);
  CHECK(q[0] == g2.node_id(2, 1));
  CHECK(q[1] == g2.node_id(3, 1));
  CHECK(q[2] == g2.node_id(3, 2));
  CHECK(q[3] == g2.node_id(2, 2));
}

TEST_CASE("grid constructors reject degenerate input") {
  CHECK_THROWS(make_grid2(0, 4, 1.0, 1.0));
  CHECK_THROWS(make_grid2(4, 4, -1.0, 1.0));
  CHECK_THROWS(make_grid3(4, 4, 0, 1.0, 1.0, 1.0));
}

TEST_CASE("hyper mesh: ownership is a bijection onto background cells") {
  for (int n_be : {1, 2, 4}) {
    const BackgroundGrid g = make_grid2(8, 4, 2.0, 1.0);
    const HyperMesh m = build_hyper_mesh(g, n_be);
    CHECK(m.ex == 8 / n_be);
    CHECK(m.ey == 4 / n_be);
    CHECK(m.element_count() * m.cells_per_element() == g.cell_count());
    CHECK(m.hx() == doctest::Approx(g.dx * n_be).epsilon(1e-15));

    std::vector<int> seen(size_t(g.cell_count()), 0);
    for (long e = 0; e < m.element_count(); ++e)
      for (int l = 0; l < m.cells_per_element(); ++l) {
        const long cell = m.owned_cell(e, l);
        REQUIRE(cell >= 0);
        REQUIRE(cell < g.cell_count());
        ++seen[size_t(cell)];
        CHECK(m.owner_element(cell) == e);
      }
    for (int s : seen) CHECK(s == 1);
  }
  const BackgroundGrid g3 = make_grid3(4, 4, 4, 1.0, 1.0, 1.0);
  const HyperMesh m3 = build_hyper_mesh(g3, 2);
  CHECK(m3.cells_per_element() == 8);
  CHECK(m3.element_count() == 8);
  std::vector<int> seen(size_t(g3.cell_count()), 0);
  for (long e = 0; e < m3.element_count(); ++e)
    for (long cell : m3.owned_cells(e)) {
      ++seen[size_t(cell)];
      CHECK(m3.owner_element(cell) == e);
    }
  for (int s : seen) CHECK(s == 1);

  CHECK_THROWS(build_hyper_mesh(make_grid2(9, 4, 1.0, 1.0), 2));  // 9 % 2 != 0
  CHECK_THROWS(build_hyper_mesh(make_grid2(8, 4, 1.0, 1.0), 0));
}

TEST_CASE("hyper mesh: integration points sit at owned-cell centers") {
  const BackgroundGrid g = make_grid2(8, 8, 2.0, 2.0);
  const HyperMesh m = build_hyper_mesh(g, 2);
  // n_be = 2: natural centers at -1 + (2q+1)/2 = -0.5, +0.5 per axis.
  CHECK(m.integration_point(0)[0] == doctest::Approx(-0.5).epsilon(1e-15));
  CHECK(m.integration_point(0)[1] == doctest::Approx(-0.5).epsilon(1e-15));
  CHECK(m.integration_point(1)[0] == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(m.integration_point(1)[1] == doctest::Approx(-0.5).epsilon(1e-15));
  CHECK(m.integration_point(3)[0] == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(m.integration_point(3)[1] == doctest::Approx(0.5).epsilon(1e-15));

  // Map each natural point through the element geometry and compare with the
  // physical center of the owned background cell.
  for (long e = 0; e < m.element_count(); ++e) {
    int I, J, K;
    m.element_ijk(e, I, J, K);
    const double x0 = I * m.hx(), y0 = J * m.hy();
    for (int l = 0; l < m.cells_per_element(); ++l) {
      const Eigen::Vector3d nat = m.integration_point(l);
      const double px = x0 + (nat[0] + 1) / 2 * m.hx();
      const double py = y0 + (nat[1] + 1) / 2 * m.hy();
      int ci, cj, ck;
      g.cell_ijk(m.owned_cell(e, l), ci, cj, ck);
      CHECK(px == doctest::Approx((ci + 0.5) * g.dx).epsilon(1e-13));
      CHECK(py == doctest::Approx((cj + 0.5) * g.dy).epsilon(1e-13));
    }
  }

  // n_be = 1 degenerates to the single midpoint.
  const HyperMesh m1 = build_hyper_mesh(g, 1);
  CHECK(m1.integration_point(0).head<2>().norm() == 0.0);
}

TEST_CASE("subregions tile the domain half-open, last slab closed") {
  const BackgroundGrid g = make_grid2(12, 6, 3.0, 1.5);
  const SubregionGrid sub = make_subregions(g, 4, 2);
  CHECK(sub.region_count() == 8);

  // Boxes tile: widths sum to the domain, boxes are disjoint by construction.
  double wsum = 0;
  for (long r = 0; r < sub.region_count(); ++r) {
    Eigen::Vector3d lo, hi;
    sub.region_box(r, lo, hi);
    CHECK(hi[0] > lo[0]);
    CHECK(hi[1] > lo[1]);
    if (r < 4) wsum += hi[0] - lo[0];  // first row spans the full width
  }
  CHECK(wsum == doctest::Approx(3.0).epsilon(1e-14));

  // Every sampled point lands in exactly one region, and that region's box
  // contains it.
  std::mt19937 rng(5);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  for (int trial = 0; trial < 2000; ++trial) {
    const Eigen::Vector3d p(3.0 * U(rng), 1.5 * U(rng), 0.0);
    const long r = sub.region_of(p);
    REQUIRE(r >= 0);
    REQUIRE(r < sub.region_count());
    Eigen::Vector3d lo, hi;
    sub.region_box(r, lo, hi);
    CHECK(p[0] >= lo[0]);
    CHECK(p[1] >= lo[1]);
    CHECK(p[0] <= hi[0]);
    CHECK(p[1] <= hi[1]);
  }
  // Interior seam points belong to the right-hand region (half-open), the
  // far domain edge to the last region (closed).
  CHECK(sub.region_of({0.75, 0.0, 0.0}) == 1);
  CHECK(sub.region_of({3.0, 0.0, 0.0}) == 3);
  CHECK(sub.region_of({0.0, 0.75, 0.0}) == 4);
  CHECK(sub.region_of({3.0, 1.5, 0.0}) == 7);
}

TEST_CASE("partition bounds: coordinates boxed, sizes and angles slotted") {
  const BackgroundGrid g = make_grid2(12, 6, 3.0, 1.5);
  const SubregionGrid sub = make_subregions(g, 3, 1);
  // Two components, one near the left, one near the right.
  std::vector<Component2d> comps = {{0.4, 0.7, 0.5, 0.1, 0.1, 0.2},
                                    {2.8, 0.7, 0.5, 0.1, 0.1, -0.2}};
  const Eigen::VectorXd x = flatten(std::span<const Component2d>(comps));
  const VariableBounds b = partition_bounds(sub, x, 2, 0.01, 1.6, 0.4);
  REQUIRE(b.lower.size() == 12);
  REQUIRE(b.upper.size() == 12);

  // Component 0 is confined to region 0: x in [0,1), y in [0,1.5].
  CHECK(b.lower[0] == doctest::Approx(0.0));
  CHECK(b.upper[0] == doctest::Approx(1.0));
  CHECK(b.lower[1] == doctest::Approx(0.0));
  CHECK(b.upper[1] == doctest::Approx(1.5));
  // Component 1 is confined to region 2: x in [2,3].
  CHECK(b.lower[6] == doctest::Approx(2.0));
  CHECK(b.upper[6] == doctest::Approx(3.0));

  for (int c = 0; c < 2; ++c) {
    const int o = 6 * c;
    // Half-length slot.
    CHECK(b.lower[o + 2] == doctest::Approx(0.01));
    CHECK(b.upper[o + 2] == doctest::Approx(1.6));
    // Half-thickness slots take the thickness ceiling.
    for (int s : {3, 4}) {
      CHECK(b.lower[o + s] == doctest::Approx(0.01));
      CHECK(b.upper[o + s] == doctest::Approx(0.4));
    }
    // Angle slot.
    CHECK(b.lower[o + 5] == doctest::Approx(-std::acos(-1.0)));
    CHECK(b.upper[o + 5] == doctest::Approx(std::acos(-1.0)));
  }

  // thick_ceil <= 0 falls back to the size ceiling.
  const VariableBounds b2 = partition_bounds(sub, x, 2, 0.01, 1.6);
  CHECK(b2.upper[3] == doctest::Approx(1.6));

  CHECK_THROWS(partition_bounds(sub, x, 2, -1.0, 1.6));   // bad floor
  CHECK_THROWS(partition_bounds(sub, x, 2, 0.5, 0.25));   // ceil < floor
}

TEST_CASE("partition bounds: 3D slots include three angles at half pi") {
  const BackgroundGrid g = make_grid3(4, 4, 4, 2.0, 2.0, 2.0);
  const SubregionGrid sub = make_subregions(g, 2, 2, 2);
  std::vector<Component3d> comps = {
      {0.5, 0.5, 0.5, 0.4, 0.1, 0.1, 0.0, 0.0, 0.0},
      {1.5, 1.5, 1.5, 0.4, 0.1, 0.1, 0.1, -0.1, 0.2}};
  const Eigen::VectorXd x = flatten(std::span<const Component3d>(comps));
  const VariableBounds b = partition_bounds(sub, x, 3, 0.02, 0.9);
  REQUIRE(b.lower.size() == 18);
  const double half_pi = std::asin(1.0);
  for (int c = 0; c < 2; ++c) {
    const int o = 9 * c;
    for (int s = 3; s < 6; ++s) {  // L1, L2, L3: all plain size slots in 3D
      CHECK(b.lower[o + s] == doctest::Approx(0.02));
      CHECK(b.upper[o + s] == doctest::Approx(0.9));
    }
    for (int s = 6; s < 9; ++s) {
      CHECK(b.lower[o + s] == doctest::Approx(-half_pi));
      CHECK(b.upper[o + s] == doctest::Approx(half_pi));
    }
  }
  // First component sits in the first octant region box.
  CHECK(b.upper[0] == doctest::Approx(1.0));
  CHECK(b.upper[1] == doctest::Approx(1.0));
  CHECK(b.upper[2] == doctest::Approx(1.0));
}
