#pragma once

// Node sampling on the unit square, radius-graph construction, and edge
// attribute assembly. All plain double-precision data, no autodiff: graphs
// and edge features are inputs to the models, not trained quantities.

#include "gola/rng.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <vector>

namespace gola {

using RowMatd =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct PointSet {
    RowMatd coords;  // N x 2, entries in [0,1]
    int source_grid_res = 0;
    uint64_t seed = 0;

    int size() const { return static_cast<int>(coords.rows()); }
};

struct SpatialGraph {
    // Directed edge (recv[e], send[e]): send feeds recv. Sorted by
    // (recv, send); offsets give each node's contiguous incoming range.
    std::vector<int> recv;
    std::vector<int> send;
    std::vector<int> offsets;  // length num_nodes + 1
    RowMatd edge_attr;         // E x (4 + 2*C_in) once attached
    double radius = 0.0;
    int num_nodes = 0;

    int num_edges() const { return static_cast<int>(recv.size()); }
};

/// Uniformly samples `density` distinct nodes of the grid_res x grid_res
/// lattice (coordinates are multiples of 1/(grid_res-1)). Output is in
/// canonical row-major grid order, so density == grid_res^2 returns the
/// whole grid unshuffled.
inline PointSet sample_points(int grid_res, int density, uint64_t seed) {
    const int64_t total = static_cast<int64_t>(grid_res) * grid_res;
    if (grid_res < 1 || density < 1 || density > total)
        throw std::invalid_argument("sample_points: density must be in [1, grid_res^2]");

    std::vector<int64_t> ids(static_cast<size_t>(total));
    for (int64_t i = 0; i < total; ++i) ids[static_cast<size_t>(i)] = i;
    Pcg32 rng(seed);
    for (int k = 0; k < density; ++k) {
        int64_t pick = k + static_cast<int64_t>(rng.below(static_cast<uint64_t>(total - k)));
        std::swap(ids[static_cast<size_t>(k)], ids[static_cast<size_t>(pick)]);
    }
    ids.resize(static_cast<size_t>(density));
    std::sort(ids.begin(), ids.end());

    const double spacing = grid_res > 1 ? 1.0 / (grid_res - 1) : 0.0;
    PointSet ps;
    ps.source_grid_res = grid_res;
    ps.seed = seed;
    ps.coords.resize(density, 2);
    for (int k = 0; k < density; ++k) {
        int64_t id = ids[static_cast<size_t>(k)];
        ps.coords(k, 0) = static_cast<double>(id / grid_res) * spacing;
        ps.coords(k, 1) = static_cast<double>(id % grid_res) * spacing;
    }
    return ps;
}

/// Connects every pair within Euclidean distance `radius` (both directions,
/// no self-loops) using a uniform-grid spatial hash with cell size radius.
inline SpatialGraph build_radius_graph(const PointSet& points, double radius) {
    if (radius <= 0) throw std::invalid_argument("build_radius_graph: radius must be positive");
    const int n = points.size();
    SpatialGraph g;
    g.num_nodes = n;
    g.radius = radius;

    const int ncell = std::max(1, static_cast<int>(std::floor(1.0 / radius)));
    auto cell_of = [&](double v) {
        int c = static_cast<int>(v / radius);
        return std::min(std::max(c, 0), ncell - 1);
    };
    std::vector<std::vector<int>> cells(static_cast<size_t>(ncell) * ncell);
    for (int i = 0; i < n; ++i)
        cells[static_cast<size_t>(cell_of(points.coords(i, 0))) * ncell +
              cell_of(points.coords(i, 1))]
            .push_back(i);

    const double r2 = radius * radius;
    for (int i = 0; i < n; ++i) {
        const double xi = points.coords(i, 0), yi = points.coords(i, 1);
        const int cx = cell_of(xi), cy = cell_of(yi);
        for (int dx = -1; dx <= 1; ++dx)
            for (int dy = -1; dy <= 1; ++dy) {
                const int ux = cx + dx, uy = cy + dy;
                if (ux < 0 || ux >= ncell || uy < 0 || uy >= ncell) continue;
                for (int j : cells[static_cast<size_t>(ux) * ncell + uy]) {
                    if (j == i) continue;
                    const double ddx = xi - points.coords(j, 0);
                    const double ddy = yi - points.coords(j, 1);
                    if (ddx * ddx + ddy * ddy <= r2) {
                        g.recv.push_back(i);
                        g.send.push_back(j);
                    }
                }
            }
    }

    // Sort by (recv, send) so each node's incoming edges are contiguous.
    const int e = g.num_edges();
    std::vector<int> order(static_cast<size_t>(e));
    for (int k = 0; k < e; ++k) order[static_cast<size_t>(k)] = k;
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        if (g.recv[static_cast<size_t>(a)] != g.recv[static_cast<size_t>(b)])
            return g.recv[static_cast<size_t>(a)] < g.recv[static_cast<size_t>(b)];
        return g.send[static_cast<size_t>(a)] < g.send[static_cast<size_t>(b)];
    });
    std::vector<int> recv2(static_cast<size_t>(e)), send2(static_cast<size_t>(e));
    for (int k = 0; k < e; ++k) {
        recv2[static_cast<size_t>(k)] = g.recv[static_cast<size_t>(order[static_cast<size_t>(k)])];
        send2[static_cast<size_t>(k)] = g.send[static_cast<size_t>(order[static_cast<size_t>(k)])];
    }
    g.recv.swap(recv2);
    g.send.swap(send2);

    g.offsets.assign(static_cast<size_t>(n) + 1, 0);
    for (int k = 0; k < e; ++k) g.offsets[static_cast<size_t>(g.recv[static_cast<size_t>(k)]) + 1]++;
    for (int i = 0; i < n; ++i) g.offsets[static_cast<size_t>(i) + 1] += g.offsets[static_cast<size_t>(i)];
    return g;
}

/// Fills edge_attr rows with concat(x_i, x_j, f(x_i), f(x_j)) for each
/// directed edge (i, j) = (recv, send).
inline void attach_edge_attributes(SpatialGraph& graph, const PointSet& points,
                                   const RowMatd& f_values) {
    if (f_values.rows() != points.size())
        throw std::invalid_argument("attach_edge_attributes: f_values rows != point count");
    const int cin = static_cast<int>(f_values.cols());
    const int e = graph.num_edges();
    graph.edge_attr.resize(e, 4 + 2 * cin);
    for (int k = 0; k < e; ++k) {
        const int i = graph.recv[static_cast<size_t>(k)];
        const int j = graph.send[static_cast<size_t>(k)];
        graph.edge_attr(k, 0) = points.coords(i, 0);
        graph.edge_attr(k, 1) = points.coords(i, 1);
        graph.edge_attr(k, 2) = points.coords(j, 0);
        graph.edge_attr(k, 3) = points.coords(j, 1);
        graph.edge_attr.row(k).segment(4, cin) = f_values.row(i);
        graph.edge_attr.row(k).segment(4 + cin, cin) = f_values.row(j);
    }
}

/// Wrap-around lattice: res x res points at multiples of 1/res, excluding
/// the right/top edges. Integer Fourier modes are exactly orthogonal on it,
/// unlike the endpoint-inclusive sampling grid.
inline PointSet periodic_lattice(int res) {
    PointSet ps;
    ps.source_grid_res = res;
    ps.coords.resize(static_cast<int64_t>(res) * res, 2);
    const double spacing = 1.0 / res;
    int k = 0;
    for (int i = 0; i < res; ++i)
        for (int j = 0; j < res; ++j, ++k) {
            ps.coords(k, 0) = i * spacing;
            ps.coords(k, 1) = j * spacing;
        }
    return ps;
}

/// Radius giving expected degree ~ target_degree for uniform points on the
/// unit square (boundary effects ignored), clamped to [0.02, 0.5].
inline double default_radius(int density, double target_degree = 10.0) {
    if (density < 2) return 0.5;
    double r = std::sqrt(target_degree / (std::numbers::pi * density));
    return std::clamp(r, 0.02, 0.5);
}

}  // namespace gola
