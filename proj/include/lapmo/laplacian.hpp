#pragma once

// The 3D+t motion graph and its Laplacian.
//
// Nodes are (frame, joint) pairs indexed t * J + j. Spatial edges follow the
// skeleton bones inside each frame; temporal edges link a joint to itself in
// the next frame. Edge weights are uniform.

#include <algorithm>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "lapmo/motion.hpp"

namespace lapmo {

struct Edge {
    int a = 0;
    int b = 0;
    bool operator==(const Edge&) const = default;
};

class Graph3Dt {
public:
    Graph3Dt(int frames, int joints, std::vector<Edge> spatial, std::vector<Edge> temporal)
        : frames_(frames), joints_(joints), spatial_(std::move(spatial)), temporal_(std::move(temporal)) {}

    int frames() const { return frames_; }
    int joints() const { return joints_; }
    int node_count() const { return frames_ * joints_; }
    int index(int t, int j) const { return t * joints_ + j; }

    const std::vector<Edge>& spatial_edges() const { return spatial_; }
    const std::vector<Edge>& temporal_edges() const { return temporal_; }

    std::vector<int> degrees() const {
        std::vector<int> deg(static_cast<std::size_t>(node_count()), 0);
        for (const auto* set : {&spatial_, &temporal_})
            for (const Edge& e : *set) {
                ++deg[static_cast<std::size_t>(e.a)];
                ++deg[static_cast<std::size_t>(e.b)];
            }
        return deg;
    }

private:
    int frames_;
    int joints_;
    std::vector<Edge> spatial_;
    std::vector<Edge> temporal_;
};

/// Spatial edges are enumerated by (t, j) ascending, temporal edges by
/// (j, t) ascending. Each spatial edge is stored as (child, parent).
inline Graph3Dt build_graph(const Skeleton& skeleton, int frames) {
    if (frames < 1) throw std::invalid_argument("build_graph: frames must be >= 1");
    const int J = skeleton.joint_count();
    std::vector<Edge> spatial;
    spatial.reserve(static_cast<std::size_t>(frames) * static_cast<std::size_t>(J - 1));
    for (int t = 0; t < frames; ++t)
        for (int j = 0; j < J; ++j)
            if (skeleton.parent(j) != kNoParent) spatial.push_back({t * J + j, t * J + skeleton.parent(j)});
    std::vector<Edge> temporal;
    temporal.reserve(static_cast<std::size_t>(frames - 1) * static_cast<std::size_t>(J));
    for (int j = 0; j < J; ++j)
        for (int t = 0; t + 1 < frames; ++t) temporal.push_back({t * J + j, (t + 1) * J + j});
    return Graph3Dt(frames, J, std::move(spatial), std::move(temporal));
}

enum class LaplacianVariant {
    kCombinatorial,  // L = D - A
    kRandomWalk,     // L = I - D^-1 A
};

inline std::string to_string(LaplacianVariant v) {
    return v == LaplacianVariant::kCombinatorial ? "comb" : "rw";
}

inline LaplacianVariant parse_laplacian_variant(const std::string& s) {
    if (s == "comb" || s == "combinatorial") return LaplacianVariant::kCombinatorial;
    if (s == "rw" || s == "random_walk") return LaplacianVariant::kRandomWalk;
    throw std::invalid_argument("unknown Laplacian variant '" + s + "' (expected comb or rw)");
}

/// N x N matrix in compressed-row form. Column indices are sorted within
/// each row and the diagonal is always stored.
class SparseLaplacian {
public:
    SparseLaplacian(int n, std::vector<int> row_offsets, std::vector<int> col_indices, std::vector<double> values,
                    LaplacianVariant variant)
        : n_(n),
          row_offsets_(std::move(row_offsets)),
          col_indices_(std::move(col_indices)),
          values_(std::move(values)),
          variant_(variant) {}

    int size() const { return n_; }
    LaplacianVariant variant() const { return variant_; }
    std::size_t nonzeros() const { return values_.size(); }
    const std::vector<int>& row_offsets() const { return row_offsets_; }
    const std::vector<int>& col_indices() const { return col_indices_; }
    const std::vector<double>& values() const { return values_; }

    /// Y = L X for an N x K row-major X.
    template <int K>
    std::vector<double> multiply(std::span<const double> x) const {
        if (x.size() != static_cast<std::size_t>(n_) * K)
            throw ShapeError("Laplacian multiply: operand has " + std::to_string(x.size()) + " entries, expected " +
                             std::to_string(static_cast<std::size_t>(n_) * K));
        std::vector<double> y(x.size(), 0.0);
        for (int i = 0; i < n_; ++i) {
            double acc[K] = {};
            for (int p = row_offsets_[static_cast<std::size_t>(i)]; p < row_offsets_[static_cast<std::size_t>(i) + 1];
                 ++p) {
                const double w = values_[static_cast<std::size_t>(p)];
                const std::size_t c = static_cast<std::size_t>(col_indices_[static_cast<std::size_t>(p)]) * K;
                for (int k = 0; k < K; ++k) acc[k] += w * x[c + static_cast<std::size_t>(k)];
            }
            for (int k = 0; k < K; ++k) y[static_cast<std::size_t>(i) * K + static_cast<std::size_t>(k)] = acc[k];
        }
        return y;
    }

    /// Y = L^T X for an N x K row-major X.
    template <int K>
    std::vector<double> transpose_multiply(std::span<const double> x) const {
        if (x.size() != static_cast<std::size_t>(n_) * K)
            throw ShapeError("Laplacian transpose multiply: operand size mismatch");
        std::vector<double> y(x.size(), 0.0);
        for (int i = 0; i < n_; ++i) {
            const std::size_t r = static_cast<std::size_t>(i) * K;
            for (int p = row_offsets_[static_cast<std::size_t>(i)]; p < row_offsets_[static_cast<std::size_t>(i) + 1];
                 ++p) {
                const double w = values_[static_cast<std::size_t>(p)];
                const std::size_t c = static_cast<std::size_t>(col_indices_[static_cast<std::size_t>(p)]) * K;
                for (int k = 0; k < K; ++k) y[c + static_cast<std::size_t>(k)] += w * x[r + static_cast<std::size_t>(k)];
            }
        }
        return y;
    }

    std::vector<double> to_dense() const {
        std::vector<double> d(static_cast<std::size_t>(n_) * static_cast<std::size_t>(n_), 0.0);
        for (int i = 0; i < n_; ++i)
            for (int p = row_offsets_[static_cast<std::size_t>(i)]; p < row_offsets_[static_cast<std::size_t>(i) + 1]; ++p)
                d[static_cast<std::size_t>(i) * static_cast<std::size_t>(n_) +
                  static_cast<std::size_t>(col_indices_[static_cast<std::size_t>(p)])] = values_[static_cast<std::size_t>(p)];
        return d;
    }

private:
    int n_;
    std::vector<int> row_offsets_;
    std::vector<int> col_indices_;
    std::vector<double> values_;
    LaplacianVariant variant_;
};

/// Isolated nodes (only possible for J = 1, T = 1) get an all-zero row in
/// both variants so that L annihilates constants.
inline SparseLaplacian build_laplacian(const Graph3Dt& graph,
                                       LaplacianVariant variant = LaplacianVariant::kCombinatorial) {
    const int n = graph.node_count();
    std::vector<std::vector<int>> neighbors(static_cast<std::size_t>(n));
    for (const auto* set : {&graph.spatial_edges(), &graph.temporal_edges()})
        for (const Edge& e : *set) {
            neighbors[static_cast<std::size_t>(e.a)].push_back(e.b);
            neighbors[static_cast<std::size_t>(e.b)].push_back(e.a);
        }

    std::vector<int> offsets(static_cast<std::size_t>(n) + 1, 0);
    std::vector<int> cols;
    std::vector<double> vals;
    for (int i = 0; i < n; ++i) {
        auto& nb = neighbors[static_cast<std::size_t>(i)];
        std::sort(nb.begin(), nb.end());
        const double deg = static_cast<double>(nb.size());
        double diag = 0.0;
        double off = 0.0;
        if (!nb.empty()) {
            diag = variant == LaplacianVariant::kCombinatorial ? deg : 1.0;
            off = variant == LaplacianVariant::kCombinatorial ? -1.0 : -1.0 / deg;
        }
        bool diag_done = false;
        for (int c : nb) {
            if (!diag_done && c > i) {
                cols.push_back(i);
                vals.push_back(diag);
                diag_done = true;
            }
            cols.push_back(c);
            vals.push_back(off);
        }
        if (!diag_done) {
            cols.push_back(i);
            vals.push_back(diag);
        }
        offsets[static_cast<std::size_t>(i) + 1] = static_cast<int>(cols.size());
    }
    return SparseLaplacian(n, std::move(offsets), std::move(cols), std::move(vals), variant);
}

inline SparseLaplacian build_laplacian(const Skeleton& skeleton, int frames,
                                       LaplacianVariant variant = LaplacianVariant::kCombinatorial) {
    return build_laplacian(build_graph(skeleton, frames), variant);
}

/// N x 3 differential coordinates, row-major.
struct DiffCoords {
    int rows = 0;
    std::vector<double> values;

    std::span<const double, 3> row(int i) const {
        return std::span<const double, 3>(values.data() + static_cast<std::size_t>(i) * 3, 3);
    }
};

inline DiffCoords diff_coords(const SparseLaplacian& lap, const MotionSequence& seq) {
    if (static_cast<std::size_t>(lap.size()) != seq.node_count())
        throw ShapeError("diff_coords: Laplacian has " + std::to_string(lap.size()) + " nodes but sequence has " +
                         std::to_string(seq.node_count()));
    return DiffCoords{lap.size(), lap.multiply<3>(seq.data())};
}

}  // namespace lapmo
