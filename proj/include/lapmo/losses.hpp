#pragma once

// Training objectives on pose sequences. Every loss returns its value and the
// analytic gradient with respect to the estimated positions.
//
// All losses are means of per-row Euclidean distances. Rows with a zero
// residual contribute a zero subgradient.

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "lapmo/laplacian.hpp"
#include "lapmo/motion.hpp"

namespace lapmo {

struct LossValue {
    double value = 0.0;
    std::vector<double> grad;  // T x J x 3, same layout as MotionSequence::data()
};

enum class LossMode {
    kPositionOnly,       // L_P
    kPositionMotion,     // L_P + lambda * L_M
    kPositionLaplacian,  // L_P + alpha * L_Delta
};

inline std::string to_string(LossMode m) {
    switch (m) {
        case LossMode::kPositionOnly: return "P_ONLY";
        case LossMode::kPositionMotion: return "P_PLUS_M";
        case LossMode::kPositionLaplacian: return "P_PLUS_LAP";
    }
    return "?";
}

/// Accepts P_ONLY / P_PLUS_M / P_PLUS_LAP and the CLI short forms p / pm / plap.
inline LossMode parse_loss_mode(const std::string& s) {
    if (s == "P_ONLY" || s == "p") return LossMode::kPositionOnly;
    if (s == "P_PLUS_M" || s == "pm") return LossMode::kPositionMotion;
    if (s == "P_PLUS_LAP" || s == "plap") return LossMode::kPositionLaplacian;
    throw std::invalid_argument("unknown loss mode '" + s + "'");
}

struct LossConfig {
    double alpha = 1.0;
    double lambda = 1.0;
    std::vector<int> motion_scales{1, 2, 4, 8};
    LaplacianVariant laplacian_variant = LaplacianVariant::kCombinatorial;
    bool root_relative = false;
};

namespace detail {

/// Accumulates sum of row norms of `residual` (rows of 3) and writes the unit
/// residual directions into `unit`.
inline double row_norms(std::span<const double> residual, std::vector<double>& unit) {
    unit.assign(residual.size(), 0.0);
    double total = 0.0;
    for (std::size_t r = 0; r < residual.size(); r += 3) {
        const double n = std::sqrt(residual[r] * residual[r] + residual[r + 1] * residual[r + 1] +
                                   residual[r + 2] * residual[r + 2]);
        total += n;
        if (n > 0.0)
            for (int c = 0; c < 3; ++c) unit[r + static_cast<std::size_t>(c)] = residual[r + static_cast<std::size_t>(c)] / n;
    }
    return total;
}

inline std::vector<double> difference(std::span<const double> a, std::span<const double> b) {
    std::vector<double> d(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) d[i] = a[i] - b[i];
    return d;
}

}  // namespace detail

inline LossValue position_loss(const MotionSequence& est, const MotionSequence& gt) {
    require_same_shape(est, gt);
    const auto residual = detail::difference(est.data(), gt.data());
    LossValue out;
    const double inv = 1.0 / static_cast<double>(est.node_count());
    out.value = detail::row_norms(residual, out.grad) * inv;
    for (double& g : out.grad) g *= inv;
    return out;
}

inline LossValue laplacian_loss(const MotionSequence& est, const MotionSequence& gt, const SparseLaplacian& lap) {
    require_same_shape(est, gt);
    const auto delta_est = diff_coords(lap, est);
    const auto delta_gt = diff_coords(lap, gt);
    const auto residual = detail::difference(delta_gt.values, delta_est.values);
    std::vector<double> unit;
    const double inv = 1.0 / static_cast<double>(lap.size());
    LossValue out;
    out.value = detail::row_norms(residual, unit) * inv;
    out.grad = lap.transpose_multiply<3>(unit);
    for (double& g : out.grad) g *= -inv;
    return out;
}

/// Scales usable for a sequence of `frames` frames (those with s < T).
inline std::vector<int> usable_scales(const std::vector<int>& scales, int frames) {
    std::vector<int> out;
    for (int s : scales) {
        if (s <= 0) throw std::invalid_argument("motion scales must be positive");
        if (s < frames) out.push_back(s);
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

/// Subtraction encoding m_s[t, j] = P[t + s, j] - P[t, j] at several scales.
/// The value is the mean over scales of the per-scale mean row distance.
inline LossValue motion_loss(const MotionSequence& est, const MotionSequence& gt, const std::vector<int>& scales) {
    require_same_shape(est, gt);
    const int T = est.frames();
    const int J = est.joints();
    const auto used = usable_scales(scales, T);
    if (used.empty()) throw std::invalid_argument("motion_loss: no usable scale (every scale >= T=" + std::to_string(T) + ")");

    const auto residual = detail::difference(est.data(), gt.data());
    LossValue out;
    out.grad.assign(residual.size(), 0.0);
    const double scale_weight = 1.0 / static_cast<double>(used.size());
    const std::size_t stride = static_cast<std::size_t>(J) * 3;
    for (int s : used) {
        const double w = scale_weight / (static_cast<double>(T - s) * J);
        const std::size_t shift = static_cast<std::size_t>(s) * stride;
        for (std::size_t r = 0; r + shift < residual.size(); r += 3) {
            double d[3];
            for (int c = 0; c < 3; ++c)
                d[c] = residual[r + shift + static_cast<std::size_t>(c)] - residual[r + static_cast<std::size_t>(c)];
            const double n = std::sqrt(d[0] * d[0] + d[1] * d[1] + d[2] * d[2]);
            out.value += w * n;
            if (n > 0.0) {
                for (int c = 0; c < 3; ++c) {
                    const double g = w * d[c] / n;
                    out.grad[r + shift + static_cast<std::size_t>(c)] += g;
                    out.grad[r + static_cast<std::size_t>(c)] -= g;
                }
            }
        }
    }
    return out;
}

namespace detail {

/// Pulls a gradient taken with respect to root-aligned positions back onto
/// the raw positions.
inline std::vector<double> root_align_pullback(const MotionSequence& seq, std::vector<double> grad) {
    const int J = seq.joints();
    const int root = seq.skeleton().root_index();
    for (int t = 0; t < seq.frames(); ++t) {
        double sum[3] = {0.0, 0.0, 0.0};
        for (int j = 0; j < J; ++j)
            for (int c = 0; c < 3; ++c) sum[c] += grad[seq.offset(t, j) + static_cast<std::size_t>(c)];
        for (int c = 0; c < 3; ++c) grad[seq.offset(t, root) + static_cast<std::size_t>(c)] -= sum[c];
    }
    return grad;
}

}  // namespace detail

/// L = L_P (+ lambda * L_M | + alpha * L_Delta). `lap` may be null, in which
/// case the Laplacian is built from the estimate's skeleton when needed.
inline LossValue combined_loss(const MotionSequence& est_in, const MotionSequence& gt_in, const LossConfig& config,
                               LossMode mode, const SparseLaplacian* lap = nullptr) {
    require_same_shape(est_in, gt_in);
    if (config.alpha < 0.0 || config.lambda < 0.0) throw std::invalid_argument("loss coefficients must be >= 0");
    const MotionSequence est = config.root_relative ? root_align(est_in) : est_in;
    const MotionSequence gt = config.root_relative ? root_align(gt_in) : gt_in;

    LossValue out = position_loss(est, gt);
    auto accumulate = [&out](const LossValue& term, double coeff) {
        out.value += coeff * term.value;
        for (std::size_t i = 0; i < out.grad.size(); ++i) out.grad[i] += coeff * term.grad[i];
    };
    if (mode == LossMode::kPositionMotion) {
        accumulate(motion_loss(est, gt, config.motion_scales), config.lambda);
    } else if (mode == LossMode::kPositionLaplacian) {
        std::optional<SparseLaplacian> built;
        if (lap == nullptr) {
            built.emplace(build_laplacian(est.skeleton(), est.frames(), config.laplacian_variant));
            lap = &*built;
        }
        accumulate(laplacian_loss(est, gt, *lap), config.alpha);
    }
    if (config.root_relative) out.grad = detail::root_align_pullback(est_in, std::move(out.grad));
    return out;
}

}  // namespace lapmo
