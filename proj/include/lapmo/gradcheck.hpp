#pragma once

// Central finite-difference gradient checks for the losses and the network,
// on seeded random instances.

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "lapmo/laplacian.hpp"
#include "lapmo/losses.hpp"
#include "lapmo/motion.hpp"
#include "lapmo/rng.hpp"
#include "lapmo/tcn.hpp"

namespace lapmo::gradcheck {

inline constexpr double kStep = 1e-5;
inline constexpr double kTolerance = 1e-4;

/// max_i |a_i - b_i| / max(max_i |a_i|, max_i |b_i|).
inline double relative_error(const std::vector<double>& analytic, const std::vector<double>& numeric) {
    double diff = 0.0, scale = 0.0;
    for (std::size_t i = 0; i < analytic.size(); ++i) {
        diff = std::max(diff, std::abs(analytic[i] - numeric[i]));
        scale = std::max({scale, std::abs(analytic[i]), std::abs(numeric[i])});
    }
    return scale > 0.0 ? diff / scale : diff;
}

inline std::vector<double> central_difference(const std::function<double(const std::vector<double>&)>& f,
                                              std::vector<double> x, double h = kStep) {
    std::vector<double> g(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double keep = x[i];
        x[i] = keep + h;
        const double up = f(x);
        x[i] = keep - h;
        const double down = f(x);
        x[i] = keep;
        g[i] = (up - down) / (2.0 * h);
    }
    return g;
}

/// Random tree: every joint j > 0 hangs off some joint < j.
inline Skeleton random_skeleton(Rng& rng, int joints) {
    std::vector<int> parents(static_cast<std::size_t>(joints), kNoParent);
    for (int j = 1; j < joints; ++j) parents[static_cast<std::size_t>(j)] = static_cast<int>(rng.below(static_cast<std::uint64_t>(j)));
    return Skeleton(std::move(parents), 0);
}

inline MotionSequence random_sequence(Rng& rng, const Skeleton& sk, int frames, double spread = 1.0) {
    std::vector<double> d(static_cast<std::size_t>(frames) * sk.joint_count() * 3);
    for (double& v : d) v = spread * rng.normal();
    return MotionSequence(sk, 50.0, frames, std::move(d));
}

enum class Target { kPosition, kLaplacian, kMotion, kCombined, kNetwork };

inline Target parse_target(const std::string& s) {
    if (s == "pos") return Target::kPosition;
    if (s == "lap") return Target::kLaplacian;
    if (s == "motion") return Target::kMotion;
    if (s == "combined") return Target::kCombined;
    if (s == "tcn") return Target::kNetwork;
    throw std::invalid_argument("unknown gradcheck target '" + s + "' (pos|lap|motion|combined|tcn)");
}

struct Report {
    int trials = 0;
    double max_relative_error = 0.0;
    bool passed() const { return max_relative_error <= kTolerance; }
};

namespace detail {

inline double check_loss(Target target, Rng& rng) {
    const int J = 1 + static_cast<int>(rng.below(4));
    const int T = 2 + static_cast<int>(rng.below(7));
    const Skeleton sk = random_skeleton(rng, J);
    const MotionSequence gt = random_sequence(rng, sk, T);
    const MotionSequence est = random_sequence(rng, sk, T);
    const auto variant = rng.below(2) ? LaplacianVariant::kRandomWalk : LaplacianVariant::kCombinatorial;
    const SparseLaplacian lap = build_laplacian(sk, T, variant);
    LossConfig cfg;
    cfg.alpha = rng.uniform(0.1, 2.0);
    cfg.lambda = rng.uniform(0.1, 2.0);
    cfg.laplacian_variant = variant;
    const LossMode mode = rng.below(2) ? LossMode::kPositionLaplacian : LossMode::kPositionMotion;

    auto eval = [&](const MotionSequence& e) -> LossValue {
        switch (target) {
            case Target::kPosition: return position_loss(e, gt);
            case Target::kLaplacian: return laplacian_loss(e, gt, lap);
            case Target::kMotion: return motion_loss(e, gt, cfg.motion_scales);
            default: return combined_loss(e, gt, cfg, mode, &lap);
        }
    };
    const auto analytic = eval(est).grad;
    const auto numeric = central_difference(
        [&](const std::vector<double>& x) { return eval(est.with_data(x)).value; },
        std::vector<double>(est.data().begin(), est.data().end()));
    return relative_error(analytic, numeric);
}

/// Random network of 1-3 layers. Instances whose ReLU pre-activations come
/// within 1e-3 of the kink are redrawn.
inline double check_network(Rng& rng) {
    for (;;) {
        const int J = 1 + static_cast<int>(rng.below(4));
        const int T = 1 + static_cast<int>(rng.below(8));
        const int depth = 1 + static_cast<int>(rng.below(3));
        NetworkSpec spec;
        int in = 2 * J;
        for (int l = 0; l < depth; ++l) {
            const bool last = l + 1 == depth;
            const int out = last ? 3 * J : 4;
            const int k = 1 + 2 * static_cast<int>(rng.below(2));
            const int d = 1 + static_cast<int>(rng.below(3));
            spec.layers.push_back({in, out, k, d, !last, !last && in == out && rng.below(2) == 1});
            in = out;
        }
        Network net(spec, rng.next());
        std::vector<double> x2(static_cast<std::size_t>(T) * J * 2);
        for (double& v : x2) v = rng.normal();
        const MotionSequence2D input(Skeleton::chain(J), 50.0, T, x2);
        std::vector<double> weights(static_cast<std::size_t>(T) * J * 3);
        for (double& v : weights) v = rng.normal();

        ForwardCache cache;
        forward(net, input, &cache);
        bool near_kink = false;
        for (std::size_t l = 0; l < spec.layers.size(); ++l)
            if (spec.layers[l].has_activation)
                for (double z : cache.preactivations[l]) near_kink = near_kink || std::abs(z) < 1e-3;
        if (near_kink) continue;

        const auto g = backward(net, cache, weights);
        auto objective = [&](const Network& n, const MotionSequence2D& in2) {
            const auto out = forward(n, in2);
            double s = 0.0;
            for (std::size_t i = 0; i < weights.size(); ++i) s += weights[i] * out.data()[i];
            return s;
        };
        const auto num_params = central_difference(
            [&](const std::vector<double>& p) { return objective(Network(spec, p, 0, 0), input); }, net.params());
        const auto num_input = central_difference(
            [&](const std::vector<double>& x) { return objective(net, input.with_data(x)); }, x2);
        return std::max(relative_error(g.params, num_params), relative_error(g.input, num_input));
    }
}

}  // namespace detail

inline Report run(Target target, int trials, std::uint64_t seed) {
    Report r;
    Rng rng(seed);
    for (int i = 0; i < trials; ++i) {
        const double err = target == Target::kNetwork ? detail::check_network(rng) : detail::check_loss(target, rng);
        r.max_relative_error = std::max(r.max_relative_error, err);
        ++r.trials;
    }
    return r;
}

}  // namespace lapmo::gradcheck
