#include <gtest/gtest.h>

#include "lapmo/synth.hpp"
#include "lapmo/tcn.hpp"
#include "oracles.hpp"

using namespace lapmo;

namespace {

// Direct convolution with replicated edges, one output sample at a time.
std::vector<double> naive_layer(const ConvLayerSpec& l, const double* W, const std::vector<double>& x, int T) {
    const double* b = W + static_cast<std::size_t>(l.out_channels) * l.in_channels * l.kernel_size;
    const int half = (l.kernel_size - 1) / 2;
    std::vector<double> y(static_cast<std::size_t>(l.out_channels) * T);
    for (int o = 0; o < l.out_channels; ++o)
        for (int t = 0; t < T; ++t) {
            double s = b[o];
            for (int i = 0; i < l.in_channels; ++i)
                for (int k = 0; k < l.kernel_size; ++k) {
                    const int src = std::min(std::max(t + (k - half) * l.dilation, 0), T - 1);
                    s += W[(static_cast<std::size_t>(o) * l.in_channels + i) * l.kernel_size + k] *
                         x[static_cast<std::size_t>(i) * T + src];
                }
            if (l.has_activation) s = std::max(s, 0.0);
            if (l.residual) s += x[static_cast<std::size_t>(o) * T + t];
            y[static_cast<std::size_t>(o) * T + t] = s;
        }
    return y;
}

std::vector<double> naive_forward(const Network& net, std::vector<double> x, int T) {
    for (std::size_t li = 0; li < net.spec().layers.size(); ++li)
        x = naive_layer(net.spec().layers[li], net.params().data() + net.layer_offset(li), x, T);
    return x;
}

std::vector<double> random_vector(Rng& rng, std::size_t n, double scale = 1.0) {
    std::vector<double> v(n);
    for (double& x : v) x = scale * rng.normal();
    return v;
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

NetworkSpec random_spec(Rng& rng, int in, int out, int layers) {
    NetworkSpec s;
    int c = in;
    for (int l = 0; l < layers; ++l) {
        const bool last = l + 1 == layers;
        const int next = last ? out : 1 + static_cast<int>(rng.below(4));
        const int k = 1 + 2 * static_cast<int>(rng.below(3));
        const int d = 1 + static_cast<int>(rng.below(3));
        const bool residual = !last && next == c && rng.below(2) == 1;
        s.layers.push_back({c, next, k, d, !last, residual});
        c = next;
    }
    return s;
}

MotionSequence2D random_input(Rng& rng, int J, int T) {
    return MotionSequence2D(Skeleton::chain(J), 50.0, T, random_vector(rng, static_cast<std::size_t>(T) * J * 2));
}

}  // namespace

TEST(Tcn, PreservesSequenceLength) {
    const Network net(NetworkSpec::desk_default(5), 1);
    Rng rng(1);
    for (int T : {1, 2, 3, 7, 64, 301}) {
        const auto out = forward(net, random_input(rng, 5, T));
        EXPECT_EQ(out.frames(), T);
        EXPECT_EQ(out.joints(), 5);
    }
}

TEST(Tcn, ZeroWeightsGiveZeroOutput) {
    Network net(NetworkSpec::desk_default(3), 1);
    net.set_params(std::vector<double>(net.params().size(), 0.0));
    Rng rng(2);
    const auto out = forward(net, random_input(rng, 3, 9));
    for (double v : out.data()) EXPECT_EQ(v, 0.0);
}

TEST(Tcn, KernelOneIsAMatrixProduct) {
    NetworkSpec spec;
    spec.layers.push_back({4, 6, 1, 1, false, false});
    const Network net(spec, 3);
    Rng rng(3);
    const int T = 5;
    const auto x = random_vector(rng, 4 * T);
    const auto y = forward_channels(net, x, T);
    const auto& p = net.params();
    for (int o = 0; o < 6; ++o)
        for (int t = 0; t < T; ++t) {
            double s = p[24 + o];
            for (int i = 0; i < 4; ++i) s += p[static_cast<std::size_t>(o * 4 + i)] * x[static_cast<std::size_t>(i * T + t)];
            EXPECT_NEAR(y[static_cast<std::size_t>(o * T + t)], s, 1e-12);
        }
}

TEST(Tcn, MatchesNaiveConvolution) {
    Rng rng(4);
    for (int trial = 0; trial < 50; ++trial) {
        const auto spec = random_spec(rng, 1 + static_cast<int>(rng.below(4)), 1 + static_cast<int>(rng.below(4)),
                                      1 + static_cast<int>(rng.below(4)));
        const Network net(spec, rng.next());
        const int T = 1 + static_cast<int>(rng.below(20));
        const auto x = random_vector(rng, static_cast<std::size_t>(spec.layers.front().in_channels) * T);
        ASSERT_LE(oracle::max_abs_diff(forward_channels(net, x, T), naive_forward(net, x, T)), 1e-12);
    }
}

TEST(Tcn, GradientsMatchFiniteDifferences) {
    Rng rng(5);
    int checked = 0;
    for (int trial = 0; trial < 40; ++trial) {
        const auto spec = random_spec(rng, 2, 3, 1 + static_cast<int>(rng.below(3)));
        const Network net(spec, rng.next());
        const int T = 1 + static_cast<int>(rng.below(8));
        const auto x = random_vector(rng, static_cast<std::size_t>(spec.layers.front().in_channels) * T);
        const auto w = random_vector(rng, static_cast<std::size_t>(spec.layers.back().out_channels) * T);

        ForwardCache cache;
        forward_channels(net, x, T, &cache);
        bool near_kink = false;
        for (std::size_t li = 0; li < spec.layers.size(); ++li)
            if (spec.layers[li].has_activation)
                for (double z : cache.preactivations[li]) near_kink |= std::abs(z) < 1e-3;
        if (near_kink) continue;
        const auto g = backward_channels(net, cache, w);

        const auto numeric_params = oracle::finite_difference(
            [&](const std::vector<double>& p) {
                Network copy = net;
                copy.set_params(p);
                return dot(w, naive_forward(copy, x, T));
            },
            net.params());
        ASSERT_LE(oracle::max_relative_error(g.params, numeric_params), 1e-6) << "trial " << trial;
        const auto numeric_input =
            oracle::finite_difference([&](const std::vector<double>& xi) { return dot(w, naive_forward(net, xi, T)); }, x);
        ASSERT_LE(oracle::max_relative_error(g.input, numeric_input), 1e-6) << "trial " << trial;
        ++checked;
    }
    EXPECT_GE(checked, 30);
}

TEST(Tcn, BackwardIsLinearInUpstreamGradient) {
    const Network net(NetworkSpec::desk_default(2, 8), 6);
    Rng rng(6);
    const auto in = random_input(rng, 2, 11);
    ForwardCache cache;
    forward(net, in, &cache);
    const auto zero = backward(net, cache, std::vector<double>(11 * 2 * 3, 0.0));
    for (double v : zero.params) EXPECT_EQ(v, 0.0);
    const auto a = random_vector(rng, 66), b = random_vector(rng, 66);
    std::vector<double> mix(66);
    for (std::size_t i = 0; i < mix.size(); ++i) mix[i] = 2.0 * a[i] - 0.5 * b[i];
    const auto ga = backward(net, cache, a).params, gb = backward(net, cache, b).params;
    const auto gm = backward(net, cache, mix).params;
    for (std::size_t i = 0; i < gm.size(); ++i) ASSERT_NEAR(gm[i], 2.0 * ga[i] - 0.5 * gb[i], 1e-9);
}

TEST(Tcn, StaleCacheIsRejected) {
    Network net(NetworkSpec::desk_default(2, 4), 7);
    Rng rng(7);
    ForwardCache cache;
    forward(net, random_input(rng, 2, 4), &cache);
    const std::vector<double> g(24, 1.0);
    EXPECT_NO_THROW(backward(net, cache, g));
    net.adam_step(std::vector<double>(net.params().size(), 1.0), AdamConfig{});
    EXPECT_THROW(backward(net, cache, g), StaleCacheError);
    EXPECT_THROW(backward(net, ForwardCache{}, g), StaleCacheError);
}

TEST(Tcn, ZeroLearningRateKeepsParameters) {
    Network net(NetworkSpec::desk_default(2, 4), 8);
    const auto before = net.params();
    AdamConfig cfg;
    cfg.learning_rate = 0.0;
    net.adam_step(std::vector<double>(before.size(), 0.3), cfg);
    EXPECT_EQ(net.params(), before);
    EXPECT_EQ(net.step(), 1u);
}

TEST(Tcn, AdamFirstStepMovesBySignTimesLearningRate) {
    Network net(NetworkSpec::desk_default(1, 2), 9);
    const auto before = net.params();
    std::vector<double> g(before.size());
    for (std::size_t i = 0; i < g.size(); ++i) g[i] = i % 2 == 0 ? 0.5 : -2.0;
    net.adam_step(g, AdamConfig{});
    for (std::size_t i = 0; i < g.size(); ++i) EXPECT_NEAR(net.params()[i] - before[i], g[i] > 0 ? -1e-3 : 1e-3, 1e-10);
}

TEST(Tcn, TrainingReducesLossOnFixedBatch) {
    SynthConfig sc;
    sc.frames = 32;
    std::vector<MotionSequence> targets;
    std::vector<MotionSequence2D> inputs;
    for (int i = 0; i < 4; ++i) {
        // Metres keep the unnormalised problem well scaled.
        auto seq = generate_one(sc, static_cast<std::uint64_t>(i));
        std::vector<double> d(seq.data().begin(), seq.data().end());
        for (double& v : d) v /= 1000.0;
        targets.push_back(seq.with_data(d));
    }
    for (const auto& t : targets) inputs.push_back(project_2d(t));
    std::vector<TrainSample> batch;
    for (std::size_t i = 0; i < targets.size(); ++i) batch.push_back({&inputs[i], &targets[i]});

    for (auto mode : {LossMode::kPositionOnly, LossMode::kPositionLaplacian}) {
        Network net(NetworkSpec::desk_default(5, 16), 10);
        std::vector<double> losses;
        for (int s = 0; s < 100; ++s) losses.push_back(train_step(net, batch, mode, LossConfig{}, AdamConfig{}));
        int increases = 0;
        for (std::size_t i = 1; i < losses.size(); ++i) increases += losses[i] >= losses[i - 1];
        EXPECT_LT(losses.back(), losses.front()) << to_string(mode);
        EXPECT_LE(increases, 5) << to_string(mode);
    }
}

TEST(Tcn, DuplicatedBatchGivesSameGradient) {
    const Network net(NetworkSpec::desk_default(3, 8), 11);
    Rng rng(11);
    const auto in = random_input(rng, 3, 10);
    const auto target = oracle::random_motion(rng, Skeleton::chain(3), 10, 1.0);
    const auto one = batch_gradient(net, {{&in, &target}}, LossMode::kPositionLaplacian, LossConfig{});
    const auto two = batch_gradient(net, {{&in, &target}, {&in, &target}}, LossMode::kPositionLaplacian, LossConfig{});
    EXPECT_NEAR(one.loss, two.loss, 1e-12);
    EXPECT_LE(oracle::max_abs_diff(one.grad, two.grad), 1e-12);
}

TEST(Tcn, DeterministicForSameSeed) {
    Rng rng(12);
    const auto in = random_input(rng, 4, 16);
    const auto target = oracle::random_motion(rng, Skeleton::chain(4), 16, 1.0);
    auto run = [&] {
        Network net(NetworkSpec::desk_default(4, 8), 12);
        for (int i = 0; i < 5; ++i) train_step(net, {{&in, &target}}, LossMode::kPositionMotion, LossConfig{}, AdamConfig{});
        return net.params();
    };
    EXPECT_EQ(run(), run());
    EXPECT_NE(Network(NetworkSpec::desk_default(4, 8), 12).params(), Network(NetworkSpec::desk_default(4, 8), 13).params());
}

TEST(Tcn, ReceptiveFieldBoundsInfluence) {
    const auto spec = NetworkSpec::desk_default(2, 8);
    ASSERT_EQ(spec.receptive_radius(), 8);
    const Network net(spec, 13);
    Rng rng(13);
    const int T = 40;
    auto base = random_input(rng, 2, T);
    const auto out_a = forward(net, base);
    for (int t0 : {0, 17, 39}) {
        std::vector<double> d(base.data().begin(), base.data().end());
        for (int c = 0; c < 4; ++c) d[static_cast<std::size_t>(t0) * 4 + c] += 5.0;
        const auto out_b = forward(net, base.with_data(d));
        for (int t = 0; t < T; ++t) {
            if (std::abs(t - t0) <= spec.receptive_radius()) continue;
            for (int j = 0; j < 2; ++j)
                for (int c = 0; c < 3; ++c) ASSERT_EQ(out_a.at(t, j)[c], out_b.at(t, j)[c]) << t0 << " " << t;
        }
    }
}

TEST(Tcn, NonFiniteLossIsReported) {
    Network net(NetworkSpec::desk_default(1, 2), 14);
    auto p = net.params();
    p.back() = 1e308;
    net.set_params(p);
    const MotionSequence2D in(Skeleton::chain(1), 50.0, 2, {0, 0, 0, 0});
    const MotionSequence target(Skeleton::chain(1), 50.0, 2, {-1e308, -1e308, -1e308, -1e308, -1e308, -1e308});
    EXPECT_THROW(train_step(net, {{&in, &target}}, LossMode::kPositionOnly, LossConfig{}, AdamConfig{}), NonFiniteLossError);
}

TEST(Tcn, SpecValidation) {
    auto spec = NetworkSpec::desk_default(5);
    EXPECT_NO_THROW(spec.validate(5));
    EXPECT_THROW(spec.validate(4), std::invalid_argument);
    auto even = spec;
    even.layers[1].kernel_size = 2;
    EXPECT_THROW(even.validate(5), std::invalid_argument);
    auto bad_residual = spec;
    bad_residual.layers[0].residual = true;
    EXPECT_THROW(bad_residual.validate(5), std::invalid_argument);
    auto chained = spec;
    chained.layers[2].out_channels = 16;
    EXPECT_THROW(chained.validate(5), std::invalid_argument);
    auto activated = spec;
    activated.layers.back().has_activation = true;
    EXPECT_THROW(activated.validate(5), std::invalid_argument);
    EXPECT_EQ(spec.parameter_count(), static_cast<std::size_t>(32 * 10 * 3 + 32 + 2 * (32 * 32 * 3 + 32) + 15 * 32 * 3 + 15));
}

TEST(Tcn, InputShapeMismatchThrows) {
    const Network net(NetworkSpec::desk_default(5), 15);
    Rng rng(15);
    EXPECT_THROW(forward(net, random_input(rng, 4, 8)), ShapeError);
}

TEST(Checkpoint, RoundTripAndLayout) {
    Network net(NetworkSpec::desk_default(3, 8), 16);
    net.adam_step(std::vector<double>(net.params().size(), 0.1), AdamConfig{});
    const nlohmann::json meta{{"mode", "P_ONLY"}};
    const auto bytes = encode_checkpoint(net, meta);
    EXPECT_EQ(bytes.substr(0, 8), "LAPMOCK1");
    EXPECT_EQ(bytes, encode_checkpoint(net, meta));

    const auto ck = decode_checkpoint(bytes);
    EXPECT_EQ(ck.spec, net.spec());
    EXPECT_EQ(ck.step, 1u);
    EXPECT_EQ(ck.seed, 16u);
    EXPECT_EQ(ck.meta, meta);
    ASSERT_EQ(ck.params.size(), net.params().size());
    for (std::size_t i = 0; i < ck.params.size(); ++i) ASSERT_EQ(ck.params[i], static_cast<float>(net.params()[i]));

    const auto restored = ck.to_network();
    EXPECT_EQ(encode_checkpoint(restored, meta), bytes);
    Rng rng(16);
    const auto in = random_input(rng, 3, 12);
    const auto a = forward(net, in), b = forward(restored, in);
    EXPECT_LE(oracle::max_abs_diff({a.data().begin(), a.data().end()}, {b.data().begin(), b.data().end()}), 1e-4);
}

TEST(Checkpoint, CorruptInputIsRejected) {
    const Network net(NetworkSpec::desk_default(2, 4), 17);
    auto bytes = encode_checkpoint(net);
    EXPECT_THROW(decode_checkpoint("LAPMOCK2" + bytes.substr(8)), std::runtime_error);
    EXPECT_THROW(decode_checkpoint(bytes.substr(0, bytes.size() - 1)), std::runtime_error);
    EXPECT_THROW(decode_checkpoint(bytes.substr(0, 12)), std::runtime_error);
}
