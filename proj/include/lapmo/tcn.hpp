#pragma once

// Sequence-to-sequence temporal convolution network.
//
// A stack of dilated 1D convolutions maps a T x 2J input sequence to a T x 3J
// output sequence. Every layer uses "same" padding with edge replication, so
// the sequence length is preserved for any T >= 1. Activations are stored
// channel-major: x[c * T + t].
//
// Parameters live in one flat buffer. Layer by layer: weights
// [out][in][kernel] row-major, then the bias [out]. The checkpoint blob and the
// gradient buffers use the same layout.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "lapmo/losses.hpp"
#include "lapmo/motion.hpp"
#include "lapmo/rng.hpp"

namespace lapmo {

struct ConvLayerSpec {
    int in_channels = 1;
    int out_channels = 1;
    int kernel_size = 3;
    int dilation = 1;
    bool has_activation = true;  // ReLU
    bool residual = false;       // y = x + f(x); requires in == out

    bool operator==(const ConvLayerSpec&) const = default;
};

struct NetworkSpec {
    std::vector<ConvLayerSpec> layers;

    bool operator==(const NetworkSpec&) const = default;

    /// Four layers, kernel 3, dilations 1-2-4-1, ReLU, residual connections
    /// on the two hidden-to-hidden layers.
    static NetworkSpec desk_default(int joints, int hidden = 32) {
        NetworkSpec s;
        s.layers.push_back({2 * joints, hidden, 3, 1, true, false});
        s.layers.push_back({hidden, hidden, 3, 2, true, true});
        s.layers.push_back({hidden, hidden, 3, 4, true, true});
        s.layers.push_back({hidden, 3 * joints, 3, 1, false, false});
        return s;
    }

    void validate(int joints) const {
        if (layers.empty()) throw std::invalid_argument("network spec: no layers");
        for (std::size_t i = 0; i < layers.size(); ++i) {
            const auto& l = layers[i];
            const std::string where = "network spec: layer " + std::to_string(i);
            if (l.in_channels <= 0 || l.out_channels <= 0) throw std::invalid_argument(where + ": channel counts must be positive");
            if (l.kernel_size <= 0 || l.kernel_size % 2 == 0) throw std::invalid_argument(where + ": kernel_size must be odd");
            if (l.dilation < 1) throw std::invalid_argument(where + ": dilation must be >= 1");
            if (l.residual && l.in_channels != l.out_channels)
                throw std::invalid_argument(where + ": residual needs in_channels == out_channels");
            if (i + 1 < layers.size() && l.out_channels != layers[i + 1].in_channels)
                throw std::invalid_argument(where + ": out_channels does not match next layer's in_channels");
        }
        if (joints > 0) {
            if (layers.front().in_channels != 2 * joints)
                throw std::invalid_argument("network spec: first layer must take 2J = " + std::to_string(2 * joints) + " channels");
            if (layers.back().out_channels != 3 * joints)
                throw std::invalid_argument("network spec: last layer must produce 3J = " + std::to_string(3 * joints) + " channels");
        }
        if (layers.back().has_activation) throw std::invalid_argument("network spec: last layer must not have an activation");
    }

    /// Number of input frames on each side that can reach an output frame.
    int receptive_radius() const {
        int r = 0;
        for (const auto& l : layers) r += (l.kernel_size - 1) / 2 * l.dilation;
        return r;
    }

    std::size_t parameter_count() const {
        std::size_t n = 0;
        for (const auto& l : layers)
            n += static_cast<std::size_t>(l.out_channels) * static_cast<std::size_t>(l.in_channels) *
                     static_cast<std::size_t>(l.kernel_size) +
                 static_cast<std::size_t>(l.out_channels);
        return n;
    }
};

inline void to_json(nlohmann::json& j, const ConvLayerSpec& l) {
    j = nlohmann::json{{"in_channels", l.in_channels}, {"out_channels", l.out_channels}, {"kernel_size", l.kernel_size},
                       {"dilation", l.dilation},       {"has_activation", l.has_activation}, {"residual", l.residual}};
}

inline void from_json(const nlohmann::json& j, ConvLayerSpec& l) {
    j.at("in_channels").get_to(l.in_channels);
    j.at("out_channels").get_to(l.out_channels);
    j.at("kernel_size").get_to(l.kernel_size);
    j.at("dilation").get_to(l.dilation);
    l.has_activation = j.value("has_activation", true);
    l.residual = j.value("residual", false);
}

inline void to_json(nlohmann::json& j, const NetworkSpec& s) { j = nlohmann::json{{"layers", s.layers}}; }
inline void from_json(const nlohmann::json& j, NetworkSpec& s) { j.at("layers").get_to(s.layers); }

struct AdamConfig {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

class StaleCacheError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

class NonFiniteLossError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Activations recorded by a forward pass, consumed by backward().
struct ForwardCache {
    std::uint64_t version = 0;
    int frames = 0;
    int joints = 0;
    bool valid = false;
    std::vector<std::vector<double>> layer_inputs;  // channel-major
    std::vector<std::vector<double>> preactivations;
};

struct Gradients {
    std::vector<double> params;  // flat, same layout as Network::params()
    std::vector<double> input;   // T x J x 2, same layout as MotionSequence2D::data()
};

/// Network weights plus Adam state. `version` changes whenever the
/// parameters change, which is how backward() detects a stale cache.
class Network {
public:
    Network(NetworkSpec spec, std::uint64_t seed) : spec_(std::move(spec)), seed_(seed) {
        spec_.validate(0);
        params_.resize(spec_.parameter_count());
        Rng rng(seed);
        std::size_t off = 0;
        for (const auto& l : spec_.layers) {
            const double bound = 1.0 / std::sqrt(static_cast<double>(l.in_channels * l.kernel_size));
            const std::size_t n = static_cast<std::size_t>(l.out_channels) * (static_cast<std::size_t>(l.in_channels) * l.kernel_size + 1);
            for (std::size_t i = 0; i < n; ++i) params_[off + i] = rng.uniform(-bound, bound);
            off += n;
        }
        reset_optimizer();
    }

    Network(NetworkSpec spec, std::vector<double> params, std::uint64_t seed, std::uint64_t step)
        : spec_(std::move(spec)), seed_(seed), step_(step), params_(std::move(params)) {
        spec_.validate(0);
        if (params_.size() != spec_.parameter_count())
            throw ShapeError("network parameters: expected " + std::to_string(spec_.parameter_count()) + ", got " +
                             std::to_string(params_.size()));
        detail::require_finite(params_, "network parameters");
        reset_optimizer();
    }

    const NetworkSpec& spec() const { return spec_; }
    std::uint64_t seed() const { return seed_; }
    std::uint64_t step() const { return step_; }
    std::uint64_t version() const { return version_; }
    const std::vector<double>& params() const { return params_; }
    const std::vector<double>& first_moment() const { return m_; }
    const std::vector<double>& second_moment() const { return v_; }

    void set_params(std::vector<double> p) {
        if (p.size() != params_.size()) throw ShapeError("set_params: size mismatch");
        params_ = std::move(p);
        ++version_;
    }

    void reset_optimizer() {
        m_.assign(params_.size(), 0.0);
        v_.assign(params_.size(), 0.0);
    }

    /// One bias-corrected Adam update with the given gradient.
    void adam_step(std::span<const double> grad, const AdamConfig& cfg) {
        if (grad.size() != params_.size()) throw ShapeError("adam_step: gradient size mismatch");
        ++step_;
        const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step_));
        const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step_));
        for (std::size_t i = 0; i < params_.size(); ++i) {
            m_[i] = cfg.beta1 * m_[i] + (1.0 - cfg.beta1) * grad[i];
            v_[i] = cfg.beta2 * v_[i] + (1.0 - cfg.beta2) * grad[i] * grad[i];
            params_[i] -= cfg.learning_rate * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + cfg.epsilon);
        }
        ++version_;
    }

    std::size_t layer_offset(std::size_t layer) const {
        std::size_t off = 0;
        for (std::size_t i = 0; i < layer; ++i) {
            const auto& l = spec_.layers[i];
            off += static_cast<std::size_t>(l.out_channels) * (static_cast<std::size_t>(l.in_channels) * l.kernel_size + 1);
        }
        return off;
    }

private:
    NetworkSpec spec_;
    std::uint64_t seed_ = 0;
    std::uint64_t step_ = 0;
    std::uint64_t version_ = 1;
    std::vector<double> params_;
    std::vector<double> m_;
    std::vector<double> v_;
};

namespace detail {

/// For each output frame t, out[t] += w * in[clamp(t + shift)].
inline void shifted_axpy(double w, const double* in, double* out, int T, int shift) {
    const int lo = std::clamp(-shift, 0, T);
    const int hi = std::clamp(T - shift, lo, T);
    for (int t = 0; t < lo; ++t) out[t] += w * in[0];
    for (int t = lo; t < hi; ++t) out[t] += w * in[t + shift];
    for (int t = hi; t < T; ++t) out[t] += w * in[T - 1];
}

/// Returns sum_t g[t] * in[clamp(t + shift)].
inline double shifted_dot(const double* g, const double* in, int T, int shift) {
    const int lo = std::clamp(-shift, 0, T);
    const int hi = std::clamp(T - shift, lo, T);
    double s = 0.0;
    for (int t = 0; t < lo; ++t) s += g[t] * in[0];
    for (int t = lo; t < hi; ++t) s += g[t] * in[t + shift];
    for (int t = hi; t < T; ++t) s += g[t] * in[T - 1];
    return s;
}

/// Adjoint of shifted_axpy: in_grad[clamp(t + shift)] += w * g[t].
inline void shifted_scatter(double w, const double* g, double* in_grad, int T, int shift) {
    const int lo = std::clamp(-shift, 0, T);
    const int hi = std::clamp(T - shift, lo, T);
    for (int t = 0; t < lo; ++t) in_grad[0] += w * g[t];
    for (int t = lo; t < hi; ++t) in_grad[t + shift] += w * g[t];
    for (int t = hi; t < T; ++t) in_grad[T - 1] += w * g[t];
}

}  // namespace detail

/// Runs the stack on channel-major input (in_channels x T). Fills `cache` when
/// it is non-null.
inline std::vector<double> forward_channels(const Network& net, std::span<const double> input, int T,
                                            ForwardCache* cache = nullptr) {
    const auto& layers = net.spec().layers;
    if (T < 1) throw std::invalid_argument("forward: T must be >= 1");
    if (input.size() != static_cast<std::size_t>(layers.front().in_channels) * static_cast<std::size_t>(T))
        throw ShapeError("forward: input has " + std::to_string(input.size()) + " values, expected " +
                         std::to_string(layers.front().in_channels) + " channels x " + std::to_string(T) + " frames");
    if (cache) {
        cache->layer_inputs.clear();
        cache->preactivations.clear();
        cache->frames = T;
        cache->version = net.version();
        cache->valid = true;
    }
    std::vector<double> x(input.begin(), input.end());
    const auto& params = net.params();
    std::size_t off = 0;
    for (const auto& l : layers) {
        const int K = l.kernel_size;
        const int half = (K - 1) / 2;
        const double* W = params.data() + off;
        const double* b = W + static_cast<std::size_t>(l.out_channels) * l.in_channels * K;
        std::vector<double> z(static_cast<std::size_t>(l.out_channels) * T);
        for (int o = 0; o < l.out_channels; ++o) {
            double* zo = z.data() + static_cast<std::size_t>(o) * T;
            std::fill(zo, zo + T, b[o]);
            for (int i = 0; i < l.in_channels; ++i) {
                const double* xi = x.data() + static_cast<std::size_t>(i) * T;
                for (int k = 0; k < K; ++k)
                    detail::shifted_axpy(W[(static_cast<std::size_t>(o) * l.in_channels + i) * K + k], xi, zo, T,
                                         (k - half) * l.dilation);
            }
        }
        std::vector<double> y = z;
        if (l.has_activation)
            for (double& v : y) v = v > 0.0 ? v : 0.0;
        if (l.residual)
            for (std::size_t i = 0; i < y.size(); ++i) y[i] += x[i];
        if (cache) {
            cache->layer_inputs.push_back(std::move(x));
            cache->preactivations.push_back(std::move(z));
        }
        x = std::move(y);
        off += static_cast<std::size_t>(l.out_channels) * (static_cast<std::size_t>(l.in_channels) * K + 1);
    }
    return x;
}

/// Reverse pass on channel-major output gradient. Returns parameter gradients
/// and the channel-major input gradient.
inline Gradients backward_channels(const Network& net, const ForwardCache& cache, std::span<const double> out_grad) {
    if (!cache.valid) throw StaleCacheError("backward: no forward activations cached");
    if (cache.version != net.version()) throw StaleCacheError("backward: cache is stale (parameters changed since forward)");
    const auto& layers = net.spec().layers;
    const int T = cache.frames;
    if (out_grad.size() != static_cast<std::size_t>(layers.back().out_channels) * static_cast<std::size_t>(T))
        throw ShapeError("backward: output gradient size mismatch");
    Gradients g;
    g.params.assign(net.params().size(), 0.0);
    std::vector<double> dy(out_grad.begin(), out_grad.end());
    for (std::size_t li = layers.size(); li-- > 0;) {
        const auto& l = layers[li];
        const int K = l.kernel_size;
        const int half = (K - 1) / 2;
        const std::size_t off = net.layer_offset(li);
        const double* W = net.params().data() + off;
        double* dW = g.params.data() + off;
        double* db = dW + static_cast<std::size_t>(l.out_channels) * l.in_channels * K;
        const auto& x = cache.layer_inputs[li];
        const auto& z = cache.preactivations[li];

        std::vector<double> dz = dy;
        if (l.has_activation)
            for (std::size_t i = 0; i < dz.size(); ++i)
                if (!(z[i] > 0.0)) dz[i] = 0.0;
        std::vector<double> dx(x.size(), 0.0);
        if (l.residual) dx = dy;
        for (int o = 0; o < l.out_channels; ++o) {
            const double* dzo = dz.data() + static_cast<std::size_t>(o) * T;
            double bsum = 0.0;
            for (int t = 0; t < T; ++t) bsum += dzo[t];
            db[o] += bsum;
            for (int i = 0; i < l.in_channels; ++i) {
                const double* xi = x.data() + static_cast<std::size_t>(i) * T;
                double* dxi = dx.data() + static_cast<std::size_t>(i) * T;
                for (int k = 0; k < K; ++k) {
                    const std::size_t widx = (static_cast<std::size_t>(o) * l.in_channels + i) * K + k;
                    const int shift = (k - half) * l.dilation;
                    dW[widx] += detail::shifted_dot(dzo, xi, T, shift);
                    detail::shifted_scatter(W[widx], dzo, dxi, T, shift);
                }
            }
        }
        dy = std::move(dx);
    }
    g.input = std::move(dy);
    return g;
}

namespace detail {

template <int D>
std::vector<double> frames_to_channels(std::span<const double> data, int T, int J) {
    std::vector<double> out(data.size());
    for (int t = 0; t < T; ++t)
        for (int j = 0; j < J; ++j)
            for (int c = 0; c < D; ++c)
                out[static_cast<std::size_t>(j * D + c) * T + t] = data[(static_cast<std::size_t>(t) * J + j) * D + c];
    return out;
}

template <int D>
std::vector<double> channels_to_frames(std::span<const double> data, int T, int J) {
    std::vector<double> out(data.size());
    for (int t = 0; t < T; ++t)
        for (int j = 0; j < J; ++j)
            for (int c = 0; c < D; ++c)
                out[(static_cast<std::size_t>(t) * J + j) * D + c] = data[static_cast<std::size_t>(j * D + c) * T + t];
    return out;
}

}  // namespace detail

/// Lifts a 2D sequence to 3D. The output has exactly input.frames() frames.
inline MotionSequence forward(const Network& net, const MotionSequence2D& input, ForwardCache* cache = nullptr) {
    const int T = input.frames();
    const int J = input.joints();
    if (net.spec().layers.front().in_channels != 2 * J || net.spec().layers.back().out_channels != 3 * J)
        throw ShapeError("forward: network expects " + std::to_string(net.spec().layers.front().in_channels) +
                         " input channels, sequence has 2J = " + std::to_string(2 * J));
    const auto x = detail::frames_to_channels<2>(input.data(), T, J);
    const auto y = forward_channels(net, x, T, cache);
    if (cache) cache->joints = J;
    return MotionSequence(input.skeleton(), input.fps(), T, detail::channels_to_frames<3>(y, T, J));
}

/// `loss_grad` is dLoss/dOutput in T x J x 3 layout.
inline Gradients backward(const Network& net, const ForwardCache& cache, std::span<const double> loss_grad) {
    if (!cache.valid) throw StaleCacheError("backward: no forward activations cached");
    const int T = cache.frames;
    const int J = cache.joints;
    if (loss_grad.size() != static_cast<std::size_t>(T) * J * 3) throw ShapeError("backward: loss gradient size mismatch");
    auto g = backward_channels(net, cache, detail::frames_to_channels<3>(loss_grad, T, J));
    g.input = detail::channels_to_frames<2>(g.input, T, J);
    return g;
}

struct TrainSample {
    const MotionSequence2D* input = nullptr;
    const MotionSequence* target = nullptr;
};

struct BatchGradient {
    double loss = 0.0;
    std::vector<double> grad;
};

/// Mean loss and mean parameter gradient over the batch. Samples are reduced
/// in order.
inline BatchGradient batch_gradient(const Network& net, const std::vector<TrainSample>& batch, LossMode mode,
                                    const LossConfig& loss_config, const SparseLaplacian* lap = nullptr) {
    if (batch.empty()) throw std::invalid_argument("train_step: empty batch");
    const int T = batch.front().input->frames();
    BatchGradient out;
    out.grad.assign(net.params().size(), 0.0);
    const double inv = 1.0 / static_cast<double>(batch.size());
    for (const auto& s : batch) {
        if (s.input->frames() != T || s.target->frames() != T)
            throw ShapeError("train_step: batch must have a uniform sequence length");
        ForwardCache cache;
        const MotionSequence est = forward(net, *s.input, &cache);
        const LossValue lv = combined_loss(est, *s.target, loss_config, mode, lap);
        if (!std::isfinite(lv.value))
            throw NonFiniteLossError("train_step: non-finite loss at step " + std::to_string(net.step()));
        out.loss += lv.value * inv;
        const auto g = backward(net, cache, lv.grad);
        for (std::size_t i = 0; i < out.grad.size(); ++i) out.grad[i] += g.params[i] * inv;
    }
    return out;
}

/// One Adam step on the batch. Returns the batch-mean loss before the step.
inline double train_step(Network& net, const std::vector<TrainSample>& batch, LossMode mode,
                         const LossConfig& loss_config, const AdamConfig& adam, const SparseLaplacian* lap = nullptr) {
    const auto bg = batch_gradient(net, batch, mode, loss_config, lap);
    for (double g : bg.grad)
        if (!std::isfinite(g)) throw NonFiniteLossError("train_step: non-finite gradient at step " + std::to_string(net.step()));
    net.adam_step(bg.grad, adam);
    return bg.loss;
}

// Checkpoint file:
//   bytes 0..7   "LAPMOCK1"
//   bytes 8..15  header length H, uint64 little-endian
//   next H bytes UTF-8 JSON header {"spec", "step", "seed", "param_count", "meta"}
//   remainder    param_count float32 little-endian values in parameter order
inline constexpr char kCheckpointMagic[8] = {'L', 'A', 'P', 'M', 'O', 'C', 'K', '1'};

struct Checkpoint {
    NetworkSpec spec;
    std::uint64_t step = 0;
    std::uint64_t seed = 0;
    std::vector<float> params;
    nlohmann::json meta;

    Network to_network() const {
        return Network(spec, std::vector<double>(params.begin(), params.end()), seed, step);
    }
};

namespace detail {

inline void put_u32_le(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
}

inline std::uint64_t get_u64_le(const unsigned char* p) {
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | p[i];
    return v;
}

}  // namespace detail

inline std::string encode_checkpoint(const Network& net, const nlohmann::json& meta = nlohmann::json::object()) {
    nlohmann::ordered_json header;
    header["spec"] = nlohmann::json(net.spec());
    header["step"] = net.step();
    header["seed"] = net.seed();
    header["param_count"] = net.params().size();
    header["meta"] = meta;
    const std::string h = header.dump();
    std::string out(kCheckpointMagic, sizeof(kCheckpointMagic));
    const std::uint64_t len = h.size();
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((len >> (8 * i)) & 0xffu));
    out += h;
    for (double p : net.params()) {
        const float f = static_cast<float>(p);
        std::uint32_t bits;
        std::memcpy(&bits, &f, sizeof(bits));
        detail::put_u32_le(out, bits);
    }
    return out;
}

inline Checkpoint decode_checkpoint(const std::string& bytes) {
    if (bytes.size() < 16 || std::memcmp(bytes.data(), kCheckpointMagic, 8) != 0)
        throw std::runtime_error("checkpoint: bad magic");
    const auto* raw = reinterpret_cast<const unsigned char*>(bytes.data());
    const std::uint64_t hlen = detail::get_u64_le(raw + 8);
    if (16 + hlen > bytes.size()) throw std::runtime_error("checkpoint: truncated header");
    const auto header = nlohmann::json::parse(bytes.substr(16, hlen));
    Checkpoint ck;
    ck.spec = header.at("spec").get<NetworkSpec>();
    ck.step = header.at("step").get<std::uint64_t>();
    ck.seed = header.at("seed").get<std::uint64_t>();
    ck.meta = header.value("meta", nlohmann::json::object());
    const auto count = header.at("param_count").get<std::size_t>();
    if (count != ck.spec.parameter_count()) throw std::runtime_error("checkpoint: param_count does not match spec");
    const std::size_t blob = 16 + hlen;
    if (bytes.size() != blob + 4 * count) throw std::runtime_error("checkpoint: blob size mismatch");
    ck.params.resize(count);
    for (std::size_t i = 0; i < count; ++i) {
        const unsigned char* p = raw + blob + 4 * i;
        const std::uint32_t bits = static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
                                   (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
        std::memcpy(&ck.params[i], &bits, sizeof(float));
    }
    return ck;
}

inline void save_checkpoint(const Network& net, const std::filesystem::path& path,
                            const nlohmann::json& meta = nlohmann::json::object()) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    const auto bytes = encode_checkpoint(net, meta);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return decode_checkpoint(bytes);
}

}  // namespace lapmo
