#pragma once

// Deterministic synthetic motion corpus.
//
// Each non-root joint carries a local rotation Rz(theta_z) * Rx(theta_x) about
// its parent. Every angle is a sum of sinusoids
//     theta(t) = sum_i a_i * sin(2 pi f_i t / fps + phi_i),
// and joint positions come from forward kinematics over fixed rest offsets,
// so bone lengths are exactly constant over time.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "lapmo/motion.hpp"
#include "lapmo/rng.hpp"

namespace lapmo {

struct SkeletonPreset {
    Skeleton skeleton;
    std::vector<Vec3> rest_offsets;  // offset from parent in the parent frame (mm); root entry unused
};

/// Kinematic chain with equal bones along +y.
inline SkeletonPreset chain_preset(int joints = 5, double bone_length = 100.0) {
    SkeletonPreset p{Skeleton::chain(joints), {}};
    p.rest_offsets.assign(static_cast<std::size_t>(joints), Vec3{0.0, bone_length, 0.0});
    p.rest_offsets[0] = Vec3{0.0, 0.0, 0.0};
    return p;
}

/// 17-joint humanoid in the common Human3.6M joint order, rooted at the hip.
inline SkeletonPreset humanoid17_preset() {
    std::vector<int> parents{kNoParent, 0, 1, 2, 0, 4, 5, 0, 7, 8, 9, 8, 11, 12, 8, 14, 15};
    std::vector<std::string> names{"hip",       "r_hip",    "r_knee",     "r_foot",  "l_hip",    "l_knee",
                                   "l_foot",    "spine",    "thorax",     "neck",    "head",     "l_shoulder",
                                   "l_elbow",   "l_wrist",  "r_shoulder", "r_elbow", "r_wrist"};
    std::vector<Vec3> offsets{{0, 0, 0},      {-130, 0, 0},  {0, -450, 0}, {0, -440, 0}, {130, 0, 0},   {0, -450, 0},
                              {0, -440, 0},   {0, 230, 0},   {0, 250, 0},  {0, 110, 0},  {0, 120, 0},   {150, 0, 0},
                              {0, -280, 0},   {0, -250, 0},  {-150, 0, 0}, {0, -280, 0}, {0, -250, 0}};
    return {Skeleton(std::move(parents), 0, std::move(names)), std::move(offsets)};
}

struct SynthConfig {
    SkeletonPreset preset = chain_preset();
    int frames = 64;
    double fps = 50.0;
    int harmonics = 3;
    double min_frequency_hz = 0.2;
    double max_frequency_hz = 2.0;
    double min_amplitude_rad = 0.05;
    double max_amplitude_rad = 0.35;
    Vec3 root_position{0.0, 0.0, 0.0};
    std::uint64_t seed = 0;

    void validate() const {
        if (frames < 1) throw std::invalid_argument("synth config: frames must be >= 1");
        if (!(fps > 0.0)) throw std::invalid_argument("synth config: fps must be positive");
        if (harmonics < 0) throw std::invalid_argument("synth config: harmonics must be >= 0");
        if (min_frequency_hz < 0.0 || max_frequency_hz < min_frequency_hz)
            throw std::invalid_argument("synth config: bad frequency range");
        if (max_frequency_hz >= fps / 2.0)
            throw std::invalid_argument("synth config: max frequency must be below fps/2 (aliasing)");
        if (min_amplitude_rad < 0.0 || max_amplitude_rad < min_amplitude_rad)
            throw std::invalid_argument("synth config: bad amplitude range");
        if (max_amplitude_rad * harmonics >= std::numbers::pi / 2.0)
            throw std::invalid_argument("synth config: harmonics * max amplitude must stay below pi/2");
        if (preset.rest_offsets.size() != static_cast<std::size_t>(preset.skeleton.joint_count()))
            throw std::invalid_argument("synth config: one rest offset per joint required");
    }
};

namespace detail {

struct Harmonic {
    double amplitude;
    double frequency;
    double phase;
};

using Mat3 = std::array<double, 9>;

inline Mat3 matmul(const Mat3& a, const Mat3& b) {
    Mat3 r{};
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            for (int k = 0; k < 3; ++k) r[static_cast<std::size_t>(i * 3 + j)] += a[static_cast<std::size_t>(i * 3 + k)] * b[static_cast<std::size_t>(k * 3 + j)];
    return r;
}

inline Mat3 rot_x(double a) { return {1, 0, 0, 0, std::cos(a), -std::sin(a), 0, std::sin(a), std::cos(a)}; }
inline Mat3 rot_z(double a) { return {std::cos(a), -std::sin(a), 0, std::sin(a), std::cos(a), 0, 0, 0, 1}; }

inline Vec3 apply(const Mat3& m, const Vec3& v) {
    return {m[0] * v[0] + m[1] * v[1] + m[2] * v[2], m[3] * v[0] + m[4] * v[1] + m[5] * v[2],
            m[6] * v[0] + m[7] * v[1] + m[8] * v[2]};
}

/// Parents before children.
inline std::vector<int> topological_order(const Skeleton& sk) {
    std::vector<int> order{sk.root_index()};
    for (std::size_t k = 0; k < order.size(); ++k)
        for (int j = 0; j < sk.joint_count(); ++j)
            if (sk.parent(j) == order[k]) order.push_back(j);
    return order;
}

}  // namespace detail

/// Sequence `index` of the corpus defined by config.seed.
inline MotionSequence generate_one(const SynthConfig& config, std::uint64_t index) {
    config.validate();
    const auto& sk = config.preset.skeleton;
    const int J = sk.joint_count();
    Rng rng(derive_seed(config.seed, index));

    // [joint][axis][harmonic]
    std::vector<std::array<std::vector<detail::Harmonic>, 2>> angles(static_cast<std::size_t>(J));
    for (int j = 0; j < J; ++j)
        for (int axis = 0; axis < 2; ++axis)
            for (int h = 0; h < config.harmonics; ++h) {
                detail::Harmonic hm{};
                hm.amplitude = rng.uniform(config.min_amplitude_rad, config.max_amplitude_rad);
                hm.frequency = rng.uniform(config.min_frequency_hz, config.max_frequency_hz);
                hm.phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
                angles[static_cast<std::size_t>(j)][static_cast<std::size_t>(axis)].push_back(hm);
            }

    const auto order = detail::topological_order(sk);
    std::vector<double> data(static_cast<std::size_t>(config.frames) * J * 3);
    std::vector<detail::Mat3> global(static_cast<std::size_t>(J));
    std::vector<Vec3> pos(static_cast<std::size_t>(J));
    for (int t = 0; t < config.frames; ++t) {
        const double time = static_cast<double>(t) / config.fps;
        for (int j : order) {
            double theta[2] = {0.0, 0.0};
            for (int axis = 0; axis < 2; ++axis)
                for (const auto& hm : angles[static_cast<std::size_t>(j)][static_cast<std::size_t>(axis)])
                    theta[axis] += hm.amplitude * std::sin(2.0 * std::numbers::pi * hm.frequency * time + hm.phase);
            const detail::Mat3 local = detail::matmul(detail::rot_z(theta[0]), detail::rot_x(theta[1]));
            const auto ju = static_cast<std::size_t>(j);
            if (j == sk.root_index()) {
                global[ju] = local;
                pos[ju] = config.root_position;
            } else {
                const auto pu = static_cast<std::size_t>(sk.parent(j));
                global[ju] = detail::matmul(global[pu], local);
                const Vec3 d = detail::apply(global[ju], config.preset.rest_offsets[ju]);
                pos[ju] = {pos[pu][0] + d[0], pos[pu][1] + d[1], pos[pu][2] + d[2]};
            }
        }
        for (int j = 0; j < J; ++j)
            for (int c = 0; c < 3; ++c)
                data[(static_cast<std::size_t>(t) * J + j) * 3 + c] = pos[static_cast<std::size_t>(j)][static_cast<std::size_t>(c)];
    }
    return MotionSequence(sk, config.fps, config.frames, std::move(data));
}

inline std::vector<MotionSequence> generate(const SynthConfig& config, int count) {
    std::vector<MotionSequence> out;
    out.reserve(static_cast<std::size_t>(std::max(count, 0)));
    for (int i = 0; i < count; ++i) out.push_back(generate_one(config, static_cast<std::uint64_t>(i)));
    return out;
}

enum class Projection { kOrthoXY, kPerspective };

struct ProjectionParams {
    Projection mode = Projection::kOrthoXY;
    double focal = 1000.0;
    double min_depth = 1e-6;
    double noise_std = 0.0;  // additive 2D noise
    std::uint64_t noise_seed = 0;
};

inline MotionSequence2D project_2d(const MotionSequence& seq, const ProjectionParams& params = {}) {
    std::vector<double> out;
    out.reserve(seq.node_count() * 2);
    const auto p = seq.data();
    for (std::size_t r = 0; r < p.size(); r += 3) {
        if (params.mode == Projection::kOrthoXY) {
            out.push_back(p[r]);
            out.push_back(p[r + 1]);
        } else {
            const double z = p[r + 2];
            if (!(z > params.min_depth))
                throw std::domain_error("project_2d: nonpositive depth " + std::to_string(z) + " at node " +
                                        std::to_string(r / 3));
            out.push_back(params.focal * p[r] / z);
            out.push_back(params.focal * p[r + 1] / z);
        }
    }
    if (params.noise_std > 0.0) {
        Rng rng(params.noise_seed);
        for (double& v : out) v += params.noise_std * rng.normal();
    }
    return MotionSequence2D(seq.skeleton(), seq.fps(), seq.frames(), std::move(out));
}

struct CorpusSplit {
    std::vector<int> train;
    std::vector<int> test;
};

/// Seeded permutation of [0, count); the last `test_count` indices form the
/// test split.
inline CorpusSplit split_indices(int count, int test_count, std::uint64_t seed) {
    if (test_count < 0 || test_count > count) throw std::invalid_argument("split: test_count out of range");
    std::vector<int> idx(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) idx[static_cast<std::size_t>(i)] = i;
    Rng rng(derive_seed(seed, 0x5b117ULL));
    for (std::size_t i = idx.size(); i > 1; --i) std::swap(idx[i - 1], idx[rng.below(i)]);
    CorpusSplit s;
    s.train.assign(idx.begin(), idx.end() - test_count);
    s.test.assign(idx.end() - test_count, idx.end());
    std::sort(s.train.begin(), s.train.end());
    std::sort(s.test.begin(), s.test.end());
    return s;
}

inline nlohmann::ordered_json synth_config_to_json(const SynthConfig& c) {
    nlohmann::ordered_json j;
    auto parents = nlohmann::ordered_json::array();
    for (int p : c.preset.skeleton.parents()) {
        if (p == kNoParent)
            parents.push_back(nullptr);
        else
            parents.push_back(p);
    }
    j["parents"] = parents;
    j["joint_names"] = c.preset.skeleton.joint_names();
    j["root_index"] = c.preset.skeleton.root_index();
    j["rest_offsets"] = c.preset.rest_offsets;
    j["frames"] = c.frames;
    j["fps"] = c.fps;
    j["harmonics"] = c.harmonics;
    j["frequency_hz"] = {c.min_frequency_hz, c.max_frequency_hz};
    j["amplitude_rad"] = {c.min_amplitude_rad, c.max_amplitude_rad};
    j["root_position"] = c.root_position;
    j["seed"] = c.seed;
    return j;
}

/// Reads a synth config. Missing keys keep their defaults; "skeleton" may
/// name a preset ("chain5", "humanoid17") instead of spelling out parents.
inline SynthConfig synth_config_from_json(const nlohmann::json& j) {
    SynthConfig c;
    if (j.contains("skeleton")) {
        const auto name = j["skeleton"].get<std::string>();
        if (name == "chain5")
            c.preset = chain_preset(5, j.value("bone_length", 100.0));
        else if (name == "humanoid17")
            c.preset = humanoid17_preset();
        else
            throw std::invalid_argument("synth config: unknown skeleton preset '" + name + "'");
    } else if (j.contains("chain_joints")) {
        c.preset = chain_preset(j["chain_joints"].get<int>(), j.value("bone_length", 100.0));
    }
    if (j.contains("parents")) {
        std::vector<int> parents;
        for (const auto& p : j["parents"]) parents.push_back(p.is_null() ? kNoParent : p.get<int>());
        c.preset.skeleton = Skeleton(std::move(parents), j.value("root_index", 0),
                                     j.value("joint_names", std::vector<std::string>{}));
        c.preset.rest_offsets = j.at("rest_offsets").get<std::vector<Vec3>>();
    }
    c.frames = j.value("frames", c.frames);
    c.fps = j.value("fps", c.fps);
    c.harmonics = j.value("harmonics", c.harmonics);
    if (j.contains("frequency_hz")) {
        c.min_frequency_hz = j["frequency_hz"].at(0).get<double>();
        c.max_frequency_hz = j["frequency_hz"].at(1).get<double>();
    }
    if (j.contains("amplitude_rad")) {
        c.min_amplitude_rad = j["amplitude_rad"].at(0).get<double>();
        c.max_amplitude_rad = j["amplitude_rad"].at(1).get<double>();
    }
    if (j.contains("root_position")) c.root_position = j["root_position"].get<Vec3>();
    c.seed = j.value("seed", c.seed);
    c.validate();
    return c;
}

/// FNV-1a over the canonical config JSON.
inline std::uint64_t config_hash(const SynthConfig& c) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : synth_config_to_json(c).dump()) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    return h;
}

}  // namespace lapmo
