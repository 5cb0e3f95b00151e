#pragma once

// Core motion types: skeleton topology and fixed-size pose sequences.

#include <array>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace lapmo {

using Vec3 = std::array<double, 3>;

/// Raised when a value violates a type invariant. The message names the
/// offending field.
class InvariantError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

class ShapeError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

inline constexpr int kNoParent = -1;

/// Kinematic tree. parents[j] is the parent of joint j, or kNoParent for the
/// single root.
class Skeleton {
public:
    Skeleton() = default;

    Skeleton(std::vector<int> parents, int root_index, std::vector<std::string> joint_names = {})
        : parents_(std::move(parents)), names_(std::move(joint_names)), root_(root_index) {
        validate();
    }

    /// Chain 0 <- 1 <- 2 ... rooted at joint 0.
    static Skeleton chain(int joint_count) {
        std::vector<int> parents(static_cast<std::size_t>(joint_count));
        for (int j = 0; j < joint_count; ++j) parents[static_cast<std::size_t>(j)] = j - 1;
        return Skeleton(std::move(parents), 0);
    }

    int joint_count() const { return static_cast<int>(parents_.size()); }
    int root_index() const { return root_; }
    int parent(int j) const { return parents_.at(static_cast<std::size_t>(j)); }
    const std::vector<int>& parents() const { return parents_; }
    const std::vector<std::string>& joint_names() const { return names_; }

    bool operator==(const Skeleton&) const = default;

private:
    void validate() const {
        const int J = joint_count();
        if (J <= 0) throw InvariantError("parents: skeleton must have at least one joint");
        if (!names_.empty() && static_cast<int>(names_.size()) != J)
            throw InvariantError("joint_names: length " + std::to_string(names_.size()) +
                                 " does not match joint count " + std::to_string(J));
        if (root_ < 0 || root_ >= J)
            throw InvariantError("root_index: " + std::to_string(root_) + " out of range");
        int roots = 0;
        for (int j = 0; j < J; ++j) {
            const int p = parents_[static_cast<std::size_t>(j)];
            if (p == kNoParent) {
                ++roots;
                if (j != root_)
                    throw InvariantError("parents: joint " + std::to_string(j) +
                                         " has no parent but root_index is " + std::to_string(root_));
            } else if (p < 0 || p >= J) {
                throw InvariantError("parents: joint " + std::to_string(j) + " has out-of-range parent " +
                                     std::to_string(p));
            } else if (p == j) {
                throw InvariantError("parents: cyclic skeleton (joint " + std::to_string(j) +
                                     " is its own parent)");
            }
        }
        if (roots != 1) {
            if (roots == 0) throw InvariantError("parents: cyclic skeleton (no root)");
            throw InvariantError("parents: expected exactly one root, found " + std::to_string(roots));
        }
        for (int j = 0; j < J; ++j) {
            int cur = j;
            int steps = 0;
            while (cur != root_) {
                cur = parents_[static_cast<std::size_t>(cur)];
                if (++steps >= J || cur == kNoParent)
                    throw InvariantError("parents: cyclic skeleton (joint " + std::to_string(j) +
                                         " does not reach the root)");
            }
        }
    }

    std::vector<int> parents_;
    std::vector<std::string> names_;
    int root_ = 0;
};

namespace detail {

inline void require_finite(std::span<const double> values, const char* field) {
    for (std::size_t i = 0; i < values.size(); ++i)
        if (!std::isfinite(values[i]))
            throw InvariantError(std::string(field) + ": non-finite entry at flat index " + std::to_string(i));
}

}  // namespace detail

/// T x J x D array of joint coordinates, flattened as ((t * J) + j) * D + c.
template <int D>
class PoseSequence {
public:
    static constexpr int kDim = D;

    PoseSequence() = default;

    PoseSequence(Skeleton skeleton, double fps, int frames, std::vector<double> positions)
        : skeleton_(std::move(skeleton)), fps_(fps), frames_(frames), data_(std::move(positions)) {
        if (!(fps_ > 0.0) || !std::isfinite(fps_)) throw InvariantError("fps: must be a positive finite number");
        if (frames_ < 1) throw InvariantError("frames: sequence must have at least one frame");
        const std::size_t expected =
            static_cast<std::size_t>(frames_) * static_cast<std::size_t>(skeleton_.joint_count()) * D;
        if (data_.size() != expected)
            throw ShapeError("frames: expected " + std::to_string(expected) + " coordinates, got " +
                             std::to_string(data_.size()));
        detail::require_finite(data_, "frames");
    }

    const Skeleton& skeleton() const { return skeleton_; }
    double fps() const { return fps_; }
    int frames() const { return frames_; }
    int joints() const { return skeleton_.joint_count(); }
    std::size_t node_count() const { return static_cast<std::size_t>(frames_) * joints(); }
    std::span<const double> data() const { return data_; }

    std::span<const double, D> at(int t, int j) const {
        return std::span<const double, D>(data_.data() + offset(t, j), D);
    }

    std::size_t offset(int t, int j) const {
        return (static_cast<std::size_t>(t) * static_cast<std::size_t>(joints()) + static_cast<std::size_t>(j)) * D;
    }

    /// Same skeleton, fps and length with new coordinates.
    PoseSequence with_data(std::vector<double> positions) const {
        return PoseSequence(skeleton_, fps_, frames_, std::move(positions));
    }

    bool operator==(const PoseSequence&) const = default;

private:
    Skeleton skeleton_;
    double fps_ = 1.0;
    int frames_ = 0;
    std::vector<double> data_;
};

using MotionSequence = PoseSequence<3>;
using MotionSequence2D = PoseSequence<2>;

template <int D>
void require_same_shape(const PoseSequence<D>& a, const PoseSequence<D>& b) {
    if (a.frames() != b.frames() || a.joints() != b.joints())
        throw ShapeError("shape mismatch: " + std::to_string(a.frames()) + "x" + std::to_string(a.joints()) +
                         " vs " + std::to_string(b.frames()) + "x" + std::to_string(b.joints()));
}

/// Subtracts the root joint from every joint of each frame.
inline MotionSequence root_align(const MotionSequence& seq) {
    std::vector<double> out(seq.data().begin(), seq.data().end());
    const int root = seq.skeleton().root_index();
    for (int t = 0; t < seq.frames(); ++t) {
        const auto r = seq.at(t, root);
        const Vec3 origin{r[0], r[1], r[2]};
        for (int j = 0; j < seq.joints(); ++j) {
            const std::size_t o = seq.offset(t, j);
            for (int c = 0; c < 3; ++c) out[o + c] -= origin[static_cast<std::size_t>(c)];
        }
    }
    return seq.with_data(std::move(out));
}

/// Adds a constant vector to every joint of every frame.
inline MotionSequence translate(const MotionSequence& seq, const Vec3& offset) {
    std::vector<double> out(seq.data().begin(), seq.data().end());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += offset[i % 3];
    return seq.with_data(std::move(out));
}

}  // namespace lapmo
