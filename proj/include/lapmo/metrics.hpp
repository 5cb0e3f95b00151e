#pragma once

// Evaluation metrics: MPJPE (Protocol-1, root aligned), MPJVE on first
// differences and MPJAccE on second differences. Units follow the input
// (mm, mm/frame, mm/frame^2).

#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "lapmo/motion.hpp"

namespace lapmo {

/// A T' x J x 3 array of per-joint vectors (velocities or accelerations).
struct JointVectors {
    int frames = 0;
    int joints = 0;
    std::vector<double> values;
};

class SequenceTooShort : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

namespace detail {

inline double mean_row_distance(std::span<const double> a, std::span<const double> b) {
    if (a.empty()) return 0.0;
    double total = 0.0;
    for (std::size_t r = 0; r < a.size(); r += 3) {
        const double dx = a[r] - b[r];
        const double dy = a[r + 1] - b[r + 1];
        const double dz = a[r + 2] - b[r + 2];
        total += std::sqrt(dx * dx + dy * dy + dz * dz);
    }
    return total / static_cast<double>(a.size() / 3);
}

}  // namespace detail

/// Mean per-joint distance without any alignment.
inline double mpjpe(const MotionSequence& est, const MotionSequence& gt) {
    require_same_shape(est, gt);
    return detail::mean_row_distance(est.data(), gt.data());
}

inline double mpjpe_protocol1(const MotionSequence& est, const MotionSequence& gt) {
    require_same_shape(est, gt);
    return detail::mean_row_distance(root_align(est).data(), root_align(gt).data());
}

/// v[t] = P[t + 1] - P[t].
inline JointVectors velocity(const MotionSequence& seq) {
    if (seq.frames() < 2) throw SequenceTooShort("sequence too short for velocity (T < 2)");
    const std::size_t stride = static_cast<std::size_t>(seq.joints()) * 3;
    JointVectors out{seq.frames() - 1, seq.joints(), {}};
    const auto p = seq.data();
    out.values.resize(p.size() - stride);
    for (std::size_t i = 0; i < out.values.size(); ++i) out.values[i] = p[i + stride] - p[i];
    return out;
}

enum class AccelerationForm {
    kSecondDifference,  // P[t+2] - 2 P[t+1] + P[t]
    kPrinted,           // P[t+2] - 2 P[t+1] - P[t], kept for comparison only
};

inline JointVectors acceleration(const MotionSequence& seq, AccelerationForm form = AccelerationForm::kSecondDifference) {
    if (seq.frames() < 3) throw SequenceTooShort("sequence too short for acceleration (T < 3)");
    const std::size_t stride = static_cast<std::size_t>(seq.joints()) * 3;
    const double last = form == AccelerationForm::kSecondDifference ? 1.0 : -1.0;
    JointVectors out{seq.frames() - 2, seq.joints(), {}};
    const auto p = seq.data();
    out.values.resize(p.size() - 2 * stride);
    for (std::size_t i = 0; i < out.values.size(); ++i)
        out.values[i] = p[i + 2 * stride] - 2.0 * p[i + stride] + last * p[i];
    return out;
}

inline double mpjve(const MotionSequence& est, const MotionSequence& gt) {
    require_same_shape(est, gt);
    return detail::mean_row_distance(velocity(est).values, velocity(gt).values);
}

inline double mpjacce(const MotionSequence& est, const MotionSequence& gt,
                      AccelerationForm form = AccelerationForm::kSecondDifference) {
    require_same_shape(est, gt);
    return detail::mean_row_distance(acceleration(est, form).values, acceleration(gt, form).values);
}

struct MetricValues {
    double mpjpe = 0.0;
    std::optional<double> mpjve;    // absent when T < 2
    std::optional<double> mpjacce;  // absent when T < 3
};

/// Per-action metrics plus the unweighted across-action average.
struct MetricReport {
    std::map<std::string, MetricValues> per_action;

    /// Unweighted mean over actions. Actions lacking a value (sequence too
    /// short) are skipped for that metric.
    MetricValues average() const {
        MetricValues avg;
        double sums[3] = {0.0, 0.0, 0.0};
        int counts[3] = {0, 0, 0};
        for (const auto& [label, v] : per_action) {
            sums[0] += v.mpjpe;
            ++counts[0];
            if (v.mpjve) { sums[1] += *v.mpjve; ++counts[1]; }
            if (v.mpjacce) { sums[2] += *v.mpjacce; ++counts[2]; }
        }
        if (counts[0] > 0) avg.mpjpe = sums[0] / counts[0];
        if (counts[1] > 0) avg.mpjve = sums[1] / counts[1];
        if (counts[2] > 0) avg.mpjacce = sums[2] / counts[2];
        return avg;
    }
};

inline MetricValues evaluate_sequence(const MotionSequence& est, const MotionSequence& gt) {
    require_same_shape(est, gt);
    MetricValues v;
    v.mpjpe = mpjpe_protocol1(est, gt);
    if (est.frames() >= 2) v.mpjve = mpjve(est, gt);
    if (est.frames() >= 3) v.mpjacce = mpjacce(est, gt);
    return v;
}

inline MetricReport evaluate_pair(const MotionSequence& est, const MotionSequence& gt, const std::string& action_label) {
    MetricReport r;
    r.per_action.emplace(action_label, evaluate_sequence(est, gt));
    return r;
}

struct LabeledPair {
    const MotionSequence* est = nullptr;
    const MotionSequence* gt = nullptr;
    std::string label;
};

/// Several sequences may share a label; they are averaged (unweighted) into
/// that action's entry before the across-action average is taken.
inline MetricReport evaluate_batch(const std::vector<LabeledPair>& pairs) {
    struct Acc {
        double sums[3] = {0.0, 0.0, 0.0};
        int counts[3] = {0, 0, 0};
    };
    std::map<std::string, Acc> acc;
    for (const auto& p : pairs) {
        const MetricValues v = evaluate_sequence(*p.est, *p.gt);
        Acc& a = acc[p.label];
        a.sums[0] += v.mpjpe;
        ++a.counts[0];
        if (v.mpjve) { a.sums[1] += *v.mpjve; ++a.counts[1]; }
        if (v.mpjacce) { a.sums[2] += *v.mpjacce; ++a.counts[2]; }
    }
    MetricReport r;
    for (const auto& [label, a] : acc) {
        MetricValues v;
        v.mpjpe = a.sums[0] / a.counts[0];
        if (a.counts[1] > 0) v.mpjve = a.sums[1] / a.counts[1];
        if (a.counts[2] > 0) v.mpjacce = a.sums[2] / a.counts[2];
        r.per_action.emplace(label, v);
    }
    return r;
}

inline double unweighted_mean(const std::vector<double>& values) {
    if (values.empty()) return 0.0;
    double s = 0.0;
    for (double v : values) s += v;
    return s / static_cast<double>(values.size());
}

}  // namespace lapmo
