#pragma once

// Motion-JSON reading and writing.
//
//   {"fps": 50.0, "joint_names": [...], "parents": [null, 0, ...],
//    "root_index": 0, "frames": [[[x, y, z], ...], ...]}
//
// The 2D variant stores "frames2d" with [x, y] entries. Numbers are written
// with shortest round-trip precision, so save/load is lossless.

#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

#include <nlohmann/json.hpp>

#include "lapmo/motion.hpp"

namespace lapmo {

class FormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

namespace detail {

inline Skeleton skeleton_from_json(const nlohmann::json& doc) {
    if (!doc.contains("parents") || !doc["parents"].is_array()) throw FormatError("parents: missing or not an array");
    std::vector<int> parents;
    for (const auto& p : doc["parents"]) {
        if (p.is_null()) {
            parents.push_back(kNoParent);
        } else if (p.is_number_integer()) {
            parents.push_back(p.get<int>());
        } else {
            throw FormatError("parents: entries must be integers or null");
        }
    }
    std::vector<std::string> names;
    if (doc.contains("joint_names") && !doc["joint_names"].is_null()) {
        if (!doc["joint_names"].is_array()) throw FormatError("joint_names: not an array");
        for (const auto& n : doc["joint_names"]) {
            if (!n.is_string()) throw FormatError("joint_names: entries must be strings");
            names.push_back(n.get<std::string>());
        }
    }
    int root = 0;
    if (doc.contains("root_index")) {
        if (!doc["root_index"].is_number_integer()) throw FormatError("root_index: not an integer");
        root = doc["root_index"].get<int>();
    }
    return Skeleton(std::move(parents), root, std::move(names));
}

inline nlohmann::ordered_json skeleton_header(const Skeleton& sk, double fps) {
    nlohmann::ordered_json doc;
    doc["fps"] = fps;
    doc["joint_names"] = sk.joint_names();
    auto parents = nlohmann::ordered_json::array();
    for (int p : sk.parents()) {
        if (p == kNoParent)
            parents.push_back(nullptr);
        else
            parents.push_back(p);
    }
    doc["parents"] = parents;
    doc["root_index"] = sk.root_index();
    return doc;
}

template <int D>
PoseSequence<D> sequence_from_json(const nlohmann::json& doc) {
    const char* key = D == 3 ? "frames" : "frames2d";
    if (!doc.is_object()) throw FormatError("document: expected a JSON object");
    if (!doc.contains("fps") || !doc["fps"].is_number()) throw FormatError("fps: missing or not a number");
    Skeleton sk = skeleton_from_json(doc);
    if (!doc.contains(key) || !doc[key].is_array()) throw FormatError(std::string(key) + ": missing or not an array");
    const auto& frames = doc[key];
    const int J = sk.joint_count();
    std::vector<double> data;
    data.reserve(frames.size() * static_cast<std::size_t>(J) * D);
    for (std::size_t t = 0; t < frames.size(); ++t) {
        const auto& frame = frames[t];
        const std::string where = std::string(key) + "[" + std::to_string(t) + "]";
        if (!frame.is_array() || static_cast<int>(frame.size()) != J)
            throw ShapeError(where + ": expected " + std::to_string(J) + " joints, got " +
                             (frame.is_array() ? std::to_string(frame.size()) : std::string("non-array")));
        for (std::size_t j = 0; j < frame.size(); ++j) {
            const auto& p = frame[j];
            if (!p.is_array() || p.size() != static_cast<std::size_t>(D))
                throw ShapeError(where + "[" + std::to_string(j) + "]: expected " + std::to_string(D) +
                                 " coordinates");
            for (const auto& v : p) {
                if (!v.is_number()) throw FormatError(where + "[" + std::to_string(j) + "]: non-numeric coordinate");
                data.push_back(v.get<double>());
            }
        }
    }
    return PoseSequence<D>(std::move(sk), doc["fps"].get<double>(), static_cast<int>(frames.size()), std::move(data));
}

template <int D>
nlohmann::ordered_json sequence_to_json(const PoseSequence<D>& seq) {
    auto doc = skeleton_header(seq.skeleton(), seq.fps());
    auto frames = nlohmann::ordered_json::array();
    for (int t = 0; t < seq.frames(); ++t) {
        auto frame = nlohmann::ordered_json::array();
        for (int j = 0; j < seq.joints(); ++j) {
            auto p = nlohmann::ordered_json::array();
            for (double v : seq.at(t, j)) p.push_back(v);
            frame.push_back(std::move(p));
        }
        frames.push_back(std::move(frame));
    }
    doc[D == 3 ? "frames" : "frames2d"] = std::move(frames);
    return doc;
}

inline nlohmann::json read_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw FormatError(path.string() + ": parse failure: " + e.what());
    }
}

inline void write_text_file(const std::filesystem::path& path, const std::string& text) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    out << text;
    if (!out) throw std::runtime_error("write failed: " + path.string());
}

}  // namespace detail

inline MotionSequence parse_motion(const std::string& text) {
    try {
        return detail::sequence_from_json<3>(nlohmann::json::parse(text));
    } catch (const nlohmann::json::parse_error& e) {
        throw FormatError(std::string("parse failure: ") + e.what());
    }
}

inline std::string dump_motion(const MotionSequence& seq) { return detail::sequence_to_json(seq).dump() + "\n"; }

inline MotionSequence load_motion(const std::filesystem::path& path) {
    return detail::sequence_from_json<3>(detail::read_json_file(path));
}

inline void save_motion(const MotionSequence& seq, const std::filesystem::path& path) {
    detail::write_text_file(path, dump_motion(seq));
}

inline MotionSequence2D load_motion2d(const std::filesystem::path& path) {
    return detail::sequence_from_json<2>(detail::read_json_file(path));
}

inline void save_motion2d(const MotionSequence2D& seq, const std::filesystem::path& path) {
    detail::write_text_file(path, detail::sequence_to_json(seq).dump() + "\n");
}

}  // namespace lapmo
