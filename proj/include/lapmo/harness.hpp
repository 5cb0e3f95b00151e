#pragma once

// Training loop, loss-configuration ablation and report tables.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <future>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "lapmo/laplacian.hpp"
#include "lapmo/losses.hpp"
#include "lapmo/metrics.hpp"
#include "lapmo/motion.hpp"
#include "lapmo/motion_io.hpp"
#include "lapmo/synth.hpp"
#include "lapmo/tcn.hpp"

namespace lapmo {

// ---------------------------------------------------------------------------
// Corpus

struct Corpus {
    std::vector<MotionSequence> sequences;
    CorpusSplit split;
    nlohmann::ordered_json manifest;
};

inline std::string sequence_file_name(int index) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "seq_%05d.json", index);
    return buf;
}

inline Corpus make_corpus(const SynthConfig& config, int count, int test_count) {
    Corpus c;
    c.sequences = generate(config, count);
    c.split = split_indices(count, test_count, config.seed);
    nlohmann::ordered_json m;
    m["seed"] = config.seed;
    char hash[24];
    std::snprintf(hash, sizeof(hash), "%016llx", static_cast<unsigned long long>(config_hash(config)));
    m["config_hash"] = hash;
    m["count"] = count;
    m["config"] = synth_config_to_json(config);
    auto files = nlohmann::ordered_json::array();
    for (int i = 0; i < count; ++i) files.push_back(sequence_file_name(i));
    m["files"] = files;
    m["split"] = {{"train", c.split.train}, {"test", c.split.test}};
    c.manifest = std::move(m);
    return c;
}

/// Writes Motion-JSON files plus manifest.json into `dir`.
inline void write_corpus(const Corpus& corpus, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    for (std::size_t i = 0; i < corpus.sequences.size(); ++i)
        save_motion(corpus.sequences[i], dir / sequence_file_name(static_cast<int>(i)));
    detail::write_text_file(dir / "manifest.json", corpus.manifest.dump(2) + "\n");
}

inline Corpus load_corpus(const std::filesystem::path& dir) {
    Corpus c;
    {
        std::ifstream in(dir / "manifest.json");
        if (!in) throw std::runtime_error("cannot open " + (dir / "manifest.json").string());
        c.manifest = nlohmann::ordered_json::parse(in);
    }
    for (const auto& f : c.manifest.at("files")) c.sequences.push_back(load_motion(dir / f.get<std::string>()));
    c.split.train = c.manifest.at("split").at("train").get<std::vector<int>>();
    c.split.test = c.manifest.at("split").at("test").get<std::vector<int>>();
    for (int i : c.split.train)
        if (std::binary_search(c.split.test.begin(), c.split.test.end(), i))
            throw std::invalid_argument("corpus manifest: train/test splits overlap at index " + std::to_string(i));
    for (const auto* part : {&c.split.train, &c.split.test})
        for (int i : *part)
            if (i < 0 || static_cast<std::size_t>(i) >= c.sequences.size())
                throw std::invalid_argument("corpus manifest: split index " + std::to_string(i) + " out of range");
    return c;
}

// ---------------------------------------------------------------------------
// Training

struct TrainConfig {
    int epochs = 30;
    int batch_size = 16;
    AdamConfig adam;
    LossConfig loss;
    ProjectionParams projection;
    int hidden_channels = 32;
    std::optional<NetworkSpec> network;  // overrides hidden_channels when set
};

/// Fixed affine map between millimetres and the network's working units.
/// Centering by a constant pose and a single positive scale leaves every loss
/// unchanged up to that scale.
struct Normalization {
    std::vector<double> input_mean;   // 2J
    double input_scale = 1.0;
    std::vector<double> output_mean;  // 3J
    double output_scale = 1.0;

    template <int D>
    static std::pair<std::vector<double>, double> fit(const std::vector<const PoseSequence<D>*>& seqs) {
        const int J = seqs.front()->joints();
        std::vector<double> mean(static_cast<std::size_t>(J) * D, 0.0);
        std::size_t frames = 0;
        for (const auto* s : seqs) {
            const auto d = s->data();
            for (std::size_t i = 0; i < d.size(); ++i) mean[i % mean.size()] += d[i];
            frames += static_cast<std::size_t>(s->frames());
        }
        for (double& m : mean) m /= static_cast<double>(frames);
        double sq = 0.0;
        std::size_t n = 0;
        for (const auto* s : seqs) {
            const auto d = s->data();
            for (std::size_t i = 0; i < d.size(); ++i) {
                const double v = d[i] - mean[i % mean.size()];
                sq += v * v;
                ++n;
            }
        }
        const double rms = std::sqrt(sq / static_cast<double>(std::max<std::size_t>(n, 1)));
        return {mean, rms > 0.0 ? 1.0 / rms : 1.0};
    }

    template <int D>
    static PoseSequence<D> apply(const PoseSequence<D>& s, const std::vector<double>& mean, double scale) {
        std::vector<double> out(s.data().begin(), s.data().end());
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = (out[i] - mean[i % mean.size()]) * scale;
        return s.with_data(std::move(out));
    }

    MotionSequence2D encode_input(const MotionSequence2D& s) const { return apply(s, input_mean, input_scale); }
    MotionSequence encode_output(const MotionSequence& s) const { return apply(s, output_mean, output_scale); }

    MotionSequence decode_output(const MotionSequence& s) const {
        std::vector<double> out(s.data().begin(), s.data().end());
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = out[i] / output_scale + output_mean[i % output_mean.size()];
        return s.with_data(std::move(out));
    }

    nlohmann::json to_json() const {
        return {{"input_mean", input_mean}, {"input_scale", input_scale}, {"output_mean", output_mean}, {"output_scale", output_scale}};
    }

    static Normalization from_json(const nlohmann::json& j) {
        Normalization n;
        n.input_mean = j.at("input_mean").get<std::vector<double>>();
        n.input_scale = j.at("input_scale").get<double>();
        n.output_mean = j.at("output_mean").get<std::vector<double>>();
        n.output_scale = j.at("output_scale").get<double>();
        return n;
    }
};

struct PoseLifter {
    Network network;
    Normalization norm;
    ProjectionParams projection;

    MotionSequence predict(const MotionSequence2D& input) const {
        return norm.decode_output(forward(network, norm.encode_input(input)));
    }

    MotionSequence predict_from_3d(const MotionSequence& gt) const { return predict(project_2d(gt, projection)); }
};

struct TrainOutcome {
    PoseLifter model;
    double final_train_loss = 0.0;  // mean batch loss of the last epoch, mm
    std::vector<double> epoch_losses;
};

/// Trains a fresh network. The initial weights and the batch order depend on
/// `seed` only, so every loss mode starts from the same point.
inline TrainOutcome train_model(const std::vector<const MotionSequence*>& train_set, const TrainConfig& config,
                                LossMode mode, std::uint64_t seed) {
    if (train_set.empty()) throw std::invalid_argument("train: empty training set");
    if (config.batch_size < 1) throw std::invalid_argument("train: batch_size must be >= 1");
    const int J = train_set.front()->joints();
    const int T = train_set.front()->frames();

    std::vector<MotionSequence2D> inputs;
    inputs.reserve(train_set.size());
    for (const auto* s : train_set) {
        if (s->frames() != T || s->joints() != J) throw ShapeError("train: sequences must share T and J");
        inputs.push_back(project_2d(*s, config.projection));
    }

    Normalization norm;
    {
        std::vector<const MotionSequence2D*> in_ptrs;
        for (const auto& s : inputs) in_ptrs.push_back(&s);
        std::tie(norm.input_mean, norm.input_scale) = Normalization::fit<2>(in_ptrs);
        std::tie(norm.output_mean, norm.output_scale) = Normalization::fit<3>(train_set);
    }

    std::vector<MotionSequence2D> x;
    std::vector<MotionSequence> y;
    for (std::size_t i = 0; i < train_set.size(); ++i) {
        x.push_back(norm.encode_input(inputs[i]));
        y.push_back(norm.encode_output(*train_set[i]));
    }

    NetworkSpec spec = config.network.value_or(NetworkSpec::desk_default(J, config.hidden_channels));
    spec.validate(J);
    Network net(spec, derive_seed(seed, 1));
    const SparseLaplacian lap = build_laplacian(train_set.front()->skeleton(), T, config.loss.laplacian_variant);

    TrainOutcome out{PoseLifter{net, norm, config.projection}, 0.0, {}};
    std::vector<std::size_t> order(train_set.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        Rng rng(derive_seed(seed, 1000 + static_cast<std::uint64_t>(epoch)));
        for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
        double sum = 0.0;
        int batches = 0;
        for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(config.batch_size)) {
            std::vector<TrainSample> batch;
            for (std::size_t k = start; k < std::min(order.size(), start + static_cast<std::size_t>(config.batch_size)); ++k)
                batch.push_back({&x[order[k]], &y[order[k]]});
            sum += train_step(out.model.network, batch, mode, config.loss, config.adam, &lap);
            ++batches;
        }
        out.epoch_losses.push_back(sum / batches / norm.output_scale);
    }
    out.final_train_loss = out.epoch_losses.empty() ? 0.0 : out.epoch_losses.back();
    return out;
}

inline MetricValues evaluate_model(const PoseLifter& model, const std::vector<const MotionSequence*>& test_set) {
    std::vector<MotionSequence> estimates;
    estimates.reserve(test_set.size());
    for (const auto* gt : test_set) estimates.push_back(model.predict_from_3d(*gt));
    std::vector<LabeledPair> pairs;
    for (std::size_t i = 0; i < test_set.size(); ++i)
        pairs.push_back({&estimates[i], test_set[i], sequence_file_name(static_cast<int>(i))});
    return evaluate_batch(pairs).average();
}

// ---------------------------------------------------------------------------
// Report tables

struct TableRow {
    std::string label;
    std::vector<std::pair<std::string, std::optional<double>>> cells;
};

namespace detail {

inline std::string format_number(double v, int precision) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*f", precision, v);
    return buf;
}

inline void require_matching_keys(const std::vector<TableRow>& rows) {
    for (const auto& r : rows) {
        if (r.cells.size() != rows.front().cells.size())
            throw std::invalid_argument("compare_reports: row '" + r.label + "' has a different column count");
        for (std::size_t c = 0; c < r.cells.size(); ++c)
            if (r.cells[c].first != rows.front().cells[c].first)
                throw std::invalid_argument("compare_reports: key mismatch '" + r.cells[c].first + "' vs '" +
                                            rows.front().cells[c].first + "'");
    }
}

}  // namespace detail

/// Side-by-side Markdown table, lower is better. With more than one row the
/// best value of every column is bolded; ties are all bolded.
inline std::string compare_reports(const std::vector<TableRow>& rows, const std::string& corner = "", int precision = 2) {
    if (rows.empty()) return "";
    detail::require_matching_keys(rows);
    const std::size_t ncols = rows.front().cells.size();
    std::vector<std::optional<double>> best(ncols);
    if (rows.size() > 1)
        for (std::size_t c = 0; c < ncols; ++c)
            for (const auto& r : rows)
                if (r.cells[c].second && (!best[c] || *r.cells[c].second < *best[c])) best[c] = r.cells[c].second;

    std::ostringstream md;
    md << "| " << corner;
    for (const auto& [key, v] : rows.front().cells) md << " | " << key;
    md << " |\n|---";
    for (std::size_t c = 0; c < ncols; ++c) md << "|---:";
    md << "|\n";
    for (const auto& r : rows) {
        md << "| " << r.label;
        for (std::size_t c = 0; c < ncols; ++c) {
            const auto& v = r.cells[c].second;
            if (!v) {
                md << " | -";
                continue;
            }
            const std::string s = detail::format_number(*v, precision);
            md << " | " << (best[c] && *v == *best[c] ? "**" + s + "**" : s);
        }
        md << " |\n";
    }
    return md.str();
}

inline std::string table_csv(const std::vector<TableRow>& rows, const std::string& corner = "", int precision = 2) {
    if (rows.empty()) return "";
    detail::require_matching_keys(rows);
    std::ostringstream csv;
    csv << corner;
    for (const auto& [key, v] : rows.front().cells) csv << "," << key;
    csv << "\n";
    for (const auto& r : rows) {
        csv << r.label;
        for (const auto& [key, v] : r.cells) csv << "," << (v ? detail::format_number(*v, precision) : "");
        csv << "\n";
    }
    return csv.str();
}

// ---------------------------------------------------------------------------
// Ablation

struct AblationConfig {
    std::filesystem::path corpus_dir;
    std::vector<LossMode> modes{LossMode::kPositionOnly, LossMode::kPositionMotion, LossMode::kPositionLaplacian};
    std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
    TrainConfig train;
    std::filesystem::path output_dir;
    int jobs = 1;

    void validate() const {
        if (modes.empty()) throw std::invalid_argument("ablation config: at least one mode required");
        if (seeds.empty()) throw std::invalid_argument("ablation config: at least one seed required");
        if (jobs < 1) throw std::invalid_argument("ablation config: jobs must be >= 1");
    }
};

struct AblationCell {
    LossMode mode = LossMode::kPositionOnly;
    std::uint64_t seed = 0;
    bool finite = true;
    std::string error;
    double final_train_loss = 0.0;
    MetricValues test;
};

struct AblationResult {
    std::vector<LossMode> modes;
    std::vector<std::uint64_t> seeds;
    std::vector<AblationCell> cells;  // mode-major, then seed, in config order

    const AblationCell& cell(LossMode mode, std::uint64_t seed) const {
        for (const auto& c : cells)
            if (c.mode == mode && c.seed == seed) return c;
        throw std::out_of_range("ablation result: no cell for " + to_string(mode) + " seed " + std::to_string(seed));
    }

    bool all_finite() const {
        return std::all_of(cells.begin(), cells.end(), [](const AblationCell& c) { return c.finite; });
    }
};

inline double median(std::vector<double> v) {
    if (v.empty()) return 0.0;
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

enum class AblationMetric { kTrainLoss, kMpjpe, kMpjve, kMpjacce };

inline std::optional<double> metric_of(const AblationCell& c, AblationMetric m) {
    if (!c.finite) return std::nullopt;
    switch (m) {
        case AblationMetric::kTrainLoss: return c.final_train_loss;
        case AblationMetric::kMpjpe: return c.test.mpjpe;
        case AblationMetric::kMpjve: return c.test.mpjve;
        case AblationMetric::kMpjacce: return c.test.mpjacce;
    }
    return std::nullopt;
}

/// Median over seeds of finite cells.
inline std::optional<double> median_over_seeds(const AblationResult& r, LossMode mode, AblationMetric m) {
    std::vector<double> v;
    for (auto seed : r.seeds)
        if (auto x = metric_of(r.cell(mode, seed), m)) v.push_back(*x);
    if (v.empty()) return std::nullopt;
    return median(v);
}

/// Runs every (mode, seed) cell on an in-memory corpus.
inline AblationResult run_ablation(const Corpus& corpus, const AblationConfig& config) {
    config.validate();
    std::vector<const MotionSequence*> train_set, test_set;
    for (int i : corpus.split.train) train_set.push_back(&corpus.sequences[static_cast<std::size_t>(i)]);
    for (int i : corpus.split.test) test_set.push_back(&corpus.sequences[static_cast<std::size_t>(i)]);
    if (test_set.empty()) throw std::invalid_argument("ablation: corpus has an empty test split");

    AblationResult result{config.modes, config.seeds, {}};
    auto run_cell = [&](LossMode mode, std::uint64_t seed) {
        AblationCell cell{mode, seed, true, "", 0.0, {}};
        try {
            const auto outcome = train_model(train_set, config.train, mode, seed);
            cell.final_train_loss = outcome.final_train_loss;
            cell.test = evaluate_model(outcome.model, test_set);
            if (!std::isfinite(cell.test.mpjpe)) throw NonFiniteLossError("non-finite test metric");
        } catch (const NonFiniteLossError& e) {
            cell.finite = false;
            cell.error = e.what();
        }
        return cell;
    };

    std::vector<std::pair<LossMode, std::uint64_t>> keys;
    for (auto mode : config.modes)
        for (auto seed : config.seeds) keys.emplace_back(mode, seed);
    result.cells.resize(keys.size());
    for (std::size_t start = 0; start < keys.size(); start += static_cast<std::size_t>(config.jobs)) {
        const std::size_t end = std::min(keys.size(), start + static_cast<std::size_t>(config.jobs));
        if (config.jobs == 1) {
            result.cells[start] = run_cell(keys[start].first, keys[start].second);
            continue;
        }
        std::vector<std::future<AblationCell>> futures;
        for (std::size_t k = start; k < end; ++k)
            futures.push_back(std::async(std::launch::async, run_cell, keys[k].first, keys[k].second));
        for (std::size_t k = start; k < end; ++k) result.cells[k] = futures[k - start].get();
    }
    return result;
}

inline std::string metric_title(AblationMetric m) {
    switch (m) {
        case AblationMetric::kTrainLoss: return "Final train loss (mm)";
        case AblationMetric::kMpjpe: return "Test MPJPE, Protocol-1 (mm)";
        case AblationMetric::kMpjve: return "Test MPJVE (mm/frame)";
        case AblationMetric::kMpjacce: return "Test MPJAccE (mm/frame^2)";
    }
    return "";
}

inline std::string metric_key(AblationMetric m) {
    switch (m) {
        case AblationMetric::kTrainLoss: return "train_loss";
        case AblationMetric::kMpjpe: return "MPJPE";
        case AblationMetric::kMpjve: return "MPJVE";
        case AblationMetric::kMpjacce: return "MPJAccE";
    }
    return "";
}

/// Rows = loss modes, columns = seeds + Median.
inline std::vector<TableRow> ablation_table(const AblationResult& r, AblationMetric m) {
    std::vector<TableRow> rows;
    for (auto mode : r.modes) {
        TableRow row{to_string(mode), {}};
        for (auto seed : r.seeds) row.cells.emplace_back("s" + std::to_string(seed), metric_of(r.cell(mode, seed), m));
        row.cells.emplace_back("Median", median_over_seeds(r, mode, m));
        rows.push_back(std::move(row));
    }
    return rows;
}

/// Number of seeds where `mode` is no worse than `baseline` on metric `m`.
inline int paired_wins(const AblationResult& r, LossMode mode, LossMode baseline, AblationMetric m) {
    int wins = 0;
    for (auto seed : r.seeds) {
        const auto a = metric_of(r.cell(mode, seed), m);
        const auto b = metric_of(r.cell(baseline, seed), m);
        if (a && b && *a <= *b) ++wins;
    }
    return wins;
}

inline std::string ablation_markdown(const AblationResult& r) {
    std::ostringstream md;
    md << "# Loss ablation\n\n";
    for (auto m : {AblationMetric::kMpjpe, AblationMetric::kMpjve, AblationMetric::kMpjacce, AblationMetric::kTrainLoss}) {
        md << "## " << metric_title(m) << "\n\n" << compare_reports(ablation_table(r, m), metric_key(m), 3) << "\n";
    }
    const bool has_base = std::find(r.modes.begin(), r.modes.end(), LossMode::kPositionOnly) != r.modes.end();
    if (has_base) {
        md << "## Paired seeds no worse than P_ONLY\n\n| mode | MPJPE | MPJVE | MPJAccE |\n|---|---:|---:|---:|\n";
        for (auto mode : r.modes) {
            if (mode == LossMode::kPositionOnly) continue;
            md << "| " << to_string(mode);
            for (auto m : {AblationMetric::kMpjpe, AblationMetric::kMpjve, AblationMetric::kMpjacce})
                md << " | " << paired_wins(r, mode, LossMode::kPositionOnly, m) << "/" << r.seeds.size();
            md << " |\n";
        }
        md << "\n";
    }
    md << "Reference deltas reported for full-scale Human3.6M training (not reproduced here): "
          "P_PLUS_M lowers MPJPE by 14.48 mm, P_PLUS_LAP lowers MPJPE by 41.85 mm and MPJVE by 1.49 mm/frame.\n";
    bool any_failed = false;
    for (const auto& c : r.cells)
        if (!c.finite) {
            if (!any_failed) md << "\n## Diverged cells\n\n";
            any_failed = true;
            md << "- " << to_string(c.mode) << " seed " << c.seed << ": " << c.error << "\n";
        }
    return md.str();
}

inline std::string ablation_csv(const AblationResult& r) {
    std::ostringstream csv;
    csv << "mode,seed,finite,train_loss,mpjpe,mpjve,mpjacce\n";
    for (const auto& c : r.cells) {
        csv << to_string(c.mode) << "," << c.seed << "," << (c.finite ? 1 : 0);
        for (auto m : {AblationMetric::kTrainLoss, AblationMetric::kMpjpe, AblationMetric::kMpjve, AblationMetric::kMpjacce}) {
            const auto v = metric_of(c, m);
            csv << "," << (v ? detail::format_number(*v, 6) : "");
        }
        csv << "\n";
    }
    return csv.str();
}

inline nlohmann::ordered_json ablation_to_json(const AblationResult& r) {
    nlohmann::ordered_json j;
    auto modes = nlohmann::ordered_json::array();
    for (auto m : r.modes) modes.push_back(to_string(m));
    j["modes"] = modes;
    j["seeds"] = r.seeds;
    auto cells = nlohmann::ordered_json::array();
    for (const auto& c : r.cells) {
        nlohmann::ordered_json cj;
        cj["mode"] = to_string(c.mode);
        cj["seed"] = c.seed;
        cj["finite"] = c.finite;
        cj["error"] = c.error;
        cj["train_loss"] = c.final_train_loss;
        cj["mpjpe"] = c.test.mpjpe;
        cj["mpjve"] = c.test.mpjve ? nlohmann::ordered_json(*c.test.mpjve) : nlohmann::ordered_json(nullptr);
        cj["mpjacce"] = c.test.mpjacce ? nlohmann::ordered_json(*c.test.mpjacce) : nlohmann::ordered_json(nullptr);
        cells.push_back(std::move(cj));
    }
    j["cells"] = cells;
    return j;
}

inline AblationResult ablation_from_json(const nlohmann::json& j) {
    AblationResult r;
    for (const auto& m : j.at("modes")) r.modes.push_back(parse_loss_mode(m.get<std::string>()));
    r.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
    for (const auto& cj : j.at("cells")) {
        AblationCell c;
        c.mode = parse_loss_mode(cj.at("mode").get<std::string>());
        c.seed = cj.at("seed").get<std::uint64_t>();
        c.finite = cj.at("finite").get<bool>();
        c.error = cj.value("error", "");
        c.final_train_loss = cj.at("train_loss").get<double>();
        c.test.mpjpe = cj.at("mpjpe").get<double>();
        if (!cj.at("mpjve").is_null()) c.test.mpjve = cj["mpjve"].get<double>();
        if (!cj.at("mpjacce").is_null()) c.test.mpjacce = cj["mpjacce"].get<double>();
        r.cells.push_back(c);
    }
    return r;
}

/// Writes results.json, ablation.md and ablation.csv.
inline void write_ablation(const AblationResult& r, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    detail::write_text_file(dir / "results.json", ablation_to_json(r).dump(2) + "\n");
    detail::write_text_file(dir / "ablation.md", ablation_markdown(r));
    detail::write_text_file(dir / "ablation.csv", ablation_csv(r));
}

inline AblationResult run_ablation(const AblationConfig& config) {
    config.validate();
    const Corpus corpus = load_corpus(config.corpus_dir);
    auto result = run_ablation(corpus, config);
    if (!config.output_dir.empty()) write_ablation(result, config.output_dir);
    return result;
}

// ---------------------------------------------------------------------------
// Config files

inline LossConfig loss_config_from_json(const nlohmann::json& j) {
    LossConfig c;
    c.alpha = j.value("alpha", c.alpha);
    c.lambda = j.value("lambda", c.lambda);
    c.motion_scales = j.value("motion_scales", c.motion_scales);
    if (j.contains("laplacian_variant")) c.laplacian_variant = parse_laplacian_variant(j["laplacian_variant"].get<std::string>());
    c.root_relative = j.value("root_relative", c.root_relative);
    if (c.alpha < 0.0 || c.lambda < 0.0) throw std::invalid_argument("loss config: coefficients must be >= 0");
    if (!std::is_sorted(c.motion_scales.begin(), c.motion_scales.end()))
        throw std::invalid_argument("loss config: motion_scales must be sorted ascending");
    return c;
}

inline ProjectionParams projection_from_json(const nlohmann::json& j) {
    ProjectionParams p;
    const auto mode = j.value("mode", std::string("ortho"));
    if (mode == "ortho" || mode == "ORTHO_XY")
        p.mode = Projection::kOrthoXY;
    else if (mode == "persp" || mode == "PERSP")
        p.mode = Projection::kPerspective;
    else
        throw std::invalid_argument("projection: unknown mode '" + mode + "'");
    p.focal = j.value("focal", p.focal);
    p.noise_std = j.value("noise_std", p.noise_std);
    p.noise_seed = j.value("noise_seed", p.noise_seed);
    return p;
}

inline TrainConfig train_config_from_json(const nlohmann::json& j) {
    TrainConfig c;
    c.epochs = j.value("epochs", c.epochs);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.adam.learning_rate = j.value("learning_rate", c.adam.learning_rate);
    if (j.contains("loss")) c.loss = loss_config_from_json(j["loss"]);
    if (j.contains("projection")) c.projection = projection_from_json(j["projection"]);
    if (j.contains("network")) {
        const auto& n = j["network"];
        if (n.contains("layers"))
            c.network = n.get<NetworkSpec>();
        else
            c.hidden_channels = n.value("hidden", c.hidden_channels);
    }
    return c;
}

/// Relative paths inside the config resolve against `base_dir`.
inline AblationConfig ablation_config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {}) {
    AblationConfig c;
    auto resolve = [&](const std::string& p) {
        std::filesystem::path path(p);
        return path.is_absolute() || base_dir.empty() ? path : base_dir / path;
    };
    c.corpus_dir = resolve(j.at("corpus").get<std::string>());
    if (j.contains("output_dir")) c.output_dir = resolve(j["output_dir"].get<std::string>());
    if (j.contains("modes")) {
        c.modes.clear();
        for (const auto& m : j["modes"]) c.modes.push_back(parse_loss_mode(m.get<std::string>()));
    }
    if (j.contains("seeds")) c.seeds = j["seeds"].get<std::vector<std::uint64_t>>();
    c.jobs = j.value("jobs", c.jobs);
    c.train = train_config_from_json(j);
    c.validate();
    return c;
}

}  // namespace lapmo
