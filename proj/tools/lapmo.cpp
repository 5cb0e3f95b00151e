// lapmo: command-line front end for the Laplacian motion-loss toolkit.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "lapmo/gradcheck.hpp"
#include "lapmo/harness.hpp"
#include "lapmo/laplacian.hpp"
#include "lapmo/metrics.hpp"
#include "lapmo/motion_io.hpp"
#include "lapmo/synth.hpp"
#include "lapmo/tcn.hpp"

namespace fs = std::filesystem;
using namespace lapmo;

namespace {

bool ends_with(const std::string& s, const std::string& suffix) {
    return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

/// Files ending in .json under `path` (sorted), or `path` itself.
std::map<std::string, fs::path> motion_files(const fs::path& path) {
    std::map<std::string, fs::path> out;
    if (fs::is_directory(path)) {
        for (const auto& e : fs::directory_iterator(path))
            if (e.is_regular_file() && e.path().extension() == ".json" && e.path().filename() != "manifest.json")
                out.emplace(e.path().stem().string(), e.path());
    } else {
        out.emplace(path.stem().string(), path);
    }
    if (out.empty()) throw std::runtime_error("no motion files under " + path.string());
    return out;
}

int cmd_synth(const std::string& config_path, int count, int test_count, const fs::path& out_dir) {
    SynthConfig cfg;
    if (!config_path.empty()) cfg = synth_config_from_json(detail::read_json_file(config_path));
    if (test_count < 0) test_count = count / 5;
    const Corpus corpus = make_corpus(cfg, count, test_count);
    write_corpus(corpus, out_dir);
    std::cout << "wrote " << count << " sequences (" << corpus.split.train.size() << " train, " << corpus.split.test.size()
              << " test) to " << out_dir.string() << "\n";
    return 0;
}

int cmd_laplacian(const fs::path& motion, const std::string& variant, const fs::path& out) {
    const auto seq = load_motion(motion);
    const auto lap = build_laplacian(seq.skeleton(), seq.frames(), parse_laplacian_variant(variant));
    const auto delta = diff_coords(lap, seq);
    nlohmann::json rows = nlohmann::json::array();
    for (int i = 0; i < delta.rows; ++i) {
        const auto r = delta.row(i);
        rows.push_back({r[0], r[1], r[2]});
    }
    detail::write_text_file(out, rows.dump() + "\n");
    return 0;
}

int cmd_gradcheck(const std::string& loss, int trials, std::uint64_t seed) {
    const auto report = gradcheck::run(gradcheck::parse_target(loss), trials, seed);
    std::printf("gradcheck %s: trials=%d max_rel_err=%.3e threshold=%.0e %s\n", loss.c_str(), report.trials,
                report.max_relative_error, gradcheck::kTolerance, report.passed() ? "PASS" : "FAIL");
    return report.passed() ? 0 : 1;
}

int cmd_eval(const std::string& gt_path, const std::vector<std::string>& est_paths, const fs::path& out) {
    const auto gt_files = motion_files(gt_path);
    std::map<std::string, MotionSequence> gts;
    for (const auto& [label, p] : gt_files) gts.emplace(label, load_motion(p));

    std::vector<TableRow> tables[3];
    for (const auto& est_path : est_paths) {
        const auto est_files = motion_files(est_path);
        std::vector<MotionSequence> ests;
        std::vector<std::string> labels;
        for (const auto& [label, p] : est_files) {
            if (!gts.count(label) && !(gts.size() == 1 && est_files.size() == 1))
                throw std::runtime_error("no ground truth for estimate '" + label + "'");
            ests.push_back(load_motion(p));
            labels.push_back(gts.count(label) ? label : gts.begin()->first);
        }
        std::vector<LabeledPair> pairs;
        for (std::size_t i = 0; i < ests.size(); ++i) pairs.push_back({&ests[i], &gts.at(labels[i]), labels[i]});
        const auto report = evaluate_batch(pairs);
        const auto avg = report.average();
        const std::string name = fs::path(est_path).filename().string().empty() ? est_path
                                                                                 : fs::path(est_path).filename().string();
        TableRow rows[3] = {{name, {}}, {name, {}}, {name, {}}};
        for (const auto& [label, v] : report.per_action) {
            rows[0].cells.emplace_back(label, v.mpjpe);
            rows[1].cells.emplace_back(label, v.mpjve);
            rows[2].cells.emplace_back(label, v.mpjacce);
        }
        rows[0].cells.emplace_back("Avg", avg.mpjpe);
        rows[1].cells.emplace_back("Avg", avg.mpjve);
        rows[2].cells.emplace_back("Avg", avg.mpjacce);
        for (int m = 0; m < 3; ++m) tables[m].push_back(rows[m]);
    }
    const char* names[3] = {"MPJPE", "MPJVE", "MPJAccE"};
    const char* units[3] = {"mm", "mm/frame", "mm/frame^2"};
    std::string text;
    if (ends_with(out.string(), ".csv")) {
        for (int m = 0; m < 3; ++m) {
            const auto csv = table_csv(tables[m], names[m]);
            text += csv;
        }
    } else {
        for (int m = 0; m < 3; ++m)
            text += std::string("## ") + names[m] + " (" + units[m] + ")\n\n" + compare_reports(tables[m], names[m]) + "\n";
    }
    detail::write_text_file(out, text);
    return 0;
}

int cmd_train(const std::string& mode, const fs::path& corpus_dir, const fs::path& out, const std::string& config_path,
              int epochs, std::uint64_t seed, const std::string& variant) {
    TrainConfig cfg;
    if (!config_path.empty()) cfg = train_config_from_json(detail::read_json_file(config_path));
    if (epochs >= 0) cfg.epochs = epochs;
    if (!variant.empty()) cfg.loss.laplacian_variant = parse_laplacian_variant(variant);
    const Corpus corpus = load_corpus(corpus_dir);
    std::vector<const MotionSequence*> train_set, test_set;
    for (int i : corpus.split.train) train_set.push_back(&corpus.sequences[static_cast<std::size_t>(i)]);
    for (int i : corpus.split.test) test_set.push_back(&corpus.sequences[static_cast<std::size_t>(i)]);
    const auto outcome = train_model(train_set, cfg, parse_loss_mode(mode), seed);
    nlohmann::json meta{{"normalization", outcome.model.norm.to_json()},
                        {"loss_mode", to_string(parse_loss_mode(mode))},
                        {"projection", outcome.model.projection.mode == Projection::kOrthoXY ? "ortho" : "persp"},
                        {"focal", outcome.model.projection.focal},
                        {"train_seed", seed}};
    save_checkpoint(outcome.model.network, out, meta);
    std::printf("final train loss %.4f mm\n", outcome.final_train_loss);
    if (!test_set.empty()) {
        const auto m = evaluate_model(outcome.model, test_set);
        std::printf("test MPJPE %.3f mm, MPJVE %.3f mm/frame, MPJAccE %.3f mm/frame^2\n", m.mpjpe, m.mpjve.value_or(0.0),
                    m.mpjacce.value_or(0.0));
    }
    return 0;
}

int cmd_predict(const fs::path& ckpt_path, const fs::path& motion, const fs::path& out) {
    const auto ck = load_checkpoint(ckpt_path);
    PoseLifter model{ck.to_network(), Normalization::from_json(ck.meta.at("normalization")), {}};
    if (ck.meta.value("projection", std::string("ortho")) == "persp") model.projection.mode = Projection::kPerspective;
    model.projection.focal = ck.meta.value("focal", model.projection.focal);
    save_motion(model.predict_from_3d(load_motion(motion)), out);
    return 0;
}

int cmd_ablate(const fs::path& config_path) {
    const auto cfg = ablation_config_from_json(detail::read_json_file(config_path), config_path.parent_path());
    const auto result = run_ablation(cfg);
    std::cout << ablation_markdown(result);
    return result.all_finite() ? 0 : 2;
}

int cmd_report(const fs::path& in_dir, const fs::path& out) {
    const auto result = ablation_from_json(detail::read_json_file(in_dir / "results.json"));
    detail::write_text_file(out, ends_with(out.string(), ".csv") ? ablation_csv(result) : ablation_markdown(result));
    return result.all_finite() ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Spatio-temporal Laplacian loss toolkit for 3D pose sequences"};
    app.require_subcommand(1);

    std::string synth_config;
    int synth_count = 250, synth_test = -1;
    std::string synth_out;
    auto* synth = app.add_subcommand("synth", "Generate a synthetic motion corpus");
    synth->add_option("--config", synth_config, "Synth config JSON (defaults when omitted)");
    synth->add_option("--count", synth_count, "Number of sequences")->check(CLI::PositiveNumber);
    synth->add_option("--test-count", synth_test, "Size of the test split (default count/5)");
    synth->add_option("--out", synth_out, "Output directory")->required();

    std::string lap_motion, lap_variant = "comb", lap_out;
    auto* lap = app.add_subcommand("laplacian", "Emit differential coordinates of a motion file");
    lap->add_option("--motion", lap_motion)->required()->check(CLI::ExistingFile);
    lap->add_option("--variant", lap_variant)->check(CLI::IsMember({"comb", "rw"}));
    lap->add_option("--out", lap_out)->required();

    std::string gc_loss = "combined";
    int gc_trials = 100;
    std::uint64_t gc_seed = 0;
    auto* gc = app.add_subcommand("gradcheck", "Compare analytic gradients with central finite differences");
    gc->add_option("--loss", gc_loss)->check(CLI::IsMember({"pos", "lap", "motion", "combined", "tcn"}));
    gc->add_option("--trials", gc_trials)->check(CLI::PositiveNumber);
    gc->add_option("--seed", gc_seed);

    std::string ev_gt, ev_out;
    std::vector<std::string> ev_est;
    auto* ev = app.add_subcommand("eval", "Evaluate estimates against ground truth");
    ev->add_option("--gt", ev_gt, "Ground-truth file or directory")->required()->check(CLI::ExistingPath);
    ev->add_option("--est", ev_est, "Estimate file or directory (repeatable, one table row each)")->required()->check(CLI::ExistingPath);
    ev->add_option("--out", ev_out, "report.md or report.csv")->required();

    std::string tr_mode = "p", tr_corpus, tr_out, tr_config, tr_variant;
    int tr_epochs = -1;
    std::uint64_t tr_seed = 0;
    auto* tr = app.add_subcommand("train", "Train one model on a corpus");
    tr->add_option("--mode", tr_mode)->check(CLI::IsMember({"p", "pm", "plap"}));
    tr->add_option("--corpus", tr_corpus)->required()->check(CLI::ExistingDirectory);
    tr->add_option("--out", tr_out, "Checkpoint path")->required();
    tr->add_option("--config", tr_config, "Training config JSON");
    tr->add_option("--epochs", tr_epochs);
    tr->add_option("--seed", tr_seed);
    tr->add_option("--variant", tr_variant)->check(CLI::IsMember({"comb", "rw"}));

    std::string pr_ckpt, pr_motion, pr_out;
    auto* pr = app.add_subcommand("predict", "Lift the 2D projection of a motion file with a checkpoint");
    pr->add_option("--ckpt", pr_ckpt)->required()->check(CLI::ExistingFile);
    pr->add_option("--motion", pr_motion)->required()->check(CLI::ExistingFile);
    pr->add_option("--out", pr_out)->required();

    std::string ab_config;
    auto* ab = app.add_subcommand("ablate", "Run the loss-configuration ablation");
    ab->add_option("--config", ab_config)->required()->check(CLI::ExistingFile);

    std::string rp_in, rp_out;
    auto* rp = app.add_subcommand("report", "Render an ablation result directory");
    rp->add_option("--in", rp_in)->required()->check(CLI::ExistingDirectory);
    rp->add_option("--out", rp_out)->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*synth) return cmd_synth(synth_config, synth_count, synth_test, synth_out);
        if (*lap) return cmd_laplacian(lap_motion, lap_variant, lap_out);
        if (*gc) return cmd_gradcheck(gc_loss, gc_trials, gc_seed);
        if (*ev) return cmd_eval(ev_gt, ev_est, ev_out);
        if (*tr) return cmd_train(tr_mode, tr_corpus, tr_out, tr_config, tr_epochs, tr_seed, tr_variant);
        if (*pr) return cmd_predict(pr_ckpt, pr_motion, pr_out);
        if (*ab) return cmd_ablate(ab_config);
        if (*rp) return cmd_report(rp_in, rp_out);
    } catch (const std::exception& e) {
        std::cerr << "lapmo: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
