// Command-line front end for the coefficient-estimation experiments.
//
//   srgan sweep    --out DIR [--config FILE] [--preset desk|paper] [--workers N]
//   srgan variants --out DIR [--config FILE] [--preset desk|paper] [--workers N]
//   srgan train    --method srgan --labeled 50 --seed 0 --out DIR
//   srgan report   --in DIR
//
// Exit status is 0 only when every requested trial completed.

#include <cstdio>
#include <filesystem>
#include <iostream>

#include "CLI11.hpp"
#include "srgan/harness.hpp"

namespace fs = std::filesystem;
using namespace srgan;

namespace {

SweepConfig resolve_config(const std::string& preset_name, const std::string& config_path,
                           std::size_t workers, const std::string& out) {
    SweepConfig cfg = preset(preset_name);
    if (!config_path.empty()) cfg = load_sweep_config(config_path, cfg);
    if (workers) cfg.workers = workers;
    cfg.output_dir = out;
    return cfg;
}

int report_dir(const fs::path& dir) {
    const auto rows = read_results(dir / "results.csv");
    if (rows.empty()) {
        std::cerr << "no results in " << (dir / "results.csv") << '\n';
        return 1;
    }
    bool has_dnn = false;
    std::size_t failed = 0;
    for (const auto& r : rows) {
        has_dnn = has_dnn || r.method == Method::DNN;
        if (!r.ok) ++failed;
    }
    const AggregateTables tables = aggregate(rows, has_dnn);
    std::cout << format_report(tables);
    if (failed) std::cout << "\n" << failed << " failed trial row(s) excluded\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Semi-supervised regression GAN experiments on polynomial coefficient estimation"};
    app.require_subcommand(1);

    std::string out, config_path, preset_name = "desk", in_dir;
    std::size_t workers = 0;

    auto* sweep = app.add_subcommand("sweep", "Run methods x labeled sizes x seeds");
    sweep->add_option("--out", out, "Output directory")->required();
    sweep->add_option("--config", config_path, "key=value or JSON config file");
    sweep->add_option("--preset", preset_name, "desk or paper")->check(CLI::IsMember({"desk", "paper"}));
    sweep->add_option("--workers", workers, "Concurrent trials (default: all cores)");

    auto* variants = app.add_subcommand("variants", "Compare contrast-loss variants for SR-GAN");
    std::size_t variant_labeled = 500;
    variants->add_option("--out", out, "Output directory")->required();
    variants->add_option("--config", config_path, "key=value or JSON config file");
    variants->add_option("--preset", preset_name, "desk or paper")->check(CLI::IsMember({"desk", "paper"}));
    variants->add_option("--workers", workers, "Concurrent trials (default: all cores)");
    variants->add_option("--labeled", variant_labeled, "Labeled set size");

    auto* train_cmd = app.add_subcommand("train", "Train a single model");
    std::string method_name = "srgan", variant_name = "log";
    std::size_t labeled = 50, unlabeled = 5'000, test = 1'000;
    std::uint64_t seed = 0;
    long steps = TrainConfig{}.steps;
    train_cmd->add_option("--method", method_name, "dnn, srgan or dggan")
        ->check(CLI::IsMember({"dnn", "srgan", "dggan"}));
    train_cmd->add_option("--variant", variant_name, "log, sqrt or linear")
        ->check(CLI::IsMember({"log", "sqrt", "linear"}));
    train_cmd->add_option("--labeled", labeled, "Labeled examples");
    train_cmd->add_option("--unlabeled", unlabeled, "Unlabeled examples");
    train_cmd->add_option("--test", test, "Test examples");
    train_cmd->add_option("--seed", seed, "Data and training seed");
    train_cmd->add_option("--steps", steps, "Training steps");
    train_cmd->add_option("--out", out, "Output directory")->required();

    auto* report = app.add_subcommand("report", "Print aggregate tables for a sweep directory");
    report->add_option("--in", in_dir, "Sweep output directory")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (sweep->parsed()) {
            SweepConfig cfg = resolve_config(preset_name, config_path, workers, out);
            SweepProgress progress;
            const auto rows = run_sweep(cfg, &progress);
            bool has_dnn = false;
            for (const auto& r : rows) has_dnn = has_dnn || (r.ok && r.method == Method::DNN);
            const AggregateTables tables = aggregate(rows, has_dnn);
            emit_plot_data(tables, cfg.output_dir);
            std::cout << format_report(tables);
            std::cout << "\ntrials run: " << progress.trials_run << ", skipped (already done): "
                      << progress.trials_skipped << ", failed: " << progress.trials_failed << '\n';
            return progress.trials_failed == 0 ? 0 : 2;
        }
        if (variants->parsed()) {
            SweepConfig cfg = resolve_config(preset_name, config_path, workers, out);
            const std::vector<LossVariant> all{LossVariant::LogContrast, LossVariant::SqrtContrast,
                                               LossVariant::LinearContrast};
            const auto rows = loss_variant_study(cfg, all, variant_labeled);
            write_variant_table(rows, cfg.output_dir / "variants.csv");
            bool complete = true;
            std::printf("%-8s %-10s %s\n", "variant", "mean_mae", "seeds");
            for (const auto& r : rows) {
                std::printf("%-8s %-10.4f %zu\n", std::string(to_string(r.variant)).c_str(), r.mean_mae,
                            r.seed_maes.size());
                complete = complete && r.seed_maes.size() == cfg.n_seeds;
            }
            return complete ? 0 : 2;
        }
        if (train_cmd->parsed()) {
            TrainConfig tc;
            tc.method = parse_method(method_name);
            tc.variant = parse_loss_variant(variant_name);
            tc.seed = seed;
            tc.steps = steps;
            tc.eval_interval = std::min<long>(tc.eval_interval, steps);
            const DatasetBundle bundle = build_bundle(seed, labeled, unlabeled, test);
            const TrainResult res = train(tc, bundle);
            fs::create_directories(out);
            const std::string stem = method_name + "_n" + std::to_string(labeled) + "_s" + std::to_string(seed);
            write_history_csv(res.history, fs::path(out) / (stem + "_history.csv"));
            save_checkpoint(res.discriminator.net, {seed, static_cast<std::uint64_t>(tc.steps)},
                            fs::path(out) / (stem + "_discriminator.ckpt"));
            if (res.generator) {
                save_checkpoint(res.generator->net, {seed, static_cast<std::uint64_t>(tc.steps)},
                                fs::path(out) / (stem + "_generator.ckpt"));
            }
            std::printf("%s labeled=%zu seed=%llu test_mae=%.6f\n", method_name.c_str(), labeled,
                        static_cast<unsigned long long>(seed), res.test_mae);
            return 0;
        }
        if (report->parsed()) return report_dir(in_dir);
    } catch (const TrainingAborted& e) {
        std::cerr << "training aborted: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 1;
}
