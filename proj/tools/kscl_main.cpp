#include "kscl/config.hpp"
#include "kscl/error.hpp"
#include "kscl/selfcheck.hpp"
#include "kscl/trainer.hpp"
#include "kscl/viz.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

namespace {

using kscl::Config;
using nlohmann::json;

struct CommonArgs {
    std::string config_path;
    std::string out_dir;
    std::optional<std::uint64_t> seed_override;
    bool quiet = false;
};

void add_common(CLI::App* cmd, CommonArgs& args, bool needs_out = true) {
    cmd->add_option("--config", args.config_path, "config file path")->required();
    if (needs_out) cmd->add_option("--out", args.out_dir, "output directory")->required();
    cmd->add_option("--seed", args.seed_override, "override the config seed");
    cmd->add_flag("--quiet", args.quiet, "suppress progress output");
}

Config load_config(const CommonArgs& args) {
    Config cfg = Config::load(args.config_path);
    if (args.seed_override) cfg.set("seed", std::to_string(*args.seed_override));
    return cfg;
}

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string fmt_short(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%g", v);
    return buf;
}

// Dataset comes from data.file when set, otherwise it is generated from the
// data.* spec (deterministic given the seed).
kscl::LoadedDataset acquire_dataset(const Config& cfg) {
    const std::string file = cfg.get_string("data.file");
    if (!file.empty()) return kscl::load_dataset(file);
    kscl::LoadedDataset out;
    out.num_classes = cfg.get_size("data.classes");
    out.instances = kscl::generate_dataset(
        out.num_classes, cfg.get_size("data.instances_per_class"),
        cfg.get_size("data.feature_dim"), cfg.get_double("data.class_separation"),
        cfg.get_u64("seed"));
    return out;
}

void write_json(const json& j, const std::string& path) {
    std::ofstream out(path);
    if (!out) kscl::fail(kscl::Errc::IoError, "cannot write " + path);
    out << j.dump(2) << "\n";
}

json config_echo(const Config& cfg) {
    json echo;
    for (const auto& [key, value] : cfg.entries()) echo[key] = value;
    return echo;
}

int cmd_gen_data(const CommonArgs& args) {
    const Config cfg = load_config(args);
    kscl::write_manifest("gen-data", args.config_path, cfg, args.out_dir);
    const kscl::LoadedDataset data = acquire_dataset(cfg);
    kscl::save_dataset(data.instances, data.num_classes, args.out_dir + "/dataset.bin");
    kscl::export_dataset_csv(data.instances, args.out_dir + "/dataset.csv");
    if (!args.quiet)
        std::cout << "wrote " << data.instances.size() << " instances to " << args.out_dir
                  << "/dataset.bin\n";
    return 0;
}

int cmd_pretrain(const CommonArgs& args) {
    const Config cfg = load_config(args);
    kscl::write_manifest("pretrain", args.config_path, cfg, args.out_dir);
    const kscl::LoadedDataset data = acquire_dataset(cfg);
    kscl::TrainConfig train_cfg = cfg.train_config();
    train_cfg.data.num_classes = data.num_classes;
    if (!data.instances.empty())
        train_cfg.data.feature_dim = data.instances[0].features.size();

    const kscl::PretrainResult result = kscl::pretrain(train_cfg, data.instances);
    kscl::save_checkpoint(result.checkpoint, args.out_dir + "/checkpoint.bin");

    std::ofstream losses(args.out_dir + "/losses.csv");
    losses << "step,loss\n";
    for (std::size_t s = 0; s < result.report.step_losses.size(); ++s)
        losses << s << "," << fmt(result.report.step_losses[s]) << "\n";

    json report = {
        {"config", config_echo(cfg)},
        {"config_hash", cfg.content_hash()},
        {"steps", result.report.steps},
        {"mean_retained_rank", result.report.mean_retained_rank},
        {"epoch_mean_loss", result.report.epoch_mean_loss},
        {"checkpoint", "checkpoint.bin"},
        // Wall clock is the one non-deterministic field; reruns of the same
        // manifest differ only here.
        {"sec_per_epoch", result.report.epoch_seconds},
    };
    write_json(report, args.out_dir + "/train_report.json");
    if (!args.quiet)
        std::cout << "pretrain done: " << result.report.steps << " steps, final epoch loss "
                  << result.report.epoch_mean_loss.back() << "\n";
    return 0;
}

int cmd_probe(const CommonArgs& args, const std::string& checkpoint_path, bool permute_labels) {
    const Config cfg = load_config(args);
    kscl::write_manifest("probe", args.config_path, cfg, args.out_dir);
    const kscl::LoadedDataset data = acquire_dataset(cfg);
    const kscl::Checkpoint ckpt = kscl::load_checkpoint(checkpoint_path);
    kscl::ProbeConfig probe_cfg = cfg.probe_config();
    probe_cfg.permute_labels = permute_labels;

    const kscl::ProbeReport report =
        kscl::linear_probe(ckpt.encoders.query, data.instances, data.num_classes, probe_cfg);
    write_json(
        {
            {"config", config_echo(cfg)},
            {"config_hash", cfg.content_hash()},
            {"holdout_accuracy", report.holdout_accuracy},
            {"train_accuracy", report.train_accuracy},
            {"per_class_accuracy", report.per_class_accuracy},
            {"holdout_count", report.holdout_count},
            {"permuted_labels", permute_labels},
        },
        args.out_dir + "/probe_report.json");
    if (!args.quiet)
        std::cout << "probe holdout accuracy " << report.holdout_accuracy << "\n";
    return 0;
}

int cmd_sweep(const CommonArgs& args) {
    const Config cfg = load_config(args);
    kscl::write_manifest("sweep", args.config_path, cfg, args.out_dir);
    const kscl::TrainConfig base = cfg.train_config();
    const kscl::ProbeConfig probe_base = cfg.probe_config();

    std::vector<kscl::SweepCell> cells;
    for (std::size_t k : cfg.get_size_list("sweep.k_values")) {
        if (k == 1) {
            cells.push_back({1, 1.0}); // rho is irrelevant in the one-shot case
            continue;
        }
        for (double rho : cfg.get_double_list("sweep.rho_values")) cells.push_back({k, rho});
    }
    std::vector<std::uint64_t> seeds;
    const std::uint64_t seed0 = cfg.get_u64("seed");
    for (std::size_t i = 0; i < cfg.get_size("sweep.num_seeds"); ++i) seeds.push_back(seed0 + i);

    const std::vector<kscl::SweepRow> rows = kscl::ablation_sweep(base, probe_base, cells, seeds);

    std::ofstream csv(args.out_dir + "/sweep.csv");
    csv << "K,rho,seed,probe_acc,mean_L,sec_per_epoch\n";
    for (const kscl::SweepRow& row : rows) {
        csv << row.k_shots << "," << fmt_short(row.rho) << "," << row.seed << ","
            << fmt(row.probe_accuracy) << "," << fmt(row.mean_retained_rank) << ","
            << fmt_short(row.sec_per_epoch) << "\n";
        if (!args.quiet)
            std::cout << "K=" << row.k_shots << " rho=" << row.rho << " seed=" << row.seed
                      << " probe_acc=" << row.probe_accuracy << "\n";
    }
    return 0;
}

int cmd_basis_viz(const CommonArgs& args, const std::string& checkpoint_path,
                  std::optional<std::uint64_t> instance_override) {
    const Config cfg = load_config(args);
    kscl::write_manifest("basis-viz", args.config_path, cfg, args.out_dir);
    const kscl::LoadedDataset data = acquire_dataset(cfg);
    const kscl::Checkpoint ckpt = kscl::load_checkpoint(checkpoint_path);

    const std::uint64_t wanted =
        instance_override ? *instance_override : cfg.get_u64("viz.instance_id");
    const kscl::Instance* instance = nullptr;
    for (const kscl::Instance& inst : data.instances)
        if (inst.id == wanted) instance = &inst;
    if (!instance)
        kscl::fail(kscl::Errc::InvalidConfig,
                   "instance id " + std::to_string(wanted) + " not in dataset");

    kscl::AugmentationConfig aug = cfg.train_config().augmentation();
    const kscl::TruncationPolicy policy{cfg.get_double("train.rho"),
                                        cfg.get_double("train.rank_epsilon")};
    const kscl::BasisVizResult viz =
        kscl::synthesize_basis(ckpt.encoders.key, *instance, aug, policy);

    json components = json::array();
    for (const kscl::BasisComponent& c : viz.components)
        components.push_back({{"eigenvalue", c.eigenvalue},
                              {"weights", c.weights},
                              {"embedding_weights", c.embedding_weights},
                              {"synthesized", c.synthesized}});
    write_json(
        {
            {"config", config_echo(cfg)},
            {"config_hash", cfg.content_hash()},
            {"instance_id", viz.instance_id},
            {"k_shots", viz.k_shots},
            {"rho", viz.rho},
            {"total_eigenmass", viz.total_eigenmass},
            {"retained_mass", viz.retained_mass},
            {"components", components},
        },
        args.out_dir + "/basis.json");

    std::ofstream csv(args.out_dir + "/basis.csv");
    csv << "component,eigenvalue,aug_index,weight,embedding_weight\n";
    for (std::size_t i = 0; i < viz.components.size(); ++i)
        for (std::size_t k = 0; k < viz.k_shots; ++k)
            csv << i << "," << fmt(viz.components[i].eigenvalue) << "," << k << ","
                << fmt(viz.components[i].weights[k]) << ","
                << fmt(viz.components[i].embedding_weights[k]) << "\n";

    if (!args.quiet)
        std::cout << "instance " << viz.instance_id << ": " << viz.components.size()
                  << " retained bases, retained mass " << viz.retained_mass << " / "
                  << viz.total_eigenmass << "\n";
    return 0;
}

int cmd_selfcheck(const std::string& fault_name, bool quiet) {
    kscl::FaultInjection fault = kscl::FaultInjection::None;
    if (fault_name == "projection-sign") {
        fault = kscl::FaultInjection::FlipProjectionSign;
    } else if (!fault_name.empty() && fault_name != "none") {
        kscl::fail(kscl::Errc::InvalidConfig, "unknown fault '" + fault_name + "'");
    }

    const std::vector<kscl::SuiteResult> results = kscl::run_selfcheck(fault);
    bool all_ok = true;
    for (const kscl::SuiteResult& r : results) {
        all_ok = all_ok && r.passed;
        if (!quiet || !r.passed) {
            std::printf("[%s] %-18s %7.3fs  %s\n", r.passed ? "PASS" : "FAIL", r.name.c_str(),
                        r.seconds, r.message.c_str());
        }
    }
    return all_ok ? 0 : 4;
}

int exit_code_for(kscl::Errc code) {
    switch (code) {
        case kscl::Errc::InvalidConfig:
        case kscl::Errc::IoError:
        case kscl::Errc::CheckpointCorrupt:
            return 2;
        default:
            return 3;
    }
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"K-shot contrastive learning of instance subspaces"};
    app.require_subcommand(1);

    CommonArgs gen_args, pre_args, probe_args, sweep_args, viz_args;
    std::string probe_checkpoint, viz_checkpoint, fault_name;
    std::optional<std::uint64_t> viz_instance;
    bool permute_labels = false;
    bool selfcheck_quiet = false;

    add_common(app.add_subcommand("gen-data", "generate a synthetic dataset"), gen_args);
    add_common(app.add_subcommand("pretrain", "run contrastive pretraining"), pre_args);

    CLI::App* probe = app.add_subcommand("probe", "linear probe of a checkpoint");
    add_common(probe, probe_args);
    probe->add_option("--checkpoint", probe_checkpoint, "checkpoint file")->required();
    probe->add_flag("--permute-labels", permute_labels, "chance-level control probe");

    add_common(app.add_subcommand("sweep", "K x rho ablation sweep"), sweep_args);

    CLI::App* viz = app.add_subcommand("basis-viz", "decompose one instance's subspace");
    add_common(viz, viz_args);
    viz->add_option("--checkpoint", viz_checkpoint, "checkpoint file")->required();
    viz->add_option("--instance", viz_instance, "instance id (default from config)");

    CLI::App* selfcheck = app.add_subcommand("selfcheck", "run the invariant suites");
    selfcheck->add_option("--inject-fault", fault_name, "test hook (projection-sign)");
    selfcheck->add_flag("--quiet", selfcheck_quiet, "print failures only");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (app.got_subcommand("gen-data")) return cmd_gen_data(gen_args);
        if (app.got_subcommand("pretrain")) return cmd_pretrain(pre_args);
        if (app.got_subcommand("probe"))
            return cmd_probe(probe_args, probe_checkpoint, permute_labels);
        if (app.got_subcommand("sweep")) return cmd_sweep(sweep_args);
        if (app.got_subcommand("basis-viz"))
            return cmd_basis_viz(viz_args, viz_checkpoint, viz_instance);
        if (app.got_subcommand("selfcheck")) return cmd_selfcheck(fault_name, selfcheck_quiet);
    } catch (const kscl::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_code_for(e.code());
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
    return 0;
}
