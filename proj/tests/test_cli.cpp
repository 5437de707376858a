#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "kscl/config.hpp"
#include "kscl/error.hpp"

#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

using namespace kscl;
namespace fs = std::filesystem;

namespace {

const std::string kCli = KSCL_CLI_PATH;

int run_cli(const std::string& args, const std::string& capture_path = "/dev/null") {
    const std::string cmd = kCli + " " + args + " > " + capture_path + " 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    std::ostringstream out;
    out << in.rdbuf();
    return out.str();
}

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

const char* kTinyConfig = R"(
# tiny desk config for CLI tests
seed = 9
data.classes = 2
data.instances_per_class = 10
data.feature_dim = 12
data.class_separation = 4.0
aug.noise_sigma = 0.4
aug.mask_fraction = 0.1
aug.scale_jitter_lo = 0.9
aug.scale_jitter_hi = 1.1
aug.rotation_pairs = 2
enc.hidden_dims = 16
enc.embed_dim = 8
train.epochs = 2
train.batch_size = 5
train.k_shots = 2
train.rho = 0.5
train.queue_capacity = 16
probe.epochs = 50
sweep.k_values = 1,2
sweep.rho_values = 0.5
sweep.num_seeds = 1
)";

fs::path write_config(const TempDir& dir, const std::string& text = kTinyConfig) {
    const fs::path path = dir.path / "config.txt";
    std::ofstream out(path);
    out << text;
    return path;
}

nlohmann::json load_json(const fs::path& path) { return nlohmann::json::parse(slurp(path)); }

} // namespace

TEST_CASE("config schema and hashing") {
    const Config cfg = Config::from_string(kTinyConfig);
    CHECK(cfg.get_u64("seed") == 9);
    CHECK(cfg.get_size("train.epochs") == 2);
    CHECK(cfg.get_double("train.rho") == 0.5);
    CHECK(cfg.get_bool("train.cosine_decay") == true); // default survives

    CHECK_THROWS_WITH_AS(Config::from_string("train.K = 3\n"),
                         doctest::Contains("unknown config key 'train.K'"), Error);
    CHECK_THROWS_WITH_AS(Config::from_string("seed 9\n"), doctest::Contains("expected"), Error);

    const Config bad = Config::from_string("train.rho = abc\n");
    CHECK_THROWS_WITH_AS(bad.get_double("train.rho"), doctest::Contains("train.rho"), Error);

    CHECK(cfg.content_hash() == Config::from_string(kTinyConfig).content_hash());
    CHECK(cfg.content_hash() != Config::defaults().content_hash());
    CHECK(cfg.content_hash().size() == 16);

    // list parsing
    CHECK(cfg.get_size_list("sweep.k_values") == std::vector<std::size_t>{1, 2});
    CHECK(cfg.get_double_list("sweep.rho_values") == std::vector<double>{0.5});
}

TEST_CASE("gen-data writes reloadable, hash-stable outputs") {
    TempDir dir("kscl_cli_gen");
    const fs::path config = write_config(dir);
    const fs::path out1 = dir.path / "run1";
    const fs::path out2 = dir.path / "run2";

    REQUIRE(run_cli("gen-data --config " + config.string() + " --out " + out1.string() +
                    " --quiet") == 0);
    CHECK(fs::exists(out1 / "manifest.json"));
    CHECK(fs::exists(out1 / "dataset.bin"));
    CHECK(fs::exists(out1 / "dataset.csv"));

    REQUIRE(run_cli("gen-data --config " + config.string() + " --out " + out2.string() +
                    " --quiet") == 0);
    CHECK(slurp(out1 / "dataset.bin") == slurp(out2 / "dataset.bin"));
    CHECK(slurp(out1 / "dataset.csv") == slurp(out2 / "dataset.csv"));

    const nlohmann::json manifest = load_json(out1 / "manifest.json");
    const nlohmann::json manifest2 = load_json(out2 / "manifest.json");
    CHECK(manifest["command"] == "gen-data");
    CHECK(manifest["config_hash"] == manifest2["config_hash"]);
    CHECK(manifest["resolved"] == manifest2["resolved"]);
    CHECK(manifest["resolved"].size() == Config::defaults().entries().size());
}

TEST_CASE("config errors exit with code 2 and name the offending key") {
    TempDir dir("kscl_cli_err");
    const fs::path bad = dir.path / "bad.txt";
    {
        std::ofstream out(bad);
        out << "train.kshots = 3\n"; // typo for train.k_shots
    }
    const fs::path log = dir.path / "err.log";
    CHECK(run_cli("gen-data --config " + bad.string() + " --out " + (dir.path / "o").string(),
                  log.string()) == 2);
    CHECK(slurp(log).find("train.kshots") != std::string::npos);

    CHECK(run_cli("gen-data --out " + (dir.path / "o2").string()) == 2); // missing --config
    CHECK(run_cli("probe --config " + bad.string() + " --out x --checkpoint missing.bin") == 2);
}

TEST_CASE("pretrain, probe and basis-viz round-trip deterministically") {
    TempDir dir("kscl_cli_train");
    const fs::path config = write_config(dir);
    const fs::path run1 = dir.path / "run1";
    const fs::path run2 = dir.path / "run2";

    REQUIRE(run_cli("pretrain --config " + config.string() + " --out " + run1.string() +
                    " --quiet") == 0);
    REQUIRE(run_cli("pretrain --config " + config.string() + " --out " + run2.string() +
                    " --quiet") == 0);
    CHECK(slurp(run1 / "losses.csv") == slurp(run2 / "losses.csv"));
    CHECK(slurp(run1 / "checkpoint.bin") == slurp(run2 / "checkpoint.bin"));

    // the train report matches exactly once the wall-clock field is ignored
    nlohmann::json r1 = load_json(run1 / "train_report.json");
    nlohmann::json r2 = load_json(run2 / "train_report.json");
    r1.erase("sec_per_epoch");
    r2.erase("sec_per_epoch");
    CHECK(r1 == r2);

    const fs::path probe1 = dir.path / "probe1";
    const fs::path probe2 = dir.path / "probe2";
    REQUIRE(run_cli("probe --config " + config.string() + " --out " + probe1.string() +
                    " --checkpoint " + (run1 / "checkpoint.bin").string() + " --quiet") == 0);
    REQUIRE(run_cli("probe --config " + config.string() + " --out " + probe2.string() +
                    " --checkpoint " + (run1 / "checkpoint.bin").string() + " --quiet") == 0);
    CHECK(slurp(probe1 / "probe_report.json") == slurp(probe2 / "probe_report.json"));
    const nlohmann::json probe = load_json(probe1 / "probe_report.json");
    CHECK(probe["holdout_accuracy"].get<double>() >= 0.0);
    CHECK(probe["holdout_accuracy"].get<double>() <= 1.0);

    const fs::path viz = dir.path / "viz";
    REQUIRE(run_cli("basis-viz --config " + config.string() + " --out " + viz.string() +
                    " --checkpoint " + (run1 / "checkpoint.bin").string() +
                    " --instance 3 --quiet") == 0);
    const nlohmann::json basis = load_json(viz / "basis.json");
    CHECK(basis["instance_id"] == 3);
    const double rho = 0.5;
    CHECK(basis["retained_mass"].get<double>() / basis["total_eigenmass"].get<double>() >=
          rho - 1e-12);
    CHECK(fs::exists(viz / "basis.csv"));
}

TEST_CASE("pretrain consumes a gen-data file identically to generating in-process") {
    TempDir dir("kscl_cli_file");
    const fs::path config = write_config(dir);
    const fs::path gen = dir.path / "gen";
    REQUIRE(run_cli("gen-data --config " + config.string() + " --out " + gen.string() +
                    " --quiet") == 0);

    const fs::path file_config = dir.path / "config_file.txt";
    {
        std::ofstream out(file_config);
        out << kTinyConfig << "data.file = " << (gen / "dataset.bin").string() << "\n";
    }
    const fs::path from_file = dir.path / "from_file";
    const fs::path generated = dir.path / "generated";
    REQUIRE(run_cli("pretrain --config " + file_config.string() + " --out " + from_file.string() +
                    " --quiet") == 0);
    REQUIRE(run_cli("pretrain --config " + config.string() + " --out " + generated.string() +
                    " --quiet") == 0);
    CHECK(slurp(from_file / "losses.csv") == slurp(generated / "losses.csv"));
    CHECK(slurp(from_file / "checkpoint.bin") == slurp(generated / "checkpoint.bin"));
}

TEST_CASE("sweep emits one CSV row per cell") {
    TempDir dir("kscl_cli_sweep");
    const fs::path config = write_config(dir);
    const fs::path out = dir.path / "sweep";
    REQUIRE(run_cli("sweep --config " + config.string() + " --out " + out.string() + " --quiet") ==
            0);
    std::istringstream csv(slurp(out / "sweep.csv"));
    std::string line;
    std::getline(csv, line);
    CHECK(line == "K,rho,seed,probe_acc,mean_L,sec_per_epoch");
    std::size_t rows = 0;
    while (std::getline(csv, line))
        if (!line.empty()) ++rows;
    CHECK(rows == 2); // K=1 (rho-free) and K=2 with rho=0.5
}

TEST_CASE("selfcheck passes clean and catches an injected fault") {
    TempDir dir("kscl_cli_selfcheck");
    const fs::path log = dir.path / "selfcheck.log";
    REQUIRE(run_cli("selfcheck", log.string()) == 0);
    const std::string clean = slurp(log);
    CHECK(clean.find("FAIL") == std::string::npos);
    CHECK(clean.find("eigensolver") != std::string::npos);

    // repeated runs give identical verdicts
    REQUIRE(run_cli("selfcheck", (dir.path / "again.log").string()) == 0);

    const fs::path fault_log = dir.path / "fault.log";
    CHECK(run_cli("selfcheck --inject-fault projection-sign", fault_log.string()) == 4);
    const std::string faulty = slurp(fault_log);
    CHECK(faulty.find("FAIL") != std::string::npos);
    CHECK(faulty.find("idempotence") != std::string::npos);

    CHECK(run_cli("selfcheck --inject-fault bogus") == 2);
}
