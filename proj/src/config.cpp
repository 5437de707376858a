#include "kscl/config.hpp"

#include "kscl/error.hpp"

#include <json.hpp>

#include <cerrno>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace kscl {

namespace {

const std::map<std::string, std::string>& default_entries() {
    static const std::map<std::string, std::string> defaults = {
        {"seed", "42"},
        {"data.classes", "10"},
        {"data.instances_per_class", "200"},
        {"data.feature_dim", "64"},
        {"data.class_separation", "6.0"},
        {"data.file", ""},
        {"aug.noise_sigma", "0.8"},
        {"aug.mask_fraction", "0.2"},
        {"aug.scale_jitter_lo", "0.85"},
        {"aug.scale_jitter_hi", "1.15"},
        {"aug.rotation_pairs", "8"},
        {"enc.hidden_dims", "128,64"},
        {"enc.embed_dim", "32"},
        {"train.epochs", "50"},
        {"train.batch_size", "64"},
        {"train.base_lr", "0.03"},
        {"train.cosine_decay", "true"},
        {"train.weight_decay", "0.0001"},
        {"train.sgd_momentum", "0.9"},
        {"train.k_shots", "3"},
        {"train.rho", "0.4"},
        {"train.temperature", "0.2"},
        {"train.queue_capacity", "128"},
        {"train.encoder_momentum", "0.999"},
        {"train.rank_epsilon", "1e-10"},
        {"probe.epochs", "300"},
        {"probe.lr", "0.5"},
        {"probe.holdout_fraction", "0.2"},
        {"sweep.k_values", "1,3,5"},
        {"sweep.rho_values", "0.4,0.9"},
        {"sweep.num_seeds", "3"},
        {"viz.instance_id", "0"},
    };
    return defaults;
}

std::string trim(const std::string& s) {
    const auto begin = s.find_first_not_of(" \t\r\n");
    if (begin == std::string::npos) return "";
    const auto end = s.find_last_not_of(" \t\r\n");
    return s.substr(begin, end - begin + 1);
}

} // namespace

Config Config::defaults() {
    Config c;
    c.values_ = default_entries();
    return c;
}

void Config::set(const std::string& key, const std::string& value) {
    auto it = values_.find(key);
    if (it == values_.end()) fail(Errc::InvalidConfig, "unknown config key '" + key + "'");
    it->second = value;
}

Config Config::from_string(const std::string& text, const std::string& origin) {
    Config c = defaults();
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            fail(Errc::InvalidConfig,
                 origin + ":" + std::to_string(lineno) + ": expected 'key = value'");
        c.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    return c;
}

Config Config::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail(Errc::IoError, "cannot open config file " + path);
    std::ostringstream text;
    text << in.rdbuf();
    return from_string(text.str(), path);
}

std::string Config::get_string(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) fail(Errc::InvalidConfig, "unknown config key '" + key + "'");
    return it->second;
}

double Config::get_double(const std::string& key) const {
    const std::string s = get_string(key);
    char* end = nullptr;
    errno = 0;
    const double v = std::strtod(s.c_str(), &end);
    if (errno != 0 || end == s.c_str() || *end != '\0')
        fail(Errc::InvalidConfig, "key '" + key + "': '" + s + "' is not a number");
    return v;
}

std::uint64_t Config::get_u64(const std::string& key) const {
    const std::string s = get_string(key);
    char* end = nullptr;
    errno = 0;
    const unsigned long long v = std::strtoull(s.c_str(), &end, 10);
    if (errno != 0 || end == s.c_str() || *end != '\0' || s.find('-') != std::string::npos)
        fail(Errc::InvalidConfig, "key '" + key + "': '" + s + "' is not a non-negative integer");
    return v;
}

std::size_t Config::get_size(const std::string& key) const {
    return static_cast<std::size_t>(get_u64(key));
}

bool Config::get_bool(const std::string& key) const {
    const std::string s = get_string(key);
    if (s == "true" || s == "1") return true;
    if (s == "false" || s == "0") return false;
    fail(Errc::InvalidConfig, "key '" + key + "': '" + s + "' is not a boolean");
}

std::vector<std::size_t> Config::get_size_list(const std::string& key) const {
    std::vector<std::size_t> out;
    std::istringstream in(get_string(key));
    std::string item;
    while (std::getline(in, item, ',')) {
        item = trim(item);
        char* end = nullptr;
        errno = 0;
        const unsigned long long v = std::strtoull(item.c_str(), &end, 10);
        if (errno != 0 || end == item.c_str() || *end != '\0')
            fail(Errc::InvalidConfig, "key '" + key + "': bad list item '" + item + "'");
        out.push_back(static_cast<std::size_t>(v));
    }
    if (out.empty()) fail(Errc::InvalidConfig, "key '" + key + "': empty list");
    return out;
}

std::vector<double> Config::get_double_list(const std::string& key) const {
    std::vector<double> out;
    std::istringstream in(get_string(key));
    std::string item;
    while (std::getline(in, item, ',')) {
        item = trim(item);
        char* end = nullptr;
        errno = 0;
        const double v = std::strtod(item.c_str(), &end);
        if (errno != 0 || end == item.c_str() || *end != '\0')
            fail(Errc::InvalidConfig, "key '" + key + "': bad list item '" + item + "'");
        out.push_back(v);
    }
    if (out.empty()) fail(Errc::InvalidConfig, "key '" + key + "': empty list");
    return out;
}

std::string Config::content_hash() const {
    std::uint64_t h = 0xcbf29ce484222325ull;
    auto absorb = [&h](const std::string& s) {
        for (char c : s) {
            h ^= static_cast<unsigned char>(c);
            h *= 0x100000001b3ull;
        }
    };
    for (const auto& [key, value] : values_) {
        absorb(key);
        absorb("=");
        absorb(value);
        absorb("\n");
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

TrainConfig Config::train_config() const {
    TrainConfig cfg;
    cfg.epochs = get_size("train.epochs");
    cfg.batch_size = get_size("train.batch_size");
    cfg.base_lr = get_double("train.base_lr");
    cfg.cosine_decay = get_bool("train.cosine_decay");
    cfg.weight_decay = get_double("train.weight_decay");
    cfg.sgd_momentum = get_double("train.sgd_momentum");
    cfg.k_shots = get_size("train.k_shots");
    cfg.rho = get_double("train.rho");
    cfg.temperature = get_double("train.temperature");
    cfg.queue_capacity = get_size("train.queue_capacity");
    cfg.encoder_momentum = get_double("train.encoder_momentum");
    cfg.rank_epsilon = get_double("train.rank_epsilon");
    cfg.seed = get_u64("seed");
    cfg.data.num_classes = get_size("data.classes");
    cfg.data.instances_per_class = get_size("data.instances_per_class");
    cfg.data.feature_dim = get_size("data.feature_dim");
    cfg.data.class_separation = get_double("data.class_separation");
    cfg.encoder.hidden_dims = get_size_list("enc.hidden_dims");
    cfg.encoder.embed_dim = get_size("enc.embed_dim");
    cfg.aug.noise_sigma = get_double("aug.noise_sigma");
    cfg.aug.mask_fraction = get_double("aug.mask_fraction");
    cfg.aug.scale_jitter_lo = get_double("aug.scale_jitter_lo");
    cfg.aug.scale_jitter_hi = get_double("aug.scale_jitter_hi");
    cfg.aug.rotation_pairs = get_size("aug.rotation_pairs");
    return cfg;
}

ProbeConfig Config::probe_config() const {
    ProbeConfig cfg;
    cfg.epochs = get_size("probe.epochs");
    cfg.lr = get_double("probe.lr");
    cfg.holdout_fraction = get_double("probe.holdout_fraction");
    cfg.seed = get_u64("seed");
    return cfg;
}

void write_manifest(const std::string& command, const std::string& config_path,
                    const Config& config, const std::string& out_dir) {
    nlohmann::json resolved;
    for (const auto& [key, value] : config.entries()) resolved[key] = value;
    nlohmann::json manifest = {
        {"command", command},
        {"config_path", config_path},
        {"resolved", resolved},
        {"config_hash", config.content_hash()},
        {"out_dir", out_dir},
    };
    std::filesystem::create_directories(out_dir);
    const std::string path = out_dir + "/manifest.json";
    std::ofstream out(path);
    if (!out) fail(Errc::IoError, "cannot write " + path);
    out << manifest.dump(2) << "\n";
}

} // namespace kscl
