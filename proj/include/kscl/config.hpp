#pragma once

#include "kscl/trainer.hpp"

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace kscl {

// Flat key-value run configuration. Every key has a default; files may set
// any subset, unknown keys are rejected (catching sweep typos like K vs k).
// The resolved form is fully explicit: all keys, as strings, in sorted
// order, which is also what the content hash covers.
class Config {
public:
    static Config defaults();

    // defaults() overlaid with "key = value" lines from the file ('#' starts
    // a comment). Throws InvalidConfig naming the offending key or line.
    static Config load(const std::string& path);

    static Config from_string(const std::string& text, const std::string& origin = "<string>");

    void set(const std::string& key, const std::string& value); // throws on unknown key

    const std::map<std::string, std::string>& entries() const { return values_; }

    std::string get_string(const std::string& key) const;
    double get_double(const std::string& key) const;
    std::uint64_t get_u64(const std::string& key) const;
    std::size_t get_size(const std::string& key) const;
    bool get_bool(const std::string& key) const;
    std::vector<std::size_t> get_size_list(const std::string& key) const;
    std::vector<double> get_double_list(const std::string& key) const;

    // FNV-1a 64 over the sorted "key=value\n" lines, as 16 hex digits.
    std::string content_hash() const;

    TrainConfig train_config() const;
    ProbeConfig probe_config() const;

private:
    std::map<std::string, std::string> values_;
};

// manifest.json written before any command output: command, config path,
// fully resolved config, content hash, output directory.
void write_manifest(const std::string& command, const std::string& config_path,
                    const Config& config, const std::string& out_dir);

} // namespace kscl
