#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace fintra {

// Resolved run configuration: defaults, then config-file keys, then
// command-line flags, last writer wins.
struct CliConfig {
    std::string command;
    std::string benchmark_name = "bm";
    int level = 3;
    int levels_lo = -1;
    int levels_hi = -1;
    int degree = 1;
    std::string engine = "exact";
    std::uint64_t samples = 1u << 14;
    std::uint64_t seed = 1;
    bool enlargement = false;
    double horizon = 1.0;
    std::string output_dir;
    int threads = 1;
    bool no_timing = false;
    std::string dump_basis_path;
    std::string dump_paths_path;
};

// FNV-1a over the canonical key=value serialization; embedded in reports.
std::string config_hash_hex(const CliConfig& config);

// Exit codes: 0 success, 1 validation failure, 2 configuration error.
int cli_main(const std::vector<std::string>& args, std::ostream& out,
             std::ostream& err);

}  // namespace fintra
