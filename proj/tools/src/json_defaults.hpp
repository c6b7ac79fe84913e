#pragma once

#include <filesystem>
#include <optional>
#include <set>
#include <string>

#include <CLI11.hpp>

namespace hcvae::cli {

// Value of --config FILE / --config=FILE, looked up before parsing so the
// file can seed option defaults.
std::optional<std::filesystem::path> find_config_path(int argc, const char* const* argv);

// The file holds one object per subcommand, keyed by long option names
// without the leading dashes:
//   { "train": { "epochs": 20, "mode": "both" }, "eval": { "eta": 0.0 } }
// Each value becomes the option's default, so command line flags still win
// and --help shows the merged defaults. Unknown sections or keys throw
// ConfigError. Returns "<subcommand>.<key>" for every applied entry.
std::set<std::string> apply_json_defaults(CLI::App& app, const std::filesystem::path& path);

}  // namespace hcvae::cli
