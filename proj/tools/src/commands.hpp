#pragma once

#include <functional>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>

namespace hcvae::cli {

struct Context {
  // "<subcommand>.<key>" entries taken from the JSON config file.
  std::set<std::string> config_keys;
};

struct Command {
  CLI::App* app = nullptr;
  std::function<int()> run;  // returns the process exit code
};

// Registers every subcommand on app. The returned callbacks read ctx when
// they run, after parsing.
std::vector<Command> add_commands(CLI::App& app, const Context& ctx);

}  // namespace hcvae::cli
