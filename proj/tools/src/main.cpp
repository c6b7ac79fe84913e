#include <algorithm>
#include <cstdio>
#include <exception>
#include <string>

#include <CLI11.hpp>

#include "commands.hpp"
#include "hcvae/errors.hpp"
#include "json_defaults.hpp"

namespace {

constexpr int kExitFailure = 1;
constexpr int kExitUsage = 2;

// One line on stderr: "hcvae: error[<kind>]: <message>".
void report(const char* kind, std::string message) {
  std::replace(message.begin(), message.end(), '\n', ' ');
  std::fprintf(stderr, "hcvae: error[%s]: %s\n", kind, message.c_str());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Anomaly detection for machine sounds with a hierarchically conditioned VAE", "hcvae"};
  app.option_defaults()->always_capture_default();
  app.require_subcommand(1);
  std::string config_path;
  app.add_option("--config", config_path, "JSON file of per-subcommand option defaults; flags take precedence");

  hcvae::cli::Context ctx;
  const auto commands = hcvae::cli::add_commands(app, ctx);

  try {
    if (const auto path = hcvae::cli::find_config_path(argc, argv))
      ctx.config_keys = hcvae::cli::apply_json_defaults(app, *path);
    try {
      app.parse(argc, argv);
    } catch (const CLI::Success& e) {
      return app.exit(e);
    } catch (const CLI::ParseError& e) {
      report("usage", e.what());
      const auto parsed = app.get_subcommands();
      std::fputs((parsed.empty() ? app.help() : parsed.front()->help()).c_str(), stderr);
      return kExitUsage;
    }
    for (const auto& c : commands)
      if (c.app->parsed()) return c.run();
  } catch (const hcvae::ConfigError& e) {
    report(e.kind(), e.what());
    return kExitUsage;
  } catch (const hcvae::Error& e) {
    report(e.kind(), e.what());
    return kExitFailure;
  } catch (const std::exception& e) {
    report("internal", e.what());
    return kExitFailure;
  }
  return kExitFailure;
}
