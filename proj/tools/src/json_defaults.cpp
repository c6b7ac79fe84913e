#include "json_defaults.hpp"

#include <fstream>
#include <string_view>

#include <json.hpp>

#include "hcvae/errors.hpp"

namespace hcvae::cli {

std::optional<std::filesystem::path> find_config_path(int argc, const char* const* argv) {
  constexpr std::string_view kFlag = "--config";
  for (int i = 1; i < argc; ++i) {
    const std::string_view a = argv[i];
    if (a == kFlag) {
      if (i + 1 >= argc) throw ConfigError("--config needs a file argument");
      return std::filesystem::path(argv[i + 1]);
    }
    if (a.starts_with(kFlag) && a.size() > kFlag.size() && a[kFlag.size()] == '=')
      return std::filesystem::path(a.substr(kFlag.size() + 1));
  }
  return std::nullopt;
}

namespace {

std::string as_option_text(const nlohmann::json& v, const std::string& where) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
  if (v.is_number()) return v.dump();
  throw ConfigError(where + ": expected a string, number or boolean");
}

}  // namespace

std::set<std::string> apply_json_defaults(CLI::App& app, const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file " + path.string());
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config file " + path.string() + " is not valid JSON: " + e.what());
  }
  if (!doc.is_object()) throw ConfigError("config file must hold a JSON object");

  std::set<std::string> applied;
  for (const auto& [section, body] : doc.items()) {
    CLI::App* sub = nullptr;
    try {
      sub = app.get_subcommand(section);
    } catch (const CLI::OptionNotFound&) {
      throw ConfigError("config file: unknown subcommand section '" + section + "'");
    }
    if (!body.is_object()) throw ConfigError("config file: section '" + section + "' must be an object");
    for (const auto& [key, value] : body.items()) {
      const std::string where = "config file " + section + "." + key;
      if (key == "help" || key == "config") throw ConfigError(where + ": not settable from a config file");
      CLI::Option* opt = sub->get_option_no_throw("--" + key);
      if (opt == nullptr) throw ConfigError(where + ": no such option");
      try {
        opt->run_callback_for_default()->default_val(as_option_text(value, where));
      } catch (const CLI::Error& e) {
        throw ConfigError(where + ": " + e.what());
      }
      applied.insert(section + "." + key);
    }
  }
  return applied;
}

}  // namespace hcvae::cli
