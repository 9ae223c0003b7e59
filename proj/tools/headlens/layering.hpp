#pragma once

// Option layering for CLI11 apps: command line > HEADLENS_* environment > TOML --config.
//
// CLI11 applies config files before environment variables, the opposite of the order we
// want, so neither of its built-in mechanisms is used. Instead the app is parsed once to
// learn which options the user gave, and every missing option that has an environment or
// config value is appended as an explicit "--name=value" argument for a second parse.

#include <cstdlib>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"

namespace headlens::cli {

inline std::string env_name(const std::string& prefix, const std::string& option) {
  std::string out = prefix;
  for (char c : option) {
    out.push_back(c == '-' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
  }
  return out;
}

using EnvLookup = std::function<std::optional<std::string>(const std::string&)>;

inline std::optional<std::string> process_env(const std::string& name) {
  if (const char* v = std::getenv(name.c_str())) return std::string(v);
  return std::nullopt;
}

/// Value of `--config FILE` / `--config=FILE` in raw arguments, if any.
inline std::optional<std::string> find_config_arg(const std::vector<std::string>& args) {
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) return args[i + 1];
    if (args[i].rfind("--config=", 0) == 0) return args[i].substr(9);
  }
  return std::nullopt;
}

namespace detail {

// Long options of `app` that the user did not set.
inline std::vector<const CLI::Option*> unset_options(const CLI::App& app) {
  std::vector<const CLI::Option*> out;
  for (const CLI::Option* opt : app.get_options()) {
    if (opt->get_lnames().empty() || opt->count() > 0) continue;
    const std::string& name = opt->get_lnames().front();
    if (name == "help" || name == "version" || name == "config") continue;
    out.push_back(opt);
  }
  return out;
}

inline void append_values(std::vector<std::string>& out, const std::string& name,
                          const std::vector<std::string>& values) {
  for (const auto& v : values) out.push_back("--" + name + "=" + v);
}

}  // namespace detail

/// Arguments to append so that a re-parse sees environment and config values for the
/// options the user left out. `app` must already hold the first parse. Config keys are
/// looked up at top level for global options and in the [<subcommand>] table (or at
/// top level) for subcommand options.
inline std::vector<std::string> layered_args(const CLI::App& app,
                                             const std::vector<CLI::ConfigItem>& config,
                                             const EnvLookup& env = process_env,
                                             const std::string& prefix = "HEADLENS_") {
  std::vector<std::string> extra;
  auto layer = [&](const CLI::App& scope, const std::string& section) {
    for (const CLI::Option* opt : detail::unset_options(scope)) {
      const std::string& name = opt->get_lnames().front();
      if (auto v = env(env_name(prefix, name))) {
        extra.push_back("--" + name + "=" + *v);
        continue;
      }
      const CLI::ConfigItem* hit = nullptr;
      for (const auto& item : config) {
        if (item.name != name) continue;
        const bool top = item.parents.empty();
        const bool in_section = !section.empty() && item.parents.size() == 1 && item.parents[0] == section;
        if (in_section || (top && !hit)) hit = &item;
      }
      if (hit) detail::append_values(extra, name, hit->inputs);
    }
  };
  layer(app, "");
  for (const CLI::App* sub : app.get_subcommands()) layer(*sub, sub->get_name());
  return extra;
}

}  // namespace headlens::cli
