#include <algorithm>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "searchlight/cli.hpp"
#include "searchlight_builtin_scenarios.hpp"

namespace {

using searchlight::ScenarioConfig;

std::vector<ScenarioConfig> load_inputs(const std::string& command, const std::optional<std::string>& input) {
  std::vector<ScenarioConfig> out;
  if (!input) {
    if (command != "examples") throw searchlight::ValidationError(command + " needs a scenario file");
    for (const auto& [name, text] : searchlight::builtin_scenarios()) {
      out.push_back(searchlight::parse_scenario(text, "builtin:" + name));
    }
    return out;
  }
  const std::filesystem::path path(*input);
  if (std::filesystem::is_directory(path)) {
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(path)) {
      if (entry.path().extension() == ".json") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& f : files) out.push_back(searchlight::load_scenario(f.string()));
    return out;
  }
  out.push_back(searchlight::load_scenario(path.string()));
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Uniformly optimal search plans: allocation, detection curves, mean times"};
  std::string command;
  std::optional<std::string> input;
  std::optional<std::string> out_dir;
  std::optional<std::uint64_t> seed;
  bool paper_mode = false;
  bool allow_divergent = false;
  app.add_option("command", command, "plan | curves | compare | mean-time | examples")
      ->required()
      ->check(CLI::IsMember({"plan", "curves", "compare", "mean-time", "examples"}));
  app.add_option("scenario", input,
                 "scenario JSON file; for 'examples' optionally a file or directory (default: bundled suite)");
  app.add_option("--out", out_dir, "output directory (default: $SEARCHLIGHT_OUT_DIR, else .)");
  app.add_flag("--paper-mode", paper_mode, "use the moment-matched Gaussian for Gaussian mixture priors");
  app.add_option("--seed", seed, "override the scenario seed");
  app.add_flag("--allow-divergent", allow_divergent, "exit 0 even when a mean time diverges");
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : searchlight::exit_validation;
  }

  searchlight::RunOptions options;
  options.out_dir = searchlight::default_out_dir(out_dir);
  options.paper_mode = paper_mode;
  options.seed = seed;
  options.allow_divergent = allow_divergent;

  std::vector<ScenarioConfig> scenarios;
  try {
    scenarios = load_inputs(command, input);
  } catch (const searchlight::ValidationError& e) {
    for (const auto& v : e.violations()) std::cerr << "validation error: " << v << "\n";
    return searchlight::exit_validation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return searchlight::exit_failure;
  }
  return searchlight::run_command(command, scenarios, options);
}
