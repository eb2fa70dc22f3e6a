#include <algorithm>
#include <cstdint>
#include <iostream>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>

#include "roadreg/commands.hpp"
#include "roadreg/config.hpp"
#include "roadreg/error.hpp"

namespace {

struct Options {
  std::string config;
  std::uint64_t seed = 0;
  std::string out;
  std::string dataset;
  std::string poses;
  bool realtime = false;
  std::vector<std::pair<std::string, std::string>> overrides;
};

std::string leaf_type_name(roadreg::LeafType t) {
  switch (t) {
    case roadreg::LeafType::integer: return "INT";
    case roadreg::LeafType::unsigned_integer: return "UINT";
    case roadreg::LeafType::number: return "FLOAT";
    case roadreg::LeafType::nullable_number: return "FLOAT|null";
    case roadreg::LeafType::boolean: return "BOOL";
    case roadreg::LeafType::string: return "TEXT";
  }
  return "TEXT";
}

void add_common(CLI::App& sub, Options& opt, const std::vector<roadreg::OverrideKey>& keys,
                const nlohmann::ordered_json& defaults) {
  sub.add_option("--config", opt.config, "JSON run configuration")->check(CLI::ExistingFile);
  sub.add_option("--seed", opt.seed, "Run seed (overrides the config)");
  auto* group = sub.add_option_group("Config overrides", "Set one config value by its key");
  for (const auto& k : keys) {
    if (k.key == "seed") continue;
    std::string pointer = "/" + k.key;
    std::replace(pointer.begin(), pointer.end(), '.', '/');
    const auto& leaf = defaults.at(nlohmann::ordered_json::json_pointer(pointer));
    group
        ->add_option_function<std::string>(
            "--" + k.key, [&opt, key = k.key](const std::string& v) { opt.overrides.emplace_back(key, v); },
            "default " + leaf.dump())
        ->type_name(leaf_type_name(k.type));
  }
}

}  // namespace

int main(int argc, char** argv) {
  using namespace roadreg;

  CLI::App app{"Roadside radar self-localization against an aerial laser scan, and sub-lane "
               "occupancy heat maps."};
  app.require_subcommand(1);

  Options opt;
  const nlohmann::ordered_json defaults = to_json(RunConfig{});
  const auto keys = override_keys(defaults);

  auto* simulate = app.add_subcommand("simulate", "Generate a synthetic dataset");
  add_common(*simulate, opt, keys, defaults);
  simulate->add_option("--out", opt.out, "Dataset directory")->required();

  auto* localize = app.add_subcommand("localize", "Localize every sensor of a dataset");
  auto* evaluate = app.add_subcommand("evaluate", "Seed-sweep registration errors");
  auto* heatmap = app.add_subcommand("heatmap", "Occupancy heat map from localized sensors");
  for (auto* sub : {localize, evaluate, heatmap}) {
    add_common(*sub, opt, keys, defaults);
    sub->add_option("--dataset", opt.dataset, "Dataset directory (default: --out)");
    sub->add_option("--out", opt.out, "Output directory (default: --dataset)");
  }
  heatmap->add_option("--poses", opt.poses, "Sensor pose file (default: <out>/poses.csv)");
  heatmap->add_flag("--realtime", opt.realtime, "Pace the replay by the frame stamps");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  CLI::App* sub = app.get_subcommands().front();
  try {
    std::optional<std::filesystem::path> config_path;
    if (!opt.config.empty()) config_path = opt.config;
    std::optional<std::uint64_t> seed;
    if (sub->count("--seed") > 0) seed = opt.seed;
    const RunConfig cfg = resolve_run_config(config_path, opt.overrides, seed);

    if (sub == simulate) {
      cmd_simulate(cfg, opt.out, std::cout);
      return 0;
    }
    if (opt.dataset.empty() && opt.out.empty()) {
      throw ConfigError(sub->get_name() + ": --dataset or --out is required");
    }
    const std::filesystem::path dataset = opt.dataset.empty() ? opt.out : opt.dataset;
    const std::filesystem::path out = opt.out.empty() ? opt.dataset : opt.out;
    if (sub == localize) {
      cmd_localize(cfg, dataset, out, std::cout);
    } else if (sub == evaluate) {
      cmd_evaluate(cfg, dataset, out, std::cout);
    } else {
      const std::filesystem::path poses = opt.poses.empty() ? out / "poses.csv" : std::filesystem::path(opt.poses);
      cmd_heatmap(cfg, dataset, poses, out, opt.realtime, std::cout);
    }
    return 0;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  }
}
