// Command line front end. Talks to the library exclusively through the C API.

#include <cstdio>
#include <cstdlib>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "predict.h"

namespace {

// 0 = success, 1 = runtime failure, 2 = usage/config error
int exit_code_for(predict_status status) {
  switch (status) {
    case PREDICT_OK: return 0;
    case PREDICT_ERR_CONFIG: return 2;
    default: return 1;
  }
}

int report(predict_status status) {
  if (status == PREDICT_OK) return 0;
  std::fprintf(stderr, "error: %s\n", predict_last_error());
  return exit_code_for(status);
}

struct ConfigHandle {
  predict_config* ptr = nullptr;
  ~ConfigHandle() { predict_config_destroy(ptr); }
};

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"optimal prediction experiments"};
  app.require_subcommand(1);

  CLI::App* run = app.add_subcommand("run", "run one experiment");
  std::string config_path;
  std::string experiment;
  std::string output_dir;
  std::string seed;
  int threads = -1;
  std::vector<std::string> overrides;
  run->add_option("--config", config_path, "JSON config file");
  run->add_option("--experiment", experiment, "experiment name (see 'experiments')");
  run->add_option("--out", output_dir, "output directory");
  run->add_option("--seed", seed, "master seed (nonnegative integer)");
  run->add_option("--threads", threads, "worker thread cap, 0 = one per core");
  run->add_option("--set", overrides, "extra overrides as dotted.key=value")
      ->expected(-1);

  CLI::App* experiments = app.add_subcommand("experiments", "list experiment names");
  CLI::App* version = app.add_subcommand("version", "print the library version");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  if (version->parsed()) {
    std::printf("%s\n", predict_version());
    return 0;
  }
  if (experiments->parsed()) {
    std::printf("%s\n", predict_experiments());
    return 0;
  }

  ConfigHandle cfg;
  predict_status status = config_path.empty()
                              ? predict_config_create(&cfg.ptr)
                              : predict_config_load(config_path.c_str(), &cfg.ptr);
  if (status != PREDICT_OK) return report(status);

  if (!experiment.empty()) {
    status = predict_config_set(cfg.ptr, "experiment", experiment.c_str());
    if (status != PREDICT_OK) return report(status);
  }
  if (!output_dir.empty()) {
    status = predict_config_set(cfg.ptr, "output_dir", output_dir.c_str());
    if (status != PREDICT_OK) return report(status);
  }
  if (!seed.empty()) {
    status = predict_config_set(cfg.ptr, "seed", seed.c_str());
    if (status != PREDICT_OK) return report(status);
  }
  for (const std::string& kv : overrides) {
    const std::size_t eq = kv.find('=');
    if (eq == std::string::npos || eq == 0) {
      std::fprintf(stderr, "error: --set expects dotted.key=value, got '%s'\n", kv.c_str());
      return 2;
    }
    status = predict_config_set(cfg.ptr, kv.substr(0, eq).c_str(), kv.substr(eq + 1).c_str());
    if (status != PREDICT_OK) return report(status);
  }
  if (threads >= 0) {
    const std::string value = std::to_string(threads);
    setenv("PREDICT_THREADS", value.c_str(), 1);
  }

  return report(predict_run_experiment(cfg.ptr));
}
