// teko CLI: thin wrapper over the shared-library C API.
//
//   teko <command> [--config FILE] [--set key=value ...] [--seed N] [--json]
//
// Exit code 0 on success; otherwise the teko_status value of the failure.

#include <cstdio>
#include <memory>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "teko/teko.h"

namespace {

struct PipelineDeleter {
  void operator()(teko_pipeline* p) const { teko_pipeline_free(p); }
};

int run_command(const std::string& command, const std::string& config_path,
                const std::vector<std::string>& sets, const std::string& seed, bool json_out) {
  std::unique_ptr<teko_pipeline, PipelineDeleter> p(teko_pipeline_new());
  if (!p) {
    std::fprintf(stderr, "error: out of memory\n");
    return TEKO_ERR_INTERNAL;
  }

  auto check = [&](teko_status st) {
    if (st == TEKO_OK) return true;
    std::fprintf(stderr, "error (%s): %s\n", teko_status_name(st),
                 teko_pipeline_last_error(p.get()));
    return false;
  };

  if (!config_path.empty()) {
    teko_status st = teko_pipeline_load_config(p.get(), config_path.c_str());
    if (!check(st)) return st;
  }
  for (const auto& kv : sets) {
    auto eq = kv.find('=');
    if (eq == std::string::npos) {
      std::fprintf(stderr, "error: --set expects key=value, got '%s'\n", kv.c_str());
      return TEKO_ERR_CONFIG;
    }
    teko_status st = teko_pipeline_set(p.get(), kv.substr(0, eq).c_str(), kv.substr(eq + 1).c_str());
    if (!check(st)) return st;
  }
  if (!seed.empty()) {
    teko_status st = teko_pipeline_set(p.get(), "seed", seed.c_str());
    if (!check(st)) return st;
  }

  teko_status st = teko_pipeline_run(p.get(), command.c_str());
  if (st != TEKO_OK) {
    std::fprintf(stderr, "error (%s): %s\n", teko_status_name(st),
                 teko_pipeline_last_error(p.get()));
    return st;
  }
  if (json_out) {
    std::printf("%s\n", teko_pipeline_result_json(p.get()));
  } else {
    std::printf("%s: done\n%s\n", command.c_str(), teko_pipeline_result_json(p.get()));
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"teko: text-rich graph learning with external knowledge"};
  app.require_subcommand(1);

  std::string config_path;
  std::vector<std::string> sets;
  std::string seed;
  bool json_out = false;

  const char* commands[] = {"link", "train-kb", "build-graph", "train", "eval", "embed", "sweep"};
  const char* descriptions[] = {
      "annotate documents with knowledge-base entities",
      "train TransE and LDA, export fused entity embeddings",
      "assemble the heterogeneous document-entity graph",
      "train the model, write checkpoint and history",
      "train per seed and report classification/clustering metrics",
      "export learned document embeddings",
      "re-run the pipeline across a threshold grid",
  };
  std::vector<CLI::App*> subs;
  for (size_t i = 0; i < std::size(commands); ++i) {
    CLI::App* sub = app.add_subcommand(commands[i], descriptions[i]);
    sub->add_option("--config", config_path, "configuration file (key = value lines)");
    sub->add_option("--set", sets, "override a configuration key (key=value), repeatable");
    sub->add_option("--seed", seed, "override the primary seed");
    sub->add_flag("--json", json_out, "print the machine-readable result only");
    subs.push_back(sub);
  }

  CLI11_PARSE(app, argc, argv);

  for (size_t i = 0; i < subs.size(); ++i)
    if (subs[i]->parsed()) return run_command(commands[i], config_path, sets, seed, json_out);
  return TEKO_ERR_CONFIG;
}
