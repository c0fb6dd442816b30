#pragma once

#include <map>
#include <string>
#include <vector>

#include "common.hpp"
#include "metrics.hpp"

namespace teko {

// Flat key/value configuration with a fixed schema. Unknown keys are
// rejected so typos surface as ConfigInvalid instead of silent defaults.
class PipelineConfig {
 public:
  PipelineConfig();

  static PipelineConfig from_file(const std::string& path);
  static PipelineConfig from_string(const std::string& content, const std::string& origin);

  void set(const std::string& key, const std::string& value);
  const std::string& get(const std::string& key) const;
  double num(const std::string& key) const;
  long long integer(const std::string& key) const;
  bool flag(const std::string& key) const;
  std::vector<double> grid(const std::string& key) const;
  std::vector<uint64_t> seed_list() const;  // "seeds", falling back to {seed}

  // Hash over every setting that affects results (out_dir and execution
  // toggles excluded).
  uint64_t config_hash() const;
  void validate() const;

  const std::map<std::string, std::string>& values() const { return kv_; }

 private:
  std::map<std::string, std::string> kv_;
};

// Stage orchestration over the artifact directory. Each stage checks a
// content-hash stamp and is skipped when its inputs and config subset are
// unchanged. Sweeps may point `upstream_dir` at a parent run so shared
// stages (entity linking, KB training) are not recomputed per point.
class Pipeline {
 public:
  explicit Pipeline(PipelineConfig config, std::string upstream_dir = "");

  // command: link | train-kb | build-graph | train | eval | embed | sweep.
  // Returns a JSON summary of what ran and where the artifacts are.
  std::string run(const std::string& command);

  const PipelineConfig& config() const { return cfg_; }
  std::string artifact_path(const std::string& name) const;

 private:
  struct StageResult {
    bool cached = false;
    std::vector<std::string> artifacts;
    std::string extra_json;  // command-specific payload
  };

  StageResult cmd_link();
  StageResult cmd_train_kb();
  StageResult cmd_build_graph();
  StageResult cmd_train();
  StageResult cmd_eval();
  StageResult cmd_embed();
  StageResult cmd_sweep();

  std::string resolve_input(const std::string& artifact, const std::string& producer) const;
  bool stage_fresh(const std::string& stage, uint64_t hash) const;
  void write_stamp(const std::string& stage, uint64_t hash) const;
  uint64_t stage_hash(const std::vector<std::string>& files,
                      const std::vector<std::string>& keys) const;
  std::string stamp_line() const;

  PipelineConfig cfg_;
  std::string out_dir_;
  std::string upstream_dir_;
};

}  // namespace teko
