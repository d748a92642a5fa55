#pragma once
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "afog/data_io.hpp"
#include "afog/victim.hpp"

namespace afog {

struct CampaignOptions {
  AttackConfig config;
  int threads = 0;  // 0 picks hardware concurrency
  bool save_artifacts = false;
  std::string artifact_dir;
};

struct CampaignOutcome {
  AttackReport report;
  std::vector<std::pair<int, std::string>> errors;  // (image_id, message)
};

// Attacks every image; lanes own adapter clones, one image per task, records
// assembled in dataset order so the report is byte-stable regardless of
// scheduling. Per-image failures are collected, not fatal.
CampaignOutcome run_campaign(const LoadedDataset& data, const VictimAdapter& adapter,
                             const CampaignOptions& opts);

struct AblationRow {
  std::uint64_t seed = 0;
  double map_with_attention = 0.0;
  double map_without_attention = 0.0;
  double improvement_pct = 0.0;  // (off - on) / off, as percent
};

// Paired campaigns per seed, identical configs except attention_enabled.
std::vector<AblationRow> run_ablation(const LoadedDataset& data, const VictimAdapter& adapter,
                                      const AttackConfig& base,
                                      const std::vector<std::uint64_t>& seeds, int threads = 0);

struct SweepRow {
  double alpha_a = 0.0;
  double adversarial_map50 = 0.0;
};

// One campaign per attention learning rate, shared seed.
std::vector<SweepRow> run_sweep(const LoadedDataset& data, const VictimAdapter& adapter,
                                const AttackConfig& base, const std::vector<double>& alphas,
                                int threads = 0);

}  // namespace afog
