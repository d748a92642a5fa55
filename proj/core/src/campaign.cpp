#include "afog/campaign.hpp"

#include <atomic>
#include <cstdio>
#include <optional>
#include <thread>

#include "afog/attack.hpp"
#include "afog/errors.hpp"

namespace afog {

CampaignOutcome run_campaign(const LoadedDataset& data, const VictimAdapter& adapter,
                             const CampaignOptions& opts) {
  opts.config.validate();
  const std::size_t n = data.items.size();
  std::vector<std::optional<ImageRecord>> slots(n);
  std::vector<std::optional<std::string>> failures(n);

  int lanes = opts.threads > 0 ? opts.threads
                               : static_cast<int>(std::thread::hardware_concurrency());
  lanes = std::max(1, std::min<int>(lanes, static_cast<int>(n)));

  std::atomic<std::size_t> cursor{0};
  auto worker = [&]() {
    const std::unique_ptr<VictimAdapter> lane_adapter = adapter.clone();
    while (true) {
      const std::size_t i = cursor.fetch_add(1);
      if (i >= n) break;
      const DatasetItem& item = data.items[i];
      try {
        const AttackResult result = run_attack(item.image, *lane_adapter, opts.config);
        slots[i] = make_image_record(result, item.image_id, item.file_name,
                                     &item.ground_truth);
        if (opts.save_artifacts) {
          char stem[32];
          std::snprintf(stem, sizeof(stem), "img_%05d", item.image_id);
          save_attack_artifacts(result, opts.config, opts.artifact_dir, stem, item.image_id,
                                item.file_name, &item.ground_truth, lane_adapter->id());
        }
      } catch (const std::exception& e) {
        failures[i] = std::string(e.what());
      }
    }
  };

  if (lanes == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(lanes);
    for (int t = 0; t < lanes; ++t) pool.emplace_back(worker);
    for (std::thread& t : pool) t.join();
  }

  CampaignOutcome out;
  out.report.adapter_id = adapter.id();
  out.report.config = opts.config;
  out.report.num_classes = data.num_classes;
  out.report.category_names = data.category_names;
  for (std::size_t i = 0; i < n; ++i) {
    if (slots[i]) out.report.records.push_back(std::move(*slots[i]));
    if (failures[i]) out.errors.emplace_back(data.items[i].image_id, *failures[i]);
  }
  out.report.aggregates = compute_aggregates(out.report);
  return out;
}

std::vector<AblationRow> run_ablation(const LoadedDataset& data, const VictimAdapter& adapter,
                                      const AttackConfig& base,
                                      const std::vector<std::uint64_t>& seeds, int threads) {
  std::vector<AblationRow> rows;
  for (std::uint64_t seed : seeds) {
    CampaignOptions on;
    on.config = base;
    on.config.seed = seed;
    on.config.attention_enabled = true;
    on.threads = threads;
    CampaignOptions off = on;
    off.config.attention_enabled = false;

    const double map_on = run_campaign(data, adapter, on).report.aggregates.adversarial_map50;
    const double map_off = run_campaign(data, adapter, off).report.aggregates.adversarial_map50;
    AblationRow row;
    row.seed = seed;
    row.map_with_attention = map_on;
    row.map_without_attention = map_off;
    row.improvement_pct = map_off > 0.0 ? (map_off - map_on) / map_off * 100.0 : 0.0;
    rows.push_back(row);
  }
  return rows;
}

std::vector<SweepRow> run_sweep(const LoadedDataset& data, const VictimAdapter& adapter,
                                const AttackConfig& base, const std::vector<double>& alphas,
                                int threads) {
  std::vector<SweepRow> rows;
  for (double alpha : alphas) {
    CampaignOptions opts;
    opts.config = base;
    opts.config.alpha_a = alpha;
    opts.config.attention_enabled = true;
    opts.threads = threads;
    const CampaignOutcome outcome = run_campaign(data, adapter, opts);
    rows.push_back(SweepRow{alpha, outcome.report.aggregates.adversarial_map50});
  }
  return rows;
}

}  // namespace afog
