#pragma once
#include <string>
#include <vector>

#include "afog/shapes.hpp"
#include "afog/types.hpp"

namespace afog {

struct DatasetItem {
  int image_id = 0;
  std::string file_name;
  Image image;
  DetectionSet ground_truth;
};

struct LoadedDataset {
  std::vector<DatasetItem> items;
  std::vector<std::string> category_names;  // index == label
  int num_classes = 0;
};

// COCO-subset ingestion: images/annotations/categories, bbox in [x,y,w,h]
// converted to corner form, pixels decoded to [0,1]. Referential problems
// raise IngestionError naming the offending id.
LoadedDataset load_dataset(const std::string& annotation_path, const std::string& image_dir);

// Annotations only, image files untouched; items carry empty pixel buffers.
LoadedDataset load_annotations(const std::string& annotation_path);

// Writes dir/images/img_NNNNN.png plus dir/annotations.json.
void save_shapes_dataset(const ShapesDataset& ds, const std::string& dir);

LoadedDataset to_loaded_dataset(const ShapesDataset& ds);

// One attacked image inside a report.
struct ImageRecord {
  int image_id = 0;
  std::string file_name;
  DetectionSet ground_truth;
  DetectionSet benign;
  DetectionSet adversarial;
  std::vector<bool> per_object_success;
  MetricBundle metrics;  // wall_time_s lives in the timing sidecar
  LossPoint benign_baseline;
  std::vector<LossPoint> loss_trace;
  bool degenerate_fallback = false;
};

struct ReportAggregates {
  // -1 marks "not computable" (no ground truth present).
  double benign_map50 = -1.0;
  double adversarial_map50 = -1.0;
  double mean_l2 = 0.0;
  double mean_l0 = 0.0;
  double mean_linf = 0.0;
  double mean_ssim = 0.0;
  double mean_distortion = 0.0;
  double object_success_rate = 0.0;
  double mean_wall_time_s = 0.0;  // timing sidecar only
};

struct AttackReport {
  std::string schema_version = "afog-report/1";
  std::string adapter_id;
  AttackConfig config;
  int num_classes = 0;
  std::vector<std::string> category_names;
  std::vector<ImageRecord> records;
  ReportAggregates aggregates;
};

// Recompute every aggregate from the records (round-trip check hook).
ReportAggregates compute_aggregates(const AttackReport& report);

// Deterministic content only; wall times go to write_timing_json.
void write_report_json(const AttackReport& report, const std::string& path);
void write_timing_json(const AttackReport& report, const std::string& path);
AttackReport read_report_json(const std::string& path);

struct ArtifactPaths {
  std::string adversarial_png;
  std::string attention_png;
  std::string perturbation_png;
  std::string report_json;
};

// Adversarial image as 8-bit PNG, attention heatmap (linear [0, a_max] to
// grayscale, white = high), composed perturbation shifted/scaled to full
// range, and a one-record report.
ArtifactPaths save_attack_artifacts(const AttackResult& result, const AttackConfig& config,
                                    const std::string& out_dir, const std::string& stem,
                                    int image_id = 0, const std::string& file_name = "",
                                    const DetectionSet* ground_truth = nullptr,
                                    const std::string& adapter_id = "");

ImageRecord make_image_record(const AttackResult& result, int image_id,
                              const std::string& file_name, const DetectionSet* ground_truth);

}  // namespace afog
