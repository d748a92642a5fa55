#include "afog/data_io.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>

#include <json.hpp>

#include "afog/errors.hpp"
#include "afog/metrics.hpp"
#include "afog/png_io.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace afog {

namespace {

json detection_set_to_json(const DetectionSet& ds) {
  json items = json::array();
  for (const Detection& d : ds.items)
    items.push_back(json{{"box", {d.box.x1, d.box.y1, d.box.x2, d.box.y2}},
                         {"label", d.label},
                         {"score", d.score}});
  return json{{"num_classes", ds.num_classes}, {"items", items}};
}

DetectionSet detection_set_from_json(const json& j) {
  DetectionSet ds;
  ds.num_classes = j.at("num_classes").get<int>();
  for (const json& it : j.at("items")) {
    const auto& b = it.at("box");
    ds.items.push_back(Detection{Box{b.at(0), b.at(1), b.at(2), b.at(3)},
                                 it.at("label").get<int>(), it.at("score").get<double>()});
  }
  return ds;
}

json config_to_json(const AttackConfig& c) {
  return json{{"epsilon", c.epsilon},
              {"alpha_p", c.alpha_p},
              {"alpha_a", c.alpha_a},
              {"iterations", c.iterations},
              {"mode", to_string(c.mode)},
              {"conf_threshold", c.conf_threshold},
              {"gamma", c.gamma},
              {"seed", c.seed},
              {"attention_enabled", c.attention_enabled},
              {"a_max", c.a_max}};
}

AttackConfig config_from_json(const json& j) {
  AttackConfig c;
  c.epsilon = j.at("epsilon");
  c.alpha_p = j.at("alpha_p");
  c.alpha_a = j.at("alpha_a");
  c.iterations = j.at("iterations");
  c.mode = attack_mode_from_string(j.at("mode"));
  c.conf_threshold = j.at("conf_threshold");
  c.gamma = j.at("gamma");
  c.seed = j.at("seed");
  c.attention_enabled = j.at("attention_enabled");
  c.a_max = j.at("a_max");
  return c;
}

json metrics_to_json(const MetricBundle& m) {
  return json{{"l2", m.l2},
              {"l0", m.l0},
              {"linf", m.linf},
              {"ssim", m.ssim},
              {"mean_distortion", m.mean_distortion}};
}

MetricBundle metrics_from_json(const json& j) {
  MetricBundle m;
  m.l2 = j.at("l2");
  m.l0 = j.at("l0");
  m.linf = j.at("linf");
  m.ssim = j.at("ssim");
  m.mean_distortion = j.at("mean_distortion");
  return m;
}

json loss_point_to_json(const LossPoint& p) { return json{p.total, p.bbox, p.cls}; }

LossPoint loss_point_from_json(const json& j) { return LossPoint{j.at(0), j.at(1), j.at(2)}; }

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for write: " + path);
  out << text;
  if (!out) throw IoError("write failed: " + path);
}

}  // namespace

namespace {

struct ImageMeta {
  std::string file_name;
  int width = 0, height = 0;
};

LoadedDataset parse_annotations(const std::string& annotation_path,
                                std::map<int, ImageMeta>* metas_out) {
  std::ifstream in(annotation_path);
  if (!in) throw IngestionError("cannot open annotation file: " + annotation_path);
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw IngestionError("malformed annotation JSON: " + std::string(e.what()));
  }

  try {
    std::map<int, ImageMeta> images;  // ordered by id, deterministic iteration
    for (const json& im : doc.at("images")) {
      const int id = im.at("id");
      if (!images.emplace(id, ImageMeta{im.at("file_name"), im.at("width"), im.at("height")})
               .second)
        throw IngestionError("duplicate image id " + std::to_string(id));
    }

    // Labels follow ascending category id.
    std::map<int, std::string> categories;
    for (const json& cat : doc.at("categories")) {
      const int id = cat.at("id");
      if (!categories.emplace(id, cat.at("name").get<std::string>()).second)
        throw IngestionError("duplicate category id " + std::to_string(id));
    }
    LoadedDataset ds;
    std::map<int, int> category_to_label;
    for (auto& [id, cat_name] : categories) {
      category_to_label[id] = static_cast<int>(ds.category_names.size());
      ds.category_names.push_back(cat_name);
    }
    ds.num_classes = static_cast<int>(ds.category_names.size());

    std::map<int, DetectionSet> gt;
    for (auto& [id, meta] : images) gt[id].num_classes = ds.num_classes;
    for (const json& ann : doc.at("annotations")) {
      const int image_id = ann.at("image_id");
      if (!images.count(image_id))
        throw IngestionError("annotation references missing image id " +
                             std::to_string(image_id));
      const int cat = ann.at("category_id");
      if (!category_to_label.count(cat))
        throw IngestionError("annotation references missing category id " + std::to_string(cat));
      const auto& b = ann.at("bbox");
      const double x = b.at(0), y = b.at(1), w = b.at(2), h = b.at(3);
      if (!(w > 0.0 && h > 0.0))
        throw IngestionError("annotation for image " + std::to_string(image_id) +
                             " has non-positive bbox size");
      gt[image_id].items.push_back(
          Detection{Box{x, y, x + w, y + h}, category_to_label[cat], 1.0});
    }

    for (auto& [id, meta] : images) {
      DatasetItem item;
      item.image_id = id;
      item.file_name = meta.file_name;
      item.ground_truth = std::move(gt[id]);
      ds.items.push_back(std::move(item));
    }
    if (metas_out) *metas_out = std::move(images);
    return ds;
  } catch (const json::exception& e) {
    throw IngestionError("annotation JSON structure: " + std::string(e.what()));
  }
}

}  // namespace

LoadedDataset load_annotations(const std::string& annotation_path) {
  return parse_annotations(annotation_path, nullptr);
}

LoadedDataset load_dataset(const std::string& annotation_path, const std::string& image_dir) {
  std::map<int, ImageMeta> metas;
  LoadedDataset ds = parse_annotations(annotation_path, &metas);
  for (DatasetItem& item : ds.items) {
    const ImageMeta& meta = metas.at(item.image_id);
    const fs::path img_path = fs::path(image_dir) / meta.file_name;
    try {
      item.image = read_png_image(img_path.string());
    } catch (const IoError& e) {
      throw IngestionError("image id " + std::to_string(item.image_id) + ": " + e.what());
    }
    if (item.image.width != meta.width || item.image.height != meta.height)
      throw IngestionError("image id " + std::to_string(item.image_id) +
                           ": decoded size disagrees with annotation");
  }
  return ds;
}

void save_shapes_dataset(const ShapesDataset& ds, const std::string& dir) {
  const fs::path root(dir);
  fs::create_directories(root / "images");

  json images = json::array();
  json annotations = json::array();
  int ann_id = 1;
  char name[32];
  for (std::size_t i = 0; i < ds.items.size(); ++i) {
    const int image_id = static_cast<int>(i) + 1;
    std::snprintf(name, sizeof(name), "img_%05d.png", image_id);
    const Image& img = ds.items[i].image;
    write_png_image((root / "images" / name).string(), img);
    images.push_back(json{{"id", image_id},
                          {"file_name", name},
                          {"width", img.width},
                          {"height", img.height}});
    for (const Detection& d : ds.items[i].ground_truth.items) {
      annotations.push_back(json{
          {"id", ann_id++},
          {"image_id", image_id},
          {"category_id", d.label + 1},
          {"bbox", {d.box.x1, d.box.y1, d.box.width(), d.box.height()}}});
    }
  }
  json categories = json::array();
  for (int c = 0; c < ds.num_classes; ++c)
    categories.push_back(json{{"id", c + 1}, {"name", kShapeClassNames[c]}});

  const json doc{{"images", images}, {"annotations", annotations}, {"categories", categories}};
  write_text_file((root / "annotations.json").string(), doc.dump(2) + "\n");
}

LoadedDataset to_loaded_dataset(const ShapesDataset& ds) {
  LoadedDataset out;
  out.num_classes = ds.num_classes;
  for (int c = 0; c < ds.num_classes; ++c) out.category_names.push_back(kShapeClassNames[c]);
  char name[32];
  for (std::size_t i = 0; i < ds.items.size(); ++i) {
    std::snprintf(name, sizeof(name), "img_%05d.png", static_cast<int>(i) + 1);
    out.items.push_back(DatasetItem{static_cast<int>(i) + 1, name, ds.items[i].image,
                                    ds.items[i].ground_truth});
  }
  return out;
}

ImageRecord make_image_record(const AttackResult& result, int image_id,
                              const std::string& file_name, const DetectionSet* ground_truth) {
  ImageRecord rec;
  rec.image_id = image_id;
  rec.file_name = file_name;
  if (ground_truth) rec.ground_truth = *ground_truth;
  rec.ground_truth.num_classes = result.benign_detections.num_classes;
  rec.benign = result.benign_detections;
  rec.adversarial = result.adversarial_detections;
  rec.per_object_success = result.per_object_success;
  rec.metrics = result.metrics;
  rec.benign_baseline = result.benign_baseline;
  rec.loss_trace = result.loss_trace;
  rec.degenerate_fallback = result.degenerate_fallback;
  return rec;
}

ReportAggregates compute_aggregates(const AttackReport& report) {
  ReportAggregates agg;
  const std::size_t n = report.records.size();
  if (n == 0) return agg;

  bool any_gt = false;
  std::vector<DetectionSet> gts, benign, adversarial;
  long successes = 0, objects = 0;
  for (const ImageRecord& r : report.records) {
    gts.push_back(r.ground_truth);
    benign.push_back(r.benign);
    adversarial.push_back(r.adversarial);
    if (!r.ground_truth.empty()) any_gt = true;
    agg.mean_l2 += r.metrics.l2;
    agg.mean_l0 += r.metrics.l0;
    agg.mean_linf += r.metrics.linf;
    agg.mean_ssim += r.metrics.ssim;
    agg.mean_distortion += r.metrics.mean_distortion;
    agg.mean_wall_time_s += r.metrics.wall_time_s;
    objects += static_cast<long>(r.per_object_success.size());
    for (bool s : r.per_object_success) successes += s ? 1 : 0;
  }
  agg.mean_l2 /= n;
  agg.mean_l0 /= n;
  agg.mean_linf /= n;
  agg.mean_ssim /= n;
  agg.mean_distortion /= n;
  agg.mean_wall_time_s /= n;
  agg.object_success_rate =
      objects > 0 ? static_cast<double>(successes) / static_cast<double>(objects) : 0.0;

  if (any_gt && report.num_classes > 0) {
    const EvalProtocol proto = EvalProtocol::at50(report.num_classes);
    agg.benign_map50 = mean_average_precision(benign, gts, proto);
    agg.adversarial_map50 = mean_average_precision(adversarial, gts, proto);
  }
  return agg;
}

namespace {

json record_to_json(const ImageRecord& r) {
  json trace = json::array();
  for (const LossPoint& p : r.loss_trace) trace.push_back(loss_point_to_json(p));
  json success = json::array();
  for (bool s : r.per_object_success) success.push_back(s);
  return json{{"image_id", r.image_id},
              {"file_name", r.file_name},
              {"ground_truth", detection_set_to_json(r.ground_truth)},
              {"benign", detection_set_to_json(r.benign)},
              {"adversarial", detection_set_to_json(r.adversarial)},
              {"per_object_success", success},
              {"metrics", metrics_to_json(r.metrics)},
              {"benign_baseline", loss_point_to_json(r.benign_baseline)},
              {"loss_trace", trace},
              {"degenerate_fallback", r.degenerate_fallback}};
}

ImageRecord record_from_json(const json& j) {
  ImageRecord r;
  r.image_id = j.at("image_id");
  r.file_name = j.at("file_name");
  r.ground_truth = detection_set_from_json(j.at("ground_truth"));
  r.benign = detection_set_from_json(j.at("benign"));
  r.adversarial = detection_set_from_json(j.at("adversarial"));
  for (const json& s : j.at("per_object_success")) r.per_object_success.push_back(s.get<bool>());
  r.metrics = metrics_from_json(j.at("metrics"));
  r.benign_baseline = loss_point_from_json(j.at("benign_baseline"));
  for (const json& p : j.at("loss_trace")) r.loss_trace.push_back(loss_point_from_json(p));
  r.degenerate_fallback = j.at("degenerate_fallback");
  return r;
}

json aggregates_to_json(const ReportAggregates& a) {
  return json{{"benign_map50", a.benign_map50},
              {"adversarial_map50", a.adversarial_map50},
              {"mean_l2", a.mean_l2},
              {"mean_l0", a.mean_l0},
              {"mean_linf", a.mean_linf},
              {"mean_ssim", a.mean_ssim},
              {"mean_distortion", a.mean_distortion},
              {"object_success_rate", a.object_success_rate}};
}

ReportAggregates aggregates_from_json(const json& j) {
  ReportAggregates a;
  a.benign_map50 = j.at("benign_map50");
  a.adversarial_map50 = j.at("adversarial_map50");
  a.mean_l2 = j.at("mean_l2");
  a.mean_l0 = j.at("mean_l0");
  a.mean_linf = j.at("mean_linf");
  a.mean_ssim = j.at("mean_ssim");
  a.mean_distortion = j.at("mean_distortion");
  a.object_success_rate = j.at("object_success_rate");
  return a;
}

}  // namespace

void write_report_json(const AttackReport& report, const std::string& path) {
  json records = json::array();
  for (const ImageRecord& r : report.records) records.push_back(record_to_json(r));
  const json doc{{"schema_version", report.schema_version},
                 {"adapter_id", report.adapter_id},
                 {"config", config_to_json(report.config)},
                 {"num_classes", report.num_classes},
                 {"category_names", report.category_names},
                 {"records", records},
                 {"aggregates", aggregates_to_json(report.aggregates)}};
  write_text_file(path, doc.dump(2) + "\n");
}

void write_timing_json(const AttackReport& report, const std::string& path) {
  json per_image = json::array();
  for (const ImageRecord& r : report.records)
    per_image.push_back(json{{"image_id", r.image_id}, {"wall_time_s", r.metrics.wall_time_s}});
  const json doc{{"schema_version", "afog-timing/1"},
                 {"per_image", per_image},
                 {"mean_wall_time_s", report.aggregates.mean_wall_time_s}};
  write_text_file(path, doc.dump(2) + "\n");
}

AttackReport read_report_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open: " + path);
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw IoError("malformed report JSON: " + std::string(e.what()));
  }
  AttackReport rep;
  rep.schema_version = doc.at("schema_version");
  rep.adapter_id = doc.at("adapter_id");
  rep.config = config_from_json(doc.at("config"));
  rep.num_classes = doc.at("num_classes");
  rep.category_names = doc.at("category_names").get<std::vector<std::string>>();
  for (const json& r : doc.at("records")) rep.records.push_back(record_from_json(r));
  rep.aggregates = aggregates_from_json(doc.at("aggregates"));
  return rep;
}

ArtifactPaths save_attack_artifacts(const AttackResult& result, const AttackConfig& config,
                                    const std::string& out_dir, const std::string& stem,
                                    int image_id, const std::string& file_name,
                                    const DetectionSet* ground_truth,
                                    const std::string& adapter_id) {
  const fs::path root(out_dir);
  std::error_code ec;
  fs::create_directories(root, ec);
  if (ec) throw IoError("cannot create output dir " + out_dir + ": " + ec.message());

  ArtifactPaths paths;
  paths.adversarial_png = (root / (stem + "_adversarial.png")).string();
  paths.attention_png = (root / (stem + "_attention.png")).string();
  paths.perturbation_png = (root / (stem + "_perturbation.png")).string();
  paths.report_json = (root / (stem + "_report.json")).string();

  write_png_image(paths.adversarial_png, result.adversarial_image);

  const AttentionMap& att = result.attention;
  std::vector<double> gray(att.weights.size());
  for (std::size_t i = 0; i < gray.size(); ++i) gray[i] = att.weights[i] / config.a_max;
  const std::vector<std::uint8_t> gray8 = quantize8(gray);
  write_png(paths.attention_png, gray8.data(), att.height, att.width, 1);

  const PerturbationMap& pert = result.perturbation;
  std::vector<double> composed(pert.values.size());
  double peak = 0.0;
  for (int y = 0; y < pert.height; ++y)
    for (int x = 0; x < pert.width; ++x)
      for (int c = 0; c < pert.channels; ++c) {
        const double v = att.at(y, x) * pert.at(y, x, c);
        composed[(static_cast<std::size_t>(y) * pert.width + x) * pert.channels + c] = v;
        peak = std::max(peak, std::abs(v));
      }
  for (double& v : composed) v = peak > 0.0 ? 0.5 + v / (2.0 * peak) : 0.5;
  const std::vector<std::uint8_t> pert8 = quantize8(composed);
  write_png(paths.perturbation_png, pert8.data(), pert.height, pert.width, pert.channels);

  AttackReport rep;
  rep.adapter_id = adapter_id;
  rep.config = config;
  rep.num_classes = result.benign_detections.num_classes;
  rep.records.push_back(make_image_record(result, image_id, file_name, ground_truth));
  rep.aggregates = compute_aggregates(rep);
  write_report_json(rep, paths.report_json);
  return paths;
}

}  // namespace afog
