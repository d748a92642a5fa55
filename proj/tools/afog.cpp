#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "afog/attack.hpp"
#include "afog/campaign.hpp"
#include "afog/data_io.hpp"
#include "afog/errors.hpp"
#include "afog/metrics.hpp"
#include "afog/plot.hpp"
#include "afog/png_io.hpp"
#include "afog/toy_detector.hpp"
#include "afog/version.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace afog;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitRuntime = 2;

std::string default_out_root() {
  if (const char* env = std::getenv("AFOG_OUT_ROOT")) return env;
  return "afog_out";
}

std::string timestamp_utc() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  char buf[32];
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::unique_ptr<VictimAdapter> load_adapter(const std::string& spec) {
  const std::size_t colon = spec.find(':');
  const std::string kind = colon == std::string::npos ? spec : spec.substr(0, colon);
  if (kind == "toy") {
    if (colon == std::string::npos)
      throw ValidationError("adapter spec 'toy' needs a weights path: toy:<weights.bin>");
    return std::make_unique<ToyDetector>(ToyDetector::load_file(spec.substr(colon + 1)));
  }
  throw ValidationError("unknown adapter '" + kind + "' (available: toy:<weights.bin>)");
}

json config_echo(const AttackConfig& c) {
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

void write_json_file(const std::string& path, const json& doc) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for write: " + path);
  out << doc.dump(2) << "\n";
}

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open: " + path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw IoError(path + ": " + e.what());
  }
}

// Shared attack/campaign flag block. Precedence: explicit flag > config file
// (or manifest) > built-in default. The resolved set is echoed in the manifest.
struct AttackCli {
  std::string mode = "afog";
  double eps = 0.031;
  int iters = 10;
  double alpha_p = 0.031 / 4.0;
  double alpha_a = 0.1;
  double conf_threshold = 0.5;
  double gamma = 0.5;
  std::uint64_t seed = 0;
  bool no_attention = false;
  double a_max = 2.0;
  std::string image, dataset, image_dir, adapter, out, config_file, from_manifest;
  int threads = 0;
  bool no_artifacts = false;
  bool alpha_p_explicit = false;

  void add_config_flags(CLI::App* cmd) {
    cmd->add_option("--mode", mode, "attack mode: afog | vanish | fabricate")
        ->check(CLI::IsMember({"afog", "generic", "vanish", "fabricate"}));
    cmd->add_option("--eps", eps, "L-inf budget on [0,1] intensities (default 0.031)");
    cmd->add_option("--iters", iters, "attack iterations (default 10)");
    cmd->add_option("--alpha-p", alpha_p, "perturbation step size (default eps/4)");
    cmd->add_option("--alpha-a", alpha_a, "attention step size (default 0.1)");
    cmd->add_option("--conf-threshold", conf_threshold, "pseudo-target confidence threshold");
    cmd->add_option("--gamma", gamma, "IoU threshold of the per-object success rule");
    cmd->add_option("--seed", seed, "rng seed");
    cmd->add_flag("--no-attention", no_attention, "disable the attention update (ablation)");
    cmd->add_option("--a-max", a_max, "attention clamp upper bound (default 2.0)");
    cmd->add_option("--config", config_file, "JSON config file (flags override it)");
    cmd->add_option("--threads", threads, "worker lanes for dataset campaigns (0 = auto)");
  }

  void add_io_flags(CLI::App* cmd, bool with_image) {
    if (with_image) cmd->add_option("--image", image, "single image (PNG)");
    cmd->add_option("--dataset", dataset, "COCO-subset annotation JSON");
    cmd->add_option("--image-dir", image_dir, "image directory (default: alongside annotations)");
    cmd->add_option("--adapter", adapter, "victim adapter spec, e.g. toy:weights.bin");
    cmd->add_option("--out", out, "output directory (default $AFOG_OUT_ROOT)");
    if (with_image)
      cmd->add_option("--from-manifest", from_manifest, "re-run from a recorded manifest");
    cmd->add_flag("--no-artifacts", no_artifacts, "skip per-image artifact PNGs");
  }

  // Fold a config layer (config file / manifest) under explicitly set flags.
  void apply_layer(const CLI::App* cmd, const json& layer) {
    auto unset = [&](const char* flag) { return cmd->count(flag) == 0; };
    if (layer.contains("mode") && unset("--mode")) mode = layer["mode"];
    if (layer.contains("epsilon") && unset("--eps")) eps = layer["epsilon"];
    if (layer.contains("iterations") && unset("--iters")) iters = layer["iterations"];
    if (layer.contains("alpha_p") && unset("--alpha-p")) {
      alpha_p = layer["alpha_p"];
      alpha_p_explicit = true;
    }
    if (layer.contains("alpha_a") && unset("--alpha-a")) alpha_a = layer["alpha_a"];
    if (layer.contains("conf_threshold") && unset("--conf-threshold"))
      conf_threshold = layer["conf_threshold"];
    if (layer.contains("gamma") && unset("--gamma")) gamma = layer["gamma"];
    if (layer.contains("seed") && unset("--seed")) seed = layer["seed"];
    if (layer.contains("attention_enabled") && unset("--no-attention"))
      no_attention = !layer["attention_enabled"].get<bool>();
    if (layer.contains("a_max") && unset("--a-max")) a_max = layer["a_max"];
  }

  AttackConfig resolve(const CLI::App* cmd) {
    if (cmd->count("--alpha-p") > 0) alpha_p_explicit = true;
    if (!from_manifest.empty()) {
      const json m = read_json_file(from_manifest);
      if (m.contains("config")) apply_layer(cmd, m.at("config"));
      auto fill = [&](const char* key, std::string& dst, const char* flag) {
        if (m.contains(key) && m.at(key).is_string() && !m.at(key).get<std::string>().empty() &&
            cmd->count(flag) == 0)
          dst = m.at(key).get<std::string>();
      };
      fill("image", image, "--image");
      fill("dataset", dataset, "--dataset");
      fill("image_dir", image_dir, "--image-dir");
      fill("adapter", adapter, "--adapter");
      fill("out_dir", out, "--out");
    }
    if (!config_file.empty()) apply_layer(cmd, read_json_file(config_file));

    AttackConfig cfg;
    cfg.mode = attack_mode_from_string(mode);
    cfg.epsilon = eps;
    cfg.iterations = iters;
    cfg.alpha_p = alpha_p_explicit ? alpha_p : eps / 4.0;
    cfg.alpha_a = alpha_a;
    cfg.conf_threshold = conf_threshold;
    cfg.gamma = gamma;
    cfg.seed = seed;
    cfg.attention_enabled = !no_attention;
    cfg.a_max = a_max;
    cfg.validate();
    return cfg;
  }

  std::string resolve_image_dir() const {
    if (!image_dir.empty()) return image_dir;
    return (fs::path(dataset).parent_path() / "images").string();
  }
};

void write_manifest(const std::string& out_dir, const std::string& command,
                    const AttackConfig& cfg, const AttackCli& cli, const json& extra = {}) {
  json doc{{"schema_version", "afog-manifest/1"},
           {"tool_version", kVersion},
           {"timestamp", timestamp_utc()},
           {"command", command},
           {"adapter", cli.adapter},
           {"image", cli.image},
           {"dataset", cli.dataset},
           {"image_dir", cli.dataset.empty() ? cli.image_dir : cli.resolve_image_dir()},
           {"out_dir", out_dir},
           {"threads", cli.threads},
           {"config", config_echo(cfg)}};
  if (extra.is_object())
    for (auto& [k, v] : extra.items()) doc[k] = v;
  write_json_file((fs::path(out_dir) / "manifest.json").string(), doc);
}

int cmd_attack(const CLI::App* cmd, AttackCli& cli) {
  const AttackConfig cfg = cli.resolve(cmd);
  if (cli.image.empty() == cli.dataset.empty())
    throw ValidationError("exactly one of --image or --dataset is required");
  if (cli.adapter.empty()) throw ValidationError("--adapter is required");
  const std::string out_dir = cli.out.empty() ? default_out_root() : cli.out;
  fs::create_directories(out_dir);

  const std::unique_ptr<VictimAdapter> adapter = load_adapter(cli.adapter);

  AttackReport report;
  std::vector<std::pair<int, std::string>> errors;
  if (!cli.image.empty()) {
    const Image img = validate_image(read_png_image(cli.image));
    const AttackResult result = run_attack(img, *adapter, cfg);
    if (!cli.no_artifacts)
      save_attack_artifacts(result, cfg, out_dir, fs::path(cli.image).stem().string(), 1,
                            fs::path(cli.image).filename().string(), nullptr, adapter->id());
    report.adapter_id = adapter->id();
    report.config = cfg;
    report.num_classes = adapter->num_classes();
    report.records.push_back(
        make_image_record(result, 1, fs::path(cli.image).filename().string(), nullptr));
    report.aggregates = compute_aggregates(report);
  } else {
    const LoadedDataset data = load_dataset(cli.dataset, cli.resolve_image_dir());
    CampaignOptions opts;
    opts.config = cfg;
    opts.threads = cli.threads;
    opts.save_artifacts = !cli.no_artifacts;
    opts.artifact_dir = (fs::path(out_dir) / "artifacts").string();
    CampaignOutcome outcome = run_campaign(data, *adapter, opts);
    report = std::move(outcome.report);
    errors = std::move(outcome.errors);
  }

  write_report_json(report, (fs::path(out_dir) / "report.json").string());
  write_timing_json(report, (fs::path(out_dir) / "timing.json").string());
  write_manifest(out_dir, "attack", cfg, cli);

  std::printf("attacked %zu image(s), mode=%s\n", report.records.size(),
              to_string(cfg.mode).c_str());
  if (report.aggregates.benign_map50 >= 0.0)
    std::printf("mAP@0.5 benign %.4f -> adversarial %.4f\n", report.aggregates.benign_map50,
                report.aggregates.adversarial_map50);
  std::printf("object success rate %.3f, mean Linf %.5f, report at %s\n",
              report.aggregates.object_success_rate, report.aggregates.mean_linf,
              (fs::path(out_dir) / "report.json").string().c_str());
  if (!errors.empty()) {
    std::fprintf(stderr, "%zu image(s) failed:\n", errors.size());
    for (auto& [id, msg] : errors) std::fprintf(stderr, "  image %d: %s\n", id, msg.c_str());
    return kExitRuntime;
  }
  return kExitOk;
}

std::vector<DetectionSet> align_to_gt(const std::map<int, DetectionSet>& by_id,
                                      const LoadedDataset& gt) {
  std::vector<DetectionSet> out;
  out.reserve(gt.items.size());
  for (const DatasetItem& item : gt.items) {
    const auto it = by_id.find(item.image_id);
    if (it == by_id.end())
      throw EvaluationError("no predictions for image id " + std::to_string(item.image_id));
    out.push_back(it->second);
  }
  return out;
}

int cmd_evaluate(const std::string& report_path, const std::string& predictions_path,
                 const std::string& annotations_path, bool ladder,
                 const std::string& interpolation, const std::string& out_path) {
  if (annotations_path.empty()) throw ValidationError("--annotations is required");
  if (report_path.empty() == predictions_path.empty())
    throw ValidationError("exactly one of --report or --predictions is required");

  const LoadedDataset gt = load_annotations(annotations_path);
  EvalProtocol proto =
      ladder ? EvalProtocol::coco_ladder(gt.num_classes) : EvalProtocol::at50(gt.num_classes);
  if (interpolation == "voc11")
    proto.interpolation = ApInterpolation::Voc11;
  else if (interpolation == "exact")
    proto.interpolation = ApInterpolation::Exact;

  std::vector<DetectionSet> gts;
  for (const DatasetItem& item : gt.items) gts.push_back(item.ground_truth);

  json out_doc{{"protocol", ladder ? "iou 0.50:0.05:0.95" : "iou 0.50"},
               {"interpolation", interpolation}};
  if (!report_path.empty()) {
    const AttackReport report = read_report_json(report_path);
    std::map<int, DetectionSet> benign, adversarial;
    for (const ImageRecord& r : report.records) {
      benign[r.image_id] = r.benign;
      adversarial[r.image_id] = r.adversarial;
    }
    const double benign_map = mean_average_precision(align_to_gt(benign, gt), gts, proto);
    const double adv_map = mean_average_precision(align_to_gt(adversarial, gt), gts, proto);
    std::printf("%-10s %10s %12s\n", "model", "benign", to_string(report.config.mode).c_str());
    std::printf("%-10s %10.2f %12.2f\n", report.adapter_id.c_str(), benign_map * 100.0,
                adv_map * 100.0);
    out_doc["model"] = report.adapter_id;
    out_doc["benign_map"] = benign_map;
    out_doc["adversarial_map"] = adv_map;
    out_doc["mode"] = to_string(report.config.mode);
  } else {
    const json preds_doc = read_json_file(predictions_path);
    std::map<int, DetectionSet> preds;
    for (const json& entry : preds_doc) {
      DetectionSet ds;
      ds.num_classes = gt.num_classes;
      for (const json& it : entry.at("detections")) {
        const auto& b = it.at("box");
        ds.items.push_back(Detection{Box{b.at(0), b.at(1), b.at(2), b.at(3)},
                                     it.at("label").get<int>(), it.at("score").get<double>()});
      }
      preds[entry.at("image_id").get<int>()] = std::move(ds);
    }
    const double map = mean_average_precision(align_to_gt(preds, gt), gts, proto);
    std::printf("%-10s %10s\n", "model", "mAP");
    std::printf("%-10s %10.2f\n", "preds", map * 100.0);
    out_doc["map"] = map;
  }
  if (!out_path.empty()) write_json_file(out_path, out_doc);
  return kExitOk;
}

std::vector<std::string> split_csv(const std::string& csv) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : csv) {
    if (c == ',') {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

int cmd_ablate(const CLI::App* cmd, AttackCli& cli, const std::string& seeds_csv) {
  const AttackConfig cfg = cli.resolve(cmd);
  if (cli.dataset.empty() || cli.adapter.empty())
    throw ValidationError("--dataset and --adapter are required");
  const std::string out_dir = cli.out.empty() ? default_out_root() : cli.out;
  fs::create_directories(out_dir);

  std::vector<std::uint64_t> seeds;
  for (const std::string& tok : split_csv(seeds_csv)) seeds.push_back(std::stoull(tok));
  if (seeds.empty()) throw ValidationError("--seeds needs at least one value");

  const std::unique_ptr<VictimAdapter> adapter = load_adapter(cli.adapter);
  const LoadedDataset data = load_dataset(cli.dataset, cli.resolve_image_dir());
  const std::vector<AblationRow> rows = run_ablation(data, *adapter, cfg, seeds, cli.threads);

  // Two campaign rows per seed, identical configs apart from the attention flag.
  std::ofstream campaigns((fs::path(out_dir) / "campaigns.csv").string());
  campaigns << "seed,attention_enabled,adversarial_map50\n";
  std::ofstream improvement((fs::path(out_dir) / "improvement.csv").string());
  improvement << "model,seed,map_with_attention,map_without_attention,improvement_pct\n";
  PlotSeries series;
  double mean_on = 0.0, mean_off = 0.0;
  std::printf("%-6s %18s %18s %14s\n", "seed", "mAP attn on", "mAP attn off", "improvement");
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const AblationRow& r = rows[i];
    campaigns << r.seed << ",true," << r.map_with_attention << "\n";
    campaigns << r.seed << ",false," << r.map_without_attention << "\n";
    improvement << adapter->id() << "," << r.seed << "," << r.map_with_attention << ","
                << r.map_without_attention << "," << r.improvement_pct << "\n";
    series.x.push_back(static_cast<double>(i));
    series.y.push_back(r.improvement_pct);
    mean_on += r.map_with_attention;
    mean_off += r.map_without_attention;
    std::printf("%-6llu %18.4f %18.4f %13.2f%%\n", static_cast<unsigned long long>(r.seed),
                r.map_with_attention, r.map_without_attention, r.improvement_pct);
  }
  mean_on /= static_cast<double>(rows.size());
  mean_off /= static_cast<double>(rows.size());
  const double mean_impr = mean_off > 0.0 ? (mean_off - mean_on) / mean_off * 100.0 : 0.0;
  improvement << adapter->id() << ",mean," << mean_on << "," << mean_off << "," << mean_impr
              << "\n";
  std::printf("%-6s %18.4f %18.4f %13.2f%%\n", "mean", mean_on, mean_off, mean_impr);
  render_line_chart((fs::path(out_dir) / "ablation.png").string(), series, "seed index",
                    "improvement %");
  write_manifest(out_dir, "ablate", cfg, cli, json{{"seeds", seeds}});
  return kExitOk;
}

int cmd_sweep(const CLI::App* cmd, AttackCli& cli, const std::string& alphas_csv) {
  const AttackConfig cfg = cli.resolve(cmd);
  if (cli.dataset.empty() || cli.adapter.empty())
    throw ValidationError("--dataset and --adapter are required");
  const std::string out_dir = cli.out.empty() ? default_out_root() : cli.out;
  fs::create_directories(out_dir);

  std::vector<double> alphas;
  for (const std::string& tok : split_csv(alphas_csv)) alphas.push_back(std::stod(tok));
  if (alphas.empty()) throw ValidationError("--alpha-a-values needs at least one value");
  for (double a : alphas)
    if (a < 0.0) throw ValidationError("attention learning rates must be >= 0");

  const std::unique_ptr<VictimAdapter> adapter = load_adapter(cli.adapter);
  const LoadedDataset data = load_dataset(cli.dataset, cli.resolve_image_dir());
  const std::vector<SweepRow> rows = run_sweep(data, *adapter, cfg, alphas, cli.threads);

  std::ofstream csv((fs::path(out_dir) / "sweep.csv").string());
  csv << "alpha_a,adversarial_map50\n";
  PlotSeries series;
  std::printf("%-10s %18s\n", "alpha_a", "adversarial mAP");
  for (const SweepRow& r : rows) {
    csv << r.alpha_a << "," << r.adversarial_map50 << "\n";
    series.x.push_back(r.alpha_a);
    series.y.push_back(r.adversarial_map50);
    std::printf("%-10.4g %18.4f\n", r.alpha_a, r.adversarial_map50);
  }
  render_line_chart((fs::path(out_dir) / "sweep.png").string(), series, "alpha_a",
                    "adversarial mAP@0.5");
  write_manifest(out_dir, "sweep", cfg, cli, json{{"alpha_a_values", alphas}});
  return kExitOk;
}

int cmd_gen_shapes(std::uint64_t seed, int count, const std::string& out_dir) {
  if (count < 1) throw ValidationError("--count must be >= 1");
  if (out_dir.empty()) throw ValidationError("--out is required");
  save_shapes_dataset(generate_shapes_dataset(seed, count), out_dir);
  std::printf("wrote %d images + annotations.json under %s\n", count, out_dir.c_str());
  return kExitOk;
}

ShapesDataset shapes_from_loaded(const LoadedDataset& loaded) {
  ShapesDataset ds;
  ds.num_classes = loaded.num_classes;
  for (const DatasetItem& item : loaded.items)
    ds.items.push_back(LabeledImage{item.image, item.ground_truth});
  return ds;
}

int cmd_train_toy(const std::string& dataset, const std::string& image_dir, int epochs,
                  int batch_size, double lr, std::uint64_t seed, const std::string& out_path,
                  const std::string& eval_dataset, bool quiet) {
  if (dataset.empty() || out_path.empty())
    throw ValidationError("--dataset and --out are required");
  if (epochs < 0) throw ValidationError("--epochs must be >= 0");
  if (batch_size < 1) throw ValidationError("--batch-size must be >= 1");

  const std::string dir =
      image_dir.empty() ? (fs::path(dataset).parent_path() / "images").string() : image_dir;
  const ShapesDataset train = shapes_from_loaded(load_dataset(dataset, dir));

  TrainOptions opts;
  opts.epochs = epochs;
  opts.batch_size = batch_size;
  opts.learning_rate = lr;
  opts.seed = seed;
  opts.verbose = !quiet;
  const ToyDetector det = train_toy_detector(train, opts);
  det.save_file(out_path);
  std::printf("saved toy detector weights to %s\n", out_path.c_str());

  if (!eval_dataset.empty()) {
    const std::string eval_dir = (fs::path(eval_dataset).parent_path() / "images").string();
    const ShapesDataset eval_ds = shapes_from_loaded(load_dataset(eval_dataset, eval_dir));
    std::printf("held-out mAP@0.5 = %.4f\n", evaluate_map50(det, eval_ds));
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"attention-focused adversarial perturbations for object detectors"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  AttackCli attack_cli;
  CLI::App* attack = app.add_subcommand("attack", "run an attack on an image or a dataset");
  attack_cli.add_config_flags(attack);
  attack_cli.add_io_flags(attack, true);

  std::string eval_report, eval_preds, eval_annotations, eval_interp = "coco101", eval_out;
  bool eval_ladder = false;
  CLI::App* evaluate = app.add_subcommand("evaluate", "benign vs adversarial mAP table");
  evaluate->add_option("--report", eval_report, "attack report JSON");
  evaluate->add_option("--predictions", eval_preds, "standalone predictions JSON");
  evaluate->add_option("--annotations", eval_annotations, "ground-truth annotation JSON");
  evaluate->add_flag("--iou-ladder", eval_ladder, "average over IoU 0.50:0.05:0.95");
  evaluate->add_option("--interpolation", eval_interp, "coco101 | voc11 | exact")
      ->check(CLI::IsMember({"coco101", "voc11", "exact"}));
  evaluate->add_option("--out", eval_out, "write evaluation JSON here");

  AttackCli ablate_cli;
  std::string ablate_seeds = "0,1,2";
  CLI::App* ablate = app.add_subcommand("ablate", "paired attention on/off campaigns");
  ablate_cli.add_config_flags(ablate);
  ablate_cli.add_io_flags(ablate, false);
  ablate->add_option("--seeds", ablate_seeds, "comma-separated seed list");

  AttackCli sweep_cli;
  std::string sweep_alphas = "0,0.01,0.05,0.1,0.5";
  CLI::App* sweep = app.add_subcommand("sweep", "attention learning-rate sweep");
  sweep_cli.add_config_flags(sweep);
  sweep_cli.add_io_flags(sweep, false);
  sweep->add_option("--alpha-a-values", sweep_alphas, "comma-separated alpha_a list");

  std::uint64_t gen_seed = 0;
  int gen_count = 100;
  std::string gen_out;
  CLI::App* gen = app.add_subcommand("gen-shapes", "generate the synthetic shapes dataset");
  gen->add_option("--seed", gen_seed, "generation seed");
  gen->add_option("--count", gen_count, "number of images");
  gen->add_option("--out", gen_out, "output directory");

  std::string train_dataset, train_image_dir, train_out, train_eval;
  int train_epochs = 8, train_batch = 8;
  double train_lr = 1e-3;
  std::uint64_t train_seed = 0;
  bool train_quiet = false;
  CLI::App* train = app.add_subcommand("train-toy", "train the reference toy detector");
  train->add_option("--dataset", train_dataset, "training annotation JSON");
  train->add_option("--image-dir", train_image_dir, "image directory");
  train->add_option("--epochs", train_epochs, "training epochs");
  train->add_option("--batch-size", train_batch, "mini-batch size");
  train->add_option("--lr", train_lr, "Adam learning rate");
  train->add_option("--seed", train_seed, "init + shuffle seed");
  train->add_option("--out", train_out, "weights blob output path");
  train->add_option("--eval-dataset", train_eval, "held-out annotation JSON for mAP report");
  train->add_flag("--quiet", train_quiet, "suppress per-epoch loss lines");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (attack->parsed()) return cmd_attack(attack, attack_cli);
    if (evaluate->parsed())
      return cmd_evaluate(eval_report, eval_preds, eval_annotations, eval_ladder, eval_interp,
                          eval_out);
    if (ablate->parsed()) return cmd_ablate(ablate, ablate_cli, ablate_seeds);
    if (sweep->parsed()) return cmd_sweep(sweep, sweep_cli, sweep_alphas);
    if (gen->parsed()) return cmd_gen_shapes(gen_seed, gen_count, gen_out);
    if (train->parsed())
      return cmd_train_toy(train_dataset, train_image_dir, train_epochs, train_batch, train_lr,
                           train_seed, train_out, train_eval, train_quiet);
  } catch (const ValidationError& e) {
    std::fprintf(stderr, "usage error: %s\n", e.what());
    return kExitUsage;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitRuntime;
  }
  return kExitUsage;
}
