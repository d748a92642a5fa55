#pragma once
#include <cstdint>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "afog/set_criterion.hpp"
#include "afog/shapes.hpp"
#include "afog/victim.hpp"

namespace afog {

// Miniature differentiable set-prediction detector: three strided conv stages,
// a learned positional embedding, one head of query cross-attention over the
// feature grid, and a shared MLP emitting class logits plus a sigmoid box per
// query. Forward and backward passes are written out by hand so input
// gradients are exact and checkable against finite differences.
struct ToyDetectorConfig {
  int input_height = 128;
  int input_width = 128;
  int num_classes = 3;
  int num_queries = 16;
  int c1 = 16;
  int c2 = 24;
  int c3 = 40;  // feature dim fed to the queries
  int hidden = 64;
};

class ToyDetector final : public VictimAdapter {
 public:
  ToyDetector(const ToyDetectorConfig& cfg, std::uint64_t init_seed);

  std::string id() const override { return "toy"; }
  int num_classes() const override { return cfg_.num_classes; }
  SpatialConstraints input_constraints() const override;
  DetectionSet detect(const Image& img, double conf_threshold) const override;
  LossAndGradient loss_and_gradient(const Image& img, const LossSpec& spec) const override;
  std::uint64_t parameter_checksum() const override;
  std::unique_ptr<VictimAdapter> clone() const override;

  const ToyDetectorConfig& config() const { return cfg_; }
  QueryOutputs raw_outputs(const Image& img) const;

  // Detection loss and gradient w.r.t. all parameters; grad is accumulated
  // into param_grad (sized like parameters()). Used by training only.
  DetectionLoss loss_and_param_grad(const Image& img, const std::vector<BoxTarget>& targets,
                                    std::vector<double>& param_grad) const;

  std::vector<double>& parameters() { return params_; }
  const std::vector<double>& parameters() const { return params_; }
  CriterionWeights criterion_weights;

  void save(std::ostream& out) const;
  static ToyDetector load(std::istream& in);
  void save_file(const std::string& path) const;
  static ToyDetector load_file(const std::string& path);

 private:
  struct Layout;  // parameter offsets
  struct Activations;

  void forward(const Image& img, Activations& acts) const;
  // Backward from criterion gradients; fills input_grad when non-null and
  // accumulates parameter gradients when param_grad is non-null.
  void backward(const Image& img, const Activations& acts, const std::vector<double>& d_logits,
                const std::vector<double>& d_boxes, Image* input_grad,
                std::vector<double>* param_grad) const;
  const Layout& layout() const;

  ToyDetectorConfig cfg_;
  std::shared_ptr<const Layout> layout_;  // derived from cfg_, shared across copies
  std::vector<double> params_;
};

std::vector<BoxTarget> to_box_targets(const DetectionSet& ds, int img_h, int img_w);

struct TrainOptions {
  int epochs = 8;
  int batch_size = 8;
  double learning_rate = 1e-3;
  double lr_drop_factor = 0.1;  // applied once at lr_drop_epoch
  int lr_drop_epoch = -1;       // -1 places the drop at 80% of the schedule
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  std::uint64_t seed = 0;
  ToyDetectorConfig detector;
  bool verbose = false;
};

// Adam over shuffled mini-batches; deterministic for a fixed seed. Throws
// NumericalError on divergence (non-finite loss).
ToyDetector train_toy_detector(const ShapesDataset& data, const TrainOptions& opts);

// mAP@0.5 of the detector over a labeled set, detections taken at a low
// score threshold so the precision-recall sweep sees the full ranking.
double evaluate_map50(const VictimAdapter& adapter, const ShapesDataset& data,
                      double detect_threshold = 0.05);

}  // namespace afog
