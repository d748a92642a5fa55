#pragma once
#include <vector>

#include "afog/types.hpp"

namespace afog {

enum class ApInterpolation { Coco101, Voc11, Exact };

struct EvalProtocol {
  std::vector<double> iou_thresholds = {0.5};
  ApInterpolation interpolation = ApInterpolation::Coco101;
  int num_classes = 0;

  static EvalProtocol at50(int num_classes);
  static EvalProtocol coco_ladder(int num_classes);  // 0.50:0.05:0.95

  void validate() const;  // thresholds strictly increasing, each in (0,1)
};

// Per-object success rule: an attack on a benign detection succeeds iff no
// adversarial detection keeps both its label and an IoU >= gamma overlap.
bool attack_success(const Detection& benign_obj, const DetectionSet& adv_set, double gamma);

// Mean over classes (then thresholds) of average precision with greedy
// score-ordered matching. Throws EvaluationError when the ground truth is
// empty across all images.
double mean_average_precision(const std::vector<DetectionSet>& preds,
                              const std::vector<DetectionSet>& gts,
                              const EvalProtocol& protocol);

// Mean local SSIM over channels, 11x11 Gaussian window (sigma 1.5), standard
// stability constants on the [0,1] range.
double ssim(const Image& a, const Image& b);

// L2 (root mean square), L0 (fraction of pixel sites changed after 8-bit
// quantization), L-inf, SSIM and mean absolute difference. wall_time_s is
// left zero; callers stamp it.
MetricBundle distortion_metrics(const Image& x, const Image& x_adv);

}  // namespace afog
