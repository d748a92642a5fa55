#include "afog/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "afog/errors.hpp"

namespace afog {

EvalProtocol EvalProtocol::at50(int num_classes) {
  EvalProtocol p;
  p.iou_thresholds = {0.5};
  p.num_classes = num_classes;
  return p;
}

EvalProtocol EvalProtocol::coco_ladder(int num_classes) {
  EvalProtocol p;
  p.iou_thresholds.clear();
  for (int i = 0; i < 10; ++i) p.iou_thresholds.push_back(0.5 + 0.05 * i);
  p.num_classes = num_classes;
  return p;
}

void EvalProtocol::validate() const {
  if (iou_thresholds.empty()) throw ValidationError("protocol needs at least one IoU threshold");
  double prev = 0.0;
  for (double t : iou_thresholds) {
    if (!(t > 0.0 && t < 1.0)) throw ValidationError("IoU threshold must be in (0,1)");
    if (t <= prev && prev != 0.0) throw ValidationError("IoU thresholds must strictly increase");
    prev = t;
  }
  if (num_classes < 1) throw ValidationError("protocol needs num_classes >= 1");
}

bool attack_success(const Detection& benign_obj, const DetectionSet& adv_set, double gamma) {
  for (const Detection& d : adv_set.items)
    if (d.label == benign_obj.label && iou(benign_obj.box, d.box) >= gamma) return false;
  return true;
}

namespace {

struct RankedPred {
  double score;
  int image;
  int index;  // insertion order within its image, tie-break
  Box box;
};

// AP for one class at one IoU threshold. Greedy score-ordered matching:
// each prediction takes the still-unmatched ground truth with the highest
// IoU if that IoU reaches the threshold.
double average_precision(std::vector<RankedPred> preds,
                         const std::vector<std::vector<Box>>& gt_per_image, int total_gt,
                         double thr, ApInterpolation interp) {
  if (total_gt == 0) return 0.0;
  std::sort(preds.begin(), preds.end(), [](const RankedPred& a, const RankedPred& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.image != b.image) return a.image < b.image;
    return a.index < b.index;
  });

  std::vector<std::vector<char>> taken(gt_per_image.size());
  for (std::size_t i = 0; i < gt_per_image.size(); ++i)
    taken[i].assign(gt_per_image[i].size(), 0);

  std::vector<double> precision, recall;
  int tp = 0, fp = 0;
  for (const RankedPred& p : preds) {
    const std::vector<Box>& gts = gt_per_image[p.image];
    int best = -1;
    double best_iou = 0.0;
    for (std::size_t g = 0; g < gts.size(); ++g) {
      if (taken[p.image][g]) continue;
      const double v = iou(p.box, gts[g]);
      if (v >= thr && v > best_iou) {
        best_iou = v;
        best = static_cast<int>(g);
      }
    }
    if (best >= 0) {
      taken[p.image][best] = 1;
      ++tp;
    } else {
      ++fp;
    }
    precision.push_back(static_cast<double>(tp) / (tp + fp));
    recall.push_back(static_cast<double>(tp) / total_gt);
  }

  // Monotone precision envelope from the right.
  std::vector<double> env(precision);
  for (int i = static_cast<int>(env.size()) - 2; i >= 0; --i)
    env[i] = std::max(env[i], env[i + 1]);

  auto precision_at = [&](double r) -> double {
    for (std::size_t i = 0; i < recall.size(); ++i)
      if (recall[i] >= r) return env[i];
    return 0.0;
  };

  switch (interp) {
    case ApInterpolation::Coco101: {
      double acc = 0.0;
      for (int i = 0; i <= 100; ++i) acc += precision_at(i / 100.0);
      return acc / 101.0;
    }
    case ApInterpolation::Voc11: {
      double acc = 0.0;
      for (int i = 0; i <= 10; ++i) acc += precision_at(i / 10.0);
      return acc / 11.0;
    }
    case ApInterpolation::Exact: {
      double acc = 0.0, prev_r = 0.0;
      for (std::size_t i = 0; i < recall.size(); ++i) {
        if (recall[i] > prev_r) {
          acc += (recall[i] - prev_r) * env[i];
          prev_r = recall[i];
        }
      }
      return acc;
    }
  }
  return 0.0;
}

}  // namespace

double mean_average_precision(const std::vector<DetectionSet>& preds,
                              const std::vector<DetectionSet>& gts,
                              const EvalProtocol& protocol) {
  protocol.validate();
  if (preds.size() != gts.size())
    throw EvaluationError("prediction and ground-truth image counts differ");

  int total_gt = 0;
  for (const DetectionSet& g : gts) {
    for (const Detection& d : g.items)
      if (d.label < 0 || d.label >= protocol.num_classes)
        throw EvaluationError("ground-truth label out of range");
    total_gt += static_cast<int>(g.size());
  }
  if (total_gt == 0) throw EvaluationError("no ground-truth objects; mAP undefined");
  for (const DetectionSet& p : preds)
    for (const Detection& d : p.items)
      if (d.label < 0 || d.label >= protocol.num_classes)
        throw EvaluationError("prediction label out of range");

  double threshold_acc = 0.0;
  for (double thr : protocol.iou_thresholds) {
    double class_acc = 0.0;
    int classes_seen = 0;
    for (int cls = 0; cls < protocol.num_classes; ++cls) {
      std::vector<std::vector<Box>> gt_per_image(gts.size());
      int class_gt = 0;
      for (std::size_t i = 0; i < gts.size(); ++i)
        for (const Detection& d : gts[i].items)
          if (d.label == cls) {
            gt_per_image[i].push_back(d.box);
            ++class_gt;
          }
      if (class_gt == 0) continue;  // class absent from the ground truth
      ++classes_seen;

      std::vector<RankedPred> ranked;
      for (std::size_t i = 0; i < preds.size(); ++i) {
        int order = 0;
        for (const Detection& d : preds[i].items)
          if (d.label == cls)
            ranked.push_back(RankedPred{d.score, static_cast<int>(i), order++, d.box});
      }
      class_acc +=
          average_precision(std::move(ranked), gt_per_image, class_gt, thr,
                            protocol.interpolation);
    }
    threshold_acc += class_acc / classes_seen;
  }
  return threshold_acc / static_cast<double>(protocol.iou_thresholds.size());
}

namespace {

constexpr int kSsimWindow = 11;
constexpr double kSsimSigma = 1.5;
constexpr double kSsimC1 = 0.01 * 0.01;
constexpr double kSsimC2 = 0.03 * 0.03;

// Separable Gaussian filtering of one channel, valid region only.
std::vector<double> gaussian_valid(const std::vector<double>& in, int h, int w,
                                   const std::vector<double>& kernel) {
  const int k = static_cast<int>(kernel.size());
  const int ow = w - k + 1;
  const int oh = h - k + 1;
  std::vector<double> tmp(static_cast<std::size_t>(h) * ow);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < ow; ++x) {
      double acc = 0.0;
      for (int i = 0; i < k; ++i) acc += kernel[i] * in[static_cast<std::size_t>(y) * w + x + i];
      tmp[static_cast<std::size_t>(y) * ow + x] = acc;
    }
  std::vector<double> out(static_cast<std::size_t>(oh) * ow);
  for (int y = 0; y < oh; ++y)
    for (int x = 0; x < ow; ++x) {
      double acc = 0.0;
      for (int i = 0; i < k; ++i)
        acc += kernel[i] * tmp[static_cast<std::size_t>(y + i) * ow + x];
      out[static_cast<std::size_t>(y) * ow + x] = acc;
    }
  return out;
}

double ssim_channel(const std::vector<double>& a, const std::vector<double>& b, int h, int w) {
  if (h < kSsimWindow || w < kSsimWindow) {
    // Degenerate size: single uniform window over the whole channel.
    const double n = static_cast<double>(h) * w;
    double ma = 0.0, mb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
      ma += a[i];
      mb += b[i];
    }
    ma /= n;
    mb /= n;
    double va = 0.0, vb = 0.0, cab = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
      va += (a[i] - ma) * (a[i] - ma);
      vb += (b[i] - mb) * (b[i] - mb);
      cab += (a[i] - ma) * (b[i] - mb);
    }
    va /= n;
    vb /= n;
    cab /= n;
    return ((2.0 * ma * mb + kSsimC1) * (2.0 * cab + kSsimC2)) /
           ((ma * ma + mb * mb + kSsimC1) * (va + vb + kSsimC2));
  }

  std::vector<double> kernel(kSsimWindow);
  const int half = kSsimWindow / 2;
  double ksum = 0.0;
  for (int i = 0; i < kSsimWindow; ++i) {
    kernel[i] = std::exp(-0.5 * (i - half) * (i - half) / (kSsimSigma * kSsimSigma));
    ksum += kernel[i];
  }
  for (double& v : kernel) v /= ksum;

  std::vector<double> aa(a.size()), bb(b.size()), ab(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    aa[i] = a[i] * a[i];
    bb[i] = b[i] * b[i];
    ab[i] = a[i] * b[i];
  }
  const std::vector<double> mu_a = gaussian_valid(a, h, w, kernel);
  const std::vector<double> mu_b = gaussian_valid(b, h, w, kernel);
  const std::vector<double> m_aa = gaussian_valid(aa, h, w, kernel);
  const std::vector<double> m_bb = gaussian_valid(bb, h, w, kernel);
  const std::vector<double> m_ab = gaussian_valid(ab, h, w, kernel);

  double acc = 0.0;
  for (std::size_t i = 0; i < mu_a.size(); ++i) {
    const double va = m_aa[i] - mu_a[i] * mu_a[i];
    const double vb = m_bb[i] - mu_b[i] * mu_b[i];
    const double cab = m_ab[i] - mu_a[i] * mu_b[i];
    acc += ((2.0 * mu_a[i] * mu_b[i] + kSsimC1) * (2.0 * cab + kSsimC2)) /
           ((mu_a[i] * mu_a[i] + mu_b[i] * mu_b[i] + kSsimC1) * (va + vb + kSsimC2));
  }
  return acc / static_cast<double>(mu_a.size());
}

}  // namespace

double ssim(const Image& a, const Image& b) {
  if (!a.same_shape(b)) throw ValidationError("ssim: image shapes differ");
  double acc = 0.0;
  std::vector<double> ca(static_cast<std::size_t>(a.height) * a.width);
  std::vector<double> cb(ca.size());
  for (int c = 0; c < a.channels; ++c) {
    for (int y = 0; y < a.height; ++y)
      for (int x = 0; x < a.width; ++x) {
        ca[static_cast<std::size_t>(y) * a.width + x] = a.at(y, x, c);
        cb[static_cast<std::size_t>(y) * a.width + x] = b.at(y, x, c);
      }
    acc += ssim_channel(ca, cb, a.height, a.width);
  }
  return acc / a.channels;
}

MetricBundle distortion_metrics(const Image& x, const Image& x_adv) {
  if (!x.same_shape(x_adv)) throw ValidationError("distortion metrics: image shapes differ");
  MetricBundle m;
  double sq = 0.0, abs_acc = 0.0, peak = 0.0;
  for (std::size_t i = 0; i < x.pixels.size(); ++i) {
    const double d = x.pixels[i] - x_adv.pixels[i];
    sq += d * d;
    abs_acc += std::abs(d);
    peak = std::max(peak, std::abs(d));
  }
  const double n = static_cast<double>(x.pixels.size());
  m.l2 = std::sqrt(sq / n);
  m.mean_distortion = abs_acc / n;
  m.linf = peak;

  long changed = 0;
  for (int y = 0; y < x.height; ++y)
    for (int xx = 0; xx < x.width; ++xx) {
      bool site_changed = false;
      for (int c = 0; c < x.channels && !site_changed; ++c) {
        const long qa = std::lround(std::clamp(x.at(y, xx, c), 0.0, 1.0) * 255.0);
        const long qb = std::lround(std::clamp(x_adv.at(y, xx, c), 0.0, 1.0) * 255.0);
        site_changed = qa != qb;
      }
      if (site_changed) ++changed;
    }
  m.l0 = static_cast<double>(changed) / (static_cast<double>(x.height) * x.width);
  m.ssim = ssim(x, x_adv);
  m.wall_time_s = 0.0;
  return m;
}

}  // namespace afog
