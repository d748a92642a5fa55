#include "afog/toy_detector.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <limits>

#include "afog/errors.hpp"
#include "afog/metrics.hpp"
#include "afog/rng.hpp"

namespace afog {

namespace {

constexpr int kK1 = 5, kS1 = 4, kP1 = 2;  // conv1
constexpr int kK2 = 3, kS2 = 2, kP2 = 1;  // conv2
constexpr int kK3 = 3, kS3 = 1, kP3 = 1;  // conv3 keeps the grid for finer boxes

int conv_out(int in, int k, int stride, int pad) { return (in + 2 * pad - k) / stride + 1; }

void conv_forward(const double* in, int ih, int iw, int ic, const double* w, const double* b,
                  int oc, int k, int stride, int pad, double* out, int oh, int ow) {
  for (int oy = 0; oy < oh; ++oy) {
    for (int ox = 0; ox < ow; ++ox) {
      double* o = out + (static_cast<std::size_t>(oy) * ow + ox) * oc;
      for (int c = 0; c < oc; ++c) o[c] = b[c];
      const int iy0 = oy * stride - pad;
      const int ix0 = ox * stride - pad;
      for (int ky = 0; ky < k; ++ky) {
        const int iy = iy0 + ky;
        if (iy < 0 || iy >= ih) continue;
        for (int kx = 0; kx < k; ++kx) {
          const int ix = ix0 + kx;
          if (ix < 0 || ix >= iw) continue;
          const double* ivec = in + (static_cast<std::size_t>(iy) * iw + ix) * ic;
          for (int c = 0; c < oc; ++c) {
            const double* wrow = w + ((static_cast<std::size_t>(c) * k + ky) * k + kx) * ic;
            double acc = 0.0;
            for (int j = 0; j < ic; ++j) acc += wrow[j] * ivec[j];
            o[c] += acc;
          }
        }
      }
    }
  }
}

void conv_backward_data(const double* dout, int oh, int ow, int oc, const double* w, int k,
                        int stride, int pad, double* din, int ih, int iw, int ic) {
  for (int oy = 0; oy < oh; ++oy) {
    for (int ox = 0; ox < ow; ++ox) {
      const double* g = dout + (static_cast<std::size_t>(oy) * ow + ox) * oc;
      const int iy0 = oy * stride - pad;
      const int ix0 = ox * stride - pad;
      for (int ky = 0; ky < k; ++ky) {
        const int iy = iy0 + ky;
        if (iy < 0 || iy >= ih) continue;
        for (int kx = 0; kx < k; ++kx) {
          const int ix = ix0 + kx;
          if (ix < 0 || ix >= iw) continue;
          double* dvec = din + (static_cast<std::size_t>(iy) * iw + ix) * ic;
          for (int c = 0; c < oc; ++c) {
            const double gv = g[c];
            if (gv == 0.0) continue;
            const double* wrow = w + ((static_cast<std::size_t>(c) * k + ky) * k + kx) * ic;
            for (int j = 0; j < ic; ++j) dvec[j] += wrow[j] * gv;
          }
        }
      }
    }
  }
}

void conv_backward_params(const double* dout, int oh, int ow, int oc, const double* in, int ih,
                          int iw, int ic, int k, int stride, int pad, double* dw, double* db) {
  for (int oy = 0; oy < oh; ++oy) {
    for (int ox = 0; ox < ow; ++ox) {
      const double* g = dout + (static_cast<std::size_t>(oy) * ow + ox) * oc;
      for (int c = 0; c < oc; ++c) db[c] += g[c];
      const int iy0 = oy * stride - pad;
      const int ix0 = ox * stride - pad;
      for (int ky = 0; ky < k; ++ky) {
        const int iy = iy0 + ky;
        if (iy < 0 || iy >= ih) continue;
        for (int kx = 0; kx < k; ++kx) {
          const int ix = ix0 + kx;
          if (ix < 0 || ix >= iw) continue;
          const double* ivec = in + (static_cast<std::size_t>(iy) * iw + ix) * ic;
          for (int c = 0; c < oc; ++c) {
            const double gv = g[c];
            if (gv == 0.0) continue;
            double* dwrow = dw + ((static_cast<std::size_t>(c) * k + ky) * k + kx) * ic;
            for (int j = 0; j < ic; ++j) dwrow[j] += ivec[j] * gv;
          }
        }
      }
    }
  }
}

void relu_inplace(std::vector<double>& v) {
  for (double& x : v)
    if (x < 0.0) x = 0.0;
}

void write_bytes(std::ostream& out, const void* p, std::size_t n) {
  out.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
}

void read_bytes(std::istream& in, void* p, std::size_t n) {
  in.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
  if (!in) throw IoError("toy detector blob truncated");
}

}  // namespace

struct ToyDetector::Layout {
  int h1, w1, h2, w2, h3, w3, S;
  int head_in;  // pooled features + attention soft-argmax (x, y)
  std::size_t conv1_w, conv1_b, conv2_w, conv2_b, conv3_w, conv3_b;
  std::size_t pos, queries, lin1_w, lin1_b, cls_w, cls_b, box_w, box_b, qbox;
  std::size_t total;

  explicit Layout(const ToyDetectorConfig& c) {
    h1 = conv_out(c.input_height, kK1, kS1, kP1);
    w1 = conv_out(c.input_width, kK1, kS1, kP1);
    h2 = conv_out(h1, kK2, kS2, kP2);
    w2 = conv_out(w1, kK2, kS2, kP2);
    h3 = conv_out(h2, kK3, kS3, kP3);
    w3 = conv_out(w2, kK3, kS3, kP3);
    S = h3 * w3;
    std::size_t o = 0;
    auto take = [&o](std::size_t n) {
      const std::size_t at = o;
      o += n;
      return at;
    };
    conv1_w = take(static_cast<std::size_t>(c.c1) * kK1 * kK1 * 3);
    conv1_b = take(c.c1);
    conv2_w = take(static_cast<std::size_t>(c.c2) * kK2 * kK2 * c.c1);
    conv2_b = take(c.c2);
    conv3_w = take(static_cast<std::size_t>(c.c3) * kK3 * kK3 * c.c2);
    conv3_b = take(c.c3);
    head_in = c.c3 + 2;
    pos = take(static_cast<std::size_t>(S) * c.c3);
    queries = take(static_cast<std::size_t>(c.num_queries) * c.c3);
    lin1_w = take(static_cast<std::size_t>(c.hidden) * head_in);
    lin1_b = take(c.hidden);
    cls_w = take(static_cast<std::size_t>(c.num_classes + 1) * c.hidden);
    cls_b = take(c.num_classes + 1);
    box_w = take(static_cast<std::size_t>(4) * c.hidden);
    box_b = take(4);
    qbox = take(static_cast<std::size_t>(c.num_queries) * 4);
    total = o;
  }
};

struct ToyDetector::Activations {
  std::vector<double> z1, a1, z2, a2, z3;
  std::vector<double> fp;          // S x d, relu(z3) + pos
  std::vector<double> att_logits;  // N x S
  std::vector<double> att_w;       // N x S
  std::vector<double> head_in;     // N x (d + 2): pooled features, soft-argmax x, y
  std::vector<double> pre1, h1;    // N x hidden
  std::vector<double> box_raw;     // N x 4
  QueryOutputs out;
};

const ToyDetector::Layout& ToyDetector::layout() const { return *layout_; }

ToyDetector::ToyDetector(const ToyDetectorConfig& cfg, std::uint64_t init_seed)
    : cfg_(cfg), layout_(std::make_shared<const Layout>(cfg)) {
  if (cfg.input_height % 8 != 0 || cfg.input_width % 8 != 0)
    throw ValidationError("toy detector input dims must be multiples of 8");
  const Layout& lay = *layout_;
  params_.assign(lay.total, 0.0);
  Rng rng(init_seed);

  auto he_fill = [&](std::size_t off, std::size_t n, int fan_in) {
    const double stddev = std::sqrt(2.0 / fan_in);
    for (std::size_t i = 0; i < n; ++i) params_[off + i] = rng.normal() * stddev;
  };
  he_fill(lay.conv1_w, static_cast<std::size_t>(cfg.c1) * kK1 * kK1 * 3, kK1 * kK1 * 3);
  he_fill(lay.conv2_w, static_cast<std::size_t>(cfg.c2) * kK2 * kK2 * cfg.c1,
          kK2 * kK2 * cfg.c1);
  he_fill(lay.conv3_w, static_cast<std::size_t>(cfg.c3) * kK2 * kK2 * cfg.c2,
          kK2 * kK2 * cfg.c2);
  for (std::size_t i = 0; i < static_cast<std::size_t>(lay.S) * cfg.c3; ++i)
    params_[lay.pos + i] = rng.normal() * 0.05;
  for (std::size_t i = 0; i < static_cast<std::size_t>(cfg.num_queries) * cfg.c3; ++i)
    params_[lay.queries + i] = rng.normal() * 0.2;
  he_fill(lay.lin1_w, static_cast<std::size_t>(cfg.hidden) * cfg.c3, cfg.c3);
  for (std::size_t i = 0; i < static_cast<std::size_t>(cfg.num_classes + 1) * cfg.hidden; ++i)
    params_[lay.cls_w + i] = rng.normal() * 0.01;
  for (std::size_t i = 0; i < static_cast<std::size_t>(4) * cfg.hidden; ++i)
    params_[lay.box_w + i] = rng.normal() * 0.01;

  // Per-query box anchors on a grid so queries own distinct regions from the
  // first matching step instead of collapsing onto one shared prediction.
  const int grid_w = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(cfg.num_queries))));
  const int grid_h = (cfg.num_queries + grid_w - 1) / grid_w;
  auto logit = [](double v) { return std::log(v / (1.0 - v)); };
  for (int q = 0; q < cfg.num_queries; ++q) {
    const double cx = (q % grid_w + 0.5) / grid_w;
    const double cy = (q / grid_w + 0.5) / grid_h;
    double* anchor = &params_[lay.qbox + static_cast<std::size_t>(q) * 4];
    anchor[0] = logit(cx);
    anchor[1] = logit(cy);
    anchor[2] = logit(0.18);
    anchor[3] = logit(0.18);
  }
}

SpatialConstraints ToyDetector::input_constraints() const {
  SpatialConstraints sc;
  sc.min_height = sc.max_height = cfg_.input_height;
  sc.min_width = sc.max_width = cfg_.input_width;
  return sc;
}

void ToyDetector::forward(const Image& img, Activations& acts) const {
  if (img.height != cfg_.input_height || img.width != cfg_.input_width || img.channels != 3)
    throw ValidationError("toy adapter: image shape does not match the configured " +
                          std::to_string(cfg_.input_height) + "x" +
                          std::to_string(cfg_.input_width) + "x3 input");
  const Layout& lay = layout();
  const int d = cfg_.c3;
  const int n = cfg_.num_queries;
  const int nc = cfg_.num_classes + 1;
  const double* p = params_.data();

  acts.z1.assign(static_cast<std::size_t>(lay.h1) * lay.w1 * cfg_.c1, 0.0);
  conv_forward(img.pixels.data(), img.height, img.width, 3, p + lay.conv1_w, p + lay.conv1_b,
               cfg_.c1, kK1, kS1, kP1, acts.z1.data(), lay.h1, lay.w1);
  acts.a1 = acts.z1;
  relu_inplace(acts.a1);

  acts.z2.assign(static_cast<std::size_t>(lay.h2) * lay.w2 * cfg_.c2, 0.0);
  conv_forward(acts.a1.data(), lay.h1, lay.w1, cfg_.c1, p + lay.conv2_w, p + lay.conv2_b,
               cfg_.c2, kK2, kS2, kP2, acts.z2.data(), lay.h2, lay.w2);
  acts.a2 = acts.z2;
  relu_inplace(acts.a2);

  acts.z3.assign(static_cast<std::size_t>(lay.h3) * lay.w3 * cfg_.c3, 0.0);
  conv_forward(acts.a2.data(), lay.h2, lay.w2, cfg_.c2, p + lay.conv3_w, p + lay.conv3_b,
               cfg_.c3, kK3, kS3, kP3, acts.z3.data(), lay.h3, lay.w3);

  acts.fp.resize(acts.z3.size());
  for (std::size_t i = 0; i < acts.z3.size(); ++i)
    acts.fp[i] = (acts.z3[i] > 0.0 ? acts.z3[i] : 0.0) + p[lay.pos + i];

  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(d));
  acts.att_logits.assign(static_cast<std::size_t>(n) * lay.S, 0.0);
  acts.att_w.assign(static_cast<std::size_t>(n) * lay.S, 0.0);
  acts.head_in.assign(static_cast<std::size_t>(n) * lay.head_in, 0.0);
  for (int q = 0; q < n; ++q) {
    const double* qv = p + lay.queries + static_cast<std::size_t>(q) * d;
    double* lrow = &acts.att_logits[static_cast<std::size_t>(q) * lay.S];
    double m = -std::numeric_limits<double>::infinity();
    for (int s = 0; s < lay.S; ++s) {
      const double* f = &acts.fp[static_cast<std::size_t>(s) * d];
      double acc = 0.0;
      for (int j = 0; j < d; ++j) acc += qv[j] * f[j];
      lrow[s] = acc * inv_sqrt_d;
      m = std::max(m, lrow[s]);
    }
    double* wrow = &acts.att_w[static_cast<std::size_t>(q) * lay.S];
    double z = 0.0;
    for (int s = 0; s < lay.S; ++s) {
      wrow[s] = std::exp(lrow[s] - m);
      z += wrow[s];
    }
    const double inv_z = 1.0 / z;
    double* pool = &acts.head_in[static_cast<std::size_t>(q) * lay.head_in];
    for (int s = 0; s < lay.S; ++s) {
      wrow[s] *= inv_z;
      const double* f = &acts.fp[static_cast<std::size_t>(s) * d];
      for (int j = 0; j < d; ++j) pool[j] += wrow[s] * f[j];
      // attention soft-argmax, the head's direct location signal
      pool[d] += wrow[s] * (s % lay.w3 + 0.5) / lay.w3;
      pool[d + 1] += wrow[s] * (s / lay.w3 + 0.5) / lay.h3;
    }
  }

  acts.pre1.assign(static_cast<std::size_t>(n) * cfg_.hidden, 0.0);
  for (int q = 0; q < n; ++q) {
    const double* pool = &acts.head_in[static_cast<std::size_t>(q) * lay.head_in];
    for (int j = 0; j < cfg_.hidden; ++j) {
      const double* wrow = p + lay.lin1_w + static_cast<std::size_t>(j) * lay.head_in;
      double acc = p[lay.lin1_b + j];
      for (int i = 0; i < lay.head_in; ++i) acc += wrow[i] * pool[i];
      acts.pre1[static_cast<std::size_t>(q) * cfg_.hidden + j] = acc;
    }
  }
  acts.h1 = acts.pre1;
  relu_inplace(acts.h1);

  acts.out.num_queries = n;
  acts.out.num_classes = cfg_.num_classes;
  acts.out.logits.assign(static_cast<std::size_t>(n) * nc, 0.0);
  acts.box_raw.assign(static_cast<std::size_t>(n) * 4, 0.0);
  acts.out.boxes.assign(static_cast<std::size_t>(n) * 4, 0.0);
  for (int q = 0; q < n; ++q) {
    const double* h = &acts.h1[static_cast<std::size_t>(q) * cfg_.hidden];
    for (int k = 0; k < nc; ++k) {
      const double* wrow = p + lay.cls_w + static_cast<std::size_t>(k) * cfg_.hidden;
      double acc = p[lay.cls_b + k];
      for (int j = 0; j < cfg_.hidden; ++j) acc += wrow[j] * h[j];
      acts.out.logits[static_cast<std::size_t>(q) * nc + k] = acc;
    }
    for (int k = 0; k < 4; ++k) {
      const double* wrow = p + lay.box_w + static_cast<std::size_t>(k) * cfg_.hidden;
      double acc = p[lay.box_b + k] + p[lay.qbox + static_cast<std::size_t>(q) * 4 + k];
      for (int j = 0; j < cfg_.hidden; ++j) acc += wrow[j] * h[j];
      acts.box_raw[static_cast<std::size_t>(q) * 4 + k] = acc;
      acts.out.boxes[static_cast<std::size_t>(q) * 4 + k] = 1.0 / (1.0 + std::exp(-acc));
    }
  }
}

void ToyDetector::backward(const Image& img, const Activations& acts,
                           const std::vector<double>& d_logits,
                           const std::vector<double>& d_boxes, Image* input_grad,
                           std::vector<double>* param_grad) const {
  const Layout& lay = layout();
  const int d = cfg_.c3;
  const int n = cfg_.num_queries;
  const int nc = cfg_.num_classes + 1;
  const double* p = params_.data();
  double* pg = param_grad ? param_grad->data() : nullptr;

  // Head backward.
  std::vector<double> d_h1(static_cast<std::size_t>(n) * cfg_.hidden, 0.0);
  for (int q = 0; q < n; ++q) {
    const double* h = &acts.h1[static_cast<std::size_t>(q) * cfg_.hidden];
    double* dh = &d_h1[static_cast<std::size_t>(q) * cfg_.hidden];
    for (int k = 0; k < nc; ++k) {
      const double g = d_logits[static_cast<std::size_t>(q) * nc + k];
      if (g == 0.0) continue;
      const double* wrow = p + lay.cls_w + static_cast<std::size_t>(k) * cfg_.hidden;
      for (int j = 0; j < cfg_.hidden; ++j) dh[j] += wrow[j] * g;
      if (pg) {
        double* dwrow = pg + lay.cls_w + static_cast<std::size_t>(k) * cfg_.hidden;
        for (int j = 0; j < cfg_.hidden; ++j) dwrow[j] += h[j] * g;
        pg[lay.cls_b + k] += g;
      }
    }
    for (int k = 0; k < 4; ++k) {
      const double b = acts.out.boxes[static_cast<std::size_t>(q) * 4 + k];
      const double g = d_boxes[static_cast<std::size_t>(q) * 4 + k] * b * (1.0 - b);
      if (g == 0.0) continue;
      const double* wrow = p + lay.box_w + static_cast<std::size_t>(k) * cfg_.hidden;
      for (int j = 0; j < cfg_.hidden; ++j) dh[j] += wrow[j] * g;
      if (pg) {
        double* dwrow = pg + lay.box_w + static_cast<std::size_t>(k) * cfg_.hidden;
        for (int j = 0; j < cfg_.hidden; ++j) dwrow[j] += h[j] * g;
        pg[lay.box_b + k] += g;
        pg[lay.qbox + static_cast<std::size_t>(q) * 4 + k] += g;
      }
    }
  }

  // MLP backward into the head input (pooled features + soft-argmax coords).
  std::vector<double> d_head(static_cast<std::size_t>(n) * lay.head_in, 0.0);
  for (int q = 0; q < n; ++q) {
    const double* pool = &acts.head_in[static_cast<std::size_t>(q) * lay.head_in];
    double* dpool = &d_head[static_cast<std::size_t>(q) * lay.head_in];
    for (int j = 0; j < cfg_.hidden; ++j) {
      if (acts.pre1[static_cast<std::size_t>(q) * cfg_.hidden + j] <= 0.0) continue;
      const double g = d_h1[static_cast<std::size_t>(q) * cfg_.hidden + j];
      if (g == 0.0) continue;
      const double* wrow = p + lay.lin1_w + static_cast<std::size_t>(j) * lay.head_in;
      for (int i = 0; i < lay.head_in; ++i) dpool[i] += wrow[i] * g;
      if (pg) {
        double* dwrow = pg + lay.lin1_w + static_cast<std::size_t>(j) * lay.head_in;
        for (int i = 0; i < lay.head_in; ++i) dwrow[i] += pool[i] * g;
        pg[lay.lin1_b + j] += g;
      }
    }
  }

  // Attention backward into the positioned features.
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(d));
  std::vector<double> d_fp(acts.fp.size(), 0.0);
  std::vector<double> dw_att(lay.S, 0.0);
  for (int q = 0; q < n; ++q) {
    const double* dpool = &d_head[static_cast<std::size_t>(q) * lay.head_in];
    const double d_sax = dpool[d];
    const double d_say = dpool[d + 1];
    const double* wrow = &acts.att_w[static_cast<std::size_t>(q) * lay.S];
    const double* qv = p + lay.queries + static_cast<std::size_t>(q) * d;

    double dot = 0.0;
    for (int s = 0; s < lay.S; ++s) {
      const double* f = &acts.fp[static_cast<std::size_t>(s) * d];
      double acc = 0.0;
      for (int j = 0; j < d; ++j) acc += dpool[j] * f[j];
      acc += d_sax * (s % lay.w3 + 0.5) / lay.w3 + d_say * (s / lay.w3 + 0.5) / lay.h3;
      dw_att[s] = acc;
      dot += wrow[s] * acc;
    }
    for (int s = 0; s < lay.S; ++s) {
      const double dlog = wrow[s] * (dw_att[s] - dot);  // softmax backward
      double* df = &d_fp[static_cast<std::size_t>(s) * d];
      const double* f = &acts.fp[static_cast<std::size_t>(s) * d];
      for (int j = 0; j < d; ++j) df[j] += wrow[s] * dpool[j] + qv[j] * dlog * inv_sqrt_d;
      if (pg) {
        double* dq = pg + lay.queries + static_cast<std::size_t>(q) * d;
        for (int j = 0; j < d; ++j) dq[j] += f[j] * dlog * inv_sqrt_d;
      }
    }
  }
  if (pg)
    for (std::size_t i = 0; i < d_fp.size(); ++i) pg[lay.pos + i] += d_fp[i];

  // Conv stack backward.
  std::vector<double> d_z3(d_fp);
  for (std::size_t i = 0; i < d_z3.size(); ++i)
    if (acts.z3[i] <= 0.0) d_z3[i] = 0.0;

  std::vector<double> d_a2(acts.a2.size(), 0.0);
  conv_backward_data(d_z3.data(), lay.h3, lay.w3, cfg_.c3, p + lay.conv3_w, kK3, kS3, kP3,
                     d_a2.data(), lay.h2, lay.w2, cfg_.c2);
  if (pg)
    conv_backward_params(d_z3.data(), lay.h3, lay.w3, cfg_.c3, acts.a2.data(), lay.h2, lay.w2,
                         cfg_.c2, kK3, kS3, kP3, pg + lay.conv3_w, pg + lay.conv3_b);

  for (std::size_t i = 0; i < d_a2.size(); ++i)
    if (acts.z2[i] <= 0.0) d_a2[i] = 0.0;

  std::vector<double> d_a1(acts.a1.size(), 0.0);
  conv_backward_data(d_a2.data(), lay.h2, lay.w2, cfg_.c2, p + lay.conv2_w, kK2, kS2, kP2,
                     d_a1.data(), lay.h1, lay.w1, cfg_.c1);
  if (pg)
    conv_backward_params(d_a2.data(), lay.h2, lay.w2, cfg_.c2, acts.a1.data(), lay.h1, lay.w1,
                         cfg_.c1, kK2, kS2, kP2, pg + lay.conv2_w, pg + lay.conv2_b);

  for (std::size_t i = 0; i < d_a1.size(); ++i)
    if (acts.z1[i] <= 0.0) d_a1[i] = 0.0;

  if (input_grad) {
    *input_grad = Image(img.height, img.width, img.channels);
    conv_backward_data(d_a1.data(), lay.h1, lay.w1, cfg_.c1, p + lay.conv1_w, kK1, kS1, kP1,
                       input_grad->pixels.data(), img.height, img.width, 3);
  }
  if (pg)
    conv_backward_params(d_a1.data(), lay.h1, lay.w1, cfg_.c1, img.pixels.data(), img.height,
                         img.width, 3, kK1, kS1, kP1, pg + lay.conv1_w, pg + lay.conv1_b);
}

QueryOutputs ToyDetector::raw_outputs(const Image& img) const {
  Activations acts;
  forward(img, acts);
  return acts.out;
}

DetectionSet ToyDetector::detect(const Image& img, double conf_threshold) const {
  const QueryOutputs out = raw_outputs(img);
  const int nc = cfg_.num_classes + 1;
  DetectionSet ds;
  ds.num_classes = cfg_.num_classes;
  for (int q = 0; q < out.num_queries; ++q) {
    const double* logits = &out.logits[static_cast<std::size_t>(q) * nc];
    double m = logits[0];
    for (int k = 1; k < nc; ++k) m = std::max(m, logits[k]);
    double z = 0.0;
    for (int k = 0; k < nc; ++k) z += std::exp(logits[k] - m);
    int best = 0;
    double best_p = 0.0;
    for (int k = 0; k < cfg_.num_classes; ++k) {
      const double pk = std::exp(logits[k] - m) / z;
      if (pk > best_p) {
        best_p = pk;
        best = k;
      }
    }
    if (best_p < conf_threshold) continue;
    const double* b = out.box(q);
    const double w = cfg_.input_width, h = cfg_.input_height;
    ds.items.push_back(Detection{Box{(b[0] - 0.5 * b[2]) * w, (b[1] - 0.5 * b[3]) * h,
                                     (b[0] + 0.5 * b[2]) * w, (b[1] + 0.5 * b[3]) * h},
                                 best, best_p});
  }
  return ds;
}

LossAndGradient ToyDetector::loss_and_gradient(const Image& img, const LossSpec& spec) const {
  if (spec.mode == AttackMode::Vanish && !spec.targets.empty())
    throw ValidationError("vanish-mode loss requires an empty target set");
  for (const Detection& t : spec.targets.items)
    if (t.label < 0 || t.label >= cfg_.num_classes)
      throw ValidationError("target label out of range for this adapter");

  Activations acts;
  forward(img, acts);
  const CriterionResult res = detection_criterion(
      acts.out, to_box_targets(spec.targets, cfg_.input_height, cfg_.input_width),
      criterion_weights);
  if (!std::isfinite(res.total)) throw NumericalError("toy adapter: non-finite detection loss");

  LossAndGradient lg;
  backward(img, acts, res.d_logits, res.d_boxes, &lg.gradient, nullptr);
  for (double v : lg.gradient.pixels)
    if (!std::isfinite(v)) throw NumericalError("toy adapter: non-finite input gradient");
  lg.loss.total = res.total;
  lg.loss.bbox = res.bbox;
  lg.loss.cls = res.cls;
  lg.loss.per_target = res.per_target;
  return lg;
}

DetectionLoss ToyDetector::loss_and_param_grad(const Image& img,
                                               const std::vector<BoxTarget>& targets,
                                               std::vector<double>& param_grad) const {
  Activations acts;
  forward(img, acts);
  const CriterionResult res = detection_criterion(acts.out, targets, criterion_weights);
  backward(img, acts, res.d_logits, res.d_boxes, nullptr, &param_grad);
  DetectionLoss loss;
  loss.total = res.total;
  loss.bbox = res.bbox;
  loss.cls = res.cls;
  loss.per_target = res.per_target;
  return loss;
}

std::uint64_t ToyDetector::parameter_checksum() const {
  std::uint64_t h = 1469598103934665603ULL;  // FNV-1a
  for (double v : params_) {
    std::uint64_t bits = std::bit_cast<std::uint64_t>(v);
    for (int i = 0; i < 8; ++i) {
      h ^= (bits >> (8 * i)) & 0xFF;
      h *= 1099511628211ULL;
    }
  }
  return h;
}

std::unique_ptr<VictimAdapter> ToyDetector::clone() const {
  return std::make_unique<ToyDetector>(*this);
}

void ToyDetector::save(std::ostream& out) const {
  const char magic[4] = {'A', 'F', 'T', 'D'};
  const std::uint32_t version = 1;
  write_bytes(out, magic, 4);
  write_bytes(out, &version, 4);
  const std::int32_t fields[8] = {cfg_.input_height, cfg_.input_width, cfg_.num_classes,
                                  cfg_.num_queries,  cfg_.c1,          cfg_.c2,
                                  cfg_.c3,           cfg_.hidden};
  write_bytes(out, fields, sizeof(fields));
  const double wts[4] = {criterion_weights.cls, criterion_weights.l1, criterion_weights.iou,
                         criterion_weights.no_object};
  write_bytes(out, wts, sizeof(wts));
  const std::uint64_t count = params_.size();
  write_bytes(out, &count, 8);
  write_bytes(out, params_.data(), count * sizeof(double));
}

ToyDetector ToyDetector::load(std::istream& in) {
  char magic[4];
  read_bytes(in, magic, 4);
  if (std::memcmp(magic, "AFTD", 4) != 0) throw IoError("not a toy detector blob");
  std::uint32_t version = 0;
  read_bytes(in, &version, 4);
  if (version != 1) throw IoError("unsupported toy detector blob version");
  std::int32_t fields[8];
  read_bytes(in, fields, sizeof(fields));
  ToyDetectorConfig cfg;
  cfg.input_height = fields[0];
  cfg.input_width = fields[1];
  cfg.num_classes = fields[2];
  cfg.num_queries = fields[3];
  cfg.c1 = fields[4];
  cfg.c2 = fields[5];
  cfg.c3 = fields[6];
  cfg.hidden = fields[7];
  double wts[4];
  read_bytes(in, wts, sizeof(wts));
  std::uint64_t count = 0;
  read_bytes(in, &count, 8);

  ToyDetector det(cfg, 0);
  det.criterion_weights = CriterionWeights{wts[0], wts[1], wts[2], wts[3]};
  if (count != det.params_.size()) throw IoError("toy detector blob parameter count mismatch");
  read_bytes(in, det.params_.data(), count * sizeof(double));
  return det;
}

void ToyDetector::save_file(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for write: " + path);
  save(out);
  if (!out) throw IoError("write failed: " + path);
}

ToyDetector ToyDetector::load_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open: " + path);
  return load(in);
}

std::vector<BoxTarget> to_box_targets(const DetectionSet& ds, int img_h, int img_w) {
  std::vector<BoxTarget> out;
  out.reserve(ds.size());
  for (const Detection& d : ds.items) {
    BoxTarget t;
    t.cx = 0.5 * (d.box.x1 + d.box.x2) / img_w;
    t.cy = 0.5 * (d.box.y1 + d.box.y2) / img_h;
    t.w = d.box.width() / img_w;
    t.h = d.box.height() / img_h;
    t.label = d.label;
    out.push_back(t);
  }
  return out;
}

ToyDetector train_toy_detector(const ShapesDataset& data, const TrainOptions& opts) {
  if (data.items.empty()) throw ValidationError("training data must be non-empty");
  ToyDetectorConfig cfg = opts.detector;
  cfg.num_classes = data.num_classes;
  ToyDetector det(cfg, opts.seed);

  std::vector<std::vector<BoxTarget>> targets;
  targets.reserve(data.items.size());
  for (const LabeledImage& li : data.items)
    targets.push_back(to_box_targets(li.ground_truth, cfg.input_height, cfg.input_width));

  const std::size_t np = det.parameters().size();
  std::vector<double> grad(np), m(np, 0.0), v(np, 0.0);
  Rng shuffle_rng(opts.seed ^ 0x9E3779B97F4A7C15ULL);
  std::vector<int> order(data.items.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);

  const int drop_epoch = opts.lr_drop_epoch >= 0 ? opts.lr_drop_epoch : opts.epochs * 4 / 5;
  long step = 0;
  for (int epoch = 0; epoch < opts.epochs; ++epoch) {
    const double lr =
        epoch >= drop_epoch ? opts.learning_rate * opts.lr_drop_factor : opts.learning_rate;
    for (std::size_t i = order.size(); i > 1; --i)
      std::swap(order[i - 1], order[shuffle_rng.uniform_int(0, static_cast<int>(i) - 1)]);

    double epoch_loss = 0.0;
    for (std::size_t begin = 0; begin < order.size(); begin += opts.batch_size) {
      const std::size_t end = std::min(order.size(), begin + opts.batch_size);
      std::fill(grad.begin(), grad.end(), 0.0);
      double batch_loss = 0.0;
      for (std::size_t i = begin; i < end; ++i) {
        const int idx = order[i];
        batch_loss +=
            det.loss_and_param_grad(data.items[idx].image, targets[idx], grad).total;
      }
      if (!std::isfinite(batch_loss))
        throw NumericalError("training diverged at epoch " + std::to_string(epoch));
      epoch_loss += batch_loss;

      const double inv_batch = 1.0 / static_cast<double>(end - begin);
      ++step;
      const double bc1 = 1.0 - std::pow(opts.adam_beta1, static_cast<double>(step));
      const double bc2 = 1.0 - std::pow(opts.adam_beta2, static_cast<double>(step));
      std::vector<double>& params = det.parameters();
      for (std::size_t i = 0; i < np; ++i) {
        const double g = grad[i] * inv_batch;
        m[i] = opts.adam_beta1 * m[i] + (1.0 - opts.adam_beta1) * g;
        v[i] = opts.adam_beta2 * v[i] + (1.0 - opts.adam_beta2) * g * g;
        params[i] -= lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + opts.adam_eps);
      }
    }
    if (opts.verbose)
      std::fprintf(stderr, "epoch %d mean loss %.4f\n", epoch,
                   epoch_loss / static_cast<double>(order.size()));
  }
  return det;
}

double evaluate_map50(const VictimAdapter& adapter, const ShapesDataset& data,
                      double detect_threshold) {
  std::vector<DetectionSet> preds, gts;
  preds.reserve(data.items.size());
  gts.reserve(data.items.size());
  for (const LabeledImage& li : data.items) {
    preds.push_back(adapter.detect(li.image, detect_threshold));
    gts.push_back(li.ground_truth);
  }
  return mean_average_precision(preds, gts, EvalProtocol::at50(data.num_classes));
}

}  // namespace afog
