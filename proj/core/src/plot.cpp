#include "afog/plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>

#include "afog/errors.hpp"
#include "afog/png_io.hpp"

namespace afog {

namespace {

// 5x7 glyphs for numeric labels, row bits left-to-right from bit 4 down.
struct Glyph {
  char ch;
  std::uint8_t rows[7];
};

constexpr Glyph kGlyphs[] = {
    {'0', {0x0E, 0x11, 0x13, 0x15, 0x19, 0x11, 0x0E}},
    {'1', {0x04, 0x0C, 0x04, 0x04, 0x04, 0x04, 0x0E}},
    {'2', {0x0E, 0x11, 0x01, 0x02, 0x04, 0x08, 0x1F}},
    {'3', {0x1F, 0x02, 0x04, 0x02, 0x01, 0x11, 0x0E}},
    {'4', {0x02, 0x06, 0x0A, 0x12, 0x1F, 0x02, 0x02}},
    {'5', {0x1F, 0x10, 0x1E, 0x01, 0x01, 0x11, 0x0E}},
    {'6', {0x06, 0x08, 0x10, 0x1E, 0x11, 0x11, 0x0E}},
    {'7', {0x1F, 0x01, 0x02, 0x04, 0x08, 0x08, 0x08}},
    {'8', {0x0E, 0x11, 0x11, 0x0E, 0x11, 0x11, 0x0E}},
    {'9', {0x0E, 0x11, 0x11, 0x0F, 0x01, 0x02, 0x0C}},
    {'.', {0x00, 0x00, 0x00, 0x00, 0x00, 0x0C, 0x0C}},
    {'-', {0x00, 0x00, 0x00, 0x1F, 0x00, 0x00, 0x00}},
    {'+', {0x00, 0x04, 0x04, 0x1F, 0x04, 0x04, 0x00}},
    {'e', {0x00, 0x00, 0x0E, 0x11, 0x1F, 0x10, 0x0E}},
};

class Canvas {
 public:
  Canvas(int h, int w) : h_(h), w_(w), px_(static_cast<std::size_t>(h) * w * 3, 255) {}

  void set(int y, int x, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
    if (y < 0 || y >= h_ || x < 0 || x >= w_) return;
    std::uint8_t* p = &px_[(static_cast<std::size_t>(y) * w_ + x) * 3];
    p[0] = r;
    p[1] = g;
    p[2] = b;
  }

  void line(int y0, int x0, int y1, int x1, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
    const int dx = std::abs(x1 - x0), dy = -std::abs(y1 - y0);
    const int sx = x0 < x1 ? 1 : -1, sy = y0 < y1 ? 1 : -1;
    int err = dx + dy;
    while (true) {
      set(y0, x0, r, g, b);
      if (x0 == x1 && y0 == y1) break;
      const int e2 = 2 * err;
      if (e2 >= dy) {
        err += dy;
        x0 += sx;
      }
      if (e2 <= dx) {
        err += dx;
        y0 += sy;
      }
    }
  }

  void text(int y, int x, const std::string& s) {
    for (char ch : s) {
      for (const Glyph& g : kGlyphs) {
        if (g.ch != ch) continue;
        for (int ry = 0; ry < 7; ++ry)
          for (int rx = 0; rx < 5; ++rx)
            if (g.rows[ry] & (1 << (4 - rx))) set(y + ry, x + rx, 0, 0, 0);
        break;
      }
      x += 6;
    }
  }

  void save(const std::string& path) const { write_png(path, px_.data(), h_, w_, 3); }

 private:
  int h_, w_;
  std::vector<std::uint8_t> px_;
};

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4g", v);
  return buf;
}

}  // namespace

void render_line_chart(const std::string& path, const PlotSeries& series,
                       const std::string& x_label, const std::string& y_label, int width,
                       int height) {
  (void)x_label;
  (void)y_label;
  if (series.x.size() != series.y.size() || series.x.empty())
    throw ValidationError("plot series must be non-empty and aligned");

  Canvas cv(height, width);
  const int ml = 70, mr = 20, mt = 20, mb = 40;
  const int px0 = ml, px1 = width - mr, py0 = height - mb, py1 = mt;

  double xmin = series.x[0], xmax = series.x[0], ymin = series.y[0], ymax = series.y[0];
  for (std::size_t i = 0; i < series.x.size(); ++i) {
    xmin = std::min(xmin, series.x[i]);
    xmax = std::max(xmax, series.x[i]);
    ymin = std::min(ymin, series.y[i]);
    ymax = std::max(ymax, series.y[i]);
  }
  if (xmax == xmin) xmax = xmin + 1.0;
  if (ymax == ymin) ymax = ymin + 1.0;

  auto map_x = [&](double v) {
    return px0 + static_cast<int>(std::lround((v - xmin) / (xmax - xmin) * (px1 - px0)));
  };
  auto map_y = [&](double v) {
    return py0 - static_cast<int>(std::lround((v - ymin) / (ymax - ymin) * (py0 - py1)));
  };

  cv.line(py0, px0, py0, px1, 0, 0, 0);
  cv.line(py1, px0, py0, px0, 0, 0, 0);
  for (int i = 0; i <= 4; ++i) {
    const double xv = xmin + (xmax - xmin) * i / 4.0;
    const double yv = ymin + (ymax - ymin) * i / 4.0;
    const int xpix = map_x(xv), ypix = map_y(yv);
    cv.line(py0, xpix, py0 + 4, xpix, 0, 0, 0);
    cv.text(py0 + 8, xpix - 12, fmt(xv));
    cv.line(ypix, px0 - 4, ypix, px0, 0, 0, 0);
    cv.text(ypix - 3, 8, fmt(yv));
  }

  for (std::size_t i = 0; i + 1 < series.x.size(); ++i)
    cv.line(map_y(series.y[i]), map_x(series.x[i]), map_y(series.y[i + 1]),
            map_x(series.x[i + 1]), 30, 60, 200);
  for (std::size_t i = 0; i < series.x.size(); ++i) {
    const int y = map_y(series.y[i]), x = map_x(series.x[i]);
    for (int dy = -2; dy <= 2; ++dy)
      for (int dx = -2; dx <= 2; ++dx) cv.set(y + dy, x + dx, 180, 40, 40);
  }
  cv.save(path);
}

}  // namespace afog
