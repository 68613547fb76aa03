#include "woplearn/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <vector>

#include "woplearn/errors.hpp"
#include "woplearn/rng.hpp"

namespace wopl {

namespace {

constexpr int kMargin = 6;

class Canvas {
 public:
  explicit Canvas(BinaryImage& img) : img_(img) {}

  void dot(int x, int y) {
    if (img_.contains(x, y)) img_.set(x, y, 1);
  }
  void fill_rect(int x0, int y0, int x1, int y1) {
    for (int y = y0; y <= y1; ++y)
      for (int x = x0; x <= x1; ++x) dot(x, y);
  }
  void fill_ellipse(double cx, double cy, double rx, double ry, double tilt) {
    const int r = static_cast<int>(std::ceil(std::max(rx, ry))) + 1;
    const double c = std::cos(tilt), s = std::sin(tilt);
    for (int y = static_cast<int>(cy) - r; y <= static_cast<int>(cy) + r; ++y)
      for (int x = static_cast<int>(cx) - r; x <= static_cast<int>(cx) + r; ++x) {
        const double dx = x - cx, dy = y - cy;
        const double u = (c * dx + s * dy) / rx, v = (-s * dx + c * dy) / ry;
        if (u * u + v * v <= 1.0) dot(x, y);
      }
  }
  void ring(double cx, double cy, double rx, double ry, double tilt, double width) {
    const int r = static_cast<int>(std::ceil(std::max(rx, ry))) + 1;
    const double c = std::cos(tilt), s = std::sin(tilt);
    const double irx = std::max(0.5, rx - width), iry = std::max(0.5, ry - width * 0.6);
    for (int y = static_cast<int>(cy) - r; y <= static_cast<int>(cy) + r; ++y)
      for (int x = static_cast<int>(cx) - r; x <= static_cast<int>(cx) + r; ++x) {
        const double dx = x - cx, dy = y - cy;
        const double u = c * dx + s * dy, v = -s * dx + c * dy;
        const double outer = (u / rx) * (u / rx) + (v / ry) * (v / ry);
        const double inner = (u / irx) * (u / irx) + (v / iry) * (v / iry);
        if (outer <= 1.0 && inner > 1.0) dot(x, y);
      }
  }
  // Band of the given thickness whose top edge runs from (x0,y0) to (x1,y1).
  void slanted_band(int x0, double y0, int x1, double y1, int thickness) {
    for (int x = x0; x <= x1; ++x) {
      const double t = x1 == x0 ? 0.0 : static_cast<double>(x - x0) / (x1 - x0);
      const int top = static_cast<int>(std::lround(y0 + t * (y1 - y0)));
      for (int k = 0; k < thickness; ++k) dot(x, top + k);
    }
  }

 private:
  BinaryImage& img_;
};

struct Staff {
  int top = 0;      // y of the first line's top row
  int spacing = 0;  // distance between line tops
  int left = 0;
  int right = 0;
};

int max_staff_height(const SynthConfig& c) {
  return (c.lines_per_staff - 1) * c.line_spacing.hi + c.line_thickness.hi + 2;
}

void draw_staff(const SynthConfig& cfg, const Staff& staff, Rng& rng, BinaryImage& layer) {
  Canvas canvas(layer);
  for (int l = 0; l < cfg.lines_per_staff; ++l) {
    const int thickness = static_cast<int>(rng.range(cfg.line_thickness.lo, cfg.line_thickness.hi));
    const int y0 = staff.top + l * staff.spacing;
    int wobble = 0;
    int gap = 0;
    for (int x = staff.left; x <= staff.right; ++x) {
      // Slow vertical drift of at most one pixel.
      if (rng.bernoulli(0.02)) wobble = std::clamp(wobble + (rng.bernoulli(0.5) ? 1 : -1), -1, 1);
      if (gap == 0 && rng.bernoulli(cfg.line_breaks)) gap = static_cast<int>(rng.range(2, 8));
      if (gap > 0) {
        --gap;
        continue;
      }
      for (int k = 0; k < thickness; ++k) canvas.dot(x, y0 + wobble + k);
    }
  }
}

struct Note {
  int x = 0;
  double head_y = 0;
  bool stem_up = true;
  int stem_x = 0;
  int stem_end = 0;
};

void draw_symbols(const SynthConfig& cfg, const Staff& staff, Rng& rng, BinaryImage& layer) {
  Canvas canvas(layer);
  const int n = static_cast<int>(rng.range(cfg.symbols_per_staff.lo, cfg.symbols_per_staff.hi));
  if (n <= 0) return;
  const double sp = staff.spacing;
  const int usable = staff.right - staff.left - static_cast<int>(3 * sp);
  if (usable <= 0) return;

  std::vector<int> xs(static_cast<std::size_t>(n));
  for (auto& x : xs) x = staff.left + static_cast<int>(1.5 * sp) + static_cast<int>(rng.below(static_cast<std::uint64_t>(usable)));
  std::sort(xs.begin(), xs.end());

  const int staff_bottom = staff.top + (cfg.lines_per_staff - 1) * staff.spacing;
  std::vector<Note> beamable;
  auto flush_beam = [&] {
    if (beamable.size() >= 2) {
      const bool up = beamable.front().stem_up;
      const int thickness = std::max(3, static_cast<int>(std::lround(0.45 * sp)));
      const double y0 = beamable.front().stem_end - (up ? 0 : thickness - 1);
      const double y1 = beamable.back().stem_end - (up ? 0 : thickness - 1);
      canvas.slanted_band(beamable.front().stem_x, y0, beamable.back().stem_x + 1, y1, thickness);
      if (rng.bernoulli(0.3))  // second beam
        canvas.slanted_band(beamable.front().stem_x, y0 + (up ? 1 : -1) * (thickness + 2), beamable.back().stem_x + 1,
                            y1 + (up ? 1 : -1) * (thickness + 2), thickness);
    }
    beamable.clear();
  };

  int last_x = -1000;
  for (const int x : xs) {
    if (x - last_x < static_cast<int>(2.2 * sp)) continue;
    if (!beamable.empty() && x - beamable.back().x > static_cast<int>(5 * sp)) flush_beam();
    last_x = x;
    const double kind = rng.uniform();
    if (kind < 0.12) {  // bar line
      flush_beam();
      const int t = static_cast<int>(rng.range(1, 2));
      canvas.fill_rect(x, staff.top, x + t - 1, staff_bottom + cfg.line_thickness.lo);
    } else if (kind < 0.24) {  // half/whole rest block sitting on or hanging from a line
      flush_beam();
      const int line = static_cast<int>(rng.range(1, cfg.lines_per_staff - 2));
      const int ly = staff.top + line * staff.spacing;
      const int h = std::max(2, static_cast<int>(std::lround(0.45 * sp)));
      const int w = static_cast<int>(std::lround(1.1 * sp));
      if (rng.bernoulli(0.5))
        canvas.fill_rect(x, ly - h + 1, x + w, ly + 1);
      else
        canvas.fill_rect(x, ly, x + w, ly + h);
    } else {  // note
      const int step = static_cast<int>(rng.range(-2, 2 * (cfg.lines_per_staff - 1) + 2));
      const double head_y = staff.top + step * sp / 2.0 + 1.0;
      const double rx = 0.62 * sp, ry = 0.45 * sp, tilt = -0.35;
      const bool filled = rng.bernoulli(0.75);
      if (filled)
        canvas.fill_ellipse(x, head_y, rx, ry, tilt);
      else
        canvas.ring(x, head_y, rx, ry, tilt, std::max(1.5, 0.2 * sp));
      if (!filled && rng.bernoulli(0.3)) {  // whole note: no stem
        flush_beam();
        continue;
      }
      Note note;
      note.x = x;
      note.head_y = head_y;
      note.stem_up = head_y > staff.top + 2 * sp;
      if (!beamable.empty()) note.stem_up = beamable.front().stem_up;
      const int stem_w = static_cast<int>(rng.range(1, 2));
      const int length = static_cast<int>(std::lround(3.3 * sp));
      if (note.stem_up) {
        note.stem_x = x + static_cast<int>(std::lround(rx)) - stem_w;
        note.stem_end = static_cast<int>(head_y) - length;
        canvas.fill_rect(note.stem_x, note.stem_end, note.stem_x + stem_w - 1, static_cast<int>(head_y));
      } else {
        note.stem_x = x - static_cast<int>(std::lround(rx));
        note.stem_end = static_cast<int>(head_y) + length;
        canvas.fill_rect(note.stem_x, static_cast<int>(head_y), note.stem_x + stem_w - 1, note.stem_end);
      }
      if (filled && rng.bernoulli(0.55)) {
        beamable.push_back(note);
        if (beamable.size() == 4) flush_beam();
      } else {
        flush_beam();
      }
    }
  }
  flush_beam();
}

}  // namespace

void SynthConfig::validate() const {
  auto fail = [](const std::string& what) { throw InvalidArgument("synth config: " + what); };
  if (width < 32 || height < 32) fail("canvas must be at least 32x32");
  if (staves < 0) fail("staves must be >= 0");
  if (lines_per_staff < 3) fail("lines per staff must be >= 3");
  if (line_thickness.lo < 1 || line_thickness.hi < line_thickness.lo) fail("invalid line thickness range");
  if (line_spacing.lo < line_thickness.hi + 2 || line_spacing.hi < line_spacing.lo)
    fail("line spacing must exceed the line thickness by at least 2");
  if (symbols_per_staff.lo < 0 || symbols_per_staff.hi < symbols_per_staff.lo) fail("invalid symbol count range");
  if (!(pepper >= 0.0 && pepper <= 1.0)) fail("pepper probability must lie in [0, 1]");
  if (!(line_breaks >= 0.0 && line_breaks <= 1.0)) fail("line-break probability must lie in [0, 1]");
  if (staves > 0 && staves * max_staff_height(*this) + 2 * kMargin > height)
    fail(std::to_string(staves) + " staves do not fit in height " + std::to_string(height));
  if (staves > 0 && width < 2 * kMargin + 6 * line_spacing.hi) fail("canvas too narrow for the staff spacing");
}

SynthSample generate(const SynthConfig& cfg) {
  cfg.validate();
  Rng rng(derive_seed(cfg.seed, 0x73796e7468ULL));
  BinaryImage staff_layer(cfg.width, cfg.height);
  BinaryImage symbol_layer(cfg.width, cfg.height);

  if (cfg.staves > 0) {
    const int band = (cfg.height - 2 * kMargin) / cfg.staves;
    for (int s = 0; s < cfg.staves; ++s) {
      Staff staff;
      staff.spacing = static_cast<int>(rng.range(cfg.line_spacing.lo, cfg.line_spacing.hi));
      const int h = (cfg.lines_per_staff - 1) * staff.spacing + cfg.line_thickness.hi;
      const int slack = std::max(0, band - h);
      staff.top = kMargin + s * band + slack / 2 + static_cast<int>(rng.range(-slack / 4, slack / 4));
      staff.left = kMargin + static_cast<int>(rng.below(static_cast<std::uint64_t>(kMargin)));
      staff.right = cfg.width - 1 - kMargin - static_cast<int>(rng.below(static_cast<std::uint64_t>(kMargin)));
      draw_staff(cfg, staff, rng, staff_layer);
      draw_symbols(cfg, staff, rng, symbol_layer);
    }
  }

  BinaryImage input = staff_layer.unite(symbol_layer);
  if (cfg.pepper > 0.0) {
    for (int y = 0; y < cfg.height; ++y)
      for (int x = 0; x < cfg.width; ++x)
        if (rng.bernoulli(cfg.pepper) && !input.at(x, y)) input.set(x, y, 1);
  }
  SynthSample out;
  out.staff_mask = staff_layer.subtract(symbol_layer);
  out.output = input.subtract(out.staff_mask);
  out.input = std::move(input);
  return out;
}

Corpus generate_corpus(const SynthConfig& cfg, int n_images, std::uint64_t seed) {
  if (n_images < 3) throw InvalidArgument("a corpus needs at least 3 images, got " + std::to_string(n_images));
  cfg.validate();
  const int n_train = (6 * n_images + 9) / 10;
  const int n_val = (2 * n_images + 9) / 10;
  Corpus corpus;
  for (int i = 0; i < n_images; ++i) {
    SynthConfig page = cfg;
    page.seed = derive_seed(seed, static_cast<std::uint64_t>(i));
    SynthSample s = generate(page);
    char id[32];
    std::snprintf(id, sizeof id, "img_%04d", i);
    corpus.pairs.push_back({id, std::move(s.input), std::move(s.output)});
    if (i < n_train)
      corpus.split.train_ids.push_back(id);
    else if (i < n_train + n_val)
      corpus.split.validation_ids.push_back(id);
    else
      corpus.split.test_ids.push_back(id);
  }
  return corpus;
}

}  // namespace wopl
