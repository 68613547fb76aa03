#pragma once

#include <cstdint>
#include <string>

#include "woplearn/corpus.hpp"
#include "woplearn/image.hpp"

namespace wopl {

struct IntRange {
  int lo = 0;
  int hi = 0;
  friend bool operator==(const IntRange&, const IntRange&) = default;
};

// Synthetic printed-score pages: five-line staves plus noteheads, stems,
// beams, rests and bar lines, with light degradation.
struct SynthConfig {
  int width = 256;
  int height = 256;
  int staves = 3;
  int lines_per_staff = 5;
  IntRange line_thickness{1, 3};
  IntRange line_spacing{9, 13};
  IntRange symbols_per_staff{6, 12};
  double pepper = 0.001;       // per background pixel: becomes an isolated ink dot
  double line_breaks = 0.003;  // per staff-line column: starts a 2-8 pixel gap
  std::uint64_t seed = 0;

  // Throws InvalidArgument when probabilities are out of range or the staves
  // do not fit on the canvas.
  void validate() const;
  friend bool operator==(const SynthConfig&, const SynthConfig&) = default;
};

struct SynthSample {
  BinaryImage input;
  BinaryImage output;      // input with pure staff pixels removed
  BinaryImage staff_mask;  // staff pixels not covered by any symbol
};

SynthSample generate(const SynthConfig& cfg);

// n pages with ids img_0000...; page i uses seed derive_seed(seed, i).
// Split: first ceil(0.6 n) train, next ceil(0.2 n) validation, rest test.
Corpus generate_corpus(const SynthConfig& cfg, int n_images, std::uint64_t seed);

}  // namespace wopl
