#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <utility>
#include <vector>

#include "polymeasure/maskmeasure.hpp"
#include "polymeasure/records.hpp"

namespace polymeasure::synth {

// Desk-scale fixture generator. Ground-truth polylines are randomly placed
// and rotated three-point arcs; each image targets a Vd:Cd ratio drawn from
// one of the four clinical bands (cycled, unless ratio_band pins one).
// Predictions are the ground truth with per-coordinate Gaussian noise,
// instances dropped with probability drop_rate and spurious instances added
// at a Poisson rate per image. Everything is a pure function of the seed.
struct SynthConfig {
  int n_images = 10;
  std::pair<int, int> villi_per_image{2, 5};
  std::pair<int, int> crypts_per_image{2, 4};
  double noise_sigma = 0.0;   // pixels
  double drop_rate = 0.0;     // in [0,1)
  double spurious_rate = 0.0; // expected spurious instances per image
  std::uint64_t seed = 1;
  int width = 640;
  int height = 640;
  std::optional<std::pair<double, double>> ratio_band;
};

struct SynthOutput {
  std::vector<io::ImageRecord> gt;
  std::vector<io::ImageRecord> pred;
  std::vector<maskmeasure::LabelMap> masks;  // one per image, aligned with gt
};

SynthOutput synth_generate(const SynthConfig& cfg);

// Writes gt.jsonl, pred.jsonl and masks/<id>.pgm under out_dir.
void synth_write(const SynthOutput& output,
                 const std::filesystem::path& out_dir);

SynthConfig synth_config_from_json_text(const std::string& text);
SynthConfig synth_config_from_file(const std::filesystem::path& path);

}  // namespace polymeasure::synth
