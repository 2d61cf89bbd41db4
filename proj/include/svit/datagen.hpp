#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace svit {

struct LabeledImageSet {
    std::size_t count = 0;
    std::size_t height = 0;
    std::size_t width = 0;
    std::vector<double> pixels;  // count * height * width, row-major per image
    std::vector<int> labels;     // 0 or 1

    std::span<const double> image(std::size_t i) const {
        return {pixels.data() + i * height * width, height * width};
    }
    std::size_t pixels_per_image() const { return height * width; }
};

// Defaults for the two synthetic tasks; recorded in experiment metadata so a
// run is reproducible from its own output.
struct PatternTaskConfig {
    std::size_t size = 28;
    std::size_t cell = 4;     // checkerboard cell side
    double snr = 1.0;         // signal amplitude a = sqrt(snr)
};

struct ObjectTaskConfig {
    std::size_t size = 28;
    std::size_t block = 3;          // bright square side
    double close_min = 4.0, close_max = 8.0;    // center distance, label 0
    double far_min = 13.0, far_max = 19.0;      // center distance, label 1
    double intensity = 1.0;
    // Spurious position link: in the training phase close pairs sit in the
    // upper half and far pairs in the lower half; the test phase reverses it.
    bool reversed = false;
};

// Pattern-in-noise discrimination: class 0 is unit Gaussian noise, class 1
// adds a fixed +-1 checkerboard scaled by sqrt(snr). Balanced labels
// (ceil(n/2) zeros); deterministic in (cfg, seed).
LabeledImageSet gen_pattern(std::size_t n, const PatternTaskConfig& cfg, std::uint64_t seed);

// Two-object relational task: two bright blocks whose center distance is
// either close (label 0) or far (label 1). The displacement distribution is
// identical between phases per class; only the absolute placement carries the
// (reversed) spurious position correlation.
LabeledImageSet gen_objects(std::size_t n, const ObjectTaskConfig& cfg, std::uint64_t seed);

// Deterministic disjoint index splits.
std::vector<std::vector<std::size_t>> split_fractions(std::size_t count,
                                                      std::span<const double> fractions,
                                                      std::uint64_t seed);
std::vector<std::vector<std::size_t>> split_folds(std::size_t count, std::size_t folds,
                                                  std::uint64_t seed);
// Stratified variants keep each subset's label mix within one item of the
// global mix.
std::vector<std::vector<std::size_t>> split_fractions_stratified(std::span<const int> labels,
                                                                 std::span<const double> fractions,
                                                                 std::uint64_t seed);
std::vector<std::vector<std::size_t>> split_folds_stratified(std::span<const int> labels,
                                                             std::size_t folds,
                                                             std::uint64_t seed);

// Appends `extra` to `base` (same geometry required) and returns the
// combined set; convenient for keeping train/test rows in one indexable set.
LabeledImageSet concat(const LabeledImageSet& base, const LabeledImageSet& extra);

}  // namespace svit
