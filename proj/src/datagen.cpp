#include "svit/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "svit/errors.hpp"
#include "svit/rng.hpp"

namespace svit {

LabeledImageSet gen_pattern(std::size_t n, const PatternTaskConfig& cfg, std::uint64_t seed) {
    if (n == 0) throw ValidationError("gen_pattern: n must be positive");
    if (cfg.size == 0 || cfg.cell == 0)
        throw ValidationError("gen_pattern: size and cell must be positive");
    if (cfg.snr < 0.0) throw ValidationError("gen_pattern: snr must be >= 0");

    LabeledImageSet set;
    set.count = n;
    set.height = set.width = cfg.size;
    set.pixels.resize(n * cfg.size * cfg.size);
    set.labels.resize(n);

    const double a = std::sqrt(cfg.snr);
    const std::size_t n0 = (n + 1) / 2;  // balanced: ceil(n/2) zeros first
    Rng rng(derive_seed(seed, stream::kData));
    for (std::size_t i = 0; i < n; ++i) {
        const int label = i < n0 ? 0 : 1;
        set.labels[i] = label;
        // The checkerboard phase jitters by up to one cell image to image:
        // the pattern, not its exact placement, is the class signature, so a
        // single spatial template is a weak separator.
        const std::size_t dr = rng.below(cfg.cell);
        const std::size_t dc = rng.below(cfg.cell);
        double* img = set.pixels.data() + i * cfg.size * cfg.size;
        for (std::size_t r = 0; r < cfg.size; ++r)
            for (std::size_t c = 0; c < cfg.size; ++c) {
                double v = rng.normal();
                if (label == 1) {
                    const double checker =
                        (((r + dr) / cfg.cell + (c + dc) / cfg.cell) % 2 == 0) ? 1.0 : -1.0;
                    v += a * checker;
                }
                img[r * cfg.size + c] = v;
            }
    }
    return set;
}

namespace {

struct Placement {
    std::size_t r1, c1, r2, c2;  // top-left corners of the two blocks
};

// Samples a displacement with the requested center distance, then an
// absolute position confined to the requested half. Distances and sampling
// order depend only on (cfg, rng state), so the displacement distribution is
// identical across phases; only the absolute offset differs.
Placement place_pair(const ObjectTaskConfig& cfg, bool far, bool lower_half, Rng& rng) {
    const std::size_t size = cfg.size;
    const std::size_t b = cfg.block;
    const std::size_t half = size / 2;
    const double dmin = far ? cfg.far_min : cfg.close_min;
    const double dmax = far ? cfg.far_max : cfg.close_max;
    const int max_dr = static_cast<int>(half >= b ? half - b : 0);
    const int max_dc = static_cast<int>(size - b);

    for (int attempt = 0; attempt < 10000; ++attempt) {
        const int dr = static_cast<int>(rng.below(2 * max_dr + 1)) - max_dr;
        const int dc = static_cast<int>(rng.below(2 * max_dc + 1)) - max_dc;
        const double dist = std::hypot(static_cast<double>(dr), static_cast<double>(dc));
        if (dist < dmin || dist > dmax) continue;
        // Bounding box of the pair, then a uniform offset inside the half.
        const std::size_t box_h = static_cast<std::size_t>(std::abs(dr)) + b;
        const std::size_t box_w = static_cast<std::size_t>(std::abs(dc)) + b;
        if (box_h > half || box_w > size) continue;
        const std::size_t r0 = (lower_half ? half : 0) + rng.below(half - box_h + 1);
        const std::size_t c0 = rng.below(size - box_w + 1);
        Placement p;
        p.r1 = dr >= 0 ? r0 : r0 + static_cast<std::size_t>(-dr);
        p.r2 = dr >= 0 ? r0 + static_cast<std::size_t>(dr) : r0;
        p.c1 = dc >= 0 ? c0 : c0 + static_cast<std::size_t>(-dc);
        p.c2 = dc >= 0 ? c0 + static_cast<std::size_t>(dc) : c0;
        return p;
    }
    throw ValidationError("gen_objects: no feasible placement for size " + std::to_string(size) +
                          " (distance band " + std::to_string(dmin) + ".." + std::to_string(dmax) +
                          ")");
}

}  // namespace

LabeledImageSet gen_objects(std::size_t n, const ObjectTaskConfig& cfg, std::uint64_t seed) {
    if (n == 0) throw ValidationError("gen_objects: n must be positive");
    if (cfg.block == 0 || cfg.size < 2 * cfg.block)
        throw ValidationError("gen_objects: blocks do not fit the image");
    if (!(cfg.close_min <= cfg.close_max && cfg.far_min <= cfg.far_max &&
          cfg.close_max < cfg.far_min))
        throw ValidationError("gen_objects: distance bands must be ordered close < far");
    // Feasibility: the far band must be reachable inside one half.
    {
        const double half = static_cast<double>(cfg.size / 2);
        const double reach = std::hypot(half - cfg.block, static_cast<double>(cfg.size - cfg.block));
        if (reach < cfg.far_min)
            throw ValidationError("gen_objects: far distance " + std::to_string(cfg.far_min) +
                                  " infeasible for size " + std::to_string(cfg.size));
    }

    LabeledImageSet set;
    set.count = n;
    set.height = set.width = cfg.size;
    set.pixels.assign(n * cfg.size * cfg.size, 0.0);
    set.labels.resize(n);

    const std::size_t n0 = (n + 1) / 2;
    Rng rng(derive_seed(seed, stream::kData));
    for (std::size_t i = 0; i < n; ++i) {
        const int label = i < n0 ? 0 : 1;  // 0 close, 1 far
        set.labels[i] = label;
        const bool far = label == 1;
        // Training phase: close pairs upper half, far pairs lower half.
        const bool lower = cfg.reversed ? !far : far;
        const Placement p = place_pair(cfg, far, lower, rng);
        double* img = set.pixels.data() + i * cfg.size * cfg.size;
        for (std::size_t r = 0; r < cfg.block; ++r)
            for (std::size_t c = 0; c < cfg.block; ++c) {
                img[(p.r1 + r) * cfg.size + (p.c1 + c)] = cfg.intensity;
                img[(p.r2 + r) * cfg.size + (p.c2 + c)] = cfg.intensity;
            }
    }
    return set;
}

namespace {

std::vector<std::size_t> shuffled_indices(std::size_t count, std::uint64_t seed) {
    std::vector<std::size_t> idx(count);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    Rng rng(derive_seed(seed, stream::kShuffle));
    rng.shuffle(idx);
    return idx;
}

void validate_fractions(std::span<const double> fractions) {
    if (fractions.empty()) throw ValidationError("split: no fractions given");
    double sum = 0.0;
    for (double f : fractions) {
        if (f <= 0.0) throw ValidationError("split: fractions must be positive");
        sum += f;
    }
    if (std::abs(sum - 1.0) > 1e-9)
        throw ValidationError("split: fractions sum to " + std::to_string(sum) + ", expected 1");
}

// Splits a permuted index list by fractions, largest-remainder rounding.
std::vector<std::vector<std::size_t>> split_list(const std::vector<std::size_t>& idx,
                                                 std::span<const double> fractions) {
    const std::size_t count = idx.size();
    std::vector<std::size_t> sizes(fractions.size());
    std::size_t assigned = 0;
    std::vector<std::pair<double, std::size_t>> rem;
    for (std::size_t i = 0; i < fractions.size(); ++i) {
        const double exact = fractions[i] * static_cast<double>(count);
        sizes[i] = static_cast<std::size_t>(exact);
        assigned += sizes[i];
        rem.push_back({exact - std::floor(exact), i});
    }
    std::stable_sort(rem.begin(), rem.end(),
                     [](const auto& a, const auto& b) { return a.first > b.first; });
    for (std::size_t k = 0; assigned < count; ++k, ++assigned) sizes[rem[k % rem.size()].second]++;

    std::vector<std::vector<std::size_t>> out(fractions.size());
    std::size_t pos = 0;
    for (std::size_t i = 0; i < fractions.size(); ++i) {
        if (sizes[i] == 0) throw ValidationError("split: subset " + std::to_string(i) + " is empty");
        out[i].assign(idx.begin() + pos, idx.begin() + pos + sizes[i]);
        pos += sizes[i];
    }
    return out;
}

}  // namespace

std::vector<std::vector<std::size_t>> split_fractions(std::size_t count,
                                                      std::span<const double> fractions,
                                                      std::uint64_t seed) {
    validate_fractions(fractions);
    if (count < fractions.size()) throw ValidationError("split: fewer items than subsets");
    return split_list(shuffled_indices(count, seed), fractions);
}

std::vector<std::vector<std::size_t>> split_folds(std::size_t count, std::size_t folds,
                                                  std::uint64_t seed) {
    if (folds < 2) throw ValidationError("split: need at least 2 folds");
    if (count < folds) throw ValidationError("split: fewer items than folds");
    const std::vector<double> fr(folds, 1.0 / static_cast<double>(folds));
    return split_list(shuffled_indices(count, seed), fr);
}

namespace {

std::vector<std::vector<std::size_t>> split_stratified_impl(std::span<const int> labels,
                                                            std::span<const double> fractions,
                                                            std::uint64_t seed) {
    std::vector<std::size_t> idx = shuffled_indices(labels.size(), seed);
    std::vector<std::size_t> by_class[2];
    for (std::size_t i : idx) {
        if (labels[i] != 0 && labels[i] != 1)
            throw ValidationError("split: labels must be 0/1 for stratified splits");
        by_class[labels[i]].push_back(i);
    }
    std::vector<std::vector<std::size_t>> out(fractions.size());
    for (int cls = 0; cls < 2; ++cls) {
        if (by_class[cls].empty()) continue;
        auto parts = split_list(by_class[cls], fractions);
        for (std::size_t i = 0; i < parts.size(); ++i)
            out[i].insert(out[i].end(), parts[i].begin(), parts[i].end());
    }
    for (auto& part : out) {
        if (part.empty()) throw ValidationError("split: stratified subset is empty");
        std::sort(part.begin(), part.end());
    }
    return out;
}

}  // namespace

std::vector<std::vector<std::size_t>> split_fractions_stratified(std::span<const int> labels,
                                                                 std::span<const double> fractions,
                                                                 std::uint64_t seed) {
    validate_fractions(fractions);
    return split_stratified_impl(labels, fractions, seed);
}

std::vector<std::vector<std::size_t>> split_folds_stratified(std::span<const int> labels,
                                                             std::size_t folds,
                                                             std::uint64_t seed) {
    if (folds < 2) throw ValidationError("split: need at least 2 folds");
    const std::vector<double> fr(folds, 1.0 / static_cast<double>(folds));
    return split_stratified_impl(labels, fr, seed);
}

LabeledImageSet concat(const LabeledImageSet& base, const LabeledImageSet& extra) {
    if (base.height != extra.height || base.width != extra.width)
        throw DimensionError("concat: image geometry differs");
    LabeledImageSet out = base;
    out.count += extra.count;
    out.pixels.insert(out.pixels.end(), extra.pixels.begin(), extra.pixels.end());
    out.labels.insert(out.labels.end(), extra.labels.begin(), extra.labels.end());
    return out;
}

}  // namespace svit
