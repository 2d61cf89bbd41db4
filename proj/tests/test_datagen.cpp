#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#define DOCTEST_CONFIG_SUPER_FAST_ASSERTS
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>
#include <vector>

#include "svit/datagen.hpp"
#include "svit/errors.hpp"
#include "test_util.hpp"

using namespace svit;

namespace {

// Connected components of nonzero pixels under 4-adjacency; returns the
// sorted pixel lists of each component.
std::vector<std::vector<std::size_t>> components4(std::span<const double> img, std::size_t size) {
    std::vector<int> seen(size * size, 0);
    std::vector<std::vector<std::size_t>> comps;
    for (std::size_t start = 0; start < size * size; ++start) {
        if (img[start] == 0.0 || seen[start]) continue;
        std::vector<std::size_t> comp, stack{start};
        seen[start] = 1;
        while (!stack.empty()) {
            const std::size_t px = stack.back();
            stack.pop_back();
            comp.push_back(px);
            const std::size_t r = px / size, c = px % size;
            const std::size_t nbr[4][2] = {{r - 1, c}, {r + 1, c}, {r, c - 1}, {r, c + 1}};
            for (const auto& rc : nbr) {
                if (rc[0] >= size || rc[1] >= size) continue;  // unsigned wrap guards edges
                const std::size_t q = rc[0] * size + rc[1];
                if (img[q] != 0.0 && !seen[q]) {
                    seen[q] = 1;
                    stack.push_back(q);
                }
            }
        }
        std::sort(comp.begin(), comp.end());
        comps.push_back(std::move(comp));
    }
    return comps;
}

struct BlockInfo {
    std::size_t min_r, max_r, min_c, max_c;
    double center_r, center_c;
};

BlockInfo block_info(const std::vector<std::size_t>& comp, std::size_t size) {
    BlockInfo b{size, 0, size, 0, 0.0, 0.0};
    for (std::size_t px : comp) {
        const std::size_t r = px / size, c = px % size;
        b.min_r = std::min(b.min_r, r);
        b.max_r = std::max(b.max_r, r);
        b.min_c = std::min(b.min_c, c);
        b.max_c = std::max(b.max_c, c);
        b.center_r += static_cast<double>(r);
        b.center_c += static_cast<double>(c);
    }
    b.center_r /= static_cast<double>(comp.size());
    b.center_c /= static_cast<double>(comp.size());
    return b;
}

bool checker_template_matches(std::span<const double> img, std::size_t size, std::size_t cell,
                              std::size_t dr, std::size_t dc) {
    for (std::size_t r = 0; r < size; ++r)
        for (std::size_t c = 0; c < size; ++c) {
            const double want = (((r + dr) / cell + (c + dc) / cell) % 2 == 0) ? 1.0 : -1.0;
            if ((img[r * size + c] > 0.0 ? 1.0 : -1.0) != want) return false;
        }
    return true;
}

void check_partition(const std::vector<std::vector<std::size_t>>& parts, std::size_t count) {
    std::set<std::size_t> all;
    std::size_t total = 0;
    for (const auto& p : parts) {
        total += p.size();
        all.insert(p.begin(), p.end());
    }
    CHECK(total == count);          // sizes add up
    CHECK(all.size() == count);     // disjoint
    if (!all.empty()) {
        CHECK(*all.begin() == 0);
        CHECK(*all.rbegin() == count - 1);  // exactly the range [0, count)
    }
}

}  // namespace

// ---- Pattern task -----------------------------------------------------------------

TEST_CASE("gen_pattern: balanced labels, deterministic, seed-sensitive") {
    PatternTaskConfig cfg;
    LabeledImageSet a = gen_pattern(7, cfg, 42);
    CHECK(a.count == 7);
    CHECK(a.height == 28);
    CHECK(a.width == 28);
    CHECK(std::count(a.labels.begin(), a.labels.end(), 0) == 4);  // ceil(7/2) zeros
    for (std::size_t i = 0; i < 7; ++i) CHECK(a.labels[i] == (i < 4 ? 0 : 1));

    LabeledImageSet b = gen_pattern(7, cfg, 42);
    CHECK(a.pixels == b.pixels);
    CHECK(a.labels == b.labels);
    LabeledImageSet c = gen_pattern(7, cfg, 43);
    CHECK(a.pixels != c.pixels);

    CHECK_THROWS_AS(gen_pattern(0, cfg, 1), ValidationError);
    PatternTaskConfig bad = cfg;
    bad.snr = -1.0;
    CHECK_THROWS_AS(gen_pattern(4, bad, 1), ValidationError);
    bad = cfg;
    bad.cell = 0;
    CHECK_THROWS_AS(gen_pattern(4, bad, 1), ValidationError);
}

TEST_CASE("gen_pattern: class power ratio is (1 + snr) : 1") {
    PatternTaskConfig cfg;
    cfg.snr = 1.0;
    LabeledImageSet data = gen_pattern(2000, cfg, 91);
    double power[2] = {0.0, 0.0};
    double mean0 = 0.0;
    std::size_t count[2] = {0, 0};
    for (std::size_t i = 0; i < data.count; ++i) {
        const auto img = data.image(i);
        double p = 0.0, s = 0.0;
        for (double x : img) {
            p += x * x;
            s += x;
        }
        power[data.labels[i]] += p / static_cast<double>(img.size());
        if (data.labels[i] == 0) mean0 += s / static_cast<double>(img.size());
        count[data.labels[i]]++;
    }
    const double p0 = power[0] / static_cast<double>(count[0]);
    const double p1 = power[1] / static_cast<double>(count[1]);
    CHECK(p1 / p0 == doctest::Approx(2.0).epsilon(0.02));
    // Class 0 is plain unit noise: mean ~ 0, second moment ~ 1.
    CHECK(std::abs(mean0 / static_cast<double>(count[0])) < 0.01);
    CHECK(p0 == doctest::Approx(1.0).epsilon(0.02));
}

TEST_CASE("gen_pattern: at extreme snr class 1 is a phase-jittered checkerboard") {
    PatternTaskConfig cfg;
    cfg.snr = 1e4;
    LabeledImageSet data = gen_pattern(40, cfg, 92);
    std::set<std::pair<std::size_t, std::size_t>> phases_seen;
    for (std::size_t i = 0; i < data.count; ++i) {
        const auto img = data.image(i);
        std::size_t matches = 0;
        std::pair<std::size_t, std::size_t> phase{0, 0};
        for (std::size_t dr = 0; dr < cfg.cell; ++dr)
            for (std::size_t dc = 0; dc < cfg.cell; ++dc)
                if (checker_template_matches(img, cfg.size, cfg.cell, dr, dc)) {
                    ++matches;
                    phase = {dr, dc};
                }
        if (data.labels[i] == 1) {
            CHECK(matches == 1);  // its own phase and no other
            phases_seen.insert(phase);
        } else {
            CHECK(matches == 0);  // noise never lines up with a template
        }
    }
    CHECK(phases_seen.size() > 1);  // the jitter actually varies image to image
}

// ---- Object task ------------------------------------------------------------------

TEST_CASE("gen_objects: two separated blocks with the labeled center distance") {
    ObjectTaskConfig cfg;
    LabeledImageSet data = gen_objects(60, cfg, 71);
    for (std::size_t i = 0; i < data.count; ++i) {
        const auto img = data.image(i);
        const auto comps = components4(img, cfg.size);
        REQUIRE(comps.size() == 2);
        BlockInfo blocks[2] = {block_info(comps[0], cfg.size), block_info(comps[1], cfg.size)};
        for (const BlockInfo& b : blocks) {
            CHECK(b.max_r - b.min_r + 1 == cfg.block);
            CHECK(b.max_c - b.min_c + 1 == cfg.block);
        }
        for (const auto& comp : comps) CHECK(comp.size() == cfg.block * cfg.block);
        for (std::size_t px : comps[0]) CHECK(img[px] == cfg.intensity);

        const double dist = std::hypot(blocks[0].center_r - blocks[1].center_r,
                                       blocks[0].center_c - blocks[1].center_c);
        if (data.labels[i] == 0) {
            CHECK(dist >= cfg.close_min);
            CHECK(dist <= cfg.close_max);
        } else {
            CHECK(dist >= cfg.far_min);
            CHECK(dist <= cfg.far_max);
        }
    }
}

TEST_CASE("gen_objects: the position shortcut sits in halves and flips with the phase") {
    ObjectTaskConfig cfg;
    const std::size_t half = cfg.size / 2;
    for (bool reversed : {false, true}) {
        ObjectTaskConfig phase = cfg;
        phase.reversed = reversed;
        LabeledImageSet data = gen_objects(40, phase, 72);
        for (std::size_t i = 0; i < data.count; ++i) {
            const auto img = data.image(i);
            std::size_t min_r = cfg.size, max_r = 0;
            for (std::size_t px = 0; px < img.size(); ++px)
                if (img[px] != 0.0) {
                    min_r = std::min(min_r, px / cfg.size);
                    max_r = std::max(max_r, px / cfg.size);
                }
            const bool expect_lower = reversed ? data.labels[i] == 0 : data.labels[i] == 1;
            if (expect_lower)
                CHECK(min_r >= half);
            else
                CHECK(max_r < half);
        }
    }
}

TEST_CASE("gen_objects: centroid rows separate the classes, oppositely per phase") {
    ObjectTaskConfig cfg;
    double centroid[2][2] = {{0.0, 0.0}, {0.0, 0.0}};  // [phase][label]
    for (int phase = 0; phase < 2; ++phase) {
        ObjectTaskConfig pc = cfg;
        pc.reversed = phase == 1;
        LabeledImageSet data = gen_objects(50, pc, 73);
        std::size_t counts[2] = {0, 0};
        for (std::size_t i = 0; i < data.count; ++i) {
            const auto img = data.image(i);
            double wsum = 0.0, total = 0.0;
            for (std::size_t px = 0; px < img.size(); ++px)
                if (img[px] != 0.0) {
                    wsum += static_cast<double>(px / cfg.size);
                    total += 1.0;
                }
            centroid[phase][data.labels[i]] += wsum / total;
            counts[data.labels[i]]++;
        }
        centroid[phase][0] /= static_cast<double>(counts[0]);
        centroid[phase][1] /= static_cast<double>(counts[1]);
    }
    CHECK(centroid[0][0] < centroid[0][1]);  // close above, far below
    CHECK(centroid[1][0] > centroid[1][1]);  // reversed phase flips it
}

TEST_CASE("gen_objects: determinism and validation") {
    ObjectTaskConfig cfg;
    LabeledImageSet a = gen_objects(12, cfg, 74);
    LabeledImageSet b = gen_objects(12, cfg, 74);
    CHECK(a.pixels == b.pixels);

    ObjectTaskConfig tiny = cfg;
    tiny.size = 5;  // 2 * block = 6 > 5
    CHECK_THROWS_AS(gen_objects(4, tiny, 1), ValidationError);

    ObjectTaskConfig bands = cfg;
    bands.close_max = 14.0;  // overlaps far_min = 13
    CHECK_THROWS_AS(gen_objects(4, bands, 1), ValidationError);

    ObjectTaskConfig far = cfg;
    far.far_min = 30.0;  // beyond any placement inside one half of a 28-image
    far.far_max = 40.0;
    CHECK_THROWS_AS(gen_objects(4, far, 1), ValidationError);

    CHECK_THROWS_AS(gen_objects(0, cfg, 1), ValidationError);
}

// ---- Splits -------------------------------------------------------------------------

TEST_CASE("split_fractions: deterministic disjoint cover with exact sizes") {
    const std::vector<double> fr = {0.6, 0.4};
    auto parts = split_fractions(100, fr, 5);
    REQUIRE(parts.size() == 2);
    CHECK(parts[0].size() == 60);
    CHECK(parts[1].size() == 40);
    check_partition(parts, 100);

    auto again = split_fractions(100, fr, 5);
    CHECK(parts == again);
    auto other = split_fractions(100, fr, 6);
    CHECK(parts != other);
}

TEST_CASE("split_fractions: largest-remainder rounding spends every item") {
    const std::vector<double> fr = {1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0};
    auto parts = split_fractions(10, fr, 7);
    std::vector<std::size_t> sizes;
    for (const auto& p : parts) sizes.push_back(p.size());
    std::sort(sizes.begin(), sizes.end());
    CHECK(sizes == std::vector<std::size_t>{3, 3, 4});
    check_partition(parts, 10);
}

TEST_CASE("split_fractions_stratified: label mix within one item per subset") {
    std::vector<int> labels(100, 0);
    for (std::size_t i = 0; i < 30; ++i) labels[i * 3] = 1;  // 30 positives, scattered
    const std::vector<double> fr = {0.5, 0.5};
    auto parts = split_fractions_stratified(labels, fr, 9);
    check_partition(parts, 100);
    for (const auto& p : parts) {
        CHECK(std::is_sorted(p.begin(), p.end()));
        std::size_t ones = 0;
        for (std::size_t i : p) ones += static_cast<std::size_t>(labels[i]);
        CHECK(ones >= 14);
        CHECK(ones <= 16);
        CHECK(p.size() == 50);
    }
}

TEST_CASE("split_folds: near-equal fold sizes, stratified variant keeps the mix") {
    auto folds = split_folds(17, 4, 3);
    REQUIRE(folds.size() == 4);
    std::size_t mn = 17, mx = 0;
    for (const auto& f : folds) {
        mn = std::min(mn, f.size());
        mx = std::max(mx, f.size());
    }
    CHECK(mx - mn <= 1);
    check_partition(folds, 17);

    std::vector<int> labels(40);
    for (std::size_t i = 0; i < 40; ++i) labels[i] = i % 2;
    auto sf = split_folds_stratified(labels, 4, 3);
    check_partition(sf, 40);
    for (const auto& f : sf) {
        std::size_t ones = 0;
        for (std::size_t i : f) ones += static_cast<std::size_t>(labels[i]);
        CHECK(f.size() == 10);
        CHECK(ones == 5);
    }
}

TEST_CASE("splits: validation") {
    CHECK_THROWS_AS(split_fractions(10, std::vector<double>{}, 1), ValidationError);
    CHECK_THROWS_AS(split_fractions(10, std::vector<double>{0.5, -0.5, 1.0}, 1), ValidationError);
    CHECK_THROWS_AS(split_fractions(10, std::vector<double>{0.5, 0.4}, 1), ValidationError);
    CHECK_THROWS_AS(split_fractions(1, std::vector<double>{0.5, 0.5}, 1), ValidationError);
    CHECK_THROWS_AS(split_fractions(10, std::vector<double>{0.99, 0.01}, 1), ValidationError);
    CHECK_THROWS_AS(split_folds(10, 1, 1), ValidationError);
    CHECK_THROWS_AS(split_folds(3, 4, 1), ValidationError);
    const std::vector<int> bad_labels = {0, 1, 2, 0};
    CHECK_THROWS_AS(split_fractions_stratified(bad_labels, std::vector<double>{0.5, 0.5}, 1),
                    ValidationError);
}

// ---- Concatenation ---------------------------------------------------------------------

TEST_CASE("concat: appends images and labels, rejects mismatched geometry") {
    PatternTaskConfig cfg;
    cfg.size = 8;
    LabeledImageSet a = gen_pattern(5, cfg, 1);
    LabeledImageSet b = gen_pattern(3, cfg, 2);
    LabeledImageSet ab = concat(a, b);
    CHECK(ab.count == 8);
    CHECK(ab.labels.size() == 8);
    CHECK(ab.pixels.size() == 8 * 64);
    CHECK(std::equal(a.pixels.begin(), a.pixels.end(), ab.pixels.begin()));
    CHECK(std::equal(b.pixels.begin(), b.pixels.end(), ab.pixels.begin() + a.pixels.size()));
    CHECK(ab.labels[5] == b.labels[0]);

    PatternTaskConfig other = cfg;
    other.size = 16;
    LabeledImageSet c = gen_pattern(2, other, 3);
    CHECK_THROWS_AS(concat(a, c), DimensionError);
}
