#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#define DOCTEST_CONFIG_SUPER_FAST_ASSERTS
#include <doctest.h>

#include <cmath>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "svit/train.hpp"
#include "test_util.hpp"

using namespace svit;

namespace {

ModelSpec small_spec() {
    ModelSpec spec;
    spec.variant = Variant::kSpectral;
    spec.basis_kind = BasisKind::kPca;
    spec.n_tokens = 6;
    spec.d_e = 8;
    spec.d_ff = 16;
    spec.heads = 2;
    spec.layers = 1;
    return spec;
}

std::vector<std::size_t> iota_idx(std::size_t count) {
    std::vector<std::size_t> idx(count);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    return idx;
}

}  // namespace

// ---- Optimizer -------------------------------------------------------------------

TEST_CASE("adam: first step with bias correction, hand computed") {
    Param w("w", 1, 1, {1.0});
    Adam adam({&w}, AdamConfig{0.1, 0.9, 0.999, 1e-8});
    CHECK(adam.t() == 0);
    w.grad()[0] = 0.5;
    adam.step();
    CHECK(adam.t() == 1);
    // mhat = g, vhat = g^2 at t=1, so the step is lr * g / (|g| + eps).
    const double want = 1.0 - 0.1 * 0.5 / (0.5 + 1e-8);
    CHECK(w.values()[0] == doctest::Approx(want).epsilon(1e-15));
}

TEST_CASE("adam: the first step is invariant to gradient scale") {
    Param a("a", 1, 1, {1.0});
    Param b("b", 1, 1, {1.0});
    Adam oa({&a}, AdamConfig{0.05, 0.9, 0.999, 1e-8});
    Adam ob({&b}, AdamConfig{0.05, 0.9, 0.999, 1e-8});
    a.grad()[0] = 0.3;
    b.grad()[0] = 3000.0;  // same direction, 10^4 times larger
    oa.step();
    ob.step();
    CHECK(a.values()[0] == doctest::Approx(b.values()[0]).epsilon(1e-6));
}

TEST_CASE("adam: zero_grad clears accumulation and bad gradients abort") {
    Param w("embed.w_phi", 1, 2, {1.0, 2.0});
    Adam adam({&w}, AdamConfig{});
    w.grad()[0] = 1.0;
    adam.zero_grad();
    CHECK(w.grad()[0] == 0.0);

    w.grad()[1] = std::numeric_limits<double>::quiet_NaN();
    bool threw = false;
    try {
        adam.step();
    } catch (const NumericError& e) {
        threw = true;
        CHECK(std::string(e.what()).find("embed.w_phi") != std::string::npos);
    }
    CHECK(threw);

    CHECK_THROWS_AS(Adam({&w}, AdamConfig{-0.1, 0.9, 0.999, 1e-8}), ValidationError);
    CHECK_THROWS_AS(Adam({&w}, AdamConfig{0.1, 1.0, 0.999, 1e-8}), ValidationError);
    CHECK_THROWS_AS(Adam({&w}, AdamConfig{0.1, 0.9, 0.999, 0.0}), ValidationError);
}

// ---- Loss wrappers ------------------------------------------------------------------

TEST_CASE("losses: closed-form anchors and extreme-logit stability") {
    Graph g;
    Tensor z0 = g.input(1, 1, std::vector<double>{0.0});
    CHECK(bce_loss(g, z0, 1).value() == doctest::Approx(std::log(2.0)).epsilon(1e-15));
    CHECK(bce_loss(g, z0, 0).value() == doctest::Approx(std::log(2.0)).epsilon(1e-15));

    Tensor z20 = g.input(1, 1, std::vector<double>{20.0});
    CHECK(bce_loss(g, z20, 1).value() == doctest::Approx(std::log1p(std::exp(-20.0))).epsilon(1e-12));

    Tensor zbig = g.input(1, 1, std::vector<double>{500.0});
    CHECK(bce_loss(g, zbig, 0).value() == doctest::Approx(500.0).epsilon(1e-12));
    Tensor zneg = g.input(1, 1, std::vector<double>{-500.0});
    CHECK(bce_loss(g, zneg, 1).value() == doctest::Approx(500.0).epsilon(1e-12));

    // focal(0, 1; gamma=2, alpha=0.25) = 0.25 * (1/2)^2 * ln 2.
    CHECK(focal_loss(g, z0, 1, 2.0, 0.25).value() ==
          doctest::Approx(0.0625 * std::log(2.0)).epsilon(1e-14));
    // gamma = 0, alpha = 0.5 halves the BCE for any logit and label.
    for (double z : {-3.0, -0.7, 0.0, 1.3, 8.0})
        for (int label : {0, 1}) {
            Tensor t = g.input(1, 1, std::vector<double>{z});
            CHECK(focal_loss(g, t, label, 0.0, 0.5).value() ==
                  doctest::Approx(0.5 * bce_loss(g, t, label).value()).epsilon(1e-12));
        }
}

// ---- build_model ----------------------------------------------------------------------

TEST_CASE("build_model: PCA token count shrinks with tiny training sets") {
    PatternTaskConfig cfg;
    cfg.size = 8;
    cfg.cell = 4;
    LabeledImageSet data = gen_pattern(5, cfg, 11);
    ModelSpec spec = small_spec();
    spec.n_tokens = 16;  // only 5 training rows -> at most 4 components
    ViTClassifier model = build_model(spec, data, iota_idx(5), 1);
    CHECK(model.token_count() == 4);
    CHECK(model.basis() != nullptr);
    CHECK(model.basis()->n == 4);
    CHECK(model.spec().n_tokens == 4);
}

TEST_CASE("build_model: basis comes from exactly the training rows") {
    PatternTaskConfig cfg;
    cfg.size = 8;
    LabeledImageSet data = gen_pattern(30, cfg, 12);
    ModelSpec spec = small_spec();
    const std::vector<std::size_t> first10 = iota_idx(10);
    ViTClassifier m1 = build_model(spec, data, first10, 1);
    Mat rows(10, 64);
    for (std::size_t i = 0; i < 10; ++i) {
        auto img = data.image(i);
        std::copy(img.begin(), img.end(), rows.row(i));
    }
    SpectralBasis direct = fit_pca(rows, 6, 8, 8);
    CHECK(m1.basis()->vectors.v == direct.vectors.v);
    CHECK(m1.basis()->mean == direct.mean);
}

TEST_CASE("build_model: fourier and laplacian variants, and index validation") {
    PatternTaskConfig cfg;
    cfg.size = 8;
    LabeledImageSet data = gen_pattern(12, cfg, 13);
    ModelSpec spec = small_spec();
    spec.basis_kind = BasisKind::kFourier;
    ViTClassifier fm = build_model(spec, data, iota_idx(12), 1);
    CHECK(fm.basis()->kind == BasisKind::kFourier);

    spec.basis_kind = BasisKind::kLaplacian;
    ViTClassifier lm = build_model(spec, data, iota_idx(12), 1, /*tau=*/2.0);
    CHECK(lm.basis()->kind == BasisKind::kLaplacian);
    CHECK(lm.basis()->tau == 2.0);

    ModelSpec st;
    st.variant = Variant::kSpatial;
    st.patch_size = 4;
    st.d_e = 8;
    st.d_ff = 16;
    st.heads = 2;
    st.layers = 1;
    ViTClassifier sm = build_model(st, data, iota_idx(12), 1);
    CHECK(sm.token_count() == 4);

    CHECK_THROWS_AS(build_model(spec, data, std::vector<std::size_t>{}, 1), ValidationError);
    CHECK_THROWS_AS(build_model(spec, data, std::vector<std::size_t>{12}, 1), ValidationError);
}

// ---- Training ---------------------------------------------------------------------------

TEST_CASE("train: loss falls on an easy task and the history is well-formed") {
    PatternTaskConfig cfg;
    cfg.size = 8;
    cfg.snr = 4.0;
    LabeledImageSet data = gen_pattern(40, cfg, 21);
    ModelSpec spec = small_spec();
    ViTClassifier model = build_model(spec, data, iota_idx(40), 2);
    TrainConfig tc;
    tc.epochs = 12;
    tc.batch_size = 8;
    tc.lr = 2e-3;
    tc.seed = 3;
    TrainResult res = train(model, data, iota_idx(40), tc);
    REQUIRE(res.history.size() == 12);
    for (std::size_t e = 0; e < 12; ++e) {
        CHECK(res.history[e].epoch == e);
        CHECK(std::isfinite(res.history[e].train_loss));
        CHECK(res.history[e].train_loss > 0.0);
    }
    CHECK(res.history.back().train_loss < res.history.front().train_loss);
    CHECK(res.train_seconds == 0.0);  // timing was not requested
}

TEST_CASE("train: bitwise deterministic given the same seeds") {
    PatternTaskConfig cfg;
    cfg.size = 8;
    LabeledImageSet data = gen_pattern(24, cfg, 22);
    ModelSpec spec = small_spec();
    TrainConfig tc;
    tc.epochs = 3;
    tc.batch_size = 4;
    tc.seed = 7;

    ViTClassifier m1 = build_model(spec, data, iota_idx(24), 5);
    ViTClassifier m2 = build_model(spec, data, iota_idx(24), 5);
    TrainResult r1 = train(m1, data, iota_idx(24), tc);
    TrainResult r2 = train(m2, data, iota_idx(24), tc);
    for (std::size_t e = 0; e < 3; ++e)
        CHECK(r1.history[e].train_loss == r2.history[e].train_loss);
    std::vector<Param*> p1 = m1.params();
    std::vector<Param*> p2 = m2.params();
    for (std::size_t i = 0; i < p1.size(); ++i) CHECK(p1[i]->values() == p2[i]->values());
    CHECK(predict_proba(m1, data, iota_idx(24)) == predict_proba(m2, data, iota_idx(24)));
}

TEST_CASE("train: focal objective runs and timing is measured on request") {
    PatternTaskConfig cfg;
    cfg.size = 8;
    LabeledImageSet data = gen_pattern(16, cfg, 23);
    ModelSpec spec = small_spec();
    ViTClassifier model = build_model(spec, data, iota_idx(16), 6);
    TrainConfig tc;
    tc.epochs = 2;
    tc.batch_size = 4;
    tc.loss = LossKind::kFocal;
    TrainResult res = train(model, data, iota_idx(16), tc, /*measure_time=*/true);
    for (const EpochRecord& r : res.history) CHECK(std::isfinite(r.train_loss));
    CHECK(res.train_seconds > 0.0);
}

TEST_CASE("train: configuration validation") {
    PatternTaskConfig cfg;
    cfg.size = 8;
    LabeledImageSet data = gen_pattern(8, cfg, 24);
    ModelSpec spec = small_spec();
    ViTClassifier model = build_model(spec, data, iota_idx(8), 1);
    TrainConfig tc;
    tc.epochs = 0;
    CHECK_THROWS_AS(train(model, data, iota_idx(8), tc), ValidationError);
    tc.epochs = 1;
    tc.batch_size = 0;
    CHECK_THROWS_AS(train(model, data, iota_idx(8), tc), ValidationError);
    tc.batch_size = 4;
    CHECK_THROWS_AS(train(model, data, std::vector<std::size_t>{}, tc), ValidationError);
}

TEST_CASE("predict_proba: sigmoid of the forward logit, in the open unit interval") {
    PatternTaskConfig cfg;
    cfg.size = 8;
    LabeledImageSet data = gen_pattern(10, cfg, 25);
    ModelSpec spec = small_spec();
    ViTClassifier model = build_model(spec, data, iota_idx(10), 9);
    const std::vector<double> probs = predict_proba(model, data, iota_idx(10));
    REQUIRE(probs.size() == 10);
    for (std::size_t i = 0; i < 10; ++i) {
        CHECK(probs[i] > 0.0);
        CHECK(probs[i] < 1.0);
        Graph g;
        const double z = model.forward(g, data.image(i)).value();
        CHECK(probs[i] == doctest::Approx(1.0 / (1.0 + std::exp(-z))).epsilon(1e-15));
    }
}

// ---- History files ------------------------------------------------------------------------

TEST_CASE("write_history_csv: header comment and fixed-point rows") {
    const std::string dir = tu::fresh_dir("history_csv");
    std::vector<EpochRecord> hist = {{0, 0.5}, {1, 0.69314718055994531}};
    write_history_csv(dir + "/h.csv", hist, "lr=0.001");
    CHECK(tu::read_file(dir + "/h.csv") ==
          "# config: lr=0.001\nepoch,train_loss\n0,0.50000000\n1,0.69314718\n");
    write_history_csv(dir + "/bare.csv", hist, "");
    CHECK(tu::read_file(dir + "/bare.csv") ==
          "epoch,train_loss\n0,0.50000000\n1,0.69314718\n");
}
