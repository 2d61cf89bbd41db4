#include "svit/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>

#include "svit/errors.hpp"
#include "svit/rng.hpp"

namespace svit {

Tensor bce_loss(Graph& g, const Tensor& logit, int label) {
    return bce_with_logits(g, logit, label);
}

Tensor focal_loss(Graph& g, const Tensor& logit, int label, double gamma, double alpha) {
    return focal_with_logits(g, logit, label, gamma, alpha);
}

Adam::Adam(std::vector<Param*> params, const AdamConfig& cfg) : params_(std::move(params)), cfg_(cfg) {
    if (cfg_.lr < 0.0 || cfg_.beta1 < 0.0 || cfg_.beta1 >= 1.0 || cfg_.beta2 < 0.0 ||
        cfg_.beta2 >= 1.0 || cfg_.eps <= 0.0)
        throw ValidationError("adam: invalid hyperparameters");
    m_.reserve(params_.size());
    v_.reserve(params_.size());
    for (Param* p : params_) {
        m_.emplace_back(p->size(), 0.0);
        v_.emplace_back(p->size(), 0.0);
    }
}

void Adam::step() {
    ++t_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (std::size_t pi = 0; pi < params_.size(); ++pi) {
        Param* p = params_[pi];
        const std::vector<double>& grad = p->grad();
        std::vector<double>& vals = p->values();
        double* m = m_[pi].data();
        double* v = v_[pi].data();
        for (std::size_t i = 0; i < grad.size(); ++i) {
            const double gi = grad[i];
            if (!std::isfinite(gi))
                throw NumericError("adam: non-finite gradient in parameter '" + p->name() + "'");
            m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * gi;
            v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * gi * gi;
            const double mhat = m[i] / bc1;
            const double vhat = v[i] / bc2;
            vals[i] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
        }
    }
}

void Adam::zero_grad() {
    for (Param* p : params_) p->zero_grad();
}

ViTClassifier build_model(const ModelSpec& spec, const LabeledImageSet& data,
                          std::span<const std::size_t> train_idx, std::uint64_t seed, double tau) {
    if (train_idx.empty()) throw ValidationError("build_model: empty training index set");
    for (std::size_t i : train_idx)
        if (i >= data.count)
            throw ValidationError("build_model: training index " + std::to_string(i) +
                                  " out of range");
    if (spec.variant == Variant::kSpatial)
        return ViTClassifier(spec, data.height, data.width, seed);

    const std::size_t m = data.pixels_per_image();
    switch (spec.basis_kind) {
        case BasisKind::kPca: {
            Mat rows(train_idx.size(), m);
            for (std::size_t i = 0; i < train_idx.size(); ++i) {
                auto img = data.image(train_idx[i]);
                std::copy(img.begin(), img.end(), rows.row(i));
            }
            // A PCA basis cannot have more components than min(N-1, m); small
            // training sets clamp n and the model shrinks with it.
            ModelSpec eff = spec;
            eff.n_tokens = std::min(spec.n_tokens, std::min(train_idx.size() - 1, m));
            if (eff.n_tokens == 0)
                throw ValidationError("build_model: training set too small for any PCA component");
            return ViTClassifier(eff, fit_pca(rows, eff.n_tokens, data.height, data.width), seed);
        }
        case BasisKind::kFourier:
            return ViTClassifier(spec, build_fourier(data.height, data.width, spec.n_tokens), seed);
        case BasisKind::kLaplacian:
            return ViTClassifier(
                spec, build_laplacian_grid(data.height, data.width, tau, spec.n_tokens), seed);
    }
    throw ValidationError("build_model: unknown basis kind");
}

TrainResult train(ViTClassifier& model, const LabeledImageSet& data,
                  std::span<const std::size_t> train_idx, const TrainConfig& cfg,
                  bool measure_time) {
    if (cfg.epochs == 0) throw ValidationError("train: epochs must be positive");
    if (cfg.batch_size == 0) throw ValidationError("train: batch size must be positive");
    if (train_idx.empty()) throw ValidationError("train: empty training index set");
    const auto t0 = std::chrono::steady_clock::now();

    // Tokenize/patch once; the loop touches only dense arrays.
    const std::size_t ps = model.prepared_size();
    std::vector<double> prepared(train_idx.size() * ps);
    std::vector<int> labels(train_idx.size());
    for (std::size_t i = 0; i < train_idx.size(); ++i) {
        const std::vector<double> p = model.prepare(data.image(train_idx[i]));
        std::copy(p.begin(), p.end(), prepared.begin() + i * ps);
        labels[i] = data.labels[train_idx[i]];
    }

    Adam adam(model.params(), AdamConfig{cfg.lr, 0.9, 0.999, 1e-8});
    Graph g;
    std::vector<std::size_t> order(train_idx.size());
    std::iota(order.begin(), order.end(), std::size_t{0});

    TrainResult res;
    res.history.reserve(cfg.epochs);
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        if (cfg.shuffle) {
            std::iota(order.begin(), order.end(), std::size_t{0});
            Rng rng(derive_seed(cfg.seed, (stream::kShuffle << 32) ^ epoch));
            rng.shuffle(order);
        }
        double loss_sum = 0.0;
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            const std::size_t bs = std::min(cfg.batch_size, order.size() - start);
            adam.zero_grad();
            for (std::size_t k = start; k < start + bs; ++k) {
                const std::size_t row = order[k];
                g.reset();
                Tensor logit = model.forward_prepared(g, {prepared.data() + row * ps, ps});
                Tensor loss =
                    cfg.loss == LossKind::kBce
                        ? bce_loss(g, logit, labels[row])
                        : focal_loss(g, logit, labels[row], cfg.focal_gamma, cfg.focal_alpha);
                loss_sum += loss.value();
                // Batch-mean reduction: each sample contributes grad/bs.
                g.backward(scale(g, loss, 1.0 / static_cast<double>(bs)));
            }
            adam.step();
        }
        const double mean_loss = loss_sum / static_cast<double>(order.size());
        if (!std::isfinite(mean_loss))
            throw NumericError("train: loss diverged (NaN/inf) at epoch " + std::to_string(epoch));
        res.history.push_back({epoch, mean_loss});
    }
    if (measure_time) {
        const auto t1 = std::chrono::steady_clock::now();
        res.train_seconds = std::chrono::duration<double>(t1 - t0).count();
    }
    return res;
}

std::vector<double> predict_proba(ViTClassifier& model, const LabeledImageSet& data,
                                  std::span<const std::size_t> idx) {
    std::vector<double> probs;
    probs.reserve(idx.size());
    Graph g;
    for (std::size_t i : idx) {
        g.reset();
        const double z = model.forward(g, data.image(i)).value();
        probs.push_back(1.0 / (1.0 + std::exp(-z)));
    }
    return probs;
}

void write_history_csv(const std::string& path, const std::vector<EpochRecord>& history,
                       const std::string& config_line) {
    std::ofstream out(path);
    if (!out) throw ValidationError("write_history_csv: cannot open " + path);
    if (!config_line.empty()) out << "# config: " << config_line << "\n";
    out << "epoch,train_loss\n";
    char buf[64];
    for (const EpochRecord& r : history) {
        std::snprintf(buf, sizeof(buf), "%zu,%.8f\n", r.epoch, r.train_loss);
        out << buf;
    }
}

}  // namespace svit
