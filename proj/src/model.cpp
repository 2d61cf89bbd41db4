#include "svit/model.hpp"

#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

#include "svit/errors.hpp"
#include "svit/rng.hpp"

namespace svit {

namespace {

constexpr double kInitStd = 0.02;
// Positional embeddings start at a larger scale (matching the embedder's) so
// attention can tell patches apart from the first step.
constexpr double kPosInitStd = 0.5;

std::vector<double> normal_init(std::size_t count, Rng& rng, double std = kInitStd) {
    std::vector<double> v(count);
    for (double& x : v) x = rng.normal(0.0, std);
    return v;
}

std::vector<double> const_init(std::size_t count, double value) {
    return std::vector<double>(count, value);
}

}  // namespace

std::string variant_name(Variant v) {
    return v == Variant::kSpectral ? "spectral" : "spatial";
}

Mat patchify(std::span<const double> image, std::size_t height, std::size_t width, std::size_t p) {
    if (p == 0 || height % p != 0 || width % p != 0)
        throw ValidationError("patchify: patch size " + std::to_string(p) +
                              " does not divide image " + std::to_string(height) + "x" +
                              std::to_string(width));
    if (image.size() != height * width)
        throw DimensionError("patchify: image has " + std::to_string(image.size()) +
                             " pixels, expected " + std::to_string(height * width));
    const std::size_t ph = height / p;
    const std::size_t pw = width / p;
    Mat out(ph * pw, p * p);
    for (std::size_t br = 0; br < ph; ++br)
        for (std::size_t bc = 0; bc < pw; ++bc) {
            double* row = out.row(br * pw + bc);
            for (std::size_t r = 0; r < p; ++r)
                for (std::size_t c = 0; c < p; ++c)
                    row[r * p + c] = image[(br * p + r) * width + (bc * p + c)];
        }
    return out;
}

AttentionResult attention(Graph& g, const Tensor& q, const Tensor& k, const Tensor& v) {
    if (q.cols() != k.cols() || q.rows() != k.rows() || k.rows() != v.rows())
        throw DimensionError("attention: q " + std::to_string(q.rows()) + "x" +
                             std::to_string(q.cols()) + ", k " + std::to_string(k.rows()) + "x" +
                             std::to_string(k.cols()) + ", v " + std::to_string(v.rows()) + "x" +
                             std::to_string(v.cols()));
    const std::size_t d_k = q.cols();
    if (d_k == 0) throw ValidationError("attention: d_k must be positive");
    Tensor scores = scale(g, matmul(g, q, transpose(g, k)), 1.0 / std::sqrt(static_cast<double>(d_k)));
    AttentionResult res;
    res.weights = softmax_rows(g, scores);
    res.output = matmul(g, res.weights, v);
    return res;
}

Tensor attention_weights(Graph& g, const Tensor& h, const Tensor& w_q, const Tensor& w_k) {
    if (w_q.rows() != h.cols() || w_k.rows() != h.cols() || w_q.cols() != w_k.cols())
        throw DimensionError("attention_weights: h cols " + std::to_string(h.cols()) +
                             ", w_q " + std::to_string(w_q.rows()) + "x" + std::to_string(w_q.cols()) +
                             ", w_k " + std::to_string(w_k.rows()) + "x" + std::to_string(w_k.cols()));
    const double d_k = static_cast<double>(w_q.cols());
    Tensor q = matmul(g, h, w_q);
    Tensor k = matmul(g, h, w_k);
    return softmax_rows(g, scale(g, matmul(g, q, transpose(g, k)), 1.0 / std::sqrt(d_k)));
}

Tensor contextualize(Graph& g, const Tensor& h, const Tensor& alpha, const Tensor& w_v) {
    if (alpha.rows() != h.rows() || alpha.cols() != h.rows() || w_v.rows() != h.cols())
        throw DimensionError("contextualize: h " + std::to_string(h.rows()) + "x" +
                             std::to_string(h.cols()) + ", alpha " + std::to_string(alpha.rows()) +
                             "x" + std::to_string(alpha.cols()));
    return matmul(g, alpha, matmul(g, h, w_v));
}

CostBreakdown count_cost(std::size_t n_tokens, std::size_t m, std::size_t d_e,
                         std::size_t layers) {
    CostBreakdown c;
    c.cost_spec = static_cast<std::uint64_t>(n_tokens) * m;
    c.cost_embed = static_cast<std::uint64_t>(n_tokens) * d_e;
    c.cost_trans_per_layer = 3ull * n_tokens * d_e * d_e + 2ull * n_tokens * n_tokens * d_e;
    c.cost_total = c.cost_spec + c.cost_embed + layers * c.cost_trans_per_layer;
    return c;
}

std::uint64_t measured_attention_multiplies(std::size_t n_tokens, std::size_t d_e,
                                            std::size_t heads, std::uint64_t seed) {
    if (heads == 0 || d_e % heads != 0)
        throw ValidationError("measured_attention_multiplies: heads must divide d_e");
    Rng rng(derive_seed(seed, stream::kAudit));
    std::vector<double> hv = normal_init(n_tokens * d_e, rng);
    std::vector<double> wq = normal_init(d_e * d_e, rng);
    std::vector<double> wk = normal_init(d_e * d_e, rng);
    std::vector<double> wv = normal_init(d_e * d_e, rng);

    Graph g;
    Tensor h = g.input(n_tokens, d_e, hv);
    const std::size_t d_kh = d_e / heads;
    multiply_count_reset();
    multiply_count_enable(true);
    Tensor q = matmul(g, h, g.input(d_e, d_e, wq));
    Tensor k = matmul(g, h, g.input(d_e, d_e, wk));
    Tensor v = matmul(g, h, g.input(d_e, d_e, wv));
    for (std::size_t hd = 0; hd < heads; ++hd) {
        Tensor qh = slice_cols(g, q, hd * d_kh, d_kh);
        Tensor kh = slice_cols(g, k, hd * d_kh, d_kh);
        Tensor vh = slice_cols(g, v, hd * d_kh, d_kh);
        Tensor alpha = softmax_rows(
            g, scale(g, matmul(g, qh, transpose(g, kh)), 1.0 / std::sqrt(static_cast<double>(d_kh))));
        (void)matmul(g, alpha, vh);
    }
    multiply_count_enable(false);
    return multiply_count();
}

// ---- ViTClassifier ----------------------------------------------------------

ViTClassifier::ViTClassifier(const ModelSpec& spec, SpectralBasis basis, std::uint64_t seed)
    : spec_(spec), basis_(std::move(basis)) {
    if (spec_.variant != Variant::kSpectral)
        throw ValidationError("model: basis constructor requires the spectral variant");
    if (basis_->n != spec_.n_tokens)
        throw DimensionError("model: basis has n = " + std::to_string(basis_->n) +
                             ", spec expects n_tokens = " + std::to_string(spec_.n_tokens));
    if (basis_->kind != spec_.basis_kind)
        throw ValidationError("model: basis kind " + basis_kind_name(basis_->kind) +
                              " does not match spec " + basis_kind_name(spec_.basis_kind));
    height_ = basis_->height;
    width_ = basis_->width;
    tokens_ = spec_.n_tokens;
    build(seed);
}

ViTClassifier::ViTClassifier(const ModelSpec& spec, std::size_t height, std::size_t width,
                             std::uint64_t seed)
    : spec_(spec), height_(height), width_(width) {
    if (spec_.variant != Variant::kSpatial)
        throw ValidationError("model: height/width constructor requires the spatial variant");
    if (spec_.patch_size == 0 || height % spec_.patch_size != 0 || width % spec_.patch_size != 0)
        throw ValidationError("model: patch size " + std::to_string(spec_.patch_size) +
                              " does not divide image " + std::to_string(height) + "x" +
                              std::to_string(width));
    tokens_ = (height / spec_.patch_size) * (width / spec_.patch_size);
    spec_.n_tokens = tokens_;
    build(seed);
}

void ViTClassifier::build(std::uint64_t seed) {
    if (spec_.d_e == 0 || spec_.d_ff == 0 || spec_.layers == 0)
        throw ValidationError("model: d_e, d_ff and layers must be positive");
    if (spec_.heads == 0 || spec_.d_e % spec_.heads != 0)
        throw ValidationError("model: heads = " + std::to_string(spec_.heads) +
                              " must divide d_e = " + std::to_string(spec_.d_e));
    init_seed_ = seed;
    const std::size_t d = spec_.d_e;

    if (spec_.variant == Variant::kSpectral) {
        EmbedderConfig ec{spec_.n_tokens, d, spec_.shared_embed, spec_.embed_bias};
        embedder_ = std::make_unique<SpectralEmbedder>(ec, basis_->hierarchy_weights, seed);
    } else {
        Rng rng(derive_seed(seed, stream::kInit + 100));
        const std::size_t pp = spec_.patch_size * spec_.patch_size;
        patch_w_ = std::make_unique<Param>("patch.w", pp, d, normal_init(pp * d, rng));
        patch_b_ = std::make_unique<Param>("patch.b", 1, d, const_init(d, 0.0));
        patch_pos_ = std::make_unique<Param>("patch.e_pos", tokens_, d,
                                             normal_init(tokens_ * d, rng, kPosInitStd));
    }

    Rng rng(derive_seed(seed, stream::kInit + 200));
    blocks_.resize(spec_.layers);
    for (std::size_t l = 0; l < spec_.layers; ++l) {
        Block& b = blocks_[l];
        const std::string pfx = "block" + std::to_string(l) + ".";
        b.ln1_g = std::make_unique<Param>(pfx + "ln1.gamma", 1, d, const_init(d, 1.0));
        b.ln1_b = std::make_unique<Param>(pfx + "ln1.beta", 1, d, const_init(d, 0.0));
        b.w_q = std::make_unique<Param>(pfx + "attn.w_q", d, d, normal_init(d * d, rng));
        b.w_k = std::make_unique<Param>(pfx + "attn.w_k", d, d, normal_init(d * d, rng));
        b.w_v = std::make_unique<Param>(pfx + "attn.w_v", d, d, normal_init(d * d, rng));
        b.w_o = std::make_unique<Param>(pfx + "attn.w_o", d, d, normal_init(d * d, rng));
        b.ln2_g = std::make_unique<Param>(pfx + "ln2.gamma", 1, d, const_init(d, 1.0));
        b.ln2_b = std::make_unique<Param>(pfx + "ln2.beta", 1, d, const_init(d, 0.0));
        b.w1 = std::make_unique<Param>(pfx + "ffn.w1", d, spec_.d_ff,
                                       normal_init(d * spec_.d_ff, rng));
        b.b1 = std::make_unique<Param>(pfx + "ffn.b1", 1, spec_.d_ff, const_init(spec_.d_ff, 0.0));
        b.w2 = std::make_unique<Param>(pfx + "ffn.w2", spec_.d_ff, d,
                                       normal_init(spec_.d_ff * d, rng));
        b.b2 = std::make_unique<Param>(pfx + "ffn.b2", 1, d, const_init(d, 0.0));
    }
    lnf_g_ = std::make_unique<Param>("final.ln.gamma", 1, d, const_init(d, 1.0));
    lnf_b_ = std::make_unique<Param>("final.ln.beta", 1, d, const_init(d, 0.0));
    head_w_ = std::make_unique<Param>("head.w", d, 1, normal_init(d, rng));
    head_b_ = std::make_unique<Param>("head.b", 1, 1, const_init(1, 0.0));
    if (spec_.pooling == Pooling::kClassToken)
        cls_ = std::make_unique<Param>("cls.token", 1, d, normal_init(d, rng));
}

std::vector<double> ViTClassifier::prepare(std::span<const double> image) const {
    if (spec_.variant == Variant::kSpectral) {
        return tokenize(*basis_, image).coefficients;
    }
    Mat patches = patchify(image, height_, width_, spec_.patch_size);
    return std::move(patches.v);
}

std::size_t ViTClassifier::prepared_size() const {
    return spec_.variant == Variant::kSpectral ? tokens_
                                               : tokens_ * spec_.patch_size * spec_.patch_size;
}

Tensor ViTClassifier::encode(Graph& g, Tensor x, std::vector<Mat>* attn) const {
    const std::size_t d_kh = spec_.d_e / spec_.heads;
    const double inv_sqrt_dk = 1.0 / std::sqrt(static_cast<double>(d_kh));
    if (cls_) {
        // Prepend the learned class token as row 0 (stack via transposes).
        Tensor parts[2] = {transpose(g, cls_->tensor()), transpose(g, x)};
        x = transpose(g, concat_cols(g, parts));
    }
    std::vector<Tensor> heads(spec_.heads);
    for (const Block& b : blocks_) {
        Tensor a = layer_norm(g, x, b.ln1_g->tensor(), b.ln1_b->tensor());
        Tensor q = matmul(g, a, b.w_q->tensor());
        Tensor k = matmul(g, a, b.w_k->tensor());
        Tensor v = matmul(g, a, b.w_v->tensor());
        for (std::size_t hd = 0; hd < spec_.heads; ++hd) {
            Tensor qh = slice_cols(g, q, hd * d_kh, d_kh);
            Tensor kh = slice_cols(g, k, hd * d_kh, d_kh);
            Tensor vh = slice_cols(g, v, hd * d_kh, d_kh);
            Tensor alpha = softmax_rows(g, scale(g, matmul(g, qh, transpose(g, kh)), inv_sqrt_dk));
            if (attn) {
                Mat am(alpha.rows(), alpha.cols());
                am.v = alpha.values();
                attn->push_back(std::move(am));
            }
            heads[hd] = matmul(g, alpha, vh);
        }
        Tensor o = matmul(g, concat_cols(g, heads), b.w_o->tensor());
        x = add(g, x, o);
        Tensor n2 = layer_norm(g, x, b.ln2_g->tensor(), b.ln2_b->tensor());
        Tensor f = gelu(g, add_rowvec(g, matmul(g, n2, b.w1->tensor()), b.b1->tensor()));
        f = add_rowvec(g, matmul(g, f, b.w2->tensor()), b.b2->tensor());
        x = add(g, x, f);
    }
    x = layer_norm(g, x, lnf_g_->tensor(), lnf_b_->tensor());
    Tensor pooled = cls_ ? transpose(g, slice_cols(g, transpose(g, x), 0, 1)) : mean_rows(g, x);
    return add(g, matmul(g, pooled, head_w_->tensor()), head_b_->tensor());
}

Tensor ViTClassifier::forward_prepared(Graph& g, std::span<const double> prepared,
                                       std::vector<Mat>* attn) const {
    if (prepared.size() != prepared_size())
        throw DimensionError("forward: prepared input has " + std::to_string(prepared.size()) +
                             " values, expected " + std::to_string(prepared_size()));
    Tensor h;
    if (spec_.variant == Variant::kSpectral) {
        h = embedder_->embed(g, prepared);
    } else {
        Tensor patches =
            g.input(tokens_, spec_.patch_size * spec_.patch_size, prepared);
        h = add(g, add_rowvec(g, matmul(g, patches, patch_w_->tensor()), patch_b_->tensor()),
                patch_pos_->tensor());
    }
    return encode(g, h, attn);
}

Tensor ViTClassifier::forward(Graph& g, std::span<const double> image,
                              std::vector<Mat>* attn) const {
    const std::vector<double> prepared = prepare(image);
    return forward_prepared(g, prepared, attn);
}

std::vector<Param*> ViTClassifier::params() {
    std::vector<Param*> ps;
    if (spec_.variant == Variant::kSpectral) {
        for (Param* p : embedder_->params()) ps.push_back(p);
    } else {
        ps.push_back(patch_w_.get());
        ps.push_back(patch_b_.get());
        ps.push_back(patch_pos_.get());
    }
    for (Block& b : blocks_) {
        ps.push_back(b.ln1_g.get());
        ps.push_back(b.ln1_b.get());
        ps.push_back(b.w_q.get());
        ps.push_back(b.w_k.get());
        ps.push_back(b.w_v.get());
        ps.push_back(b.w_o.get());
        ps.push_back(b.ln2_g.get());
        ps.push_back(b.ln2_b.get());
        ps.push_back(b.w1.get());
        ps.push_back(b.b1.get());
        ps.push_back(b.w2.get());
        ps.push_back(b.b2.get());
    }
    ps.push_back(lnf_g_.get());
    ps.push_back(lnf_b_.get());
    ps.push_back(head_w_.get());
    ps.push_back(head_b_.get());
    if (cls_) ps.push_back(cls_.get());
    return ps;
}

std::size_t ViTClassifier::param_count() const {
    std::size_t c = 0;
    if (spec_.variant == Variant::kSpectral) {
        c += embedder_->param_count();
    } else {
        c += patch_w_->size() + patch_b_->size() + patch_pos_->size();
    }
    for (const Block& b : blocks_)
        c += b.ln1_g->size() + b.ln1_b->size() + b.w_q->size() + b.w_k->size() + b.w_v->size() +
             b.w_o->size() + b.ln2_g->size() + b.ln2_b->size() + b.w1->size() + b.b1->size() +
             b.w2->size() + b.b2->size();
    c += lnf_g_->size() + lnf_b_->size() + head_w_->size() + head_b_->size();
    if (cls_) c += cls_->size();
    return c;
}

// ---- Checkpoints -------------------------------------------------------------

void ViTClassifier::save_checkpoint(const std::string& path, std::uint64_t seed,
                                    std::size_t epoch,
                                    const std::vector<std::pair<std::string, double>>& metrics,
                                    const std::string& basis_file) const {
    nlohmann::json manifest;
    manifest["format"] = "svit-checkpoint-1";
    manifest["variant"] = variant_name(spec_.variant);
    manifest["basis_kind"] = basis_kind_name(spec_.basis_kind);
    manifest["n_tokens"] = spec_.n_tokens;
    manifest["patch_size"] = spec_.patch_size;
    manifest["d_e"] = spec_.d_e;
    manifest["d_ff"] = spec_.d_ff;
    manifest["heads"] = spec_.heads;
    manifest["layers"] = spec_.layers;
    manifest["pooling"] = spec_.pooling == Pooling::kMean ? "mean" : "class_token";
    manifest["shared_embed"] = spec_.shared_embed;
    manifest["embed_bias"] = spec_.embed_bias;
    manifest["height"] = height_;
    manifest["width"] = width_;
    manifest["seed"] = seed;
    manifest["epoch"] = epoch;
    nlohmann::json met = nlohmann::json::object();
    for (const auto& [k, v] : metrics) met[k] = v;
    manifest["metrics"] = met;
    if (!basis_file.empty()) manifest["basis_file"] = basis_file;

    auto* self = const_cast<ViTClassifier*>(this);
    nlohmann::json plist = nlohmann::json::array();
    std::size_t total = 0;
    for (Param* p : self->params()) {
        plist.push_back({{"name", p->name()}, {"rows", p->rows()}, {"cols", p->cols()}});
        total += p->size();
    }
    manifest["params"] = plist;
    manifest["param_count"] = total;

    std::ofstream out(path, std::ios::binary);
    if (!out) throw ValidationError("save_checkpoint: cannot open " + path);
    out << manifest.dump() << "\n";
    for (Param* p : self->params())
        out.write(reinterpret_cast<const char*>(p->values().data()),
                  static_cast<std::streamsize>(p->size() * sizeof(double)));
    if (!out) throw ValidationError("save_checkpoint: write failed for " + path);
}

ViTClassifier ViTClassifier::load_checkpoint(const std::string& path,
                                             std::optional<SpectralBasis> basis) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("load_checkpoint: cannot open " + path);
    std::string line;
    if (!std::getline(in, line)) throw ValidationError("load_checkpoint: missing manifest");
    nlohmann::json man;
    try {
        man = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("load_checkpoint: bad manifest: ") + e.what());
    }
    if (man.value("format", "") != "svit-checkpoint-1")
        throw ValidationError("load_checkpoint: unknown format");

    ModelSpec spec;
    spec.variant = man.at("variant").get<std::string>() == "spectral" ? Variant::kSpectral
                                                                      : Variant::kSpatial;
    spec.basis_kind = basis_kind_from_name(man.at("basis_kind").get<std::string>());
    spec.n_tokens = man.at("n_tokens").get<std::size_t>();
    spec.patch_size = man.at("patch_size").get<std::size_t>();
    spec.d_e = man.at("d_e").get<std::size_t>();
    spec.d_ff = man.at("d_ff").get<std::size_t>();
    spec.heads = man.at("heads").get<std::size_t>();
    spec.layers = man.at("layers").get<std::size_t>();
    spec.shared_embed = man.value("shared_embed", false);
    spec.embed_bias = man.value("embed_bias", false);
    spec.pooling =
        man.value("pooling", std::string("mean")) == "mean" ? Pooling::kMean : Pooling::kClassToken;
    const std::uint64_t seed = man.value("seed", std::uint64_t{0});

    std::optional<ViTClassifier> model;
    if (spec.variant == Variant::kSpectral) {
        if (!basis)
            throw ValidationError(
                "load_checkpoint: spectral checkpoint requires its basis (see manifest "
                "basis_file)");
        model.emplace(spec, std::move(*basis), seed);
    } else {
        model.emplace(spec, man.at("height").get<std::size_t>(),
                      man.at("width").get<std::size_t>(), seed);
    }

    const auto& plist = man.at("params");
    std::vector<Param*> ps = model->params();
    if (plist.size() != ps.size())
        throw ValidationError("load_checkpoint: parameter list mismatch");
    for (std::size_t i = 0; i < ps.size(); ++i) {
        const auto& ent = plist[i];
        if (ent.at("name").get<std::string>() != ps[i]->name() ||
            ent.at("rows").get<std::size_t>() != ps[i]->rows() ||
            ent.at("cols").get<std::size_t>() != ps[i]->cols())
            throw ValidationError("load_checkpoint: parameter " + std::to_string(i) +
                                  " does not match the architecture");
        in.read(reinterpret_cast<char*>(ps[i]->values().data()),
                static_cast<std::streamsize>(ps[i]->size() * sizeof(double)));
        if (!in) throw ValidationError("load_checkpoint: truncated parameter blob");
    }
    return std::move(*model);
}

}  // namespace svit
