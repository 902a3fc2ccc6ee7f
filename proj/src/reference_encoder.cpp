#include "xaiopt/reference_encoder.hpp"

#include "xaiopt/errors.hpp"
#include "xaiopt/rng.hpp"

#include <cctype>
#include <cmath>

namespace xaiopt {

struct ReferenceEncoder::LayerCache {
    Matrix input;
    std::vector<Matrix> q, k, v, attn;
    Matrix mid;
    Matrix pre; // rectifier pre-activations
};

struct ReferenceEncoder::TowerCache {
    std::vector<LayerCache> layers;
    Matrix output;
    Vector pooled;
};

double relu_backward(double upstream, double preactivation, GradientMode mode) {
    if (preactivation <= 0.0) {
        return 0.0;
    }
    if (mode == GradientMode::guided && upstream < 0.0) {
        return 0.0;
    }
    return upstream;
}

namespace {

Matrix gaussian(Rng& rng, std::size_t rows, std::size_t cols, double std) {
    Matrix m(rows, cols);
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
        for (Eigen::Index i = 0; i < m.rows(); ++i) {
            m(i, j) = rng.normal(0.0, std);
        }
    }
    return m;
}

void softmax_rows(Matrix& s) {
    for (Eigen::Index i = 0; i < s.rows(); ++i) {
        const double mx = s.row(i).maxCoeff();
        s.row(i) = (s.row(i).array() - mx).exp();
        s.row(i) /= s.row(i).sum();
    }
}

void cosine_backward(const Vector& p, const Vector& q, double& sim, Vector& dp, Vector& dq) {
    const double np = p.norm();
    const double nq = q.norm();
    if (np == 0.0 || nq == 0.0) {
        sim = 0.0;
        dp = Vector::Zero(p.size());
        dq = Vector::Zero(q.size());
        return;
    }
    sim = p.dot(q) / (np * nq);
    dp = q / (np * nq) - sim * p / (np * np);
    dq = p / (np * nq) - sim * q / (nq * nq);
}

} // namespace

ReferenceEncoder::ReferenceEncoder(ReferenceEncoderConfig config) : config_(config) {
    if (config_.dim == 0 || config_.vocab_buckets == 0 || config_.ffn_dim == 0) {
        throw ConfigError("reference encoder sizes must be positive");
    }
    if (config_.heads == 0 || config_.dim % config_.heads != 0) {
        throw ConfigError("reference encoder dim must be divisible by heads");
    }
    Rng rng(config_.seed);
    const auto d = config_.dim;
    embeddings_ = gaussian(rng, config_.vocab_buckets, d, config_.init_std);
    mask_embedding_ = gaussian(rng, d, 1, config_.init_std).col(0);
    for (std::size_t l = 0; l < config_.layers; ++l) {
        Layer layer;
        layer.wq = gaussian(rng, d, d, config_.init_std);
        layer.wk = gaussian(rng, d, d, config_.init_std);
        layer.wv = gaussian(rng, d, d, config_.init_std);
        layer.wo = gaussian(rng, d, d, config_.init_std);
        layer.w1 = gaussian(rng, d, config_.ffn_dim, config_.init_std);
        layer.w2 = gaussian(rng, config_.ffn_dim, d, config_.init_std);
        layers_.push_back(std::move(layer));
    }
}

ModelCapabilities ReferenceEncoder::capabilities() const {
    return {true, true, MaskStrategy::zero_embedding, config_.dim};
}

std::size_t ReferenceEncoder::bucket(std::string_view token) const {
    std::string lower(token);
    for (auto& c : lower) {
        c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    }
    return static_cast<std::size_t>(hash_string(lower) % config_.vocab_buckets);
}

Matrix ReferenceEncoder::embed_text(const TokenizedText& text) const {
    Matrix x(text.size(), config_.dim);
    for (std::size_t t = 0; t < text.size(); ++t) {
        x.row(static_cast<Eigen::Index>(t)) =
            embeddings_.row(static_cast<Eigen::Index>(bucket(text.tokens[t])));
    }
    return x;
}

EmbeddedPair ReferenceEncoder::embed(const PairInstance& pair) const {
    return {embed_text(pair.post), embed_text(pair.claim)};
}

EmbeddedPair ReferenceEncoder::mask_baseline(const PairInstance& pair) const {
    auto rows = [&](std::size_t n) {
        Matrix m(n, config_.dim);
        m.rowwise() = mask_embedding_.transpose();
        return m;
    };
    return {rows(pair.post.size()), rows(pair.claim.size())};
}

ReferenceEncoder::TowerCache ReferenceEncoder::forward(const Matrix& x,
                                                       std::optional<AttentionEdit> edit) const {
    const auto dh = static_cast<Eigen::Index>(config_.dim / config_.heads);
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
    TowerCache cache;
    Matrix h = x;
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        const auto& w = layers_[l];
        LayerCache lc;
        lc.input = h;
        Matrix heads(h.rows(), h.cols());
        for (std::size_t hd = 0; hd < config_.heads; ++hd) {
            const auto c0 = static_cast<Eigen::Index>(hd) * dh;
            Matrix q = h * w.wq.middleCols(c0, dh);
            Matrix k = h * w.wk.middleCols(c0, dh);
            Matrix v = h * w.wv.middleCols(c0, dh);
            Matrix a = (q * k.transpose()) * scale;
            softmax_rows(a);
            if (edit && edit->layer == l && edit->head == hd) {
                a(static_cast<Eigen::Index>(edit->row), static_cast<Eigen::Index>(edit->col)) +=
                    edit->delta;
            }
            heads.middleCols(c0, dh) = a * v;
            lc.q.push_back(std::move(q));
            lc.k.push_back(std::move(k));
            lc.v.push_back(std::move(v));
            lc.attn.push_back(std::move(a));
        }
        lc.mid = h + heads * w.wo;
        lc.pre = lc.mid * w.w1;
        h = lc.mid + lc.pre.cwiseMax(0.0) * w.w2;
        cache.layers.push_back(std::move(lc));
    }
    cache.output = h;
    cache.pooled = h.colwise().mean().transpose();
    return cache;
}

Matrix ReferenceEncoder::backward(const TowerCache& cache, const Vector& d_pooled,
                                  GradientMode mode, TowerAttention* attention,
                                  RectifierProbe* probe) const {
    const auto n = cache.output.rows();
    const auto dh = static_cast<Eigen::Index>(config_.dim / config_.heads);
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

    Matrix dx(n, static_cast<Eigen::Index>(config_.dim));
    dx.rowwise() = d_pooled.transpose() / static_cast<double>(n);

    if (attention) {
        attention->assign(layers_.size(), std::vector<AttentionHead>(config_.heads));
    }
    if (probe) {
        probe->upstream.assign(layers_.size(), Matrix());
    }

    for (std::size_t li = layers_.size(); li-- > 0;) {
        const auto& w = layers_[li];
        const auto& lc = cache.layers[li];

        // feed-forward branch
        Matrix dz = dx * w.w2.transpose();
        Matrix du(dz.rows(), dz.cols());
        for (Eigen::Index j = 0; j < dz.cols(); ++j) {
            for (Eigen::Index i = 0; i < dz.rows(); ++i) {
                du(i, j) = relu_backward(dz(i, j), lc.pre(i, j), mode);
            }
        }
        if (probe) {
            probe->upstream[li] = du;
        }
        Matrix dmid = dx + du * w.w1.transpose();

        // attention branch
        Matrix dheads = dmid * w.wo.transpose();
        Matrix din = dmid;
        for (std::size_t hd = 0; hd < config_.heads; ++hd) {
            const auto c0 = static_cast<Eigen::Index>(hd) * dh;
            const Matrix& a = lc.attn[hd];
            Matrix dhh = dheads.middleCols(c0, dh);
            Matrix da = dhh * lc.v[hd].transpose();
            Matrix dv = a.transpose() * dhh;
            Vector row_dot = (da.array() * a.array()).rowwise().sum();
            Matrix ds = (a.array() * (da.colwise() - row_dot).array()).matrix() * scale;
            Matrix dq = ds * lc.k[hd];
            Matrix dk = ds.transpose() * lc.q[hd];
            din += dq * w.wq.middleCols(c0, dh).transpose() +
                   dk * w.wk.middleCols(c0, dh).transpose() +
                   dv * w.wv.middleCols(c0, dh).transpose();
            if (attention) {
                (*attention)[li][hd] = AttentionHead{a, std::move(da)};
            }
        }
        dx = std::move(din);
    }
    return dx;
}

Vector ReferenceEncoder::pooled(const Matrix& embeddings, std::optional<AttentionEdit> edit) const {
    return forward(embeddings, edit).pooled;
}

double ReferenceEncoder::similarity_at(const EmbeddedPair& x) const {
    return cosine_similarity(pooled(x.post), pooled(x.claim));
}

double ReferenceEncoder::similarity_edited(const EmbeddedPair& x,
                                           std::optional<AttentionEdit> post_edit,
                                           std::optional<AttentionEdit> claim_edit) const {
    return cosine_similarity(pooled(x.post, post_edit), pooled(x.claim, claim_edit));
}

PairGradients ReferenceEncoder::gradients_at(const EmbeddedPair& x, GradientMode mode) const {
    return gradients_instrumented(x, mode, {});
}

PairGradients ReferenceEncoder::gradients_instrumented(const EmbeddedPair& x, GradientMode mode,
                                                       Instrumentation probes) const {
    const auto post = forward(x.post, std::nullopt);
    const auto claim = forward(x.claim, std::nullopt);
    PairGradients out;
    Vector dp, dq;
    cosine_backward(post.pooled, claim.pooled, out.similarity, dp, dq);
    out.post = backward(post, dp, mode, probes.attention ? &probes.attention->post : nullptr,
                        probes.post_rectifiers);
    out.claim = backward(claim, dq, mode, probes.attention ? &probes.attention->claim : nullptr,
                         probes.claim_rectifiers);
    return out;
}

PairAttention ReferenceEncoder::attention_internals(const PairInstance& pair) const {
    PairAttention attn;
    gradients_instrumented(embed(pair), GradientMode::standard, {&attn, nullptr, nullptr});
    return attn;
}

std::vector<double> ReferenceEncoder::score_batch(const TokenizedText& post,
                                                  const TokenizedText& claim,
                                                  std::span<const Ablation> ablations) const {
    const Matrix xp = embed_text(post);
    const Matrix xc = embed_text(claim);
    std::optional<Vector> full_post, full_claim;

    auto side = [&](const Matrix& x, const std::vector<std::uint8_t>& flags,
                    std::optional<Vector>& full) -> Vector {
        if (flags.empty()) {
            if (!full) {
                full = pooled(x);
            }
            return *full;
        }
        Matrix masked = x;
        for (std::size_t t = 0; t < flags.size(); ++t) {
            if (flags[t]) {
                masked.row(static_cast<Eigen::Index>(t)).setZero();
            }
        }
        return pooled(masked);
    };

    std::vector<double> out;
    out.reserve(ablations.size());
    for (const auto& a : ablations) {
        out.push_back(cosine_similarity(side(xp, a.post, full_post), side(xc, a.claim, full_claim)));
    }
    return out;
}

} // namespace xaiopt
