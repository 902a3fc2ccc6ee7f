#include "xaiopt/attribution.hpp"

#include "xaiopt/errors.hpp"

#include <cmath>

namespace xaiopt {
namespace {

std::vector<double> row_sums(const Matrix& m) {
    std::vector<double> out(static_cast<std::size_t>(m.rows()));
    for (Eigen::Index r = 0; r < m.rows(); ++r) out[static_cast<std::size_t>(r)] = m.row(r).sum();
    return out;
}

AttributionMap from_sides(MethodId method, std::vector<double> post, std::vector<double> claim) {
    AttributionMap map;
    map.method = method;
    map.post_scores = std::move(post);
    map.claim_scores = std::move(claim);
    return map;
}

EmbeddedPair zeros_like(const EmbeddedPair& x) {
    return {Matrix::Zero(x.post.rows(), x.post.cols()), Matrix::Zero(x.claim.rows(), x.claim.cols())};
}

} // namespace

AttributionMap saliency(const SimilarityModel& model, const PairInstance& pair, bool abs) {
    const auto g = embedding_gradients(model, pair);
    auto collapse = [abs](const Matrix& grad) {
        std::vector<double> out(static_cast<std::size_t>(grad.rows()));
        for (Eigen::Index r = 0; r < grad.rows(); ++r) {
            const double norm = grad.row(r).norm();
            out[static_cast<std::size_t>(r)] = (!abs && grad.row(r).sum() < 0.0) ? -norm : norm;
        }
        return out;
    };
    return from_sides(MethodId::saliency, collapse(g.post), collapse(g.claim));
}

AttributionMap input_x_gradient(const SimilarityModel& model, const PairInstance& pair) {
    const auto& gm = require_gradients(model);
    const auto x = gm.embed(pair);
    const auto g = gm.gradients_at(x, GradientMode::standard);
    return from_sides(MethodId::input_x_gradient, row_sums(x.post.cwiseProduct(g.post)),
                      row_sums(x.claim.cwiseProduct(g.claim)));
}

AttributionMap integrated_gradients(const SimilarityModel& model, const PairInstance& pair,
                                    const IntegratedGradientsOptions& options) {
    if (options.n_steps < 1) throw ConfigError("Integrated Gradients n_steps must be >= 1");
    const auto& gm = require_gradients(model);
    const auto x = gm.embed(pair);
    EmbeddedPair b;
    switch (options.baseline.kind) {
    case BaselineKind::zero_embedding: b = zeros_like(x); break;
    case BaselineKind::mask_token: b = gm.mask_baseline(pair); break;
    case BaselineKind::sampled_noise:
        throw ConfigError("sampled-noise baselines are only used by Gradient Shap");
    }
    const EmbeddedPair diff{x.post - b.post, x.claim - b.claim};
    EmbeddedPair acc = zeros_like(x);
    const auto n = static_cast<double>(options.n_steps);
    for (std::size_t k = 0; k < options.n_steps; ++k) {
        const double alpha = (static_cast<double>(k) + 0.5) / n;
        const EmbeddedPair point{b.post + alpha * diff.post, b.claim + alpha * diff.claim};
        const auto g = gm.gradients_at(point, GradientMode::standard);
        acc.post += g.post;
        acc.claim += g.claim;
    }
    return from_sides(MethodId::integrated_gradients,
                      row_sums(diff.post.cwiseProduct(acc.post) / n),
                      row_sums(diff.claim.cwiseProduct(acc.claim) / n));
}

AttributionMap gradient_shap(const SimilarityModel& model, const PairInstance& pair,
                             const GradientShapOptions& options, Rng& rng) {
    if (options.n_samples < 1) throw ConfigError("Gradient Shap n_samples must be >= 1");
    if (options.stdevs < 0.0) throw ConfigError("Gradient Shap stdevs must be >= 0");
    const auto& gm = require_gradients(model);
    const auto x = gm.embed(pair);
    EmbeddedPair acc = zeros_like(x);
    auto noise = [&](const Matrix& like) {
        Matrix m(like.rows(), like.cols());
        for (Eigen::Index r = 0; r < m.rows(); ++r) {
            for (Eigen::Index c = 0; c < m.cols(); ++c) {
                m(r, c) = options.stdevs > 0.0 ? rng.normal(0.0, options.stdevs) : 0.0;
            }
        }
        return m;
    };
    for (std::size_t s = 0; s < options.n_samples; ++s) {
        const EmbeddedPair b{noise(x.post), noise(x.claim)};
        const double t = rng.uniform();
        const EmbeddedPair diff{x.post - b.post, x.claim - b.claim};
        const EmbeddedPair point{b.post + t * diff.post, b.claim + t * diff.claim};
        const auto g = gm.gradients_at(point, GradientMode::standard);
        acc.post += g.post.cwiseProduct(diff.post);
        acc.claim += g.claim.cwiseProduct(diff.claim);
    }
    const auto n = static_cast<double>(options.n_samples);
    return from_sides(MethodId::gradient_shap, row_sums(acc.post / n), row_sums(acc.claim / n));
}

AttributionMap guided_backprop(const SimilarityModel& model, const PairInstance& pair) {
    const auto& gm = require_gradients(model);
    const auto x = gm.embed(pair);
    const auto g = gm.gradients_at(x, GradientMode::guided);
    return from_sides(MethodId::guided_backprop, row_sums(x.post.cwiseProduct(g.post)),
                      row_sums(x.claim.cwiseProduct(g.claim)));
}

Matrix gae_relevance(const TowerAttention& tower, std::size_t tokens) {
    const auto n = static_cast<Eigen::Index>(tokens);
    Matrix r = Matrix::Identity(n, n);
    for (const auto& layer : tower) {
        if (layer.empty()) continue;
        Matrix e = Matrix::Zero(n, n);
        for (const auto& head : layer) {
            if (head.weights.rows() != n || head.gradient.rows() != n) {
                throw InputError("attention matrix shape does not match token count");
            }
            e += head.gradient.cwiseProduct(head.weights).cwiseMax(0.0);
        }
        e /= static_cast<double>(layer.size());
        r += e * r;
    }
    return r;
}

std::vector<double> gae_token_relevance(const TowerAttention& tower, std::size_t tokens) {
    const Matrix r = gae_relevance(tower, tokens);
    std::vector<double> out(tokens, 0.0);
    if (tokens == 0) return out;
    const Vector means = r.colwise().mean();
    for (std::size_t t = 0; t < tokens; ++t) out[t] = means(static_cast<Eigen::Index>(t));
    return out;
}

AttributionMap gae(const SimilarityModel& model, const PairInstance& pair) {
    const auto att = attention_internals(model, pair);
    return from_sides(MethodId::gae, gae_token_relevance(att.post, pair.post.size()),
                      gae_token_relevance(att.claim, pair.claim.size()));
}

} // namespace xaiopt
