#include "xaiopt/model.hpp"

#include "xaiopt/errors.hpp"

#include <algorithm>

namespace xaiopt {
namespace {

void check_side(const std::vector<std::uint8_t>& flags, const TokenizedText& text,
                const char* side) {
    if (!flags.empty() && flags.size() != text.size()) {
        throw InputError(std::string("ablation flags for ") + side + " have length " +
                         std::to_string(flags.size()) + ", expected " +
                         std::to_string(text.size()));
    }
}

bool whole_side(const std::vector<std::uint8_t>& flags) {
    return !flags.empty() &&
           std::all_of(flags.begin(), flags.end(), [](std::uint8_t f) { return f != 0; });
}

} // namespace

Ablation Ablation::of(const PairInstance& pair, std::span<const std::size_t> post_idx,
                      std::span<const std::size_t> claim_idx) {
    Ablation a;
    auto fill = [](std::vector<std::uint8_t>& flags, const TokenizedText& text,
                   std::span<const std::size_t> idx, const char* side) {
        if (idx.empty()) {
            return;
        }
        flags.assign(text.size(), 0);
        for (auto i : idx) {
            if (i >= text.size()) {
                throw InputError(std::string("ablation index ") + std::to_string(i) +
                                 " out of range for " + side + " of " +
                                 std::to_string(text.size()) + " tokens");
            }
            flags[i] = 1;
        }
    };
    fill(a.post, pair.post, post_idx, "post");
    fill(a.claim, pair.claim, claim_idx, "claim");
    return a;
}

double cosine_similarity(const Vector& a, const Vector& b) {
    const double na = a.norm();
    const double nb = b.norm();
    if (na == 0.0 || nb == 0.0) {
        return 0.0;
    }
    return a.dot(b) / (na * nb);
}

std::vector<double> SimilarityModel::score(const TokenizedText& post, const TokenizedText& claim,
                                           std::span<const Ablation> ablations) const {
    if (post.empty() || claim.empty()) {
        throw InputError("similarity needs nonempty post and claim");
    }
    std::vector<double> out(ablations.size(), 0.0);
    std::vector<Ablation> forwarded;
    std::vector<std::size_t> where;
    for (std::size_t i = 0; i < ablations.size(); ++i) {
        check_side(ablations[i].post, post, "post");
        check_side(ablations[i].claim, claim, "claim");
        if (whole_side(ablations[i].post) || whole_side(ablations[i].claim)) {
            continue;
        }
        forwarded.push_back(ablations[i]);
        where.push_back(i);
    }
    if (!forwarded.empty()) {
        const auto scores = score_batch(post, claim, forwarded);
        if (scores.size() != forwarded.size()) {
            throw TransportError("model returned " + std::to_string(scores.size()) +
                                 " scores for " + std::to_string(forwarded.size()) + " inputs");
        }
        for (std::size_t k = 0; k < where.size(); ++k) {
            out[where[k]] = scores[k];
        }
    }
    return out;
}

double SimilarityModel::similarity(const TokenizedText& post, const TokenizedText& claim) const {
    const Ablation none;
    return score(post, claim, std::span(&none, 1)).front();
}

double SimilarityModel::perturbed_similarity(const PairInstance& pair,
                                             std::span<const std::size_t> ablate_post,
                                             std::span<const std::size_t> ablate_claim) const {
    const auto a = Ablation::of(pair, ablate_post, ablate_claim);
    return score(pair, std::span(&a, 1)).front();
}

EmbeddedPair GradientModel::mask_baseline(const PairInstance& pair) const {
    const auto x = embed(pair);
    return {Matrix::Zero(x.post.rows(), x.post.cols()), Matrix::Zero(x.claim.rows(), x.claim.cols())};
}

PairAttention GradientModel::attention_internals(const PairInstance&) const {
    throw CapabilityError("model does not expose attention internals");
}

const GradientModel& require_gradients(const SimilarityModel& model) {
    const auto* g = dynamic_cast<const GradientModel*>(&model);
    if (g == nullptr || !model.capabilities().supports_gradients) {
        throw CapabilityError("method requires a gradient-capable model");
    }
    return *g;
}

const GradientModel& require_attention(const SimilarityModel& model) {
    const auto* g = dynamic_cast<const GradientModel*>(&model);
    if (g == nullptr || !model.capabilities().supports_attention_relevance) {
        throw CapabilityError("method requires a model exposing attention relevance");
    }
    return *g;
}

PairGradients embedding_gradients(const SimilarityModel& model, const PairInstance& pair) {
    const auto& g = require_gradients(model);
    return g.gradients_at(g.embed(pair), GradientMode::standard);
}

PairGradients guided_gradients(const SimilarityModel& model, const PairInstance& pair) {
    const auto& g = require_gradients(model);
    return g.gradients_at(g.embed(pair), GradientMode::guided);
}

PairAttention attention_internals(const SimilarityModel& model, const PairInstance& pair) {
    return require_attention(model).attention_internals(pair);
}

} // namespace xaiopt
