#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "xaiopt/textdata.hpp"

namespace xaiopt {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

enum class MaskStrategy { zero_embedding, mask_token };

struct ModelCapabilities {
    bool supports_gradients = false;
    bool supports_attention_relevance = false;
    MaskStrategy mask_strategy = MaskStrategy::zero_embedding;
    std::size_t embedding_dim = 0;
};

/// Per-side ablation flags (1 = token removed). An empty vector means no
/// token of that side is ablated.
struct Ablation {
    std::vector<std::uint8_t> post;
    std::vector<std::uint8_t> claim;

    static Ablation none() { return {}; }
    static Ablation of(const PairInstance& pair, std::span<const std::size_t> post_idx,
                       std::span<const std::size_t> claim_idx);
};

/// Cosine similarity; 0 when either vector has zero norm.
double cosine_similarity(const Vector& a, const Vector& b);

/// Black-box similarity contract consumed by every attribution method.
///
/// When every token of one side is ablated the score is 0 by convention,
/// whatever the model would produce.
class SimilarityModel {
public:
    virtual ~SimilarityModel() = default;

    virtual ModelCapabilities capabilities() const = 0;

    /// Scores one perturbation per entry of `ablations`, order preserving.
    std::vector<double> score(const TokenizedText& post, const TokenizedText& claim,
                              std::span<const Ablation> ablations) const;
    std::vector<double> score(const PairInstance& pair, std::span<const Ablation> ablations) const {
        return score(pair.post, pair.claim, ablations);
    }

    double similarity(const TokenizedText& post, const TokenizedText& claim) const;
    double similarity(const PairInstance& pair) const { return similarity(pair.post, pair.claim); }

    double perturbed_similarity(const PairInstance& pair, std::span<const std::size_t> ablate_post,
                                std::span<const std::size_t> ablate_claim) const;

protected:
    /// Ablations reaching this point are validated and never ablate a whole side.
    virtual std::vector<double> score_batch(const TokenizedText& post, const TokenizedText& claim,
                                            std::span<const Ablation> ablations) const = 0;
};

struct EmbeddedPair {
    Matrix post;  ///< tokens x dim
    Matrix claim; ///< tokens x dim
};

struct PairGradients {
    double similarity = 0.0;
    Matrix post;
    Matrix claim;
};

enum class GradientMode {
    standard,
    guided ///< upstream gradients clamped to >= 0 at every rectifier
};

struct AttentionHead {
    Matrix weights;  ///< post-softmax attention, rows sum to 1
    Matrix gradient; ///< d similarity / d weights
};

/// [layer][head]
using TowerAttention = std::vector<std::vector<AttentionHead>>;

struct PairAttention {
    TowerAttention post;
    TowerAttention claim;
};

/// Models exposing embedding-level gradients (and optionally attention).
class GradientModel : public SimilarityModel {
public:
    virtual EmbeddedPair embed(const PairInstance& pair) const = 0;
    /// Embeddings of the mask token at every position.
    virtual EmbeddedPair mask_baseline(const PairInstance& pair) const;

    virtual double similarity_at(const EmbeddedPair& x) const = 0;
    virtual PairGradients gradients_at(const EmbeddedPair& x, GradientMode mode) const = 0;

    virtual PairAttention attention_internals(const PairInstance& pair) const;
};

/// Capability-checked entry points. Throw CapabilityError when the model
/// does not expose the required internals.
const GradientModel& require_gradients(const SimilarityModel& model);
const GradientModel& require_attention(const SimilarityModel& model);

PairGradients embedding_gradients(const SimilarityModel& model, const PairInstance& pair);
PairGradients guided_gradients(const SimilarityModel& model, const PairInstance& pair);
PairAttention attention_internals(const SimilarityModel& model, const PairInstance& pair);

} // namespace xaiopt
