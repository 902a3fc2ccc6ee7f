#pragma once

#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include "xaiopt/model.hpp"

namespace xaiopt {

struct ReferenceEncoderConfig {
    std::size_t vocab_buckets = 4096;
    std::size_t dim = 64;
    std::size_t layers = 2;
    std::size_t heads = 2;
    std::size_t ffn_dim = 128;
    double init_std = 0.02;
    std::uint64_t seed = 1000;
};

/// Perturbs one post-softmax attention entry during the forward pass.
struct AttentionEdit {
    std::size_t layer = 0;
    std::size_t head = 0;
    std::size_t row = 0;
    std::size_t col = 0;
    double delta = 0.0;
};

/// Gradients arriving at each rectifier after gating, one matrix per layer.
struct RectifierProbe {
    std::vector<Matrix> upstream;
};

struct Instrumentation {
    PairAttention* attention = nullptr;
    RectifierProbe* post_rectifiers = nullptr;
    RectifierProbe* claim_rectifiers = nullptr;
};

/// Backward rule of a rectifier: standard passes upstream where the unit is
/// active; guided additionally clamps upstream to >= 0.
double relu_backward(double upstream, double preactivation, GradientMode mode);

/// Small seeded bi-encoder: hashed token embeddings, pre-residual attention
/// blocks with a rectifier feed-forward, mean pooling, cosine similarity.
///
/// Blocks carry no biases and no normalization, so an all-zero input
/// sequence pools to the zero vector. Both towers share weights.
class ReferenceEncoder final : public GradientModel {
public:
    explicit ReferenceEncoder(ReferenceEncoderConfig config = {});

    const ReferenceEncoderConfig& config() const { return config_; }

    ModelCapabilities capabilities() const override;

    std::size_t bucket(std::string_view token) const;
    Matrix embed_text(const TokenizedText& text) const;
    Vector pooled(const Matrix& embeddings, std::optional<AttentionEdit> edit = std::nullopt) const;

    EmbeddedPair embed(const PairInstance& pair) const override;
    EmbeddedPair mask_baseline(const PairInstance& pair) const override;
    double similarity_at(const EmbeddedPair& x) const override;
    PairGradients gradients_at(const EmbeddedPair& x, GradientMode mode) const override;
    PairAttention attention_internals(const PairInstance& pair) const override;

    double similarity_edited(const EmbeddedPair& x, std::optional<AttentionEdit> post_edit,
                             std::optional<AttentionEdit> claim_edit) const;
    PairGradients gradients_instrumented(const EmbeddedPair& x, GradientMode mode,
                                         Instrumentation probes) const;

protected:
    std::vector<double> score_batch(const TokenizedText& post, const TokenizedText& claim,
                                    std::span<const Ablation> ablations) const override;

private:
    struct Layer {
        Matrix wq, wk, wv, wo; // dim x dim
        Matrix w1;             // dim x ffn
        Matrix w2;             // ffn x dim
    };
    struct LayerCache;
    struct TowerCache;

    TowerCache forward(const Matrix& x, std::optional<AttentionEdit> edit) const;
    Matrix backward(const TowerCache& cache, const Vector& d_pooled, GradientMode mode,
                    TowerAttention* attention, RectifierProbe* probe) const;

    ReferenceEncoderConfig config_;
    Matrix embeddings_;
    Vector mask_embedding_;
    std::vector<Layer> layers_;
};

} // namespace xaiopt
