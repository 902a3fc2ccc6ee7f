#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "xaiopt/model.hpp"
#include "xaiopt/rng.hpp"
#include "xaiopt/textdata.hpp"

namespace xaiopt {

enum class MethodId {
    occlusion,
    occlusion_word_level,
    feature_ablation,
    lime,
    kernel_shap,
    gradient_shap,
    saliency,
    input_x_gradient,
    integrated_gradients,
    guided_backprop,
    gae,
    random_control, ///< uniform random scores; a plausibility floor for comparisons
};

/// Config-file name of a method ("Occlusion", "Kernel Shap", "GAE_Explain", ...).
std::string_view method_name(MethodId id);
std::optional<MethodId> find_method(std::string_view name);
const std::vector<MethodId>& all_methods();

bool needs_gradients(MethodId id);
bool needs_attention(MethodId id);

/// Throws CapabilityError if `id` cannot run on a model with `caps`.
void check_admissible(MethodId id, const ModelCapabilities& caps);

enum class Normalization { without_normalize, abs, min_max, l2 };

std::string_view to_string(Normalization n);
Normalization parse_normalization(std::string_view name);

struct AttributionMap {
    MethodId method = MethodId::occlusion;
    Normalization normalization = Normalization::without_normalize;
    std::vector<double> post_scores;
    std::vector<double> claim_scores;
};

struct OcclusionOptions {
    std::size_t window = 5;
    std::size_t stride = 1;
};

enum class DistanceMode { cosine, euclidean };

struct LimeOptions {
    std::size_t n_samples = 90;
    DistanceMode distance = DistanceMode::euclidean;
    double kernel_width = 750.0;
    double alpha = 1e-10;
    bool use_token_groups = false;
};

struct KernelShapOptions {
    std::size_t n_samples = 90;
    /// Enumerate every coalition. Implied when n_samples >= 2^M - 2.
    bool exact = false;
    bool use_token_groups = false;
};

enum class BaselineKind { zero_embedding, mask_token, sampled_noise };

struct BaselineSpec {
    BaselineKind kind = BaselineKind::zero_embedding;
    double stdevs = 0.0;        ///< sampled_noise only
    std::size_t n_samples = 1;
};

struct GradientShapOptions {
    double stdevs = 0.1;
    std::size_t n_samples = 15;
};

struct IntegratedGradientsOptions {
    std::size_t n_steps = 50;
    BaselineSpec baseline;
};

/// Fully resolved parameters for one attribution call.
struct MethodSettings {
    MethodId method = MethodId::occlusion;
    OcclusionOptions occlusion;
    std::string separators = ".,!?;:…";
    bool feature_ablation_groups = false;
    LimeOptions lime;
    KernelShapOptions kernel_shap;
    GradientShapOptions gradient_shap;
    bool saliency_abs = true;
    IntegratedGradientsOptions integrated_gradients;
};

/// Dispatches to the method named in `settings`. Stochastic methods draw
/// from a stream seeded with `seed`.
AttributionMap attribute(const SimilarityModel& model, const PairInstance& pair,
                         const MethodSettings& settings, std::uint64_t seed);

// Perturbation methods

AttributionMap occlusion_token(const SimilarityModel& model, const PairInstance& pair,
                               const OcclusionOptions& options);
/// Word groups split at whitespace and at any character of `separators`
/// are ablated as units.
AttributionMap occlusion_word(const SimilarityModel& model, const PairInstance& pair,
                              std::string_view separators);
AttributionMap feature_ablation(const SimilarityModel& model, const PairInstance& pair,
                                bool use_token_groups);
AttributionMap lime(const SimilarityModel& model, const PairInstance& pair,
                    const LimeOptions& options, Rng& rng);
AttributionMap kernel_shap(const SimilarityModel& model, const PairInstance& pair,
                           const KernelShapOptions& options, Rng& rng);
AttributionMap random_attribution(const PairInstance& pair, Rng& rng);

/// Coalition value function: one value per coalition (flag 1 = unit present).
using CoalitionGame =
    std::function<std::vector<double>(const std::vector<std::vector<std::uint8_t>>&)>;

/// Kernel SHAP with the efficiency constraint enforced exactly; with full
/// enumeration the result equals the exact Shapley values.
Vector kernel_shap_values(std::size_t units, const CoalitionGame& game,
                          const KernelShapOptions& options, Rng& rng);

/// LIME surrogate coefficients over `units` binary features.
Vector lime_coefficients(std::size_t units, const CoalitionGame& game, const LimeOptions& options,
                         Rng& rng);

// Gradient and attention methods (require a GradientModel)

AttributionMap saliency(const SimilarityModel& model, const PairInstance& pair, bool abs);
AttributionMap input_x_gradient(const SimilarityModel& model, const PairInstance& pair);
AttributionMap integrated_gradients(const SimilarityModel& model, const PairInstance& pair,
                                    const IntegratedGradientsOptions& options);
AttributionMap gradient_shap(const SimilarityModel& model, const PairInstance& pair,
                             const GradientShapOptions& options, Rng& rng);
AttributionMap guided_backprop(const SimilarityModel& model, const PairInstance& pair);
AttributionMap gae(const SimilarityModel& model, const PairInstance& pair);

/// Relevance propagation over one tower's attention layers, input to output:
/// R starts as identity and R <- R + E R with E the head mean of the
/// positive part of (gradient * attention).
Matrix gae_relevance(const TowerAttention& tower, std::size_t tokens);
/// Column means of the final relevance matrix (mean pooling readout).
std::vector<double> gae_token_relevance(const TowerAttention& tower, std::size_t tokens);

AttributionMap normalize_map(const AttributionMap& map, Normalization mode);

} // namespace xaiopt
