#include "xaiopt/attribution.hpp"

#include "xaiopt/diag.hpp"
#include "xaiopt/errors.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <string>

namespace xaiopt {
namespace {

struct MethodEntry {
    MethodId id;
    std::string_view name;
    bool gradients;
    bool attention;
};

constexpr std::array<MethodEntry, 12> kMethods{{
    {MethodId::occlusion, "Occlusion", false, false},
    {MethodId::occlusion_word_level, "Occlusion_word_level", false, false},
    {MethodId::feature_ablation, "Feature Ablation", false, false},
    {MethodId::lime, "Lime", false, false},
    {MethodId::kernel_shap, "Kernel Shap", false, false},
    {MethodId::gradient_shap, "Gradient Shap", true, false},
    {MethodId::saliency, "Saliency", true, false},
    {MethodId::input_x_gradient, "Input X Gradient", true, false},
    {MethodId::integrated_gradients, "Integrated Gradients", true, false},
    {MethodId::guided_backprop, "Guided Backprop", true, false},
    {MethodId::gae, "GAE_Explain", true, true},
    {MethodId::random_control, "Random", false, false},
}};

const MethodEntry& entry(MethodId id) {
    for (const auto& e : kMethods) {
        if (e.id == id) return e;
    }
    throw Error("unknown method id");
}

void normalize_side(std::vector<double>& s, Normalization mode, std::string_view side) {
    switch (mode) {
    case Normalization::without_normalize:
        return;
    case Normalization::abs:
        for (auto& v : s) v = std::abs(v);
        return;
    case Normalization::min_max: {
        if (s.empty()) return;
        const auto [lo, hi] = std::minmax_element(s.begin(), s.end());
        const double a = *lo;
        const double range = *hi - *lo;
        for (auto& v : s) v = range > 0.0 ? (v - a) / range : 0.5;
        return;
    }
    case Normalization::l2: {
        double sq = 0.0;
        for (double v : s) sq += v * v;
        if (sq == 0.0) {
            if (!s.empty()) {
                warn("l2 normalization of an all-zero " + std::string(side) +
                     " map left it unchanged");
            }
            return;
        }
        const double norm = std::sqrt(sq);
        for (auto& v : s) v /= norm;
        return;
    }
    }
}

} // namespace

std::string_view method_name(MethodId id) { return entry(id).name; }

std::optional<MethodId> find_method(std::string_view name) {
    for (const auto& e : kMethods) {
        if (e.name == name) return e.id;
    }
    return std::nullopt;
}

const std::vector<MethodId>& all_methods() {
    static const std::vector<MethodId> ids = [] {
        std::vector<MethodId> v;
        for (const auto& e : kMethods) v.push_back(e.id);
        return v;
    }();
    return ids;
}

bool needs_gradients(MethodId id) { return entry(id).gradients; }
bool needs_attention(MethodId id) { return entry(id).attention; }

void check_admissible(MethodId id, const ModelCapabilities& caps) {
    if (needs_gradients(id) && !caps.supports_gradients) {
        throw CapabilityError("method '" + std::string(method_name(id)) +
                              "' needs embedding gradients, which the bound model does not expose");
    }
    if (needs_attention(id) && !caps.supports_attention_relevance) {
        throw CapabilityError("method '" + std::string(method_name(id)) +
                              "' needs attention internals, which the bound model does not expose");
    }
}

std::string_view to_string(Normalization n) {
    switch (n) {
    case Normalization::without_normalize: return "without_normalize";
    case Normalization::abs: return "abs";
    case Normalization::min_max: return "min_max";
    case Normalization::l2: return "l2";
    }
    return "?";
}

Normalization parse_normalization(std::string_view name) {
    for (auto n : {Normalization::without_normalize, Normalization::abs, Normalization::min_max,
                   Normalization::l2}) {
        if (to_string(n) == name) return n;
    }
    throw ConfigError("unknown normalization '" + std::string(name) +
                      "' (expected without_normalize, abs, min_max or l2)");
}

AttributionMap normalize_map(const AttributionMap& map, Normalization mode) {
    AttributionMap out = map;
    normalize_side(out.post_scores, mode, "post");
    normalize_side(out.claim_scores, mode, "claim");
    out.normalization = mode;
    return out;
}

AttributionMap attribute(const SimilarityModel& model, const PairInstance& pair,
                         const MethodSettings& s, std::uint64_t seed) {
    check_admissible(s.method, model.capabilities());
    Rng rng(seed);
    AttributionMap map;
    switch (s.method) {
    case MethodId::occlusion: map = occlusion_token(model, pair, s.occlusion); break;
    case MethodId::occlusion_word_level: map = occlusion_word(model, pair, s.separators); break;
    case MethodId::feature_ablation:
        map = feature_ablation(model, pair, s.feature_ablation_groups);
        break;
    case MethodId::lime: map = lime(model, pair, s.lime, rng); break;
    case MethodId::kernel_shap: map = kernel_shap(model, pair, s.kernel_shap, rng); break;
    case MethodId::gradient_shap: map = gradient_shap(model, pair, s.gradient_shap, rng); break;
    case MethodId::saliency: map = saliency(model, pair, s.saliency_abs); break;
    case MethodId::input_x_gradient: map = input_x_gradient(model, pair); break;
    case MethodId::integrated_gradients:
        map = integrated_gradients(model, pair, s.integrated_gradients);
        break;
    case MethodId::guided_backprop: map = guided_backprop(model, pair); break;
    case MethodId::gae: map = gae(model, pair); break;
    case MethodId::random_control: map = random_attribution(pair, rng); break;
    }
    for (const auto* side : {&map.post_scores, &map.claim_scores}) {
        for (double v : *side) {
            if (!std::isfinite(v)) {
                throw StudyError("method '" + std::string(method_name(s.method)) +
                                 "' produced a non-finite score on pair '" + pair.id + "'");
            }
        }
    }
    return map;
}

} // namespace xaiopt
