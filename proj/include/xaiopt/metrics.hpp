#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "xaiopt/attribution.hpp"
#include "xaiopt/model.hpp"
#include "xaiopt/textdata.hpp"

namespace xaiopt {

enum class MetricId {
    aopc_comprehensiveness,
    aopc_sufficiency,
    auprc,
    average_precision,
    token_f1,
    token_iou,
};

std::string_view metric_name(MetricId id);
bool is_fidelity_metric(MetricId id);

enum class Side { post, claim, both };

std::string_view to_string(Side side);

struct MetricResult {
    MetricId metric = MetricId::auprc;
    double value = 0.0;
    Side side = Side::both;
    bool skipped = false; ///< undefined for this instance (e.g. empty gold)
};

/// {0.01, 0.05, 0.10, 0.20, 0.50}
const std::vector<double>& default_aopc_bins();

/// Top-k unit count for a bin fraction: max(1, round(fraction * units)).
std::size_t bin_size(double fraction, std::size_t units);

/// Indices of the k highest scores, ties broken by lower index.
std::vector<std::size_t> top_k(std::span<const double> scores, std::size_t k);

struct EvaluationOptions {
    Granularity granularity = Granularity::token;
    std::vector<double> bins = default_aopc_bins();
};

/// Mean over bins of the drop in (s+1)/2 when the top-ranked units are
/// ablated, clamped to [0,1] per side; sides averaged.
MetricResult aopc_comprehensiveness(const SimilarityModel& model, const PairInstance& pair,
                                    const AttributionMap& map, const EvaluationOptions& options = {});
/// As comprehensiveness but keeping only the top-ranked units, reported as
/// 1 - clamp01(raw) so higher is better.
MetricResult aopc_sufficiency(const SimilarityModel& model, const PairInstance& pair,
                              const AttributionMap& map, const EvaluationOptions& options = {});

// Plausibility on one score vector. std::nullopt when gold has no positives.

/// Trapezoidal area under the precision-recall curve over distinct
/// thresholds, anchored at (recall 0, precision 1).
std::optional<double> auprc(std::span<const double> scores, const RationaleMask& gold);
/// Step-sum sum_n (R_n - R_{n-1}) P_n.
std::optional<double> average_precision(std::span<const double> scores, const RationaleMask& gold);
/// Top-k binarization with k = number of gold positives.
std::optional<double> token_f1(std::span<const double> scores, const RationaleMask& gold);
std::optional<double> token_iou(std::span<const double> scores, const RationaleMask& gold);

/// Plausibility metric over both sides at the requested granularity; a side
/// with no gold positives is left out, both missing gives a skipped result.
MetricResult plausibility_metric(MetricId id, const PairInstance& pair, const AttributionMap& map,
                                 Granularity granularity);

struct InstanceScores {
    std::string id;
    std::optional<double> fidelity;      ///< mean of comprehensiveness and aligned sufficiency
    std::optional<double> plausibility;  ///< mean of non-skipped plausibility metrics
    std::vector<MetricResult> per_metric;
};

InstanceScores score_instance(const SimilarityModel& model, const PairInstance& pair,
                              const AttributionMap& map, const EvaluationOptions& options = {});

struct AggregateScores {
    double faithfulness = 0.0;
    double plausibility = 0.0;
    double overall = 0.0;
    std::size_t fidelity_count = 0;
    std::size_t plausibility_count = 0;
};

/// (w_f F + w_p P) / (w_f + w_p)
double weighted_overall(double faithfulness, double plausibility, double w_f, double w_p);

/// Means over instances that were not skipped. Throws StudyError when a
/// category with positive weight has no usable instance.
AggregateScores aggregate(std::span<const InstanceScores> instances, double w_f, double w_p);

} // namespace xaiopt
