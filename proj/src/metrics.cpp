#include "xaiopt/metrics.hpp"

#include "xaiopt/diag.hpp"
#include "xaiopt/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace xaiopt {
namespace {

double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }
double unit_interval(double s) { return (s + 1.0) / 2.0; }

struct AopcSides {
    std::optional<double> comp[2];
    std::optional<double> suff[2];
};

void check_bins(std::span<const double> bins) {
    if (bins.empty()) throw ConfigError("aopc bins must not be empty");
    for (double b : bins) {
        if (!(b > 0.0 && b <= 1.0)) {
            throw ConfigError("aopc bin " + std::to_string(b) + " outside (0, 1]");
        }
    }
}

/// Both AOPC variants per side from one model batch.
AopcSides aopc(const SimilarityModel& model, const PairInstance& pair, const AttributionMap& map,
               const EvaluationOptions& options) {
    check_bins(options.bins);
    AopcSides out;
    std::vector<Ablation> batch{Ablation::none()};
    struct Pending {
        int side;
        std::size_t first;
    };
    std::vector<Pending> pending;
    for (int side = 0; side < 2; ++side) {
        const auto& text = side == 0 ? pair.post : pair.claim;
        const auto& raw = side == 0 ? map.post_scores : map.claim_scores;
        if (text.empty()) {
            warn(std::string("pair '") + pair.id + "': empty " + (side == 0 ? "post" : "claim") +
                 " skipped by aopc");
            continue;
        }
        if (raw.size() != text.size()) {
            throw InputError("attribution map length " + std::to_string(raw.size()) +
                             " does not match " + std::to_string(text.size()) + " tokens");
        }
        const auto units = group_members(text, options.granularity);
        const auto scores = regroup(raw, text, options.granularity);
        pending.push_back({side, batch.size()});
        for (double frac : options.bins) {
            const auto k = bin_size(frac, units.size());
            const auto top = top_k(scores, k);
            std::vector<std::uint8_t> drop(text.size(), 0);
            for (auto u : top) {
                for (auto t : units[u]) drop[t] = 1;
            }
            std::vector<std::uint8_t> rest(text.size(), 0);
            for (std::size_t t = 0; t < text.size(); ++t) rest[t] = drop[t] ? 0 : 1;
            const bool top_is_all = std::none_of(rest.begin(), rest.end(), [](auto b) { return b; });
            Ablation comp;
            Ablation suff;
            (side == 0 ? comp.post : comp.claim) = std::move(drop);
            if (!top_is_all) {
                (side == 0 ? suff.post : suff.claim) = std::move(rest);
            }
            batch.push_back(std::move(comp));
            batch.push_back(std::move(suff));
        }
    }
    const auto s = model.score(pair, batch);
    const double base = unit_interval(s[0]);
    const auto nb = static_cast<double>(options.bins.size());
    for (const auto& p : pending) {
        double comp = 0.0;
        double suff = 0.0;
        for (std::size_t b = 0; b < options.bins.size(); ++b) {
            comp += base - unit_interval(s[p.first + 2 * b]);
            suff += base - unit_interval(s[p.first + 2 * b + 1]);
        }
        out.comp[p.side] = clamp01(comp / nb);
        out.suff[p.side] = 1.0 - clamp01(suff / nb);
    }
    return out;
}

MetricResult combine(MetricId id, const std::optional<double> (&sides)[2]) {
    MetricResult r;
    r.metric = id;
    if (sides[0] && sides[1]) {
        r.value = (*sides[0] + *sides[1]) / 2.0;
        r.side = Side::both;
    } else if (sides[0]) {
        r.value = *sides[0];
        r.side = Side::post;
    } else if (sides[1]) {
        r.value = *sides[1];
        r.side = Side::claim;
    } else {
        r.skipped = true;
    }
    return r;
}

/// Distinct-threshold precision/recall points in descending score order.
std::vector<std::pair<double, double>> pr_points(std::span<const double> scores,
                                                 const RationaleMask& gold) {
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
    const auto positives = static_cast<double>(gold.count());
    std::vector<std::pair<double, double>> points; // (recall, precision)
    double tp = 0.0;
    for (std::size_t i = 0; i < order.size(); ++i) {
        tp += gold.bits[order[i]] ? 1.0 : 0.0;
        if (i + 1 < order.size() && scores[order[i + 1]] == scores[order[i]]) continue;
        points.emplace_back(tp / positives, tp / static_cast<double>(i + 1));
    }
    return points;
}

bool usable(std::span<const double> scores, const RationaleMask& gold) {
    if (scores.size() != gold.size()) {
        throw InputError("score length " + std::to_string(scores.size()) +
                         " does not match rationale length " + std::to_string(gold.size()));
    }
    return gold.count() > 0;
}

std::size_t top_k_hits(std::span<const double> scores, const RationaleMask& gold) {
    std::size_t hits = 0;
    for (auto i : top_k(scores, gold.count())) hits += gold.bits[i] ? 1 : 0;
    return hits;
}

} // namespace

std::string_view metric_name(MetricId id) {
    switch (id) {
    case MetricId::aopc_comprehensiveness: return "aopc_comprehensiveness";
    case MetricId::aopc_sufficiency: return "aopc_sufficiency";
    case MetricId::auprc: return "auprc";
    case MetricId::average_precision: return "average_precision";
    case MetricId::token_f1: return "token_f1";
    case MetricId::token_iou: return "token_iou";
    }
    return "?";
}

bool is_fidelity_metric(MetricId id) {
    return id == MetricId::aopc_comprehensiveness || id == MetricId::aopc_sufficiency;
}

std::string_view to_string(Side side) {
    switch (side) {
    case Side::post: return "post";
    case Side::claim: return "claim";
    case Side::both: return "both";
    }
    return "?";
}

const std::vector<double>& default_aopc_bins() {
    static const std::vector<double> bins{0.01, 0.05, 0.10, 0.20, 0.50};
    return bins;
}

std::size_t bin_size(double fraction, std::size_t units) {
    const auto k = static_cast<std::size_t>(std::max(1L, std::lround(fraction * static_cast<double>(units))));
    return std::min(k, units);
}

std::vector<std::size_t> top_k(std::span<const double> scores, std::size_t k) {
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
    order.resize(std::min(k, order.size()));
    return order;
}

MetricResult aopc_comprehensiveness(const SimilarityModel& model, const PairInstance& pair,
                                    const AttributionMap& map, const EvaluationOptions& options) {
    return combine(MetricId::aopc_comprehensiveness, aopc(model, pair, map, options).comp);
}

MetricResult aopc_sufficiency(const SimilarityModel& model, const PairInstance& pair,
                              const AttributionMap& map, const EvaluationOptions& options) {
    return combine(MetricId::aopc_sufficiency, aopc(model, pair, map, options).suff);
}

std::optional<double> auprc(std::span<const double> scores, const RationaleMask& gold) {
    if (!usable(scores, gold)) return std::nullopt;
    double area = 0.0;
    double r0 = 0.0;
    double p0 = 1.0;
    for (const auto& [r, p] : pr_points(scores, gold)) {
        area += (r - r0) * (p + p0) / 2.0;
        r0 = r;
        p0 = p;
    }
    return clamp01(area);
}

std::optional<double> average_precision(std::span<const double> scores, const RationaleMask& gold) {
    if (!usable(scores, gold)) return std::nullopt;
    double ap = 0.0;
    double r0 = 0.0;
    for (const auto& [r, p] : pr_points(scores, gold)) {
        ap += (r - r0) * p;
        r0 = r;
    }
    return clamp01(ap);
}

std::optional<double> token_f1(std::span<const double> scores, const RationaleMask& gold) {
    if (!usable(scores, gold)) return std::nullopt;
    // Predicted and gold sets have equal size, so precision = recall = F1.
    return static_cast<double>(top_k_hits(scores, gold)) / static_cast<double>(gold.count());
}

std::optional<double> token_iou(std::span<const double> scores, const RationaleMask& gold) {
    if (!usable(scores, gold)) return std::nullopt;
    const auto hits = static_cast<double>(top_k_hits(scores, gold));
    const auto k = static_cast<double>(gold.count());
    return hits / (2.0 * k - hits);
}

MetricResult plausibility_metric(MetricId id, const PairInstance& pair, const AttributionMap& map,
                                 Granularity granularity) {
    if (is_fidelity_metric(id)) {
        throw Error("plausibility_metric called with a fidelity metric");
    }
    std::optional<double> sides[2];
    for (int side = 0; side < 2; ++side) {
        const auto& text = side == 0 ? pair.post : pair.claim;
        const auto& gold = side == 0 ? pair.post_gold : pair.claim_gold;
        const auto scores = regroup(side == 0 ? map.post_scores : map.claim_scores, text, granularity);
        const auto mask = regroup(gold, text, granularity);
        switch (id) {
        case MetricId::auprc: sides[side] = auprc(scores, mask); break;
        case MetricId::average_precision: sides[side] = average_precision(scores, mask); break;
        case MetricId::token_f1: sides[side] = token_f1(scores, mask); break;
        case MetricId::token_iou: sides[side] = token_iou(scores, mask); break;
        default: break;
        }
    }
    auto r = combine(id, sides);
    if (r.skipped) {
        warn("pair '" + pair.id + "': no gold rationale tokens; " + std::string(metric_name(id)) +
             " skipped");
    }
    return r;
}

InstanceScores score_instance(const SimilarityModel& model, const PairInstance& pair,
                              const AttributionMap& map, const EvaluationOptions& options) {
    InstanceScores out;
    out.id = pair.id;
    const auto a = aopc(model, pair, map, options);
    out.per_metric.push_back(combine(MetricId::aopc_comprehensiveness, a.comp));
    out.per_metric.push_back(combine(MetricId::aopc_sufficiency, a.suff));

    std::optional<double> gold_sides[2];
    for (int side = 0; side < 2; ++side) {
        if ((side == 0 ? pair.post_gold : pair.claim_gold).count() > 0) gold_sides[side] = 0.0;
    }
    const bool no_gold = !gold_sides[0] && !gold_sides[1];
    if (no_gold) {
        warn("pair '" + pair.id + "': no gold rationale tokens; plausibility skipped");
    }
    for (auto id : {MetricId::auprc, MetricId::average_precision, MetricId::token_f1,
                    MetricId::token_iou}) {
        if (no_gold) {
            out.per_metric.push_back({id, 0.0, Side::both, true});
        } else {
            out.per_metric.push_back(plausibility_metric(id, pair, map, options.granularity));
        }
    }

    double f = 0.0;
    double p = 0.0;
    std::size_t nf = 0;
    std::size_t np = 0;
    for (const auto& m : out.per_metric) {
        if (m.skipped) continue;
        if (is_fidelity_metric(m.metric)) {
            f += m.value;
            ++nf;
        } else {
            p += m.value;
            ++np;
        }
    }
    if (nf > 0) out.fidelity = f / static_cast<double>(nf);
    if (np > 0) out.plausibility = p / static_cast<double>(np);
    return out;
}

double weighted_overall(double faithfulness, double plausibility, double w_f, double w_p) {
    if (w_f < 0.0 || w_p < 0.0 || !(w_f + w_p > 0.0)) {
        throw ConfigError("metric weights must be >= 0 and not both zero");
    }
    return (w_f * faithfulness + w_p * plausibility) / (w_f + w_p);
}

AggregateScores aggregate(std::span<const InstanceScores> instances, double w_f, double w_p) {
    AggregateScores out;
    double f = 0.0;
    double p = 0.0;
    for (const auto& inst : instances) {
        if (inst.fidelity) {
            f += *inst.fidelity;
            ++out.fidelity_count;
        }
        if (inst.plausibility) {
            p += *inst.plausibility;
            ++out.plausibility_count;
        }
    }
    if (out.fidelity_count == 0 && w_f > 0.0) {
        throw StudyError("no instance produced a fidelity score");
    }
    if (out.plausibility_count == 0 && w_p > 0.0) {
        throw StudyError("no instance produced a plausibility score");
    }
    if (out.fidelity_count > 0) out.faithfulness = f / static_cast<double>(out.fidelity_count);
    if (out.plausibility_count > 0) {
        out.plausibility = p / static_cast<double>(out.plausibility_count);
    }
    out.overall = weighted_overall(out.faithfulness, out.plausibility, w_f, w_p);
    return out;
}

} // namespace xaiopt
