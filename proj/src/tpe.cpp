#include "xaiopt/samplers.hpp"

#include "xaiopt/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace xaiopt {
namespace {

constexpr double kContinuousMinBandwidth = 0.01;

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

/// Mixture of truncated Gaussians on [lo, hi].
struct Kde {
    double lo = 0.0;
    double hi = 1.0;
    std::vector<double> mu;
    std::vector<double> sigma;
    std::vector<double> weight;

    Kde(const std::vector<double>& points, double lo_, double hi_, double min_bw, bool prior)
        : lo(lo_), hi(hi_) {
        const double span = hi - lo;
        mu = points;
        if (prior || points.empty()) mu.push_back((lo + hi) / 2.0);
        // Per-component bandwidth: the larger gap to a sorted neighbour, clipped.
        std::vector<std::size_t> order(mu.size());
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return mu[a] < mu[b]; });
        const double floor_bw =
            std::max(min_bw, span / std::min(100.0, 1.0 + static_cast<double>(mu.size())));
        sigma.assign(mu.size(), span);
        for (std::size_t k = 0; k < order.size(); ++k) {
            const double left = k == 0 ? mu[order[k]] - lo : mu[order[k]] - mu[order[k - 1]];
            const double right = k + 1 == order.size() ? hi - mu[order[k]] : mu[order[k + 1]] - mu[order[k]];
            sigma[order[k]] = std::clamp(std::max(left, right), floor_bw, span);
        }
        if (prior || points.empty()) sigma.back() = span;
        weight.assign(mu.size(), 1.0);
    }

    double log_pdf(double x) const {
        double total = 0.0;
        double wsum = 0.0;
        for (std::size_t j = 0; j < mu.size(); ++j) {
            const double z = (x - mu[j]) / sigma[j];
            const double mass = normal_cdf((hi - mu[j]) / sigma[j]) - normal_cdf((lo - mu[j]) / sigma[j]);
            total += weight[j] * std::exp(-0.5 * z * z) / (sigma[j] * std::sqrt(2.0 * M_PI) * mass);
            wsum += weight[j];
        }
        return std::log(std::max(total / wsum, std::numeric_limits<double>::min()));
    }

    double sample(Rng& rng) const {
        const double wsum = std::accumulate(weight.begin(), weight.end(), 0.0);
        double r = rng.uniform() * wsum;
        std::size_t j = 0;
        while (j + 1 < weight.size() && r >= weight[j]) {
            r -= weight[j];
            ++j;
        }
        for (int attempt = 0; attempt < 64; ++attempt) {
            const double x = rng.normal(mu[j], sigma[j]);
            if (x >= lo && x <= hi) return x;
        }
        return rng.uniform(lo, hi);
    }
};

std::vector<double> categorical_probs(const std::vector<std::size_t>& idx, std::size_t k, double prior) {
    std::vector<double> p(k, prior);
    for (auto i : idx) p[i] += 1.0;
    const double total = std::accumulate(p.begin(), p.end(), 0.0);
    for (auto& v : p) v = total > 0.0 ? v / total : 1.0 / static_cast<double>(k);
    return p;
}

std::size_t propose_categorical(const std::vector<std::size_t>& good, const std::vector<std::size_t>& bad,
                                std::size_t k, Rng& rng, const TpeOptions& options) {
    if (good.empty()) return rng.index(k);
    const double prior = options.prior ? 1.0 : 0.0;
    const auto l = categorical_probs(good, k, prior);
    const auto g = categorical_probs(bad, k, 1.0);
    std::size_t best = 0;
    double best_score = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < options.n_candidates; ++c) {
        double r = rng.uniform();
        std::size_t i = 0;
        while (i + 1 < k && r >= l[i]) {
            r -= l[i];
            ++i;
        }
        while (l[i] == 0.0 && i > 0) --i; // guard against rounding into an empty tail
        const double score = std::log(std::max(l[i], 1e-300)) - std::log(std::max(g[i], 1e-300));
        if (score > best_score) {
            best_score = score;
            best = i;
        }
    }
    return best;
}

} // namespace

TpeSplit tpe_split(const std::vector<Objectives>& values, double gamma) {
    TpeSplit split;
    const std::size_t n = values.size();
    if (n == 0) return split;
    const auto target = static_cast<std::size_t>(std::ceil(gamma * static_cast<double>(n)));
    std::vector<char> is_good(n, 0);
    if (values.front().size() == 1) {
        std::vector<std::size_t> order(n);
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            return values[a][0] > values[b][0];
        });
        for (std::size_t i = 0; i < std::min(target, n); ++i) is_good[order[i]] = 1;
    } else {
        std::size_t taken = 0;
        for (const auto& front : nondominated_sort(values)) {
            if (taken >= target) break;
            for (auto i : front) is_good[i] = 1;
            taken += front.size();
        }
    }
    for (std::size_t i = 0; i < n; ++i) (is_good[i] ? split.good : split.bad).push_back(i);
    return split;
}

ParamValue tpe_propose(const std::vector<ParamValue>& good, const std::vector<ParamValue>& bad,
                       const ParamDef& def, Rng& rng, const TpeOptions& options) {
    if (def.kind == ParamKind::categorical) {
        auto indices = [&](const std::vector<ParamValue>& vs) {
            std::vector<std::size_t> out;
            for (const auto& v : vs) {
                if (auto i = def.index_of(v)) out.push_back(*i);
            }
            return out;
        };
        return def.choices[propose_categorical(indices(good), indices(bad), def.size(), rng, options)];
    }
    if (good.empty()) {
        return def.finite() ? def.value_at(rng.index(def.size())) : def.at_position(rng.uniform());
    }

    const bool grid = def.finite();
    const double lo = grid ? -0.5 : 0.0;
    const double hi = grid ? static_cast<double>(def.size()) - 0.5 : 1.0;
    auto coord = [&](const ParamValue& v) {
        if (grid) {
            const auto i = def.index_of(v);
            return i ? static_cast<double>(*i) : def.position_of(v) * (hi - 0.5);
        }
        return def.position_of(v);
    };
    std::vector<double> gx;
    std::vector<double> bx;
    for (const auto& v : good) gx.push_back(coord(v));
    for (const auto& v : bad) bx.push_back(coord(v));
    const double min_bw = grid ? options.min_bandwidth : kContinuousMinBandwidth;
    const Kde l(gx, lo, hi, min_bw, options.prior);
    const Kde g(bx, lo, hi, min_bw, true);

    double best = 0.0;
    double best_score = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < options.n_candidates; ++c) {
        double x = l.sample(rng);
        if (grid) x = std::clamp(std::round(x), 0.0, hi - 0.5);
        const double score = l.log_pdf(x) - g.log_pdf(x);
        if (score > best_score) {
            best_score = score;
            best = x;
        }
    }
    return grid ? def.value_at(static_cast<std::size_t>(best)) : def.at_position(best);
}

TpeSampler::TpeSampler(const StudySpec& spec, TpeOptions options)
    : Sampler(spec), options_(options) {}

std::optional<TrialConfig> TpeSampler::ask() {
    if (history_.size() < spec_.sampler.n_startup_trials) return random_config(spec_, rng_);

    std::vector<Objectives> values;
    for (const auto& h : history_) values.push_back(h.values);
    const auto split = tpe_split(values, options_.gamma);

    auto method_index = [&](MethodId id) {
        for (std::size_t i = 0; i < spec_.methods.size(); ++i) {
            if (spec_.methods[i].method == id) return i;
        }
        throw StudyError("history holds a method outside the search space");
    };
    std::vector<std::size_t> good_m;
    std::vector<std::size_t> bad_m;
    for (auto i : split.good) good_m.push_back(method_index(history_[i].config.method));
    for (auto i : split.bad) bad_m.push_back(method_index(history_[i].config.method));

    TrialConfig c;
    const auto& space = spec_.methods[propose_categorical(good_m, bad_m, spec_.methods.size(), rng_, options_)];
    c.method = space.method;
    c.granularity = spec_.granularity;
    c.normalization = spec_.normalizations.front();
    if (spec_.normalization_searched()) {
        auto norm_index = [&](Normalization n) {
            const auto it = std::find(spec_.normalizations.begin(), spec_.normalizations.end(), n);
            return static_cast<std::size_t>(it - spec_.normalizations.begin());
        };
        std::vector<std::size_t> good_n;
        std::vector<std::size_t> bad_n;
        for (auto i : split.good) good_n.push_back(norm_index(history_[i].config.normalization));
        for (auto i : split.bad) bad_n.push_back(norm_index(history_[i].config.normalization));
        c.normalization = spec_.normalizations[propose_categorical(
            good_n, bad_n, spec_.normalizations.size(), rng_, options_)];
    }
    for (const auto& p : space.params) {
        std::vector<ParamValue> good;
        std::vector<ParamValue> bad;
        for (auto i : split.good) {
            const auto& h = history_[i].config;
            if (h.method == c.method && h.params.contains(p.name)) good.push_back(h.params.at(p.name));
        }
        for (auto i : split.bad) {
            const auto& h = history_[i].config;
            if (h.method == c.method && h.params.contains(p.name)) bad.push_back(h.params.at(p.name));
        }
        c.params[p.name] = tpe_propose(good, bad, p, rng_, options_);
    }
    return c;
}

} // namespace xaiopt
