#include "xaiopt/attribution.hpp"

#include "xaiopt/diag.hpp"
#include "xaiopt/errors.hpp"
#include "xaiopt/linear_fit.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace xaiopt {
namespace {

constexpr std::size_t kMaxEnumerationUnits = 25;

struct Unit {
    bool claim = false;
    std::vector<std::size_t> tokens;
};

std::vector<std::vector<std::size_t>> members_of(const std::vector<std::size_t>& groups) {
    std::vector<std::vector<std::size_t>> out;
    for (std::size_t t = 0; t < groups.size(); ++t) {
        if (groups[t] >= out.size()) out.resize(groups[t] + 1);
        out[groups[t]].push_back(t);
    }
    std::erase_if(out, [](const auto& m) { return m.empty(); });
    return out;
}

std::vector<Unit> side_units(const TokenizedText& text, bool claim, bool use_groups) {
    std::vector<Unit> units;
    if (use_groups) {
        for (auto& m : members_of(text.word_group)) units.push_back({claim, std::move(m)});
    } else {
        for (std::size_t t = 0; t < text.size(); ++t) units.push_back({claim, {t}});
    }
    return units;
}

std::vector<Unit> joint_units(const PairInstance& pair, bool use_groups) {
    auto units = side_units(pair.post, false, use_groups);
    auto claim = side_units(pair.claim, true, use_groups);
    units.insert(units.end(), claim.begin(), claim.end());
    return units;
}

Ablation ablate_unit(const PairInstance& pair, const Unit& u) {
    Ablation a;
    auto& flags = u.claim ? a.claim : a.post;
    flags.assign((u.claim ? pair.claim : pair.post).size(), 0);
    for (auto t : u.tokens) flags[t] = 1;
    return a;
}

/// Value function over joint units: absent units are ablated.
CoalitionGame pair_game(const SimilarityModel& model, const PairInstance& pair,
                        const std::vector<Unit>& units) {
    return [&model, &pair, &units](const std::vector<std::vector<std::uint8_t>>& coalitions) {
        std::vector<Ablation> batch;
        batch.reserve(coalitions.size());
        for (const auto& z : coalitions) {
            Ablation a;
            for (std::size_t u = 0; u < units.size(); ++u) {
                if (z[u]) continue;
                auto& flags = units[u].claim ? a.claim : a.post;
                if (flags.empty()) {
                    flags.assign((units[u].claim ? pair.claim : pair.post).size(), 0);
                }
                for (auto t : units[u].tokens) flags[t] = 1;
            }
            batch.push_back(std::move(a));
        }
        return model.score(pair, batch);
    };
}

AttributionMap spread(MethodId method, const PairInstance& pair, const std::vector<Unit>& units,
                      const Vector& values) {
    AttributionMap map;
    map.method = method;
    map.post_scores.assign(pair.post.size(), 0.0);
    map.claim_scores.assign(pair.claim.size(), 0.0);
    for (std::size_t u = 0; u < units.size(); ++u) {
        auto& side = units[u].claim ? map.claim_scores : map.post_scores;
        for (auto t : units[u].tokens) side[t] = values(static_cast<Eigen::Index>(u));
    }
    return map;
}

/// Deltas sim(x) - sim(x without unit), one model batch for all units.
AttributionMap unit_deltas(MethodId method, const SimilarityModel& model, const PairInstance& pair,
                           const std::vector<Unit>& units) {
    std::vector<Ablation> batch{Ablation::none()};
    for (const auto& u : units) batch.push_back(ablate_unit(pair, u));
    const auto scores = model.score(pair, batch);
    Vector deltas(static_cast<Eigen::Index>(units.size()));
    for (std::size_t u = 0; u < units.size(); ++u) {
        deltas(static_cast<Eigen::Index>(u)) = scores[0] - scores[u + 1];
    }
    return spread(method, pair, units, deltas);
}

std::vector<std::uint8_t> bits_of(std::uint64_t code, std::size_t m) {
    std::vector<std::uint8_t> z(m);
    for (std::size_t j = 0; j < m; ++j) z[j] = static_cast<std::uint8_t>((code >> j) & 1U);
    return z;
}

double binomial(std::size_t n, std::size_t k) {
    double r = 1.0;
    for (std::size_t i = 1; i <= k; ++i) {
        r = r * static_cast<double>(n - k + i) / static_cast<double>(i);
    }
    return r;
}

bool enumeration_fits(std::size_t m, std::size_t n_samples, std::uint64_t extra) {
    if (m > kMaxEnumerationUnits) return false;
    const std::uint64_t total = (std::uint64_t{1} << m);
    return n_samples + extra >= total;
}

} // namespace

AttributionMap occlusion_token(const SimilarityModel& model, const PairInstance& pair,
                               const OcclusionOptions& options) {
    if (options.window == 0) throw ConfigError("occlusion window must be >= 1");
    if (options.stride == 0) throw ConfigError("occlusion stride must be >= 1");

    struct Placement {
        bool claim;
        std::size_t start;
        std::size_t width;
    };
    std::vector<Placement> placements;
    for (bool claim : {false, true}) {
        const auto n = (claim ? pair.claim : pair.post).size();
        auto w = options.window;
        if (w > n) {
            warn("occlusion window " + std::to_string(w) + " exceeds " +
                 (claim ? "claim" : "post") + " length " + std::to_string(n) + "; clamped");
            w = n;
        }
        for (std::size_t start = 0; w > 0 && start + w <= n; start += options.stride) {
            placements.push_back({claim, start, w});
        }
    }

    std::vector<Ablation> batch{Ablation::none()};
    for (const auto& p : placements) {
        Unit u{p.claim, {}};
        for (std::size_t t = p.start; t < p.start + p.width; ++t) u.tokens.push_back(t);
        batch.push_back(ablate_unit(pair, u));
    }
    const auto scores = model.score(pair, batch);

    AttributionMap map;
    map.method = MethodId::occlusion;
    map.post_scores.assign(pair.post.size(), 0.0);
    map.claim_scores.assign(pair.claim.size(), 0.0);
    std::vector<std::size_t> post_cover(pair.post.size(), 0);
    std::vector<std::size_t> claim_cover(pair.claim.size(), 0);
    for (std::size_t i = 0; i < placements.size(); ++i) {
        const auto& p = placements[i];
        auto& sums = p.claim ? map.claim_scores : map.post_scores;
        auto& cover = p.claim ? claim_cover : post_cover;
        const double delta = scores[0] - scores[i + 1];
        for (std::size_t t = p.start; t < p.start + p.width; ++t) {
            sums[t] += delta;
            ++cover[t];
        }
    }
    for (std::size_t t = 0; t < post_cover.size(); ++t) {
        if (post_cover[t] > 0) map.post_scores[t] /= static_cast<double>(post_cover[t]);
    }
    for (std::size_t t = 0; t < claim_cover.size(); ++t) {
        if (claim_cover[t] > 0) map.claim_scores[t] /= static_cast<double>(claim_cover[t]);
    }
    return map;
}

AttributionMap occlusion_word(const SimilarityModel& model, const PairInstance& pair,
                              std::string_view separators) {
    std::vector<std::size_t> post_groups;
    std::vector<std::size_t> claim_groups;
    try {
        post_groups = word_groups(pair.post, separators);
        claim_groups = word_groups(pair.claim, separators);
    } catch (const InputError& e) {
        throw ConfigError(std::string("invalid regex_condition: ") + e.what());
    }
    std::vector<Unit> units;
    for (auto& m : members_of(post_groups)) units.push_back({false, std::move(m)});
    for (auto& m : members_of(claim_groups)) units.push_back({true, std::move(m)});
    return unit_deltas(MethodId::occlusion_word_level, model, pair, units);
}

AttributionMap feature_ablation(const SimilarityModel& model, const PairInstance& pair,
                                bool use_token_groups) {
    return unit_deltas(MethodId::feature_ablation, model, pair,
                       joint_units(pair, use_token_groups));
}

Vector kernel_shap_values(std::size_t m, const CoalitionGame& game,
                          const KernelShapOptions& options, Rng& rng) {
    if (options.n_samples < 2) throw ConfigError("Kernel Shap n_samples must be >= 2");
    if (m == 0) return Vector(0);
    if (options.exact && m > kMaxEnumerationUnits) {
        throw ConfigError("refusing full coalition enumeration over " + std::to_string(m) +
                          " units (limit " + std::to_string(kMaxEnumerationUnits) + ")");
    }

    std::vector<std::vector<std::uint8_t>> coalitions{std::vector<std::uint8_t>(m, 1),
                                                      std::vector<std::uint8_t>(m, 0)};
    std::vector<double> weights;
    if (m > 1) {
        const bool exact = options.exact || enumeration_fits(m, options.n_samples, 2);
        if (exact) {
            const std::uint64_t total = std::uint64_t{1} << m;
            for (std::uint64_t code = 1; code + 1 < total; ++code) {
                auto z = bits_of(code, m);
                const auto s = static_cast<std::size_t>(std::count(z.begin(), z.end(), 1));
                weights.push_back(static_cast<double>(m - 1) /
                                  (binomial(m, s) * static_cast<double>(s * (m - s))));
                coalitions.push_back(std::move(z));
            }
        } else {
            // Sizes drawn in proportion to the total kernel mass per size; the
            // sampled coalitions then carry equal weight.
            std::vector<double> size_mass(m, 0.0);
            double mass = 0.0;
            for (std::size_t s = 1; s < m; ++s) {
                size_mass[s] = static_cast<double>(m - 1) / static_cast<double>(s * (m - s));
                mass += size_mass[s];
            }
            std::vector<std::size_t> order(m);
            for (std::size_t i = 0; i < options.n_samples; ++i) {
                double r = rng.uniform() * mass;
                std::size_t s = 1;
                while (s < m - 1 && r >= size_mass[s]) {
                    r -= size_mass[s];
                    ++s;
                }
                for (std::size_t j = 0; j < m; ++j) order[j] = j;
                for (std::size_t j = 0; j < s; ++j) {
                    std::swap(order[j], order[j + rng.index(m - j)]);
                }
                std::vector<std::uint8_t> z(m, 0);
                for (std::size_t j = 0; j < s; ++j) z[order[j]] = 1;
                coalitions.push_back(std::move(z));
                weights.push_back(1.0);
            }
        }
    }

    const auto values = game(coalitions);
    const double f_full = values[0];
    const double f_empty = values[1];
    const double total = f_full - f_empty;
    Vector phi(static_cast<Eigen::Index>(m));
    if (m == 1) {
        phi(0) = total;
        return phi;
    }

    // Eliminate the last unit through the efficiency constraint.
    const auto rows = static_cast<Eigen::Index>(weights.size());
    const auto p = static_cast<Eigen::Index>(m - 1);
    Matrix x(rows, p);
    Vector y(rows);
    Vector w(rows);
    for (Eigen::Index r = 0; r < rows; ++r) {
        const auto& z = coalitions[static_cast<std::size_t>(r) + 2];
        const double last = z[m - 1];
        for (Eigen::Index j = 0; j < p; ++j) x(r, j) = z[static_cast<std::size_t>(j)] - last;
        y(r) = values[static_cast<std::size_t>(r) + 2] - f_empty - last * total;
        w(r) = weights[static_cast<std::size_t>(r)];
    }
    const Vector beta = weighted_least_squares(x, y, w);
    phi.head(p) = beta;
    phi(p) = total - beta.sum();
    return phi;
}

Vector lime_coefficients(std::size_t m, const CoalitionGame& game, const LimeOptions& options,
                         Rng& rng) {
    if (options.n_samples < 1) throw ConfigError("Lime n_samples must be >= 1");
    if (!(options.kernel_width > 0.0)) throw ConfigError("Lime kernel_width must be > 0");
    if (options.alpha < 0.0) throw ConfigError("Lime alpha must be >= 0");
    if (m == 0) return Vector(0);
    if (options.n_samples < m) {
        warn("Lime n_samples " + std::to_string(options.n_samples) + " is below the " +
             std::to_string(m) + " interpretable features; the surrogate fit is rank deficient");
    }

    std::vector<std::vector<std::uint8_t>> masks;
    if (enumeration_fits(m, options.n_samples, 0)) {
        const std::uint64_t total = std::uint64_t{1} << m;
        for (std::uint64_t code = 0; code < total; ++code) masks.push_back(bits_of(code, m));
    } else {
        for (std::size_t i = 0; i < options.n_samples; ++i) {
            std::vector<std::uint8_t> z(m);
            for (auto& b : z) b = rng.bernoulli(0.5) ? 1 : 0;
            masks.push_back(std::move(z));
        }
    }

    const auto values = game(masks);
    const auto rows = static_cast<Eigen::Index>(masks.size());
    Matrix x(rows, static_cast<Eigen::Index>(m));
    Vector y(rows);
    Vector w(rows);
    const double kw2 = options.kernel_width * options.kernel_width;
    for (Eigen::Index r = 0; r < rows; ++r) {
        const auto& z = masks[static_cast<std::size_t>(r)];
        const auto present = static_cast<double>(std::count(z.begin(), z.end(), 1));
        for (std::size_t j = 0; j < m; ++j) x(r, static_cast<Eigen::Index>(j)) = z[j];
        y(r) = values[static_cast<std::size_t>(r)];
        double d = 0.0;
        if (options.distance == DistanceMode::euclidean) {
            d = std::sqrt(static_cast<double>(m) - present);
        } else {
            d = present > 0.0 ? 1.0 - std::sqrt(present / static_cast<double>(m)) : 1.0;
        }
        w(r) = std::exp(-d * d / kw2);
    }
    LassoOptions lasso;
    lasso.alpha = options.alpha;
    return weighted_lasso(x, y, w, lasso).coefficients;
}

AttributionMap lime(const SimilarityModel& model, const PairInstance& pair,
                    const LimeOptions& options, Rng& rng) {
    const auto units = joint_units(pair, options.use_token_groups);
    const auto coef = lime_coefficients(units.size(), pair_game(model, pair, units), options, rng);
    return spread(MethodId::lime, pair, units, coef);
}

AttributionMap kernel_shap(const SimilarityModel& model, const PairInstance& pair,
                           const KernelShapOptions& options, Rng& rng) {
    const auto units = joint_units(pair, options.use_token_groups);
    const auto phi = kernel_shap_values(units.size(), pair_game(model, pair, units), options, rng);
    return spread(MethodId::kernel_shap, pair, units, phi);
}

AttributionMap random_attribution(const PairInstance& pair, Rng& rng) {
    AttributionMap map;
    map.method = MethodId::random_control;
    for (std::size_t t = 0; t < pair.post.size(); ++t) map.post_scores.push_back(rng.uniform());
    for (std::size_t t = 0; t < pair.claim.size(); ++t) map.claim_scores.push_back(rng.uniform());
    return map;
}

} // namespace xaiopt
