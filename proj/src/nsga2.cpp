#include "xaiopt/samplers.hpp"

#include "xaiopt/errors.hpp"

#include <algorithm>
#include <limits>
#include <numeric>

namespace xaiopt {
namespace {

bool dominates(const Objectives& p, const Objectives& q) {
    bool strictly = false;
    for (std::size_t k = 0; k < p.size(); ++k) {
        if (p[k] < q[k]) return false;
        if (p[k] > q[k]) strictly = true;
    }
    return strictly;
}

struct Ranking {
    std::vector<std::size_t> rank;
    std::vector<double> crowding;
};

Ranking rank_population(const std::vector<Objectives>& values) {
    Ranking r;
    r.rank.assign(values.size(), 0);
    r.crowding.assign(values.size(), 0.0);
    const auto fronts = nondominated_sort(values);
    for (std::size_t f = 0; f < fronts.size(); ++f) {
        std::vector<Objectives> pts;
        for (auto i : fronts[f]) pts.push_back(values[i]);
        const auto cd = crowding_distance(pts);
        for (std::size_t j = 0; j < fronts[f].size(); ++j) {
            r.rank[fronts[f][j]] = f;
            r.crowding[fronts[f][j]] = cd[j];
        }
    }
    return r;
}

const MethodSpace& space_of(const StudySpec& spec, MethodId id) {
    const auto* s = spec.find(id);
    if (s == nullptr) throw StudyError("population holds a method outside the search space");
    return *s;
}

ParamValue resample(const ParamDef& p, Rng& rng) {
    return p.finite() ? p.value_at(rng.index(p.size())) : p.at_position(rng.uniform());
}

} // namespace

std::vector<std::vector<std::size_t>> nondominated_sort(const std::vector<Objectives>& points) {
    const std::size_t n = points.size();
    std::vector<std::vector<std::size_t>> dominated(n);
    std::vector<std::size_t> count(n, 0);
    std::vector<std::vector<std::size_t>> fronts;
    std::vector<std::size_t> current;
    for (std::size_t p = 0; p < n; ++p) {
        for (std::size_t q = 0; q < n; ++q) {
            if (p == q) continue;
            if (dominates(points[p], points[q])) dominated[p].push_back(q);
            else if (dominates(points[q], points[p])) ++count[p];
        }
        if (count[p] == 0) current.push_back(p);
    }
    while (!current.empty()) {
        fronts.push_back(current);
        std::vector<std::size_t> next;
        for (auto p : current) {
            for (auto q : dominated[p]) {
                if (--count[q] == 0) next.push_back(q);
            }
        }
        std::sort(next.begin(), next.end());
        current = std::move(next);
    }
    return fronts;
}

std::vector<double> crowding_distance(const std::vector<Objectives>& front) {
    const std::size_t n = front.size();
    std::vector<double> d(n, 0.0);
    if (n == 0) return d;
    const double inf = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < front.front().size(); ++k) {
        std::vector<std::size_t> order(n);
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(),
                         [&](std::size_t a, std::size_t b) { return front[a][k] < front[b][k]; });
        d[order.front()] = inf;
        d[order.back()] = inf;
        const double range = front[order.back()][k] - front[order.front()][k];
        if (range <= 0.0) continue;
        for (std::size_t j = 1; j + 1 < n; ++j) {
            d[order[j]] += (front[order[j + 1]][k] - front[order[j - 1]][k]) / range;
        }
    }
    return d;
}

std::vector<std::size_t> nsga2_select(const std::vector<Objectives>& values, std::size_t count) {
    std::vector<std::size_t> chosen;
    for (const auto& front : nondominated_sort(values)) {
        if (chosen.size() >= count) break;
        if (chosen.size() + front.size() <= count) {
            chosen.insert(chosen.end(), front.begin(), front.end());
            continue;
        }
        std::vector<Objectives> pts;
        for (auto i : front) pts.push_back(values[i]);
        const auto cd = crowding_distance(pts);
        std::vector<std::size_t> order(front.size());
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return cd[a] > cd[b]; });
        for (std::size_t j = 0; chosen.size() < count; ++j) chosen.push_back(front[order[j]]);
    }
    return chosen;
}

std::vector<TrialConfig> nsga2_step(const std::vector<Observation>& population, std::size_t count,
                                    const StudySpec& spec, Rng& rng, const Nsga2Options& options) {
    if (population.empty()) throw StudyError("nsga2_step needs a nonempty population");
    std::vector<Objectives> values;
    for (const auto& o : population) values.push_back(o.values);
    const auto ranking = rank_population(values);

    auto tournament = [&]() -> const TrialConfig& {
        const auto a = rng.index(population.size());
        const auto b = rng.index(population.size());
        const bool b_better = ranking.rank[b] < ranking.rank[a] ||
                              (ranking.rank[b] == ranking.rank[a] && ranking.crowding[b] > ranking.crowding[a]);
        return population[b_better ? b : a].config;
    };

    std::vector<TrialConfig> offspring;
    while (offspring.size() < count) {
        const TrialConfig& p1 = tournament();
        const TrialConfig& p2 = tournament();
        TrialConfig child = p1;
        if (rng.uniform() < options.crossover_prob) {
            if (p1.method == p2.method) {
                if (rng.bernoulli(0.5)) child.normalization = p2.normalization;
                for (auto& [name, value] : child.params) {
                    if (rng.bernoulli(0.5)) value = p2.params.at(name);
                }
            } else if (rng.bernoulli(0.5)) {
                child = p2;
            }
        }

        const auto& space = space_of(spec, child.method);
        const std::size_t genes = 1 + (spec.normalization_searched() ? 1 : 0) + space.params.size();
        const double pm = options.mutation_prob.value_or(1.0 / static_cast<double>(genes));
        if (rng.uniform() < pm) {
            const auto& fresh = spec.methods[rng.index(spec.methods.size())];
            if (fresh.method != child.method) {
                child.method = fresh.method;
                child.params.clear();
                for (const auto& p : fresh.params) child.params[p.name] = resample(p, rng);
            }
        }
        if (spec.normalization_searched() && rng.uniform() < pm) {
            child.normalization = spec.normalizations[rng.index(spec.normalizations.size())];
        }
        for (const auto& p : space_of(spec, child.method).params) {
            if (rng.uniform() < pm) child.params[p.name] = resample(p, rng);
        }
        if (const auto problems = validate(child, spec); !problems.empty()) {
            throw StudyError("nsga2 produced an invalid offspring: " + problems.front());
        }
        offspring.push_back(std::move(child));
    }
    return offspring;
}

Nsga2Sampler::Nsga2Sampler(const StudySpec& spec, Nsga2Options options)
    : Sampler(spec), options_(options) {
    auto p = std::max<std::size_t>(4, spec.sampler.n_trials / 4);
    population_size_ = p + (p % 2);
}

std::optional<TrialConfig> Nsga2Sampler::ask() {
    if (queue_pos_ >= queue_.size()) {
        std::vector<Observation> pool = parents_;
        pool.insert(pool.end(), history_.begin() + static_cast<std::ptrdiff_t>(generation_start_),
                    history_.end());
        generation_start_ = history_.size();
        queue_.clear();
        queue_pos_ = 0;
        if (first_generation_ || pool.empty()) {
            first_generation_ = false;
            for (std::size_t i = 0; i < population_size_; ++i) queue_.push_back(random_config(spec_, rng_));
        } else {
            std::vector<Objectives> values;
            for (const auto& o : pool) values.push_back(o.values);
            std::vector<Observation> survivors;
            for (auto i : nsga2_select(values, population_size_)) survivors.push_back(pool[i]);
            parents_ = std::move(survivors);
            queue_ = nsga2_step(parents_, population_size_, spec_, rng_, options_);
        }
    }
    return queue_[queue_pos_++];
}

} // namespace xaiopt
