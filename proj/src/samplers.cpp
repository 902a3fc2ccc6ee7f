#include "xaiopt/samplers.hpp"

#include "xaiopt/errors.hpp"

namespace xaiopt {

Sampler::Sampler(const StudySpec& spec)
    : spec_(spec), rng_(spec.sampler.seed), arity_(spec.multi_objective ? 2 : 1) {
    if (spec.methods.empty()) throw ConfigError("search space has no methods");
}

void Sampler::tell(const TrialConfig& config, Objectives values) {
    if (values.size() != arity_) {
        throw StudyError("sampler expected " + std::to_string(arity_) + " objective value(s), got " +
                         std::to_string(values.size()));
    }
    history_.push_back({config, std::move(values)});
}

TrialConfig random_config(const StudySpec& spec, Rng& rng) {
    TrialConfig c;
    const auto& space = spec.methods[rng.index(spec.methods.size())];
    c.method = space.method;
    c.granularity = spec.granularity;
    c.normalization = spec.normalization_searched()
                          ? spec.normalizations[rng.index(spec.normalizations.size())]
                          : spec.normalizations.front();
    for (const auto& p : space.params) {
        c.params[p.name] = p.finite() ? p.value_at(rng.index(p.size())) : p.at_position(rng.uniform());
    }
    return c;
}

std::unique_ptr<Sampler> make_sampler(const StudySpec& spec) {
    switch (spec.sampler.kind) {
    case SamplerKind::random: return std::make_unique<RandomSampler>(spec);
    case SamplerKind::brute_force: return std::make_unique<BruteForceSampler>(spec);
    case SamplerKind::tpe: return std::make_unique<TpeSampler>(spec);
    case SamplerKind::nsga2: return std::make_unique<Nsga2Sampler>(spec);
    }
    throw ConfigError("unknown sampler");
}

std::optional<TrialConfig> RandomSampler::ask() { return random_config(spec_, rng_); }

BruteForceSampler::BruteForceSampler(const StudySpec& spec) : Sampler(spec) {
    const auto n = cardinality(spec);
    if (!n) throw ConfigError("BruteForceSampler needs a finite space; give every float range a step");
    total_ = *n;
}

TrialConfig BruteForceSampler::point(std::uint64_t index) const {
    const std::uint64_t norms = spec_.normalizations.size();
    for (const auto& space : spec_.methods) {
        std::uint64_t grid = 1;
        for (const auto& p : space.params) grid *= p.size();
        if (index >= grid * norms) {
            index -= grid * norms;
            continue;
        }
        TrialConfig c;
        c.method = space.method;
        c.granularity = spec_.granularity;
        c.normalization = spec_.normalizations[index / grid];
        std::uint64_t rest = index % grid;
        for (auto it = space.params.rbegin(); it != space.params.rend(); ++it) {
            c.params[it->name] = it->value_at(rest % it->size());
            rest /= it->size();
        }
        return c;
    }
    throw Error("brute-force index out of range");
}

std::optional<TrialConfig> BruteForceSampler::ask() {
    if (cursor_ >= total_) return std::nullopt;
    return point(cursor_++);
}

} // namespace xaiopt
