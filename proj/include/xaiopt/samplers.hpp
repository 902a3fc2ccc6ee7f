#pragma once

#include <cstddef>
#include <memory>
#include <optional>
#include <vector>

#include "xaiopt/rng.hpp"
#include "xaiopt/searchspace.hpp"

namespace xaiopt {

/// Objective values, all maximized. One value (overall) or two
/// (faithfulness, plausibility).
using Objectives = std::vector<double>;

struct Observation {
    TrialConfig config;
    Objectives values;
};

/// ask/tell proposal strategy. Identical seed and tell sequence give an
/// identical ask sequence.
class Sampler {
public:
    explicit Sampler(const StudySpec& spec);
    virtual ~Sampler() = default;

    /// Next configuration, or std::nullopt when the space is exhausted.
    virtual std::optional<TrialConfig> ask() = 0;
    virtual void tell(const TrialConfig& config, Objectives values);

    const std::vector<Observation>& history() const { return history_; }
    std::size_t arity() const { return arity_; }

protected:
    const StudySpec& spec_;
    Rng rng_;
    std::vector<Observation> history_;
    std::size_t arity_;
};

std::unique_ptr<Sampler> make_sampler(const StudySpec& spec);

/// Uniform draw: method, then normalization (when searched), then the
/// method's parameters in declaration order.
TrialConfig random_config(const StudySpec& spec, Rng& rng);

class RandomSampler final : public Sampler {
public:
    using Sampler::Sampler;
    std::optional<TrialConfig> ask() override;
};

/// Enumerates every point once: methods in order, then normalizations,
/// then parameters with the last one varying fastest.
class BruteForceSampler final : public Sampler {
public:
    explicit BruteForceSampler(const StudySpec& spec);
    std::optional<TrialConfig> ask() override;

    /// Decodes the flat enumeration index.
    TrialConfig point(std::uint64_t index) const;
    std::uint64_t size() const { return total_; }

private:
    std::uint64_t total_ = 0;
    std::uint64_t cursor_ = 0;
};

struct TpeOptions {
    double gamma = 0.25;
    std::size_t n_candidates = 24;
    double min_bandwidth = 0.5; ///< in grid-index units
    bool prior = true;          ///< add-one smoothing / wide prior component
};

struct TpeSplit {
    std::vector<std::size_t> good;
    std::vector<std::size_t> bad;
};

/// Single objective: good = best ceil(gamma n), ties to earlier trials.
/// Several objectives: whole nondominated fronts until ceil(gamma n) reached.
TpeSplit tpe_split(const std::vector<Objectives>& values, double gamma);

/// Draws n_candidates from l (the good-set density) and returns the one
/// maximizing l/g. Empty good set gives a uniform draw.
ParamValue tpe_propose(const std::vector<ParamValue>& good, const std::vector<ParamValue>& bad,
                       const ParamDef& def, Rng& rng, const TpeOptions& options = {});

class TpeSampler final : public Sampler {
public:
    TpeSampler(const StudySpec& spec, TpeOptions options = {});
    std::optional<TrialConfig> ask() override;

private:
    TpeOptions options_;
};

/// Fronts of maximization points, best first; indices ascending within a front.
std::vector<std::vector<std::size_t>> nondominated_sort(const std::vector<Objectives>& points);

/// Crowding distance of each point of one front; boundary points are infinite.
std::vector<double> crowding_distance(const std::vector<Objectives>& front);

struct Nsga2Options {
    double crossover_prob = 0.9;
    /// Per-gene mutation probability; 1/d when absent.
    std::optional<double> mutation_prob;
};

/// Offspring by binary tournament on (rank, crowding), uniform crossover
/// and per-gene resampling mutation.
std::vector<TrialConfig> nsga2_step(const std::vector<Observation>& population, std::size_t count,
                                    const StudySpec& spec, Rng& rng,
                                    const Nsga2Options& options = {});

/// Elitist survivor selection: indices of the `count` best by rank and crowding.
std::vector<std::size_t> nsga2_select(const std::vector<Objectives>& values, std::size_t count);

class Nsga2Sampler final : public Sampler {
public:
    Nsga2Sampler(const StudySpec& spec, Nsga2Options options = {});
    std::optional<TrialConfig> ask() override;

    std::size_t population_size() const { return population_size_; }

private:
    Nsga2Options options_;
    std::size_t population_size_;
    std::vector<TrialConfig> queue_;
    std::size_t queue_pos_ = 0;
    std::size_t generation_start_ = 0; ///< history index where the current generation begins
    std::vector<Observation> parents_;
    bool first_generation_ = true;
};

} // namespace xaiopt
