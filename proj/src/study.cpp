#include "xaiopt/study.hpp"

#include "xaiopt/diag.hpp"
#include "xaiopt/errors.hpp"
#include "xaiopt/reference_encoder.hpp"
#include "xaiopt/remote_model.hpp"

#include <sys/resource.h>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <thread>
#include <variant>

namespace xaiopt {
namespace {

constexpr std::size_t kMaxConsecutiveFailures = 3;

struct InstanceOutcome {
    std::optional<InstanceScores> scores;
    std::string error;
    bool fatal = false;
};

InstanceOutcome evaluate_instance(const TrialConfig& config, const MethodSettings& settings,
                                  const EvaluationOptions& options, const EvaluationContext& ctx,
                                  const PairInstance& pair) {
    InstanceOutcome out;
    try {
        const auto seed = stream_seed(ctx.root_seed, ctx.trial_index, pair.id);
        const auto raw = attribute(*ctx.model, pair, settings, seed);
        const auto map = normalize_map(raw, config.normalization);
        out.scores = score_instance(*ctx.model, pair, map, options);
    } catch (const ConfigError& e) {
        out.error = e.what();
        out.fatal = true;
    } catch (const CapabilityError& e) {
        out.error = e.what();
        out.fatal = true;
    } catch (const std::exception& e) {
        out.error = e.what();
    }
    return out;
}

void run_batch(const TrialConfig& config, const MethodSettings& settings, const EvaluationOptions& options,
               const EvaluationContext& ctx, std::size_t begin, std::size_t end,
               std::vector<InstanceOutcome>& outcomes) {
    const std::size_t n = end - begin;
    const std::size_t threads = std::clamp<std::size_t>(ctx.workers, 1, n);
    if (threads == 1) {
        for (std::size_t i = begin; i < end; ++i) {
            outcomes[i] = evaluate_instance(config, settings, options, ctx, ctx.dataset[i]);
        }
        return;
    }
    std::atomic<std::size_t> next{begin};
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (std::size_t t = 0; t < threads; ++t) {
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < end; i = next++) {
                outcomes[i] = evaluate_instance(config, settings, options, ctx, ctx.dataset[i]);
            }
        });
    }
    for (auto& th : pool) th.join();
}

std::vector<InstanceScores> collect(const std::vector<InstanceOutcome>& outcomes, std::size_t end) {
    std::vector<InstanceScores> out;
    for (std::size_t i = 0; i < end; ++i) {
        if (outcomes[i].scores) out.push_back(*outcomes[i].scores);
    }
    return out;
}

double single_value(const AggregateScores& a) { return a.overall; }

} // namespace

ModelBinding bind_model(const StudySpec& spec) {
    ModelBinding b;
    if (spec.remote_model()) {
        RemoteOptions opts;
        opts.url = spec.model_path;
        opts.max_in_flight = spec.remote.max_in_flight;
        opts.retries = spec.remote.retries;
        opts.timeout_s = spec.remote.timeout_s;
        auto remote = std::make_shared<const RemoteModel>(opts);
        b.model = remote;
        b.tokenizer = remote;
        return b;
    }
    ReferenceEncoderConfig cfg;
    cfg.vocab_buckets = spec.reference.vocab_buckets;
    cfg.dim = spec.reference.dim;
    cfg.layers = spec.reference.layers;
    cfg.heads = spec.reference.heads;
    cfg.ffn_dim = spec.reference.ffn_dim;
    cfg.init_std = spec.reference.init_std;
    cfg.seed = spec.reference.seed;
    b.model = std::make_shared<const ReferenceEncoder>(cfg);
    b.tokenizer = std::make_shared<const WordTokenizer>();
    return b;
}

std::size_t checkpoint_size(std::size_t instances) { return std::max<std::size_t>(1, instances / 5); }

bool prune_decision(double value, std::span<const double> peers, std::size_t min_peers) {
    if (peers.size() < std::max<std::size_t>(min_peers, 1)) return false;
    std::vector<double> v(peers.begin(), peers.end());
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    const double median = n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
    return value < median;
}

TrialEvaluation evaluate_trial(const TrialConfig& config, const EvaluationContext& ctx) {
    const StudySpec& spec = *ctx.spec;
    TrialEvaluation ev;
    const std::size_t n = ctx.dataset.size();
    if (n == 0) throw StudyError("dataset is empty");

    MethodSettings settings;
    try {
        settings = resolve_settings(config, spec);
    } catch (const std::bad_variant_access&) {
        throw ConfigError("parameter types do not match method " + std::string(method_name(config.method)));
    }
    EvaluationOptions options;
    options.granularity = config.granularity;
    if (!spec.aopc_bins.empty()) options.bins = spec.aopc_bins;

    auto fail = [&](std::string message) {
        ev.status = TrialStatus::failed;
        ev.objectives.reset();
        ev.error = std::move(message);
        return ev;
    };

    std::vector<InstanceOutcome> outcomes(n);
    const std::size_t batch = checkpoint_size(n);
    const bool pruning = spec.sampler.pruning && !spec.multi_objective && ctx.peers != nullptr;
    bool tracking = true;
    for (std::size_t begin = 0; begin < n; begin += batch) {
        const std::size_t end = std::min(n, begin + batch);
        run_batch(config, settings, options, ctx, begin, end, outcomes);
        for (std::size_t i = begin; i < end; ++i) {
            if (outcomes[i].fatal) {
                ev.evaluated = i + 1;
                return fail(outcomes[i].error);
            }
            if (!outcomes[i].scores) {
                warn("trial " + std::to_string(ctx.trial_index) + ": instance '" + ctx.dataset[i].id +
                     "' skipped: " + outcomes[i].error);
            }
        }
        ev.evaluated = end;
        if (!tracking || end == n) continue;

        std::optional<double> running;
        try {
            const auto partial = collect(outcomes, end);
            if (!partial.empty()) running = single_value(aggregate(partial, spec.w_f, spec.w_p));
        } catch (const StudyError&) {
        }
        if (!running) {
            tracking = false;
            continue;
        }
        ev.intermediate.push_back(*running);
        if (!pruning) continue;
        const std::size_t step = ev.intermediate.size() - 1;
        std::vector<double> at_step;
        for (const auto& p : *ctx.peers) {
            if (p.size() > step) at_step.push_back(p[step]);
        }
        if (prune_decision(*running, at_step, spec.sampler.pruning_min_peers)) {
            ev.status = TrialStatus::pruned;
            ev.objectives = Objectives{*running};
            ev.skipped = end - collect(outcomes, end).size();
            return ev;
        }
    }

    const auto usable = collect(outcomes, n);
    ev.skipped = n - usable.size();
    if (ev.skipped * 2 > n) {
        return fail(std::to_string(ev.skipped) + " of " + std::to_string(n) + " instances skipped");
    }
    try {
        ev.scores = aggregate(usable, spec.w_f, spec.w_p);
    } catch (const StudyError& e) {
        return fail(e.what());
    }
    std::map<std::string, std::pair<double, std::size_t>> sums;
    for (const auto& s : usable) {
        for (const auto& m : s.per_metric) {
            if (m.skipped) continue;
            auto& acc = sums[std::string(metric_name(m.metric))];
            acc.first += m.value;
            ++acc.second;
        }
    }
    for (const auto& [name, acc] : sums) ev.per_metric[name] = acc.first / static_cast<double>(acc.second);
    ev.objectives = spec.multi_objective ? Objectives{ev.scores.faithfulness, ev.scores.plausibility}
                                         : Objectives{ev.scores.overall};
    return ev;
}

std::optional<std::size_t> detect_duplicate(const TrialConfig& config, std::span<const TrialRecord> history) {
    for (const auto& r : history) {
        if (r.status == TrialStatus::failed || r.status == TrialStatus::duplicate) continue;
        if (r.config == config) return r.index;
    }
    return std::nullopt;
}

double ranking_value(const TrialRecord& record, const StudySpec& spec) {
    if (!record.objectives) throw StudyError("trial " + std::to_string(record.index) + " has no objectives");
    const auto& o = *record.objectives;
    if (!spec.multi_objective) return o.at(0);
    return weighted_overall(o.at(0), o.at(1), spec.w_f, spec.w_p);
}

std::vector<std::size_t> pareto_front(std::span<const TrialRecord> records) {
    std::vector<std::size_t> ids;
    std::vector<Objectives> points;
    for (const auto& r : records) {
        if (r.status != TrialStatus::complete || !r.faithfulness || !r.plausibility) continue;
        ids.push_back(r.index);
        points.push_back({*r.faithfulness, *r.plausibility});
    }
    std::vector<std::size_t> front;
    if (points.empty()) return front;
    const auto fronts = nondominated_sort(points);
    for (auto i : fronts.front()) front.push_back(ids[i]);
    return front;
}

std::size_t best_trial(std::span<const TrialRecord> records, const StudySpec& spec) {
    std::vector<std::size_t> candidates;
    if (spec.multi_objective) {
        candidates = pareto_front(records);
    } else {
        for (const auto& r : records) {
            if (r.status == TrialStatus::complete) candidates.push_back(r.index);
        }
    }
    if (candidates.empty()) throw StudyError("no complete trials");
    auto record_at = [&](std::size_t index) -> const TrialRecord& {
        for (const auto& r : records) {
            if (r.index == index) return r;
        }
        throw StudyError("missing trial " + std::to_string(index));
    };
    std::sort(candidates.begin(), candidates.end());
    std::size_t best = candidates.front();
    double best_value = ranking_value(record_at(best), spec);
    for (auto i : candidates) {
        const double v = ranking_value(record_at(i), spec);
        if (v > best_value) {
            best_value = v;
            best = i;
        }
    }
    return best;
}

std::optional<std::uint64_t> peak_memory_bytes() {
    rusage usage{};
    if (getrusage(RUSAGE_SELF, &usage) != 0 || usage.ru_maxrss <= 0) return std::nullopt;
    return static_cast<std::uint64_t>(usage.ru_maxrss) * 1024U;
}

std::size_t default_workers() {
    const auto hw = std::thread::hardware_concurrency();
    return std::clamp<std::size_t>(hw == 0 ? 1 : hw, 1, 8);
}

namespace {

void check_header(const JournalHeader& found, const JournalHeader& expected) {
    auto mismatch = [](const std::string& field, const std::string& a, const std::string& b) {
        throw StudyError("journal does not match the configuration: " + field + " is " + a + ", expected " + b);
    };
    if (found.seed != expected.seed) mismatch("seed", std::to_string(found.seed), std::to_string(expected.seed));
    if (found.sampler != expected.sampler) mismatch("sampler", found.sampler, expected.sampler);
    if (found.mode != expected.mode) mismatch("mode", found.mode, expected.mode);
    if (found.w_f != expected.w_f || found.w_p != expected.w_p) mismatch("weights", "different", "identical");
    if (found.fingerprint != expected.fingerprint) mismatch("search space", found.fingerprint, expected.fingerprint);
}

void append_line(const std::filesystem::path& path, const std::string& line) {
    std::ofstream out(path, std::ios::binary | std::ios::app);
    out << line << '\n';
    out.flush();
    if (!out) throw StudyError("cannot write journal " + path.string());
}

void rewrite_journal(const std::filesystem::path& path, const JournalHeader& header,
                     const std::vector<TrialRecord>& records) {
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        out << journal_header_line(header) << '\n';
        for (const auto& r : records) out << journal_record_line(r) << '\n';
        if (!out) throw StudyError("cannot write journal " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

} // namespace

StudyResult run_study(const StudySpec& spec, std::span<const PairInstance> dataset, const SimilarityModel& model,
                      const RunOptions& options) {
    if (dataset.empty()) throw StudyError("dataset is empty");
    if (options.journal.empty()) throw StudyError("no journal path given");
    check_admissible(spec, model.capabilities());

    auto sampler = make_sampler(spec);
    const auto header = make_header(spec);
    StudyResult result;
    std::vector<std::vector<double>> peers;
    std::size_t consecutive_failures = 0;

    auto observe = [&](const TrialRecord& r) {
        if (r.status != TrialStatus::failed && r.objectives) sampler->tell(r.config, *r.objectives);
        if (r.status == TrialStatus::complete && !r.intermediate.empty()) peers.push_back(r.intermediate);
        consecutive_failures = r.status == TrialStatus::failed ? consecutive_failures + 1 : 0;
    };

    const bool exists = std::filesystem::exists(options.journal) && std::filesystem::file_size(options.journal) > 0;
    if (options.resume && exists) {
        auto journal = read_journal(options.journal);
        check_header(journal.header, header);
        for (const auto& r : journal.records) {
            const auto asked = sampler->ask();
            if (!asked || !(*asked == r.config)) {
                throw StudyError("journal diverges from the sampler at trial " + std::to_string(r.index));
            }
            observe(r);
        }
        result.records = std::move(journal.records);
        result.resumed_from = result.records.size();
        if (journal.truncated_tail) warn("journal ended in a partial line; it was dropped");
        rewrite_journal(options.journal, header, result.records);
    } else {
        if (exists) {
            throw ConfigError("journal " + options.journal.string() + " already exists; resume it or choose another output");
        }
        if (options.journal.has_parent_path()) std::filesystem::create_directories(options.journal.parent_path());
        rewrite_journal(options.journal, header, {});
    }

    EvaluationContext ctx;
    ctx.spec = &spec;
    ctx.model = &model;
    ctx.dataset = dataset;
    ctx.workers = std::max<std::size_t>(1, options.workers);
    ctx.root_seed = spec.sampler.seed;
    ctx.peers = &peers;

    std::size_t new_trials = 0;
    while (result.records.size() < spec.sampler.n_trials) {
        if (options.stop_after && new_trials >= *options.stop_after) {
            result.interrupted = true;
            break;
        }
        const auto asked = sampler->ask();
        if (!asked) {
            result.exhausted = true;
            break;
        }
        const auto started = std::chrono::steady_clock::now();
        TrialRecord r;
        r.index = result.records.size();
        r.config = *asked;
        if (const auto original = detect_duplicate(r.config, result.records)) {
            const auto& o = result.records[*original];
            r.status = TrialStatus::duplicate;
            r.duplicate_of = *original;
            r.objectives = o.objectives;
            r.faithfulness = o.faithfulness;
            r.plausibility = o.plausibility;
            r.overall = o.overall;
            r.per_metric = o.per_metric;
        } else if (const auto problems = validate(r.config, spec); !problems.empty()) {
            r.status = TrialStatus::failed;
            r.error = problems.front();
        } else {
            ctx.trial_index = r.index;
            auto ev = evaluate_trial(r.config, ctx);
            r.status = ev.status;
            r.objectives = ev.objectives;
            r.intermediate = std::move(ev.intermediate);
            r.instances_evaluated = ev.evaluated;
            r.instances_skipped = ev.skipped;
            r.error = ev.error;
            if (ev.status == TrialStatus::complete) {
                r.faithfulness = ev.scores.faithfulness;
                r.plausibility = ev.scores.plausibility;
                r.overall = ev.scores.overall;
                r.per_metric = std::move(ev.per_metric);
            }
        }
        r.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
        r.peak_mem_bytes = peak_memory_bytes();
        if (r.status == TrialStatus::failed) warn("trial " + std::to_string(r.index) + " failed: " + r.error);

        append_line(options.journal, journal_record_line(r));
        observe(r);
        result.records.push_back(r);
        ++new_trials;
        if (options.on_trial) options.on_trial(r);
        if (consecutive_failures >= kMaxConsecutiveFailures) {
            throw StudyError("aborting after " + std::to_string(kMaxConsecutiveFailures) +
                             " consecutive failed trials; last error: " + r.error);
        }
    }
    return result;
}

} // namespace xaiopt
