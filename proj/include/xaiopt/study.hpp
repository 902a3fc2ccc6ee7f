#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "xaiopt/metrics.hpp"
#include "xaiopt/model.hpp"
#include "xaiopt/samplers.hpp"
#include "xaiopt/searchspace.hpp"
#include "xaiopt/textdata.hpp"

namespace xaiopt {

enum class TrialStatus { complete, pruned, failed, duplicate };

std::string_view to_string(TrialStatus s);
TrialStatus parse_trial_status(std::string_view name);

struct TrialRecord {
    std::size_t index = 0;
    TrialConfig config;
    TrialStatus status = TrialStatus::complete;
    /// Complete and duplicate trials: final values. Pruned: running values
    /// at the pruning checkpoint.
    std::optional<Objectives> objectives;
    std::optional<double> faithfulness;
    std::optional<double> plausibility;
    std::optional<double> overall;
    /// Mean of each metric over the instances where it was defined.
    std::map<std::string, double> per_metric;
    /// Running single-objective value after each checkpoint batch.
    std::vector<double> intermediate;
    std::size_t instances_evaluated = 0;
    std::size_t instances_skipped = 0;
    std::optional<std::size_t> duplicate_of;
    std::string error;
    double wall_time_s = 0.0;
    std::optional<std::uint64_t> peak_mem_bytes;
};

/// Binds the model named by the spec (reference encoder or remote client)
/// together with the tokenizer the dataset must be read with.
struct ModelBinding {
    std::shared_ptr<const SimilarityModel> model;
    std::shared_ptr<const Tokenizer> tokenizer;
};

ModelBinding bind_model(const StudySpec& spec);

struct TrialEvaluation {
    TrialStatus status = TrialStatus::complete;
    std::optional<Objectives> objectives;
    AggregateScores scores;
    std::map<std::string, double> per_metric;
    std::vector<double> intermediate;
    std::size_t evaluated = 0;
    std::size_t skipped = 0;
    std::string error;
};

struct EvaluationContext {
    const StudySpec* spec = nullptr;
    const SimilarityModel* model = nullptr;
    std::span<const PairInstance> dataset;
    std::size_t workers = 1;
    std::uint64_t root_seed = 0;
    std::size_t trial_index = 0;
    /// Running values of earlier complete trials at each checkpoint, for pruning.
    const std::vector<std::vector<double>>* peers = nullptr;
};

/// Checkpoint size for pruning: max(1, N / 5).
std::size_t checkpoint_size(std::size_t instances);

/// Prune iff value is strictly below the median of peers, given at least
/// min_peers peers.
bool prune_decision(double value, std::span<const double> peers, std::size_t min_peers);

/// Attributes, normalizes and scores every instance. A trial fails when more
/// than half of the instances are skipped.
TrialEvaluation evaluate_trial(const TrialConfig& config, const EvaluationContext& ctx);

/// Index of the earliest non-failed, non-duplicate record with an equal config.
std::optional<std::size_t> detect_duplicate(const TrialConfig& config,
                                            std::span<const TrialRecord> history);

/// Value used to rank trials: overall in single-objective mode, the weighted
/// mean of (F, P) otherwise.
double ranking_value(const TrialRecord& record, const StudySpec& spec);

/// Pareto front over complete records, by index.
std::vector<std::size_t> pareto_front(std::span<const TrialRecord> records);

/// Single-objective: argmax overall. Multi-objective: the Pareto-front member
/// maximizing the weighted mean. Ties go to the lower index.
std::size_t best_trial(std::span<const TrialRecord> records, const StudySpec& spec);

// Journal

struct JournalHeader {
    std::string schema = "xaiopt.journal/1";
    std::uint64_t seed = 0;
    std::string sampler;
    std::string mode;
    double w_f = 0.5;
    double w_p = 0.5;
    std::size_t n_trials = 0;
    std::string fingerprint;
};

JournalHeader make_header(const StudySpec& spec);

std::string journal_header_line(const JournalHeader& header);
std::string journal_record_line(const TrialRecord& record);
JournalHeader parse_journal_header(const std::string& line);
TrialRecord parse_journal_record(const std::string& line);

struct Journal {
    JournalHeader header;
    std::vector<TrialRecord> records;
    bool truncated_tail = false;
};

/// Reads a journal; an incomplete final line (interrupted write) is dropped.
Journal read_journal(const std::filesystem::path& path);

/// Same record with timing and memory fields cleared.
TrialRecord without_timing(TrialRecord record);

// Study

struct StudyReport;

struct RunOptions {
    std::filesystem::path journal;
    bool resume = false;
    std::size_t workers = 1;
    /// Stop after this many new trials in this invocation (simulated interruption).
    std::optional<std::size_t> stop_after;
    /// Called after each journaled trial.
    std::function<void(const TrialRecord&)> on_trial;
};

struct StudyResult {
    std::vector<TrialRecord> records;
    bool exhausted = false;
    bool interrupted = false;
    std::size_t resumed_from = 0;
};

/// Runs (or resumes) the study, appending one journal line per trial
/// before the next ask.
StudyResult run_study(const StudySpec& spec, std::span<const PairInstance> dataset,
                      const SimilarityModel& model, const RunOptions& options);

/// Process high-water resident memory, when the platform reports it.
std::optional<std::uint64_t> peak_memory_bytes();

/// Default worker count: logical cores capped at 8.
std::size_t default_workers();

} // namespace xaiopt
