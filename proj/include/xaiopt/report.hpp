#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "xaiopt/study.hpp"

namespace xaiopt {

struct MethodRow {
    std::string method;
    std::size_t trial = 0;
    double faithfulness = 0.0;
    double plausibility = 0.0;
    double average = 0.0;

    friend bool operator==(const MethodRow&, const MethodRow&) = default;
};

struct FrontPoint {
    std::size_t trial = 0;
    std::string method;
    double faithfulness = 0.0;
    double plausibility = 0.0;

    friend bool operator==(const FrontPoint&, const FrontPoint&) = default;
};

struct StudyReport {
    std::string sampler;
    std::string mode;
    double w_f = 0.5;
    double w_p = 0.5;
    std::size_t best_trial = 0;
    std::string best_method;
    std::string best_config;
    double best_faithfulness = 0.0;
    double best_plausibility = 0.0;
    double best_score = 0.0;
    std::size_t best_find_at = 0;
    /// Best trial per method, sorted by average descending.
    std::vector<MethodRow> methods;
    std::vector<FrontPoint> front;
    std::size_t total_trials = 0;
    std::size_t complete = 0;
    std::size_t pruned = 0;
    std::size_t failed = 0;
    std::size_t duplicates = 0;
    double wall_time_s = 0.0;
    std::optional<std::uint64_t> peak_mem_bytes;

    friend bool operator==(const StudyReport&, const StudyReport&) = default;
};

/// Throws StudyError when no trial completed.
StudyReport build_report(std::span<const TrialRecord> records, const StudySpec& spec);

/// Same report with wall time and memory cleared.
StudyReport without_timing(StudyReport report);

enum class ReportFormat { markdown, structured };

ReportFormat parse_report_format(std::string_view name);

std::string render_report(const StudyReport& report, ReportFormat format);

/// Inverse of the structured rendering.
StudyReport parse_report(const std::string& structured);

} // namespace xaiopt
