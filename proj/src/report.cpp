#include "xaiopt/report.hpp"

#include "xaiopt/errors.hpp"

#include <algorithm>
#include <cstdio>
#include <map>
#include <sstream>

#include <json.hpp>

namespace xaiopt {
namespace {

using ojson = nlohmann::ordered_json;

std::string fixed(double v, int digits) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

std::string megabytes(const std::optional<std::uint64_t>& bytes) {
    return bytes ? fixed(static_cast<double>(*bytes) / (1024.0 * 1024.0), 1) : "n/a";
}

std::string hours(double seconds) { return fixed(seconds / 3600.0, 4); }

} // namespace

StudyReport build_report(std::span<const TrialRecord> records, const StudySpec& spec) {
    StudyReport rep;
    rep.sampler = std::string(sampler_name(spec.sampler.kind));
    rep.mode = spec.multi_objective ? "multi" : "single";
    rep.w_f = spec.w_f;
    rep.w_p = spec.w_p;
    rep.total_trials = records.size();
    for (const auto& r : records) {
        switch (r.status) {
        case TrialStatus::complete: ++rep.complete; break;
        case TrialStatus::pruned: ++rep.pruned; break;
        case TrialStatus::failed: ++rep.failed; break;
        case TrialStatus::duplicate: ++rep.duplicates; break;
        }
        rep.wall_time_s += r.wall_time_s;
        if (r.peak_mem_bytes) rep.peak_mem_bytes = std::max(rep.peak_mem_bytes.value_or(0), *r.peak_mem_bytes);
    }

    rep.best_trial = best_trial(records, spec);
    const auto& best = *std::find_if(records.begin(), records.end(),
                                     [&](const TrialRecord& r) { return r.index == rep.best_trial; });
    rep.best_method = std::string(method_name(best.config.method));
    rep.best_config = describe(best.config);
    rep.best_faithfulness = best.faithfulness.value_or(0.0);
    rep.best_plausibility = best.plausibility.value_or(0.0);
    rep.best_score = ranking_value(best, spec);
    rep.best_find_at = rep.best_trial;
    for (const auto& r : records) {
        if (r.status != TrialStatus::complete && r.status != TrialStatus::duplicate) continue;
        if (ranking_value(r, spec) == rep.best_score) {
            rep.best_find_at = r.index;
            break;
        }
    }

    std::map<MethodId, const TrialRecord*> per_method;
    for (const auto& r : records) {
        if (r.status != TrialStatus::complete) continue;
        auto& slot = per_method[r.config.method];
        if (slot == nullptr || ranking_value(r, spec) > ranking_value(*slot, spec)) slot = &r;
    }
    for (const auto& [id, r] : per_method) {
        MethodRow row;
        row.method = std::string(method_name(id));
        row.trial = r->index;
        row.faithfulness = r->faithfulness.value_or(0.0);
        row.plausibility = r->plausibility.value_or(0.0);
        row.average = weighted_overall(row.faithfulness, row.plausibility, spec.w_f, spec.w_p);
        rep.methods.push_back(row);
    }
    std::stable_sort(rep.methods.begin(), rep.methods.end(), [](const MethodRow& a, const MethodRow& b) {
        return a.average != b.average ? a.average > b.average : a.trial < b.trial;
    });

    if (spec.multi_objective) {
        for (auto i : pareto_front(records)) {
            const auto& r = *std::find_if(records.begin(), records.end(),
                                          [&](const TrialRecord& x) { return x.index == i; });
            rep.front.push_back({i, std::string(method_name(r.config.method)), *r.faithfulness, *r.plausibility});
        }
    }
    return rep;
}

StudyReport without_timing(StudyReport report) {
    report.wall_time_s = 0.0;
    report.peak_mem_bytes.reset();
    return report;
}

ReportFormat parse_report_format(std::string_view name) {
    if (name == "markdown") return ReportFormat::markdown;
    if (name == "structured") return ReportFormat::structured;
    throw ConfigError("unknown report format '" + std::string(name) + "' (markdown or structured)");
}

std::string render_report(const StudyReport& rep, ReportFormat format) {
    if (format == ReportFormat::structured) {
        ojson j;
        j["sampler"] = rep.sampler;
        j["mode"] = rep.mode;
        j["weights"] = {{"faithfulness", rep.w_f}, {"plausibility", rep.w_p}};
        j["best"] = {{"trial", rep.best_trial},
                     {"method", rep.best_method},
                     {"config", rep.best_config},
                     {"faithfulness", rep.best_faithfulness},
                     {"plausibility", rep.best_plausibility},
                     {"score", rep.best_score},
                     {"best_find_at", rep.best_find_at}};
        j["methods"] = ojson::array();
        for (const auto& m : rep.methods) {
            j["methods"].push_back({{"Methods", m.method},
                                    {"trial", m.trial},
                                    {"Faithfulness", m.faithfulness},
                                    {"Plausibility", m.plausibility},
                                    {"Average", m.average}});
        }
        j["pareto_front"] = ojson::array();
        for (const auto& p : rep.front) {
            j["pareto_front"].push_back({{"trial", p.trial},
                                         {"method", p.method},
                                         {"Faithfulness", p.faithfulness},
                                         {"Plausibility", p.plausibility}});
        }
        j["totals"] = {{"all_trials", rep.total_trials}, {"complete", rep.complete},
                       {"pruned", rep.pruned},           {"failed", rep.failed},
                       {"number_dup", rep.duplicates},   {"wall_time_s", rep.wall_time_s},
                       {"peak_mem_bytes", rep.peak_mem_bytes ? ojson(*rep.peak_mem_bytes) : ojson(nullptr)}};
        return j.dump(2) + "\n";
    }

    std::ostringstream os;
    os << "# Explanation method study\n\n";
    os << "## Method comparison\n\n";
    os << "| Methods | Faithfulness | Plausibility | Average |\n";
    os << "| --- | ---: | ---: | ---: |\n";
    for (const auto& m : rep.methods) {
        os << "| " << m.method << " | " << fixed(m.faithfulness, 3) << " | " << fixed(m.plausibility, 3) << " | "
           << fixed(m.average, 3) << " |\n";
    }
    os << "\n## Sampler statistics\n\n";
    os << "| Field | " << rep.sampler << " |\n| --- | --- |\n";
    if (rep.mode == "multi") {
        os << "| Total Trials | " << rep.total_trials << " |\n";
        os << "| Best Method | " << rep.best_method << " |\n";
        os << "| Faithfulness | " << fixed(rep.best_faithfulness, 3) << " |\n";
        os << "| Plausibility | " << fixed(rep.best_plausibility, 3) << " |\n";
        os << "| Peak Memory (MB) | " << megabytes(rep.peak_mem_bytes) << " |\n";
        os << "| Time (hours) | " << hours(rep.wall_time_s) << " |\n";
        os << "| Duplicates | " << rep.duplicates << " |\n";
    } else {
        os << "| method_best | " << rep.best_method << " |\n";
        os << "| overall_score | " << fixed(rep.best_score, 3) << " |\n";
        os << "| best_find_at | " << rep.best_find_at << " |\n";
        os << "| peak memory usage (MB) | " << megabytes(rep.peak_mem_bytes) << " |\n";
        os << "| time (hours) | " << hours(rep.wall_time_s) << " |\n";
        os << "| number_dup | " << rep.duplicates << " |\n";
        os << "| all_trials | " << rep.total_trials << " |\n";
    }
    os << "\nBest trial " << rep.best_trial << ": `" << rep.best_config << "`\n";
    os << "\nComplete " << rep.complete << ", pruned " << rep.pruned << ", failed " << rep.failed << ".\n";
    if (rep.mode == "multi") {
        if (rep.front.empty()) throw StudyError("multi-objective report has an empty Pareto front");
        os << "\n## Pareto front\n\n";
        os << "| Trial | Method | Faithfulness | Plausibility |\n| ---: | --- | ---: | ---: |\n";
        for (const auto& p : rep.front) {
            os << "| " << p.trial << " | " << p.method << " | " << fixed(p.faithfulness, 3) << " | "
               << fixed(p.plausibility, 3) << " |\n";
        }
    }
    return os.str();
}

StudyReport parse_report(const std::string& structured) {
    try {
        const auto j = ojson::parse(structured);
        StudyReport rep;
        rep.sampler = j.at("sampler").get<std::string>();
        rep.mode = j.at("mode").get<std::string>();
        rep.w_f = j.at("weights").at("faithfulness").get<double>();
        rep.w_p = j.at("weights").at("plausibility").get<double>();
        const auto& b = j.at("best");
        rep.best_trial = b.at("trial").get<std::size_t>();
        rep.best_method = b.at("method").get<std::string>();
        rep.best_config = b.at("config").get<std::string>();
        rep.best_faithfulness = b.at("faithfulness").get<double>();
        rep.best_plausibility = b.at("plausibility").get<double>();
        rep.best_score = b.at("score").get<double>();
        rep.best_find_at = b.at("best_find_at").get<std::size_t>();
        for (const auto& m : j.at("methods")) {
            rep.methods.push_back({m.at("Methods").get<std::string>(), m.at("trial").get<std::size_t>(),
                                   m.at("Faithfulness").get<double>(), m.at("Plausibility").get<double>(),
                                   m.at("Average").get<double>()});
        }
        for (const auto& p : j.at("pareto_front")) {
            rep.front.push_back({p.at("trial").get<std::size_t>(), p.at("method").get<std::string>(),
                                 p.at("Faithfulness").get<double>(), p.at("Plausibility").get<double>()});
        }
        const auto& t = j.at("totals");
        rep.total_trials = t.at("all_trials").get<std::size_t>();
        rep.complete = t.at("complete").get<std::size_t>();
        rep.pruned = t.at("pruned").get<std::size_t>();
        rep.failed = t.at("failed").get<std::size_t>();
        rep.duplicates = t.at("number_dup").get<std::size_t>();
        rep.wall_time_s = t.at("wall_time_s").get<double>();
        if (!t.at("peak_mem_bytes").is_null()) rep.peak_mem_bytes = t.at("peak_mem_bytes").get<std::uint64_t>();
        return rep;
    } catch (const nlohmann::json::exception& e) {
        throw InputError(std::string("malformed structured report: ") + e.what());
    }
}

} // namespace xaiopt
