#include "xaiopt/cli.hpp"

#include "xaiopt/diag.hpp"
#include "xaiopt/errors.hpp"
#include "xaiopt/metrics.hpp"
#include "xaiopt/report.hpp"
#include "xaiopt/study.hpp"

#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

namespace xaiopt {
namespace {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

struct Options {
    std::string config;
    std::string dataset;
    std::string out = "xaiopt-out";
    std::optional<std::uint64_t> seed;
    std::size_t workers = default_workers();
    bool resume = false;
    std::string format = "markdown";
    std::optional<std::size_t> stop_after;

    std::string method;
    std::vector<std::string> params;
    std::string normalization = "without_normalize";
    std::string post;
    std::string claim;

    std::string attributions;
    std::vector<std::string> metrics;

    std::string journal;
};

void write_file(const fs::path& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    f << text;
    if (!f) throw StudyError("cannot write " + path.string());
}

StudySpec spec_or_default(const Options& o) {
    return o.config.empty() ? StudySpec{} : load_config(o.config);
}

std::string fmt(double v) {
    std::ostringstream os;
    os.precision(6);
    os << std::fixed << v;
    return os.str();
}

int cmd_optimize(const Options& o, std::ostream& out, std::ostream& err) {
    auto spec = load_config(o.config);
    if (o.seed) spec.sampler.seed = *o.seed;
    if (!o.dataset.empty()) spec.dataset = o.dataset;
    if (spec.dataset.empty()) throw ConfigError("no dataset given (--dataset or 'dataset' in the config)");
    err << "seed " << spec.sampler.seed << "\n";

    const auto binding = bind_model(spec);
    const auto dataset = load_dataset(spec.dataset, *binding.tokenizer);
    if (dataset.empty()) throw StudyError("dataset " + spec.dataset + " has no pairs");

    const fs::path dir(o.out);
    fs::create_directories(dir);
    RunOptions run;
    run.journal = dir / "journal.jsonl";
    run.resume = o.resume;
    run.workers = o.workers;
    run.stop_after = o.stop_after;
    run.on_trial = [&](const TrialRecord& r) {
        err << "trial " << r.index << " " << to_string(r.status) << " " << describe(r.config);
        if (r.objectives) {
            for (double v : *r.objectives) err << " " << fmt(v);
        }
        err << "\n";
    };
    const auto result = run_study(spec, dataset, *binding.model, run);
    if (result.resumed_from > 0) err << "resumed after " << result.resumed_from << " recorded trials\n";
    if (result.interrupted) {
        err << "stopped after " << result.records.size() << " trials; continue with --resume\n";
        return exit_ok;
    }
    if (result.exhausted) err << "search space exhausted after " << result.records.size() << " trials\n";

    const auto report = build_report(result.records, spec);
    write_file(dir / "report.md", render_report(report, ReportFormat::markdown));
    write_file(dir / "report.json", render_report(report, ReportFormat::structured));
    out << render_report(report, parse_report_format(o.format));
    return exit_ok;
}

/// Builds the one-point space for `method` from key=value pairs, reusing the
/// configuration parser for typing and domain checks.
TrialConfig explain_config(const Options& o, const StudySpec& base, MethodSpace& space_out) {
    const auto id = find_method(o.method);
    if (!id) throw ConfigError("unknown method '" + o.method + "'");
    std::ostringstream doc;
    doc << "methods:\n  - " << nlohmann::json(o.method).dump() << "\n";
    if (!o.params.empty()) {
        doc << "method_param:\n  " << nlohmann::json(o.method).dump() << ":\n    parameters:\n";
        for (const auto& kv : o.params) {
            const auto eq = kv.find('=');
            if (eq == std::string::npos || eq == 0) throw ConfigError("--param expects key=value, got '" + kv + "'");
            doc << "      " << kv.substr(0, eq) << ":\n        - " << kv.substr(eq + 1) << "\n";
        }
    }
    const auto mini = parse_config(doc.str());
    space_out = mini.methods.front();
    TrialConfig c;
    c.method = *id;
    c.normalization = parse_normalization(o.normalization);
    c.granularity = base.granularity;
    for (const auto& p : space_out.params) c.params[p.name] = p.value_at(0);
    return c;
}

int cmd_explain(const Options& o, std::ostream& out, std::ostream& err) {
    auto spec = spec_or_default(o);
    if (o.seed) spec.sampler.seed = *o.seed;
    err << "seed " << spec.sampler.seed << "\n";
    MethodSpace space;
    const auto config = explain_config(o, spec, space);
    spec.methods = {space};

    const auto binding = bind_model(spec);
    check_admissible(config.method, binding.model->capabilities());
    PairInstance pair;
    pair.id = "explain";
    pair.post = binding.tokenizer->tokenize(o.post);
    pair.claim = binding.tokenizer->tokenize(o.claim);
    pair.post_gold.bits.assign(pair.post.size(), 0);
    pair.claim_gold.bits.assign(pair.claim.size(), 0);

    const auto settings = resolve_settings(config, spec);
    const auto map = normalize_map(attribute(*binding.model, pair, settings, spec.sampler.seed), config.normalization);
    const double sim = binding.model->similarity(pair);

    if (parse_report_format(o.format) == ReportFormat::structured) {
        ojson j;
        j["method"] = o.method;
        j["config"] = describe(config);
        j["seed"] = spec.sampler.seed;
        j["similarity"] = sim;
        j["post"] = {{"tokens", pair.post.tokens}, {"scores", map.post_scores}};
        j["claim"] = {{"tokens", pair.claim.tokens}, {"scores", map.claim_scores}};
        out << j.dump(2) << "\n";
        return exit_ok;
    }
    out << "method: " << describe(config) << "\n";
    out << "similarity: " << fmt(sim) << "\n\n";
    out << "| Side | Index | Token | Score |\n| --- | ---: | --- | ---: |\n";
    for (std::size_t i = 0; i < pair.post.size(); ++i) {
        out << "| post | " << i << " | " << pair.post.tokens[i] << " | " << fmt(map.post_scores[i]) << " |\n";
    }
    for (std::size_t i = 0; i < pair.claim.size(); ++i) {
        out << "| claim | " << i << " | " << pair.claim.tokens[i] << " | " << fmt(map.claim_scores[i]) << " |\n";
    }
    return exit_ok;
}

MetricId parse_metric(const std::string& name) {
    for (auto id : {MetricId::aopc_comprehensiveness, MetricId::aopc_sufficiency, MetricId::auprc,
                    MetricId::average_precision, MetricId::token_f1, MetricId::token_iou}) {
        if (metric_name(id) == name) return id;
    }
    throw ConfigError("unknown metric '" + name + "'");
}

int cmd_evaluate(const Options& o, std::ostream& out, std::ostream& err) {
    auto spec = spec_or_default(o);
    std::string dataset_path = o.dataset.empty() ? spec.dataset : o.dataset;
    if (dataset_path.empty()) throw ConfigError("no dataset given");
    const auto binding = bind_model(spec);
    const auto dataset = load_dataset(dataset_path, *binding.tokenizer);

    std::vector<MetricId> metrics;
    if (o.metrics.empty()) {
        metrics = {MetricId::aopc_comprehensiveness, MetricId::aopc_sufficiency, MetricId::auprc,
                   MetricId::average_precision, MetricId::token_f1, MetricId::token_iou};
    } else {
        for (const auto& m : o.metrics) metrics.push_back(parse_metric(m));
    }
    EvaluationOptions options;
    options.granularity = spec.granularity;
    if (!spec.aopc_bins.empty()) options.bins = spec.aopc_bins;

    std::ifstream in(o.attributions);
    if (!in) throw InputError("cannot open attributions file " + o.attributions);
    std::map<std::string, const PairInstance*> by_id;
    for (const auto& p : dataset) by_id[p.id] = &p;

    const bool structured = parse_report_format(o.format) == ReportFormat::structured;
    ojson rows = ojson::array();
    std::vector<std::pair<double, std::size_t>> sums(metrics.size());
    if (!structured) {
        out << "| id |";
        for (auto m : metrics) out << " " << metric_name(m) << " |";
        out << "\n| --- |";
        for (std::size_t i = 0; i < metrics.size(); ++i) out << " ---: |";
        out << "\n";
    }
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        AttributionMap map;
        std::string id;
        try {
            const auto j = ojson::parse(line);
            id = j.at("id").get<std::string>();
            map.post_scores = j.at("post_scores").get<std::vector<double>>();
            map.claim_scores = j.at("claim_scores").get<std::vector<double>>();
        } catch (const nlohmann::json::exception& e) {
            throw InputError(o.attributions + ":" + std::to_string(line_no) + ": " + e.what());
        }
        const auto it = by_id.find(id);
        if (it == by_id.end()) {
            warn("instance '" + id + "' not in dataset; skipped");
            continue;
        }
        const auto& pair = *it->second;
        if (map.post_scores.size() != pair.post.size() || map.claim_scores.size() != pair.claim.size()) {
            warn("instance '" + id + "': score lengths " + std::to_string(map.post_scores.size()) + "/" +
                 std::to_string(map.claim_scores.size()) + " do not match token counts " +
                 std::to_string(pair.post.size()) + "/" + std::to_string(pair.claim.size()) + "; skipped");
            continue;
        }
        ojson row = {{"id", id}};
        if (!structured) out << "| " << id << " |";
        for (std::size_t k = 0; k < metrics.size(); ++k) {
            MetricResult r;
            switch (metrics[k]) {
            case MetricId::aopc_comprehensiveness: r = aopc_comprehensiveness(*binding.model, pair, map, options); break;
            case MetricId::aopc_sufficiency: r = aopc_sufficiency(*binding.model, pair, map, options); break;
            default: r = plausibility_metric(metrics[k], pair, map, options.granularity); break;
            }
            const auto name = std::string(metric_name(metrics[k]));
            if (r.skipped) {
                row[name] = nullptr;
                if (!structured) out << " n/a |";
                continue;
            }
            row[name] = r.value;
            sums[k].first += r.value;
            ++sums[k].second;
            if (!structured) out << " " << fmt(r.value) << " |";
        }
        if (!structured) out << "\n";
        rows.push_back(row);
    }
    ojson agg = {{"id", "aggregate"}};
    if (!structured) out << "| aggregate |";
    for (std::size_t k = 0; k < metrics.size(); ++k) {
        const auto name = std::string(metric_name(metrics[k]));
        if (sums[k].second == 0) {
            agg[name] = nullptr;
            if (!structured) out << " n/a |";
        } else {
            const double mean = sums[k].first / static_cast<double>(sums[k].second);
            agg[name] = mean;
            if (!structured) out << " " << fmt(mean) << " |";
        }
    }
    if (structured) {
        out << ojson{{"instances", rows}, {"aggregate", agg}}.dump(2) << "\n";
    } else {
        out << "\n";
    }
    err << "evaluated " << rows.size() << " instance(s)\n";
    return exit_ok;
}

int cmd_validate(const Options& o, std::ostream& out, std::ostream&) {
    if (o.config.empty() && o.dataset.empty()) throw ConfigError("validate needs --config and/or --dataset");
    StudySpec spec;
    if (!o.config.empty()) {
        spec = load_config(o.config);
        const auto n = cardinality(spec);
        out << "config ok: " << spec.methods.size() << " method(s), "
            << (n ? std::to_string(*n) + " configuration(s)" : std::string("unbounded space")) << ", sampler "
            << sampler_name(spec.sampler.kind) << ", " << spec.sampler.n_trials << " trial(s)\n";
    }
    const std::string dataset_path = o.dataset.empty() ? spec.dataset : o.dataset;
    if (!dataset_path.empty()) {
        const WordTokenizer local;
        std::shared_ptr<const Tokenizer> tokenizer;
        if (spec.remote_model()) tokenizer = bind_model(spec).tokenizer;
        const auto dataset = load_dataset(dataset_path, tokenizer ? *tokenizer : local);
        std::size_t no_gold = 0;
        for (const auto& p : dataset) {
            if (p.post_gold.count() + p.claim_gold.count() == 0) ++no_gold;
        }
        out << "dataset ok: " << dataset.size() << " pair(s), " << no_gold << " without gold rationale\n";
    }
    return exit_ok;
}

int cmd_report(const Options& o, std::ostream& out, std::ostream&) {
    const fs::path path = o.journal.empty() ? fs::path(o.out) / "journal.jsonl" : fs::path(o.journal);
    const auto journal = read_journal(path);
    StudySpec spec;
    spec.sampler.kind = parse_sampler(journal.header.sampler);
    spec.sampler.seed = journal.header.seed;
    spec.multi_objective = journal.header.mode == "multi";
    spec.w_f = journal.header.w_f;
    spec.w_p = journal.header.w_p;
    const auto report = build_report(journal.records, spec);
    out << render_report(report, parse_report_format(o.format));
    return exit_ok;
}

} // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Selects and tunes attribution methods for text-pair similarity models"};
    app.name("xaiopt");
    app.require_subcommand(1);
    Options o;
    const auto formats = CLI::IsMember({"markdown", "structured"});

    auto* optimize = app.add_subcommand("optimize", "Run or resume an optimization study");
    optimize->add_option("--config", o.config, "Study configuration (YAML)")->required();
    optimize->add_option("--dataset", o.dataset, "Dataset (JSON lines); overrides the config");
    optimize->add_option("--out", o.out, "Output directory for journal and report");
    optimize->add_option("--seed", o.seed, "Root seed; overrides the config");
    optimize->add_option("--workers", o.workers, "Instance evaluation workers")->check(CLI::PositiveNumber);
    optimize->add_flag("--resume", o.resume, "Continue from the journal in --out");
    optimize->add_option("--format", o.format, "Report format printed to stdout")->check(formats);
    optimize->add_option("--stop-after", o.stop_after, "Stop after this many new trials");

    auto* explain = app.add_subcommand("explain", "Attribute a single pair");
    explain->add_option("--config", o.config, "Configuration providing the model binding");
    explain->add_option("--method", o.method, "Method name, e.g. \"Occlusion\"")->required();
    explain->add_option("--param", o.params, "Method parameter key=value (repeatable)");
    explain->add_option("--normalization", o.normalization, "Score normalization");
    explain->add_option("--post", o.post, "Post text")->required();
    explain->add_option("--claim", o.claim, "Claim text")->required();
    explain->add_option("--seed", o.seed, "Seed for stochastic methods");
    explain->add_option("--format", o.format, "Output format")->check(formats);

    auto* evaluate = app.add_subcommand("evaluate", "Score precomputed attributions");
    evaluate->add_option("--attributions", o.attributions, "JSON lines {id, post_scores, claim_scores}")
        ->required();
    evaluate->add_option("--dataset", o.dataset, "Dataset (JSON lines)");
    evaluate->add_option("--config", o.config, "Configuration providing model, granularity and bins");
    evaluate->add_option("--metrics", o.metrics, "Metric names (default: all)")->delimiter(',');
    evaluate->add_option("--format", o.format, "Output format")->check(formats);

    auto* validate = app.add_subcommand("validate", "Check a configuration and/or dataset");
    validate->add_option("--config", o.config, "Study configuration (YAML)");
    validate->add_option("--dataset", o.dataset, "Dataset (JSON lines)");

    auto* report = app.add_subcommand("report", "Render the report of a journal");
    report->add_option("--journal", o.journal, "Journal file");
    report->add_option("--out", o.out, "Study output directory holding journal.jsonl");
    report->add_option("--format", o.format, "Report format")->check(formats);

    const auto previous = set_warning_handler([&err](std::string_view m) { err << "warning: " << m << "\n"; });
    struct Restore {
        WarningHandler h;
        ~Restore() { set_warning_handler(h); }
    } restore{previous};

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? exit_ok : exit_config;
    }

    try {
        if (*optimize) return cmd_optimize(o, out, err);
        if (*explain) return cmd_explain(o, out, err);
        if (*evaluate) return cmd_evaluate(o, out, err);
        if (*validate) return cmd_validate(o, out, err);
        if (*report) return cmd_report(o, out, err);
    } catch (const ConfigError& e) {
        err << "error: " << e.what() << "\n";
        return exit_config;
    } catch (const InputError& e) {
        err << "error: " << e.what() << "\n";
        return exit_config;
    } catch (const CapabilityError& e) {
        err << "error: " << e.what() << "\n";
        return exit_config;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return exit_runtime;
    }
    return exit_config;
}

} // namespace xaiopt
