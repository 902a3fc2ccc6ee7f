#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <atomic>

#include "support.hpp"
#include "xaiopt/errors.hpp"
#include "xaiopt/reference_encoder.hpp"
#include "xaiopt/report.hpp"
#include "xaiopt/study.hpp"

using namespace xaiopt;
using testing::pair_of;

namespace {

class CountingModel final : public SimilarityModel {
public:
    ModelCapabilities capabilities() const override { return inner_.capabilities(); }
    mutable std::atomic<std::size_t> calls{0};

protected:
    std::vector<double> score_batch(const TokenizedText& post, const TokenizedText& claim,
                                    std::span<const Ablation> ablations) const override {
        calls += ablations.size();
        return inner_.score(post, claim, ablations);
    }

private:
    ReferenceEncoder inner_;
};

std::vector<PairInstance> small_dataset() {
    std::vector<PairInstance> out;
    const char* rows[][2] = {{"flood warning for the river town", "river flood warning"},
                             {"minister denies tax rise rumour", "tax rise denied"},
                             {"new vaccine trial shows results", "vaccine trial results"},
                             {"wildfire smoke covers the valley", "valley wildfire smoke"},
                             {"bank raises interest rates again", "interest rates raised"}};
    std::size_t i = 0;
    for (const auto& r : rows) {
        auto p = pair_of(r[0], r[1], "id" + std::to_string(i++));
        for (std::size_t t = 0; t < p.post.size(); ++t) {
            for (const auto& c : p.claim.tokens) p.post_gold.bits[t] |= p.post.tokens[t] == c;
        }
        p.claim_gold.bits.assign(p.claim.size(), 1);
        out.push_back(p);
    }
    return out;
}

StudySpec spec_of(const std::string& sampler, std::size_t n_trials, bool multi = false) {
    std::string doc = R"(
model_path: "reference"
methods: ["Feature Ablation", "Occlusion", "Random"]
multiple_object: )" + std::string(multi ? "true" : "false") + R"(
Optuna_parameters:
  sampler: ")" + sampler + "\"\n  n_trials: " + std::to_string(n_trials) + R"(
  n_startup_trials: 3
  seed: 21
method_param:
  Occlusion:
    parameters:
      sliding_window_shapes: [[1, 1024], [2, 1024]]
      strides: [[1, 1024]]
)";
    return parse_config(doc);
}

TrialRecord complete(std::size_t index, double f, double p, double w_f = 0.5, double w_p = 0.5) {
    TrialRecord r;
    r.index = index;
    r.config.method = MethodId::feature_ablation;
    r.faithfulness = f;
    r.plausibility = p;
    r.overall = weighted_overall(f, p, w_f, w_p);
    r.objectives = Objectives{*r.overall};
    return r;
}

} // namespace

TEST_CASE("pruning rule") {
    CHECK(checkpoint_size(3) == 1);
    CHECK(checkpoint_size(20) == 4);
    const std::vector<double> peers{1, 2, 3, 4};
    CHECK(prune_decision(2.4, peers, 4));
    CHECK_FALSE(prune_decision(2.5, peers, 4));
    CHECK_FALSE(prune_decision(0.0, peers, 5));
}

TEST_CASE("best trial tie breaks") {
    auto single = spec_of("TPESampler", 5);
    std::vector<TrialRecord> rs{complete(0, 0.7, 0.5), complete(1, 0.5, 0.7), complete(2, 0.1, 0.2)};
    CHECK(best_trial(rs, single) == 0);
    rs[0].status = TrialStatus::failed;
    CHECK(best_trial(rs, single) == 1);

    auto multi = spec_of("NSGAIISampler", 5, true);
    std::vector<TrialRecord> ms{complete(0, 0.958, 0.622), complete(1, 0.957, 0.646), complete(2, 0.5, 0.5)};
    for (auto& r : ms) r.objectives = Objectives{*r.faithfulness, *r.plausibility};
    CHECK(pareto_front(ms) == std::vector<std::size_t>{0, 1});
    CHECK(best_trial(ms, multi) == 1);
    CHECK_THROWS_AS(best_trial(std::vector<TrialRecord>{}, multi), StudyError);
}

TEST_CASE("duplicate detection skips failed and duplicate records") {
    std::vector<TrialRecord> rs{complete(0, 0.5, 0.5), complete(1, 0.5, 0.5), complete(2, 0.5, 0.5)};
    rs[0].status = TrialStatus::failed;
    rs[1].config.method = MethodId::random_control;
    CHECK(detect_duplicate(rs[2].config, std::span(rs).first(2)) == std::nullopt);
    CHECK(detect_duplicate(rs[1].config, rs) == std::optional<std::size_t>(1));
}

TEST_CASE("journal record round trip") {
    TrialRecord r = complete(3, 0.25, 0.75);
    r.config = {MethodId::occlusion, {{"sliding_window_shapes", std::vector<std::int64_t>{2, 1024}},
                                      {"flag", true}, {"x", 0.1}, {"name", std::string("cosine")}}};
    r.per_metric = {{"auprc", 0.5}};
    r.intermediate = {0.4, 0.45};
    r.instances_evaluated = 9;
    r.instances_skipped = 1;
    r.wall_time_s = 1.5;
    r.peak_mem_bytes = 1234;
    const auto line = journal_record_line(r);
    const auto back = parse_journal_record(line);
    CHECK(journal_record_line(back) == line);
    CHECK(back.config == r.config);
    CHECK_THROWS_AS(parse_journal_record("{\"index\": 0}"), InputError);

    const auto spec = spec_of("TPESampler", 5);
    const auto h = parse_journal_header(journal_header_line(make_header(spec)));
    CHECK(h.fingerprint == space_fingerprint(spec));
    CHECK(h.mode == "single");
}

TEST_CASE("duplicates reuse results without model calls") {
    const auto data = small_dataset();
    auto spec = spec_of("RandomSampler", 6);
    spec.methods.erase(spec.methods.begin() + 1, spec.methods.end());
    const auto dir = testing::temp_dir("dups");
    CountingModel model;
    std::vector<std::size_t> calls_after;
    RunOptions o;
    o.journal = dir / "journal.jsonl";
    o.on_trial = [&](const TrialRecord&) { calls_after.push_back(model.calls); };
    const auto res = run_study(spec, data, model, o);
    REQUIRE(res.records.size() == 6);
    CHECK(res.records[0].status == TrialStatus::complete);
    for (std::size_t i = 1; i < 6; ++i) {
        CHECK(res.records[i].status == TrialStatus::duplicate);
        CHECK(res.records[i].duplicate_of == std::optional<std::size_t>(0));
        CHECK(res.records[i].objectives == res.records[0].objectives);
        CHECK(calls_after[i] == calls_after[0]);
    }
    const auto rep = build_report(res.records, spec);
    CHECK(rep.duplicates == 5);
    CHECK(rep.best_find_at == 0);
    CHECK(read_journal(o.journal).records.size() == 6);
}

TEST_CASE("resume reproduces the uninterrupted run") {
    const auto data = small_dataset();
    const auto spec = spec_of("TPESampler", 8);
    const ReferenceEncoder enc;
    const auto dir = testing::temp_dir("resume");

    RunOptions full;
    full.journal = dir / "full.jsonl";
    full.workers = 2;
    const auto a = run_study(spec, data, enc, full);

    RunOptions part;
    part.journal = dir / "part.jsonl";
    part.stop_after = 3;
    const auto first = run_study(spec, data, enc, part);
    CHECK(first.interrupted);
    CHECK(first.records.size() == 3);
    // Simulate a crash in the middle of the next write.
    {
        std::ofstream f(part.journal, std::ios::app | std::ios::binary);
        f << "{\"index\": 3, \"conf";
    }
    CHECK(read_journal(part.journal).truncated_tail);
    part.stop_after.reset();
    CHECK_THROWS_AS(run_study(spec, data, enc, part), ConfigError);
    part.resume = true;
    const auto b = run_study(spec, data, enc, part);
    CHECK(b.resumed_from == 3);
    REQUIRE(a.records.size() == b.records.size());
    for (std::size_t i = 0; i < a.records.size(); ++i) {
        CHECK(journal_record_line(without_timing(a.records[i])) == journal_record_line(without_timing(b.records[i])));
    }
    CHECK_FALSE(read_journal(part.journal).truncated_tail);
    CHECK(without_timing(build_report(a.records, spec)) == without_timing(build_report(b.records, spec)));

    auto other = spec;
    other.sampler.seed = 99;
    CHECK_THROWS(run_study(other, data, enc, part));
}

TEST_CASE("multi-objective study yields a front") {
    const auto data = small_dataset();
    const auto spec = spec_of("NSGAIISampler", 8, true);
    const ReferenceEncoder enc;
    RunOptions o;
    o.journal = testing::temp_dir("multi") / "journal.jsonl";
    const auto res = run_study(spec, data, enc, o);
    CHECK(res.records.size() == 8);
    const auto rep = build_report(res.records, spec);
    CHECK_FALSE(rep.front.empty());
    const auto text = render_report(rep, ReportFormat::structured);
    CHECK(parse_report(text) == rep);
    CHECK(render_report(rep, ReportFormat::markdown).find("Pareto front") != std::string::npos);
}

TEST_CASE("capability mismatch is refused before any trial") {
    const auto data = small_dataset();
    auto spec = spec_of("RandomSampler", 2);
    spec = parse_config(R"(
methods: ["Saliency"]
Optuna_parameters:
  sampler: "RandomSampler"
  n_trials: 2
)");
    const testing::AdditiveModel m({1}, {1});
    RunOptions o;
    o.journal = testing::temp_dir("caps") / "journal.jsonl";
    CHECK_THROWS_AS(run_study(spec, data, m, o), CapabilityError);
    CHECK_FALSE(std::filesystem::exists(o.journal));
}
