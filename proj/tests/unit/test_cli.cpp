#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sstream>

#include <json.hpp>

#include "support.hpp"
#include "xaiopt/cli.hpp"

using namespace xaiopt;
namespace fs = std::filesystem;

namespace {

struct Run {
    int code = 0;
    std::string out;
    std::string err;
};

Run cli(std::vector<std::string> args) {
    args.insert(args.begin(), "xaiopt");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out;
    std::ostringstream err;
    Run r;
    r.code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
    r.out = out.str();
    r.err = err.str();
    return r;
}

fs::path source(const std::string& rel) { return fs::path(XAIOPT_SOURCE_DIR) / rel; }

fs::path small_config(const fs::path& dir, const std::string& sampler = "TPESampler", std::size_t trials = 4) {
    const auto path = dir / "study.yaml";
    testing::write_text(path, "methods: [\"Feature Ablation\", \"Occlusion\", \"Random\"]\n"
                              "dataset: " + source("data/fixture_pairs.jsonl").string() + "\n"
                              "Optuna_parameters:\n"
                              "  sampler: \"" + sampler + "\"\n"
                              "  n_trials: " + std::to_string(trials) + "\n"
                              "  n_startup_trials: 2\n"
                              "  seed: 5\n"
                              "method_param:\n"
                              "  Occlusion:\n"
                              "    parameters:\n"
                              "      sliding_window_shapes: [[1, 1024], [3, 1024]]\n"
                              "      strides: [[1, 1024]]\n");
    return path;
}

} // namespace

TEST_CASE("usage errors exit with 2") {
    CHECK(cli({}).code == exit_config);
    CHECK(cli({"frobnicate"}).code == exit_config);
    CHECK(cli({"optimize"}).code == exit_config);
    CHECK(cli({"--help"}).code == exit_ok);
}

TEST_CASE("validate") {
    const auto r = cli({"validate", "--config", source("configs/fixture_study.yaml").string()});
    CHECK(r.code == exit_ok);
    CHECK(r.out.find("config ok: 6 method(s), 21 configuration(s)") != std::string::npos);
    CHECK(r.out.find("dataset ok: 20 pair(s), 0 without gold rationale") != std::string::npos);

    const auto dir = testing::temp_dir("cli-validate");
    testing::write_text(dir / "bad_sampler.yaml", "methods: [\"Lime\"]\nOptuna_parameters:\n  sampler: \"CmaEsSampler\"\n");
    CHECK(cli({"validate", "--config", (dir / "bad_sampler.yaml").string()}).code == exit_config);
    testing::write_text(dir / "bad_method.yaml", "methods: [\"ConservativeLRP\"]\n");
    const auto bad = cli({"validate", "--config", (dir / "bad_method.yaml").string()});
    CHECK(bad.code == exit_config);
    CHECK(bad.err.find("ConservativeLRP") != std::string::npos);
    testing::write_text(dir / "bad.jsonl", "{\"id\": \"a\", \"post\": \"x\"}\n");
    CHECK(cli({"validate", "--dataset", (dir / "bad.jsonl").string()}).code == exit_config);
    CHECK(cli({"validate", "--config", (dir / "missing.yaml").string()}).code == exit_config);
}

TEST_CASE("optimize, refuse overwrite, resume and report") {
    const auto dir = testing::temp_dir("cli-optimize");
    const auto config = small_config(dir).string();
    const auto out = (dir / "out").string();

    const auto first = cli({"optimize", "--config", config, "--out", out, "--stop-after", "2"});
    CHECK(first.code == exit_ok);
    CHECK(first.err.find("continue with --resume") != std::string::npos);
    CHECK(cli({"optimize", "--config", config, "--out", out}).code == exit_config);

    const auto resumed = cli({"optimize", "--config", config, "--out", out, "--resume", "--format", "structured"});
    CHECK(resumed.code == exit_ok);
    const auto rep = nlohmann::json::parse(resumed.out);
    CHECK(rep.at("totals").at("all_trials") == 4);
    CHECK(fs::exists(fs::path(out) / "report.md"));
    CHECK(fs::exists(fs::path(out) / "report.json"));

    const auto again = cli({"report", "--out", out});
    CHECK(again.code == exit_ok);
    CHECK(again.out == testing::read_text(fs::path(out) / "report.md"));
    CHECK(again.out.find("| Methods | Faithfulness | Plausibility | Average |") != std::string::npos);

    CHECK(cli({"report", "--journal", (dir / "none.jsonl").string()}).code == exit_config);
}

TEST_CASE("unreachable model exits with 3") {
    const auto dir = testing::temp_dir("cli-remote");
    testing::write_text(dir / "remote_occ.yaml",
                        "model_path: \"http://127.0.0.1:1\"\nmethods: [\"Feature Ablation\"]\n"
                        "dataset: " + source("data/fixture_pairs.jsonl").string() + "\n"
                        "remote:\n  retries: 0\n  timeout_s: 1\n");
    const auto r = cli({"optimize", "--config", (dir / "remote_occ.yaml").string(), "--out", (dir / "o").string()});
    CHECK(r.code == exit_runtime);
}

TEST_CASE("explain") {
    const auto md = cli({"explain", "--method", "Occlusion", "--param", "sliding_window_shapes=[2, 1024]",
                         "--param", "strides=[1, 1024]", "--post", "the river flooded", "--claim", "river flood"});
    CHECK(md.code == exit_ok);
    CHECK(md.out.find("| Side | Index | Token | Score |") != std::string::npos);

    const auto js = cli({"explain", "--method", "Lime", "--param", "n_samples=40", "--post", "tax rise denied",
                         "--claim", "no tax rise", "--seed", "3", "--format", "structured"});
    REQUIRE(js.code == exit_ok);
    const auto j = nlohmann::json::parse(js.out);
    CHECK(j.at("post").at("tokens").size() == 3);
    CHECK(j.at("claim").at("scores").size() == 3);
    const auto js2 = cli({"explain", "--method", "Lime", "--param", "n_samples=40", "--post", "tax rise denied",
                          "--claim", "no tax rise", "--seed", "3", "--format", "structured"});
    CHECK(js2.out == js.out);

    CHECK(cli({"explain", "--method", "Saliency", "--post", "a b", "--claim", "b c"}).code == exit_ok);
    CHECK(cli({"explain", "--method", "Nope", "--post", "a", "--claim", "b"}).code == exit_config);
    CHECK(cli({"explain", "--method", "Occlusion", "--param", "window", "--post", "a", "--claim", "b"}).code ==
          exit_config);
    CHECK(cli({"explain", "--method", "Lime", "--param", "n_samples=-4", "--post", "a", "--claim", "b"}).code ==
          exit_config);
}

TEST_CASE("evaluate precomputed attributions") {
    const auto dir = testing::temp_dir("cli-evaluate");
    testing::write_text(dir / "attr.jsonl",
                        "{\"id\": \"pair-01\", \"post_scores\": [0, 0, 1, 1, 0, 0, 0, 0, 0], \"claim_scores\": [0, 1, 1, 0, 0, 0]}\n"
                        "{\"id\": \"pair-02\", \"post_scores\": [1], \"claim_scores\": [1]}\n"
                        "{\"id\": \"ghost\", \"post_scores\": [1], \"claim_scores\": [1]}\n");
    const auto r = cli({"evaluate", "--attributions", (dir / "attr.jsonl").string(), "--dataset",
                        source("data/fixture_pairs.jsonl").string(), "--metrics", "auprc,token_f1",
                        "--format", "structured"});
    REQUIRE(r.code == exit_ok);
    CHECK(r.err.find("pair-02") != std::string::npos);
    CHECK(r.err.find("ghost") != std::string::npos);
    const auto j = nlohmann::json::parse(r.out);
    REQUIRE(j.at("instances").size() == 1);
    CHECK(j.at("aggregate").at("auprc").get<double>() == doctest::Approx(1.0));
    CHECK(cli({"evaluate", "--attributions", (dir / "attr.jsonl").string(), "--dataset",
               source("data/fixture_pairs.jsonl").string(), "--metrics", "bleu"})
              .code == exit_config);
}
