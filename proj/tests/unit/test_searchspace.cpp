#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "support.hpp"
#include "xaiopt/errors.hpp"
#include "xaiopt/searchspace.hpp"

using namespace xaiopt;

namespace {

const char* kGradientShap = R"(
model_path: "reference"
methods: ["Gradient Shap"]
normalizations: ["without_normalize"]
Optuna_parameters:
  sampler: "BruteForceSampler"
  n_trials: 30
method_param:
  Gradient Shap:
    parameters:
      stdevs: (0.1, 0.9, {'step': 0.1})
      n_samples: [10, 15]
)";

} // namespace

TEST_CASE("parse tuple range and cardinality") {
    const auto spec = parse_config(kGradientShap);
    REQUIRE(spec.methods.size() == 1);
    const auto* stdevs = spec.methods[0].find("stdevs");
    REQUIRE(stdevs != nullptr);
    CHECK(stdevs->kind == ParamKind::float_range);
    CHECK(stdevs->size() == 9);
    CHECK(std::get<double>(stdevs->value_at(8)) == doctest::Approx(0.9));
    CHECK(cardinality(spec) == std::optional<std::uint64_t>(18));
    CHECK(spec.sampler.kind == SamplerKind::brute_force);
}

TEST_CASE("serialize round trip") {
    for (const auto* path : {"configs/fixture_study.yaml", "configs/case_study.yaml"}) {
        const auto spec = load_config(std::filesystem::path(XAIOPT_SOURCE_DIR) / path);
        const auto again = parse_config(serialize_config(spec));
        CHECK(serialize_config(again) == serialize_config(spec));
        CHECK(space_fingerprint(again) == space_fingerprint(spec));
        CHECK(cardinality(again) == cardinality(spec));
    }
    const auto g = parse_config(kGradientShap);
    CHECK(serialize_config(parse_config(serialize_config(g))) == serialize_config(g));
}

TEST_CASE("shipped configs") {
    const auto fixture = load_config(std::filesystem::path(XAIOPT_SOURCE_DIR) / "configs/fixture_study.yaml");
    CHECK(cardinality(fixture) == std::optional<std::uint64_t>(21));
    CHECK(std::filesystem::path(fixture.dataset).is_absolute());
    const auto cs = load_config(std::filesystem::path(XAIOPT_SOURCE_DIR) / "configs/case_study.yaml");
    CHECK(cardinality(cs) == std::optional<std::uint64_t>(35));
}

TEST_CASE("validate reports every violation") {
    const auto spec = parse_config(kGradientShap);
    TrialConfig ok{MethodId::gradient_shap, {{"stdevs", 0.3}, {"n_samples", std::int64_t{10}}}};
    CHECK(validate(ok, spec).empty());
    TrialConfig bad{MethodId::gradient_shap, {{"stdevs", 0.35}, {"n_samples", std::int64_t{12}}}};
    CHECK(validate(bad, spec).size() == 2);
    TrialConfig missing{MethodId::gradient_shap, {{"stdevs", 0.3}}};
    CHECK(validate(missing, spec).size() == 1);
    TrialConfig other{MethodId::lime, {}};
    CHECK_FALSE(validate(other, spec).empty());
    TrialConfig norm = ok;
    norm.normalization = Normalization::l2;
    CHECK_FALSE(validate(norm, spec).empty());
}

TEST_CASE("weights and aliases") {
    std::string doc = kGradientShap;
    const auto alias = parse_config(doc + "plausability_weight: 0.25\nfaithfulness_weight: 0.75\n");
    CHECK(alias.w_p == doctest::Approx(0.25));
    CHECK(alias.w_f == doctest::Approx(0.75));
    CHECK_THROWS_AS(parse_config(doc + "plausibility_weight: 0\nfaithfulness_weight: 0\n"), ConfigError);
    CHECK_THROWS_AS(parse_config(doc + "plausibility_weight: -1\n"), ConfigError);
    CHECK_THROWS_AS(parse_config(doc + "plausibility_weight: 0.2\nplausability_weight: 0.3\n"), ConfigError);
}

TEST_CASE("config errors") {
    CHECK_THROWS_AS(parse_config("methods: [\"ConservativeLRP\"]\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("methods: [\"Lime\"]\nOptuna_parameters:\n  sampler: CmaEsSampler\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("methods: [\"Lime\"]\nnormalizations: [\"softmax\"]\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("methods: [\"Lime\"\n"), ConfigError);
    CHECK_THROWS_AS(parse_config(R"(
methods: ["Gradient Shap"]
method_param:
  Gradient Shap:
    parameters:
      stdevs: (0.9, 0.1, {'step': 0.1})
)"),
                    ConfigError);
}

TEST_CASE("resolve settings") {
    const auto spec = load_config(std::filesystem::path(XAIOPT_SOURCE_DIR) / "configs/fixture_study.yaml");
    TrialConfig c{MethodId::occlusion, {{"sliding_window_shapes", std::vector<std::int64_t>{3, 1024}},
                                        {"strides", std::vector<std::int64_t>{2, 1024}}}};
    REQUIRE(validate(c, spec).empty());
    const auto s = resolve_settings(c, spec);
    CHECK(s.occlusion.window == 3);
    CHECK(s.occlusion.stride == 2);
    TrialConfig l{MethodId::lime,
                  {{"n_samples", std::int64_t{40}}, {"distance_mode", std::string("cosine")},
                   {"kernel_width", std::int64_t{450}}, {"alpha", 1e-10}}};
    const auto v = validate(l, spec);
    CHECK(v.empty());
    const auto ls = resolve_settings(l, spec);
    CHECK(ls.lime.distance == DistanceMode::cosine);
    CHECK(ls.lime.kernel_width == doctest::Approx(450.0));
    CHECK(ls.lime.n_samples == 40);
    CHECK(describe(c).find("Occlusion") != std::string::npos);
}
