#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "support.hpp"
#include "xaiopt/diag.hpp"
#include "xaiopt/reference_encoder.hpp"

using namespace xaiopt;
using testing::pair_of;

namespace {

double spearman(const std::vector<double>& a, const std::vector<double>& b) {
    auto ranks = [](const std::vector<double>& v) {
        std::vector<std::size_t> idx(v.size());
        std::iota(idx.begin(), idx.end(), 0);
        std::sort(idx.begin(), idx.end(), [&](auto x, auto y) { return v[x] < v[y]; });
        std::vector<double> r(v.size());
        for (std::size_t i = 0; i < idx.size(); ++i) r[idx[i]] = static_cast<double>(i);
        return r;
    };
    const auto ra = ranks(a);
    const auto rb = ranks(b);
    double d2 = 0.0;
    for (std::size_t i = 0; i < ra.size(); ++i) d2 += (ra[i] - rb[i]) * (ra[i] - rb[i]);
    const double n = static_cast<double>(ra.size());
    return 1.0 - 6.0 * d2 / (n * (n * n - 1.0));
}

CoalitionGame additive_game(std::vector<double> v) {
    return [v](const std::vector<std::vector<std::uint8_t>>& cs) {
        std::vector<double> out;
        for (const auto& c : cs) {
            double s = 0.0;
            for (std::size_t i = 0; i < c.size(); ++i) s += c[i] ? v[i] : 0.0;
            out.push_back(s);
        }
        return out;
    };
}

} // namespace

TEST_CASE("method table and admissibility") {
    CHECK(method_name(MethodId::gae) == "GAE_Explain");
    CHECK(find_method("Kernel Shap") == MethodId::kernel_shap);
    CHECK_FALSE(find_method("ConservativeLRP").has_value());
    const ModelCapabilities black_box{};
    CHECK_NOTHROW(check_admissible(MethodId::occlusion, black_box));
    CHECK_THROWS_AS(check_admissible(MethodId::saliency, black_box), CapabilityError);
    const ModelCapabilities grads{true, false, MaskStrategy::zero_embedding, 8};
    CHECK_THROWS_AS(check_admissible(MethodId::gae, grads), CapabilityError);
}

TEST_CASE("occlusion hand enumeration") {
    // Three post tokens, window 2, stride 1: placements {0,1} and {1,2}.
    const testing::AdditiveModel m({1.0, 2.0, 4.0}, {0.5, 0.5});
    const auto p = pair_of("a b c", "x y");
    const auto map = occlusion_token(m, p, {2, 1});
    CHECK(map.post_scores[0] == doctest::Approx(3.0));
    CHECK(map.post_scores[1] == doctest::Approx((3.0 + 6.0) / 2));
    CHECK(map.post_scores[2] == doctest::Approx(6.0));

    const double full = m.similarity(p);
    const auto whole = occlusion_token(m, p, {3, 1});
    for (double s : whole.post_scores) CHECK(s == doctest::Approx(full));

    WarningCapture cap;
    const auto clamped = occlusion_token(m, p, {5, 1});
    CHECK(cap.contains("clamp"));
    CHECK(clamped.post_scores == whole.post_scores);
    CHECK_THROWS_AS(occlusion_token(m, p, {0, 1}), ConfigError);
}

TEST_CASE("occlusion window 1 equals feature ablation") {
    const ReferenceEncoder enc;
    const auto p = pair_of("the vaccine, it was said, causes harm", "vaccine harm report");
    const auto a = occlusion_token(enc, p, {1, 1});
    const auto b = feature_ablation(enc, p, false);
    for (std::size_t i = 0; i < a.post_scores.size(); ++i) CHECK(std::abs(a.post_scores[i] - b.post_scores[i]) <= 1e-9);
    for (std::size_t i = 0; i < a.claim_scores.size(); ++i) CHECK(std::abs(a.claim_scores[i] - b.claim_scores[i]) <= 1e-9);
}

TEST_CASE("feature ablation and word occlusion on additive scorer") {
    const testing::AdditiveModel m({0.3, -0.2, 0.7}, {1.0, 2.0});
    const auto p = pair_of("a b c", "x y");
    const auto fa = feature_ablation(m, p, false);
    CHECK(fa.post_scores[0] == doctest::Approx(0.3));
    CHECK(fa.post_scores[1] == doctest::Approx(-0.2));
    CHECK(fa.claim_scores[1] == doctest::Approx(2.0));

    // "ab,cd" -> tokens ab , cd. With "" only whitespace splits: one group.
    const testing::AdditiveModel m2({0.5, 0.25, 1.0}, {1.0, 1.0});
    const auto p2 = pair_of("ab,cd", "x y");
    const auto none = occlusion_word(m2, p2, "");
    for (double s : none.post_scores) CHECK(s == doctest::Approx(m2.similarity(p2)));
    const auto split = occlusion_word(m2, p2, ",");
    CHECK(split.post_scores[0] == doctest::Approx(0.5));
    CHECK(split.post_scores[2] == doctest::Approx(1.0));

    const testing::AdditiveModel m3({0.5, 0.25, 1.0, 2.0}, {1.0, 1.0});
    const auto grouped = feature_ablation(m3, pair_of("don't go", "x y"), true);
    CHECK(grouped.post_scores[0] == doctest::Approx(1.75));
    CHECK(grouped.post_scores[2] == doctest::Approx(1.75));
    CHECK(grouped.post_scores[3] == doctest::Approx(2.0));
}

TEST_CASE("kernel shap matches permutation Shapley") {
    Rng rng(1);
    const KernelShapOptions exact{8, true, false};
    auto check = [&](const CoalitionGame& g) {
        const auto phi = kernel_shap_values(3, g, exact, rng);
        const auto oracle = testing::permutation_shapley(3, g);
        for (std::size_t i = 0; i < 3; ++i) CHECK(phi[static_cast<Eigen::Index>(i)] == doctest::Approx(oracle[i]).epsilon(1e-9));
    };
    check([](const auto& cs) {
        std::vector<double> out;
        for (const auto& c : cs) out.push_back((c[0] && c[1]) ? 1.0 : 0.0);
        return out;
    });
    const auto both = kernel_shap_values(3, [](const auto& cs) {
        std::vector<double> out;
        for (const auto& c : cs) out.push_back((c[0] && c[1]) ? 1.0 : 0.0);
        return out;
    }, exact, rng);
    CHECK(both[0] == doctest::Approx(0.5));
    CHECK(both[1] == doctest::Approx(0.5));
    CHECK(std::abs(both[2]) < 1e-12);
    check(additive_game({1.0, 1.0, 1.0}));
    check(additive_game({0.2, -1.5, 3.0}));
}

TEST_CASE("kernel shap efficiency when sampled") {
    const ReferenceEncoder enc;
    const auto p = pair_of("senator took a bribe from the oil company", "oil company bribe");
    Rng rng(5);
    const auto map = kernel_shap(enc, p, {40, false, false}, rng);
    double sum = 0.0;
    for (double s : map.post_scores) sum += s;
    for (double s : map.claim_scores) sum += s;
    CHECK(sum == doctest::Approx(enc.similarity(p) - 0.0).epsilon(1e-6));
    CHECK_THROWS_AS(kernel_shap_values(30, additive_game(std::vector<double>(30, 1.0)), {8, true, false}, rng),
                    ConfigError);
}

TEST_CASE("lime closed forms") {
    Rng rng(2);
    const std::vector<double> v{0.4, -0.3, 0.9, 0.1};
    LimeOptions o;
    o.n_samples = 64;
    o.kernel_width = 1e9;
    o.alpha = 0.0;
    const auto beta = lime_coefficients(4, additive_game(v), o, rng);
    for (std::size_t i = 0; i < 4; ++i) CHECK(beta[static_cast<Eigen::Index>(i)] == doctest::Approx(v[i]).epsilon(1e-6));
    o.alpha = 1e6;
    const auto zero = lime_coefficients(4, additive_game(v), o, rng);
    CHECK(zero.cwiseAbs().maxCoeff() < 1e-9);

    const ReferenceEncoder enc;
    const auto p = pair_of("climate warming is a hoax", "warming climate data");
    Rng r1(9);
    Rng r2(9);
    CHECK(lime(enc, p, {}, r1).post_scores == lime(enc, p, {}, r2).post_scores);
}

TEST_CASE("linear model closed forms") {
    const testing::LinearModel m(6, 11);
    const auto p = pair_of("a b c d", "e f g");
    const auto x = m.embed(p);
    const auto post_cf = m.closed_form(x.post);
    const auto claim_cf = m.closed_form(x.claim);
    auto check = [&](const AttributionMap& map) {
        for (std::size_t i = 0; i < post_cf.size(); ++i) CHECK(map.post_scores[i] == doctest::Approx(post_cf[i]).epsilon(1e-9));
        for (std::size_t i = 0; i < claim_cf.size(); ++i) CHECK(map.claim_scores[i] == doctest::Approx(claim_cf[i]).epsilon(1e-9));
    };
    check(input_x_gradient(m, p));
    check(integrated_gradients(m, p, {1, {}}));
    check(integrated_gradients(m, p, {37, {}}));
    Rng rng(4);
    check(gradient_shap(m, p, {0.0, 7}, rng));
    check(guided_backprop(m, p));

    const auto sal = saliency(m, p, true);
    const double expect = m.weights().norm() / 4.0;
    for (double s : sal.post_scores) CHECK(s == doctest::Approx(expect));
    const auto signed_sal = saliency(m, p, false);
    const double sign = m.weights().sum() < 0 ? -1.0 : 1.0;
    for (double s : signed_sal.post_scores) CHECK(s == doctest::Approx(sign * expect));
}

TEST_CASE("integrated gradients baseline equal to input gives zero") {
    testing::LinearModel m(5, 8);
    m.baseline_is_input = true;
    const auto p = pair_of("a b c", "d e");
    IntegratedGradientsOptions o;
    o.baseline.kind = BaselineKind::mask_token;
    const auto map = integrated_gradients(m, p, o);
    for (double s : map.post_scores) CHECK(s == 0.0);
    for (double s : map.claim_scores) CHECK(s == 0.0);
    o.baseline.kind = BaselineKind::sampled_noise;
    CHECK_THROWS_AS(integrated_gradients(m, p, o), ConfigError);
    CHECK_THROWS_AS(integrated_gradients(m, p, {0, {}}), ConfigError);
}

TEST_CASE("gradient shap on a linear model sums to the expected gap") {
    const testing::LinearModel m(6, 2);
    const auto p = pair_of("a b c", "d e");
    Rng rng(3);
    const auto map = gradient_shap(m, p, {0.5, 2000}, rng);
    double total = 0.0;
    for (double s : map.post_scores) total += s;
    for (double s : map.claim_scores) total += s;
    // Noise baselines have mean zero, so the expected gap is f(x) - f(0).
    CHECK(std::abs(total - m.similarity_at(m.embed(p))) < 0.15);
}

TEST_CASE("saliency ranking follows deletion on additive-like encoder input") {
    const testing::LinearModel m(8, 3);
    const auto p = pair_of("a b c d e f", "g h");
    const auto ixg = input_x_gradient(m, p);
    const auto fa = feature_ablation(m, p, false);
    CHECK(spearman(ixg.post_scores, fa.post_scores) > 0.9);
}

TEST_CASE("gae relevance") {
    AttentionHead h;
    h.weights = Matrix::Identity(3, 3);
    h.gradient = Matrix::Constant(3, 3, 0.5);
    const TowerAttention one{{h}};
    const auto r = gae_relevance(one, 3);
    CHECK((r - 1.5 * Matrix::Identity(3, 3)).norm() < 1e-12);
    const auto tok = gae_token_relevance(one, 3);
    CHECK(tok[0] == doctest::Approx(tok[1]));
    CHECK(tok[1] == doctest::Approx(tok[2]));

    h.gradient.setZero();
    const auto flat = gae_token_relevance(TowerAttention{{h}}, 3);
    for (double v : flat) CHECK(v == doctest::Approx(1.0 / 3.0));

    const ReferenceEncoder enc;
    const auto p = pair_of("army parade today", "parade of the army");
    const auto att = enc.attention_internals(p);
    CHECK(gae_relevance(att.post, p.post.size()).minCoeff() >= 0.0);
    const auto map = gae(enc, p);
    CHECK(map.post_scores.size() == 3);
}

TEST_CASE("normalize_map") {
    AttributionMap m;
    m.post_scores = {1, 3, 5};
    m.claim_scores = {2, 2};
    CHECK(normalize_map(m, Normalization::without_normalize).post_scores == m.post_scores);
    const auto mm = normalize_map(m, Normalization::min_max);
    CHECK(mm.post_scores == std::vector<double>{0.0, 0.5, 1.0});
    CHECK(mm.claim_scores == std::vector<double>{0.5, 0.5});
    m.post_scores = {-3, 4};
    CHECK(normalize_map(m, Normalization::abs).post_scores == std::vector<double>{3, 4});
    const auto l2 = normalize_map(m, Normalization::l2);
    CHECK(l2.post_scores[0] == doctest::Approx(-0.6));
    CHECK(l2.normalization == Normalization::l2);
    m.claim_scores = {0, 0};
    WarningCapture cap;
    CHECK(normalize_map(m, Normalization::l2).claim_scores == m.claim_scores);
    CHECK_FALSE(cap.messages().empty());
}

TEST_CASE("attribute dispatch is deterministic and checks capabilities") {
    const ReferenceEncoder enc;
    const auto p = pair_of("bridge collapse video", "bridge collapse");
    MethodSettings s;
    s.method = MethodId::lime;
    CHECK(attribute(enc, p, s, 42).post_scores == attribute(enc, p, s, 42).post_scores);
    s.method = MethodId::random_control;
    const auto r = attribute(enc, p, s, 1);
    CHECK(r.post_scores.size() == p.post.size());
    const testing::AdditiveModel add({1, 1, 1}, {1, 1});
    s.method = MethodId::saliency;
    CHECK_THROWS_AS(attribute(add, p, s, 1), CapabilityError);
}
