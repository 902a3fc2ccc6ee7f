#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "support.hpp"
#include "xaiopt/reference_encoder.hpp"

using namespace xaiopt;
using testing::pair_of;

namespace {

double rel_err(const Matrix& a, const Matrix& b) {
    const double scale = std::max({a.norm(), b.norm(), 1e-12});
    return (a - b).norm() / scale;
}

Matrix fd_side(const ReferenceEncoder& enc, EmbeddedPair x, bool post, double h) {
    Matrix& m = post ? x.post : x.claim;
    Matrix g(m.rows(), m.cols());
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        for (Eigen::Index c = 0; c < m.cols(); ++c) {
            const double v = m(r, c);
            m(r, c) = v + h;
            const double up = enc.similarity_at(x);
            m(r, c) = v - h;
            const double down = enc.similarity_at(x);
            m(r, c) = v;
            g(r, c) = (up - down) / (2 * h);
        }
    }
    return g;
}

} // namespace

TEST_CASE("similarity basics") {
    const ReferenceEncoder enc;
    const auto same = pair_of("covid vaccine causes autism", "covid vaccine causes autism");
    CHECK(enc.similarity(same) == doctest::Approx(1.0).epsilon(1e-6));
    Vector v(3);
    v << 1, -2, 0.5;
    CHECK(cosine_similarity(v, -v) == doctest::Approx(-1.0));
    CHECK(cosine_similarity(v, Vector::Zero(3)) == 0.0);

    const auto p = pair_of("election fraud claims", "no fraud in the election");
    const double s = enc.similarity(p);
    CHECK(std::abs(s) <= 1.0 + 1e-9);
    const auto swapped = pair_of("no fraud in the election", "election fraud claims");
    CHECK(enc.similarity(swapped) == doctest::Approx(s).epsilon(1e-12));
    CHECK(enc.perturbed_similarity(p, {}, {}) == s);
    const std::vector<std::size_t> all{0, 1, 2};
    CHECK(enc.perturbed_similarity(p, all, {}) == 0.0);
    CHECK_THROWS_AS(enc.similarity(pair_of("", "x")), InputError);
}

TEST_CASE("reference encoder golden value and determinism") {
    const ReferenceEncoder a;
    const ReferenceEncoder b;
    const auto p = pair_of("hello world", "world peace");
    CHECK(a.similarity(p) == b.similarity(p));
    // Regression value for the default configuration.
    CHECK(a.similarity(p) == doctest::Approx(0.55600448343290765).epsilon(1e-9));
}

TEST_CASE("embedding gradients match finite differences") {
    const ReferenceEncoder enc;
    Rng rng(7);
    for (int k = 0; k < 5; ++k) {
        const auto p = pair_of(testing::words(2 + rng.index(5), "a" + std::to_string(k)),
                                 testing::words(2 + rng.index(5), "b" + std::to_string(k)));
        const auto x = enc.embed(p);
        const auto g = enc.gradients_at(x, GradientMode::standard);
        CHECK(rel_err(g.post, fd_side(enc, x, true, 1e-6)) <= 1e-4);
        CHECK(rel_err(g.claim, fd_side(enc, x, false, 1e-6)) <= 1e-4);
        CHECK(g.similarity == doctest::Approx(enc.similarity(p)).epsilon(1e-12));
    }
}

TEST_CASE("gradient at identical pair vanishes") {
    const ReferenceEncoder enc;
    const auto p = pair_of("flood dam collapse", "flood dam collapse");
    const auto g = embedding_gradients(enc, p);
    CHECK(g.post.norm() < 1e-8);
    CHECK(g.claim.norm() < 1e-8);
}

TEST_CASE("guided rectifier rule") {
    CHECK(relu_backward(-1.0, 0.5, GradientMode::standard) == -1.0);
    CHECK(relu_backward(-1.0, 0.5, GradientMode::guided) == 0.0);
    CHECK(relu_backward(2.0, 0.5, GradientMode::guided) == 2.0);
    CHECK(relu_backward(2.0, -0.5, GradientMode::standard) == 0.0);

    const ReferenceEncoder enc;
    const auto p = pair_of("tax refund bank crash", "bank crash today");
    RectifierProbe post_probe;
    RectifierProbe claim_probe;
    enc.gradients_instrumented(enc.embed(p), GradientMode::guided, {nullptr, &post_probe, &claim_probe});
    REQUIRE(post_probe.upstream.size() == enc.config().layers);
    for (const auto& m : post_probe.upstream) CHECK(m.minCoeff() >= 0.0);
    for (const auto& m : claim_probe.upstream) CHECK(m.minCoeff() >= 0.0);
}

TEST_CASE("attention internals") {
    const ReferenceEncoder enc;
    const auto p = pair_of("river poison school", "school closure river");
    const auto att = attention_internals(enc, p);
    REQUIRE(att.post.size() == 2);
    REQUIRE(att.post[0].size() == 2);
    for (const auto& layer : att.post) {
        for (const auto& head : layer) {
            CHECK(head.weights.rows() == 3);
            CHECK(head.gradient.rows() == head.weights.rows());
            CHECK(head.gradient.cols() == head.weights.cols());
            for (Eigen::Index r = 0; r < head.weights.rows(); ++r) {
                CHECK(head.weights.row(r).sum() == doctest::Approx(1.0).epsilon(1e-6));
            }
        }
    }
    const auto x = enc.embed(p);
    const double h = 1e-5;
    Rng rng(3);
    for (int k = 0; k < 5; ++k) {
        AttentionEdit e{rng.index(2), rng.index(2), rng.index(3), rng.index(3), h};
        const double up = enc.similarity_edited(x, e, std::nullopt);
        e.delta = -h;
        const double down = enc.similarity_edited(x, e, std::nullopt);
        const double fd = (up - down) / (2 * h);
        const double an = att.post[e.layer][e.head].gradient(static_cast<Eigen::Index>(e.row),
                                                              static_cast<Eigen::Index>(e.col));
        CHECK(std::abs(fd - an) <= 1e-3 * std::max(std::abs(fd), 1e-6) + 1e-9);
    }

    ReferenceEncoderConfig small;
    small.layers = 1;
    small.heads = 1;
    const ReferenceEncoder one(small);
    const auto a1 = attention_internals(one, p);
    CHECK(a1.post.size() == 1);
    CHECK(a1.post[0].size() == 1);
}

TEST_CASE("capability checks") {
    const testing::AdditiveModel additive({1, 2}, {3});
    const auto p = pair_of("a b", "c");
    CHECK_THROWS_AS(embedding_gradients(additive, p), CapabilityError);
    CHECK_THROWS_AS(attention_internals(additive, p), CapabilityError);
    const testing::LinearModel linear(4, 1);
    CHECK_THROWS_AS(attention_internals(linear, p), CapabilityError);
}
