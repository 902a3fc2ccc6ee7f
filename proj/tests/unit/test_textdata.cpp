#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sstream>

#include "support.hpp"
#include "xaiopt/diag.hpp"
#include "xaiopt/textdata.hpp"

using namespace xaiopt;

TEST_CASE("tokenize splits whitespace and isolates punctuation") {
    const auto t = tokenize("Hello, world!");
    CHECK(t.tokens == std::vector<std::string>{"Hello", ",", "world", "!"});
    CHECK(t.offsets == std::vector<Span>{{0, 5}, {5, 6}, {7, 12}, {12, 13}});
    CHECK(tokenize("").empty());
    CHECK(tokenize("   \t ").empty());
}

TEST_CASE("word groups follow the grouping rule") {
    // don|'|t are contiguous and the apostrophe is no separator, so one group;
    // "stop" follows a space; "." is a separator.
    const auto t = tokenize("don't stop.");
    CHECK(t.tokens == std::vector<std::string>{"don", "'", "t", "stop", "."});
    CHECK(t.word_group == std::vector<std::size_t>{0, 0, 0, 1, 2});
    CHECK(t.sentence_group == std::vector<std::size_t>{0, 0, 0, 0, 0});
    const auto two = tokenize("One. Two!");
    CHECK(two.sentence_group == std::vector<std::size_t>{0, 0, 1, 1});
}

TEST_CASE("tokenize round-trips non-whitespace content") {
    const std::string text = "Vaccines   cause… autism?! No: «évidence» here.";
    const auto t = tokenize(text);
    std::string joined;
    for (const auto& tok : t.tokens) joined += tok;
    std::string stripped;
    for (char c : text) {
        if (c != ' ') stripped += c;
    }
    CHECK(joined == stripped);
    for (std::size_t i = 1; i < t.size(); ++i) CHECK(t.offsets[i].begin >= t.offsets[i - 1].end);
    CHECK(t.offsets.back().end <= t.length);
}

TEST_CASE("align_rationale uses one-character overlap") {
    const auto t = tokenize("covid vaccine");
    const std::vector<Span> spans{{6, 13}};
    CHECK(align_rationale(spans, t).bits == std::vector<std::uint8_t>{0, 1});
    CHECK(align_rationale({}, t).bits == std::vector<std::uint8_t>{0, 0});
    const std::vector<Span> half{{3, 4}};
    CHECK(align_rationale(half, t).bits == std::vector<std::uint8_t>{1, 0});
    const std::vector<Span> bad{{10, 40}};
    CHECK_THROWS_AS(align_rationale(bad, t), InputError);
}

TEST_CASE("align_rationale is monotone in spans") {
    const auto t = tokenize("a b c d e f");
    std::vector<Span> spans;
    auto prev = align_rationale(spans, t);
    for (Span s : {Span{2, 3}, Span{8, 11}, Span{0, 1}}) {
        spans.push_back(s);
        const auto cur = align_rationale(spans, t);
        for (std::size_t i = 0; i < t.size(); ++i) CHECK(cur.bits[i] >= prev.bits[i]);
        prev = cur;
    }
}

TEST_CASE("merge_annotations votes per token and discards ties") {
    auto mask = [](std::vector<std::uint8_t> b) { return RationaleMask{std::move(b)}; };
    const std::vector<RationaleMask> five{mask({1, 0}), mask({1, 0}), mask({1, 1}), mask({0, 1}), mask({0, 0})};
    CHECK(merge_annotations(five)->bits == std::vector<std::uint8_t>{1, 0});
    const std::vector<RationaleMask> four{mask({1}), mask({1}), mask({0}), mask({0})};
    CHECK_FALSE(merge_annotations(four).has_value());
    const std::vector<RationaleMask> one{mask({0, 1, 1})};
    CHECK(merge_annotations(one)->bits == one[0].bits);
    const std::vector<RationaleMask> mismatch{mask({1}), mask({1, 0})};
    CHECK_THROWS_AS(merge_annotations(mismatch), InputError);
}

TEST_CASE("regroup averages scores and ors masks") {
    const auto t = tokenize("don't stop.");
    const std::vector<double> s{0.2, 0.4, 0.6, 1.0, 0.0};
    CHECK(regroup(s, t, Granularity::token) == s);
    const auto w = regroup(s, t, Granularity::word);
    REQUIRE(w.size() == 3);
    CHECK(w[0] == doctest::Approx(0.4));
    CHECK(w[1] == 1.0);
    const auto m = regroup(RationaleMask{{1, 0, 0, 0, 0}}, t, Granularity::word);
    CHECK(m.bits == std::vector<std::uint8_t>{1, 0, 0});
    const auto sentence = regroup(s, t, Granularity::sentence);
    CHECK(sentence.size() == 1);
}

TEST_CASE("parse_dataset loads and reports line numbers") {
    const WordTokenizer tok;
    std::istringstream ok(
        R"({"id":"a","post":"covid vaccine","claim":"vaccine","post_rationale":[[6,13]],"claim_rationale":[[0,7]]})"
        "\n"
        R"({"id":"b","post":"x y","claim":"z","post_rationale":[],"claim_rationale":[]})"
        "\n");
    const auto d = parse_dataset(ok, tok);
    REQUIRE(d.size() == 2);
    CHECK(d[0].post_gold.bits == std::vector<std::uint8_t>{0, 1});
    CHECK(d[0].claim_gold.bits == std::vector<std::uint8_t>{1});

    std::istringstream bad(
        R"({"id":"a","post":"ab","claim":"c","post_rationale":[[0,9]],"claim_rationale":[]})"
        "\n"
        "not json\n");
    try {
        parse_dataset(bad, tok);
        FAIL("expected DatasetError");
    } catch (const DatasetError& e) {
        REQUIRE(e.issues().size() == 2);
        CHECK(e.issues()[0].line == 1);
        CHECK(e.issues()[1].line == 2);
    }

    std::istringstream dup(
        R"({"id":"a","post":"x","claim":"y","post_rationale":[],"claim_rationale":[]})"
        "\n"
        R"({"id":"a","post":"x","claim":"y","post_rationale":[],"claim_rationale":[]})"
        "\n");
    CHECK_THROWS_AS(parse_dataset(dup, tok), DatasetError);

    std::istringstream empty("");
    WarningCapture cap;
    CHECK(parse_dataset(empty, tok).empty());
    CHECK(cap.contains("empty"));
}
