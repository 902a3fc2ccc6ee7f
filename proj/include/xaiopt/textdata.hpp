#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "xaiopt/errors.hpp"

namespace xaiopt {

/// Half-open character span. Offsets count Unicode scalar values.
struct Span {
    std::size_t begin = 0;
    std::size_t end = 0;

    friend bool operator==(const Span&, const Span&) = default;
};

enum class Granularity { token, word, sentence };

std::string_view to_string(Granularity g);
Granularity parse_granularity(std::string_view name);

/// Grouping rules shared by the local tokenizer, remote tokenizations and
/// word-level occlusion.
struct GroupingRules {
    /// A token consisting of one of these characters forms its own word group.
    std::string separators = ".,!?;:…";
    /// A new sentence starts at the first token following one of these.
    std::string sentence_enders = ".?!…";
};

/// A tokenized source text.
///
/// Invariants: offsets are strictly increasing and nonoverlapping, every
/// offset lies inside the source, and word/sentence groups are
/// nondecreasing over token index.
struct TokenizedText {
    std::string source;
    std::size_t length = 0; ///< source length in scalar values
    std::vector<std::string> tokens;
    std::vector<Span> offsets;
    std::vector<std::size_t> word_group;
    std::vector<std::size_t> sentence_group;

    std::size_t size() const { return tokens.size(); }
    bool empty() const { return tokens.empty(); }
    std::size_t group_count(Granularity g) const;
    const std::vector<std::size_t>& groups(Granularity g) const;
};

/// Per-token human rationale flags (1 = marked relevant).
struct RationaleMask {
    std::vector<std::uint8_t> bits;

    std::size_t size() const { return bits.size(); }
    std::size_t count() const;
    friend bool operator==(const RationaleMask&, const RationaleMask&) = default;
};

struct PairInstance {
    std::string id;
    TokenizedText post;
    TokenizedText claim;
    RationaleMask post_gold;
    RationaleMask claim_gold;
};

/// Splits on whitespace and isolates every punctuation character as its own
/// token. Empty text yields no tokens.
TokenizedText tokenize(std::string_view text, const GroupingRules& rules = {});

/// Builds a TokenizedText from externally produced tokens (e.g. a remote
/// tokenizer), validating offsets and assigning groups.
TokenizedText make_tokenized(std::string source, std::vector<std::string> tokens,
                             std::vector<Span> offsets, const GroupingRules& rules = {});

/// Word-group index per token under the given separator set.
std::vector<std::size_t> word_groups(const TokenizedText& text, std::string_view separators);

/// Token bit is 1 iff its offset overlaps any span by at least one character.
RationaleMask align_rationale(std::span<const Span> spans, const TokenizedText& text);

/// Per-token majority vote; std::nullopt when any token is an exact tie
/// (the whole sample is discarded).
std::optional<RationaleMask> merge_annotations(std::span<const RationaleMask> masks);

/// Token granularity is the identity; word and sentence groups take the mean
/// of their member scores.
std::vector<double> regroup(std::span<const double> scores, const TokenizedText& text,
                            Granularity granularity);
/// Group bit is 1 iff any member bit is 1.
RationaleMask regroup(const RationaleMask& mask, const TokenizedText& text, Granularity granularity);

/// Member token indices per group.
std::vector<std::vector<std::size_t>> group_members(const TokenizedText& text,
                                                    Granularity granularity);

class Tokenizer {
public:
    virtual ~Tokenizer() = default;
    virtual TokenizedText tokenize(std::string_view text) const = 0;
};

class WordTokenizer final : public Tokenizer {
public:
    explicit WordTokenizer(GroupingRules rules = {}) : rules_(std::move(rules)) {}
    TokenizedText tokenize(std::string_view text) const override;

private:
    GroupingRules rules_;
};

/// One problem found while loading a dataset.
struct DatasetIssue {
    std::size_t line = 0;
    std::string message;
};

class DatasetError : public InputError {
public:
    explicit DatasetError(std::vector<DatasetIssue> issues);
    const std::vector<DatasetIssue>& issues() const { return issues_; }

private:
    std::vector<DatasetIssue> issues_;
};

/// Reads line-delimited JSON pair records. All invalid lines are collected
/// and reported together in a DatasetError.
std::vector<PairInstance> parse_dataset(std::istream& in, const Tokenizer& tokenizer);
std::vector<PairInstance> load_dataset(const std::filesystem::path& path,
                                       const Tokenizer& tokenizer);

} // namespace xaiopt
