#include "xaiopt/textdata.hpp"

#include "xaiopt/diag.hpp"
#include "unicode.hpp"

#include "json.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

namespace xaiopt {
namespace {

bool is_single_char_of(const std::u32string& token, const std::u32string& set) {
    return token.size() == 1 && set.find(token.front()) != std::u32string::npos;
}

void assign_groups(TokenizedText& text, const GroupingRules& rules) {
    text.word_group = word_groups(text, rules.separators);

    const auto enders = unicode::decode(rules.sentence_enders);
    text.sentence_group.assign(text.size(), 0);
    std::size_t sentence = 0;
    bool after_ender = false;
    for (std::size_t i = 0; i < text.size(); ++i) {
        const auto tok = unicode::decode(text.tokens[i]);
        const bool ender = is_single_char_of(tok, enders);
        if (after_ender && !ender) {
            ++sentence;
        }
        after_ender = ender;
        text.sentence_group[i] = sentence;
    }
}

} // namespace

std::string_view to_string(Granularity g) {
    switch (g) {
    case Granularity::token: return "token";
    case Granularity::word: return "word";
    case Granularity::sentence: return "sentence";
    }
    return "token";
}

Granularity parse_granularity(std::string_view name) {
    if (name == "token") return Granularity::token;
    if (name == "word") return Granularity::word;
    if (name == "sentence") return Granularity::sentence;
    throw ConfigError("unknown granularity '" + std::string(name) + "'");
}

std::size_t TokenizedText::group_count(Granularity g) const {
    if (g == Granularity::token) {
        return size();
    }
    const auto& grp = groups(g);
    return grp.empty() ? 0 : grp.back() + 1;
}

const std::vector<std::size_t>& TokenizedText::groups(Granularity g) const {
    return g == Granularity::sentence ? sentence_group : word_group;
}

std::size_t RationaleMask::count() const {
    return static_cast<std::size_t>(std::count(bits.begin(), bits.end(), std::uint8_t{1}));
}

std::vector<std::size_t> word_groups(const TokenizedText& text, std::string_view separators) {
    const auto seps = unicode::decode(separators);
    std::vector<std::size_t> groups(text.size(), 0);
    std::size_t group = 0;
    bool prev_sep = false;
    for (std::size_t i = 0; i < text.size(); ++i) {
        const bool sep = is_single_char_of(unicode::decode(text.tokens[i]), seps);
        if (i > 0) {
            const bool gap = text.offsets[i].begin != text.offsets[i - 1].end;
            if (gap || sep || prev_sep) {
                ++group;
            }
        }
        groups[i] = group;
        prev_sep = sep;
    }
    return groups;
}

TokenizedText tokenize(std::string_view text, const GroupingRules& rules) {
    const auto cps = unicode::decode(text);
    TokenizedText out;
    out.source = std::string(text);
    out.length = cps.size();

    std::size_t i = 0;
    while (i < cps.size()) {
        if (unicode::is_space(cps[i])) {
            ++i;
            continue;
        }
        std::size_t j = i + 1;
        if (!unicode::is_punct(cps[i])) {
            while (j < cps.size() && !unicode::is_space(cps[j]) && !unicode::is_punct(cps[j])) {
                ++j;
            }
        }
        out.tokens.push_back(unicode::encode(std::u32string_view(cps).substr(i, j - i)));
        out.offsets.push_back({i, j});
        i = j;
    }
    assign_groups(out, rules);
    return out;
}

TokenizedText make_tokenized(std::string source, std::vector<std::string> tokens,
                             std::vector<Span> offsets, const GroupingRules& rules) {
    if (tokens.size() != offsets.size()) {
        throw InputError("token/offset count mismatch: " + std::to_string(tokens.size()) +
                         " tokens, " + std::to_string(offsets.size()) + " offsets");
    }
    TokenizedText out;
    out.length = unicode::decode(source).size();
    out.source = std::move(source);
    for (std::size_t i = 0; i < offsets.size(); ++i) {
        const auto& s = offsets[i];
        if (s.begin >= s.end || s.end > out.length) {
            throw InputError("token offset [" + std::to_string(s.begin) + "," +
                             std::to_string(s.end) + ") outside text of length " +
                             std::to_string(out.length));
        }
        if (i > 0 && s.begin < offsets[i - 1].end) {
            throw InputError("token offsets overlap or are not increasing at token " +
                             std::to_string(i));
        }
    }
    out.tokens = std::move(tokens);
    out.offsets = std::move(offsets);
    assign_groups(out, rules);
    return out;
}

TokenizedText WordTokenizer::tokenize(std::string_view text) const {
    return xaiopt::tokenize(text, rules_);
}

RationaleMask align_rationale(std::span<const Span> spans, const TokenizedText& text) {
    for (const auto& s : spans) {
        if (s.begin > s.end || s.end > text.length) {
            throw InputError("rationale span [" + std::to_string(s.begin) + "," +
                             std::to_string(s.end) + ") outside text of length " +
                             std::to_string(text.length));
        }
    }
    RationaleMask mask;
    mask.bits.assign(text.size(), 0);
    for (std::size_t t = 0; t < text.size(); ++t) {
        const auto& off = text.offsets[t];
        for (const auto& s : spans) {
            if (std::max(off.begin, s.begin) < std::min(off.end, s.end)) {
                mask.bits[t] = 1;
                break;
            }
        }
    }
    return mask;
}

std::optional<RationaleMask> merge_annotations(std::span<const RationaleMask> masks) {
    if (masks.empty()) {
        throw InputError("merge_annotations needs at least one mask");
    }
    const std::size_t n = masks.front().size();
    for (const auto& m : masks) {
        if (m.size() != n) {
            throw InputError("annotation masks differ in length");
        }
    }
    RationaleMask out;
    out.bits.assign(n, 0);
    for (std::size_t t = 0; t < n; ++t) {
        std::size_t ones = 0;
        for (const auto& m : masks) {
            ones += m.bits[t] ? 1 : 0;
        }
        const std::size_t zeros = masks.size() - ones;
        if (ones == zeros) {
            return std::nullopt;
        }
        out.bits[t] = ones > zeros ? 1 : 0;
    }
    return out;
}

std::vector<std::vector<std::size_t>> group_members(const TokenizedText& text,
                                                    Granularity granularity) {
    std::vector<std::vector<std::size_t>> members(text.group_count(granularity));
    for (std::size_t t = 0; t < text.size(); ++t) {
        const std::size_t g = granularity == Granularity::token ? t : text.groups(granularity)[t];
        members[g].push_back(t);
    }
    return members;
}

std::vector<double> regroup(std::span<const double> scores, const TokenizedText& text,
                            Granularity granularity) {
    if (scores.size() != text.size()) {
        throw InputError("regroup: " + std::to_string(scores.size()) + " scores for " +
                         std::to_string(text.size()) + " tokens");
    }
    if (granularity == Granularity::token) {
        return {scores.begin(), scores.end()};
    }
    std::vector<double> out;
    for (const auto& members : group_members(text, granularity)) {
        double sum = 0.0;
        for (auto t : members) {
            sum += scores[t];
        }
        out.push_back(sum / static_cast<double>(members.size()));
    }
    return out;
}

RationaleMask regroup(const RationaleMask& mask, const TokenizedText& text,
                      Granularity granularity) {
    if (mask.size() != text.size()) {
        throw InputError("regroup: mask length " + std::to_string(mask.size()) + " for " +
                         std::to_string(text.size()) + " tokens");
    }
    if (granularity == Granularity::token) {
        return mask;
    }
    RationaleMask out;
    for (const auto& members : group_members(text, granularity)) {
        std::uint8_t any = 0;
        for (auto t : members) {
            any |= mask.bits[t];
        }
        out.bits.push_back(any);
    }
    return out;
}

DatasetError::DatasetError(std::vector<DatasetIssue> issues)
    : InputError([&] {
          std::ostringstream os;
          os << "dataset has " << issues.size() << " invalid record(s)";
          for (const auto& is : issues) {
              os << "\n  line " << is.line << ": " << is.message;
          }
          return os.str();
      }()),
      issues_(std::move(issues)) {}

namespace {

std::vector<Span> parse_spans(const nlohmann::json& j, const char* field) {
    if (!j.is_array()) {
        throw InputError(std::string(field) + " must be an array of [begin,end] pairs");
    }
    std::vector<Span> spans;
    for (const auto& s : j) {
        if (!s.is_array() || s.size() != 2 || !s[0].is_number_unsigned() ||
            !s[1].is_number_unsigned()) {
            throw InputError(std::string(field) + " entries must be [begin,end] with begin,end >= 0");
        }
        spans.push_back({s[0].get<std::size_t>(), s[1].get<std::size_t>()});
    }
    return spans;
}

} // namespace

std::vector<PairInstance> parse_dataset(std::istream& in, const Tokenizer& tokenizer) {
    std::vector<PairInstance> out;
    std::vector<DatasetIssue> issues;
    std::set<std::string> seen;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) {
            continue;
        }
        try {
            const auto j = nlohmann::json::parse(line);
            if (!j.is_object()) {
                throw InputError("record is not an object");
            }
            for (const char* key : {"id", "post", "claim", "post_rationale", "claim_rationale"}) {
                if (!j.contains(key)) {
                    throw InputError(std::string("missing field '") + key + "'");
                }
            }
            for (const auto& [key, _] : j.items()) {
                if (key != "id" && key != "post" && key != "claim" && key != "post_rationale" &&
                    key != "claim_rationale") {
                    throw InputError("unknown field '" + key + "'");
                }
            }
            if (!j["id"].is_string() || !j["post"].is_string() || !j["claim"].is_string()) {
                throw InputError("id, post and claim must be strings");
            }
            PairInstance pair;
            pair.id = j["id"].get<std::string>();
            if (!seen.insert(pair.id).second) {
                throw InputError("duplicate id '" + pair.id + "'");
            }
            pair.post = tokenizer.tokenize(j["post"].get<std::string>());
            pair.claim = tokenizer.tokenize(j["claim"].get<std::string>());
            if (pair.post.empty() || pair.claim.empty()) {
                throw InputError("post and claim must contain at least one token");
            }
            const auto post_spans = parse_spans(j["post_rationale"], "post_rationale");
            const auto claim_spans = parse_spans(j["claim_rationale"], "claim_rationale");
            pair.post_gold = align_rationale(post_spans, pair.post);
            pair.claim_gold = align_rationale(claim_spans, pair.claim);
            out.push_back(std::move(pair));
        } catch (const nlohmann::json::exception& e) {
            issues.push_back({lineno, std::string("malformed JSON: ") + e.what()});
        } catch (const InputError& e) {
            issues.push_back({lineno, e.what()});
        }
    }
    if (!issues.empty()) {
        throw DatasetError(std::move(issues));
    }
    if (out.empty()) {
        warn("dataset is empty");
    }
    return out;
}

std::vector<PairInstance> load_dataset(const std::filesystem::path& path,
                                       const Tokenizer& tokenizer) {
    std::ifstream in(path);
    if (!in) {
        throw InputError("cannot open dataset '" + path.string() + "'");
    }
    return parse_dataset(in, tokenizer);
}

} // namespace xaiopt
