#include "xaiopt/searchspace.hpp"

#include "xaiopt/diag.hpp"
#include "xaiopt/errors.hpp"
#include "xaiopt/rng.hpp"

#include <yaml-cpp/yaml.h>

#include "json.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

namespace xaiopt {
namespace {

using nlohmann::json;

// ---------------------------------------------------------------- values

std::string format_double(double v) {
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
    std::string s(buf, end);
    if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
    return s;
}

double round12(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return std::strtod(buf, nullptr);
}

std::string quote(std::string_view s) { return json(std::string(s)).dump(); }

bool is_int_text(std::string_view s) {
    if (s.empty()) return false;
    std::size_t i = (s[0] == '-' || s[0] == '+') ? 1 : 0;
    if (i == s.size()) return false;
    return std::all_of(s.begin() + static_cast<std::ptrdiff_t>(i), s.end(),
                       [](char c) { return c >= '0' && c <= '9'; });
}

std::optional<double> parse_double(std::string_view s) {
    std::string t(s);
    if (t.empty()) return std::nullopt;
    char* end = nullptr;
    const double v = std::strtod(t.c_str(), &end);
    if (end != t.c_str() + t.size()) return std::nullopt;
    return v;
}

std::string where(const YAML::Node& node, std::string_view path) {
    const auto mark = node.Mark();
    std::string loc(path);
    if (mark.line >= 0) loc += " (line " + std::to_string(mark.line + 1) + ")";
    return loc;
}

[[noreturn]] void fail(const YAML::Node& node, std::string_view path, const std::string& msg) {
    throw ConfigError(where(node, path) + ": " + msg);
}

ParamValue scalar_value(const YAML::Node& node, std::string_view path) {
    const auto text = node.Scalar();
    if (node.Tag() == "!") return text; // quoted
    if (text == "true" || text == "True" || text == "TRUE") return true;
    if (text == "false" || text == "False" || text == "FALSE") return false;
    if (is_int_text(text)) {
        std::int64_t v = 0;
        const auto* b = text.data() + (text[0] == '+' ? 1 : 0);
        auto [p, ec] = std::from_chars(b, text.data() + text.size(), v);
        if (ec != std::errc()) fail(node, path, "integer out of range: " + text);
        return v;
    }
    if (auto d = parse_double(text)) return *d;
    return text;
}

ParamValue node_value(const YAML::Node& node, std::string_view path) {
    if (node.IsScalar()) return scalar_value(node, path);
    if (node.IsSequence()) {
        std::vector<std::int64_t> ints;
        for (const auto& item : node) {
            const auto v = item.IsScalar() ? scalar_value(item, path) : ParamValue{};
            if (!std::holds_alternative<std::int64_t>(v)) {
                fail(item, path, "nested choice lists may only hold integers");
            }
            ints.push_back(std::get<std::int64_t>(v));
        }
        return ints;
    }
    fail(node, path, "expected a scalar or a list of integers");
}

std::optional<double> numeric(const ParamValue& v) {
    if (auto* i = std::get_if<std::int64_t>(&v)) return static_cast<double>(*i);
    if (auto* d = std::get_if<double>(&v)) return *d;
    return std::nullopt;
}

// ---------------------------------------------------------------- schema

enum class Expect { integer, number, boolean, string, window };

struct ParamRule {
    std::string_view name;
    Expect expect;
    double min = -INFINITY;          ///< inclusive lower bound for numbers
    bool strict_min = false;
    std::vector<std::string_view> words; ///< allowed strings when nonempty
};

ParamRule rule(std::string_view name, Expect expect, double min = -INFINITY,
               bool strict_min = false, std::vector<std::string_view> words = {}) {
    return ParamRule{name, expect, min, strict_min, std::move(words)};
}

std::vector<ParamRule> rules_for(MethodId id) {
    switch (id) {
    case MethodId::occlusion:
        return {rule("sliding_window_shapes", Expect::window, 1.0),
                rule("strides", Expect::window, 1.0)};
    case MethodId::occlusion_word_level:
        return {rule("regex_condition", Expect::string)};
    case MethodId::lime:
        return {rule("n_samples", Expect::integer, 1.0),
                rule("distance_mode", Expect::string, -INFINITY, false, {"cosine", "euclidean"}),
                rule("kernel_width", Expect::number, 0.0, true),
                rule("alpha", Expect::number, 0.0)};
    case MethodId::kernel_shap:
        return {rule("n_samples", Expect::integer, 2.0)};
    case MethodId::gradient_shap:
        return {rule("stdevs", Expect::number, 0.0), rule("n_samples", Expect::integer, 1.0)};
    case MethodId::saliency:
        return {rule("abs", Expect::boolean)};
    case MethodId::integrated_gradients:
        return {rule("n_steps", Expect::integer, 1.0),
                rule("baseline", Expect::string, -INFINITY, false, {"zero", "mask_token"})};
    default:
        return {};
    }
}

bool accepts_token_groups(MethodId id) {
    return id == MethodId::lime || id == MethodId::kernel_shap || id == MethodId::feature_ablation;
}

const ParamRule* find_rule(const std::vector<ParamRule>& rules, std::string_view name) {
    for (const auto& r : rules) {
        if (r.name == name) return &r;
    }
    return nullptr;
}

std::string check_value(const ParamRule& rule, const ParamValue& v) {
    auto bound = [&](double x) -> std::string {
        if (rule.strict_min ? !(x > rule.min) : !(x >= rule.min)) {
            return std::string(rule.strict_min ? "must be > " : "must be >= ") +
                   format_double(rule.min);
        }
        return {};
    };
    switch (rule.expect) {
    case Expect::integer:
        if (!std::holds_alternative<std::int64_t>(v)) return "expects an integer";
        return bound(static_cast<double>(std::get<std::int64_t>(v)));
    case Expect::number: {
        const auto n = numeric(v);
        if (!n) return "expects a number";
        return bound(*n);
    }
    case Expect::boolean:
        return std::holds_alternative<bool>(v) ? std::string() : "expects true or false";
    case Expect::string: {
        if (!std::holds_alternative<std::string>(v)) return "expects a string";
        const auto& s = std::get<std::string>(v);
        if (!rule.words.empty() &&
            std::find(rule.words.begin(), rule.words.end(), s) == rule.words.end()) {
            std::string msg = "must be one of";
            for (auto w : rule.words) msg += " " + std::string(w);
            return msg;
        }
        return {};
    }
    case Expect::window: {
        std::int64_t first = 0;
        if (auto* i = std::get_if<std::int64_t>(&v)) {
            first = *i;
        } else if (auto* l = std::get_if<std::vector<std::int64_t>>(&v); l && !l->empty()) {
            first = l->front();
        } else {
            return "expects an integer or an [n, width] pair";
        }
        return bound(static_cast<double>(first));
    }
    }
    return {};
}

// Range tuple "(low, high[, {'step': s} | s])".
ParamDef parse_tuple(std::string_view text, const YAML::Node& node, std::string_view path) {
    std::string body(text.substr(1, text.size() - 2));
    std::vector<std::string> parts;
    int depth = 0;
    std::string cur;
    for (char c : body) {
        if (c == '{' || c == '[') ++depth;
        if (c == '}' || c == ']') --depth;
        if (c == ',' && depth == 0) {
            parts.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    parts.push_back(cur);
    auto trim = [](std::string s) {
        const auto b = s.find_first_not_of(" \t");
        const auto e = s.find_last_not_of(" \t");
        return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    for (auto& p : parts) p = trim(p);
    if (parts.size() < 2 || parts.size() > 3) {
        fail(node, path, "range tuple needs (low, high) or (low, high, step)");
    }
    ParamDef def;
    const auto lo = parse_double(parts[0]);
    const auto hi = parse_double(parts[1]);
    if (!lo || !hi) fail(node, path, "range bounds must be numbers");
    def.low = *lo;
    def.high = *hi;
    bool all_int = is_int_text(parts[0]) && is_int_text(parts[1]);
    if (parts.size() == 3) {
        std::string step = parts[2];
        if (!step.empty() && step.front() == '{') {
            const auto colon = step.find(':');
            if (colon == std::string::npos || step.back() != '}') {
                fail(node, path, "malformed step dictionary '" + step + "'");
            }
            auto key = trim(step.substr(1, colon - 1));
            std::erase_if(key, [](char c) { return c == '\'' || c == '"'; });
            if (key != "step") fail(node, path, "unknown range option '" + key + "'");
            step = trim(step.substr(colon + 1, step.size() - colon - 2));
        }
        const auto s = parse_double(step);
        if (!s) fail(node, path, "range step must be a number");
        def.step = *s;
        all_int = all_int && is_int_text(step);
    } else if (all_int) {
        def.step = 1.0;
    }
    def.kind = all_int ? ParamKind::int_range : ParamKind::float_range;
    return def;
}

ParamDef parse_param(const std::string& name, const YAML::Node& node, std::string_view path) {
    ParamDef def;
    if (node.IsMap()) {
        for (const auto& kv : node) {
            const auto key = kv.first.as<std::string>();
            if (key != "low" && key != "high" && key != "step") {
                fail(kv.first, path, "unknown range key '" + key + "'");
            }
        }
        if (!node["low"] || !node["high"]) fail(node, path, "range needs low and high");
        const auto lo = scalar_value(node["low"], path);
        const auto hi = scalar_value(node["high"], path);
        if (!numeric(lo) || !numeric(hi)) fail(node, path, "range bounds must be numbers");
        def.low = *numeric(lo);
        def.high = *numeric(hi);
        bool all_int = std::holds_alternative<std::int64_t>(lo) &&
                       std::holds_alternative<std::int64_t>(hi);
        if (node["step"]) {
            const auto st = scalar_value(node["step"], path);
            if (!numeric(st)) fail(node, path, "range step must be a number");
            def.step = *numeric(st);
            all_int = all_int && std::holds_alternative<std::int64_t>(st);
        } else if (all_int) {
            def.step = 1.0;
        }
        def.kind = all_int ? ParamKind::int_range : ParamKind::float_range;
    } else if (node.IsScalar() && node.Scalar().size() >= 2 && node.Scalar().front() == '(' &&
               node.Scalar().back() == ')') {
        def = parse_tuple(node.Scalar(), node, path);
    } else if (node.IsSequence()) {
        def.kind = ParamKind::categorical;
        for (const auto& item : node) def.choices.push_back(node_value(item, path));
        if (def.choices.empty()) fail(node, path, "choice list is empty");
    } else if (node.IsScalar()) {
        def.kind = ParamKind::categorical;
        def.choices.push_back(scalar_value(node, path));
    } else {
        fail(node, path, "expected a choice list, a range or a single value");
    }
    if (def.kind != ParamKind::categorical) {
        if (def.low > def.high) fail(node, path, "range low exceeds high");
        if (def.step && !(*def.step > 0.0)) fail(node, path, "range step must be > 0");
    }
    def.name = name;
    return def;
}

void check_param(const ParamDef& def, const ParamRule& rule, const YAML::Node& node,
                 std::string_view path) {
    std::vector<ParamValue> probes = def.choices;
    if (def.kind != ParamKind::categorical) {
        if (rule.expect != Expect::number && rule.expect != Expect::integer &&
            rule.expect != Expect::window) {
            fail(node, path, "parameter does not take a numeric range");
        }
        if (rule.expect != Expect::number && def.kind == ParamKind::float_range) {
            fail(node, path, "parameter takes integers; range must have integer bounds and step");
        }
        probes = {def.value_at(0)};
        if (def.size() > 0) probes.push_back(def.value_at(def.size() - 1));
        else probes.push_back(def.high);
    }
    std::set<std::string> seen;
    for (const auto& v : probes) {
        if (const auto msg = check_value(rule, v); !msg.empty()) {
            fail(node, path, "value " + format_value(v) + " " + msg);
        }
    }
    for (const auto& v : def.choices) {
        if (!seen.insert(format_value(v)).second) {
            fail(node, path, "duplicate choice " + format_value(v));
        }
    }
}

std::string flow_dump(const YAML::Node& node) {
    YAML::Emitter out;
    out.SetMapFormat(YAML::Flow);
    out.SetSeqFormat(YAML::Flow);
    out << node;
    return out.c_str();
}

// Quotes tuple-valued scalars so that the YAML parser accepts them.
std::string quote_tuples(std::string_view doc) {
    std::string out;
    std::istringstream in{std::string(doc)};
    std::string line;
    while (std::getline(in, line)) {
        std::size_t value_at = std::string::npos;
        const auto first = line.find_first_not_of(' ');
        if (first != std::string::npos && line.compare(first, 2, "- ") == 0) {
            value_at = first + 2;
        } else if (auto colon = line.find(": "); colon != std::string::npos) {
            value_at = colon + 2;
        }
        if (value_at != std::string::npos) {
            const auto b = line.find_first_not_of(' ', value_at);
            const auto e = line.find_last_not_of(" \r");
            if (b != std::string::npos && line[b] == '(' && line[e] == ')') {
                std::string tuple = line.substr(b, e - b + 1);
                line = line.substr(0, b) + quote(tuple);
            }
        }
        out += line;
        out += '\n';
    }
    return out;
}

bool as_bool(const YAML::Node& node, std::string_view path) {
    const auto v = scalar_value(node, path);
    if (!node.IsScalar() || !std::holds_alternative<bool>(v)) fail(node, path, "expected true or false");
    return std::get<bool>(v);
}

double as_number(const YAML::Node& node, std::string_view path) {
    if (!node.IsScalar()) fail(node, path, "expected a number");
    const auto v = numeric(scalar_value(node, path));
    if (!v) fail(node, path, "expected a number");
    return *v;
}

std::int64_t as_int(const YAML::Node& node, std::string_view path) {
    if (!node.IsScalar()) fail(node, path, "expected an integer");
    const auto v = scalar_value(node, path);
    if (!std::holds_alternative<std::int64_t>(v)) fail(node, path, "expected an integer");
    return std::get<std::int64_t>(v);
}

std::size_t as_count(const YAML::Node& node, std::string_view path, std::int64_t min) {
    const auto v = as_int(node, path);
    if (v < min) fail(node, path, "must be >= " + std::to_string(min));
    return static_cast<std::size_t>(v);
}

std::string as_string(const YAML::Node& node, std::string_view path) {
    if (!node.IsScalar()) fail(node, path, "expected a string");
    return node.Scalar();
}

std::vector<std::string> as_strings(const YAML::Node& node, std::string_view path) {
    if (node.IsScalar()) return {node.Scalar()};
    if (!node.IsSequence()) fail(node, path, "expected a list of strings");
    std::vector<std::string> out;
    for (const auto& item : node) out.push_back(as_string(item, path));
    return out;
}

MethodId method_from_name(const std::string& name, const YAML::Node& node, std::string_view path) {
    if (auto id = find_method(name)) return *id;
    if (name == "ConservativeLRP") {
        fail(node, path, "method 'ConservativeLRP' is out of scope for this engine");
    }
    std::string known;
    for (auto id : all_methods()) known += (known.empty() ? "" : ", ") + std::string(method_name(id));
    fail(node, path, "unknown method '" + name + "' (known: " + known + ")");
}

void add_param(MethodSpace& space, ParamDef def, const YAML::Node& node, std::string_view path) {
    const auto rules = rules_for(space.method);
    const auto* rule = find_rule(rules, def.name);
    if (rule == nullptr) {
        fail(node, path, "method '" + std::string(method_name(space.method)) +
                             "' has no parameter '" + def.name + "'");
    }
    if (space.find(def.name) != nullptr) {
        fail(node, path, "parameter '" + def.name + "' given twice");
    }
    check_param(def, *rule, node, path);
    space.params.push_back(std::move(def));
}

void parse_method_param(StudySpec& spec, const YAML::Node& node) {
    if (!node.IsMap()) fail(node, "method_param", "expected a mapping");
    std::optional<bool> global_groups;
    for (const auto& kv : node) {
        const auto key = kv.first.as<std::string>();
        if (key == "token_groups_for_feature_mask") {
            global_groups = as_bool(kv.second, "method_param.token_groups_for_feature_mask");
        }
    }
    for (auto& m : spec.methods) {
        if (global_groups && accepts_token_groups(m.method)) m.token_groups = *global_groups;
    }
    for (const auto& kv : node) {
        const auto name = kv.first.as<std::string>();
        if (name == "token_groups_for_feature_mask") continue;
        const std::string path = "method_param." + name;
        const auto id = method_from_name(name, kv.first, path);
        auto it = std::find_if(spec.methods.begin(), spec.methods.end(),
                               [&](const MethodSpace& m) { return m.method == id; });
        if (it == spec.methods.end()) {
            warn(path + ": method not listed in 'methods'; entry ignored");
            continue;
        }
        if (!kv.second.IsMap()) fail(kv.second, path, "expected a mapping");
        for (const auto& entry : kv.second) {
            const auto key = entry.first.as<std::string>();
            const std::string sub = path + "." + key;
            if (key == "parameters") {
                if (!entry.second.IsMap()) fail(entry.second, sub, "expected a mapping");
                for (const auto& p : entry.second) {
                    const auto pname = p.first.as<std::string>();
                    add_param(*it, parse_param(pname, p.second, sub + "." + pname), p.second,
                              sub + "." + pname);
                }
            } else if (key == "token_groups_for_feature_mask") {
                if (!accepts_token_groups(id)) {
                    fail(entry.first, sub, "flag does not apply to " + name);
                }
                it->token_groups = as_bool(entry.second, sub);
            } else if (key == "compute_baseline") {
                as_bool(entry.second, sub);
                it->opaque[key] = flow_dump(entry.second);
            } else {
                fail(entry.first, sub, "unknown key '" + key + "'");
            }
        }
    }
}

void parse_lime_model_param(MethodSpace* lime, const YAML::Node& node, const std::string& path) {
    if (!node.IsMap()) fail(node, path, "expected a mapping");
    for (const auto& kv : node) {
        const auto key = kv.first.as<std::string>();
        const std::string sub = path + "." + key;
        if (key != "similarity_func" && key != "interpretable_model") {
            fail(kv.first, sub, "unknown key '" + key + "'");
        }
        const std::string_view expected = key == "similarity_func"
                                              ? "get_exp_kernel_similarity_function"
                                              : "SkLearnLasso";
        if (!kv.second.IsMap()) fail(kv.second, sub, "expected a mapping");
        for (const auto& entry : kv.second) {
            const auto ekey = entry.first.as<std::string>();
            if (ekey == "function_name") {
                for (const auto& fn : as_strings(entry.second, sub + ".function_name")) {
                    const auto dot = fn.rfind('.');
                    const auto leaf = dot == std::string::npos ? fn : fn.substr(dot + 1);
                    if (leaf != expected) {
                        fail(entry.second, sub + ".function_name",
                             "only " + std::string(expected) + " is supported (got '" + fn + "')");
                    }
                }
            } else if (ekey == "parameters") {
                if (!entry.second.IsMap()) fail(entry.second, sub, "expected a mapping");
                for (const auto& p : entry.second) {
                    const auto pname = p.first.as<std::string>();
                    const bool ok = key == "similarity_func"
                                        ? (pname == "distance_mode" || pname == "kernel_width")
                                        : pname == "alpha";
                    const std::string ppath = sub + ".parameters." + pname;
                    if (!ok) fail(p.first, ppath, "unknown parameter '" + pname + "'");
                    if (lime != nullptr) {
                        add_param(*lime, parse_param(pname, p.second, ppath), p.second, ppath);
                    }
                }
            } else {
                fail(entry.first, sub + "." + ekey, "unknown key '" + ekey + "'");
            }
        }
    }
}

void parse_model_param(StudySpec& spec, const YAML::Node& node) {
    if (!node.IsMap()) fail(node, "model_param", "expected a mapping");
    for (const auto& kv : node) {
        const auto name = kv.first.as<std::string>();
        const std::string path = "model_param." + name;
        if (name == "Lime") {
            MethodSpace* lime = nullptr;
            for (auto& m : spec.methods) {
                if (m.method == MethodId::lime) lime = &m;
            }
            parse_lime_model_param(lime, kv.second, path);
            continue;
        }
        if (!find_method(name) && name != "ConservativeLRP") {
            fail(kv.first, path, "unknown method '" + name + "'");
        }
        spec.model_param_opaque[name] = flow_dump(kv.second);
    }
}

void parse_optuna(StudySpec& spec, const YAML::Node& node) {
    if (!node.IsMap()) fail(node, "Optuna_parameters", "expected a mapping");
    for (const auto& kv : node) {
        const auto key = kv.first.as<std::string>();
        const std::string path = "Optuna_parameters." + key;
        if (key == "sampler") {
            try {
                spec.sampler.kind = parse_sampler(as_string(kv.second, path));
            } catch (const ConfigError& e) {
                fail(kv.second, path, e.what());
            }
        } else if (key == "n_trials") {
            spec.sampler.n_trials = as_count(kv.second, path, 1);
        } else if (key == "n_startup_trials") {
            spec.sampler.n_startup_trials = as_count(kv.second, path, 0);
        } else if (key == "seed") {
            spec.sampler.seed = as_count(kv.second, path, 0);
        } else if (key == "pruning") {
            spec.sampler.pruning = as_bool(kv.second, path);
        } else if (key == "pruning_min_peers") {
            spec.sampler.pruning_min_peers = as_count(kv.second, path, 1);
        } else {
            fail(kv.first, path, "unknown key '" + key + "'");
        }
    }
}

void parse_reference(StudySpec& spec, const YAML::Node& node) {
    if (!node.IsMap()) fail(node, "reference_encoder", "expected a mapping");
    auto& r = spec.reference;
    for (const auto& kv : node) {
        const auto key = kv.first.as<std::string>();
        const std::string path = "reference_encoder." + key;
        if (key == "vocab_buckets") r.vocab_buckets = as_count(kv.second, path, 1);
        else if (key == "dim") r.dim = as_count(kv.second, path, 1);
        else if (key == "layers") r.layers = as_count(kv.second, path, 0);
        else if (key == "heads") r.heads = as_count(kv.second, path, 1);
        else if (key == "ffn_dim") r.ffn_dim = as_count(kv.second, path, 1);
        else if (key == "init_std") r.init_std = as_number(kv.second, path);
        else if (key == "seed") r.seed = as_count(kv.second, path, 0);
        else fail(kv.first, path, "unknown key '" + key + "'");
    }
    if (r.dim % r.heads != 0) fail(node, "reference_encoder", "dim must be divisible by heads");
}

void parse_remote(StudySpec& spec, const YAML::Node& node) {
    if (!node.IsMap()) fail(node, "remote", "expected a mapping");
    for (const auto& kv : node) {
        const auto key = kv.first.as<std::string>();
        const std::string path = "remote." + key;
        if (key == "max_in_flight") spec.remote.max_in_flight = as_count(kv.second, path, 1);
        else if (key == "retries") spec.remote.retries = static_cast<int>(as_count(kv.second, path, 0));
        else if (key == "timeout_s") spec.remote.timeout_s = as_number(kv.second, path);
        else fail(kv.first, path, "unknown key '" + key + "'");
    }
}

double param_number(const ParamValue& v) {
    if (auto n = numeric(v)) return *n;
    throw ConfigError("expected a numeric parameter value, got " + format_value(v));
}

std::size_t param_window(const ParamValue& v) {
    if (auto* i = std::get_if<std::int64_t>(&v)) return static_cast<std::size_t>(*i);
    if (auto* l = std::get_if<std::vector<std::int64_t>>(&v); l && !l->empty()) {
        return static_cast<std::size_t>(l->front());
    }
    throw ConfigError("expected a window size, got " + format_value(v));
}

void emit_param(std::ostringstream& os, const ParamDef& p, const std::string& indent) {
    os << indent << p.name << ": ";
    if (p.kind == ParamKind::categorical) {
        os << "[";
        for (std::size_t i = 0; i < p.choices.size(); ++i) {
            os << (i ? ", " : "") << format_value(p.choices[i]);
        }
        os << "]\n";
        return;
    }
    auto num = [&](double v) {
        return p.kind == ParamKind::int_range ? std::to_string(static_cast<std::int64_t>(v))
                                              : format_double(v);
    };
    os << "{low: " << num(p.low) << ", high: " << num(p.high);
    if (p.step) os << ", step: " << num(*p.step);
    os << "}\n";
}

} // namespace

// ---------------------------------------------------------------- public

std::string format_value(const ParamValue& v) {
    struct Visitor {
        std::string operator()(bool b) const { return b ? "true" : "false"; }
        std::string operator()(std::int64_t i) const { return std::to_string(i); }
        std::string operator()(double d) const { return format_double(d); }
        std::string operator()(const std::string& s) const { return quote(s); }
        std::string operator()(const std::vector<std::int64_t>& l) const {
            std::string out = "[";
            for (std::size_t i = 0; i < l.size(); ++i) {
                out += (i ? ", " : "") + std::to_string(l[i]);
            }
            return out + "]";
        }
    };
    return std::visit(Visitor{}, v);
}

std::string_view to_string(ParamKind k) {
    switch (k) {
    case ParamKind::categorical: return "categorical";
    case ParamKind::int_range: return "int-range";
    case ParamKind::float_range: return "float-range";
    }
    return "?";
}

std::size_t ParamDef::size() const {
    if (kind == ParamKind::categorical) return choices.size();
    if (!step) return 0;
    return static_cast<std::size_t>(std::floor((high - low) / *step + 1e-9)) + 1;
}

ParamValue ParamDef::value_at(std::size_t index) const {
    if (kind == ParamKind::categorical) return choices.at(index);
    if (!step) return at_position(0.0);
    const double v = low + static_cast<double>(index) * *step;
    if (kind == ParamKind::int_range) return static_cast<std::int64_t>(std::llround(v));
    return round12(v);
}

std::optional<std::size_t> ParamDef::index_of(const ParamValue& v) const {
    if (kind == ParamKind::categorical) {
        for (std::size_t i = 0; i < choices.size(); ++i) {
            if (choices[i] == v) return i;
        }
        return std::nullopt;
    }
    if (!step) return std::nullopt;
    if (kind == ParamKind::int_range && !std::holds_alternative<std::int64_t>(v)) return std::nullopt;
    const auto x = numeric(v);
    if (!x) return std::nullopt;
    const double idx = std::round((*x - low) / *step);
    if (idx < 0.0 || idx >= static_cast<double>(size())) return std::nullopt;
    const auto i = static_cast<std::size_t>(idx);
    const auto grid = numeric(value_at(i));
    if (std::abs(*grid - *x) > 1e-9 * std::max(1.0, std::abs(*x))) return std::nullopt;
    return i;
}

ParamValue ParamDef::at_position(double u) const {
    const double v = low + std::clamp(u, 0.0, 1.0) * (high - low);
    if (kind == ParamKind::int_range) return static_cast<std::int64_t>(std::llround(v));
    return v;
}

double ParamDef::position_of(const ParamValue& v) const {
    const auto x = numeric(v);
    if (!x || high == low) return 0.0;
    return (*x - low) / (high - low);
}

bool ParamDef::contains(const ParamValue& v) const {
    if (kind == ParamKind::float_range && !step) {
        const auto x = numeric(v);
        return x && *x >= low && *x <= high;
    }
    return index_of(v).has_value();
}

const ParamDef* MethodSpace::find(std::string_view name) const {
    for (const auto& p : params) {
        if (p.name == name) return &p;
    }
    return nullptr;
}

std::string_view sampler_name(SamplerKind k) {
    switch (k) {
    case SamplerKind::random: return "RandomSampler";
    case SamplerKind::brute_force: return "BruteForceSampler";
    case SamplerKind::tpe: return "TPESampler";
    case SamplerKind::nsga2: return "NSGAIISampler";
    }
    return "?";
}

SamplerKind parse_sampler(std::string_view name) {
    for (auto k : {SamplerKind::random, SamplerKind::brute_force, SamplerKind::tpe,
                   SamplerKind::nsga2}) {
        if (sampler_name(k) == name) return k;
    }
    const std::string supported = "supported: RandomSampler, BruteForceSampler, TPESampler, NSGAIISampler";
    if (name == "GPSampler" || name == "NSGAIIISampler") {
        throw ConfigError("sampler '" + std::string(name) + "' is out of scope (" + supported + ")");
    }
    throw ConfigError("unknown sampler '" + std::string(name) + "' (" + supported + ")");
}

bool StudySpec::remote_model() const { return model_path.rfind("http://", 0) == 0; }

const MethodSpace* StudySpec::find(MethodId id) const {
    for (const auto& m : methods) {
        if (m.method == id) return &m;
    }
    return nullptr;
}

std::string describe(const TrialConfig& config) {
    std::string out(method_name(config.method));
    out += " {";
    bool first = true;
    for (const auto& [k, v] : config.params) {
        out += (first ? "" : ", ") + k + ": " + format_value(v);
        first = false;
    }
    out += "} ";
    out += to_string(config.normalization);
    out += "/";
    out += to_string(config.granularity);
    return out;
}

StudySpec parse_config(std::string_view document, const std::filesystem::path& base_dir) {
    YAML::Node root;
    try {
        root = YAML::Load(quote_tuples(document));
    } catch (const YAML::Exception& e) {
        throw ConfigError(std::string("config is not valid YAML: ") + e.what());
    }
    if (!root.IsMap()) throw ConfigError("config must be a mapping of top-level keys");

    StudySpec spec;
    spec.methods.clear();
    bool have_methods = false;
    std::optional<bool> flags[3];
    std::optional<double> w_p;
    std::optional<double> w_p_alias;

    // Methods first: method_param and model_param attach to them.
    if (const auto m = root["methods"]) {
        have_methods = true;
        std::set<MethodId> seen;
        for (const auto& name : as_strings(m, "methods")) {
            const auto id = method_from_name(name, m, "methods");
            if (!seen.insert(id).second) fail(m, "methods", "method '" + name + "' listed twice");
            spec.methods.push_back({id, {}, false, {}});
        }
    }

    for (const auto& kv : root) {
        const auto key = kv.first.as<std::string>();
        const auto& v = kv.second;
        if (key == "methods" || key == "method_param" || key == "model_param") {
            continue;
        } else if (key == "model_path") {
            spec.model_path = as_string(v, key);
        } else if (key == "embeddings_module_name") {
            spec.embeddings_module_name = as_string(v, key);
        } else if (key == "normalizations") {
            spec.normalizations.clear();
            for (const auto& n : as_strings(v, key)) {
                Normalization parsed{};
                try {
                    parsed = parse_normalization(n);
                } catch (const ConfigError& e) {
                    fail(v, key, e.what());
                }
                if (std::find(spec.normalizations.begin(), spec.normalizations.end(), parsed) !=
                    spec.normalizations.end()) {
                    fail(v, key, "normalization '" + n + "' listed twice");
                }
                spec.normalizations.push_back(parsed);
            }
            if (spec.normalizations.empty()) fail(v, key, "at least one normalization is required");
        } else if (key == "explanation_maps_token") {
            flags[0] = as_bool(v, key);
        } else if (key == "explanation_maps_word") {
            flags[1] = as_bool(v, key);
        } else if (key == "explanation_maps_sentence") {
            flags[2] = as_bool(v, key);
        } else if (key == "plausibility_weight") {
            w_p = as_number(v, key);
        } else if (key == "plausability_weight") {
            w_p_alias = as_number(v, key);
        } else if (key == "faithfulness_weight") {
            spec.w_f = as_number(v, key);
        } else if (key == "multiple_object") {
            spec.multi_objective = as_bool(v, key);
        } else if (key == "Optuna_parameters") {
            parse_optuna(spec, v);
        } else if (key == "dataset") {
            std::filesystem::path p = as_string(v, key);
            if (p.is_relative() && !base_dir.empty()) p = base_dir / p;
            spec.dataset = p.lexically_normal().string();
        } else if (key == "aopc_bins") {
            if (!v.IsSequence()) fail(v, key, "expected a list of fractions");
            for (const auto& b : v) {
                const double f = as_number(b, key);
                if (!(f > 0.0 && f <= 1.0)) fail(b, key, "bin fraction must lie in (0, 1]");
                spec.aopc_bins.push_back(f);
            }
            if (spec.aopc_bins.empty()) fail(v, key, "at least one bin is required");
        } else if (key == "reference_encoder") {
            parse_reference(spec, v);
        } else if (key == "remote") {
            parse_remote(spec, v);
        } else {
            fail(kv.first, key, "unknown top-level key '" + key + "'");
        }
    }
    if (!have_methods) throw ConfigError("config is missing required key 'methods'");
    if (spec.methods.empty()) throw ConfigError("methods: at least one method is required");
    if (const auto mp = root["method_param"]) parse_method_param(spec, mp);
    if (const auto mp = root["model_param"]) parse_model_param(spec, mp);

    if (w_p && w_p_alias && *w_p != *w_p_alias) {
        throw ConfigError("plausibility_weight and plausability_weight disagree");
    }
    if (w_p) spec.w_p = *w_p;
    else if (w_p_alias) spec.w_p = *w_p_alias;
    if (spec.w_f < 0.0 || spec.w_p < 0.0 || !(spec.w_f + spec.w_p > 0.0)) {
        throw ConfigError("faithfulness_weight and plausibility_weight must be >= 0 and not both 0");
    }

    const int set = (flags[0].value_or(false) ? 1 : 0) + (flags[1].value_or(false) ? 1 : 0) +
                    (flags[2].value_or(false) ? 1 : 0);
    if (set > 1) {
        throw ConfigError("only one of explanation_maps_token/word/sentence may be true");
    }
    if (flags[1].value_or(false)) spec.granularity = Granularity::word;
    else if (flags[2].value_or(false)) spec.granularity = Granularity::sentence;
    else spec.granularity = Granularity::token;

    if (spec.sampler.kind == SamplerKind::brute_force && !cardinality(spec)) {
        throw ConfigError("BruteForceSampler needs a finite space; give every float range a step");
    }
    if (!spec.remote_model() && spec.model_path != "reference") {
        throw ConfigError("model_path must be \"reference\" or an http:// model server URL (got '" +
                          spec.model_path + "')");
    }
    return spec;
}

StudySpec load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path.string() + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str(), path.parent_path());
}

std::string serialize_config(const StudySpec& spec) {
    std::ostringstream os;
    os << "model_path: " << quote(spec.model_path) << "\n";
    if (!spec.embeddings_module_name.empty()) {
        os << "embeddings_module_name: " << quote(spec.embeddings_module_name) << "\n";
    }
    os << "methods: [";
    for (std::size_t i = 0; i < spec.methods.size(); ++i) {
        os << (i ? ", " : "") << quote(method_name(spec.methods[i].method));
    }
    os << "]\nnormalizations: [";
    for (std::size_t i = 0; i < spec.normalizations.size(); ++i) {
        os << (i ? ", " : "") << quote(to_string(spec.normalizations[i]));
    }
    os << "]\n";
    os << "explanation_maps_token: " << (spec.granularity == Granularity::token ? "true" : "false") << "\n";
    os << "explanation_maps_word: " << (spec.granularity == Granularity::word ? "true" : "false") << "\n";
    os << "explanation_maps_sentence: " << (spec.granularity == Granularity::sentence ? "true" : "false") << "\n";
    os << "plausibility_weight: " << format_double(spec.w_p) << "\n";
    os << "faithfulness_weight: " << format_double(spec.w_f) << "\n";
    os << "multiple_object: " << (spec.multi_objective ? "true" : "false") << "\n";
    os << "Optuna_parameters:\n";
    os << "  sampler: " << quote(sampler_name(spec.sampler.kind)) << "\n";
    os << "  n_trials: " << spec.sampler.n_trials << "\n";
    os << "  n_startup_trials: " << spec.sampler.n_startup_trials << "\n";
    os << "  seed: " << spec.sampler.seed << "\n";
    os << "  pruning: " << (spec.sampler.pruning ? "true" : "false") << "\n";
    os << "  pruning_min_peers: " << spec.sampler.pruning_min_peers << "\n";
    if (!spec.dataset.empty()) os << "dataset: " << quote(spec.dataset) << "\n";
    if (!spec.aopc_bins.empty()) {
        os << "aopc_bins: [";
        for (std::size_t i = 0; i < spec.aopc_bins.size(); ++i) {
            os << (i ? ", " : "") << format_double(spec.aopc_bins[i]);
        }
        os << "]\n";
    }
    const auto& r = spec.reference;
    os << "reference_encoder: {vocab_buckets: " << r.vocab_buckets << ", dim: " << r.dim
       << ", layers: " << r.layers << ", heads: " << r.heads << ", ffn_dim: " << r.ffn_dim
       << ", init_std: " << format_double(r.init_std) << ", seed: " << r.seed << "}\n";
    os << "remote: {max_in_flight: " << spec.remote.max_in_flight
       << ", retries: " << spec.remote.retries
       << ", timeout_s: " << format_double(spec.remote.timeout_s) << "}\n";
    os << "method_param:\n";
    for (const auto& m : spec.methods) {
        os << "  " << quote(method_name(m.method)) << ":\n";
        bool empty = true;
        if (!m.params.empty()) {
            os << "    parameters:\n";
            for (const auto& p : m.params) emit_param(os, p, "      ");
            empty = false;
        }
        if (accepts_token_groups(m.method)) {
            os << "    token_groups_for_feature_mask: " << (m.token_groups ? "true" : "false") << "\n";
            empty = false;
        }
        for (const auto& [k, v] : m.opaque) {
            os << "    " << k << ": " << v << "\n";
            empty = false;
        }
        if (empty) os << "    {}\n";
    }
    if (!spec.model_param_opaque.empty()) {
        os << "model_param:\n";
        for (const auto& [k, v] : spec.model_param_opaque) {
            os << "  " << quote(k) << ": " << v << "\n";
        }
    }
    return os.str();
}

std::optional<std::uint64_t> cardinality(const StudySpec& spec) {
    std::uint64_t total = 0;
    for (const auto& m : spec.methods) {
        std::uint64_t prod = 1;
        for (const auto& p : m.params) {
            if (!p.finite()) return std::nullopt;
            prod *= p.size();
        }
        total += prod;
    }
    return total * spec.normalizations.size();
}

std::vector<std::string> validate(const TrialConfig& config, const StudySpec& spec) {
    std::vector<std::string> out;
    const auto* space = spec.find(config.method);
    const std::string mname(method_name(config.method));
    if (space == nullptr) {
        out.push_back("method '" + mname + "' is not part of the study");
    }
    for (const auto& [name, value] : config.params) {
        const ParamDef* def = space ? space->find(name) : nullptr;
        if (def == nullptr) {
            out.push_back("conditionality violation: parameter '" + name +
                          "' does not belong to method '" + mname + "'");
            continue;
        }
        if (!def->contains(value)) {
            std::string domain;
            if (def->kind == ParamKind::categorical) {
                domain = "choices [";
                for (std::size_t i = 0; i < def->choices.size(); ++i) {
                    domain += (i ? ", " : "") + format_value(def->choices[i]);
                }
                domain += "]";
            } else {
                domain = "[" + format_double(def->low) + ", " + format_double(def->high) + "]";
                if (def->step) domain += " step " + format_double(*def->step);
            }
            out.push_back("parameter '" + name + "' = " + format_value(value) + " outside " + domain);
        }
    }
    if (space != nullptr) {
        for (const auto& p : space->params) {
            if (!config.params.contains(p.name)) {
                out.push_back("parameter '" + p.name + "' of method '" + mname + "' is missing");
            }
        }
    }
    if (std::find(spec.normalizations.begin(), spec.normalizations.end(), config.normalization) ==
        spec.normalizations.end()) {
        out.push_back("normalization '" + std::string(to_string(config.normalization)) +
                      "' is not part of the study");
    }
    if (config.granularity != spec.granularity) {
        out.push_back("granularity '" + std::string(to_string(config.granularity)) +
                      "' differs from the study's '" + std::string(to_string(spec.granularity)) + "'");
    }
    return out;
}

void check_admissible(const StudySpec& spec, const ModelCapabilities& caps) {
    std::vector<std::string> bad;
    for (const auto& m : spec.methods) {
        try {
            check_admissible(m.method, caps);
        } catch (const CapabilityError& e) {
            bad.emplace_back(e.what());
        }
    }
    if (!bad.empty()) {
        std::string msg = "model binding '" + spec.model_path + "' cannot run every listed method:";
        for (const auto& b : bad) msg += "\n  " + b;
        throw CapabilityError(msg);
    }
}

MethodSettings resolve_settings(const TrialConfig& config, const StudySpec& spec) {
    MethodSettings s;
    s.method = config.method;
    const auto* space = spec.find(config.method);
    const bool groups = space != nullptr && space->token_groups;
    auto get = [&](const char* name) -> const ParamValue* {
        auto it = config.params.find(name);
        return it == config.params.end() ? nullptr : &it->second;
    };
    switch (config.method) {
    case MethodId::occlusion:
        if (auto* v = get("sliding_window_shapes")) s.occlusion.window = param_window(*v);
        if (auto* v = get("strides")) s.occlusion.stride = param_window(*v);
        break;
    case MethodId::occlusion_word_level:
        if (auto* v = get("regex_condition")) s.separators = std::get<std::string>(*v);
        break;
    case MethodId::feature_ablation:
        s.feature_ablation_groups = groups;
        break;
    case MethodId::lime:
        s.lime.use_token_groups = groups;
        if (auto* v = get("n_samples")) s.lime.n_samples = static_cast<std::size_t>(param_number(*v));
        if (auto* v = get("distance_mode")) {
            s.lime.distance = std::get<std::string>(*v) == "cosine" ? DistanceMode::cosine
                                                                    : DistanceMode::euclidean;
        }
        if (auto* v = get("kernel_width")) s.lime.kernel_width = param_number(*v);
        if (auto* v = get("alpha")) s.lime.alpha = param_number(*v);
        break;
    case MethodId::kernel_shap:
        s.kernel_shap.use_token_groups = groups;
        if (auto* v = get("n_samples")) {
            s.kernel_shap.n_samples = static_cast<std::size_t>(param_number(*v));
        }
        break;
    case MethodId::gradient_shap:
        if (auto* v = get("stdevs")) s.gradient_shap.stdevs = param_number(*v);
        if (auto* v = get("n_samples")) {
            s.gradient_shap.n_samples = static_cast<std::size_t>(param_number(*v));
        }
        break;
    case MethodId::saliency:
        if (auto* v = get("abs")) s.saliency_abs = std::get<bool>(*v);
        break;
    case MethodId::integrated_gradients:
        if (auto* v = get("n_steps")) {
            s.integrated_gradients.n_steps = static_cast<std::size_t>(param_number(*v));
        }
        if (auto* v = get("baseline")) {
            s.integrated_gradients.baseline.kind = std::get<std::string>(*v) == "mask_token"
                                                       ? BaselineKind::mask_token
                                                       : BaselineKind::zero_embedding;
        }
        break;
    default:
        break;
    }
    return s;
}

std::string space_fingerprint(const StudySpec& spec) {
    StudySpec copy = spec;
    copy.sampler = SamplerConfig{};
    copy.w_f = 0.5;
    copy.w_p = 0.5;
    copy.multi_objective = false;
    copy.dataset.clear();
    copy.remote = RemoteBinding{};
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx",
                  static_cast<unsigned long long>(hash_string(serialize_config(copy))));
    return buf;
}

} // namespace xaiopt
