#include <sstream>

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "xaiopt/attribution.hpp"
#include "xaiopt/cli.hpp"
#include "xaiopt/errors.hpp"
#include "xaiopt/metrics.hpp"
#include "xaiopt/reference_encoder.hpp"
#include "xaiopt/searchspace.hpp"

namespace py = pybind11;
using namespace xaiopt;

namespace {

const ReferenceEncoder& encoder() {
    static const ReferenceEncoder enc;
    return enc;
}

PairInstance make_pair(const std::string& post, const std::string& claim) {
    PairInstance p;
    p.id = "python";
    p.post = tokenize(post);
    p.claim = tokenize(claim);
    p.post_gold.bits.assign(p.post.size(), 0);
    p.claim_gold.bits.assign(p.claim.size(), 0);
    return p;
}

RationaleMask to_mask(const std::vector<int>& gold) {
    RationaleMask m;
    for (int g : gold) m.bits.push_back(g ? 1 : 0);
    return m;
}

void check_lengths(const std::vector<double>& scores, const std::vector<int>& gold) {
    if (scores.size() != gold.size()) throw InputError("scores and gold differ in length");
}

} // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Attribution method selection and tuning for text-pair similarity models";

    auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
    py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
    py::register_exception<InputError>(m, "InputError", base.ptr());
    py::register_exception<CapabilityError>(m, "CapabilityError", base.ptr());
    py::register_exception<TransportError>(m, "TransportError", base.ptr());
    py::register_exception<StudyError>(m, "StudyError", base.ptr());

    m.def(
        "run_cli",
        [](const std::vector<std::string>& args) {
            std::vector<std::string> full{"xaiopt"};
            full.insert(full.end(), args.begin(), args.end());
            std::vector<const char*> argv;
            for (const auto& a : full) argv.push_back(a.c_str());
            std::ostringstream out;
            std::ostringstream err;
            int code = 0;
            {
                py::gil_scoped_release release;
                code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
            }
            return py::make_tuple(code, out.str(), err.str());
        },
        py::arg("args"), "Runs the command-line tool in process; returns (exit_code, stdout, stderr).");

    m.def(
        "tokenize",
        [](const std::string& text) {
            const auto t = tokenize(text);
            std::vector<std::pair<std::size_t, std::size_t>> offsets;
            for (const auto& s : t.offsets) offsets.emplace_back(s.begin, s.end);
            py::dict d;
            d["tokens"] = t.tokens;
            d["offsets"] = offsets;
            d["word_group"] = t.word_group;
            d["sentence_group"] = t.sentence_group;
            return d;
        },
        py::arg("text"));

    m.def(
        "similarity",
        [](const std::string& post, const std::string& claim) { return encoder().similarity(make_pair(post, claim)); },
        py::arg("post"), py::arg("claim"), "Similarity under the default reference encoder.");

    m.def(
        "attribute",
        [](const std::string& post, const std::string& claim, const std::string& method, std::uint64_t seed,
           const std::string& normalization) {
            const auto id = find_method(method);
            if (!id) throw ConfigError("unknown method '" + method + "'");
            const auto pair = make_pair(post, claim);
            MethodSettings s;
            s.method = *id;
            AttributionMap map;
            {
                py::gil_scoped_release release;
                map = normalize_map(attribute(encoder(), pair, s, seed), parse_normalization(normalization));
            }
            py::dict d;
            d["method"] = std::string(method_name(*id));
            d["post_tokens"] = pair.post.tokens;
            d["post_scores"] = map.post_scores;
            d["claim_tokens"] = pair.claim.tokens;
            d["claim_scores"] = map.claim_scores;
            return d;
        },
        py::arg("post"), py::arg("claim"), py::arg("method"), py::arg("seed") = 0,
        py::arg("normalization") = "without_normalize",
        "Attributes a pair with default method settings on the reference encoder.");

    m.def("methods", [] {
        std::vector<std::string> out;
        for (auto id : all_methods()) out.emplace_back(method_name(id));
        return out;
    });

    m.def(
        "auprc",
        [](const std::vector<double>& scores, const std::vector<int>& gold) {
            check_lengths(scores, gold);
            return auprc(scores, to_mask(gold));
        },
        py::arg("scores"), py::arg("gold"));
    m.def(
        "average_precision",
        [](const std::vector<double>& scores, const std::vector<int>& gold) {
            check_lengths(scores, gold);
            return average_precision(scores, to_mask(gold));
        },
        py::arg("scores"), py::arg("gold"));
    m.def(
        "token_f1",
        [](const std::vector<double>& scores, const std::vector<int>& gold) {
            check_lengths(scores, gold);
            return token_f1(scores, to_mask(gold));
        },
        py::arg("scores"), py::arg("gold"));
    m.def(
        "token_iou",
        [](const std::vector<double>& scores, const std::vector<int>& gold) {
            check_lengths(scores, gold);
            return token_iou(scores, to_mask(gold));
        },
        py::arg("scores"), py::arg("gold"));
    m.def("weighted_overall", &weighted_overall, py::arg("faithfulness"), py::arg("plausibility"),
          py::arg("w_f") = 0.5, py::arg("w_p") = 0.5);

    m.def(
        "config_summary",
        [](const std::string& path) {
            const auto spec = load_config(path);
            std::vector<std::string> methods;
            for (const auto& ms : spec.methods) methods.emplace_back(method_name(ms.method));
            py::dict d;
            d["methods"] = methods;
            d["cardinality"] = cardinality(spec);
            d["sampler"] = std::string(sampler_name(spec.sampler.kind));
            d["n_trials"] = spec.sampler.n_trials;
            d["seed"] = spec.sampler.seed;
            d["multi_objective"] = spec.multi_objective;
            d["dataset"] = spec.dataset;
            return d;
        },
        py::arg("path"));
}
