#include "xaiopt/study.hpp"

#include "xaiopt/errors.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

namespace xaiopt {
namespace {

using ojson = nlohmann::ordered_json;

ojson value_json(const ParamValue& v) {
    return std::visit([](const auto& x) { return ojson(x); }, v);
}

ParamValue json_value(const ojson& j) {
    if (j.is_boolean()) return j.get<bool>();
    if (j.is_number_integer()) return j.get<std::int64_t>();
    if (j.is_number_float()) return j.get<double>();
    if (j.is_string()) return j.get<std::string>();
    if (j.is_array()) return j.get<std::vector<std::int64_t>>();
    throw InputError("journal: unsupported parameter value " + j.dump());
}

ojson config_json(const TrialConfig& c) {
    ojson params = ojson::object();
    for (const auto& [name, value] : c.params) params[name] = value_json(value);
    return {{"method", std::string(method_name(c.method))},
            {"params", params},
            {"normalization", std::string(to_string(c.normalization))},
            {"granularity", std::string(to_string(c.granularity))}};
}

TrialConfig json_config(const ojson& j) {
    TrialConfig c;
    const auto name = j.at("method").get<std::string>();
    const auto id = find_method(name);
    if (!id) throw InputError("journal: unknown method " + name);
    c.method = *id;
    for (const auto& [key, value] : j.at("params").items()) c.params[key] = json_value(value);
    c.normalization = parse_normalization(j.at("normalization").get<std::string>());
    c.granularity = parse_granularity(j.at("granularity").get<std::string>());
    return c;
}

template <class T>
void put_optional(ojson& j, const char* key, const std::optional<T>& v) {
    if (v) j[key] = *v;
}

template <class T>
std::optional<T> get_optional(const ojson& j, const char* key) {
    if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
    return j.at(key).get<T>();
}

} // namespace

std::string_view to_string(TrialStatus s) {
    switch (s) {
    case TrialStatus::complete: return "complete";
    case TrialStatus::pruned: return "pruned";
    case TrialStatus::failed: return "failed";
    case TrialStatus::duplicate: return "duplicate";
    }
    return "complete";
}

TrialStatus parse_trial_status(std::string_view name) {
    for (auto s : {TrialStatus::complete, TrialStatus::pruned, TrialStatus::failed, TrialStatus::duplicate}) {
        if (to_string(s) == name) return s;
    }
    throw InputError("unknown trial status '" + std::string(name) + "'");
}

JournalHeader make_header(const StudySpec& spec) {
    JournalHeader h;
    h.seed = spec.sampler.seed;
    h.sampler = std::string(sampler_name(spec.sampler.kind));
    h.mode = spec.multi_objective ? "multi" : "single";
    h.w_f = spec.w_f;
    h.w_p = spec.w_p;
    h.n_trials = spec.sampler.n_trials;
    h.fingerprint = space_fingerprint(spec);
    return h;
}

std::string journal_header_line(const JournalHeader& h) {
    ojson j = {{"schema", h.schema},         {"seed", h.seed}, {"sampler", h.sampler},
               {"mode", h.mode},             {"w_f", h.w_f},   {"w_p", h.w_p},
               {"n_trials", h.n_trials},     {"fingerprint", h.fingerprint}};
    return j.dump();
}

JournalHeader parse_journal_header(const std::string& line) {
    try {
        const auto j = ojson::parse(line);
        JournalHeader h;
        h.schema = j.at("schema").get<std::string>();
        if (h.schema != JournalHeader{}.schema) {
            throw InputError("journal: unsupported schema '" + h.schema + "'");
        }
        h.seed = j.at("seed").get<std::uint64_t>();
        h.sampler = j.at("sampler").get<std::string>();
        h.mode = j.at("mode").get<std::string>();
        h.w_f = j.at("w_f").get<double>();
        h.w_p = j.at("w_p").get<double>();
        h.n_trials = j.at("n_trials").get<std::size_t>();
        h.fingerprint = j.at("fingerprint").get<std::string>();
        return h;
    } catch (const nlohmann::json::exception& e) {
        throw InputError(std::string("journal: malformed header: ") + e.what());
    }
}

std::string journal_record_line(const TrialRecord& r) {
    ojson j;
    j["index"] = r.index;
    j["config"] = config_json(r.config);
    j["status"] = std::string(to_string(r.status));
    put_optional(j, "objectives", r.objectives);
    put_optional(j, "faithfulness", r.faithfulness);
    put_optional(j, "plausibility", r.plausibility);
    put_optional(j, "overall", r.overall);
    j["per_metric"] = ojson::object();
    for (const auto& [k, v] : r.per_metric) j["per_metric"][k] = v;
    j["intermediate"] = r.intermediate;
    j["instances_evaluated"] = r.instances_evaluated;
    j["instances_skipped"] = r.instances_skipped;
    put_optional(j, "duplicate_of", r.duplicate_of);
    if (!r.error.empty()) j["error"] = r.error;
    j["wall_time_s"] = r.wall_time_s;
    put_optional(j, "peak_mem_bytes", r.peak_mem_bytes);
    return j.dump();
}

TrialRecord parse_journal_record(const std::string& line) {
    try {
        const auto j = ojson::parse(line);
        TrialRecord r;
        r.index = j.at("index").get<std::size_t>();
        r.config = json_config(j.at("config"));
        r.status = parse_trial_status(j.at("status").get<std::string>());
        r.objectives = get_optional<Objectives>(j, "objectives");
        r.faithfulness = get_optional<double>(j, "faithfulness");
        r.plausibility = get_optional<double>(j, "plausibility");
        r.overall = get_optional<double>(j, "overall");
        for (const auto& [k, v] : j.at("per_metric").items()) r.per_metric[k] = v.get<double>();
        r.intermediate = j.at("intermediate").get<std::vector<double>>();
        r.instances_evaluated = j.at("instances_evaluated").get<std::size_t>();
        r.instances_skipped = j.at("instances_skipped").get<std::size_t>();
        r.duplicate_of = get_optional<std::size_t>(j, "duplicate_of");
        r.error = j.value("error", std::string());
        r.wall_time_s = j.at("wall_time_s").get<double>();
        r.peak_mem_bytes = get_optional<std::uint64_t>(j, "peak_mem_bytes");
        if (r.status == TrialStatus::complete && !r.objectives) {
            throw InputError("journal: complete trial " + std::to_string(r.index) + " has no objectives");
        }
        if (r.status == TrialStatus::duplicate && !r.duplicate_of) {
            throw InputError("journal: duplicate trial " + std::to_string(r.index) + " has no duplicate_of");
        }
        return r;
    } catch (const nlohmann::json::exception& e) {
        throw InputError(std::string("journal: malformed record: ") + e.what());
    }
}

Journal read_journal(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open journal " + path.string());
    std::stringstream buffer;
    buffer << in.rdbuf();
    const std::string text = buffer.str();

    Journal journal;
    std::size_t pos = 0;
    std::size_t line_no = 0;
    bool have_header = false;
    while (pos < text.size()) {
        const auto nl = text.find('\n', pos);
        const bool complete_line = nl != std::string::npos;
        const std::string line = text.substr(pos, complete_line ? nl - pos : std::string::npos);
        pos = complete_line ? nl + 1 : text.size();
        ++line_no;
        if (!complete_line) {
            journal.truncated_tail = true;
            break;
        }
        if (line.empty()) continue;
        try {
            if (!have_header) {
                journal.header = parse_journal_header(line);
                have_header = true;
                continue;
            }
            auto record = parse_journal_record(line);
            if (record.index != journal.records.size()) {
                throw InputError("journal: expected trial " + std::to_string(journal.records.size()) +
                                 ", found " + std::to_string(record.index));
            }
            journal.records.push_back(std::move(record));
        } catch (const InputError& e) {
            throw InputError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
        }
    }
    if (!have_header) throw InputError("journal " + path.string() + " has no header");
    return journal;
}

TrialRecord without_timing(TrialRecord record) {
    record.wall_time_s = 0.0;
    record.peak_mem_bytes.reset();
    return record;
}

} // namespace xaiopt
