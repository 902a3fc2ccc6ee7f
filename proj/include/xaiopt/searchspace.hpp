#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "xaiopt/attribution.hpp"
#include "xaiopt/model.hpp"
#include "xaiopt/textdata.hpp"

namespace xaiopt {

using ParamValue = std::variant<bool, std::int64_t, double, std::string, std::vector<std::int64_t>>;

/// Canonical text form ("true", "3", "0.1", "\"abc\"", "[5, 1024]").
std::string format_value(const ParamValue& v);

enum class ParamKind { categorical, int_range, float_range };

std::string_view to_string(ParamKind k);

struct ParamDef {
    std::string name;
    ParamKind kind = ParamKind::categorical;
    std::vector<ParamValue> choices; ///< categorical only
    double low = 0.0;
    double high = 0.0;
    std::optional<double> step;      ///< float ranges without step are continuous

    bool finite() const { return kind != ParamKind::float_range || step.has_value(); }
    /// Number of grid points; 0 for continuous ranges.
    std::size_t size() const;
    ParamValue value_at(std::size_t index) const;
    std::optional<std::size_t> index_of(const ParamValue& v) const;
    /// Continuous ranges: value at position u in [0, 1].
    ParamValue at_position(double u) const;
    double position_of(const ParamValue& v) const;
    bool contains(const ParamValue& v) const;
};

struct MethodSpace {
    MethodId method = MethodId::occlusion;
    std::vector<ParamDef> params;
    /// token_groups_for_feature_mask
    bool token_groups = false;
    /// Accepted but uninterpreted method_param flags (compute_baseline),
    /// kept as flow YAML.
    std::map<std::string, std::string> opaque;

    const ParamDef* find(std::string_view name) const;
};

enum class SamplerKind { random, brute_force, tpe, nsga2 };

std::string_view sampler_name(SamplerKind k);
SamplerKind parse_sampler(std::string_view name);

struct SamplerConfig {
    SamplerKind kind = SamplerKind::tpe;
    std::size_t n_trials = 14;
    std::size_t n_startup_trials = 4;
    std::uint64_t seed = 1000;
    bool pruning = false;
    std::size_t pruning_min_peers = 4;
};

struct RemoteBinding {
    std::size_t max_in_flight = 4;
    int retries = 3;
    double timeout_s = 30.0;
};

struct ReferenceBinding {
    std::size_t vocab_buckets = 4096;
    std::size_t dim = 64;
    std::size_t layers = 2;
    std::size_t heads = 2;
    std::size_t ffn_dim = 128;
    double init_std = 0.02;
    std::uint64_t seed = 1000;
};

struct StudySpec {
    std::string model_path = "reference";
    std::string embeddings_module_name;
    std::vector<MethodSpace> methods;
    std::vector<Normalization> normalizations{Normalization::without_normalize};
    Granularity granularity = Granularity::token;
    double w_f = 0.5;
    double w_p = 0.5;
    bool multi_objective = false;
    SamplerConfig sampler;
    std::string dataset;
    std::vector<double> aopc_bins;
    ReferenceBinding reference;
    RemoteBinding remote;
    /// model_param entries other than the Lime surrogate settings (attention
    /// hook expressions and the like), kept as flow YAML per method name.
    std::map<std::string, std::string> model_param_opaque;

    bool normalization_searched() const { return normalizations.size() > 1; }
    bool remote_model() const;
    const MethodSpace* find(MethodId id) const;
};

/// One concrete point of the conditional space.
struct TrialConfig {
    MethodId method = MethodId::occlusion;
    std::map<std::string, ParamValue> params;
    Normalization normalization = Normalization::without_normalize;
    Granularity granularity = Granularity::token;

    friend bool operator==(const TrialConfig&, const TrialConfig&) = default;
};

std::string describe(const TrialConfig& config);

/// Parses the YAML configuration. Tuple ranges such as
/// `(0.1, 0.9, {'step': 0.1})` are accepted and canonicalized. Relative
/// dataset paths resolve against `base_dir` when given.
StudySpec parse_config(std::string_view document,
                       const std::filesystem::path& base_dir = {});
StudySpec load_config(const std::filesystem::path& path);

/// Canonical YAML; parse(serialize(parse(x))) == parse(x).
std::string serialize_config(const StudySpec& spec);

/// Sum over methods of the product of parameter grid sizes, times the
/// normalization count when searched. std::nullopt means unbounded.
std::optional<std::uint64_t> cardinality(const StudySpec& spec);

/// All violations, empty when the config is in-domain.
std::vector<std::string> validate(const TrialConfig& config, const StudySpec& spec);

/// Throws CapabilityError naming every listed method the model cannot run.
void check_admissible(const StudySpec& spec, const ModelCapabilities& caps);

/// Parameter values mapped onto typed method settings; absent parameters
/// keep their defaults.
MethodSettings resolve_settings(const TrialConfig& config, const StudySpec& spec);

/// Stable hash of the space definition, used to match journals to configs.
std::string space_fingerprint(const StudySpec& spec);

} // namespace xaiopt
