#pragma once

#include <string>
#include <vector>

#include "xaiopt/model.hpp"
#include "xaiopt/textdata.hpp"

namespace xaiopt {

struct RemoteOptions {
    std::string url;              ///< http://host:port[/prefix]
    std::size_t max_in_flight = 4;
    int retries = 3;              ///< extra attempts per request after the first
    double timeout_s = 30.0;
    int backoff_ms = 50;          ///< doubled after each failed attempt
    std::string proxy;            ///< http://host:port; empty reads HTTP_PROXY
};

struct ServerInfo {
    std::string model;
    std::string mask_token;
    bool supports_gradients = false;
    std::size_t max_batch = 1;
};

/// Client for the black-box model server protocol:
///   GET  /v1/capabilities
///   POST /v1/tokenize   {"texts": [...]}
///   POST /v1/similarity {"pairs": [{"post": [tokens], "claim": [tokens]}]}
///
/// Perturbation is mask-token substitution over server tokens. The client
/// is perturbation-only: it never reports gradient support.
class RemoteModel final : public SimilarityModel, public Tokenizer {
public:
    explicit RemoteModel(RemoteOptions options);

    const ServerInfo& info() const { return info_; }
    ModelCapabilities capabilities() const override;

    TokenizedText tokenize(std::string_view text) const override;
    std::vector<TokenizedText> tokenize_batch(const std::vector<std::string>& texts) const;

protected:
    std::vector<double> score_batch(const TokenizedText& post, const TokenizedText& claim,
                                    std::span<const Ablation> ablations) const override;

private:
    std::string request(const std::string& method, const std::string& path,
                        const std::string& body) const;

    RemoteOptions options_;
    std::string host_;
    std::string prefix_;
    std::string proxy_host_;
    int proxy_port_ = 0;
    ServerInfo info_;
};

} // namespace xaiopt
