#include "xaiopt/remote_model.hpp"

#include "xaiopt/errors.hpp"

#include "httplib.h"
#include "json.hpp"

#include <chrono>
#include <cstdlib>
#include <future>
#include <thread>

namespace xaiopt {
namespace {

using nlohmann::json;

struct Endpoint {
    std::string scheme_host_port;
    std::string prefix;
};

Endpoint split_url(const std::string& url) {
    const auto scheme = url.find("://");
    if (scheme == std::string::npos || url.substr(0, scheme) != "http") {
        throw ConfigError("remote model url must start with http:// (got '" + url + "')");
    }
    const auto path = url.find('/', scheme + 3);
    Endpoint e;
    e.scheme_host_port = url.substr(0, path);
    if (path != std::string::npos) {
        e.prefix = url.substr(path);
        while (!e.prefix.empty() && e.prefix.back() == '/') {
            e.prefix.pop_back();
        }
    }
    return e;
}

bool is_retryable_status(int status) { return status >= 500 || status == 429; }

} // namespace

RemoteModel::RemoteModel(RemoteOptions options) : options_(std::move(options)) {
    const auto ep = split_url(options_.url);
    host_ = ep.scheme_host_port;
    prefix_ = ep.prefix;
    if (options_.max_in_flight == 0) {
        options_.max_in_flight = 1;
    }

    std::string proxy = options_.proxy;
    if (proxy.empty()) {
        for (const char* var : {"HTTP_PROXY", "http_proxy"}) {
            if (const char* v = std::getenv(var); v != nullptr && *v != '\0') {
                proxy = v;
                break;
            }
        }
    }
    if (!proxy.empty()) {
        auto hp = proxy.substr(proxy.find("://") == std::string::npos ? 0 : proxy.find("://") + 3);
        if (auto slash = hp.find('/'); slash != std::string::npos) {
            hp.resize(slash);
        }
        const auto colon = hp.rfind(':');
        proxy_host_ = hp.substr(0, colon);
        proxy_port_ = colon == std::string::npos ? 80 : std::atoi(hp.substr(colon + 1).c_str());
    }

    const auto body = json::parse(request("GET", "/v1/capabilities", ""));
    try {
        info_.model = body.value("model", std::string("remote"));
        info_.mask_token = body.at("mask_token").get<std::string>();
        info_.supports_gradients = body.value("supports_gradients", false);
        info_.max_batch = body.at("max_batch").get<std::size_t>();
    } catch (const json::exception& e) {
        throw TransportError(std::string("malformed capabilities response: ") + e.what());
    }
    if (info_.max_batch == 0) {
        throw TransportError("server reported max_batch 0");
    }
}

ModelCapabilities RemoteModel::capabilities() const {
    return {false, false, MaskStrategy::mask_token, 0};
}

std::string RemoteModel::request(const std::string& method, const std::string& path,
                                 const std::string& body) const {
    std::string last_error;
    int backoff = options_.backoff_ms;
    for (int attempt = 0; attempt <= options_.retries; ++attempt) {
        if (attempt > 0) {
            std::this_thread::sleep_for(std::chrono::milliseconds(backoff));
            backoff *= 2;
        }
        httplib::Client cli(host_);
        const auto secs = static_cast<time_t>(options_.timeout_s);
        const auto usecs = static_cast<time_t>((options_.timeout_s - static_cast<double>(secs)) * 1e6);
        cli.set_connection_timeout(secs, usecs);
        cli.set_read_timeout(secs, usecs);
        if (!proxy_host_.empty()) {
            cli.set_proxy(proxy_host_, proxy_port_);
        }
        const auto full = prefix_ + path;
        auto res = method == "GET" ? cli.Get(full) : cli.Post(full, body, "application/json");
        if (!res) {
            last_error = httplib::to_string(res.error());
            continue;
        }
        if (res->status == 200) {
            return res->body;
        }
        if (is_retryable_status(res->status)) {
            last_error = "HTTP " + std::to_string(res->status);
            continue;
        }
        if (res->status == 413) {
            throw InputError("server rejected batch as too large (max_batch " +
                             std::to_string(info_.max_batch) + ")");
        }
        throw InputError("server returned HTTP " + std::to_string(res->status) + " for " + full +
                         ": " + res->body);
    }
    throw TransportError("remote model " + host_ + prefix_ + path + " unreachable after " +
                         std::to_string(options_.retries + 1) + " attempt(s): " + last_error);
}

std::vector<TokenizedText> RemoteModel::tokenize_batch(const std::vector<std::string>& texts) const {
    const auto body = json::parse(request("POST", "/v1/tokenize", json{{"texts", texts}}.dump()));
    std::vector<TokenizedText> out;
    try {
        const auto& toks = body.at("tokens");
        const auto& offs = body.at("offsets");
        if (toks.size() != texts.size() || offs.size() != texts.size()) {
            throw TransportError("tokenize response size mismatch");
        }
        for (std::size_t i = 0; i < texts.size(); ++i) {
            std::vector<Span> spans;
            for (const auto& s : offs[i]) {
                spans.push_back({s.at(0).get<std::size_t>(), s.at(1).get<std::size_t>()});
            }
            out.push_back(make_tokenized(texts[i], toks[i].get<std::vector<std::string>>(),
                                         std::move(spans)));
        }
    } catch (const json::exception& e) {
        throw TransportError(std::string("malformed tokenize response: ") + e.what());
    }
    return out;
}

TokenizedText RemoteModel::tokenize(std::string_view text) const {
    return tokenize_batch({std::string(text)}).front();
}

std::vector<double> RemoteModel::score_batch(const TokenizedText& post, const TokenizedText& claim,
                                             std::span<const Ablation> ablations) const {
    auto masked = [&](const TokenizedText& text, const std::vector<std::uint8_t>& flags) {
        std::vector<std::string> toks = text.tokens;
        for (std::size_t t = 0; t < flags.size(); ++t) {
            if (flags[t]) {
                toks[t] = info_.mask_token;
            }
        }
        return toks;
    };

    std::vector<json> chunks;
    for (std::size_t start = 0; start < ablations.size(); start += info_.max_batch) {
        json pairs = json::array();
        const auto stop = std::min(ablations.size(), start + info_.max_batch);
        for (std::size_t i = start; i < stop; ++i) {
            pairs.push_back({{"post", masked(post, ablations[i].post)},
                             {"claim", masked(claim, ablations[i].claim)}});
        }
        chunks.push_back(json{{"pairs", std::move(pairs)}});
    }

    std::vector<std::vector<double>> results(chunks.size());
    auto run_chunk = [&](std::size_t c) {
        const auto body = json::parse(request("POST", "/v1/similarity", chunks[c].dump()));
        try {
            results[c] = body.at("scores").get<std::vector<double>>();
        } catch (const json::exception& e) {
            throw TransportError(std::string("malformed similarity response: ") + e.what());
        }
        if (results[c].size() != chunks[c]["pairs"].size()) {
            throw TransportError("similarity response size mismatch");
        }
    };

    // At most max_in_flight requests outstanding at once.
    for (std::size_t wave = 0; wave < chunks.size(); wave += options_.max_in_flight) {
        const auto stop = std::min(chunks.size(), wave + options_.max_in_flight);
        if (stop - wave == 1) {
            run_chunk(wave);
            continue;
        }
        std::vector<std::future<void>> inflight;
        for (std::size_t c = wave; c < stop; ++c) {
            inflight.push_back(std::async(std::launch::async, run_chunk, c));
        }
        for (auto& f : inflight) {
            f.get();
        }
    }

    std::vector<double> out;
    out.reserve(ablations.size());
    for (auto& r : results) {
        out.insert(out.end(), r.begin(), r.end());
    }
    return out;
}

} // namespace xaiopt
