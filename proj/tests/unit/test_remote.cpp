#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <atomic>
#include <cstdlib>
#include <set>
#include <thread>

#include "support.hpp"
#include "xaiopt/errors.hpp"
#include "xaiopt/remote_model.hpp"

#include <httplib.h>
#include <json.hpp>

using namespace xaiopt;
using json = nlohmann::json;

namespace {

const std::string kMask = "[MASK]";

/// Fraction of distinct unmasked post tokens that also occur in the claim.
double echo_score(const std::vector<std::string>& post, const std::vector<std::string>& claim) {
    std::set<std::string> p;
    std::set<std::string> c;
    for (const auto& t : post) if (t != kMask) p.insert(t);
    for (const auto& t : claim) if (t != kMask) c.insert(t);
    if (p.empty() || c.empty()) return 0.0;
    std::size_t shared = 0;
    for (const auto& t : p) shared += c.count(t);
    return static_cast<double>(shared) / static_cast<double>(std::max(p.size(), c.size()));
}

/// The same scorer applied in process, with ablated tokens removed.
class LocalEcho final : public SimilarityModel {
public:
    ModelCapabilities capabilities() const override { return {}; }

protected:
    std::vector<double> score_batch(const TokenizedText& post, const TokenizedText& claim,
                                    std::span<const Ablation> ablations) const override {
        std::vector<double> out;
        for (const auto& a : ablations) {
            auto keep = [](const TokenizedText& t, const std::vector<std::uint8_t>& off) {
                std::vector<std::string> toks;
                for (std::size_t i = 0; i < t.size(); ++i) {
                    if (off.empty() || !off[i]) toks.push_back(t.tokens[i]);
                }
                return toks;
            };
            out.push_back(echo_score(keep(post, a.post), keep(claim, a.claim)));
        }
        return out;
    }
};

class EchoServer {
public:
    static constexpr std::size_t max_batch = 3;

    EchoServer() {
        server_.Get(R"((?:http://[^/]+)?/v1/capabilities)", [this](const httplib::Request&, httplib::Response& res) {
            ++hits;
            if (fail_next > 0) {
                --fail_next;
                res.status = 503;
                return;
            }
            json j{{"model", "echo"}, {"mask_token", kMask}, {"supports_gradients", false},
                   {"max_batch", max_batch}};
            res.set_content(j.dump(), "application/json");
        });
        server_.Post(R"((?:http://[^/]+)?/v1/tokenize)", [this](const httplib::Request& req, httplib::Response& res) {
            ++hits;
            json toks = json::array();
            json offs = json::array();
            const auto body = json::parse(req.body);
            for (const auto& text : body.at("texts")) {
                const auto s = text.get<std::string>();
                json t = json::array();
                json o = json::array();
                std::size_t i = 0;
                while (i < s.size()) {
                    while (i < s.size() && s[i] == ' ') ++i;
                    const auto b = i;
                    while (i < s.size() && s[i] != ' ') ++i;
                    if (i > b) {
                        t.push_back(s.substr(b, i - b));
                        o.push_back({b, i});
                    }
                }
                toks.push_back(t);
                offs.push_back(o);
            }
            res.set_content(json{{"tokens", toks}, {"offsets", offs}}.dump(), "application/json");
        });
        server_.Post(R"((?:http://[^/]+)?/v1/similarity)", [this](const httplib::Request& req, httplib::Response& res) {
            ++hits;
            const auto pairs = json::parse(req.body).at("pairs");
            if (pairs.size() > max_batch) {
                res.status = 413;
                return;
            }
            largest_batch = std::max<std::size_t>(largest_batch, pairs.size());
            json scores = json::array();
            for (const auto& p : pairs) {
                scores.push_back(echo_score(p.at("post").get<std::vector<std::string>>(),
                                            p.at("claim").get<std::vector<std::string>>()));
            }
            res.set_content(json{{"scores", scores}}.dump(), "application/json");
        });
        port = server_.bind_to_any_port("127.0.0.1");
        thread_ = std::thread([this] { server_.listen_after_bind(); });
        server_.wait_until_ready();
    }

    ~EchoServer() {
        server_.stop();
        thread_.join();
    }

    std::string url() const { return "http://127.0.0.1:" + std::to_string(port); }

    int port = 0;
    std::atomic<int> hits{0};
    std::atomic<int> fail_next{0};
    std::atomic<std::size_t> largest_batch{0};

private:
    httplib::Server server_;
    std::thread thread_;
};

RemoteOptions fast(const std::string& url) {
    RemoteOptions o;
    o.url = url;
    o.retries = 2;
    o.timeout_s = 2.0;
    o.backoff_ms = 5;
    return o;
}

} // namespace

TEST_CASE("capabilities and tokenization") {
    EchoServer server;
    const RemoteModel model(fast(server.url()));
    CHECK(model.info().model == "echo");
    CHECK(model.info().mask_token == kMask);
    CHECK(model.info().max_batch == EchoServer::max_batch);
    CHECK_FALSE(model.capabilities().supports_gradients);
    const auto t = model.tokenize("river  flood warning");
    CHECK(t.tokens == std::vector<std::string>{"river", "flood", "warning"});
    CHECK(t.offsets[1].begin == 7);
    CHECK_THROWS_AS(require_gradients(model), CapabilityError);
}

TEST_CASE("remote occlusion equals local recomputation") {
    EchoServer server;
    auto opts = fast(server.url());
    opts.max_in_flight = 2;
    const RemoteModel remote(opts);
    const LocalEcho local;
    PairInstance p;
    p.id = "r";
    p.post = remote.tokenize("storm hits coast town with storm surge");
    p.claim = remote.tokenize("storm surge hits town");
    CHECK(remote.similarity(p) == doctest::Approx(local.similarity(p)));
    for (std::size_t w : {1, 2, 3}) {
        const auto a = occlusion_token(remote, p, {w, 1});
        const auto b = occlusion_token(local, p, {w, 1});
        CHECK(a.post_scores == b.post_scores);
        CHECK(a.claim_scores == b.claim_scores);
    }
    CHECK(feature_ablation(remote, p, false).post_scores == feature_ablation(local, p, false).post_scores);
    CHECK(server.largest_batch <= EchoServer::max_batch);
    CHECK(server.largest_batch > 1);
}

TEST_CASE("transient failures are retried") {
    EchoServer server;
    server.fail_next = 2;
    const RemoteModel model(fast(server.url()));
    CHECK(model.info().model == "echo");
    server.fail_next = 5;
    CHECK_THROWS_AS(RemoteModel(fast(server.url())), TransportError);
}

TEST_CASE("unreachable server is a transport error") {
    int dead_port = 0;
    {
        httplib::Server s;
        dead_port = s.bind_to_any_port("127.0.0.1");
    }
    auto o = fast("http://127.0.0.1:" + std::to_string(dead_port));
    o.retries = 1;
    CHECK_THROWS_AS(RemoteModel{o}, TransportError);
}

TEST_CASE("requests go through the configured proxy") {
    EchoServer proxy;
    int dead_port = 0;
    {
        httplib::Server s;
        dead_port = s.bind_to_any_port("127.0.0.1");
    }
    const auto target = "http://127.0.0.1:" + std::to_string(dead_port);
    auto o = fast(target);
    o.proxy = proxy.url();
    const RemoteModel via(o);
    CHECK(via.info().model == "echo");
    CHECK(proxy.hits > 0);

    ::setenv("HTTP_PROXY", proxy.url().c_str(), 1);
    const int before = proxy.hits;
    const RemoteModel env(fast(target));
    ::unsetenv("HTTP_PROXY");
    CHECK(proxy.hits > before);
}
