#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <doctest.h>

#include <atomic>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "ierisk/embed.hpp"
#include "ierisk/error.hpp"

using namespace ierisk;

namespace {

double norm_of(const EmbeddingVector& v) {
    double s = 0.0;
    for (double x : v.values) s += x * x;
    return std::sqrt(s);
}

std::filesystem::path fresh_dir(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / name;
    std::filesystem::remove_all(dir);
    return dir;
}

// Counts calls so cache hits can be told apart from provider calls.
class CountingProvider final : public EmbeddingProvider {
public:
    std::string tag() const override { return "counting"; }
    std::string prepare(std::string_view text) const override { return normalize_text(text); }
    std::vector<std::vector<double>> embed_batch(std::span<const std::string> prepared) override {
        texts += prepared.size();
        return LocalTrigramProvider{}.embed_batch(prepared);
    }
    std::size_t texts = 0;
};

struct FakeEndpoint {
    httplib::Server server;
    std::thread thread;
    int port = 0;
    std::atomic<int> failures_left{0};
    std::atomic<int> status_override{0};
    std::atomic<int> calls{0};
    std::string last_auth;

    FakeEndpoint() {
        server.Post("/embed", [this](const httplib::Request& req, httplib::Response& res) {
            ++calls;
            last_auth = req.get_header_value("Authorization");
            if (status_override) {
                res.status = status_override;
                return;
            }
            if (failures_left > 0) {
                --failures_left;
                res.status = 503;
                return;
            }
            const auto body = nlohmann::json::parse(req.body);
            nlohmann::json vectors = nlohmann::json::array();
            for (const auto& t : body.at("input")) {
                const auto s = t.get<std::string>();
                vectors.push_back({static_cast<double>(s.size()), 1.0, s.empty() ? 0.0 : static_cast<double>(s[0])});
            }
            res.set_content(nlohmann::json{{"vectors", vectors}}.dump(), "application/json");
        });
        port = server.bind_to_any_port("127.0.0.1");
        thread = std::thread([this] { server.listen_after_bind(); });
        server.wait_until_ready();
    }
    ~FakeEndpoint() {
        server.stop();
        thread.join();
    }
    RemoteEmbeddingConfig config() const {
        RemoteEmbeddingConfig c;
        c.endpoint = "http://127.0.0.1:" + std::to_string(port) + "/embed";
        c.initial_backoff = std::chrono::milliseconds(1);
        c.timeout = std::chrono::milliseconds(2000);
        return c;
    }
};

} // namespace

TEST_CASE("sha256 known answer") {
    CHECK(to_hex(sha256("abc")) == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    CHECK(to_hex(sha256("")) == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
}

TEST_CASE("text normalization") {
    CHECK(normalize_text("  Power FACTOR\t") == "power factor");
    // U+0045 U+0301 composes to U+00C9, then lowercases to U+00E9.
    CHECK(normalize_text("E\xCC\x81") == "\xC3\xA9");
    CHECK(nfc_text(" E\xCC\x81 ") == "\xC3\x89");
    CHECK(normalize_text("I") == "i");
}

TEST_CASE("local embeddings are deterministic unit vectors") {
    const auto a = local_embed("Excitation Voltage");
    const auto b = local_embed("Excitation Voltage");
    CHECK(a == b);
    CHECK(a.dim() == LocalTrigramProvider::kDim);
    CHECK(norm_of(a) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(a.provider_tag == "local-trigram-v1");
    CHECK(local_embed("excitation voltage  ") == a);
    CHECK(cosine_similarity(a, a) == doctest::Approx(1.0));
    CHECK_THROWS_AS(local_embed("   "), InvalidArgument);
}

TEST_CASE("local cosine orders related names above unrelated ones") {
    const auto v = local_embed("Excitation Voltage");
    const double close = cosine_similarity(v, local_embed("Excitation Current"));
    const double far = cosine_similarity(v, local_embed("Reactor Coolant System"));
    CHECK(close > far);
    CHECK(cosine_similarity(local_embed("abc"), local_embed("xyz")) < 0.5);
}

TEST_CASE("cosine similarity") {
    const std::vector<double> u{1, 0, 0};
    const std::vector<double> v{0, 2, 0};
    const std::vector<double> w{3, 4, 0};
    CHECK(cosine_similarity(u, v) == 0.0);
    CHECK(cosine_similarity(u, w) == doctest::Approx(0.6));
    CHECK(cosine_similarity(u, w) == cosine_similarity(w, u));
    const std::vector<double> z{0, 0, 0};
    CHECK_THROWS_AS(cosine_similarity(u, z), InvalidArgument);
    const std::vector<double> short_v{1, 0};
    CHECK_THROWS_AS(cosine_similarity(u, short_v), InvalidArgument);
}

TEST_CASE("embedder matches the offline path and memoizes") {
    auto provider = std::make_shared<CountingProvider>();
    Embedder e(provider);
    const auto v = e.embed("Terminal Voltage");
    CHECK(v.values == local_embed("Terminal Voltage").values);
    e.embed("terminal voltage");
    CHECK(provider->texts == 1);
    const std::vector<std::string> batch{"A1", "B2", "A1", "Terminal Voltage"};
    const auto vs = e.embed_many(batch);
    CHECK(vs.size() == 4);
    CHECK(vs[0] == vs[2]);
    CHECK(provider->texts == 3);
    CHECK(e.provider_calls() == 2);
}

TEST_CASE("persistent cache survives a restart and gives identical vectors") {
    const auto dir = fresh_dir("ierisk_embed_cache_test");
    const std::vector<std::string> names{"Power Factor", "Generator Reactive Power", "Excitation Current"};
    std::vector<EmbeddingVector> first;
    {
        auto provider = std::make_shared<CountingProvider>();
        Embedder e(provider, dir);
        first = e.embed_many(names);
        CHECK(provider->texts == 3);
    }
    auto provider = std::make_shared<CountingProvider>();
    Embedder again(provider, dir);
    const auto second = again.embed_many(names);
    CHECK(provider->texts == 0);
    CHECK(second == first);

    EmbeddingCache cache(dir, "counting");
    CHECK(cache.size() == 3);
    CHECK(cache.get(sha256("power factor")).has_value());
    CHECK_FALSE(cache.get(sha256("Power Factor")).has_value());
    std::filesystem::remove_all(dir);
}

TEST_CASE("a torn cache tail is ignored") {
    const auto dir = fresh_dir("ierisk_embed_torn_test");
    {
        EmbeddingCache c(dir, "t");
        const std::vector<float> v{1.0f, 0.0f};
        c.put(sha256("x"), v);
    }
    const auto file = dir / "t.embcache";
    const auto full = std::filesystem::file_size(file);
    {
        std::ofstream out(file, std::ios::binary | std::ios::app);
        out.write("\x30\x00\x00\x00\x01\x02", 6);
    }
    EmbeddingCache c(dir, "t");
    CHECK(c.size() == 1);
    CHECK(std::filesystem::file_size(file) == full + 6);
    std::filesystem::remove_all(dir);
}

TEST_CASE("remote provider round trip") {
    FakeEndpoint server;
    auto cfg = server.config();
    cfg.max_batch = 2;
    ::setenv("IERISK_TEST_EMBED_KEY", "secret", 1);
    cfg.api_key_env = "IERISK_TEST_EMBED_KEY";
    auto remote = std::make_shared<RemoteEmbeddingProvider>(cfg);
    Embedder e(remote);
    const std::vector<std::string> texts{"a", "bb", "ccc", "dddd", "eeeee"};
    const auto vs = e.embed_many(texts);
    CHECK(vs.size() == 5);
    CHECK(remote->request_count() == 3);
    CHECK(server.last_auth == "Bearer secret");
    CHECK(norm_of(vs[0]) == doctest::Approx(1.0));
    CHECK(vs[0].provider_tag == "remote-text-embedding-ada-002");
    e.embed_many(texts);
    CHECK(remote->request_count() == 3);
}

TEST_CASE("remote provider keeps case") {
    FakeEndpoint server;
    RemoteEmbeddingProvider remote(server.config());
    CHECK(remote.prepare(" Power ") == "Power");
}

TEST_CASE("remote provider retries transient failures") {
    FakeEndpoint server;
    server.failures_left = 2;
    RemoteEmbeddingProvider remote(server.config());
    const std::vector<std::string> t{"x"};
    CHECK(remote.embed_batch(t).size() == 1);
    CHECK(remote.request_count() == 3);
}

TEST_CASE("remote provider gives up") {
    FakeEndpoint server;
    SUBCASE("client errors are not retried") {
        server.status_override = 400;
        RemoteEmbeddingProvider remote(server.config());
        const std::vector<std::string> t{"x"};
        CHECK_THROWS_AS(remote.embed_batch(t), TransportError);
        CHECK(remote.request_count() == 1);
    }
    SUBCASE("persistent server errors exhaust the retries") {
        server.status_override = 500;
        RemoteEmbeddingProvider remote(server.config());
        const std::vector<std::string> t{"x"};
        CHECK_THROWS_AS(remote.embed_batch(t), TransportError);
        CHECK(remote.request_count() == 4);
    }
}

TEST_CASE("unreachable endpoint") {
    int port = 0;
    {
        httplib::Server probe;
        port = probe.bind_to_any_port("127.0.0.1");
    }
    RemoteEmbeddingConfig cfg;
    cfg.endpoint = "http://127.0.0.1:" + std::to_string(port) + "/embed";
    cfg.max_retries = 1;
    cfg.initial_backoff = std::chrono::milliseconds(1);
    cfg.timeout = std::chrono::milliseconds(500);
    RemoteEmbeddingProvider remote(cfg);
    const std::vector<std::string> t{"x"};
    CHECK_THROWS_AS(remote.embed_batch(t), TransportError);
    CHECK(remote.request_count() == 2);
    CHECK_THROWS_AS(RemoteEmbeddingProvider(RemoteEmbeddingConfig{}), InvalidArgument);
}
