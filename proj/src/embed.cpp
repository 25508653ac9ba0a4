#define CPPHTTPLIB_OPENSSL_SUPPORT
#include "ierisk/embed.hpp"

#include <bit>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>
#include <openssl/evp.h>
#include <unicode/normalizer2.h>
#include <unicode/unistr.h>
#include <unicode/locid.h>
#include <unicode/utf8.h>

#include "ierisk/error.hpp"

namespace ierisk {

using nlohmann::json;

namespace {

icu::UnicodeString nfc_unicode(std::string_view text) {
    UErrorCode status = U_ZERO_ERROR;
    const icu::Normalizer2* nfc = icu::Normalizer2::getNFCInstance(status);
    if (U_FAILURE(status)) throw Error("ICU NFC normalizer unavailable");
    icu::UnicodeString s = icu::UnicodeString::fromUTF8(icu::StringPiece(text.data(), static_cast<int32_t>(text.size())));
    s.trim();
    icu::UnicodeString out = nfc->normalize(s, status);
    if (U_FAILURE(status)) throw InvalidArgument("text is not valid for NFC normalization");
    return out;
}

std::vector<float> quantize(const std::vector<double>& raw) {
    double norm = 0.0;
    for (double v : raw) {
        if (!std::isfinite(v)) throw Error("embedding contains non-finite values");
        norm += v * v;
    }
    norm = std::sqrt(norm);
    if (!(norm > 0.0)) throw Error("embedding provider returned a zero vector");
    std::vector<float> q(raw.size());
    for (std::size_t i = 0; i < raw.size(); ++i) q[i] = static_cast<float>(raw[i] / norm);
    return q;
}

void put_u32(std::string& buf, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xFFu));
}

std::uint32_t get_u32(const unsigned char* p) {
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

std::string sanitize_tag(std::string_view tag) {
    std::string out;
    for (char c : tag) {
        const bool ok = std::isalnum(static_cast<unsigned char>(c)) || c == '.' || c == '-' || c == '_';
        out.push_back(ok ? c : '_');
    }
    return out;
}

} // namespace

Sha256Digest sha256(std::string_view bytes) {
    Sha256Digest out{};
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), out.data(), &len, EVP_sha256(), nullptr) != 1 || len != 32) {
        throw Error("SHA-256 digest failed");
    }
    return out;
}

std::string to_hex(std::span<const std::uint8_t> bytes) {
    static constexpr char kHex[] = "0123456789abcdef";
    std::string out;
    out.reserve(bytes.size() * 2);
    for (auto b : bytes) {
        out.push_back(kHex[b >> 4]);
        out.push_back(kHex[b & 0xF]);
    }
    return out;
}

std::string nfc_text(std::string_view text) {
    std::string out;
    nfc_unicode(text).toUTF8String(out);
    return out;
}

std::string normalize_text(std::string_view text) {
    std::string out;
    nfc_unicode(text).toLower(icu::Locale::getRoot()).toUTF8String(out);
    return out;
}

double cosine_similarity(std::span<const double> u, std::span<const double> v) {
    if (u.size() != v.size()) throw InvalidArgument("cosine_similarity: dimension mismatch");
    double dot = 0.0;
    double nu = 0.0;
    double nv = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
        dot += u[i] * v[i];
        nu += u[i] * u[i];
        nv += v[i] * v[i];
    }
    if (!(nu > 0.0) || !(nv > 0.0)) throw InvalidArgument("cosine_similarity: zero vector");
    // sqrt(nu * nv) keeps the expression symmetric in (u, v) bit for bit.
    return dot / std::sqrt(nu * nv);
}

double cosine_similarity(const EmbeddingVector& u, const EmbeddingVector& v) {
    return cosine_similarity(std::span<const double>(u.values), std::span<const double>(v.values));
}

// ---------------------------------------------------------------------------
// Local provider

std::vector<double> LocalTrigramProvider::trigram_counts(std::string_view prepared) {
    if (prepared.empty()) throw InvalidArgument("cannot embed empty text");

    // Code point boundaries so trigrams never split a multi-byte sequence.
    std::vector<std::size_t> starts;
    const auto* s = reinterpret_cast<const uint8_t*>(prepared.data());
    const auto len = static_cast<int32_t>(prepared.size());
    for (int32_t i = 0; i < len;) {
        starts.push_back(static_cast<std::size_t>(i));
        UChar32 c = 0;
        U8_NEXT(s, i, len, c);
        (void)c;
    }
    starts.push_back(prepared.size());
    const std::size_t n_cp = starts.size() - 1;

    auto bucket = [](std::string_view gram) {
        std::uint64_t h = 0xcbf29ce484222325ULL ^ kHashSeed;
        for (unsigned char c : gram) {
            h ^= c;
            h *= 0x100000001b3ULL;
        }
        return static_cast<std::size_t>(h % kDim);
    };

    std::vector<double> counts(kDim, 0.0);
    if (n_cp < 3) {
        counts[bucket(prepared)] += 1.0;
        return counts;
    }
    for (std::size_t i = 0; i + 3 <= n_cp; ++i) {
        counts[bucket(prepared.substr(starts[i], starts[i + 3] - starts[i]))] += 1.0;
    }
    return counts;
}

std::vector<std::vector<double>> LocalTrigramProvider::embed_batch(std::span<const std::string> prepared) {
    std::vector<std::vector<double>> out;
    out.reserve(prepared.size());
    for (const auto& t : prepared) out.push_back(trigram_counts(t));
    return out;
}

// ---------------------------------------------------------------------------
// Remote provider

RemoteEmbeddingProvider::RemoteEmbeddingProvider(RemoteEmbeddingConfig config) : config_(std::move(config)) {
    const auto scheme_end = config_.endpoint.find("://");
    if (scheme_end == std::string::npos) throw InvalidArgument("endpoint must be an http(s) URL");
    const auto path_start = config_.endpoint.find('/', scheme_end + 3);
    scheme_host_port_ = config_.endpoint.substr(0, path_start);
    path_ = path_start == std::string::npos ? "/" : config_.endpoint.substr(path_start);
    if (config_.max_batch == 0) throw InvalidArgument("max_batch must be positive");
}

std::vector<std::vector<double>> RemoteEmbeddingProvider::post_batch(std::span<const std::string> texts) {
    json body{{"model", config_.model}, {"input", json::array()}};
    for (const auto& t : texts) body["input"].push_back(t);
    const std::string payload = body.dump();

    httplib::Headers headers;
    if (const char* key = std::getenv(config_.api_key_env.c_str()); key && *key) {
        headers.emplace("Authorization", std::string("Bearer ") + key);
    }

    std::string last_error;
    auto backoff = config_.initial_backoff;
    for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
        if (attempt > 0) {
            std::this_thread::sleep_for(backoff);
            backoff *= 2;
        }
        httplib::Client client(scheme_host_port_);
        const auto secs = config_.timeout.count() / 1000;
        const auto usecs = (config_.timeout.count() % 1000) * 1000;
        client.set_connection_timeout(secs, usecs);
        client.set_read_timeout(secs, usecs);
        client.set_write_timeout(secs, usecs);

        ++requests_;
        auto res = client.Post(path_, headers, payload, "application/json");
        if (!res) {
            last_error = "request failed: " + httplib::to_string(res.error());
            continue;
        }
        if (res->status == 429 || res->status >= 500) {
            last_error = "server answered " + std::to_string(res->status);
            continue;
        }
        if (res->status < 200 || res->status >= 300) {
            throw TransportError("embedding endpoint answered " + std::to_string(res->status));
        }

        std::vector<std::vector<double>> out;
        try {
            const json reply = json::parse(res->body);
            for (const auto& v : reply.at("vectors")) out.push_back(v.get<std::vector<double>>());
        } catch (const json::exception& e) {
            throw TransportError(std::string("malformed embedding response: ") + e.what());
        }
        if (out.size() != texts.size()) throw TransportError("embedding response has wrong vector count");
        for (const auto& v : out) {
            if (v.empty() || v.size() != out.front().size()) {
                throw TransportError("embedding response has inconsistent dimensions");
            }
        }
        return out;
    }
    throw TransportError("embedding endpoint unreachable after " + std::to_string(config_.max_retries + 1) +
                         " attempts: " + last_error);
}

std::vector<std::vector<double>> RemoteEmbeddingProvider::embed_batch(std::span<const std::string> prepared) {
    std::vector<std::vector<double>> out;
    out.reserve(prepared.size());
    for (std::size_t i = 0; i < prepared.size(); i += config_.max_batch) {
        const auto n = std::min(config_.max_batch, prepared.size() - i);
        auto part = post_batch(prepared.subspan(i, n));
        for (auto& v : part) out.push_back(std::move(v));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Cache

std::size_t EmbeddingCache::KeyHash::operator()(const Sha256Digest& d) const noexcept {
    std::size_t h = 0;
    std::memcpy(&h, d.data(), sizeof h);
    return h;
}

EmbeddingCache::EmbeddingCache(std::filesystem::path directory, std::string_view provider_tag) {
    std::filesystem::create_directories(directory);
    file_ = directory / (sanitize_tag(provider_tag) + ".embcache");

    std::ifstream in(file_, std::ios::binary);
    if (!in) return;
    std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    const auto* p = reinterpret_cast<const unsigned char*>(data.data());
    std::size_t pos = 0;
    std::optional<std::uint32_t> dim_seen;
    while (pos + 4 <= data.size()) {
        const std::uint32_t len = get_u32(p + pos);
        if (len < 36 || pos + 4 + len > data.size()) break;  // torn tail from an interrupted append
        const unsigned char* rec = p + pos + 4;
        Sha256Digest key{};
        std::memcpy(key.data(), rec, 32);
        const std::uint32_t dim = get_u32(rec + 32);
        if (36 + std::size_t{dim} * 4 != len) break;
        if (dim_seen && *dim_seen != dim) throw Error("embedding cache " + file_.string() + " mixes dimensions");
        dim_seen = dim;
        std::vector<float> values(dim);
        for (std::uint32_t i = 0; i < dim; ++i) values[i] = std::bit_cast<float>(get_u32(rec + 36 + 4 * i));
        entries_.insert_or_assign(key, std::move(values));
        pos += 4 + len;
    }
}

std::optional<std::vector<float>> EmbeddingCache::get(const Sha256Digest& key) const {
    std::lock_guard lock(mutex_);
    auto it = entries_.find(key);
    if (it == entries_.end()) return std::nullopt;
    return it->second;
}

void EmbeddingCache::put(const Sha256Digest& key, std::span<const float> values) {
    std::string rec;
    put_u32(rec, static_cast<std::uint32_t>(36 + values.size() * 4));
    rec.append(reinterpret_cast<const char*>(key.data()), key.size());
    put_u32(rec, static_cast<std::uint32_t>(values.size()));
    for (float v : values) put_u32(rec, std::bit_cast<std::uint32_t>(v));

    std::lock_guard lock(mutex_);
    if (entries_.contains(key)) return;
    std::ofstream out(file_, std::ios::binary | std::ios::app);
    if (!out) throw Error("cannot append to embedding cache " + file_.string());
    out.write(rec.data(), static_cast<std::streamsize>(rec.size()));
    out.flush();
    if (!out) throw Error("write to embedding cache failed");
    entries_.emplace(key, std::vector<float>(values.begin(), values.end()));
}

std::size_t EmbeddingCache::size() const {
    std::lock_guard lock(mutex_);
    return entries_.size();
}

// ---------------------------------------------------------------------------
// Embedder

Embedder::Embedder(std::shared_ptr<EmbeddingProvider> provider, std::optional<std::filesystem::path> cache_dir)
    : provider_(std::move(provider)) {
    if (!provider_) throw InvalidArgument("embedder needs a provider");
    if (cache_dir) cache_ = std::make_unique<EmbeddingCache>(*cache_dir, provider_->tag());
}

EmbeddingVector Embedder::expand(std::span<const float> q) const {
    double norm = 0.0;
    for (float v : q) norm += static_cast<double>(v) * static_cast<double>(v);
    norm = std::sqrt(norm);
    EmbeddingVector out;
    out.provider_tag = provider_->tag();
    out.values.resize(q.size());
    for (std::size_t i = 0; i < q.size(); ++i) out.values[i] = static_cast<double>(q[i]) / norm;
    return out;
}

std::vector<EmbeddingVector> Embedder::embed_many(std::span<const std::string> texts) {
    std::vector<std::string> prepared;
    prepared.reserve(texts.size());
    for (const auto& t : texts) {
        auto p = provider_->prepare(t);
        if (p.empty()) throw InvalidArgument("cannot embed empty text");
        prepared.push_back(std::move(p));
    }

    std::lock_guard lock(mutex_);
    std::vector<std::string> misses;
    for (const auto& p : prepared) {
        if (memo_.contains(p)) continue;
        if (cache_) {
            if (auto hit = cache_->get(sha256(p))) {
                memo_.emplace(p, std::move(*hit));
                continue;
            }
        }
        if (std::find(misses.begin(), misses.end(), p) == misses.end()) misses.push_back(p);
    }

    if (!misses.empty()) {
        ++provider_calls_;
        auto raw = provider_->embed_batch(misses);
        if (raw.size() != misses.size()) throw Error("provider returned wrong number of vectors");
        for (std::size_t i = 0; i < misses.size(); ++i) {
            auto q = quantize(raw[i]);
            if (!memo_.empty() && memo_.begin()->second.size() != q.size()) {
                throw Error("provider changed embedding dimension");
            }
            if (cache_) cache_->put(sha256(misses[i]), q);
            memo_.emplace(misses[i], std::move(q));
        }
    }

    std::vector<EmbeddingVector> out;
    out.reserve(prepared.size());
    for (const auto& p : prepared) out.push_back(expand(memo_.at(p)));
    return out;
}

EmbeddingVector Embedder::embed(std::string_view text) {
    const std::string t(text);
    return embed_many(std::span<const std::string>(&t, 1)).front();
}

EmbeddingVector embed_text(Embedder& embedder, std::string_view text) { return embedder.embed(text); }

EmbeddingVector local_embed(std::string_view text) {
    const std::string prepared = normalize_text(text);
    auto q = quantize(LocalTrigramProvider::trigram_counts(prepared));
    double norm = 0.0;
    for (float v : q) norm += static_cast<double>(v) * static_cast<double>(v);
    norm = std::sqrt(norm);
    EmbeddingVector out;
    out.provider_tag = LocalTrigramProvider{}.tag();
    for (float v : q) out.values.push_back(static_cast<double>(v) / norm);
    return out;
}

NameSimilarity make_similarity(Embedder& embedder) {
    return [&embedder](std::string_view a, std::string_view b) {
        return cosine_similarity(embedder.embed(a), embedder.embed(b));
    };
}

} // namespace ierisk
