#pragma once

#include <array>
#include <atomic>
#include <chrono>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "ierisk/similarity.hpp"

namespace ierisk {

struct EmbeddingVector {
    std::vector<double> values;  // unit L2 norm
    std::string provider_tag;

    std::size_t dim() const noexcept { return values.size(); }
    friend bool operator==(const EmbeddingVector&, const EmbeddingVector&) = default;
};

using Sha256Digest = std::array<std::uint8_t, 32>;
Sha256Digest sha256(std::string_view bytes);
std::string to_hex(std::span<const std::uint8_t> bytes);

// Trim, Unicode NFC, then lowercase with the root locale. Locale-independent.
std::string normalize_text(std::string_view text);
// Trim + NFC only.
std::string nfc_text(std::string_view text);

double cosine_similarity(std::span<const double> u, std::span<const double> v);
double cosine_similarity(const EmbeddingVector& u, const EmbeddingVector& v);

class EmbeddingProvider {
public:
    virtual ~EmbeddingProvider() = default;

    // Identifies provider + model; also names the cache file.
    virtual std::string tag() const = 0;

    // Text preparation applied before hashing the cache key and embedding.
    virtual std::string prepare(std::string_view text) const = 0;

    // One raw (not necessarily normalized) vector per prepared text.
    virtual std::vector<std::vector<double>> embed_batch(std::span<const std::string> prepared) = 0;
};

// Character-trigram counts hashed into 256 buckets.
class LocalTrigramProvider final : public EmbeddingProvider {
public:
    static constexpr std::size_t kDim = 256;
    static constexpr std::uint64_t kHashSeed = 0x69657269736b3031ULL;  // hash version 1

    std::string tag() const override { return "local-trigram-v1"; }
    std::string prepare(std::string_view text) const override { return normalize_text(text); }
    std::vector<std::vector<double>> embed_batch(std::span<const std::string> prepared) override;

    static std::vector<double> trigram_counts(std::string_view prepared);
};

struct RemoteEmbeddingConfig {
    std::string endpoint;  // http(s)://host[:port]/path
    std::string model = "text-embedding-ada-002";
    std::chrono::milliseconds timeout{10000};
    std::string api_key_env = "IERISK_EMBED_API_KEY";
    int max_retries = 3;
    std::chrono::milliseconds initial_backoff{200};
    std::size_t max_batch = 64;
};

// JSON over HTTP: POST {model, input: [texts]} -> {vectors: [[...], ...]}.
class RemoteEmbeddingProvider final : public EmbeddingProvider {
public:
    explicit RemoteEmbeddingProvider(RemoteEmbeddingConfig config);

    std::string tag() const override { return "remote-" + config_.model; }
    std::string prepare(std::string_view text) const override { return nfc_text(text); }
    std::vector<std::vector<double>> embed_batch(std::span<const std::string> prepared) override;

    std::size_t request_count() const noexcept { return requests_.load(); }

private:
    std::vector<std::vector<double>> post_batch(std::span<const std::string> texts);

    RemoteEmbeddingConfig config_;
    std::string scheme_host_port_;
    std::string path_;
    std::atomic<std::size_t> requests_{0};
};

// Append-only vector store, one file per provider tag. Records are
// [u32 length][32-byte SHA-256 key][u32 dim][dim x f32], little endian.
class EmbeddingCache {
public:
    EmbeddingCache(std::filesystem::path directory, std::string_view provider_tag);

    std::optional<std::vector<float>> get(const Sha256Digest& key) const;
    void put(const Sha256Digest& key, std::span<const float> values);

    const std::filesystem::path& file() const noexcept { return file_; }
    std::size_t size() const;

private:
    struct KeyHash {
        std::size_t operator()(const Sha256Digest& d) const noexcept;
    };

    std::filesystem::path file_;
    mutable std::mutex mutex_;
    std::unordered_map<Sha256Digest, std::vector<float>, KeyHash> entries_;
};

// Provider front end: text preparation, batching of misses, canonical float32
// quantization, in-memory memo and optional persistent cache. Thread safe.
class Embedder {
public:
    explicit Embedder(std::shared_ptr<EmbeddingProvider> provider,
                      std::optional<std::filesystem::path> cache_dir = std::nullopt);

    EmbeddingVector embed(std::string_view text);
    std::vector<EmbeddingVector> embed_many(std::span<const std::string> texts);

    std::string tag() const { return provider_->tag(); }
    // Number of embed_batch calls that reached the provider.
    std::size_t provider_calls() const noexcept { return provider_calls_.load(); }

private:
    EmbeddingVector expand(std::span<const float> q) const;

    std::shared_ptr<EmbeddingProvider> provider_;
    std::unique_ptr<EmbeddingCache> cache_;
    std::mutex mutex_;
    std::unordered_map<std::string, std::vector<float>> memo_;  // prepared text -> q
    std::atomic<std::size_t> provider_calls_{0};
};

EmbeddingVector embed_text(Embedder& embedder, std::string_view text);

// Deterministic offline embedding; no cache involved.
EmbeddingVector local_embed(std::string_view text);

// Cosine similarity over embedder vectors.
NameSimilarity make_similarity(Embedder& embedder);

} // namespace ierisk
