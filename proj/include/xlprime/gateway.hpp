#pragma once

#include "xlprime/channel.hpp"
#include "xlprime/construction.hpp"
#include "xlprime/protocol.hpp"
#include "xlprime/stimulus.hpp"

#include <array>
#include <atomic>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <string>

namespace xlprime {

/// Content-addressed response cache. One record file per request under
/// `<dir>/<2 hex>/<sha256>.rec`; records are written once and never
/// rewritten. An empty directory keeps the cache in memory only.
/// Safe for concurrent readers; writers are serialized.
class ScoreCache {
public:
    explicit ScoreCache(std::filesystem::path directory = {});

    static std::string key(const ScorerInfo& scorer, const ScoreRequest& request);

    /// The canonical response line stored under `key`, if any.
    std::optional<std::string> get(const std::string& key) const;

    void put(const std::string& key, const std::string& response_line, const ScorerInfo& scorer, const ScoreRequest& request);

    const std::filesystem::path& directory() const noexcept { return directory_; }

private:
    std::filesystem::path record_path(const std::string& key) const;

    std::filesystem::path directory_;
    mutable std::shared_mutex mutex_;
    mutable std::map<std::string, std::string> memory_;
};

/// 2x2 matrix of total continuation logprobs for one item, indexed
/// [prime variant][target variant] in family enumeration order.
struct ScoredItem {
    std::string item_id;
    Family family = Family::Dative;
    std::array<std::array<double, 2>, 2> logprob{};
    std::string scorer_id;

    double at(Variant prime, Variant target) const { return logprob[variant_index(prime)][variant_index(target)]; }

    friend bool operator==(const ScoredItem&, const ScoredItem&) = default;
};

struct ScoreOutcome {
    ScoreResponse response;
    std::string canonical; // encode_score_response(response)
    bool from_cache = false;
};

/// Scores continuations through one connection to a scorer. Not thread-safe;
/// run one gateway per worker and share the cache between them.
class ScorerGateway {
public:
    ScorerGateway(ChannelFactory factory, std::shared_ptr<ScoreCache> cache = nullptr, RetryPolicy policy = {});

    /// Handshake result; performed on first use.
    const ScorerInfo& info();

    ScoreOutcome score(const ScoreRequest& request);

    /// The four prime x target calls, in variant enumeration order.
    ScoredItem score_item(const StimulusItem& item, Family family);

    /// Requests a cache hit would have served; nothing is sent.
    bool is_cached(const ScoreRequest& request);

    size_t remote_calls() const noexcept { return remote_calls_; }
    size_t cache_hits() const noexcept { return cache_hits_; }
    int connections() const noexcept { return channel_.connections(); }

private:
    std::string exchange(const std::string& line);

    RetryingChannel channel_;
    std::shared_ptr<ScoreCache> cache_;
    std::optional<ScorerInfo> info_;
    size_t remote_calls_ = 0;
    size_t cache_hits_ = 0;
};

} // namespace xlprime
