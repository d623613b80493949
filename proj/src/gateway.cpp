#include "xlprime/gateway.hpp"
#include "xlprime/error.hpp"
#include "xlprime/text.hpp"

#include <json.hpp>
#include <fmt/format.h>

#include <mutex>
#include <unistd.h>

namespace xlprime {

ScoreCache::ScoreCache(std::filesystem::path directory) : directory_(std::move(directory))
{
    if (!directory_.empty())
        std::filesystem::create_directories(directory_);
}

std::string ScoreCache::key(const ScorerInfo& scorer, const ScoreRequest& request)
{
    const nlohmann::ordered_json k = nlohmann::ordered_json::array(
        {scorer.scorer_id, scorer.tokenizer_fingerprint, request.context, request.continuation, to_string(request.join)});
    return sha256_hex(k.dump());
}

std::filesystem::path ScoreCache::record_path(const std::string& key) const
{
    return directory_ / key.substr(0, 2) / (key + ".rec");
}

std::optional<std::string> ScoreCache::get(const std::string& key) const
{
    {
        std::shared_lock lock(mutex_);
        if (const auto it = memory_.find(key); it != memory_.end())
            return it->second;
    }
    if (directory_.empty())
        return std::nullopt;
    const auto path = record_path(key);
    std::error_code ec;
    if (!std::filesystem::exists(path, ec))
        return std::nullopt;
    // Record: key line, then the response line.
    const std::string record = read_file(path.string());
    const size_t nl = record.find('\n');
    if (nl == std::string::npos)
        return std::nullopt;
    std::string response = record.substr(nl + 1);
    while (!response.empty() && response.back() == '\n')
        response.pop_back();
    std::unique_lock lock(mutex_);
    memory_.emplace(key, response);
    return response;
}

void ScoreCache::put(const std::string& key, const std::string& response_line, const ScorerInfo& scorer, const ScoreRequest& request)
{
    std::unique_lock lock(mutex_);
    if (!memory_.emplace(key, response_line).second || directory_.empty())
        return;
    const auto path = record_path(key);
    std::error_code ec;
    if (std::filesystem::exists(path, ec))
        return;
    nlohmann::ordered_json k;
    k["scorer_id"] = scorer.scorer_id;
    k["tok_fp"] = scorer.tokenizer_fingerprint;
    k["context"] = request.context;
    k["continuation"] = request.continuation;
    k["join"] = to_string(request.join);
    std::filesystem::create_directories(path.parent_path());
    const auto tmp = path.string() + fmt::format(".{}.tmp", ::getpid());
    write_file_atomic(tmp, k.dump() + "\n" + response_line + "\n");
    std::filesystem::rename(tmp, path);
}

ScorerGateway::ScorerGateway(ChannelFactory factory, std::shared_ptr<ScoreCache> cache, RetryPolicy policy)
    : channel_(std::move(factory), policy), cache_(std::move(cache))
{
}

std::string ScorerGateway::exchange(const std::string& line)
{
    try {
        return channel_.exchange(line);
    } catch (const TransportError& e) {
        throw Error(ErrorCode::ScorerUnreachable, e.what());
    }
}

const ScorerInfo& ScorerGateway::info()
{
    if (!info_)
        info_ = decode_hello_response(exchange(encode_hello_request()));
    return *info_;
}

bool ScorerGateway::is_cached(const ScoreRequest& request)
{
    return cache_ && cache_->get(ScoreCache::key(info(), request)).has_value();
}

ScoreOutcome ScorerGateway::score(const ScoreRequest& request)
{
    if (trim(request.continuation).empty())
        throw Error(ErrorCode::ScorerRefused, "empty continuation");
    const ScorerInfo& scorer = info();
    const std::string key = cache_ ? ScoreCache::key(scorer, request) : std::string();
    if (cache_) {
        if (auto hit = cache_->get(key)) {
            ++cache_hits_;
            ScoreOutcome out{decode_score_response(*hit), std::move(*hit), true};
            return out;
        }
    }
    ScoreOutcome out;
    out.response = decode_score_response(exchange(encode_score_request(request)));
    ++remote_calls_;
    if (out.response.scorer_id != scorer.scorer_id || out.response.tokenizer_fingerprint != scorer.tokenizer_fingerprint)
        throw Error(ErrorCode::ProtocolError, "response scorer_id/tok_fp differ from the handshake");
    out.canonical = encode_score_response(out.response);
    if (cache_)
        cache_->put(key, out.canonical, scorer, request);
    return out;
}

ScoredItem ScorerGateway::score_item(const StimulusItem& item, Family family)
{
    ScoredItem scored;
    scored.item_id = item.item_id;
    scored.family = family;
    scored.scorer_id = info().scorer_id;
    for (auto prime : variants_of(family))
        for (auto target : variants_of(family)) {
            try {
                scored.logprob[variant_index(prime)][variant_index(target)] = score({item.prime(prime), item.target(target)}).response.total_logprob;
            } catch (const Error& e) {
                throw Error(e.code(), fmt::format("item {} cell prime={} target={}: {}", item.item_id, to_string(prime), to_string(target), e.detail()));
            }
        }
    return scored;
}

} // namespace xlprime
