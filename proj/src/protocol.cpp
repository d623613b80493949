#include "xlprime/protocol.hpp"
#include "xlprime/error.hpp"

#include <json.hpp>

#include <cmath>

namespace xlprime {

using ojson = nlohmann::ordered_json;

std::string_view to_string(JoinRule rule)
{
    switch (rule) {
    case JoinRule::SingleSpace: return "single_space";
    }
    return "?";
}

std::string encode_hello_request()
{
    ojson j;
    j["v"] = kProtocolVersion;
    j["op"] = "hello";
    return j.dump();
}

std::string encode_score_request(const ScoreRequest& request)
{
    ojson j;
    j["v"] = kProtocolVersion;
    j["op"] = "score";
    j["context"] = request.context;
    j["continuation"] = request.continuation;
    j["join"] = to_string(request.join);
    return j.dump();
}

std::string encode_lid_request(std::string_view text)
{
    ojson j;
    j["v"] = kProtocolVersion;
    j["op"] = "lid";
    j["text"] = std::string(text);
    return j.dump();
}

std::string encode_hello_response(const ScorerInfo& info)
{
    ojson j;
    j["v"] = kProtocolVersion;
    j["scorer_id"] = info.scorer_id;
    j["tok_fp"] = info.tokenizer_fingerprint;
    j["ops"] = info.ops;
    return j.dump();
}

std::string encode_score_response(const ScoreResponse& response)
{
    ojson tokens = ojson::array();
    for (const auto& t : response.tokens)
        tokens.push_back(ojson::array({t.token, t.logprob}));
    ojson j;
    j["v"] = kProtocolVersion;
    j["total"] = response.total_logprob;
    j["tokens"] = std::move(tokens);
    j["scorer_id"] = response.scorer_id;
    j["tok_fp"] = response.tokenizer_fingerprint;
    return j.dump();
}

std::string encode_lid_response(const LidResult& result)
{
    ojson j;
    j["v"] = kProtocolVersion;
    j["language"] = result.language;
    j["confidence"] = result.confidence;
    return j.dump();
}

std::string encode_error(std::string_view code, std::string_view message)
{
    ojson j;
    j["v"] = kProtocolVersion;
    j["error"] = std::string(code);
    j["message"] = std::string(message);
    return j.dump();
}

namespace {

[[noreturn]] void malformed(const std::string& why, std::string_view line)
{
    constexpr size_t kShown = 200;
    std::string shown(line.substr(0, kShown));
    if (line.size() > kShown)
        shown += "...";
    throw Error(ErrorCode::ProtocolError, why + " in frame: " + shown);
}

ojson parse_frame(std::string_view line)
{
    ojson j;
    try {
        j = ojson::parse(line);
    } catch (const nlohmann::json::parse_error&) {
        malformed("unparseable JSON", line);
    }
    if (!j.is_object())
        malformed("frame is not an object", line);
    const auto v = j.find("v");
    if (v == j.end() || !v->is_number_integer() || v->get<int>() != kProtocolVersion)
        malformed("missing or unsupported protocol version", line);
    if (const auto err = j.find("error"); err != j.end()) {
        const std::string code = err->is_string() ? err->get<std::string>() : "?";
        const auto msg = j.find("message");
        const std::string message = msg != j.end() && msg->is_string() ? msg->get<std::string>() : "";
        if (code == "SCORER_REFUSED")
            throw Error(ErrorCode::ScorerRefused, message);
        throw Error(ErrorCode::ProtocolError, "scorer reported " + code + ": " + message);
    }
    return j;
}

std::string require_string(const ojson& j, const char* key, std::string_view line)
{
    const auto it = j.find(key);
    if (it == j.end() || !it->is_string())
        malformed(std::string("missing string field '") + key + "'", line);
    return it->get<std::string>();
}

double require_number(const ojson& j, const char* key, std::string_view line)
{
    const auto it = j.find(key);
    if (it == j.end() || !it->is_number())
        malformed(std::string("missing numeric field '") + key + "'", line);
    return it->get<double>();
}

} // namespace

ScorerInfo decode_hello_response(std::string_view line)
{
    const ojson j = parse_frame(line);
    ScorerInfo info;
    info.scorer_id = require_string(j, "scorer_id", line);
    info.tokenizer_fingerprint = require_string(j, "tok_fp", line);
    if (const auto ops = j.find("ops"); ops != j.end()) {
        if (!ops->is_array())
            malformed("'ops' must be an array", line);
        for (const auto& op : *ops) {
            if (!op.is_string())
                malformed("'ops' entries must be strings", line);
            info.ops.push_back(op.get<std::string>());
        }
    }
    if (info.scorer_id.empty())
        malformed("empty scorer_id", line);
    return info;
}

ScoreResponse decode_score_response(std::string_view line)
{
    const ojson j = parse_frame(line);
    ScoreResponse response;
    response.total_logprob = require_number(j, "total", line);
    response.scorer_id = require_string(j, "scorer_id", line);
    response.tokenizer_fingerprint = require_string(j, "tok_fp", line);
    const auto tokens = j.find("tokens");
    if (tokens == j.end() || !tokens->is_array())
        malformed("missing array field 'tokens'", line);
    for (const auto& t : *tokens) {
        if (!t.is_array() || t.size() != 2 || !t[0].is_string() || !t[1].is_number())
            malformed("tokens must be [text, logprob] pairs", line);
        response.tokens.push_back({t[0].get<std::string>(), t[1].get<double>()});
    }
    check_score_response(response);
    return response;
}

LidResult decode_lid_response(std::string_view line)
{
    const ojson j = parse_frame(line);
    LidResult result;
    result.language = require_string(j, "language", line);
    result.confidence = require_number(j, "confidence", line);
    if (!(result.confidence >= 0.0 && result.confidence <= 1.0))
        malformed("confidence outside [0,1]", line);
    return result;
}

void check_score_response(const ScoreResponse& response)
{
    if (!std::isfinite(response.total_logprob))
        throw Error(ErrorCode::ProtocolError, "non-finite total logprob");
    double sum = 0.0;
    for (const auto& t : response.tokens) {
        if (!std::isfinite(t.logprob))
            throw Error(ErrorCode::ProtocolError, "non-finite token logprob for '" + t.token + "'");
        sum += t.logprob;
    }
    if (response.tokens.empty())
        throw Error(ErrorCode::ProtocolError, "response has no continuation tokens");
    if (std::abs(sum - response.total_logprob) > kTokenSumTolerance)
        throw Error(ErrorCode::ProtocolError, "total does not equal the sum of token logprobs");
    if (response.total_logprob > kTokenSumTolerance)
        throw Error(ErrorCode::ProtocolError, "positive total logprob");
}

JoinedText join_text(std::string_view context, std::string_view continuation, JoinRule rule)
{
    switch (rule) {
    case JoinRule::SingleSpace:
        if (context.empty())
            return {std::string(continuation), 0};
        return {std::string(context) + " " + std::string(continuation), context.size() + 1};
    }
    return {std::string(continuation), 0};
}

size_t first_continuation_token(const std::vector<Span>& spans, size_t continuation_start)
{
    for (size_t i = 0; i < spans.size(); ++i)
        if (spans[i].second > continuation_start)
            return i;
    return spans.size();
}

} // namespace xlprime
