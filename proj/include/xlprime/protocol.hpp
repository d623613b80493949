#pragma once

// Newline-delimited JSON wire protocol shared by scorers and language
// identifiers. docs/protocol.md is the normative description; the encoders
// here produce exactly the bytes shown there.

#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

namespace xlprime {

inline constexpr int kProtocolVersion = 1;

enum class JoinRule { SingleSpace };

std::string_view to_string(JoinRule rule);

struct ScoreRequest {
    std::string context;
    std::string continuation;
    JoinRule join = JoinRule::SingleSpace;
};

struct TokenScore {
    std::string token;
    double logprob = 0.0;

    friend bool operator==(const TokenScore&, const TokenScore&) = default;
};

struct ScoreResponse {
    double total_logprob = 0.0;
    std::vector<TokenScore> tokens;
    std::string scorer_id;
    std::string tokenizer_fingerprint;

    friend bool operator==(const ScoreResponse&, const ScoreResponse&) = default;
};

struct ScorerInfo {
    std::string scorer_id;
    std::string tokenizer_fingerprint;
    std::vector<std::string> ops;
};

struct LidResult {
    std::string language;
    double confidence = 0.0;
};

struct ErrorFrame {
    std::string code;
    std::string message;
};

/// Tolerance on |total - sum(token logprobs)|.
inline constexpr double kTokenSumTolerance = 1e-6;

std::string encode_hello_request();
std::string encode_score_request(const ScoreRequest& request);
std::string encode_lid_request(std::string_view text);

std::string encode_hello_response(const ScorerInfo& info);
std::string encode_score_response(const ScoreResponse& response);
std::string encode_lid_response(const LidResult& result);
std::string encode_error(std::string_view code, std::string_view message);

// Decoders throw Error(ProtocolError) on malformed frames and
// Error(ScorerRefused) on a SCORER_REFUSED error frame.
ScorerInfo decode_hello_response(std::string_view line);
ScoreResponse decode_score_response(std::string_view line);
LidResult decode_lid_response(std::string_view line);

/// Checks the ScoreResponse invariants (finite values, token sum).
void check_score_response(const ScoreResponse& response);

/// Text the scorer sees, and the offset where the continuation begins.
struct JoinedText {
    std::string text;
    size_t continuation_start = 0;
};

JoinedText join_text(std::string_view context, std::string_view continuation, JoinRule rule = JoinRule::SingleSpace);

/// Character span [begin, end) of a token within the joined text.
using Span = std::pair<size_t, size_t>;

/// Index of the first token owned by the continuation: a token belongs to the
/// continuation as soon as any part of it lies at or after continuation_start,
/// so tokens straddling the boundary count toward the continuation.
size_t first_continuation_token(const std::vector<Span>& spans, size_t continuation_start);

} // namespace xlprime
