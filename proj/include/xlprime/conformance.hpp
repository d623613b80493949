#pragma once

#include "xlprime/channel.hpp"
#include "xlprime/gateway.hpp"

#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace xlprime {

/// Golden transcript: non-comment lines alternate request, expected response.
using Transcript = std::vector<std::pair<std::string, std::string>>;

/// Throws Error(MalformedFile) when a request has no response line.
Transcript parse_transcript(std::string_view text);

struct TranscriptMismatch {
    size_t index = 0;
    std::string request;
    std::string expected;
    std::string actual;
};

/// Byte comparison of every response; transport failures are reported as
/// mismatches with the exception text.
std::vector<TranscriptMismatch> replay_transcript(LineChannel& channel, const Transcript& transcript);

/// 100 short sentences in ten languages and five scripts.
const std::vector<std::string>& multilingual_sentences();

/// Scores each sentence (empty and non-empty context) and checks that the
/// total equals the sum of token logprobs within kTokenSumTolerance and that a
/// repeated request returns the same total. Returns one line per failure.
std::vector<std::string> check_token_sums(ScorerGateway& gateway, const std::vector<std::string>& sentences);

} // namespace xlprime
