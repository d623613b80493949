#pragma once

// Deterministic stand-ins for a model bridge. They implement the same wire
// protocol as a real bridge (see MockServer) and back the `mock:` endpoints.

#include "xlprime/identifier.hpp"
#include "xlprime/protocol.hpp"

#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

namespace xlprime::mock {

/// Whitespace tokenizer: maximal runs of non-whitespace bytes, with spans.
std::vector<std::pair<std::string, Span>> whitespace_tokens(std::string_view text);

inline constexpr std::string_view kWhitespaceFingerprint = "whitespace-v1";

class Scorer {
public:
    virtual ~Scorer() = default;
    virtual ScorerInfo info() const = 0;
    /// Throws Error(ScorerRefused) when the input cannot be scored.
    virtual ScoreResponse score(const ScoreRequest& request) const = 0;
};

/// Every whitespace token of the continuation gets log(1/vocab_size).
class UniformScorer : public Scorer {
public:
    explicit UniformScorer(int vocab_size = 10);
    ScorerInfo info() const override;
    ScoreResponse score(const ScoreRequest& request) const override;

private:
    int vocab_size_;
};

/// Per-token logprobs in [-10, -0.5] drawn from a hash of (salt, context,
/// position, token); a context-dependent scorer with no systematic priming.
/// A positive `overlap_bonus` adds that many nats to each continuation token
/// whose preceding bigram also occurs in the context, which yields a genuine
/// structure-sharing preference.
class HashScorer : public Scorer {
public:
    explicit HashScorer(std::string salt = "0", double overlap_bonus = 0.0);
    ScorerInfo info() const override;
    ScoreResponse score(const ScoreRequest& request) const override;

private:
    std::string salt_;
    double overlap_bonus_;
};

/// Looks up (context, continuation) in a table of total logprobs.
/// Table text: one `context<TAB>continuation<TAB>logprob` row per line.
class TableScorer : public Scorer {
public:
    static TableScorer from_text(std::string_view text, std::string_view label);
    static TableScorer from_file(const std::string& path);

    void add(std::string context, std::string continuation, double logprob);

    ScorerInfo info() const override;
    ScoreResponse score(const ScoreRequest& request) const override;

private:
    std::string id_;
    std::map<std::pair<std::string, std::string>, double> table_;
};

/// Stop-word voting over a small built-in lexicon (en, de, nl, pl, es, fr,
/// it, pt). confidence = hits(L)^s / sum over languages of hits^s, where s is
/// the sharpness; "und" with confidence 0 when nothing matches.
class LexiconIdentifier : public LanguageIdentifier {
public:
    explicit LexiconIdentifier(double sharpness = 1.0);
    LidResult identify(std::string_view text) const override;

private:
    double sharpness_;
};

/// Protocol front-end for a scorer and/or identifier: one request line in,
/// one response line out. Never throws; failures become error frames.
class MockServer {
public:
    MockServer(std::shared_ptr<const Scorer> scorer, std::shared_ptr<const LanguageIdentifier> identifier);

    std::string handle(std::string_view line) const;

private:
    std::shared_ptr<const Scorer> scorer_;
    std::shared_ptr<const LanguageIdentifier> identifier_;
};

/// Builds the handler behind a `mock:...` endpoint (without the `mock:` prefix):
/// `uniform[:V]`, `hash[:salt[:bonus]]`, `table:<file>`, `lexicon[:sharpness]`.
std::shared_ptr<MockServer> make_server(std::string_view spec);

} // namespace xlprime::mock
