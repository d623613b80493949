#include "xlprime/mock.hpp"
#include "xlprime/error.hpp"
#include "xlprime/text.hpp"

#include <json.hpp>
#include <fmt/format.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <set>

namespace xlprime::mock {

std::vector<std::pair<std::string, Span>> whitespace_tokens(std::string_view text)
{
    std::vector<std::pair<std::string, Span>> tokens;
    for (auto w : words(text)) {
        const size_t begin = static_cast<size_t>(w.data() - text.data());
        tokens.emplace_back(std::string(w), Span{begin, begin + w.size()});
    }
    return tokens;
}

namespace {

uint64_t fnv1a(std::string_view bytes, uint64_t h = 0xcbf29ce484222325ULL)
{
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

uint64_t mix(uint64_t z)
{
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

std::string fold(std::string_view word)
{
    while (!word.empty() && std::string_view(".,;:!?\"'()").find(word.back()) != std::string_view::npos)
        word.remove_suffix(1);
    while (!word.empty() && std::string_view("\"'(").find(word.front()) != std::string_view::npos)
        word.remove_prefix(1);
    std::string out(word);
    for (auto& c : out)
        if (c >= 'A' && c <= 'Z')
            c = static_cast<char>(c - 'A' + 'a');
    return out;
}

struct ContinuationTokens {
    std::vector<std::pair<std::string, Span>> all;
    size_t first = 0;
};

ContinuationTokens tokenize(const ScoreRequest& request)
{
    if (trim(request.continuation).empty())
        throw Error(ErrorCode::ScorerRefused, "continuation has no tokens");
    const JoinedText joined = join_text(request.context, request.continuation, request.join);
    ContinuationTokens t;
    t.all = whitespace_tokens(joined.text);
    std::vector<Span> spans;
    for (const auto& [_, span] : t.all)
        spans.push_back(span);
    t.first = first_continuation_token(spans, joined.continuation_start);
    return t;
}

ScoreResponse finish(std::vector<TokenScore> tokens, const ScorerInfo& info)
{
    ScoreResponse r;
    r.tokens = std::move(tokens);
    for (const auto& t : r.tokens)
        r.total_logprob += t.logprob;
    r.scorer_id = info.scorer_id;
    r.tokenizer_fingerprint = info.tokenizer_fingerprint;
    return r;
}

double parse_number(std::string_view text, std::string_view what)
{
    double value = 0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc{} || ptr != text.data() + text.size())
        throw Error(ErrorCode::Usage, fmt::format("invalid {} '{}'", what, text));
    return value;
}

} // namespace

UniformScorer::UniformScorer(int vocab_size) : vocab_size_(vocab_size)
{
    if (vocab_size < 2)
        throw Error(ErrorCode::Usage, "uniform mock needs a vocabulary of at least 2");
}

ScorerInfo UniformScorer::info() const
{
    return {fmt::format("mock:uniform:v{}", vocab_size_), std::string(kWhitespaceFingerprint), {"score"}};
}

ScoreResponse UniformScorer::score(const ScoreRequest& request) const
{
    const auto t = tokenize(request);
    const double lp = -std::log(static_cast<double>(vocab_size_));
    std::vector<TokenScore> tokens;
    for (size_t i = t.first; i < t.all.size(); ++i)
        tokens.push_back({t.all[i].first, lp});
    return finish(std::move(tokens), info());
}

HashScorer::HashScorer(std::string salt, double overlap_bonus) : salt_(std::move(salt)), overlap_bonus_(overlap_bonus) {}

ScorerInfo HashScorer::info() const
{
    return {fmt::format("mock:hash:{}:{}", salt_, format_double(overlap_bonus_)), std::string(kWhitespaceFingerprint), {"score"}};
}

ScoreResponse HashScorer::score(const ScoreRequest& request) const
{
    const auto t = tokenize(request);
    std::set<std::pair<std::string, std::string>> context_bigrams;
    for (size_t i = 1; i < t.first; ++i)
        context_bigrams.emplace(fold(t.all[i - 1].first), fold(t.all[i].first));

    const uint64_t base = fnv1a(request.context, fnv1a(std::string(1, '\x1f'), fnv1a(salt_)));
    std::vector<TokenScore> tokens;
    for (size_t i = t.first; i < t.all.size(); ++i) {
        const auto& word = t.all[i].first;
        const uint64_t h = mix(fnv1a(word, base ^ mix(i - t.first)));
        const double u = static_cast<double>(h >> 11) * 0x1.0p-53;
        double lp = -(0.5 + 9.5 * u);
        if (overlap_bonus_ != 0.0 && i > t.first && context_bigrams.count({fold(t.all[i - 1].first), fold(word)}))
            lp = std::min(lp + overlap_bonus_, -0.01);
        tokens.push_back({word, lp});
    }
    return finish(std::move(tokens), info());
}

TableScorer TableScorer::from_text(std::string_view text, std::string_view label)
{
    TableScorer scorer;
    scorer.id_ = "mock:table:" + sha256_hex(text).substr(0, 12);
    size_t number = 0;
    for (auto line : split(text, '\n')) {
        ++number;
        if (!line.empty() && line.back() == '\r')
            line.remove_suffix(1);
        if (line.empty() || starts_with(line, "#"))
            continue;
        const auto fields = split(line, '\t');
        if (fields.size() != 3)
            throw Error(ErrorCode::MalformedFile, fmt::format("{}:{}: expected context<TAB>continuation<TAB>logprob", label, number));
        const double lp = parse_number(trim(fields[2]), "logprob");
        if (!std::isfinite(lp) || lp > 0)
            throw Error(ErrorCode::MalformedFile, fmt::format("{}:{}: logprob must be finite and <= 0", label, number));
        scorer.add(nfc(fields[0]), nfc(fields[1]), lp);
    }
    return scorer;
}

TableScorer TableScorer::from_file(const std::string& path) { return from_text(read_file(path), path); }

void TableScorer::add(std::string context, std::string continuation, double logprob)
{
    table_[{std::move(context), std::move(continuation)}] = logprob;
}

ScorerInfo TableScorer::info() const { return {id_.empty() ? "mock:table:inline" : id_, "table-v1", {"score"}}; }

ScoreResponse TableScorer::score(const ScoreRequest& request) const
{
    const auto it = table_.find({request.context, request.continuation});
    if (it == table_.end())
        throw Error(ErrorCode::ScorerRefused, "no table entry for this context/continuation pair");
    return finish({{request.continuation, it->second}}, info());
}

namespace {

struct Lexicon {
    const char* language;
    std::vector<std::string_view> words;
};

const std::vector<Lexicon>& lexicons()
{
    static const std::vector<Lexicon> all = {
        {"de", {"der", "die", "und", "das", "ist", "nicht", "ein", "eine", "mit", "zu", "den", "von", "sich", "auf", "für", "ich", "wir"}},
        {"en", {"the", "and", "of", "to", "is", "in", "that", "it", "was", "for", "with", "on", "are", "this", "by", "he", "she"}},
        {"es", {"el", "la", "que", "y", "los", "se", "del", "las", "por", "una", "es", "con", "pero", "muy", "yo"}},
        {"fr", {"le", "les", "et", "est", "des", "une", "du", "dans", "pour", "pas", "sur", "il", "elle", "nous", "je"}},
        {"it", {"il", "di", "che", "e", "per", "non", "sono", "gli", "della", "è", "nel", "anche", "io"}},
        {"nl", {"de", "het", "een", "en", "van", "niet", "dat", "op", "te", "zijn", "met", "voor", "maar", "ook", "ik", "wij"}},
        {"pl", {"i", "w", "nie", "na", "się", "z", "jest", "że", "do", "jak", "ale", "co", "tak", "już", "ja", "my"}},
        {"pt", {"o", "os", "as", "do", "da", "em", "um", "uma", "para", "com", "não", "mas", "eu", "nós"}},
    };
    return all;
}

} // namespace

LexiconIdentifier::LexiconIdentifier(double sharpness) : sharpness_(sharpness)
{
    if (!(sharpness > 0))
        throw Error(ErrorCode::Usage, "lexicon sharpness must be positive");
}

LidResult LexiconIdentifier::identify(std::string_view text) const
{
    std::vector<double> weights;
    double total = 0.0;
    for (const auto& lex : lexicons()) {
        int hits = 0;
        for (auto w : words(text)) {
            const std::string folded = fold(w);
            hits += static_cast<int>(std::count(lex.words.begin(), lex.words.end(), folded));
        }
        weights.push_back(std::pow(static_cast<double>(hits), sharpness_));
        total += weights.back();
    }
    if (total == 0.0)
        return {"und", 0.0};
    const size_t best = static_cast<size_t>(std::max_element(weights.begin(), weights.end()) - weights.begin());
    return {lexicons()[best].language, weights[best] / total};
}

MockServer::MockServer(std::shared_ptr<const Scorer> scorer, std::shared_ptr<const LanguageIdentifier> identifier)
    : scorer_(std::move(scorer)), identifier_(std::move(identifier))
{
}

std::string MockServer::handle(std::string_view line) const
{
    nlohmann::json request;
    try {
        request = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error&) {
        return encode_error("BAD_REQUEST", "unparseable JSON");
    }
    if (!request.is_object() || !request.contains("op") || !request["op"].is_string())
        return encode_error("BAD_REQUEST", "missing op");
    if (request.contains("v") && request["v"] != kProtocolVersion)
        return encode_error("BAD_REQUEST", "unsupported protocol version");
    const std::string op = request["op"];

    try {
        if (op == "hello") {
            ScorerInfo info = scorer_ ? scorer_->info() : ScorerInfo{"mock:lid-only", std::string(kWhitespaceFingerprint), {}};
            info.ops.clear();
            if (scorer_)
                info.ops.push_back("score");
            if (identifier_)
                info.ops.push_back("lid");
            if (identifier_ && !scorer_)
                info.scorer_id = "mock:lid";
            return encode_hello_response(info);
        }
        if (op == "score" && scorer_) {
            if (!request.contains("context") || !request["context"].is_string() || !request.contains("continuation") ||
                !request["continuation"].is_string())
                return encode_error("BAD_REQUEST", "score needs string context and continuation");
            if (request.value("join", std::string("single_space")) != "single_space")
                return encode_error("UNSUPPORTED_JOIN", "only single_space is supported");
            ScoreRequest r{request["context"].get<std::string>(), request["continuation"].get<std::string>(), JoinRule::SingleSpace};
            return encode_score_response(scorer_->score(r));
        }
        if (op == "lid" && identifier_) {
            if (!request.contains("text") || !request["text"].is_string())
                return encode_error("BAD_REQUEST", "lid needs string text");
            return encode_lid_response(identifier_->identify(request["text"].get<std::string>()));
        }
    } catch (const Error& e) {
        if (e.code() == ErrorCode::ScorerRefused)
            return encode_error("SCORER_REFUSED", e.detail());
        return encode_error("INTERNAL", e.detail());
    }
    return encode_error("UNSUPPORTED_OP", "op '" + op + "' is not served here");
}

std::shared_ptr<MockServer> make_server(std::string_view spec)
{
    const auto parts = split(spec, ':');
    const auto kind = parts[0];
    if (kind == "uniform") {
        const int vocab = parts.size() > 1 ? static_cast<int>(parse_number(parts[1], "vocabulary size")) : 10;
        return std::make_shared<MockServer>(std::make_shared<UniformScorer>(vocab), nullptr);
    }
    if (kind == "hash") {
        const std::string salt = parts.size() > 1 ? std::string(parts[1]) : "0";
        const double bonus = parts.size() > 2 ? parse_number(parts[2], "overlap bonus") : 0.0;
        return std::make_shared<MockServer>(std::make_shared<HashScorer>(salt, bonus), nullptr);
    }
    if (kind == "table") {
        if (spec.size() <= 6)
            throw Error(ErrorCode::Usage, "mock:table needs a file path");
        return std::make_shared<MockServer>(std::make_shared<TableScorer>(TableScorer::from_file(std::string(spec.substr(6)))), nullptr);
    }
    if (kind == "lexicon") {
        const double sharpness = parts.size() > 1 ? parse_number(parts[1], "sharpness") : 1.0;
        return std::make_shared<MockServer>(nullptr, std::make_shared<LexiconIdentifier>(sharpness));
    }
    throw Error(ErrorCode::Usage, "unknown mock endpoint 'mock:" + std::string(spec) + "'");
}

} // namespace xlprime::mock
