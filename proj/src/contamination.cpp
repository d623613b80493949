#include "xlprime/contamination.hpp"
#include "xlprime/error.hpp"
#include "xlprime/text.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <random>
#include <set>
#include <thread>

namespace xlprime {

void AuditConfig::validate() const
{
    for (double t : {paragraph_threshold, threshold_a, threshold_b})
        if (!(t > 0.0 && t <= 1.0))
            throw Error(ErrorCode::OutOfRange, fmt::format("threshold {} outside (0, 1]", t));
    if (token_budget == 0)
        throw Error(ErrorCode::OutOfRange, "token budget must be positive");
    for (const auto& [language, total] : corpus_tokens)
        if (!(total >= 0.0) || !std::isfinite(total))
            throw Error(ErrorCode::OutOfRange, fmt::format("corpus total for {} must be a finite non-negative count", language));
}

size_t whitespace_token_count(std::string_view text) { return words(text).size(); }

Corpus load_corpus(const std::filesystem::path& directory)
{
    std::error_code ec;
    if (!std::filesystem::is_directory(directory, ec))
        throw Error(ErrorCode::MalformedFile, fmt::format("corpus directory {} not found", directory.string()));
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(directory))
        if (entry.is_regular_file() && entry.path().extension() == ".txt")
            files.push_back(entry.path());
    std::sort(files.begin(), files.end());

    Corpus corpus;
    for (const auto& file : files) {
        std::string text = read_file(file.string());
        if (!is_valid_utf8(text))
            throw Error(ErrorCode::MalformedFile, fmt::format("{} is not valid UTF-8", file.string()));
        std::vector<std::string>& docs = corpus[file.stem().string()];
        std::string current;
        auto flush = [&] {
            if (!trim(current).empty())
                docs.push_back(std::move(current));
            current.clear();
        };
        for (auto line : split(text, '\n')) {
            if (!line.empty() && line.back() == '\r')
                line.remove_suffix(1);
            if (trim(line).empty()) {
                flush();
                continue;
            }
            if (!current.empty())
                current += '\n';
            current += line;
        }
        flush();
    }
    return corpus;
}

namespace {

uint64_t fnv1a(std::string_view text)
{
    uint64_t h = 1469598103934665603ull;
    for (unsigned char c : text)
        h = (h ^ c) * 1099511628211ull;
    return h;
}

// Uniform on [0, n) by rejection; the standard distributions are not
// specified bit-for-bit across library implementations.
uint64_t uniform_below(std::mt19937_64& rng, uint64_t n)
{
    const uint64_t limit = std::numeric_limits<uint64_t>::max() - std::numeric_limits<uint64_t>::max() % n;
    uint64_t v;
    do
        v = rng();
    while (v >= limit);
    return v % n;
}

} // namespace

LanguageSample sample_language(const std::string& language, const std::vector<std::string>& documents, size_t budget, uint64_t seed)
{
    std::vector<size_t> order(documents.size());
    for (size_t i = 0; i < order.size(); ++i)
        order[i] = i;
    std::mt19937_64 rng(seed ^ fnv1a(language));
    for (size_t i = order.size(); i > 1; --i)
        std::swap(order[i - 1], order[uniform_below(rng, i)]);

    LanguageSample sample;
    sample.language = language;
    for (size_t i : order) {
        if (sample.tokens >= budget)
            break;
        sample.documents.push_back(documents[i]);
        sample.tokens += whitespace_token_count(documents[i]);
    }
    sample.exhausted = sample.tokens < budget;
    return sample;
}

std::vector<Paragraph> segment(std::string_view document)
{
    std::vector<Paragraph> out;
    for (auto line : split(document, '\n')) {
        const auto text = trim(line);
        if (text.empty())
            continue;
        Paragraph p;
        p.text = std::string(text);
        for (auto piece : split(text, '.')) {
            const auto sentence = trim(piece);
            if (!sentence.empty())
                p.sentences.emplace_back(sentence);
        }
        out.push_back(std::move(p));
    }
    return out;
}

std::string to_string(AuditMode mode)
{
    switch (mode) {
    case AuditMode::ClassifierA: return "CLASSIFIER_A";
    case AuditMode::ClassifierB: return "CLASSIFIER_B";
    case AuditMode::Consensus: return "CONSENSUS";
    }
    return "CONSENSUS";
}

IdentifierFactory make_identifier_factory(const std::string& endpoint)
{
    auto channels = make_channel_factory(parse_endpoint(endpoint));
    return [channels] { return std::make_unique<ProtocolIdentifier>(channels); };
}

std::array<bool, 3> sentence_flags(const LidResult& a, const LidResult& b, const std::string& contaminant, const AuditConfig& config)
{
    const bool in_a = a.language == contaminant && a.confidence >= config.threshold_a;
    const bool in_b = b.language == contaminant && b.confidence >= config.threshold_b;
    return {in_a, in_b, in_a && in_b};
}

namespace {

bool is_fatal(const Error& e) { return e.code() == ErrorCode::ClassifierUnreachable; }

SourceCounts count_document(const std::string& language, const std::string& document, const AuditConfig& config,
                            const LanguageIdentifier& a, const LanguageIdentifier& b)
{
    SourceCounts c;
    c.documents = 1;
    for (const auto& paragraph : segment(document)) {
        ++c.paragraphs;
        try {
            const LidResult label = a.identify(paragraph.text);
            if (label.language != language || label.confidence < config.paragraph_threshold)
                continue;
        } catch (const Error& e) {
            if (is_fatal(e))
                throw;
            ++c.classifier_errors;
            continue;
        }
        ++c.paragraphs_passed;
        for (const auto& sentence : paragraph.sentences) {
            LidResult ra, rb;
            try {
                ra = a.identify(sentence);
                rb = b.identify(sentence);
            } catch (const Error& e) {
                if (is_fatal(e))
                    throw;
                ++c.classifier_errors;
                continue;
            }
            const size_t tokens = whitespace_token_count(sentence);
            ++c.sentences;
            c.tokens += tokens;
            for (const auto& contaminant : config.contaminants) {
                if (contaminant == language)
                    continue;
                auto& slot = c.flagged[contaminant];
                const auto flags = sentence_flags(ra, rb, contaminant, config);
                for (size_t m = 0; m < 3; ++m)
                    if (flags[m]) {
                        ++slot[m].sentences;
                        slot[m].tokens += tokens;
                    }
            }
        }
    }
    return c;
}

void accumulate(SourceCounts& total, const SourceCounts& part)
{
    total.documents += part.documents;
    total.paragraphs += part.paragraphs;
    total.paragraphs_passed += part.paragraphs_passed;
    total.sentences += part.sentences;
    total.tokens += part.tokens;
    total.classifier_errors += part.classifier_errors;
    for (const auto& [contaminant, modes] : part.flagged)
        for (size_t m = 0; m < 3; ++m) {
            total.flagged[contaminant][m].sentences += modes[m].sentences;
            total.flagged[contaminant][m].tokens += modes[m].tokens;
        }
}

} // namespace

SourceCounts classify_and_count(const std::string& language, const std::vector<std::string>& documents, const AuditConfig& config,
                                const IdentifierFactory& classifier_a, const IdentifierFactory& classifier_b, unsigned jobs)
{
    config.validate();
    std::vector<SourceCounts> parts(documents.size());
    const unsigned workers = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(documents.size())));
    std::atomic<size_t> next{0};
    std::vector<std::exception_ptr> failures(workers);
    auto work = [&](unsigned w) {
        try {
            const auto a = classifier_a();
            const auto b = classifier_b();
            for (size_t i; (i = next.fetch_add(1)) < documents.size();)
                parts[i] = count_document(language, documents[i], config, *a, *b);
        } catch (...) {
            failures[w] = std::current_exception();
            next = documents.size();
        }
    };
    if (workers == 1) {
        work(0);
    } else {
        std::vector<std::thread> pool;
        for (unsigned w = 0; w < workers; ++w)
            pool.emplace_back(work, w);
        for (auto& t : pool)
            t.join();
    }
    for (const auto& f : failures)
        if (f)
            std::rethrow_exception(f);

    SourceCounts total;
    total.language = language;
    for (const auto& contaminant : config.contaminants)
        if (contaminant != language)
            total.flagged[contaminant];
    for (const auto& part : parts)
        accumulate(total, part);
    return total;
}

int64_t extrapolate(double proportion, double total_tokens)
{
    if (!(proportion >= 0.0 && proportion <= 1.0))
        throw Error(ErrorCode::OutOfRange, fmt::format("proportion {} outside [0, 1]", proportion));
    if (!(total_tokens >= 0.0) || !std::isfinite(total_tokens))
        throw Error(ErrorCode::OutOfRange, fmt::format("token total {} must be finite and non-negative", total_tokens));
    const double product = proportion * total_tokens;
    if (product >= 9.2e18)
        throw Error(ErrorCode::OutOfRange, "extrapolated count exceeds 64 bits");
    return std::llround(product);
}

std::vector<ContaminationEstimate> estimate(const std::vector<SourceCounts>& sources, const AuditConfig& config)
{
    std::vector<ContaminationEstimate> out;
    for (const auto& contaminant : config.contaminants) {
        for (auto mode : kAuditModes) {
            const size_t m = static_cast<size_t>(mode);
            ContaminationEstimate e;
            e.contaminant = contaminant;
            e.mode = mode;
            double total = 0.0;
            for (const auto& s : sources) {
                const auto it = s.flagged.find(contaminant);
                if (it == s.flagged.end())
                    continue;
                const auto source_total = config.corpus_tokens.find(s.language);
                if (source_total == config.corpus_tokens.end())
                    throw Error(ErrorCode::Usage, fmt::format("no corpus token total configured for source language {}", s.language));
                e.sentences_flagged += it->second[m].sentences;
                e.sentences_total += s.sentences;
                e.tokens_flagged += it->second[m].tokens;
                e.tokens_total += s.tokens;
                total += source_total->second;
                const double own = s.tokens == 0 ? 0.0 : static_cast<double>(it->second[m].tokens) / static_cast<double>(s.tokens);
                e.per_source_tokens += extrapolate(own, source_total->second);
            }
            e.proportion = e.tokens_total == 0 ? 0.0 : static_cast<double>(e.tokens_flagged) / static_cast<double>(e.tokens_total);
            e.extrapolated_tokens = extrapolate(e.proportion, total);
            out.push_back(e);
        }
    }
    return out;
}

AuditResult run_audit(const Corpus& corpus, const AuditConfig& config, const IdentifierFactory& classifier_a,
                      const IdentifierFactory& classifier_b, unsigned jobs)
{
    config.validate();
    AuditResult result;
    const std::set<std::string> contaminants(config.contaminants.begin(), config.contaminants.end());
    for (const auto& [language, documents] : corpus) {
        if (contaminants.count(language))
            continue;
        LanguageSample sample = sample_language(language, documents, config.token_budget, config.seed);
        if (sample.exhausted)
            result.warnings.push_back(fmt::format("{}: {} ({} of {} budgeted tokens available)", language, to_string(ErrorCode::SourceExhausted),
                                                  sample.tokens, config.token_budget));
        result.sources.push_back(classify_and_count(language, sample.documents, config, classifier_a, classifier_b, jobs));
        if (result.sources.back().classifier_errors > 0)
            result.warnings.push_back(fmt::format("{}: {} classifier errors excluded", language, result.sources.back().classifier_errors));
        result.samples.push_back(std::move(sample));
    }
    result.estimates = estimate(result.sources, config);
    return result;
}

std::string estimate_table(const std::vector<ContaminationEstimate>& estimates)
{
    std::vector<std::string> contaminants;
    for (const auto& e : estimates)
        if (std::find(contaminants.begin(), contaminants.end(), e.contaminant) == contaminants.end())
            contaminants.push_back(e.contaminant);
    std::string out = "mode";
    for (const auto& c : contaminants)
        out += fmt::format("\t{}_proportion\t{}_tokens", c, c);
    out += '\n';
    for (auto mode : kAuditModes) {
        out += to_string(mode);
        for (const auto& c : contaminants)
            for (const auto& e : estimates)
                if (e.contaminant == c && e.mode == mode)
                    out += fmt::format("\t{}\t{}", format_double(e.proportion), e.extrapolated_tokens);
        out += '\n';
    }
    return out;
}

std::string source_table(const std::vector<SourceCounts>& sources)
{
    std::string out = "source\tcontaminant\tmode\tdocuments\tparagraphs\tparagraphs_passed\tsentences\ttokens\tsentences_flagged\ttokens_flagged\tproportion\n";
    for (const auto& s : sources)
        for (const auto& [contaminant, modes] : s.flagged)
            for (auto mode : kAuditModes) {
                const auto& f = modes[static_cast<size_t>(mode)];
                const double p = s.tokens == 0 ? 0.0 : static_cast<double>(f.tokens) / static_cast<double>(s.tokens);
                out += fmt::format("{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\n", s.language, contaminant, to_string(mode), s.documents, s.paragraphs,
                                   s.paragraphs_passed, s.sentences, s.tokens, f.sentences, f.tokens, format_double(p));
            }
    return out;
}

} // namespace xlprime
