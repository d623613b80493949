#pragma once

#include "xlprime/identifier.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace xlprime {

struct AuditConfig {
    size_t token_budget = 100'000'000; // per source language, whitespace tokens, counted at sampling
    double paragraph_threshold = 0.5;
    double threshold_a = 0.9;
    double threshold_b = 0.7;
    std::vector<std::string> contaminants;
    std::map<std::string, double> corpus_tokens; // per source language
    uint64_t seed = 0;

    /// Throws Error(OutOfRange) for thresholds outside (0, 1] or a zero budget.
    void validate() const;
};

/// Per-language document lists; documents are non-empty and keep their text.
using Corpus = std::map<std::string, std::vector<std::string>>;

/// Reads `<language>.txt` files from a directory. Documents are separated by
/// one or more blank lines. Throws Error(MalformedFile).
Corpus load_corpus(const std::filesystem::path& directory);

size_t whitespace_token_count(std::string_view text);

struct LanguageSample {
    std::string language;
    std::vector<std::string> documents; // in sampled order
    size_t tokens = 0;
    bool exhausted = false; // source ran out before the budget
};

/// Seeded permutation of the documents, taken in order until the token count
/// reaches the budget. Identical for identical (documents, language, seed).
LanguageSample sample_language(const std::string& language, const std::vector<std::string>& documents, size_t budget, uint64_t seed);

struct Paragraph {
    std::string text;
    std::vector<std::string> sentences;
};

/// Paragraphs are the non-empty lines; sentences are the trimmed, non-empty
/// pieces between U+002E characters.
std::vector<Paragraph> segment(std::string_view document);

enum class AuditMode { ClassifierA, ClassifierB, Consensus };
std::string to_string(AuditMode mode);
inline constexpr std::array<AuditMode, 3> kAuditModes = {AuditMode::ClassifierA, AuditMode::ClassifierB, AuditMode::Consensus};

struct FlagCount {
    size_t sentences = 0;
    size_t tokens = 0;

    friend bool operator==(const FlagCount&, const FlagCount&) = default;
};

struct SourceCounts {
    std::string language;
    size_t documents = 0;
    size_t paragraphs = 0;
    size_t paragraphs_passed = 0;
    size_t sentences = 0; // in passed paragraphs, excluding classifier errors
    size_t tokens = 0;    // token mass of those sentences
    size_t classifier_errors = 0;
    std::map<std::string, std::array<FlagCount, 3>> flagged; // contaminant -> mode

    friend bool operator==(const SourceCounts&, const SourceCounts&) = default;
};

using IdentifierFactory = std::function<std::unique_ptr<LanguageIdentifier>()>;

IdentifierFactory make_identifier_factory(const std::string& endpoint);

/// Sentence flags for one contaminant from top-1 results: the confidence for
/// a language other than the top one counts as zero.
std::array<bool, 3> sentence_flags(const LidResult& a, const LidResult& b, const std::string& contaminant, const AuditConfig& config);

/// Counts for one source language. Documents are classified in parallel
/// across `jobs` workers, each with its own identifiers, and summed in
/// document order. Throws Error(ClassifierUnreachable); other per-call
/// errors are counted and the paragraph or sentence excluded.
SourceCounts classify_and_count(const std::string& language, const std::vector<std::string>& documents, const AuditConfig& config,
                                const IdentifierFactory& classifier_a, const IdentifierFactory& classifier_b, unsigned jobs = 1);

/// round(proportion * total). Throws Error(OutOfRange).
int64_t extrapolate(double proportion, double total_tokens);

struct ContaminationEstimate {
    std::string contaminant;
    AuditMode mode = AuditMode::Consensus;
    size_t sentences_flagged = 0;
    size_t sentences_total = 0;
    size_t tokens_flagged = 0;
    size_t tokens_total = 0;
    double proportion = 0.0;           // pooled flagged / passed token mass
    int64_t extrapolated_tokens = 0;   // proportion x sum of source totals
    int64_t per_source_tokens = 0;     // sum over sources of their own proportion x total
};

struct AuditResult {
    std::vector<LanguageSample> samples;
    std::vector<SourceCounts> sources;
    std::vector<ContaminationEstimate> estimates; // contaminant-major, mode order
    std::vector<std::string> warnings;
};

/// Samples every corpus language except the contaminants themselves, counts,
/// and pools per contaminant over the other source languages.
AuditResult run_audit(const Corpus& corpus, const AuditConfig& config, const IdentifierFactory& classifier_a,
                      const IdentifierFactory& classifier_b, unsigned jobs = 1);

/// Pools per-source counts into estimates. Throws Error(Usage) when a source
/// language has no configured corpus total.
std::vector<ContaminationEstimate> estimate(const std::vector<SourceCounts>& sources, const AuditConfig& config);

/// Modes as rows; per contaminant a proportion and a token column.
std::string estimate_table(const std::vector<ContaminationEstimate>& estimates);

/// One row per (source, contaminant, mode).
std::string source_table(const std::vector<SourceCounts>& sources);

} // namespace xlprime
