#pragma once

#include "xlprime/construction.hpp"
#include "xlprime/error.hpp"

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace xlprime {

/// One experimental item. Sentences are indexed by variant_index() within the
/// experiment's family, so "exactly two variants" holds by construction.
struct StimulusItem {
    std::string item_id;
    std::array<std::string, 2> primes;
    std::array<std::string, 2> targets;

    const std::string& prime(Variant v) const { return primes[variant_index(v)]; }
    const std::string& target(Variant v) const { return targets[variant_index(v)]; }

    friend bool operator==(const StimulusItem&, const StimulusItem&) = default;
};

struct Experiment {
    std::string experiment_id;
    std::string study_tag;
    std::string prime_language;
    std::string target_language;
    Family family = Family::Dative;
    Variant focus_variant = Variant::PO;
    Direction human_direction = Direction::None;
    // Optional human proportions of focus responses per prime variant, for
    // figure overlays only.
    std::optional<std::array<double, 2>> human_means;
    std::vector<StimulusItem> items;

    Construction focus() const { return {family, focus_variant}; }

    friend bool operator==(const Experiment&, const Experiment&) = default;
};

struct StimulusIssue {
    ErrorCode code;
    std::string source;
    size_t line = 0;
    std::string experiment_id;
    std::string item_id;
    std::string field;
    std::string message;

    std::string describe() const;
};

/// Every problem found while loading, not only the first one.
class StimulusError : public Error {
public:
    explicit StimulusError(std::vector<StimulusIssue> issues);

    const std::vector<StimulusIssue>& issues() const noexcept { return issues_; }

private:
    std::vector<StimulusIssue> issues_;
};

/// Parses stimulus text (see docs/stimulus-format.md). `source` only labels
/// issue locations.
std::vector<Experiment> parse_experiments(std::string_view text, std::string_view source = "<memory>");

std::vector<Experiment> load_experiments(const std::string& path);

/// Loads several files; experiment ids must be unique across all of them.
std::vector<Experiment> load_experiments(const std::vector<std::string>& paths);

/// Re-checks all type invariants; returns the violations (empty when valid).
std::vector<StimulusIssue> validate(const Experiment& experiment);

inline constexpr std::string_view kReversedSuffix = "__rev";

/// Primes and targets swapped per item, languages swapped, no human baseline.
Experiment reverse_experiment(const Experiment& experiment);

/// Serializes back to the stimulus file format; parse_experiments(write(e)) == e.
std::string write_experiments(const std::vector<Experiment>& experiments);

} // namespace xlprime
