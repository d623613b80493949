#pragma once

#include "xlprime/archive.hpp"
#include "xlprime/battery.hpp"

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace xlprime {

struct AnalyzeOptions {
    BatteryOptions battery;
    std::vector<std::string> experiments; // empty selects all
};

struct ExperimentSummary {
    std::string experiment_id;
    std::string study_tag;
    std::string prime_language;
    std::string target_language;
    Family family = Family::Dative;
    Variant focus_variant = Variant::PO;
    Direction human_direction = Direction::None;
    size_t n_items = 0;

    friend bool operator==(const ExperimentSummary&, const ExperimentSummary&) = default;
};

inline constexpr std::string_view kHumanSource = "human";

/// Mean p_focus for one prime condition. `source` is a scorer id or "human";
/// human rows carry no n or standard error.
struct ConditionRow {
    std::string experiment_id;
    std::string source;
    Variant prime_variant = Variant::DO;
    size_t n = 0;
    double mean = 0.0;
    std::optional<double> se;

    friend bool operator==(const ConditionRow&, const ConditionRow&) = default;
};

/// One in-memory model behind every report format.
struct AnalysisReport {
    std::string manifest_digest;
    std::string archive_digest;
    CorrectionFamily family = CorrectionFamily::Global;
    double alpha = 0.05;
    bool logit = false;
    std::vector<ExperimentSummary> experiments;
    std::vector<std::string> scorers;
    std::vector<PrimingTestResult> results;
    std::vector<ConditionRow> conditions;
    std::vector<std::string> warnings;

    const ExperimentSummary* experiment(const std::string& id) const;
    const PrimingTestResult* result(const std::string& experiment_id, const std::string& scorer_id) const;
};

/// Observation rows of one scorer over the selected experiments.
struct ScorerObservations {
    std::string scorer_id;
    std::vector<ObservationRow> rows;
};

struct Analysis {
    AnalysisReport report;
    std::vector<ScorerObservations> observations;
};

/// Normalizes, fits and corrects every selected (experiment, scorer) cell.
/// Throws Error(IncompleteArchive) listing unscored cells, Error(Usage) for
/// unknown experiment ids.
Analysis analyze_archive(const Archive& archive, const AnalyzeOptions& options);

/// Shortest form with at most 12 significant digits; "NA" for non-finite.
std::string report_number(double value);

/// Rounds to what report_number prints, so structured output and tables agree.
double report_round(double value);

std::string results_tsv(const AnalysisReport& report);
std::string conditions_tsv(const AnalysisReport& report);
std::string results_markdown(const AnalysisReport& report);
std::string results_json(const AnalysisReport& report);

/// Inverse of results_json for the fields it carries. Throws Error(MalformedFile).
AnalysisReport parse_results_json(std::string_view text);

/// File-name-safe form of a scorer id.
std::string file_stem(std::string_view id);

} // namespace xlprime
