#pragma once

#include "xlprime/construction.hpp"
#include "xlprime/lmm.hpp"
#include "xlprime/priming.hpp"

#include <optional>
#include <string>
#include <vector>

namespace xlprime {

/// One experiment x scorer cell ready for testing.
struct BatteryCell {
    std::string experiment_id;
    std::string scorer_id;
    std::string study_tag;
    std::string prime_language;
    std::string target_language;
    Variant focus_variant = Variant::PO;
    Direction human_direction = Direction::None;
    std::vector<NormalizedObservation> observations;
};

/// Scope of one Benjamini-Hochberg family.
enum class CorrectionFamily { Global, PerScorer, PerExperiment, PerStudy };

std::string to_string(CorrectionFamily family);
std::optional<CorrectionFamily> parse_correction_family(std::string_view text);

struct BatteryOptions {
    CorrectionFamily family = CorrectionFamily::Global;
    bool logit = false; // fit logit(p_focus) instead of p_focus
    double alpha = 0.05;
    unsigned jobs = 1;
};

struct PrimingTestResult {
    std::string experiment_id;
    std::string scorer_id;
    std::string study_tag;
    std::string prime_language;
    std::string target_language;
    double beta1 = 0.0; // congruent minus incongruent
    double se = 0.0;
    double f = 0.0;
    double df1 = 1.0;
    double df2 = 0.0;
    double p = 1.0;
    double p_adj = 1.0;
    Direction direction = Direction::Positive; // never None
    std::optional<bool> replicates_human;      // empty iff no human direction
    bool significant = false;                  // p_adj < alpha
    size_t family_size = 0;
    LmmFit fit;
};

struct BatteryOutcome {
    std::vector<PrimingTestResult> results; // input order, failed cells omitted
    std::vector<std::string> warnings;
};

/// x = 1 when the prime matches the focus variant.
void design_for(const BatteryCell& cell, bool logit, std::vector<double>& y, std::vector<double>& x, std::vector<std::string>& group);

/// Fits and tests every cell, then adjusts p within each correction family.
/// A cell whose fit fails is dropped with a warning and shrinks its family.
BatteryOutcome run_battery(const std::vector<BatteryCell>& cells, const BatteryOptions& options = {});

} // namespace xlprime
