#pragma once

#include "xlprime/construction.hpp"
#include "xlprime/gateway.hpp"
#include "xlprime/stimulus.hpp"

#include <array>
#include <string>
#include <string_view>
#include <vector>

namespace xlprime {

/// Normalized probabilities of the two targets after one prime.
struct NormalizedPair {
    double focus;
    double other;
};

/// exp(lp_focus) / (exp(lp_focus) + exp(lp_other)), evaluated as a logistic
/// of the logit difference. Throws Error(NonFiniteInput).
double normalize(double lp_focus, double lp_other);

/// Both members come from one exponential of d = lp_other - lp_focus:
/// swapping the arguments swaps the members bit-for-bit, and
/// focus + other == 1 to within one ulp.
NormalizedPair normalize_pair(double lp_focus, double lp_other);

struct NormalizedObservation {
    std::string item_id;
    Variant prime_variant = Variant::DO;
    double p_focus = 0.5;
    double logit_focus = 0.0; // lp_focus - lp_other

    friend bool operator==(const NormalizedObservation&, const NormalizedObservation&) = default;
};

/// Two observations per item (one per prime variant), ordered by
/// (item_id, prime variant). Throws Error(MissingScore) naming the item.
std::vector<NormalizedObservation> build_observations(const Experiment& experiment, const std::vector<ScoredItem>& scored);

/// Same, with an explicit focus (used to check the complement identity).
std::vector<NormalizedObservation> build_observations(const Experiment& experiment, const std::vector<ScoredItem>& scored, Variant focus);

struct ConditionSummary {
    Variant prime_variant = Variant::DO;
    size_t n = 0;
    double mean = 0.0;
    double se = 0.0; // standard error across items

    friend bool operator==(const ConditionSummary&, const ConditionSummary&) = default;
};

/// Mean and standard error of p_focus per prime condition, in variant order.
std::array<ConditionSummary, 2> summarize_conditions(const std::vector<NormalizedObservation>& observations, Family family);

/// mean p_focus after a congruent prime minus mean after an incongruent one;
/// positive means priming toward the focus construction.
double priming_effect(const std::vector<NormalizedObservation>& observations, Variant focus);

struct ObservationRow {
    std::string experiment_id;
    NormalizedObservation observation;

    friend bool operator==(const ObservationRow&, const ObservationRow&) = default;
};

/// Tab-separated exchange table: experiment_id, item_id, prime_variant, p_focus.
/// Lines starting with '#' are comments.
std::string write_observation_table(const std::vector<ObservationRow>& rows, std::string_view comment = {});
std::vector<ObservationRow> read_observation_table(std::string_view text);

} // namespace xlprime
