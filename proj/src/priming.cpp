#include "xlprime/priming.hpp"
#include "xlprime/error.hpp"
#include "xlprime/text.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>

namespace xlprime {

NormalizedPair normalize_pair(double lp_focus, double lp_other)
{
    if (!std::isfinite(lp_focus) || !std::isfinite(lp_other))
        throw Error(ErrorCode::NonFiniteInput, fmt::format("logprobs must be finite (got {}, {})", lp_focus, lp_other));
    const double d = lp_other - lp_focus;
    // exp of a non-positive argument only: no overflow for any finite input.
    if (d >= 0.0) {
        const double e = std::exp(-d);
        const double s = 1.0 + e;
        return {e / s, 1.0 / s};
    }
    const double e = std::exp(d);
    const double s = 1.0 + e;
    return {1.0 / s, e / s};
}

double normalize(double lp_focus, double lp_other) { return normalize_pair(lp_focus, lp_other).focus; }

std::vector<NormalizedObservation> build_observations(const Experiment& experiment, const std::vector<ScoredItem>& scored)
{
    return build_observations(experiment, scored, experiment.focus_variant);
}

std::vector<NormalizedObservation> build_observations(const Experiment& experiment, const std::vector<ScoredItem>& scored, Variant focus)
{
    if (!belongs_to(focus, experiment.family))
        throw Error(ErrorCode::SchemaViolation, "focus variant outside the experiment's family");
    std::map<std::string, const ScoredItem*> by_id;
    for (const auto& s : scored)
        by_id.emplace(s.item_id, &s);

    std::vector<std::string> ids;
    for (const auto& item : experiment.items)
        ids.push_back(item.item_id);
    std::sort(ids.begin(), ids.end());

    const Variant other = other_variant(focus);
    std::vector<NormalizedObservation> out;
    out.reserve(ids.size() * 2);
    for (const auto& id : ids) {
        const auto it = by_id.find(id);
        if (it == by_id.end())
            throw Error(ErrorCode::MissingScore, fmt::format("experiment {} item {} has no scored matrix", experiment.experiment_id, id));
        const ScoredItem& s = *it->second;
        for (auto prime : variants_of(experiment.family)) {
            const double lp_focus = s.at(prime, focus);
            const double lp_other = s.at(prime, other);
            out.push_back({id, prime, normalize(lp_focus, lp_other), lp_focus - lp_other});
        }
    }
    return out;
}

std::array<ConditionSummary, 2> summarize_conditions(const std::vector<NormalizedObservation>& observations, Family family)
{
    std::array<ConditionSummary, 2> out{};
    const auto variants = variants_of(family);
    for (int k = 0; k < 2; ++k) {
        std::vector<double> values;
        for (const auto& o : observations)
            if (o.prime_variant == variants[k])
                values.push_back(o.p_focus);
        out[k].prime_variant = variants[k];
        out[k].n = values.size();
        if (values.empty())
            continue;
        double sum = 0.0;
        for (double v : values)
            sum += v;
        out[k].mean = sum / static_cast<double>(values.size());
        if (values.size() > 1) {
            double ss = 0.0;
            for (double v : values)
                ss += (v - out[k].mean) * (v - out[k].mean);
            out[k].se = std::sqrt(ss / static_cast<double>(values.size() - 1) / static_cast<double>(values.size()));
        }
    }
    return out;
}

double priming_effect(const std::vector<NormalizedObservation>& observations, Variant focus)
{
    const auto s = summarize_conditions(observations, family_of(focus));
    return s[variant_index(focus)].mean - s[1 - variant_index(focus)].mean;
}

std::string write_observation_table(const std::vector<ObservationRow>& rows, std::string_view comment)
{
    std::string out;
    if (!comment.empty())
        out += fmt::format("# {}\n", comment);
    out += "experiment_id\titem_id\tprime_variant\tp_focus\n";
    for (const auto& r : rows)
        out += fmt::format("{}\t{}\t{}\t{}\n", r.experiment_id, r.observation.item_id, to_string(r.observation.prime_variant),
                           format_double(r.observation.p_focus));
    return out;
}

std::vector<ObservationRow> read_observation_table(std::string_view text)
{
    std::vector<ObservationRow> rows;
    bool header_seen = false;
    size_t number = 0;
    for (auto line : split(text, '\n')) {
        ++number;
        if (!line.empty() && line.back() == '\r')
            line.remove_suffix(1);
        if (line.empty() || line.front() == '#')
            continue;
        const auto f = split(line, '\t');
        if (!header_seen) {
            if (f.size() != 4 || f[0] != "experiment_id" || f[1] != "item_id" || f[2] != "prime_variant" || f[3] != "p_focus")
                throw Error(ErrorCode::MalformedFile, "observation table must start with experiment_id/item_id/prime_variant/p_focus");
            header_seen = true;
            continue;
        }
        if (f.size() != 4)
            throw Error(ErrorCode::MalformedFile, fmt::format("observation table line {}: expected 4 fields", number));
        ObservationRow row;
        row.experiment_id = std::string(f[0]);
        row.observation.item_id = std::string(f[1]);
        const auto v = parse_variant(f[2]);
        double p = -1;
        const auto [ptr, ec] = std::from_chars(f[3].data(), f[3].data() + f[3].size(), p);
        if (!v || ec != std::errc{} || ptr != f[3].data() + f[3].size() || !(p >= 0.0 && p <= 1.0))
            throw Error(ErrorCode::MalformedFile, fmt::format("observation table line {}: bad variant or probability", number));
        row.observation.prime_variant = *v;
        row.observation.p_focus = p;
        // The logit is not exported; recover it from the probability.
        row.observation.logit_focus = std::log(p) - std::log1p(-p);
        rows.push_back(std::move(row));
    }
    return rows;
}

} // namespace xlprime
