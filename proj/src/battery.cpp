#include "xlprime/battery.hpp"
#include "xlprime/error.hpp"
#include "xlprime/fdr.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <atomic>
#include <map>
#include <thread>

namespace xlprime {

std::string to_string(CorrectionFamily family)
{
    switch (family) {
    case CorrectionFamily::Global: return "global";
    case CorrectionFamily::PerScorer: return "scorer";
    case CorrectionFamily::PerExperiment: return "experiment";
    case CorrectionFamily::PerStudy: return "study";
    }
    return "global";
}

std::optional<CorrectionFamily> parse_correction_family(std::string_view text)
{
    for (auto f : {CorrectionFamily::Global, CorrectionFamily::PerScorer, CorrectionFamily::PerExperiment, CorrectionFamily::PerStudy})
        if (to_string(f) == text)
            return f;
    return std::nullopt;
}

void design_for(const BatteryCell& cell, bool logit, std::vector<double>& y, std::vector<double>& x, std::vector<std::string>& group)
{
    y.clear(), x.clear(), group.clear();
    for (const auto& o : cell.observations) {
        y.push_back(logit ? o.logit_focus : o.p_focus);
        x.push_back(o.prime_variant == cell.focus_variant ? 1.0 : 0.0);
        group.push_back(o.item_id);
    }
}

namespace {

std::string family_key(const BatteryCell& cell, CorrectionFamily family)
{
    switch (family) {
    case CorrectionFamily::Global: return {};
    case CorrectionFamily::PerScorer: return cell.scorer_id;
    case CorrectionFamily::PerExperiment: return cell.experiment_id;
    case CorrectionFamily::PerStudy: return cell.study_tag;
    }
    return {};
}

struct CellOutcome {
    std::optional<PrimingTestResult> result;
    std::string warning;
};

CellOutcome test_cell(const BatteryCell& cell, const BatteryOptions& options)
{
    CellOutcome out;
    try {
        std::vector<double> y, x;
        std::vector<std::string> group;
        design_for(cell, options.logit, y, x, group);
        PrimingTestResult r;
        r.experiment_id = cell.experiment_id;
        r.scorer_id = cell.scorer_id;
        r.study_tag = cell.study_tag;
        r.prime_language = cell.prime_language;
        r.target_language = cell.target_language;
        r.fit = fit_lmm(y, x, group);
        const FTest t = f_test(r.fit);
        r.beta1 = r.fit.beta[1];
        r.se = r.fit.se_beta1;
        r.f = t.f;
        r.df1 = t.df1;
        r.df2 = t.df2;
        r.p = t.p;
        r.direction = r.beta1 < 0.0 ? Direction::Negative : Direction::Positive;
        if (cell.human_direction != Direction::None)
            r.replicates_human = r.direction == cell.human_direction;
        out.result = std::move(r);
    } catch (const Error& e) {
        out.warning = fmt::format("{} x {}: excluded ({})", cell.experiment_id, cell.scorer_id, e.what());
    }
    return out;
}

} // namespace

BatteryOutcome run_battery(const std::vector<BatteryCell>& cells, const BatteryOptions& options)
{
    std::vector<CellOutcome> outcomes(cells.size());
    const unsigned jobs = std::max(1u, std::min<unsigned>(options.jobs, static_cast<unsigned>(cells.size())));
    if (jobs <= 1) {
        for (size_t i = 0; i < cells.size(); ++i)
            outcomes[i] = test_cell(cells[i], options);
    } else {
        std::atomic<size_t> next{0};
        std::vector<std::thread> pool;
        for (unsigned j = 0; j < jobs; ++j)
            pool.emplace_back([&] {
                for (size_t i; (i = next.fetch_add(1)) < cells.size();)
                    outcomes[i] = test_cell(cells[i], options);
            });
        for (auto& t : pool)
            t.join();
    }

    BatteryOutcome battery;
    std::vector<size_t> source;
    for (size_t i = 0; i < cells.size(); ++i) {
        if (outcomes[i].result) {
            battery.results.push_back(std::move(*outcomes[i].result));
            source.push_back(i);
        } else {
            battery.warnings.push_back(std::move(outcomes[i].warning));
        }
    }

    std::map<std::string, std::vector<size_t>> families;
    for (size_t k = 0; k < battery.results.size(); ++k)
        families[family_key(cells[source[k]], options.family)].push_back(k);
    for (const auto& [key, members] : families) {
        std::vector<double> p;
        for (size_t k : members)
            p.push_back(battery.results[k].p);
        const auto q = bh_adjust(p);
        for (size_t j = 0; j < members.size(); ++j) {
            auto& r = battery.results[members[j]];
            r.p_adj = q[j];
            r.family_size = members.size();
            r.significant = r.p_adj < options.alpha;
        }
    }
    return battery;
}

} // namespace xlprime
