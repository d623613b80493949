#include "xlprime/report.hpp"
#include "xlprime/error.hpp"

#include <json.hpp>
#include <fmt/format.h>

#include <algorithm>
#include <charconv>
#include <cmath>

namespace xlprime {

using nlohmann::ordered_json;

namespace {

constexpr std::string_view kTest = "two-sided Wald F";
constexpr std::string_view kDf = "df1 = 1, df2 = n_obs - n_items - 1";

std::string_view scale_name(bool logit) { return logit ? "logit" : "probability"; }

std::string yes_no(bool b) { return b ? "yes" : "no"; }

std::string replicates(const PrimingTestResult& r) { return r.replicates_human ? yes_no(*r.replicates_human) : "NA"; }

std::string optional_number(const std::optional<double>& v) { return v ? report_number(*v) : "NA"; }

std::string header_comments(const AnalysisReport& report)
{
    return fmt::format("# manifest_digest: {}\n# archive_digest: {}\n# test: {}; {}; family: {}; alpha: {}; scale: {}\n", report.manifest_digest, report.archive_digest, kTest,
                       kDf, to_string(report.family), report_number(report.alpha), scale_name(report.logit));
}

ordered_json rounded(double v) { return ordered_json(report_round(v)); }

template <typename T>
T required(const ordered_json& j, const char* key)
{
    return j.at(key).get<T>();
}

Variant variant_field(const ordered_json& j, const char* key)
{
    const auto v = parse_variant(required<std::string>(j, key));
    if (!v)
        throw Error(ErrorCode::MalformedFile, fmt::format("results: bad variant in '{}'", key));
    return *v;
}

} // namespace

const ExperimentSummary* AnalysisReport::experiment(const std::string& id) const
{
    for (const auto& e : experiments)
        if (e.experiment_id == id)
            return &e;
    return nullptr;
}

const PrimingTestResult* AnalysisReport::result(const std::string& experiment_id, const std::string& scorer_id) const
{
    for (const auto& r : results)
        if (r.experiment_id == experiment_id && r.scorer_id == scorer_id)
            return &r;
    return nullptr;
}

Analysis analyze_archive(const Archive& archive, const AnalyzeOptions& options)
{
    std::vector<const Experiment*> selected;
    if (options.experiments.empty()) {
        for (const auto& e : archive.experiments)
            selected.push_back(&e);
    } else {
        for (const auto& id : options.experiments)
            selected.push_back(&archive.experiment(id));
    }
    std::vector<std::string> ids;
    for (const auto* e : selected)
        ids.push_back(e->experiment_id);

    if (const auto missing = archive.missing(ids); !missing.empty()) {
        std::string message = fmt::format("{} unscored cells:", missing.size());
        for (const auto& m : missing)
            message += "\n  " + m.describe();
        throw Error(ErrorCode::IncompleteArchive, message);
    }

    Analysis analysis;
    AnalysisReport& report = analysis.report;
    report.archive_digest = archive.manifest.digest();
    report.family = options.battery.family;
    report.alpha = options.battery.alpha;
    report.logit = options.battery.logit;
    for (const auto& s : archive.scorers) {
        report.scorers.push_back(s.scorer_id);
        analysis.observations.push_back({s.scorer_id, {}});
    }

    std::vector<BatteryCell> cells;
    for (const auto* e : selected) {
        report.experiments.push_back({e->experiment_id, e->study_tag, e->prime_language, e->target_language, e->family, e->focus_variant, e->human_direction, e->items.size()});
        if (e->human_means) {
            const auto variants = variants_of(e->family);
            for (int i = 0; i < 2; ++i)
                report.conditions.push_back({e->experiment_id, std::string(kHumanSource), variants[i], 0, (*e->human_means)[i], std::nullopt});
        }
        for (size_t s = 0; s < archive.scorers.size(); ++s) {
            const auto& scorer_id = archive.scorers[s].scorer_id;
            BatteryCell cell{e->experiment_id, scorer_id, e->study_tag, e->prime_language, e->target_language, e->focus_variant, e->human_direction, {}};
            cell.observations = build_observations(*e, archive.scored_items(scorer_id, e->experiment_id));
            for (const auto& c : summarize_conditions(cell.observations, e->family))
                report.conditions.push_back({e->experiment_id, scorer_id, c.prime_variant, c.n, c.mean, c.se});
            for (const auto& o : cell.observations)
                analysis.observations[s].rows.push_back({e->experiment_id, o});
            cells.push_back(std::move(cell));
        }
    }

    auto outcome = run_battery(cells, options.battery);
    report.results = std::move(outcome.results);
    report.warnings = std::move(outcome.warnings);
    return analysis;
}

std::string report_number(double value)
{
    if (!std::isfinite(value))
        return "NA";
    if (value == 0.0)
        return "0";
    return fmt::format("{:.12g}", value);
}

double report_round(double value)
{
    if (!std::isfinite(value))
        return value;
    const std::string text = report_number(value);
    double out = 0;
    std::from_chars(text.data(), text.data() + text.size(), out);
    return out;
}

std::string results_tsv(const AnalysisReport& report)
{
    std::string out = header_comments(report);
    out += "experiment_id\tscorer_id\tstudy_tag\tprime_language\ttarget_language\tfocus_variant\tbeta1\tse\tF\tdf1\tdf2\tp\tp_adj\tfamily_size\tdirection\thuman_direction\treplicates_human\tsignificant\n";
    for (const auto& r : report.results) {
        const auto* e = report.experiment(r.experiment_id);
        out += fmt::format("{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\n", r.experiment_id, r.scorer_id, r.study_tag, r.prime_language, r.target_language,
                           e ? to_string(e->focus_variant) : "NA", report_number(r.beta1), report_number(r.se), report_number(r.f), report_number(r.df1), report_number(r.df2),
                           report_number(r.p), report_number(r.p_adj), r.family_size, to_string(r.direction), e ? to_string(e->human_direction) : "NA", replicates(r),
                           yes_no(r.significant));
    }
    return out;
}

std::string conditions_tsv(const AnalysisReport& report)
{
    std::string out = header_comments(report);
    out += "experiment_id\tsource\tprime_variant\tn\tmean_p_focus\tse\n";
    for (const auto& c : report.conditions)
        out += fmt::format("{}\t{}\t{}\t{}\t{}\t{}\n", c.experiment_id, c.source, to_string(c.prime_variant), c.source == kHumanSource ? "NA" : std::to_string(c.n),
                           report_number(c.mean), optional_number(c.se));
    return out;
}

std::string results_markdown(const AnalysisReport& report)
{
    std::string out = "# Structural priming results\n\n";
    out += fmt::format("- manifest digest: `{}`\n- archive digest: `{}`\n- test: {} ({})\n- correction: Benjamini-Hochberg, family `{}`, alpha {}\n- response scale: {}\n",
                       report.manifest_digest, report.archive_digest, kTest, kDf, to_string(report.family), report_number(report.alpha), scale_name(report.logit));
    for (const auto& e : report.experiments) {
        out += fmt::format("\n## {}\n\n", e.experiment_id);
        out += fmt::format("{} to {}, {} alternation, focus {}, {} items, study `{}`, human direction {}.\n\n", e.prime_language, e.target_language, to_string(e.family),
                           to_string(e.focus_variant), e.n_items, e.study_tag, to_string(e.human_direction));
        out += "| scorer | beta1 | SE | F | df | p | p_adj | direction | replicates human |\n|---|---|---|---|---|---|---|---|---|\n";
        for (const auto& r : report.results)
            if (r.experiment_id == e.experiment_id)
                out += fmt::format("| {} | {} | {} | {} | {}, {} | {} | {}{} | {} | {} |\n", r.scorer_id, report_number(r.beta1), report_number(r.se), report_number(r.f),
                                   report_number(r.df1), report_number(r.df2), report_number(r.p), report_number(r.p_adj), r.significant ? " (sig.)" : "",
                                   to_string(r.direction), replicates(r));
        out += "\n| source | prime | n | mean P(focus) | SE |\n|---|---|---|---|---|\n";
        for (const auto& c : report.conditions)
            if (c.experiment_id == e.experiment_id)
                out += fmt::format("| {} | {} | {} | {} | {} |\n", c.source, to_string(c.prime_variant), c.source == kHumanSource ? "NA" : std::to_string(c.n),
                                   report_number(c.mean), optional_number(c.se));
    }
    if (!report.warnings.empty()) {
        out += "\n## Warnings\n\n";
        for (const auto& w : report.warnings)
            out += "- " + w + "\n";
    }
    return out;
}

std::string results_json(const AnalysisReport& report)
{
    ordered_json j;
    j["format"] = "xlprime-results";
    j["version"] = 1;
    j["manifest_digest"] = report.manifest_digest;
    j["archive_digest"] = report.archive_digest;
    j["test"] = kTest;
    j["df"] = kDf;
    j["family"] = to_string(report.family);
    j["alpha"] = rounded(report.alpha);
    j["scale"] = scale_name(report.logit);
    j["experiments"] = ordered_json::array();
    for (const auto& e : report.experiments)
        j["experiments"].push_back({{"experiment_id", e.experiment_id},
                                    {"study_tag", e.study_tag},
                                    {"prime_language", e.prime_language},
                                    {"target_language", e.target_language},
                                    {"family", to_string(e.family)},
                                    {"focus_variant", to_string(e.focus_variant)},
                                    {"human_direction", to_string(e.human_direction)},
                                    {"n_items", e.n_items}});
    j["scorers"] = report.scorers;
    j["results"] = ordered_json::array();
    for (const auto& r : report.results)
        j["results"].push_back({{"experiment_id", r.experiment_id},
                                {"scorer_id", r.scorer_id},
                                {"study_tag", r.study_tag},
                                {"prime_language", r.prime_language},
                                {"target_language", r.target_language},
                                {"beta0", rounded(r.fit.beta[0])},
                                {"beta1", rounded(r.beta1)},
                                {"se", rounded(r.se)},
                                {"F", rounded(r.f)},
                                {"df1", rounded(r.df1)},
                                {"df2", rounded(r.df2)},
                                {"p", rounded(r.p)},
                                {"p_adj", rounded(r.p_adj)},
                                {"family_size", r.family_size},
                                {"direction", to_string(r.direction)},
                                {"replicates_human", r.replicates_human ? ordered_json(*r.replicates_human) : ordered_json(nullptr)},
                                {"significant", r.significant},
                                {"sigma_u2", rounded(r.fit.sigma_u2)},
                                {"sigma_e2", rounded(r.fit.sigma_e2)},
                                {"n_obs", r.fit.n_obs},
                                {"n_items", r.fit.n_items}});
    j["conditions"] = ordered_json::array();
    for (const auto& c : report.conditions)
        j["conditions"].push_back({{"experiment_id", c.experiment_id},
                                   {"source", c.source},
                                   {"prime_variant", to_string(c.prime_variant)},
                                   {"n", c.n},
                                   {"mean", rounded(c.mean)},
                                   {"se", c.se ? rounded(*c.se) : ordered_json(nullptr)}});
    j["warnings"] = report.warnings;
    return j.dump(2) + "\n";
}

AnalysisReport parse_results_json(std::string_view text)
{
    AnalysisReport report;
    try {
        const auto j = ordered_json::parse(text);
        if (j.at("format") != "xlprime-results" || j.at("version") != 1)
            throw Error(ErrorCode::MalformedFile, "not an xlprime results file (format/version)");
        report.manifest_digest = required<std::string>(j, "manifest_digest");
        report.archive_digest = required<std::string>(j, "archive_digest");
        const auto family = parse_correction_family(required<std::string>(j, "family"));
        if (!family)
            throw Error(ErrorCode::MalformedFile, "results: bad correction family");
        report.family = *family;
        report.alpha = required<double>(j, "alpha");
        report.logit = required<std::string>(j, "scale") == "logit";
        for (const auto& e : j.at("experiments")) {
            ExperimentSummary s;
            s.experiment_id = required<std::string>(e, "experiment_id");
            s.study_tag = required<std::string>(e, "study_tag");
            s.prime_language = required<std::string>(e, "prime_language");
            s.target_language = required<std::string>(e, "target_language");
            const auto fam = parse_family(required<std::string>(e, "family"));
            const auto dir = parse_direction(required<std::string>(e, "human_direction"));
            if (!fam || !dir)
                throw Error(ErrorCode::MalformedFile, fmt::format("results: bad experiment metadata for {}", s.experiment_id));
            s.family = *fam;
            s.focus_variant = variant_field(e, "focus_variant");
            s.human_direction = *dir;
            s.n_items = required<size_t>(e, "n_items");
            report.experiments.push_back(std::move(s));
        }
        report.scorers = j.at("scorers").get<std::vector<std::string>>();
        for (const auto& r : j.at("results")) {
            PrimingTestResult t;
            t.experiment_id = required<std::string>(r, "experiment_id");
            t.scorer_id = required<std::string>(r, "scorer_id");
            t.study_tag = required<std::string>(r, "study_tag");
            t.prime_language = required<std::string>(r, "prime_language");
            t.target_language = required<std::string>(r, "target_language");
            t.beta1 = required<double>(r, "beta1");
            t.se = required<double>(r, "se");
            t.f = required<double>(r, "F");
            t.df1 = required<double>(r, "df1");
            t.df2 = required<double>(r, "df2");
            t.p = required<double>(r, "p");
            t.p_adj = required<double>(r, "p_adj");
            t.family_size = required<size_t>(r, "family_size");
            const auto dir = parse_direction(required<std::string>(r, "direction"));
            if (!dir || *dir == Direction::None)
                throw Error(ErrorCode::MalformedFile, "results: bad direction");
            t.direction = *dir;
            if (!r.at("replicates_human").is_null())
                t.replicates_human = r.at("replicates_human").get<bool>();
            t.significant = required<bool>(r, "significant");
            t.fit.beta = {required<double>(r, "beta0"), t.beta1};
            t.fit.se_beta1 = t.se;
            t.fit.sigma_u2 = required<double>(r, "sigma_u2");
            t.fit.sigma_e2 = required<double>(r, "sigma_e2");
            t.fit.n_obs = required<size_t>(r, "n_obs");
            t.fit.n_items = required<size_t>(r, "n_items");
            report.results.push_back(std::move(t));
        }
        for (const auto& c : j.at("conditions")) {
            ConditionRow row;
            row.experiment_id = required<std::string>(c, "experiment_id");
            row.source = required<std::string>(c, "source");
            row.prime_variant = variant_field(c, "prime_variant");
            row.n = required<size_t>(c, "n");
            row.mean = required<double>(c, "mean");
            if (!c.at("se").is_null())
                row.se = c.at("se").get<double>();
            report.conditions.push_back(std::move(row));
        }
        report.warnings = j.at("warnings").get<std::vector<std::string>>();
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::MalformedFile, fmt::format("results: {}", e.what()));
    }
    return report;
}

std::string file_stem(std::string_view id)
{
    std::string out;
    for (char c : id)
        out += (std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.') ? c : '_';
    return out.empty() ? "_" : out;
}

} // namespace xlprime
