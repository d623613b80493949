#include <doctest.h>

#include "synthetic.hpp"

#include "xlprime/archive.hpp"
#include "xlprime/config.hpp"
#include "xlprime/conformance.hpp"
#include "xlprime/error.hpp"
#include "xlprime/figure.hpp"
#include "xlprime/mock.hpp"
#include "xlprime/report.hpp"

#include <filesystem>
#include <fstream>
#include <random>

using namespace xlprime;
namespace fs = std::filesystem;

namespace {

const std::string kData = XLPRIME_TEST_DATA;

ErrorCode error_code(const std::function<void()>& action)
{
    try {
        action();
    } catch (const Error& e) {
        return e.code();
    }
    FAIL("expected an Error");
    return ErrorCode::Usage;
}

struct Scored {
    Archive archive;
    std::string table;
};

// Archive scored through the gateway against a table with an injected effect.
Scored scored_archive(uint64_t seed, size_t items = 24)
{
    std::mt19937_64 rng(seed);
    const auto e = synthetic::dative_experiment("inj", items);
    Scored s;
    s.table = synthetic::injected_table(e, {}, rng);
    const auto dir = synthetic::fresh_dir("report-table");
    const auto path = (dir / "table.tsv").string();
    write_file_atomic(path, s.table);
    ScorerGateway gateway(make_channel_factory(parse_endpoint("mock:table:" + path)));
    Manifest m;
    m.command = "score";
    m.scorer_ids = {gateway.info().scorer_id};
    s.archive = plan_archive(m, {e}, {{"mock:table:" + path, gateway.info().scorer_id, gateway.info().tokenizer_fingerprint}});
    for (auto& entry : s.archive.entries) {
        const auto& item = *std::find_if(e.items.begin(), e.items.end(), [&](const StimulusItem& it) { return it.item_id == entry.item_id; });
        for (auto p : variants_of(e.family))
            for (auto t : variants_of(e.family))
                entry.logprob[variant_index(p)][variant_index(t)] = gateway.score({item.prime(p), item.target(t)}).response.total_logprob;
    }
    return s;
}

ExperimentFigure figure_fixture()
{
    ExperimentFigure f;
    f.experiment_id = "fx";
    f.title = "fx: en to nl, P(PO target)";
    f.manifest_digest = "0123abcd";
    f.focus_variant = Variant::PO;
    f.prime_variants = {Variant::DO, Variant::PO};
    f.groups.push_back({"human", {0.31, 0.46}, {}, ""});
    f.groups.push_back({"scorer-a", {0.4, 0.6}, {0.02, 0.03}, "**"});
    f.groups.push_back({"scorer-b", {0.5, 0.5}, {0.01, 0.01}, ""});
    return f;
}

// Attribute value of the n-th element containing `needle`.
std::string attribute(const std::string& svg, const std::string& needle, const std::string& name, size_t n = 0)
{
    size_t pos = 0;
    for (size_t i = 0; i <= n; ++i) {
        pos = svg.find(needle, i == 0 ? 0 : pos + 1);
        REQUIRE(pos != std::string::npos);
    }
    const size_t end = svg.find('>', pos);
    const size_t at = svg.find(" " + name + "=\"", pos);
    REQUIRE(at < end);
    const size_t start = at + name.size() + 3;
    return svg.substr(start, svg.find('"', start) - start);
}

} // namespace

TEST_CASE("config: key = value lines with a fixed vocabulary")
{
    const auto c = RunConfig::parse("# run\nscorer = mock:hash\nscorer = mock:uniform\nexperiments = a, b,,c\nalpha = 0.01\nreverse = yes\ncorpus_tokens.en = 5e11\n");
    CHECK(c.list("scorer") == std::vector<std::string>{"mock:hash", "mock:uniform"});
    CHECK(c.list("experiments") == std::vector<std::string>{"a", "b", "c"});
    CHECK(*c.number("alpha") == 0.01);
    CHECK(*c.flag("reverse"));
    CHECK(!c.get("seed"));
    CHECK(c.canonical({"scorer"}) == "alpha=0.01\ncorpus_tokens.en=5e11\nexperiments=a, b,,c\nreverse=yes\n");

    try {
        RunConfig::parse("seed = 1\n\nscorre = x\n", "run.cfg");
        FAIL("unknown key accepted");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::Usage);
        CHECK(e.detail().find("run.cfg:3") != std::string::npos);
    }
    CHECK(error_code([] { RunConfig::parse("seed\n"); }) == ErrorCode::Usage);
    CHECK(error_code([] { RunConfig::parse("alpha = x\n").number("alpha"); }) == ErrorCode::Usage);
    CHECK(error_code([] { RunConfig::parse("jobs = -1\n").count("jobs"); }) == ErrorCode::Usage);
    CHECK(error_code([] { RunConfig::parse("corpus_tokens. = 1\n"); }) == ErrorCode::Usage);
}

TEST_CASE("config: audit settings")
{
    const auto audit = audit_config(RunConfig::parse("token_budget = 5000\nthreshold_a = 1\ncontaminants = nl, pl\ncorpus_tokens.en = 5e11\nseed = 7\n"));
    CHECK(audit.token_budget == 5000);
    CHECK(audit.threshold_a == 1.0);
    CHECK(audit.threshold_b == 0.7);
    CHECK(audit.contaminants == std::vector<std::string>{"nl", "pl"});
    CHECK(audit.corpus_tokens.at("en") == 5e11);
    CHECK(audit.seed == 7);
    CHECK(error_code([] { audit_config(RunConfig::parse("threshold_b = 1.5\n")); }) == ErrorCode::Usage);
}

TEST_CASE("manifest digest ignores timestamps and tracks every other field")
{
    Manifest m;
    m.command = "score";
    m.config_digest = sha256_hex("x");
    m.inputs = {{"fixtures.tsv", sha256_hex("y")}};
    m.scorer_ids = {"mock:hash:0:0"};
    m.seed = 3;
    const auto digest = m.digest();
    CHECK(m.file_json("2026-01-01T00:00:00Z", "2026-01-01T00:00:01Z") != m.file_json("2027-01-01T00:00:00Z", "2027-01-01T00:00:01Z"));
    CHECK(m.file_json("a", "b").find(digest) != std::string::npos);
    CHECK(Manifest::from_canonical_json(m.canonical_json()) == m);
    auto changed = m;
    changed.seed = 4;
    CHECK(changed.digest() != digest);
    changed = m;
    changed.inputs[0].second = sha256_hex("z");
    CHECK(changed.digest() != digest);
}

TEST_CASE("archive round trip keeps unscored cells empty")
{
    auto s = scored_archive(1, 4);
    s.archive.entries[1].logprob[1][0].reset();
    const auto text = write_archive(s.archive);
    const auto back = read_archive(text);
    CHECK(back == s.archive);
    CHECK(write_archive(back) == text);
    const auto missing = back.missing();
    REQUIRE(missing.size() == 1);
    CHECK(missing[0].item_id == s.archive.entries[1].item_id);
    CHECK(missing[0].prime == Variant::PO);
    CHECK(missing[0].target == Variant::DO);
    CHECK(error_code([&] { back.scored_items(back.scorers[0].scorer_id, "inj"); }) == ErrorCode::IncompleteArchive);

    try {
        analyze_archive(back, {});
        FAIL("incomplete archive analyzed");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::IncompleteArchive);
        CHECK(e.detail().find(missing[0].describe()) != std::string::npos);
    }

    std::string tampered = text;
    tampered.replace(tampered.find("\"seed\": 0"), 9, "\"seed\": 9");
    CHECK(error_code([&] { read_archive(tampered); }) == ErrorCode::MalformedFile);
    CHECK(error_code([] { read_archive("{}"); }) == ErrorCode::MalformedFile);
}

TEST_CASE("analysis: injected effect, independent condition means, reproducibility")
{
    const auto s = scored_archive(11);
    const auto analysis = analyze_archive(s.archive, {});
    const auto& report = analysis.report;
    REQUIRE(report.results.size() == 1);
    const auto& r = report.results[0];
    CHECK(r.direction == Direction::Positive);
    CHECK(r.significant);
    CHECK(r.replicates_human == std::optional<bool>(true));
    CHECK(r.df2 == 24 * 2 - 24 - 1);

    // Condition means recomputed straight from the table rows.
    std::map<std::string, std::array<double, 2>> lp; // context -> {lp DO target, lp PO target}
    const auto e = s.archive.experiments[0];
    for (auto line : split(s.table, '\n')) {
        if (line.empty())
            continue;
        const auto f = split(line, '\t');
        const bool po_target = std::any_of(e.items.begin(), e.items.end(), [&](const StimulusItem& it) { return it.target(Variant::PO) == f[1]; });
        lp[std::string(f[0])][po_target ? 1 : 0] = std::stod(std::string(f[2]));
    }
    for (int v = 0; v < 2; ++v) {
        long double sum = 0;
        for (const auto& item : e.items) {
            const auto& row = lp.at(item.primes[v]);
            sum += std::exp(static_cast<long double>(row[1])) / (std::exp(static_cast<long double>(row[0])) + std::exp(static_cast<long double>(row[1])));
        }
        const auto it = std::find_if(report.conditions.begin(), report.conditions.end(),
                                     [&](const ConditionRow& c) { return c.source != kHumanSource && variant_index(c.prime_variant) == v; });
        REQUIRE(it != report.conditions.end());
        CHECK(std::abs(it->mean - static_cast<double>(sum / e.items.size())) < 1e-12);
        CHECK(it->n == 24);
    }

    const auto again = analyze_archive(read_archive(write_archive(s.archive)), {});
    CHECK(results_json(again.report) == results_json(report));
    CHECK(results_tsv(again.report) == results_tsv(report));
    REQUIRE(analysis.observations.size() == 1);
    CHECK(analysis.observations[0].rows.size() == 48);
}

TEST_CASE("analysis: unknown experiment selection is a usage error")
{
    const auto s = scored_archive(2, 4);
    AnalyzeOptions options;
    options.experiments = {"nope"};
    CHECK(error_code([&] { analyze_archive(s.archive, options); }) == ErrorCode::Usage);
}

TEST_CASE("report numbers: twelve significant digits, stable under re-rounding")
{
    CHECK(report_number(0.1) == "0.1");
    CHECK(report_number(1.0 / 3.0) == "0.333333333333");
    CHECK(report_number(0.0) == "0");
    CHECK(report_number(-0.0) == "0");
    CHECK(report_number(std::nan("")) == "NA");
    CHECK(report_number(2.5e-17) == "2.5e-17");
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> mant(-1, 1);
    std::uniform_int_distribution<int> expo(-300, 300);
    for (int i = 0; i < 20000; ++i) {
        const double v = std::ldexp(mant(rng), expo(rng));
        const double r = report_round(v);
        CHECK(report_round(r) == r);
        CHECK(report_number(r) == report_number(v));
        CHECK(std::abs(r - v) <= 5e-12 * std::abs(v));
    }
}

TEST_CASE("results: json round trip and consistent tables")
{
    const auto s = scored_archive(3);
    auto report = analyze_archive(s.archive, {}).report;
    report.manifest_digest = "abc";
    const auto json = results_json(report);
    const auto parsed = parse_results_json(json);
    CHECK(results_json(parsed) == json);
    CHECK(results_tsv(parsed) == results_tsv(report));
    CHECK(conditions_tsv(parsed) == conditions_tsv(report));
    CHECK(results_markdown(parsed) == results_markdown(report));
    CHECK(results_tsv(report).find("# manifest_digest: abc\n") == 0);
    CHECK(results_markdown(report).find("`abc`") != std::string::npos);
    CHECK(error_code([] { parse_results_json("{\"format\":\"other\",\"version\":1}"); }) == ErrorCode::MalformedFile);
    CHECK(error_code([] { parse_results_json("not json"); }) == ErrorCode::MalformedFile);
}

TEST_CASE("figure: bar heights, whiskers, markers")
{
    const auto svg = render_svg(figure_fixture());
    // Plot area is 240 units tall.
    CHECK(attribute(svg, "data-mean=\"0.4\"", "height") == "96.00");
    CHECK(attribute(svg, "data-mean=\"0.6\"", "height") == "144.00");
    CHECK(attribute(svg, "data-mean=\"0.5\"", "height", 0) == attribute(svg, "data-mean=\"0.5\"", "height", 1));
    CHECK(attribute(svg, "data-mean=\"0.5\"", "height") == "120.00");

    const size_t b = svg.find("data-source=\"scorer-b\"");
    const size_t b_end = svg.find("</g>", b);
    CHECK(svg.substr(b, b_end - b).find("class=\"marker\"") == std::string::npos);
    const size_t a = svg.find("data-source=\"scorer-a\"");
    CHECK(svg.substr(a, b - a).find(">**</text>") != std::string::npos);
    const size_t h = svg.find("data-source=\"human\"");
    CHECK(svg.substr(h, a - h).find("whisker") == std::string::npos);
    CHECK(svg.find("<!-- manifest_digest: 0123abcd -->") != std::string::npos);

    CHECK(significance_marker(0.0009) == "***");
    CHECK(significance_marker(0.009) == "**");
    CHECK(significance_marker(0.049) == "*");
    CHECK(significance_marker(0.05).empty());
    CHECK(significance_marker(1.0).empty());
}

TEST_CASE("figure: golden file")
{
    const auto svg = render_svg(figure_fixture());
    const std::string golden = kData + "/golden/figure_fixture.svg";
    if (std::getenv("XLPRIME_UPDATE_GOLDEN"))
        write_file_atomic(golden, svg);
    CHECK(svg == read_file(golden));
    CHECK(render_svg(figure_fixture()) == svg);
}

TEST_CASE("figure: built from a report, human group first, markers from p_adj")
{
    AnalysisReport report;
    report.manifest_digest = "d";
    report.experiments.push_back({"x", "t", "en", "nl", Family::Dative, Variant::PO, Direction::Positive, 3});
    report.scorers = {"s1", "s2"};
    PrimingTestResult r1;
    r1.experiment_id = "x";
    r1.scorer_id = "s1";
    r1.p_adj = 0.0004;
    PrimingTestResult r2 = r1;
    r2.scorer_id = "s2";
    r2.p_adj = 1.0;
    report.results = {r1, r2};
    report.conditions = {{"x", "s1", Variant::DO, 3, 0.4, 0.01}, {"x", "s1", Variant::PO, 3, 0.6, 0.01}, {"x", "s2", Variant::DO, 3, 0.5, 0.02},
                         {"x", "s2", Variant::PO, 3, 0.5, 0.02}, {"x", "human", Variant::DO, 0, 0.3, std::nullopt}, {"x", "human", Variant::PO, 0, 0.5, std::nullopt}};
    const auto figures = figures_from(report);
    REQUIRE(figures.size() == 1);
    REQUIRE(figures[0].groups.size() == 3);
    CHECK(figures[0].groups[0].label == "human");
    CHECK(figures[0].groups[0].marker.empty());
    CHECK(figures[0].groups[1].marker == "***");
    CHECK(figures[0].groups[2].marker.empty());
    CHECK(figures[0].groups[1].means == std::array<double, 2>{0.4, 0.6});
}

TEST_CASE("conformance: transcript replay and token sums")
{
    const auto transcript = parse_transcript(read_file(kData + "/conformance/mock_uniform.transcript"));
    CHECK(transcript.size() == 8);
    auto channel = make_channel_factory(parse_endpoint("mock:uniform"))();
    CHECK(replay_transcript(*channel, transcript).empty());

    auto broken = transcript;
    broken[2].second += " ";
    const auto mismatches = replay_transcript(*channel, broken);
    REQUIRE(mismatches.size() == 1);
    CHECK(mismatches[0].index == 2);
    CHECK(error_code([] { parse_transcript("{\"v\":1,\"op\":\"hello\"}\n"); }) == ErrorCode::MalformedFile);

    const auto& sentences = multilingual_sentences();
    CHECK(sentences.size() == 100);
    CHECK(std::set<std::string>(sentences.begin(), sentences.end()).size() == 100);
    ScorerGateway hash(make_channel_factory(parse_endpoint("mock:hash:7")));
    CHECK(check_token_sums(hash, sentences).empty());
}
