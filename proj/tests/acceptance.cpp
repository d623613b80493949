// Acceptance run: one PASS/FAIL line per criterion, exit status 0 only when
// every line passes.

#include "oracles.hpp"
#include "synthetic.hpp"

#include "xlprime/battery.hpp"
#include "xlprime/contamination.hpp"
#include "xlprime/fdr.hpp"
#include "xlprime/gateway.hpp"
#include "xlprime/lmm.hpp"
#include "xlprime/mock.hpp"
#include "xlprime/priming.hpp"
#include "xlprime/special.hpp"

#include <fmt/format.h>

#include <chrono>
#include <filesystem>
#include <functional>
#include <limits>

using namespace xlprime;
namespace fs = std::filesystem;

namespace {

const std::string kData = XLPRIME_TEST_DATA;
const std::string kCli = XLPRIME_CLI;

struct Verdict {
    bool pass = false;
    std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) { return std::chrono::duration<double>(Clock::now() - start).count(); }

Verdict normalization_example()
{
    const double lp[4] = {std::log(0.03), std::log(0.02), std::log(0.04), std::log(0.01)};
    const auto a = normalize_pair(lp[0], lp[1]);
    const auto b = normalize_pair(lp[2], lp[3]);
    const double got[4] = {a.focus, a.other, b.focus, b.other};
    const double want[4] = {0.60, 0.40, 0.80, 0.20};
    double worst = 0;
    for (int i = 0; i < 4; ++i)
        worst = std::max(worst, std::abs(got[i] - want[i]));
    return {worst <= 1e-12, fmt::format("P_N = {:.15f}/{:.15f}/{:.15f}/{:.15f}, max error {:.2e} (tolerance 1e-12)", got[0], got[1], got[2], got[3], worst)};
}

Verdict normalization_fuzz()
{
    std::mt19937_64 rng(31337);
    std::uniform_real_distribution<double> small(-60.0, 0.0), huge(-1e6, 0.0), gap(-40.0, 40.0);
    const double ulp = std::numeric_limits<double>::epsilon();
    size_t sum_failures = 0, complement_failures = 0;
    double most_negative = 0;
    for (int i = 0; i < 100000; ++i) {
        double a, b;
        switch (i % 3) {
        case 0: a = small(rng), b = small(rng); break;
        case 1: a = huge(rng), b = huge(rng); break;
        default: a = huge(rng), b = a + gap(rng); break;
        }
        most_negative = std::min({most_negative, a, b});
        const auto p = normalize_pair(a, b);
        const auto q = normalize_pair(b, a);
        sum_failures += !(std::abs(p.focus + p.other - 1.0) <= ulp);
        complement_failures += !(p.focus == q.other && p.other == q.focus);
    }
    return {sum_failures == 0 && complement_failures == 0,
            fmt::format("100000 pairs down to {:.0f}: {} sum-to-one and {} complement violations beyond 1 ulp", most_negative, sum_failures, complement_failures)};
}

Verdict lmm_correctness()
{
    const auto start = Clock::now();
    std::mt19937_64 rng(42);
    double worst_beta = 0, worst_f = 0;
    for (int rep = 0; rep < 200; ++rep) {
        const size_t items = 8 + static_cast<size_t>(rep) * 184 / 199;
        const auto d = oracle::balanced(rng, items, rep % 3 == 0 ? 0.0 : 0.05, 0.15, 0.05);
        const auto fit = fit_lmm(d.y, d.x, d.group);
        const auto t = oracle::paired_t(d);
        worst_beta = std::max(worst_beta, oracle::relative_error(fit.beta[1], t.mean_difference));
        worst_f = std::max(worst_f, oracle::relative_error(f_test(fit).f, t.t * t.t));
    }
    std::mt19937_64 rng2(7);
    double worst_unbalanced = 0;
    for (int rep = 0; rep < 50; ++rep) {
        const size_t items = 8 + static_cast<size_t>(rep) * 184 / 49;
        const auto d = oracle::unbalanced(rng2, items, 0.04, rep % 5 == 0 ? 0.0 : 0.08, 0.06);
        const auto fit = fit_lmm(d.y, d.x, d.group);
        const auto ref = oracle::BruteReml(d).maximize(20001);
        const double scale = fit.sigma_u2 + fit.sigma_e2;
        worst_unbalanced = std::max({worst_unbalanced, oracle::relative_error(fit.beta[0], static_cast<double>(ref.beta0)),
                                     std::abs(fit.beta[1] - static_cast<double>(ref.beta1)) / std::max(std::abs(fit.beta[1]), fit.se_beta1),
                                     oracle::relative_error(fit.sigma_e2, static_cast<double>(ref.sigma_e2)),
                                     std::abs(fit.sigma_u2 - static_cast<double>(ref.sigma_u2)) / scale});
    }
    const double elapsed = seconds_since(start);
    return {worst_beta <= 1e-10 && worst_f <= 1e-9 && worst_unbalanced <= 1e-6 && elapsed < 60,
            fmt::format("balanced x200: beta1 rel {:.1e} (<=1e-10), F vs t^2 rel {:.1e} (<=1e-9); unbalanced x50 vs dense grid {:.1e} (<=1e-6); {:.1f} s (<60 s)",
                        worst_beta, worst_f, worst_unbalanced, elapsed)};
}

Verdict f_tail()
{
    const double fs[] = {0.01, 0.3, 1.0, 2.5, 4.9646, 9.0, 20.0, 75.0, 300.0, 2000.0};
    const double df2s[] = {1.0, 7.0, 23.0, 95.0, 601.5};
    double worst = 0;
    for (double f : fs)
        for (double d2 : df2s)
            worst = std::max(worst, std::abs(f_upper_tail(f, 1, d2) - oracle::f_tail(f, 1, d2)));
    const double anchor = f_upper_tail(4.9646, 1, 10);
    return {worst <= 1e-10 && std::abs(anchor - 0.05) <= 1e-4,
            fmt::format("50-point grid max abs error {:.1e} (<=1e-10); F=4.9646, df=(1,10) gives p={:.6f} (0.0500 +- 1e-4)", worst, anchor)};
}

Verdict bh()
{
    std::mt19937_64 rng(5);
    std::uniform_int_distribution<int> size(1, 64), ties(0, 3);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    size_t mismatches = 0;
    for (int rep = 0; rep < 1000; ++rep) {
        std::vector<double> p(static_cast<size_t>(size(rng)));
        for (auto& v : p)
            v = ties(rng) == 0 ? std::round(u(rng) * 20) / 20 : std::pow(u(rng), 3);
        mismatches += bh_adjust(p) != oracle::bh_brute(p);
    }
    return {mismatches == 0, fmt::format("{} of 1000 random vectors (m <= 64, with ties) differ from the brute-force step-up", mismatches)};
}

// Observations for one experiment scored through a gateway.
std::vector<NormalizedObservation> observe(ScorerGateway& gateway, const Experiment& e)
{
    std::vector<ScoredItem> scored;
    for (const auto& item : e.items)
        scored.push_back(gateway.score_item(item, e.family));
    return build_observations(e, scored);
}

BatteryCell cell_for(const Experiment& e, const std::string& scorer, std::vector<NormalizedObservation> observations)
{
    return {e.experiment_id, scorer, e.study_tag, e.prime_language, e.target_language, e.focus_variant, e.human_direction, std::move(observations)};
}

ChannelFactory table_factory(const std::string& table)
{
    auto server = std::make_shared<mock::MockServer>(std::make_shared<mock::TableScorer>(mock::TableScorer::from_text(table, "injected")), nullptr);
    return [server] { return std::make_unique<InProcessChannel>([server](std::string_view line) { return server->handle(line); }); };
}

Verdict calibration()
{
    const auto start = Clock::now();
    const auto experiment = synthetic::dative_experiment("cal", 48);

    size_t rejections = 0, tests = 0, excluded = 0;
    for (int rep = 0; rep < 500; ++rep) {
        std::vector<BatteryCell> cells;
        for (int c = 0; c < 16; ++c) {
            const std::string salt = fmt::format("r{}c{}", rep, c);
            ScorerGateway gateway(make_channel_factory(parse_endpoint("mock:hash:" + salt)));
            cells.push_back(cell_for(experiment, salt, observe(gateway, experiment)));
        }
        const auto outcome = run_battery(cells);
        excluded += cells.size() - outcome.results.size();
        for (const auto& r : outcome.results)
            rejections += r.p < 0.05, ++tests;
    }
    const double rate = static_cast<double>(rejections) / static_cast<double>(tests);

    size_t detected = 0;
    std::mt19937_64 rng(99);
    for (int rep = 0; rep < 200; ++rep) {
        synthetic::Injection injection;
        injection.beta1 = 0.1;
        injection.sigma_e = 0.05;
        ScorerGateway injected(table_factory(synthetic::injected_table(experiment, injection, rng)));
        std::vector<BatteryCell> cells = {cell_for(experiment, "injected", observe(injected, experiment))};
        for (int c = 1; c < 16; ++c) {
            const std::string salt = fmt::format("inj{}c{}", rep, c);
            ScorerGateway gateway(make_channel_factory(parse_endpoint("mock:hash:" + salt)));
            cells.push_back(cell_for(experiment, salt, observe(gateway, experiment)));
        }
        const auto outcome = run_battery(cells);
        const auto it = std::find_if(outcome.results.begin(), outcome.results.end(), [](const PrimingTestResult& r) { return r.scorer_id == "injected"; });
        detected += it != outcome.results.end() && it->p_adj < 0.05 && it->direction == Direction::Positive;
    }
    const double power = detected / 200.0;
    const double elapsed = seconds_since(start);
    return {rate >= 0.03 && rate <= 0.08 && power >= 0.95 && elapsed < 300,
            fmt::format("null: {} of {} raw p < 0.05, rate {:.4f} (in [0.03, 0.08]), {} cells excluded; injected beta1=0.1: detected POSITIVE with q < 0.05 in "
                        "{}/200 = {:.3f} (>= 0.95) with 15 null cells per family; {:.1f} s (<300 s)",
                        rejections, tests, rate, excluded, detected, power, elapsed)};
}

// Ten-token sentences built only from one language's stop words.
std::string sentence(std::mt19937_64& rng, const std::vector<std::string>& words)
{
    std::uniform_int_distribution<size_t> pick(0, words.size() - 1);
    std::string s;
    for (int i = 0; i < 10; ++i)
        s += (i ? " " : "") + words[pick(rng)];
    return s;
}

Verdict contamination()
{
    const auto start = Clock::now();
    const std::vector<std::string> english = {"the", "and", "of", "to", "is", "in", "that", "it", "was", "for", "with", "on", "are", "this", "by"};
    const std::vector<std::string> dutch = {"het", "een", "van", "niet", "dat", "op", "te", "zijn", "met", "voor", "maar", "ook"};

    // 10000 documents of 10 sentences; exactly 1% of all sentences are Dutch,
    // at positions chosen without replacement.
    std::mt19937_64 rng(17);
    const size_t documents = 10000, per_document = 10, total = documents * per_document;
    std::vector<bool> planted(total, false);
    std::vector<size_t> positions(total);
    std::iota(positions.begin(), positions.end(), size_t{0});
    std::shuffle(positions.begin(), positions.end(), rng);
    for (size_t i = 0; i < total / 100; ++i)
        planted[positions[i]] = true;
    Corpus corpus;
    for (size_t d = 0; d < documents; ++d) {
        std::string doc;
        for (size_t s = 0; s < per_document; ++s)
            doc += sentence(rng, planted[d * per_document + s] ? dutch : english) + ". ";
        corpus["en"].push_back(doc);
    }

    AuditConfig config;
    config.contaminants = {"nl"};
    config.corpus_tokens = {{"en", 5e11}};
    config.token_budget = 500000; // half the corpus
    config.seed = 2024;
    const auto lexicon = [](double sharpness) -> IdentifierFactory { return [sharpness] { return std::make_unique<mock::LexiconIdentifier>(sharpness); }; };
    const auto result = run_audit(corpus, config, lexicon(2.0), lexicon(1.0));
    const auto& consensus = result.estimates.at(2);
    const double error_pp = 100.0 * std::abs(consensus.proportion - 0.01);

    // Consensus never exceeds either classifier, on this corpus and on noisy ones
    // where the two classifiers disagree.
    bool consensus_bounded = true;
    for (uint64_t seed = 0; seed < 20; ++seed) {
        Corpus noisy;
        std::mt19937_64 g(seed);
        std::bernoulli_distribution mixed(0.3);
        for (int d = 0; d < 50; ++d) {
            std::string doc;
            for (int s = 0; s < 8; ++s) {
                std::string text = sentence(g, english);
                if (mixed(g))
                    text = sentence(g, dutch) + " " + sentence(g, english).substr(0, 12);
                doc += text + ". ";
            }
            noisy["en"].push_back(doc);
        }
        AuditConfig c = config;
        c.seed = seed;
        c.token_budget = 1000000;
        c.threshold_a = 0.5 + 0.02 * static_cast<double>(seed);
        const auto r = run_audit(noisy, c, lexicon(1.0 + 0.1 * static_cast<double>(seed)), lexicon(0.7));
        consensus_bounded = consensus_bounded && r.estimates[2].sentences_flagged <= std::min(r.estimates[0].sentences_flagged, r.estimates[1].sentences_flagged);
    }
    for (const auto& s : result.sources) {
        const auto& f = s.flagged.at("nl");
        consensus_bounded = consensus_bounded && f[2].sentences <= std::min(f[0].sentences, f[1].sentences);
    }

    const auto extrapolated = extrapolate(0.0003051, 5e11);
    const double elapsed = seconds_since(start);
    return {error_pp <= 0.2 && consensus_bounded && extrapolated == 152'550'000,
            fmt::format("planted 1%: consensus proportion {:.5f} over {} sentences, error {:.3f} pp (<=0.2); consensus <= min(A, B): {}; "
                        "extrapolate(0.0003051, 5e11) = {}; {:.1f} s",
                        consensus.proportion, consensus.sentences_total, error_pp, consensus_bounded ? "yes" : "no", extrapolated, elapsed)};
}

Verdict determinism()
{
    const auto dir = synthetic::fresh_dir("acceptance-pipeline");
    const std::string stimuli = "'" + kData + "/fixtures.tsv'";
    const std::vector<std::string> artifacts = {"results.tsv", "results.json", "results.md", "conditions.tsv", "figures/demo_en_en_dative.svg", "figures/demo_nl_en_genitive.svg"};
    for (const auto& [run, jobs] : std::vector<std::pair<std::string, int>>{{"a", 1}, {"b", 4}}) {
        const std::string out = "--seed 1 --out '" + (dir / run).string() + "'";
        for (const auto& command : {fmt::format("score --jobs {} --scorer mock:hash --scorer mock:hash:second --stimuli {}", jobs, stimuli),
                                    fmt::format("analyze --jobs {}", jobs), std::string("figure")}) {
            const auto r = synthetic::run(kCli + " " + out + " " + command, dir / "io");
            if (r.status != 0)
                return {false, fmt::format("`{}` exited {}: {}", command, r.status, r.err)};
        }
    }
    size_t identical = 0;
    std::string golden_note;
    for (const auto& a : artifacts)
        identical += read_file((dir / "a" / a).string()) == read_file((dir / "b" / a).string());
    const bool golden = read_file((dir / "a" / "results.tsv").string()) == read_file(kData + "/golden/pipeline_results.tsv") &&
                        read_file((dir / "a" / "figures" / "demo_en_en_dative.svg").string()) == read_file(kData + "/golden/pipeline_demo_en_en_dative.svg");
    fs::remove_all(dir);
    return {identical == artifacts.size() && golden,
            fmt::format("{}/{} artifacts byte-identical across two runs (1 and 4 workers, different output directories); results table and figure {} the "
                        "checked-in golden bytes produced on linux/x86-64",
                        identical, artifacts.size(), golden ? "match" : "DO NOT match")};
}

} // namespace

int main()
{
    struct Criterion {
        std::string name;
        std::function<Verdict()> run;
    };
    const std::vector<Criterion> criteria = {
        {"normalization worked example", normalization_example},
        {"normalization sum-to-one and complement fuzz", normalization_fuzz},
        {"LMM correctness against paired-t and dense-grid REML oracles", lmm_correctness},
        {"F upper tail against an independent incomplete-beta oracle", f_tail},
        {"Benjamini-Hochberg against the brute-force definition", bh},
        {"statistical calibration of the battery", calibration},
        {"contamination audit on a planted corpus", contamination},
        {"full-pipeline determinism", determinism},
    };
    bool all = true;
    bool substitutes = true; // criteria 3 to 6
    for (size_t i = 0; i < criteria.size(); ++i) {
        Verdict v;
        try {
            v = criteria[i].run();
        } catch (const std::exception& e) {
            v = {false, fmt::format("threw: {}", e.what())};
        }
        fmt::print("{} [{}] {}: {}\n", v.pass ? "PASS" : "FAIL", i + 1, criteria[i].name, v.detail);
        std::fflush(stdout);
        all = all && v.pass;
        if (i >= 2 && i <= 5)
            substitutes = substitutes && v.pass;
    }
    fmt::print("{} [9] published F statistics of the original models: not reproducible without the original checkpoints and stimuli; "
               "substituted by criteria 3 to 6, which {}\n",
               substitutes ? "PASS" : "FAIL", substitutes ? "all pass" : "do not all pass");
    all = all && substitutes;
    return all ? 0 : 1;
}
