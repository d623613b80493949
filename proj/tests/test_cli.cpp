#include <doctest.h>

#include "synthetic.hpp"

#include "xlprime/archive.hpp"
#include "xlprime/report.hpp"
#include "xlprime/stimulus.hpp"
#include "xlprime/text.hpp"

#include <filesystem>
#include <random>

using namespace xlprime;
namespace fs = std::filesystem;

namespace {

const std::string kData = XLPRIME_TEST_DATA;
const std::string kCli = XLPRIME_CLI;
const std::string kBridge = XLPRIME_MOCK_BRIDGE;
const std::string kFixtures = kData + "/fixtures.tsv";

synthetic::RunResult cli(const std::string& args, const fs::path& scratch) { return synthetic::run(kCli + " " + args, scratch / "io"); }

std::string shell_arg(const fs::path& p) { return "'" + p.string() + "'"; }

size_t count_lines(const std::string& text) { return static_cast<size_t>(std::count(text.begin(), text.end(), '\n')); }

// Stimulus file and scorer table for a 24-item experiment with an injected
// positive effect, plus rows that give its reversal the opposite effect.
struct InjectedFixture {
    fs::path stimuli;
    fs::path table;
};

InjectedFixture injected_fixture(const fs::path& dir)
{
    const auto e = synthetic::dative_experiment("inj", 24, "en", "nl");
    std::mt19937_64 rng(2024);
    std::string table = synthetic::injected_table(e, {}, rng);
    synthetic::Injection reversed;
    reversed.beta1 = -0.1;
    table += synthetic::injected_table(reverse_experiment(e), reversed, rng);
    InjectedFixture f{dir / "inj.tsv", dir / "inj_table.tsv"};
    write_file_atomic(f.stimuli.string(), write_experiments({e}));
    write_file_atomic(f.table.string(), table);
    return f;
}

const PrimingTestResult& result_for(const AnalysisReport& report, const std::string& experiment)
{
    const auto it = std::find_if(report.results.begin(), report.results.end(), [&](const PrimingTestResult& r) { return r.experiment_id == experiment; });
    REQUIRE(it != report.results.end());
    return *it;
}

void write_corpus(const fs::path& dir, size_t dutch_every)
{
    fs::create_directories(dir);
    std::string text;
    size_t sentence = 0;
    for (int d = 0; d < 40; ++d) {
        for (int s = 0; s < 10; ++s, ++sentence) {
            if (dutch_every && sentence % dutch_every == 0)
                text += "de kat is op de mat en het is niet van mij. ";
            else
                text += "the cat is on the mat and it is not for me. ";
        }
        text += "\n\n";
    }
    write_file_atomic((dir / "en.txt").string(), text);
}

std::map<std::string, double> estimate_column(const std::string& table, const std::string& column)
{
    std::map<std::string, double> out;
    std::vector<std::string> header;
    for (auto line : split(table, '\n')) {
        if (line.empty() || line.front() == '#')
            continue;
        const auto fields = split(line, '\t');
        if (header.empty()) {
            for (auto f : fields)
                header.emplace_back(f);
            continue;
        }
        const size_t col = std::find(header.begin(), header.end(), column) - header.begin();
        REQUIRE(col < fields.size());
        out[std::string(fields[0])] = std::stod(std::string(fields[col]));
    }
    return out;
}

} // namespace

TEST_CASE("usage errors exit 1")
{
    const auto dir = synthetic::fresh_dir("cli-usage");
    CHECK(cli("", dir).status == 1);
    CHECK(cli("score --no-such-flag", dir).status == 1);
    write_file_atomic((dir / "bad.cfg").string(), "seed = 1\nscorre = mock:hash\n");
    const auto r = cli("--config " + shell_arg(dir / "bad.cfg") + " score --stimuli " + shell_arg(kFixtures), dir);
    CHECK(r.status == 1);
    CHECK(r.err.find("bad.cfg:2") != std::string::npos);
    CHECK(cli("score --stimuli " + shell_arg(kFixtures), dir).status == 1); // no scorer
    CHECK(cli("score --scorer mock:hash --stimuli " + shell_arg(kFixtures) + " --experiments nope --dry-run", dir).status == 1);
    CHECK(cli("score --scorer bogus:x --stimuli " + shell_arg(kFixtures) + " --dry-run", dir).status == 1);
    CHECK(cli("--help", dir).status == 0);
}

TEST_CASE("invalid stimuli exit 2 and name the item")
{
    const auto dir = synthetic::fresh_dir("cli-invalid");
    std::string text = read_file(kFixtures);
    const std::string po = "The chef gives a hat to the swimmer.";
    text.replace(text.find(po), po.size(), "The chef gives the swimmer a hat.");
    write_file_atomic((dir / "bad.tsv").string(), text);
    const auto r = cli("score --scorer mock:hash --stimuli " + shell_arg(dir / "bad.tsv") + " --out " + shell_arg(dir / "out"), dir);
    CHECK(r.status == 2);
    CHECK(r.err.find("d01") != std::string::npos);
    CHECK(!fs::exists(dir / "out" / "archive.json"));
}

TEST_CASE("dry run lists requests without contacting the scorer or writing")
{
    const auto dir = synthetic::fresh_dir("cli-dry");
    const auto r = cli("score --scorer 'spawn:exit 1' --stimuli " + shell_arg(kFixtures) + " --out " + shell_arg(dir / "out") + " --dry-run", dir);
    CHECK(r.status == 0);
    CHECK(count_lines(r.out) == 2 * 3 * 4);
    CHECK(r.out.find("demo_en_en_dative\td01\tprime=DO\ttarget=PO") != std::string::npos);
    CHECK(!fs::exists(dir / "out"));
}

TEST_CASE("unreachable scorer exits 3")
{
    const auto dir = synthetic::fresh_dir("cli-unreachable");
    write_file_atomic((dir / "run.cfg").string(), "retries = 0\n");
    const auto r = cli("--config " + shell_arg(dir / "run.cfg") + " score --scorer 'spawn:exit 1' --stimuli " + shell_arg(kFixtures) + " --out " + shell_arg(dir / "out"), dir);
    CHECK(r.status == 3);
    CHECK(r.err.find("SCORER_UNREACHABLE") != std::string::npos);
}

TEST_CASE("score writes four cells per item")
{
    const auto dir = synthetic::fresh_dir("cli-score");
    const auto r = cli("score --scorer mock:hash --stimuli " + shell_arg(kFixtures) + " --out " + shell_arg(dir / "out"), dir);
    REQUIRE(r.status == 0);
    const auto archive = read_archive(read_file((dir / "out" / "archive.json").string()));
    CHECK(archive.entries.size() == 6);
    CHECK(archive.missing().empty());
    CHECK(archive.scorers.at(0).scorer_id == "mock:hash:0:0");
    CHECK(archive.manifest.inputs.at(0).first == "fixtures.tsv");
    CHECK(archive.manifest.inputs.at(0).second == sha256_hex(read_file(kFixtures)));
    CHECK(fs::exists(dir / "out" / "manifest-score.json"));
}

TEST_CASE("interrupted scoring keeps progress and resumes from the cache")
{
    const auto dir = synthetic::fresh_dir("cli-resume");
    write_file_atomic((dir / "run.cfg").string(), "retries = 0\n");
    const std::string common = "--config " + shell_arg(dir / "run.cfg") + " --out " + shell_arg(dir / "out") + " score --stimuli " + shell_arg(kFixtures);

    // The worker's bridge answers hello and six score requests, then dies.
    const auto first = cli(common + " --scorer 'spawn:" + kBridge + " --mock hash --crash-after 7'", dir);
    CHECK(first.status == 3);
    CHECK(first.err.find("6 remote calls, 0 cache hits, 18 cells still unscored") != std::string::npos);
    const auto partial = read_archive(read_file((dir / "out" / "archive.json").string()));
    CHECK(partial.missing().size() == 18);

    const auto analyze = cli("--out " + shell_arg(dir / "out") + " analyze", dir);
    CHECK(analyze.status == 4);
    CHECK(analyze.err.find("18 unscored cells") != std::string::npos);
    CHECK(analyze.err.find("d02 prime=PO target=DO") != std::string::npos);

    const auto second = cli(common + " --scorer 'spawn:" + kBridge + " --mock hash'", dir);
    CHECK(second.status == 0);
    CHECK(second.err.find("18 remote calls, 6 cache hits, 0 cells still unscored") != std::string::npos);

    const auto fresh = cli("score --scorer mock:hash --stimuli " + shell_arg(kFixtures) + " --out " + shell_arg(dir / "fresh"), dir);
    REQUIRE(fresh.status == 0);
    const auto resumed = read_archive(read_file((dir / "out" / "archive.json").string()));
    const auto reference = read_archive(read_file((dir / "fresh" / "archive.json").string()));
    CHECK(resumed.entries == reference.entries);
}

TEST_CASE("analyze: injected effect is POSITIVE, its antisymmetric reversal NEGATIVE")
{
    const auto dir = synthetic::fresh_dir("cli-injected");
    const auto f = injected_fixture(dir);
    const auto out = dir / "out";
    REQUIRE(cli("score --reverse --scorer mock:table:" + f.table.string() + " --stimuli " + shell_arg(f.stimuli) + " --out " + shell_arg(out), dir).status == 0);
    const auto r = cli("--out " + shell_arg(out) + " analyze", dir);
    REQUIRE(r.status == 0);
    const auto report = parse_results_json(read_file((out / "results.json").string()));
    const auto& forward = result_for(report, "inj");
    CHECK(forward.direction == Direction::Positive);
    CHECK(forward.significant);
    CHECK(forward.p_adj < 0.05);
    CHECK(forward.beta1 == doctest::Approx(0.1).epsilon(0.3));
    const auto& reversed = result_for(report, "inj__rev");
    CHECK(reversed.direction == Direction::Negative);
    CHECK(reversed.significant);
    CHECK(!reversed.replicates_human);
    CHECK(fs::exists(out / "results.tsv"));
    CHECK(fs::exists(out / "results.md"));
    CHECK(fs::exists(out / "conditions.tsv"));
    CHECK(count_lines(read_file((out / "observations" / (file_stem(forward.scorer_id) + ".tsv")).string())) == 1 + 1 + 2 * 2 * 24);

    CHECK(cli("--out " + shell_arg(out) + " --family weird analyze", dir).status == 1);
    const auto per_experiment = cli("--out " + shell_arg(dir / "fam") + " --family experiment analyze --archive " + shell_arg(out / "archive.json"), dir);
    CHECK(per_experiment.status == 0);
    const auto fam = parse_results_json(read_file((dir / "fam" / "results.json").string()));
    CHECK(fam.family == CorrectionFamily::PerExperiment);
    CHECK(result_for(fam, "inj").family_size == 1);
}

TEST_CASE("analyze: context-hash scorer shows no effect")
{
    const auto dir = synthetic::fresh_dir("cli-null");
    const auto f = injected_fixture(dir);
    const auto out = dir / "out";
    REQUIRE(cli("score --scorer mock:hash:null --stimuli " + shell_arg(f.stimuli) + " --out " + shell_arg(out), dir).status == 0);
    REQUIRE(cli("--out " + shell_arg(out) + " analyze", dir).status == 0);
    const auto report = parse_results_json(read_file((out / "results.json").string()));
    const auto& r = result_for(report, "inj");
    CHECK(!r.significant);
    CHECK(r.p > 0.05);
    CHECK(std::abs(r.beta1) < 3 * r.se);
}

TEST_CASE("figure: one deterministic SVG per experiment")
{
    const auto dir = synthetic::fresh_dir("cli-figure");
    const auto out = dir / "out";
    REQUIRE(cli("score --scorer mock:hash --stimuli " + shell_arg(kFixtures) + " --out " + shell_arg(out), dir).status == 0);
    REQUIRE(cli("--out " + shell_arg(out) + " analyze", dir).status == 0);
    REQUIRE(cli("--out " + shell_arg(out) + " figure", dir).status == 0);
    const auto first = read_file((out / "figures" / "demo_en_en_dative.svg").string());
    CHECK(first.find("data-source=\"human\"") != std::string::npos);
    CHECK(first.find("data-mean=\"0.31\"") != std::string::npos);
    CHECK(fs::exists(out / "figures" / "demo_nl_en_genitive.svg"));
    REQUIRE(cli("--out " + shell_arg(out) + " figure", dir).status == 0);
    CHECK(read_file((out / "figures" / "demo_en_en_dative.svg").string()) == first);
    CHECK(cli("--out " + shell_arg(dir / "none") + " figure", dir).status == 2);
}

TEST_CASE("full pipeline is byte-identical across runs and output directories")
{
    const auto dir = synthetic::fresh_dir("cli-determinism");
    const std::vector<std::string> artifacts = {"results.tsv", "results.json", "results.md", "conditions.tsv", "figures/demo_en_en_dative.svg",
                                                "figures/demo_nl_en_genitive.svg", "observations/mock_hash_0_0.tsv"};
    for (const char* run : {"a", "b"}) {
        const auto out = shell_arg(dir / run);
        REQUIRE(cli("--seed 9 --out " + out + " score --jobs 3 --scorer mock:hash --scorer mock:uniform --stimuli " + shell_arg(kFixtures), dir).status == 0);
        REQUIRE(cli("--seed 9 --out " + out + " analyze", dir).status == 0);
        REQUIRE(cli("--seed 9 --out " + out + " figure", dir).status == 0);
    }
    for (const auto& a : artifacts) {
        CAPTURE(a);
        CHECK(read_file((dir / "a" / a).string()) == read_file((dir / "b" / a).string()));
    }
    CHECK(read_file((dir / "a" / "archive.json").string()) == read_file((dir / "b" / "archive.json").string()));
}

TEST_CASE("contamscan: zero and planted contaminant, raised thresholds")
{
    const auto dir = synthetic::fresh_dir("cli-contam");
    write_file_atomic((dir / "audit.cfg").string(), "contaminants = nl\ncorpus_tokens.en = 1000000\ntoken_budget = 100000\nseed = 1\n");
    const std::string base = "--config " + shell_arg(dir / "audit.cfg") + " contamscan --classifier-a mock:lexicon:2 --classifier-b mock:lexicon";

    write_corpus(dir / "clean", 0);
    const auto clean = cli(base + " --corpus " + shell_arg(dir / "clean") + " --out " + shell_arg(dir / "clean_out"), dir);
    REQUIRE(clean.status == 0);
    for (const auto& [mode, value] : estimate_column(read_file((dir / "clean_out" / "contamination.tsv").string()), "nl_proportion"))
        CHECK(value == 0.0);

    write_corpus(dir / "planted", 10);
    const auto planted = cli(base + " --corpus " + shell_arg(dir / "planted") + " --out " + shell_arg(dir / "planted_out"), dir);
    REQUIRE(planted.status == 0);
    const auto defaults = estimate_column(read_file((dir / "planted_out" / "contamination.tsv").string()), "nl_proportion");
    CHECK(defaults.at("CONSENSUS") > 0.0);
    CHECK(defaults.at("CONSENSUS") <= std::min(defaults.at("CLASSIFIER_A"), defaults.at("CLASSIFIER_B")));

    write_file_atomic((dir / "strict.cfg").string(), read_file((dir / "audit.cfg").string()) + "threshold_a = 1\nthreshold_b = 1\n");
    const auto strict = cli("--config " + shell_arg(dir / "strict.cfg") + " contamscan --classifier-a mock:lexicon:2 --classifier-b mock:lexicon --corpus " +
                                shell_arg(dir / "planted") + " --out " + shell_arg(dir / "strict_out"),
                            dir);
    REQUIRE(strict.status == 0);
    const auto raised = estimate_column(read_file((dir / "strict_out" / "contamination.tsv").string()), "nl_proportion");
    for (const auto& [mode, value] : raised)
        CHECK(value <= defaults.at(mode));

    CHECK(cli(base + " --corpus " + shell_arg(dir / "missing") + " --out " + shell_arg(dir / "x"), dir).status == 2);
    CHECK(cli("contamscan --classifier-a mock:lexicon --classifier-b mock:lexicon --corpus " + shell_arg(dir / "clean"), dir).status == 1);
    const auto dead = cli("--config " + shell_arg(dir / "audit.cfg") + " contamscan --classifier-a 'spawn:exit 1' --classifier-b mock:lexicon --corpus " +
                              shell_arg(dir / "clean") + " --out " + shell_arg(dir / "dead"),
                          dir);
    CHECK(dead.status == 3);
}

TEST_CASE("selftest: numeric checks, transcripts and token sums")
{
    const auto dir = synthetic::fresh_dir("cli-selftest");
    const std::string transcript = " --transcript " + shell_arg(kData + "/conformance/mock_uniform.transcript");
    const auto ok = cli("selftest --scorer mock:uniform --scorer 'spawn:" + kBridge + " --mock uniform'" + transcript, dir);
    CHECK(ok.status == 0);
    CHECK(ok.out.find("FAIL") == std::string::npos);
    CHECK(ok.out.find("PASS token sums on 100 sentences") != std::string::npos);
    const auto wrong = cli("selftest --scorer mock:hash" + transcript, dir);
    CHECK(wrong.status == 2);
    CHECK(wrong.out.find("FAIL transcript") != std::string::npos);
    const auto garbage = cli("selftest --scorer 'spawn:" + kBridge + " --garbage'", dir);
    CHECK(garbage.status == 2);
}
