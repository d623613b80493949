// xlprime: score stimuli with one or more scorers, test priming effects,
// render figures and audit corpus contamination.

#include "xlprime/archive.hpp"
#include "xlprime/battery.hpp"
#include "xlprime/config.hpp"
#include "xlprime/conformance.hpp"
#include "xlprime/contamination.hpp"
#include "xlprime/error.hpp"
#include "xlprime/fdr.hpp"
#include "xlprime/figure.hpp"
#include "xlprime/gateway.hpp"
#include "xlprime/priming.hpp"
#include "xlprime/report.hpp"
#include "xlprime/special.hpp"
#include "xlprime/stimulus.hpp"
#include "xlprime/text.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>

#include <atomic>
#include <cmath>
#include <filesystem>
#include <iostream>
#include <mutex>
#include <thread>

namespace fs = std::filesystem;
using namespace xlprime;

namespace {

enum Exit { kOk = 0, kUsage = 1, kValidation = 2, kScorer = 3, kIncomplete = 4 };

int exit_code(ErrorCode code)
{
    switch (code) {
    case ErrorCode::Usage: return kUsage;
    case ErrorCode::ScorerUnreachable:
    case ErrorCode::ProtocolError:
    case ErrorCode::ScorerRefused:
    case ErrorCode::ClassifierUnreachable: return kScorer;
    case ErrorCode::IncompleteArchive:
    case ErrorCode::MissingScore: return kIncomplete;
    default: return kValidation;
    }
}

struct Flags {
    std::string config;
    std::vector<std::string> scorers;
    std::optional<uint64_t> seed;
    std::string out;
    std::string family;
    std::vector<std::string> stimuli;
    std::vector<std::string> experiments;
    std::optional<unsigned> jobs;
    std::string cache;
    bool dry_run = false;
    bool reverse = false;
    bool logit = false;
    std::optional<double> alpha;
    std::string archive;
    std::string results;
    std::string corpus;
    std::string classifier_a;
    std::string classifier_b;
    std::vector<std::string> transcripts;
};

/// Config file values overridden by command-line flags.
RunConfig effective_config(const Flags& f)
{
    RunConfig c = f.config.empty() ? RunConfig{} : RunConfig::load(f.config);
    auto override_list = [&](const char* key, const std::vector<std::string>& values) {
        if (values.empty())
            return;
        c.erase(key);
        for (const auto& v : values)
            c.add(key, v);
    };
    auto override_one = [&](const char* key, const std::string& value) {
        if (!value.empty())
            c.set(key, value);
    };
    override_list("scorer", f.scorers);
    override_list("stimuli", f.stimuli);
    override_list("experiments", f.experiments);
    if (f.seed)
        c.set("seed", std::to_string(*f.seed));
    if (f.jobs)
        c.set("jobs", std::to_string(*f.jobs));
    if (f.alpha)
        c.set("alpha", format_double(*f.alpha));
    if (f.reverse)
        c.set("reverse", "true");
    if (f.logit)
        c.set("logit", "true");
    override_one("out", f.out);
    override_one("family", f.family);
    override_one("cache", f.cache);
    override_one("corpus", f.corpus);
    override_one("classifier_a", f.classifier_a);
    override_one("classifier_b", f.classifier_b);
    return c;
}

// Keys that locate files or tune execution; they never change a result.
const std::set<std::string> kNonSemanticKeys = {"out", "cache", "jobs", "stimuli", "corpus", "timeout_ms", "retries"};

std::string out_dir(const RunConfig& c) { return c.get("out").value_or("out"); }

unsigned jobs_of(const RunConfig& c)
{
    const auto j = c.count("jobs").value_or(1);
    if (j == 0 || j > 256)
        throw Error(ErrorCode::Usage, "jobs must be between 1 and 256");
    return static_cast<unsigned>(j);
}

Manifest manifest_for(const std::string& command, const RunConfig& c, const std::vector<std::string>& input_paths)
{
    Manifest m;
    m.command = command;
    m.config_digest = sha256_hex(c.canonical(kNonSemanticKeys));
    for (const auto& path : input_paths)
        m.inputs.emplace_back(fs::path(path).filename().string(), sha256_hex(read_file(path)));
    m.seed = c.count("seed").value_or(0);
    return m;
}

void write_manifest(const std::string& dir, const Manifest& m, const std::string& started)
{
    write_file_atomic((fs::path(dir) / fmt::format("manifest-{}.json", m.command)).string(), m.file_json(started, utc_timestamp()));
}

RetryPolicy retry_policy(const RunConfig& c) { return {static_cast<int>(c.count("retries").value_or(2)) + 1, std::chrono::milliseconds(200)}; }

std::chrono::milliseconds timeout_of(const RunConfig& c) { return std::chrono::milliseconds(c.count("timeout_ms").value_or(300'000)); }

std::vector<Experiment> selected_experiments(const RunConfig& c)
{
    const auto paths = c.list("stimuli");
    if (paths.empty())
        throw Error(ErrorCode::Usage, "no stimuli given (--stimuli or `stimuli =` in the config)");
    auto all = load_experiments(paths);
    if (c.flag("reverse").value_or(false)) {
        const size_t n = all.size();
        for (size_t i = 0; i < n; ++i)
            all.push_back(reverse_experiment(all[i]));
    }
    const auto wanted = c.list("experiments");
    if (wanted.empty())
        return all;
    std::vector<Experiment> out;
    for (const auto& id : wanted) {
        auto it = std::find_if(all.begin(), all.end(), [&](const Experiment& e) { return e.experiment_id == id; });
        if (it == all.end())
            throw Error(ErrorCode::Usage, fmt::format("experiment '{}' not found in the stimuli", id));
        out.push_back(*it);
    }
    return out;
}

std::vector<std::string> scorer_endpoints(const RunConfig& c)
{
    auto endpoints = c.list("scorer");
    if (endpoints.empty())
        throw Error(ErrorCode::Usage, "no scorer given (--scorer or `scorer =` in the config)");
    return endpoints;
}

int cmd_score(const RunConfig& c, bool dry_run)
{
    const auto experiments = selected_experiments(c);
    const auto endpoints = scorer_endpoints(c);
    for (const auto& e : endpoints)
        parse_endpoint(e);

    if (dry_run) {
        size_t n = 0;
        for (const auto& endpoint : endpoints)
            for (const auto& e : experiments)
                for (const auto& item : e.items)
                    for (auto prime : variants_of(e.family))
                        for (auto target : variants_of(e.family)) {
                            fmt::print("{}\t{}\t{}\tprime={}\ttarget={}\n", endpoint, e.experiment_id, item.item_id, to_string(prime), to_string(target));
                            ++n;
                        }
        fmt::print(stderr, "dry run: {} requests planned, nothing sent or written\n", n);
        return kOk;
    }

    const std::string started = utc_timestamp();
    const std::string out = out_dir(c);
    fs::create_directories(out);
    const std::string cache_dir = c.get("cache").value_or((fs::path(out) / "cache").string());
    auto cache = std::make_shared<ScoreCache>(cache_dir);
    const unsigned jobs = jobs_of(c);

    std::vector<ChannelFactory> factories;
    std::vector<ScorerRecord> records;
    for (const auto& endpoint : endpoints) {
        factories.push_back(make_channel_factory(parse_endpoint(endpoint), timeout_of(c)));
        ScorerGateway probe(factories.back(), cache, retry_policy(c));
        const auto& info = probe.info();
        records.push_back({endpoint, info.scorer_id, info.tokenizer_fingerprint});
    }

    Manifest manifest = manifest_for("score", c, c.list("stimuli"));
    for (const auto& r : records)
        manifest.scorer_ids.push_back(r.scorer_id);
    Archive archive = plan_archive(manifest, experiments, records);

    std::map<std::string, const Experiment*> by_id;
    for (const auto& e : archive.experiments)
        by_id[e.experiment_id] = &e;
    std::map<std::string, size_t> scorer_index;
    for (size_t i = 0; i < records.size(); ++i)
        scorer_index[records[i].scorer_id] = i;

    std::atomic<size_t> next{0};
    std::atomic<bool> stop{false};
    std::atomic<size_t> remote{0}, hits{0};
    std::mutex failure_mutex;
    std::optional<Error> failure;

    auto worker = [&] {
        std::vector<std::unique_ptr<ScorerGateway>> gateways(factories.size());
        while (!stop) {
            const size_t i = next++;
            if (i >= archive.entries.size())
                break;
            auto& entry = archive.entries[i];
            const size_t s = scorer_index.at(entry.scorer_id);
            if (!gateways[s])
                gateways[s] = std::make_unique<ScorerGateway>(factories[s], cache, retry_policy(c));
            const Experiment& e = *by_id.at(entry.experiment_id);
            const auto& item = *std::find_if(e.items.begin(), e.items.end(), [&](const StimulusItem& it) { return it.item_id == entry.item_id; });
            try {
                for (auto prime : variants_of(e.family))
                    for (auto target : variants_of(e.family)) {
                        const auto outcome = gateways[s]->score({item.prime(prime), item.target(target)});
                        ++(outcome.from_cache ? hits : remote);
                        entry.logprob[variant_index(prime)][variant_index(target)] = outcome.response.total_logprob;
                    }
            } catch (const Error& err) {
                std::lock_guard lock(failure_mutex);
                if (!failure)
                    failure = Error(err.code(), fmt::format("{} / {} / {}: {}", entry.scorer_id, entry.experiment_id, entry.item_id, err.detail()));
                stop = true;
            }
        }
    };
    std::vector<std::thread> pool;
    for (unsigned j = 1; j < jobs; ++j)
        pool.emplace_back(worker);
    worker();
    for (auto& t : pool)
        t.join();

    write_file_atomic((fs::path(out) / "archive.json").string(), write_archive(archive));
    write_manifest(out, manifest, started);
    const auto missing = archive.missing();
    fmt::print(stderr, "scored: {} remote calls, {} cache hits, {} cells still unscored\n", remote.load(), hits.load(), missing.size());
    if (failure) {
        fmt::print(stderr, "error: {}\npartial archive written to {}; rerun to resume from the cache\n", failure->what(), (fs::path(out) / "archive.json").string());
        return exit_code(failure->code());
    }
    return kOk;
}

int cmd_analyze(const RunConfig& c, const std::string& archive_flag)
{
    const std::string started = utc_timestamp();
    const std::string out = out_dir(c);
    const std::string archive_path = archive_flag.empty() ? (fs::path(out) / "archive.json").string() : archive_flag;
    const Archive archive = read_archive(read_file(archive_path));

    AnalyzeOptions options;
    if (auto f = c.get("family")) {
        const auto parsed = parse_correction_family(*f);
        if (!parsed)
            throw Error(ErrorCode::Usage, fmt::format("unknown correction family '{}' (global, scorer, experiment, study)", *f));
        options.battery.family = *parsed;
    }
    options.battery.alpha = c.number("alpha").value_or(0.05);
    if (!(options.battery.alpha > 0 && options.battery.alpha < 1))
        throw Error(ErrorCode::Usage, "alpha must lie in (0, 1)");
    options.battery.logit = c.flag("logit").value_or(false);
    options.battery.jobs = jobs_of(c);
    options.experiments = c.list("experiments");

    Manifest manifest = manifest_for("analyze", c, {archive_path});
    for (const auto& s : archive.scorers)
        manifest.scorer_ids.push_back(s.scorer_id);

    Analysis analysis = analyze_archive(archive, options);
    analysis.report.manifest_digest = manifest.digest();
    const auto& report = analysis.report;

    fs::create_directories(fs::path(out) / "observations");
    write_file_atomic((fs::path(out) / "results.tsv").string(), results_tsv(report));
    write_file_atomic((fs::path(out) / "conditions.tsv").string(), conditions_tsv(report));
    write_file_atomic((fs::path(out) / "results.json").string(), results_json(report));
    write_file_atomic((fs::path(out) / "results.md").string(), results_markdown(report));
    for (const auto& o : analysis.observations)
        write_file_atomic((fs::path(out) / "observations" / (file_stem(o.scorer_id) + ".tsv")).string(),
                          write_observation_table(o.rows, fmt::format("scorer_id: {}; manifest_digest: {}", o.scorer_id, report.manifest_digest)));
    write_manifest(out, manifest, started);

    for (const auto& w : report.warnings)
        fmt::print(stderr, "warning: {}\n", w);
    for (const auto& r : report.results)
        fmt::print("{}\t{}\tbeta1={}\tF={}\tp={}\tp_adj={}\t{}{}\n", r.experiment_id, r.scorer_id, report_number(r.beta1), report_number(r.f), report_number(r.p),
                   report_number(r.p_adj), to_string(r.direction), r.significant ? "\tsignificant" : "");
    return kOk;
}

int cmd_figure(const RunConfig& c, const std::string& results_flag)
{
    const std::string out = out_dir(c);
    const std::string path = results_flag.empty() ? (fs::path(out) / "results.json").string() : results_flag;
    const auto report = parse_results_json(read_file(path));
    fs::create_directories(fs::path(out) / "figures");
    for (const auto& figure : figures_from(report)) {
        const auto file = fs::path(out) / "figures" / (file_stem(figure.experiment_id) + ".svg");
        write_file_atomic(file.string(), render_svg(figure));
        fmt::print("{}\n", file.string());
    }
    return kOk;
}

int cmd_contamscan(const RunConfig& c)
{
    const std::string started = utc_timestamp();
    const auto corpus_dir = c.get("corpus");
    if (!corpus_dir)
        throw Error(ErrorCode::Usage, "no corpus directory given (--corpus or `corpus =` in the config)");
    const auto a = c.get("classifier_a");
    const auto b = c.get("classifier_b");
    if (!a || !b)
        throw Error(ErrorCode::Usage, "both classifiers are required (--classifier-a, --classifier-b)");
    const AuditConfig audit = audit_config(c);
    if (audit.contaminants.empty())
        throw Error(ErrorCode::Usage, "no contaminant languages given (`contaminants =` in the config)");

    const Corpus corpus = load_corpus(*corpus_dir);
    std::vector<std::string> inputs;
    for (const auto& [language, documents] : corpus)
        inputs.push_back((fs::path(*corpus_dir) / (language + ".txt")).string());
    Manifest manifest = manifest_for("contamscan", c, inputs);

    const auto result = run_audit(corpus, audit, make_identifier_factory(*a), make_identifier_factory(*b), jobs_of(c));
    const std::string out = out_dir(c);
    fs::create_directories(out);
    const std::string header = fmt::format("# manifest_digest: {}\n", manifest.digest());
    write_file_atomic((fs::path(out) / "contamination.tsv").string(), header + estimate_table(result.estimates));
    write_file_atomic((fs::path(out) / "contamination_sources.tsv").string(), header + source_table(result.sources));
    write_manifest(out, manifest, started);
    for (const auto& w : result.warnings)
        fmt::print(stderr, "warning: {}\n", w);
    fmt::print("{}", estimate_table(result.estimates));
    return kOk;
}

struct Check {
    std::string name;
    bool pass;
    std::string detail;
};

std::vector<Check> numeric_checks()
{
    std::vector<Check> checks;
    const double a = normalize(std::log(0.03), std::log(0.02));
    const double b = normalize(std::log(0.04), std::log(0.01));
    checks.push_back({"normalization example", std::abs(a - 0.6) < 1e-12 && std::abs(b - 0.8) < 1e-12, fmt::format("{} {}", format_double(a), format_double(b))});
    const double p = f_upper_tail(4.9646, 1, 10);
    checks.push_back({"F tail anchor", std::abs(p - 0.05) < 1e-4, format_double(p)});
    const auto q = bh_adjust({0.01, 0.02, 0.03, 0.04});
    checks.push_back({"BH step-up", q == std::vector<double>{0.04, 0.04, 0.04, 0.04}, ""});
    const auto n = extrapolate(0.0003051, 5e11);
    checks.push_back({"extrapolation", n == 152'550'000, std::to_string(n)});
    bool sums = true;
    for (double d = -700; d <= 700; d += 0.37) {
        const auto pair = normalize_pair(0.0, d);
        sums = sums && std::abs(pair.focus + pair.other - 1.0) <= std::numeric_limits<double>::epsilon();
    }
    checks.push_back({"normalized pairs sum to one", sums, ""});
    return checks;
}

int cmd_selftest(const RunConfig& c, const std::vector<std::string>& transcripts)
{
    auto checks = numeric_checks();
    auto endpoints = c.list("scorer");
    if (endpoints.empty())
        endpoints.push_back("mock:hash");
    for (const auto& endpoint : endpoints) {
        const auto factory = make_channel_factory(parse_endpoint(endpoint), timeout_of(c));
        for (const auto& path : transcripts) {
            const auto transcript = parse_transcript(read_file(path));
            auto channel = factory();
            const auto mismatches = replay_transcript(*channel, transcript);
            std::string detail = fmt::format("{} frames", transcript.size());
            if (!mismatches.empty())
                detail = fmt::format("frame {}: expected {} got {}", mismatches.front().index, mismatches.front().expected, mismatches.front().actual);
            checks.push_back({fmt::format("transcript {} on {}", fs::path(path).filename().string(), endpoint), mismatches.empty(), detail});
        }
        ScorerGateway gateway(factory, nullptr, retry_policy(c));
        const auto failures = check_token_sums(gateway, multilingual_sentences());
        checks.push_back({fmt::format("token sums on {} sentences via {}", multilingual_sentences().size(), endpoint), failures.empty(),
                          failures.empty() ? "" : failures.front()});
    }
    bool all = true;
    for (const auto& check : checks) {
        fmt::print("{} {}{}\n", check.pass ? "PASS" : "FAIL", check.name, check.detail.empty() ? "" : " (" + check.detail + ")");
        all = all && check.pass;
    }
    return all ? kOk : kValidation;
}

void report_error(const Error& e)
{
    if (const auto* s = dynamic_cast<const StimulusError*>(&e)) {
        for (const auto& issue : s->issues())
            fmt::print(stderr, "error: {}\n", issue.describe());
        return;
    }
    fmt::print(stderr, "error: {}\n", e.what());
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Structural priming evaluation for language models"};
    app.set_version_flag("--version", XLPRIME_VERSION);
    app.require_subcommand(1);
    app.fallthrough();

    Flags f;
    app.add_option("--config", f.config, "key = value configuration file");
    app.add_option("--scorer", f.scorers, "scorer endpoint: spawn:<cmd> | tcp:<host>:<port> | mock:uniform | mock:hash[:salt] | mock:table:<file>");
    app.add_option("--seed", f.seed, "random seed");
    app.add_option("--out", f.out, "output directory (default: out)");
    app.add_option("--family", f.family, "correction family: global | scorer | experiment | study");

    auto* score = app.add_subcommand("score", "score every prime/target pair and write archive.json");
    score->add_option("--stimuli", f.stimuli, "stimulus files");
    score->add_option("--experiments", f.experiments, "experiment ids to score (default: all)");
    score->add_option("--jobs", f.jobs, "parallel scoring workers");
    score->add_option("--cache", f.cache, "response cache directory (default: <out>/cache)");
    score->add_flag("--dry-run", f.dry_run, "list planned requests; contact nothing, write nothing");
    score->add_flag("--reverse", f.reverse, "also score each experiment with primes and targets swapped");

    auto* analyze = app.add_subcommand("analyze", "fit and test every experiment x scorer cell of an archive");
    analyze->add_option("--archive", f.archive, "archive file (default: <out>/archive.json)");
    analyze->add_option("--experiments", f.experiments, "experiment ids to analyze (default: all)");
    analyze->add_option("--jobs", f.jobs, "parallel fitting workers");
    analyze->add_option("--alpha", f.alpha, "significance level for adjusted p");
    analyze->add_flag("--logit", f.logit, "model logit(p_focus) instead of p_focus");

    auto* figure = app.add_subcommand("figure", "render one SVG bar chart per experiment");
    figure->add_option("--results", f.results, "results.json (default: <out>/results.json)");

    auto* contamscan = app.add_subcommand("contamscan", "estimate contaminant-language mass in a corpus");
    contamscan->add_option("--corpus", f.corpus, "directory of <lang>.txt files");
    contamscan->add_option("--classifier-a", f.classifier_a, "language-ID endpoint A");
    contamscan->add_option("--classifier-b", f.classifier_b, "language-ID endpoint B");
    contamscan->add_option("--jobs", f.jobs, "parallel classification workers");

    auto* selftest = app.add_subcommand("selftest", "numeric checks, transcript replay and token-sum invariants");
    selftest->add_option("--transcript", f.transcripts, "golden transcript to replay against each scorer");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kUsage;
    }

    try {
        const RunConfig config = effective_config(f);
        if (score->parsed())
            return cmd_score(config, f.dry_run);
        if (analyze->parsed())
            return cmd_analyze(config, f.archive);
        if (figure->parsed())
            return cmd_figure(config, f.results);
        if (contamscan->parsed())
            return cmd_contamscan(config);
        if (selftest->parsed())
            return cmd_selftest(config, f.transcripts);
    } catch (const Error& e) {
        report_error(e);
        return exit_code(e.code());
    } catch (const fs::filesystem_error& e) {
        fmt::print(stderr, "error: {}\n", e.what());
        return kUsage;
    } catch (const std::exception& e) {
        fmt::print(stderr, "error: {}\n", e.what());
        return kValidation;
    }
    return kUsage;
}
