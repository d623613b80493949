#include "xlprime/archive.hpp"
#include "xlprime/error.hpp"
#include "xlprime/text.hpp"

#include <json.hpp>
#include <fmt/format.h>

#include <chrono>
#include <ctime>

namespace xlprime {

using nlohmann::ordered_json;

namespace {

ordered_json manifest_fields(const Manifest& m)
{
    ordered_json j;
    j["software_version"] = m.software_version;
    j["command"] = m.command;
    j["config_digest"] = m.config_digest;
    j["inputs"] = ordered_json::array();
    for (const auto& [name, digest] : m.inputs)
        j["inputs"].push_back({{"file", name}, {"sha256", digest}});
    j["scorer_ids"] = m.scorer_ids;
    j["seed"] = m.seed;
    return j;
}

Manifest manifest_from(const ordered_json& j)
{
    Manifest m;
    m.software_version = j.at("software_version").get<std::string>();
    m.command = j.at("command").get<std::string>();
    m.config_digest = j.at("config_digest").get<std::string>();
    for (const auto& input : j.at("inputs"))
        m.inputs.emplace_back(input.at("file").get<std::string>(), input.at("sha256").get<std::string>());
    m.scorer_ids = j.at("scorer_ids").get<std::vector<std::string>>();
    m.seed = j.at("seed").get<uint64_t>();
    return m;
}

} // namespace

std::string Manifest::canonical_json() const { return manifest_fields(*this).dump(); }

std::string Manifest::digest() const { return sha256_hex(canonical_json()); }

std::string Manifest::file_json(std::string_view started, std::string_view finished) const
{
    ordered_json j = manifest_fields(*this);
    j["digest"] = digest();
    j["started"] = std::string(started);
    j["finished"] = std::string(finished);
    return j.dump(2) + "\n";
}

Manifest Manifest::from_canonical_json(std::string_view text)
{
    try {
        return manifest_from(ordered_json::parse(text));
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::MalformedFile, fmt::format("manifest: {}", e.what()));
    }
}

std::string utc_timestamp()
{
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buffer[32];
    std::strftime(buffer, sizeof buffer, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buffer;
}

bool ArchiveEntry::complete() const
{
    for (const auto& row : logprob)
        for (const auto& cell : row)
            if (!cell)
                return false;
    return true;
}

std::string MissingCell::describe() const
{
    return fmt::format("{} / {} / {} prime={} target={}", scorer_id, experiment_id, item_id, to_string(prime), to_string(target));
}

const Experiment& Archive::experiment(const std::string& id) const
{
    for (const auto& e : experiments)
        if (e.experiment_id == id)
            return e;
    throw Error(ErrorCode::Usage, fmt::format("experiment '{}' is not in the archive", id));
}

std::vector<MissingCell> Archive::missing(const std::vector<std::string>& experiment_ids) const
{
    std::vector<MissingCell> out;
    for (const auto& entry : entries) {
        if (!experiment_ids.empty() && std::find(experiment_ids.begin(), experiment_ids.end(), entry.experiment_id) == experiment_ids.end())
            continue;
        const auto family = experiment(entry.experiment_id).family;
        for (auto prime : variants_of(family))
            for (auto target : variants_of(family))
                if (!entry.logprob[variant_index(prime)][variant_index(target)])
                    out.push_back({entry.scorer_id, entry.experiment_id, entry.item_id, prime, target});
    }
    return out;
}

std::vector<ScoredItem> Archive::scored_items(const std::string& scorer_id, const std::string& experiment_id) const
{
    const auto family = experiment(experiment_id).family;
    std::vector<ScoredItem> out;
    for (const auto& entry : entries) {
        if (entry.scorer_id != scorer_id || entry.experiment_id != experiment_id)
            continue;
        if (!entry.complete())
            throw Error(ErrorCode::IncompleteArchive, fmt::format("{} / {} / {} has unscored cells", scorer_id, experiment_id, entry.item_id));
        ScoredItem s;
        s.item_id = entry.item_id;
        s.family = family;
        s.scorer_id = scorer_id;
        for (int p = 0; p < 2; ++p)
            for (int t = 0; t < 2; ++t)
                s.logprob[p][t] = *entry.logprob[p][t];
        out.push_back(std::move(s));
    }
    return out;
}

Archive plan_archive(const Manifest& manifest, const std::vector<Experiment>& experiments, const std::vector<ScorerRecord>& scorers)
{
    Archive a;
    a.manifest = manifest;
    a.experiments = experiments;
    a.scorers = scorers;
    for (const auto& s : scorers)
        for (const auto& e : experiments)
            for (const auto& item : e.items)
                a.entries.push_back({s.scorer_id, e.experiment_id, item.item_id, {}});
    return a;
}

std::string write_archive(const Archive& archive)
{
    ordered_json j;
    j["format"] = "xlprime-archive";
    j["version"] = 1;
    j["manifest_digest"] = archive.manifest.digest();
    j["manifest"] = manifest_fields(archive.manifest);
    j["stimuli"] = write_experiments(archive.experiments);
    j["scorers"] = ordered_json::array();
    for (const auto& s : archive.scorers)
        j["scorers"].push_back({{"endpoint", s.endpoint}, {"scorer_id", s.scorer_id}, {"tok_fp", s.tokenizer_fingerprint}});
    j["entries"] = ordered_json::array();
    for (const auto& e : archive.entries) {
        const auto family = archive.experiment(e.experiment_id).family;
        ordered_json cells = ordered_json::array();
        for (auto prime : variants_of(family))
            for (auto target : variants_of(family)) {
                const auto& v = e.logprob[variant_index(prime)][variant_index(target)];
                cells.push_back({{"prime", to_string(prime)}, {"target", to_string(target)}, {"logprob", v ? ordered_json(*v) : ordered_json(nullptr)}});
            }
        j["entries"].push_back({{"scorer_id", e.scorer_id}, {"experiment_id", e.experiment_id}, {"item_id", e.item_id}, {"cells", cells}});
    }
    return j.dump(1) + "\n";
}

Archive read_archive(std::string_view text)
{
    Archive a;
    try {
        const auto j = ordered_json::parse(text);
        if (j.at("format") != "xlprime-archive" || j.at("version") != 1)
            throw Error(ErrorCode::MalformedFile, "not an xlprime archive (format/version)");
        a.manifest = manifest_from(j.at("manifest"));
        if (j.at("manifest_digest").get<std::string>() != a.manifest.digest())
            throw Error(ErrorCode::MalformedFile, "archive manifest digest does not match its manifest");
        a.experiments = parse_experiments(j.at("stimuli").get<std::string>(), "archive");
        for (const auto& s : j.at("scorers"))
            a.scorers.push_back({s.at("endpoint").get<std::string>(), s.at("scorer_id").get<std::string>(), s.at("tok_fp").get<std::string>()});
        for (const auto& e : j.at("entries")) {
            ArchiveEntry entry;
            entry.scorer_id = e.at("scorer_id").get<std::string>();
            entry.experiment_id = e.at("experiment_id").get<std::string>();
            entry.item_id = e.at("item_id").get<std::string>();
            const auto family = a.experiment(entry.experiment_id).family;
            for (const auto& c : e.at("cells")) {
                const auto prime = parse_variant(c.at("prime").get<std::string>());
                const auto target = parse_variant(c.at("target").get<std::string>());
                if (!prime || !target || !belongs_to(*prime, family) || !belongs_to(*target, family))
                    throw Error(ErrorCode::MalformedFile, fmt::format("archive entry {}: bad cell variant", entry.item_id));
                if (!c.at("logprob").is_null())
                    entry.logprob[variant_index(*prime)][variant_index(*target)] = c.at("logprob").get<double>();
            }
            a.entries.push_back(std::move(entry));
        }
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::MalformedFile, fmt::format("archive: {}", e.what()));
    } catch (const StimulusError& e) {
        throw Error(ErrorCode::MalformedFile, fmt::format("archive stimuli: {}", e.detail()));
    }
    return a;
}

} // namespace xlprime
