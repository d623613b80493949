#pragma once

#include "xlprime/gateway.hpp"
#include "xlprime/stimulus.hpp"

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace xlprime {

/// Provenance of one command's outputs. The digest covers everything except
/// timestamps, so identical inputs give identical digests.
struct Manifest {
    std::string software_version = XLPRIME_VERSION;
    std::string command;
    std::string config_digest;
    std::vector<std::pair<std::string, std::string>> inputs; // (file name, sha256)
    std::vector<std::string> scorer_ids;
    uint64_t seed = 0;

    std::string canonical_json() const;
    std::string digest() const;

    /// manifest.json body: the canonical fields, the digest and the timestamps.
    std::string file_json(std::string_view started, std::string_view finished) const;

    static Manifest from_canonical_json(std::string_view text);

    friend bool operator==(const Manifest&, const Manifest&) = default;
};

std::string utc_timestamp();

struct ScorerRecord {
    std::string endpoint;
    std::string scorer_id;
    std::string tokenizer_fingerprint;

    friend bool operator==(const ScorerRecord&, const ScorerRecord&) = default;
};

using PartialMatrix = std::array<std::array<std::optional<double>, 2>, 2>; // [prime][target]

struct ArchiveEntry {
    std::string scorer_id;
    std::string experiment_id;
    std::string item_id;
    PartialMatrix logprob{};

    bool complete() const;

    friend bool operator==(const ArchiveEntry&, const ArchiveEntry&) = default;
};

struct MissingCell {
    std::string scorer_id;
    std::string experiment_id;
    std::string item_id;
    Variant prime = Variant::DO;
    Variant target = Variant::DO;

    std::string describe() const;
};

/// Scores for every (scorer, experiment, item), with unscored cells empty.
struct Archive {
    Manifest manifest;
    std::vector<Experiment> experiments;
    std::vector<ScorerRecord> scorers;
    std::vector<ArchiveEntry> entries; // scorer-major, then experiment and item order

    const Experiment& experiment(const std::string& id) const;

    /// Cells still unscored, restricted to `experiment_ids` when non-empty.
    std::vector<MissingCell> missing(const std::vector<std::string>& experiment_ids = {}) const;

    /// Complete matrices for one cell. Throws Error(IncompleteArchive).
    std::vector<ScoredItem> scored_items(const std::string& scorer_id, const std::string& experiment_id) const;

    friend bool operator==(const Archive&, const Archive&) = default;
};

/// Empty archive with one entry per (scorer, experiment, item).
Archive plan_archive(const Manifest& manifest, const std::vector<Experiment>& experiments, const std::vector<ScorerRecord>& scorers);

std::string write_archive(const Archive& archive);

/// Throws Error(MalformedFile) on structural problems.
Archive read_archive(std::string_view text);

} // namespace xlprime
