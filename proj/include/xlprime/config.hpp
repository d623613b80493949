#pragma once

#include "xlprime/contamination.hpp"

#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace xlprime {

/// `key = value` lines; `#` starts a comment line; keys may repeat.
/// Keys are checked against a fixed vocabulary (plus `corpus_tokens.<lang>`).
class RunConfig {
public:
    /// Throws Error(Usage) naming the line for unknown keys or bad syntax.
    static RunConfig parse(std::string_view text, std::string_view source = "<config>");
    static RunConfig load(const std::string& path);

    static bool known_key(std::string_view key);

    std::optional<std::string> get(const std::string& key) const;
    std::vector<std::string> all(const std::string& key) const;
    /// Comma-separated values of every occurrence, trimmed, empties dropped.
    std::vector<std::string> list(const std::string& key) const;

    void set(const std::string& key, std::string value);
    void add(const std::string& key, std::string value);
    void erase(const std::string& key);

    /// Typed getters; throw Error(Usage) when present but unparseable.
    std::optional<double> number(const std::string& key) const;
    std::optional<uint64_t> count(const std::string& key) const;
    std::optional<bool> flag(const std::string& key) const;

    /// Sorted `key=value` lines over all keys except `excluded`.
    std::string canonical(const std::set<std::string>& excluded = {}) const;

    const std::map<std::string, std::vector<std::string>>& entries() const { return entries_; }

private:
    std::map<std::string, std::vector<std::string>> entries_;
};

/// Audit settings from `token_budget`, the three thresholds, `contaminants`,
/// `corpus_tokens.<lang>` and `seed`.
AuditConfig audit_config(const RunConfig& config);

} // namespace xlprime
