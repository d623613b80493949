#include "xlprime/stimulus.hpp"
#include "xlprime/text.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <charconv>
#include <map>
#include <set>

namespace xlprime {

namespace {

constexpr std::array<std::string_view, 7> kRequiredKeys = {
    "experiment_id", "study_tag", "prime_language", "target_language", "family", "focus_variant", "human_direction",
};

bool is_known_key(std::string_view key)
{
    return key == "human_means" || std::find(kRequiredKeys.begin(), kRequiredKeys.end(), key) != kRequiredKeys.end();
}

struct Column {
    bool is_prime = false;
    Variant variant = Variant::DO;
};

struct Block {
    size_t line = 0;
    std::map<std::string, std::pair<std::string, size_t>, std::less<>> headers;
    std::optional<std::vector<Column>> columns;
    std::vector<std::pair<size_t, std::vector<std::string>>> rows;
};

class Parser {
public:
    explicit Parser(std::string_view source) : source_(source) {}

    std::vector<Experiment> run(std::string_view raw)
    {
        std::string text;
        try {
            text = nfc(raw);
        } catch (const Error& e) {
            issue(ErrorCode::MalformedFile, 0, "", "", "", e.detail());
            throw StimulusError(std::move(issues_));
        }
        std::string_view view = text;
        if (starts_with(view, "\xEF\xBB\xBF"))
            view.remove_prefix(3);

        const auto lines = split(view, '\n');
        for (size_t i = 0; i < lines.size(); ++i)
            consume(lines[i], i + 1);
        if (!blocks_.empty())
            finish(blocks_.back());

        if (!issues_.empty())
            throw StimulusError(std::move(issues_));
        return std::move(experiments_);
    }

private:
    void issue(ErrorCode code, size_t line, std::string experiment_id, std::string item_id, std::string field, std::string message)
    {
        issues_.push_back({code, std::string(source_), line, std::move(experiment_id), std::move(item_id), std::move(field), std::move(message)});
    }

    std::string current_id() const
    {
        if (blocks_.empty())
            return "";
        const auto it = blocks_.back().headers.find("experiment_id");
        return it == blocks_.back().headers.end() ? "" : it->second.first;
    }

    void consume(std::string_view line, size_t number)
    {
        if (!line.empty() && line.back() == '\r')
            line.remove_suffix(1);
        if (trim(line).empty() || starts_with(line, "##"))
            return;

        if (line.front() == '#') {
            header(line.substr(1), number);
            return;
        }
        if (blocks_.empty()) {
            issue(ErrorCode::MalformedFile, number, "", "", "", "content before the first #experiment_id header");
            return;
        }
        Block& block = blocks_.back();
        const auto fields = split(line, '\t');
        if (!block.columns) {
            block.columns = columns(fields, number, block);
            return;
        }
        if (fields.size() != 5) {
            issue(ErrorCode::MalformedFile, number, current_id(), std::string(trim(fields[0])), "",
                  fmt::format("expected 5 tab-separated fields, found {}", fields.size()));
            return;
        }
        std::vector<std::string> cells;
        for (auto f : fields)
            cells.emplace_back(trim(f));
        block.rows.emplace_back(number, std::move(cells));
    }

    void header(std::string_view body, size_t number)
    {
        const size_t colon = body.find(':');
        if (colon == std::string_view::npos) {
            issue(ErrorCode::MalformedFile, number, current_id(), "", "", "header line without ':'");
            return;
        }
        const std::string key(trim(body.substr(0, colon)));
        const std::string value(trim(body.substr(colon + 1)));
        if (!is_known_key(key)) {
            issue(ErrorCode::MalformedFile, number, current_id(), "", key, "unknown header key '" + key + "'");
            return;
        }
        if (key == "experiment_id") {
            if (!blocks_.empty())
                finish(blocks_.back());
            blocks_.emplace_back();
            blocks_.back().line = number;
        } else if (blocks_.empty()) {
            issue(ErrorCode::MalformedFile, number, "", "", key, "header before the first #experiment_id");
            return;
        }
        Block& block = blocks_.back();
        if (block.columns) {
            issue(ErrorCode::MalformedFile, number, current_id(), "", key, "header after the column line");
            return;
        }
        if (!block.headers.emplace(key, std::make_pair(value, number)).second)
            issue(ErrorCode::MalformedFile, number, current_id(), "", key, "duplicate header '" + key + "'");
    }

    std::optional<std::vector<Column>> columns(const std::vector<std::string_view>& fields, size_t number, const Block& block)
    {
        if (fields.size() != 5 || trim(fields[0]) != "item_id") {
            issue(ErrorCode::MalformedFile, number, current_id(), "", "",
                  "expected column line 'item_id<TAB>prime:V<TAB>prime:V<TAB>target:V<TAB>target:V'");
            return std::vector<Column>{};
        }
        std::vector<Column> cols;
        std::set<std::string> seen;
        for (size_t i = 1; i < fields.size(); ++i) {
            const std::string name(trim(fields[i]));
            const size_t colon = name.find(':');
            const std::string role = colon == std::string::npos ? "" : name.substr(0, colon);
            const auto variant = colon == std::string::npos ? std::nullopt : parse_variant(name.substr(colon + 1));
            if ((role != "prime" && role != "target") || !variant) {
                issue(ErrorCode::MalformedFile, number, current_id(), "", name, "unknown column '" + name + "'");
                return std::vector<Column>{};
            }
            if (!seen.insert(name).second) {
                issue(ErrorCode::MalformedFile, number, current_id(), "", name, "duplicate column '" + name + "'");
                return std::vector<Column>{};
            }
            cols.push_back({role == "prime", *variant});
        }
        if (const auto fam = block.headers.find("family"); fam != block.headers.end()) {
            if (const auto family = parse_family(fam->second.first)) {
                for (const auto& c : cols)
                    if (!belongs_to(c.variant, *family)) {
                        issue(ErrorCode::SchemaViolation, number, current_id(), "", std::string(to_string(c.variant)),
                              fmt::format("column variant {} does not belong to family {}", to_string(c.variant), to_string(*family)));
                        return std::vector<Column>{};
                    }
            }
        }
        return cols;
    }

    void finish(Block& block)
    {
        const size_t before = issues_.size();
        Experiment e;
        const auto get = [&](std::string_view key) -> std::optional<std::pair<std::string, size_t>> {
            const auto it = block.headers.find(key);
            if (it == block.headers.end())
                return std::nullopt;
            return it->second;
        };
        e.experiment_id = get("experiment_id")->first;
        for (auto key : kRequiredKeys)
            if (!get(key))
                issue(ErrorCode::SchemaViolation, block.line, e.experiment_id, "", std::string(key), "missing header '" + std::string(key) + "'");
        for (auto key : {"experiment_id", "study_tag", "prime_language", "target_language"}) {
            if (const auto h = get(key); h && (h->first.empty() || h->first.find_first_of(" \t") != std::string::npos))
                issue(ErrorCode::SchemaViolation, h->second, e.experiment_id, "", key, std::string(key) + " must be a non-empty token");
        }
        e.study_tag = get("study_tag").value_or(std::pair<std::string, size_t>{}).first;
        e.prime_language = get("prime_language").value_or(std::pair<std::string, size_t>{}).first;
        e.target_language = get("target_language").value_or(std::pair<std::string, size_t>{}).first;

        std::optional<Family> family;
        if (const auto h = get("family")) {
            family = parse_family(h->first);
            if (!family)
                issue(ErrorCode::SchemaViolation, h->second, e.experiment_id, "", "family", "unknown family '" + h->first + "'");
        }
        if (const auto h = get("focus_variant")) {
            const auto v = parse_variant(h->first);
            if (!v)
                issue(ErrorCode::SchemaViolation, h->second, e.experiment_id, "", "focus_variant", "unknown variant '" + h->first + "'");
            else if (family && !belongs_to(*v, *family))
                issue(ErrorCode::SchemaViolation, h->second, e.experiment_id, "", "focus_variant",
                      fmt::format("focus variant {} does not belong to family {}", h->first, to_string(*family)));
            else
                e.focus_variant = *v;
        }
        if (const auto h = get("human_direction")) {
            const auto d = parse_direction(h->first);
            if (!d)
                issue(ErrorCode::SchemaViolation, h->second, e.experiment_id, "", "human_direction", "unknown direction '" + h->first + "'");
            else
                e.human_direction = *d;
        }
        if (family)
            e.family = *family;
        if (const auto h = get("human_means"); h && family)
            e.human_means = human_means(h->first, h->second, *family, e.experiment_id);

        if (!block.columns) {
            issue(ErrorCode::MalformedFile, block.line, e.experiment_id, "", "", "missing column line");
        } else if (block.columns->size() == 4 && family) {
            bool complete = true;
            for (bool is_prime : {true, false})
                for (auto v : variants_of(*family))
                    complete &= std::count_if(block.columns->begin(), block.columns->end(),
                                              [&](const Column& c) { return c.is_prime == is_prime && c.variant == v; }) == 1;
            if (!complete)
                issue(ErrorCode::SchemaViolation, block.line, e.experiment_id, "", "columns",
                      "columns must name both prime and both target variants of the family");
            else
                items(block, e);
        }
        if (block.rows.empty() && block.columns)
            issue(ErrorCode::SchemaViolation, block.line, e.experiment_id, "", "items", "experiment has no items");

        if (!ids_.insert(e.experiment_id).second)
            issue(ErrorCode::DuplicateId, block.line, e.experiment_id, "", "experiment_id", "duplicate experiment_id '" + e.experiment_id + "'");
        if (issues_.size() == before)
            experiments_.push_back(std::move(e));
    }

    std::optional<std::array<double, 2>> human_means(const std::string& value, size_t line, Family family, const std::string& id)
    {
        std::array<double, 2> means{};
        std::array<bool, 2> seen{};
        for (auto part : words(value)) {
            const size_t eq = part.find('=');
            const auto v = eq == std::string_view::npos ? std::nullopt : parse_variant(part.substr(0, eq));
            double number = -1;
            if (v && belongs_to(*v, family)) {
                const auto num = part.substr(eq + 1);
                const auto [ptr, ec] = std::from_chars(num.data(), num.data() + num.size(), number);
                if (ec != std::errc{} || ptr != num.data() + num.size())
                    number = -1;
            }
            if (!v || !belongs_to(*v, family) || !(number >= 0.0 && number <= 1.0) || seen[variant_index(*v)]) {
                issue(ErrorCode::SchemaViolation, line, id, "", "human_means", "expected 'V1=p V2=p' with proportions in [0,1]");
                return std::nullopt;
            }
            means[variant_index(*v)] = number;
            seen[variant_index(*v)] = true;
        }
        if (!seen[0] || !seen[1]) {
            issue(ErrorCode::SchemaViolation, line, id, "", "human_means", "human_means must give both prime variants");
            return std::nullopt;
        }
        return means;
    }

    void items(const Block& block, Experiment& e)
    {
        std::set<std::string> seen;
        for (const auto& [line, cells] : block.rows) {
            StimulusItem item;
            item.item_id = cells[0];
            if (item.item_id.empty()) {
                issue(ErrorCode::SchemaViolation, line, e.experiment_id, "", "item_id", "empty item_id");
                continue;
            }
            if (!seen.insert(item.item_id).second) {
                issue(ErrorCode::DuplicateId, line, e.experiment_id, item.item_id, "item_id", "duplicate item_id '" + item.item_id + "'");
                continue;
            }
            for (size_t c = 0; c < 4; ++c) {
                const Column& col = (*block.columns)[c];
                auto& slot = col.is_prime ? item.primes[variant_index(col.variant)] : item.targets[variant_index(col.variant)];
                slot = cells[c + 1];
            }
            e.items.push_back(std::move(item));
        }
        for (auto& problem : validate_items(e))
            issues_.push_back(std::move(problem));
        // Line numbers for item-level problems.
        for (auto& problem : issues_)
            if (problem.line == 0 && problem.experiment_id == e.experiment_id)
                for (const auto& [line, cells] : block.rows)
                    if (cells[0] == problem.item_id)
                        problem.line = line;
    }

    std::vector<StimulusIssue> validate_items(const Experiment& e) const
    {
        std::vector<StimulusIssue> found;
        for (auto& problem : validate(e))
            if (!problem.item_id.empty()) {
                problem.source = std::string(source_);
                found.push_back(std::move(problem));
            }
        return found;
    }

    std::string_view source_;
    std::vector<Block> blocks_;
    std::vector<StimulusIssue> issues_;
    std::vector<Experiment> experiments_;
    std::set<std::string> ids_;
};

} // namespace

std::string StimulusIssue::describe() const
{
    std::string where = source;
    if (line > 0)
        where += fmt::format(":{}", line);
    std::string what;
    if (!experiment_id.empty())
        what += " experiment=" + experiment_id;
    if (!item_id.empty())
        what += " item=" + item_id;
    if (!field.empty())
        what += " field=" + field;
    return fmt::format("{}: {}{}: {}", where, to_string(code), what, message);
}

namespace {

std::string summarize(const std::vector<StimulusIssue>& issues)
{
    std::string text = fmt::format("{} problem(s)", issues.size());
    for (const auto& i : issues)
        text += "\n  " + i.describe();
    return text;
}

} // namespace

StimulusError::StimulusError(std::vector<StimulusIssue> issues)
    : Error(issues.empty() ? ErrorCode::MalformedFile : issues.front().code, summarize(issues)), issues_(std::move(issues))
{
}

std::vector<StimulusIssue> validate(const Experiment& e)
{
    std::vector<StimulusIssue> found;
    const auto add = [&](ErrorCode code, const std::string& item, const std::string& field, const std::string& message) {
        found.push_back({code, "", 0, e.experiment_id, item, field, message});
    };
    if (!belongs_to(e.focus_variant, e.family))
        add(ErrorCode::SchemaViolation, "", "focus_variant", "focus variant outside the experiment's family");
    if (e.items.empty())
        add(ErrorCode::SchemaViolation, "", "items", "experiment has no items");
    std::set<std::string> ids;
    const auto variants = variants_of(e.family);
    for (const auto& item : e.items) {
        if (!ids.insert(item.item_id).second)
            add(ErrorCode::DuplicateId, item.item_id, "item_id", "duplicate item_id");
        for (int k = 0; k < 2; ++k) {
            if (trim(item.primes[k]).empty())
                add(ErrorCode::SchemaViolation, item.item_id, "prime:" + std::string(to_string(variants[k])), "empty sentence");
            if (trim(item.targets[k]).empty())
                add(ErrorCode::SchemaViolation, item.item_id, "target:" + std::string(to_string(variants[k])), "empty sentence");
        }
        if (item.primes[0] == item.primes[1] && !trim(item.primes[0]).empty())
            add(ErrorCode::SchemaViolation, item.item_id, "prime", "the two prime variants are identical");
        if (item.targets[0] == item.targets[1] && !trim(item.targets[0]).empty())
            add(ErrorCode::SchemaViolation, item.item_id, "target", "the two target variants are identical");
    }
    return found;
}

std::vector<Experiment> parse_experiments(std::string_view text, std::string_view source)
{
    return Parser(source).run(text);
}

std::vector<Experiment> load_experiments(const std::string& path)
{
    std::string bytes;
    try {
        bytes = read_file(path);
    } catch (const Error& e) {
        throw StimulusError({{ErrorCode::MalformedFile, path, 0, "", "", "", e.detail()}});
    }
    return parse_experiments(bytes, path);
}

std::vector<Experiment> load_experiments(const std::vector<std::string>& paths)
{
    std::vector<Experiment> all;
    std::vector<StimulusIssue> issues;
    std::map<std::string, std::string> origin;
    for (const auto& path : paths) {
        try {
            for (auto& e : load_experiments(path)) {
                if (const auto [it, fresh] = origin.emplace(e.experiment_id, path); !fresh) {
                    issues.push_back({ErrorCode::DuplicateId, path, 0, e.experiment_id, "", "experiment_id",
                                      "experiment_id also defined in " + it->second});
                    continue;
                }
                all.push_back(std::move(e));
            }
        } catch (const StimulusError& e) {
            issues.insert(issues.end(), e.issues().begin(), e.issues().end());
        }
    }
    if (!issues.empty())
        throw StimulusError(std::move(issues));
    return all;
}

Experiment reverse_experiment(const Experiment& experiment)
{
    Experiment reversed = experiment;
    reversed.experiment_id += kReversedSuffix;
    std::swap(reversed.prime_language, reversed.target_language);
    reversed.human_direction = Direction::None;
    reversed.human_means.reset();
    for (auto& item : reversed.items)
        std::swap(item.primes, item.targets);
    return reversed;
}

std::string write_experiments(const std::vector<Experiment>& experiments)
{
    std::string out;
    for (const auto& e : experiments) {
        if (!out.empty())
            out += '\n';
        out += "#experiment_id: " + e.experiment_id + '\n';
        out += "#study_tag: " + e.study_tag + '\n';
        out += "#prime_language: " + e.prime_language + '\n';
        out += "#target_language: " + e.target_language + '\n';
        out += fmt::format("#family: {}\n", to_string(e.family));
        out += fmt::format("#focus_variant: {}\n", to_string(e.focus_variant));
        out += fmt::format("#human_direction: {}\n", to_string(e.human_direction));
        const auto v = variants_of(e.family);
        if (e.human_means)
            out += fmt::format("#human_means: {}={} {}={}\n", to_string(v[0]), format_double((*e.human_means)[0]), to_string(v[1]),
                               format_double((*e.human_means)[1]));
        out += fmt::format("item_id\tprime:{}\tprime:{}\ttarget:{}\ttarget:{}\n", to_string(v[0]), to_string(v[1]), to_string(v[0]), to_string(v[1]));
        for (const auto& item : e.items)
            out += fmt::format("{}\t{}\t{}\t{}\t{}\n", item.item_id, item.primes[0], item.primes[1], item.targets[0], item.targets[1]);
    }
    return out;
}

} // namespace xlprime
