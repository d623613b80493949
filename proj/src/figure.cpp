#include "xlprime/figure.hpp"

#include <fmt/format.h>

#include <algorithm>

namespace xlprime {

namespace {

constexpr double kLeft = 64;
constexpr double kTop = 56;
constexpr double kPlotHeight = 240;
constexpr double kGroupWidth = 120;
constexpr double kBarWidth = 36;
constexpr double kBarGap = 8;
constexpr double kRight = 150;
constexpr double kBottom = 56;
constexpr const char* kColors[2] = {"#4c72b0", "#dd8452"};

std::string xml_escape(std::string_view text)
{
    std::string out;
    for (char c : text) {
        switch (c) {
        case '&': out += "&amp;"; break;
        case '<': out += "&lt;"; break;
        case '>': out += "&gt;"; break;
        case '"': out += "&quot;"; break;
        default: out += c;
        }
    }
    return out;
}

std::string fixed(double v) { return fmt::format("{:.2f}", v); }

double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

double y_of(double value) { return kTop + kPlotHeight * (1.0 - clamp01(value)); }

} // namespace

std::string significance_marker(double p_adj)
{
    if (p_adj < 0.001)
        return "***";
    if (p_adj < 0.01)
        return "**";
    if (p_adj < 0.05)
        return "*";
    return "";
}

std::vector<ExperimentFigure> figures_from(const AnalysisReport& report)
{
    std::vector<ExperimentFigure> out;
    for (const auto& e : report.experiments) {
        ExperimentFigure figure;
        figure.experiment_id = e.experiment_id;
        figure.title = fmt::format("{}: {} to {}, P({} target)", e.experiment_id, e.prime_language, e.target_language, to_string(e.focus_variant));
        figure.manifest_digest = report.manifest_digest;
        figure.focus_variant = e.focus_variant;
        figure.prime_variants = variants_of(e.family);

        auto group_for = [&](const std::string& source) {
            FigureGroup g;
            g.label = source;
            for (const auto& c : report.conditions)
                if (c.experiment_id == e.experiment_id && c.source == source) {
                    const int i = variant_index(c.prime_variant);
                    g.means[i] = c.mean;
                    g.se[i] = c.se;
                }
            return g;
        };
        const bool has_human = std::any_of(report.conditions.begin(), report.conditions.end(),
                                           [&](const ConditionRow& c) { return c.experiment_id == e.experiment_id && c.source == kHumanSource; });
        if (has_human)
            figure.groups.push_back(group_for(std::string(kHumanSource)));
        for (const auto& scorer : report.scorers) {
            const auto* r = report.result(e.experiment_id, scorer);
            const bool has_conditions = std::any_of(report.conditions.begin(), report.conditions.end(),
                                                    [&](const ConditionRow& c) { return c.experiment_id == e.experiment_id && c.source == scorer; });
            if (!has_conditions)
                continue;
            auto g = group_for(scorer);
            if (r)
                g.marker = significance_marker(r->p_adj);
            figure.groups.push_back(std::move(g));
        }
        out.push_back(std::move(figure));
    }
    return out;
}

std::string render_svg(const ExperimentFigure& figure)
{
    const double plot_width = kGroupWidth * static_cast<double>(std::max<size_t>(figure.groups.size(), 1));
    const double width = kLeft + plot_width + kRight;
    const double height = kTop + kPlotHeight + kBottom;
    const double baseline = kTop + kPlotHeight;

    std::string s;
    s += fmt::format(R"(<svg xmlns="http://www.w3.org/2000/svg" width="{0}" height="{1}" viewBox="0 0 {0} {1}" font-family="sans-serif" font-size="12">)", fixed(width),
                     fixed(height));
    s += "\n";
    s += fmt::format("<!-- manifest_digest: {} -->\n", xml_escape(figure.manifest_digest));
    s += fmt::format(R"(<rect x="0" y="0" width="{}" height="{}" fill="#ffffff"/>)", fixed(width), fixed(height)) + "\n";
    s += fmt::format(R"(<text x="{}" y="24" font-size="14" text-anchor="middle">{}</text>)", fixed(width / 2), xml_escape(figure.title)) + "\n";

    for (int t = 0; t <= 4; ++t) {
        const double value = t * 0.25;
        const double y = y_of(value);
        s += fmt::format(R"(<line x1="{}" y1="{}" x2="{}" y2="{}" stroke="#dddddd"/>)", fixed(kLeft), fixed(y), fixed(kLeft + plot_width), fixed(y)) + "\n";
        s += fmt::format(R"(<text x="{}" y="{}" text-anchor="end">{:.2f}</text>)", fixed(kLeft - 6), fixed(y + 4), value) + "\n";
    }
    s += fmt::format(R"(<line x1="{0}" y1="{1}" x2="{0}" y2="{2}" stroke="#000000"/>)", fixed(kLeft), fixed(kTop), fixed(baseline)) + "\n";
    s += fmt::format(R"(<line x1="{0}" y1="{2}" x2="{1}" y2="{2}" stroke="#000000"/>)", fixed(kLeft), fixed(kLeft + plot_width), fixed(baseline)) + "\n";
    s += fmt::format(R"svg(<text x="18" y="{}" text-anchor="middle" transform="rotate(-90 18 {})">P({} target)</text>)svg", fixed(kTop + kPlotHeight / 2),
                     fixed(kTop + kPlotHeight / 2), to_string(figure.focus_variant)) + "\n";

    for (size_t g = 0; g < figure.groups.size(); ++g) {
        const auto& group = figure.groups[g];
        const double group_x = kLeft + kGroupWidth * static_cast<double>(g);
        const double first_bar = group_x + (kGroupWidth - 2 * kBarWidth - kBarGap) / 2;
        double top_extent = baseline;
        s += fmt::format(R"(<g class="group" data-source="{}">)", xml_escape(group.label)) + "\n";
        for (int i = 0; i < 2; ++i) {
            const double x = first_bar + i * (kBarWidth + kBarGap);
            const double mean = clamp01(group.means[i]);
            const double y = y_of(mean);
            s += fmt::format(R"(<rect class="bar" data-prime="{}" data-mean="{}" x="{}" y="{}" width="{}" height="{}" fill="{}"/>)", to_string(figure.prime_variants[i]),
                             report_number(group.means[i]), fixed(x), fixed(y), fixed(kBarWidth), fixed(baseline - y), kColors[i]) + "\n";
            top_extent = std::min(top_extent, y);
            if (group.se[i]) {
                const double lo = y_of(mean - *group.se[i]);
                const double hi = y_of(mean + *group.se[i]);
                const double cx = x + kBarWidth / 2;
                s += fmt::format(R"(<path class="whisker" d="M{0} {1}V{2}M{3} {1}H{4}M{3} {2}H{4}" stroke="#000000" fill="none"/>)", fixed(cx), fixed(lo), fixed(hi),
                                 fixed(cx - 6), fixed(cx + 6)) + "\n";
                top_extent = std::min(top_extent, hi);
            }
        }
        if (!group.marker.empty())
            s += fmt::format(R"(<text class="marker" x="{}" y="{}" text-anchor="middle" font-size="16">{}</text>)", fixed(group_x + kGroupWidth / 2), fixed(top_extent - 6),
                             group.marker) + "\n";
        s += fmt::format(R"(<text x="{}" y="{}" text-anchor="middle">{}</text>)", fixed(group_x + kGroupWidth / 2), fixed(baseline + 18), xml_escape(group.label)) + "\n";
        s += "</g>\n";
    }

    const double legend_x = kLeft + plot_width + 20;
    for (int i = 0; i < 2; ++i) {
        const double y = kTop + 20.0 * i;
        s += fmt::format(R"(<rect x="{}" y="{}" width="12" height="12" fill="{}"/>)", fixed(legend_x), fixed(y), kColors[i]) + "\n";
        s += fmt::format(R"(<text x="{}" y="{}">prime {}</text>)", fixed(legend_x + 18), fixed(y + 10), to_string(figure.prime_variants[i])) + "\n";
    }
    s += fmt::format(R"(<text x="{}" y="{}" font-size="10">* q&lt;0.05  ** q&lt;0.01  *** q&lt;0.001</text>)", fixed(legend_x), fixed(kTop + 52)) + "\n";
    s += "</svg>\n";
    return s;
}

} // namespace xlprime
