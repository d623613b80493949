#pragma once

#include "xlprime/report.hpp"

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace xlprime {

/// One cluster of two bars (one per prime condition).
struct FigureGroup {
    std::string label;
    std::array<double, 2> means{};
    std::array<std::optional<double>, 2> se{};
    std::string marker; // empty, "*", "**" or "***"
};

struct ExperimentFigure {
    std::string experiment_id;
    std::string title;
    std::string manifest_digest;
    Variant focus_variant = Variant::PO;
    std::array<Variant, 2> prime_variants{};
    std::vector<FigureGroup> groups;
};

/// "***" below 0.001, "**" below 0.01, "*" below 0.05, otherwise empty.
std::string significance_marker(double p_adj);

/// One figure per experiment: the human group first when present, then the
/// scorers in report order.
std::vector<ExperimentFigure> figures_from(const AnalysisReport& report);

/// Standalone SVG. Coordinates are printed with two decimals, so equal input
/// gives identical bytes.
std::string render_svg(const ExperimentFigure& figure);

} // namespace xlprime
