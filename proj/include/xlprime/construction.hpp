#pragma once

#include <array>
#include <compare>
#include <optional>
#include <string_view>

namespace xlprime {

enum class Family { Dative, Voice, Genitive };

// Enumeration order within a family is significant: it fixes matrix cell
// order and observation order everywhere downstream.
enum class Variant { DO, PO, Active, Passive, OfGen, SGen };

enum class Direction { Positive, Negative, None };

struct Construction {
    Family family;
    Variant variant;

    friend auto operator<=>(const Construction&, const Construction&) = default;
};

/// The two variants of an alternation family, in enumeration order.
std::array<Variant, 2> variants_of(Family family);

Family family_of(Variant variant);

bool belongs_to(Variant variant, Family family);

/// Index (0 or 1) of a variant within its family's enumeration.
int variant_index(Variant variant);

Variant other_variant(Variant variant);

std::string_view to_string(Family family);
std::string_view to_string(Variant variant);
std::string_view to_string(Direction direction);

std::optional<Family> parse_family(std::string_view text);
std::optional<Variant> parse_variant(std::string_view text);
std::optional<Direction> parse_direction(std::string_view text);

} // namespace xlprime
