#include "xlprime/construction.hpp"
#include "xlprime/error.hpp"

namespace xlprime {

std::string_view to_string(ErrorCode code)
{
    switch (code) {
    case ErrorCode::MalformedFile: return "MALFORMED_FILE";
    case ErrorCode::SchemaViolation: return "SCHEMA_VIOLATION";
    case ErrorCode::DuplicateId: return "DUPLICATE_ID";
    case ErrorCode::ScorerUnreachable: return "SCORER_UNREACHABLE";
    case ErrorCode::ProtocolError: return "PROTOCOL_ERROR";
    case ErrorCode::ScorerRefused: return "SCORER_REFUSED";
    case ErrorCode::MissingScore: return "MISSING_SCORE";
    case ErrorCode::NonFiniteInput: return "NON_FINITE_INPUT";
    case ErrorCode::DegenerateInput: return "DEGENERATE_INPUT";
    case ErrorCode::NoConvergence: return "NO_CONVERGENCE";
    case ErrorCode::OutOfRange: return "OUT_OF_RANGE";
    case ErrorCode::SourceExhausted: return "SOURCE_EXHAUSTED";
    case ErrorCode::ClassifierUnreachable: return "CLASSIFIER_UNREACHABLE";
    case ErrorCode::IncompleteArchive: return "INCOMPLETE_ARCHIVE";
    case ErrorCode::Usage: return "USAGE";
    }
    return "UNKNOWN";
}

std::array<Variant, 2> variants_of(Family family)
{
    switch (family) {
    case Family::Dative: return {Variant::DO, Variant::PO};
    case Family::Voice: return {Variant::Active, Variant::Passive};
    case Family::Genitive: return {Variant::OfGen, Variant::SGen};
    }
    return {Variant::DO, Variant::PO};
}

Family family_of(Variant variant)
{
    switch (variant) {
    case Variant::DO:
    case Variant::PO: return Family::Dative;
    case Variant::Active:
    case Variant::Passive: return Family::Voice;
    case Variant::OfGen:
    case Variant::SGen: return Family::Genitive;
    }
    return Family::Dative;
}

bool belongs_to(Variant variant, Family family) { return family_of(variant) == family; }

int variant_index(Variant variant)
{
    const auto pair = variants_of(family_of(variant));
    return pair[0] == variant ? 0 : 1;
}

Variant other_variant(Variant variant)
{
    const auto pair = variants_of(family_of(variant));
    return pair[0] == variant ? pair[1] : pair[0];
}

std::string_view to_string(Family family)
{
    switch (family) {
    case Family::Dative: return "DATIVE";
    case Family::Voice: return "VOICE";
    case Family::Genitive: return "GENITIVE";
    }
    return "?";
}

std::string_view to_string(Variant variant)
{
    switch (variant) {
    case Variant::DO: return "DO";
    case Variant::PO: return "PO";
    case Variant::Active: return "ACTIVE";
    case Variant::Passive: return "PASSIVE";
    case Variant::OfGen: return "OF_GEN";
    case Variant::SGen: return "S_GEN";
    }
    return "?";
}

std::string_view to_string(Direction direction)
{
    switch (direction) {
    case Direction::Positive: return "POSITIVE";
    case Direction::Negative: return "NEGATIVE";
    case Direction::None: return "NONE";
    }
    return "?";
}

std::optional<Family> parse_family(std::string_view text)
{
    for (auto f : {Family::Dative, Family::Voice, Family::Genitive})
        if (to_string(f) == text)
            return f;
    return std::nullopt;
}

std::optional<Variant> parse_variant(std::string_view text)
{
    for (auto v : {Variant::DO, Variant::PO, Variant::Active, Variant::Passive, Variant::OfGen, Variant::SGen})
        if (to_string(v) == text)
            return v;
    return std::nullopt;
}

std::optional<Direction> parse_direction(std::string_view text)
{
    for (auto d : {Direction::Positive, Direction::Negative, Direction::None})
        if (to_string(d) == text)
            return d;
    return std::nullopt;
}

} // namespace xlprime
