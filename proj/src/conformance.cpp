#include "xlprime/conformance.hpp"
#include "xlprime/error.hpp"
#include "xlprime/protocol.hpp"
#include "xlprime/text.hpp"

#include <fmt/format.h>

#include <cmath>

namespace xlprime {

Transcript parse_transcript(std::string_view text)
{
    std::vector<std::string_view> frames;
    for (auto line : split(text, '\n'))
        if (!line.empty() && line.front() != '#')
            frames.push_back(line);
    if (frames.size() % 2 != 0)
        throw Error(ErrorCode::MalformedFile, "transcript ends with a request that has no expected response");
    Transcript out;
    for (size_t i = 0; i < frames.size(); i += 2)
        out.emplace_back(frames[i], frames[i + 1]);
    return out;
}

std::vector<TranscriptMismatch> replay_transcript(LineChannel& channel, const Transcript& transcript)
{
    std::vector<TranscriptMismatch> out;
    for (size_t i = 0; i < transcript.size(); ++i) {
        const auto& [request, expected] = transcript[i];
        std::string actual;
        try {
            actual = channel.exchange(request);
        } catch (const std::exception& e) {
            actual = fmt::format("<transport failure: {}>", e.what());
        }
        if (actual != expected)
            out.push_back({i, request, expected, actual});
    }
    return out;
}

const std::vector<std::string>& multilingual_sentences()
{
    static const std::vector<std::string> sentences = [] {
        struct Language {
            std::vector<std::string> subjects;
            std::vector<std::string> predicates;
        };
        const std::vector<Language> languages = {
            {{"The cowboy", "The nun", "The chef", "The sailor", "The clown"}, {"gives the pirate an apple.", "sells a book to the king."}},
            {{"De cowboy", "De non", "De kok", "De zeeman", "De clown"}, {"geeft de piraat een appel.", "verkoopt een boek aan de koning."}},
            {{"Der Cowboy", "Die Nonne", "Der Koch", "Der Seemann", "Der Clown"}, {"gibt dem Piraten einen Apfel.", "verkauft dem König ein Buch."}},
            {{"Kowboj", "Zakonnica", "Kucharz", "Żeglarz", "Błazen"}, {"daje piratowi jabłko.", "sprzedaje królowi książkę."}},
            {{"El vaquero", "La monja", "El cocinero", "El marinero", "El payaso"}, {"le da una manzana al pirata.", "vende un libro al rey."}},
            {{"Le cowboy", "La religieuse", "Le cuisinier", "Le marin", "Le clown"}, {"donne une pomme au pirate.", "vend un livre au roi."}},
            {{"Ο καουμπόι", "Η καλόγρια", "Ο μάγειρας", "Ο ναύτης", "Ο κλόουν"}, {"δίνει στον πειρατή ένα μήλο.", "πουλάει ένα βιβλίο στον βασιλιά."}},
            {{"Ковбой", "Монахиня", "Повар", "Моряк", "Клоун"}, {"даёт пирату яблоко.", "продаёт королю книгу."}},
            {{"Kovboy", "Rahibe", "Aşçı", "Denizci", "Palyaço"}, {"korsana bir elma verir.", "krala bir kitap satar."}},
            {{"牛仔", "修女", "厨师", "水手", "小丑"}, {"给了 海盗 一个 苹果。", "卖给 国王 一本 书。"}},
        };
        std::vector<std::string> out;
        for (const auto& l : languages)
            for (const auto& s : l.subjects)
                for (const auto& p : l.predicates)
                    out.push_back(s + " " + p);
        return out;
    }();
    return sentences;
}

std::vector<std::string> check_token_sums(ScorerGateway& gateway, const std::vector<std::string>& sentences)
{
    std::vector<std::string> failures;
    for (size_t i = 0; i < sentences.size(); ++i) {
        const std::string& context = i == 0 ? sentences.back() : sentences[i - 1];
        for (const ScoreRequest& request : {ScoreRequest{"", sentences[i]}, ScoreRequest{context, sentences[i]}}) {
            try {
                const auto first = gateway.score(request).response;
                double sum = 0.0;
                for (const auto& t : first.tokens)
                    sum += t.logprob;
                if (first.tokens.empty() || !(std::abs(sum - first.total_logprob) <= kTokenSumTolerance))
                    failures.push_back(fmt::format("sentence {}: total {} but token sum {}", i, format_double(first.total_logprob), format_double(sum)));
                const auto second = gateway.score(request).response;
                if (second.total_logprob != first.total_logprob)
                    failures.push_back(fmt::format("sentence {}: repeated request gave {} then {}", i, format_double(first.total_logprob), format_double(second.total_logprob)));
            } catch (const Error& e) {
                failures.push_back(fmt::format("sentence {}: {}", i, e.what()));
            }
        }
    }
    return failures;
}

} // namespace xlprime
