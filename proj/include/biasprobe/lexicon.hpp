#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace biasprobe {

enum class Gender { Female, Male, None };

// Ordered paired gender attribute words. Pair i defines the bijection
// female_i <-> male_i; all stored words are lowercase canonical forms and
// surface variants (capitalized) are generated, never stored.
struct GenderLexicon {
    std::string name;
    std::vector<std::pair<std::string, std::string>> pairs; // (female, male)

    std::size_t size() const { return pairs.size(); }

    // Whole-token, case-insensitive membership test.
    Gender match(std::string_view token) const;

    // True when any word token of `text` matches either side.
    bool contains_gendered_token(std::string_view text) const;

    // Female and male sides exchanged; used by the symmetry suites.
    GenderLexicon swapped() const;
};

enum class TargetCategory { Occupation, Personality, Hobby, Color };

// Stereotype-bearing target attribute list that fills the probe template.
// Occupation/Personality take verb "is", Hobby/Color take "likes".
struct TargetAttributeList {
    TargetCategory category = TargetCategory::Hobby;
    std::string verb;
    std::vector<std::string> words;
};

const char* to_string(Gender g);
const char* to_string(TargetCategory c);
std::optional<TargetCategory> parse_target_category(std::string_view name);
std::string expected_verb(TargetCategory c);

// `source` names a builtin ("pronouns-en") or a readable file with one
// "female,male" pair per line ("#" starts a comment). Words are lowercased
// on load. Throws ConfigError on malformed lines, duplicates, empty files.
GenderLexicon load_lexicon(const std::string& source);

// `source` names a builtin ("hobbies", "colors", "occupations",
// "personalities") or a file whose first line is
// "category=<name>;verb=<is|likes>" followed by one word per line.
TargetAttributeList load_targets(const std::string& source);

std::vector<std::string> builtin_target_names();

// [word, Capitalized(word)]; both entries lowercase back to `word`.
std::vector<std::string> surface_forms(const std::string& word);

Gender match_gender(std::string_view token, const GenderLexicon& lex);

} // namespace biasprobe
