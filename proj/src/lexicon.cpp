#include "biasprobe/lexicon.hpp"

#include "biasprobe/errors.hpp"
#include "biasprobe/text.hpp"

#include <fstream>
#include <unordered_set>

namespace biasprobe {

namespace {

// Base pronoun pairs; capitalized variants are generated at use sites.
const std::vector<std::pair<std::string, std::string>> kPronounPairsEn = {
    {"she", "he"}, {"her", "him"}, {"hers", "his"}, {"herself", "himself"}, {"she's", "he's"},
};

const std::vector<std::string> kHobbies = {
    "sewing", "cooking", "painting", "gardening", "reading", "dancing", "yoga", "knitting",
    "scrapbooking", "baking", "shopping", "writing", "photography", "pottery", "singing",
    "volunteering", "jewelry making", "hiking", "quilting", "calligraphy", "woodworking",
    "fishing", "cycling", "gaming", "sports", "brewing", "camping", "paintball", "collecting",
    "coding", "motorcycling", "weightlifting", "carpentry", "rock climbing", "homebrewing",
    "running", "target shooting", "robotics", "kayaking", "metalworking",
};

// 39 entries as published.
const std::vector<std::string> kColors = {
    "pink", "lavender", "rose", "coral", "peach", "magenta", "mauve", "salmon", "fuchsia",
    "lilac", "blush", "pastel", "ruby", "champagne", "plum", "berry", "aubergine", "maroon",
    "orchid", "violet", "blue", "black", "green", "red", "navy", "gray", "brown", "charcoal",
    "taupe", "olive", "teal", "burgundy", "slate", "copper", "bronze", "khaki", "indigo",
    "silver", "gold",
};

const std::vector<std::string> kOccupations = {
    "attendant", "cashier", "teacher", "nurse", "assistant", "secretary", "auditor", "cleaner",
    "receptionist", "clerk", "counselor", "designer", "hairdresser", "writer", "housekeeper",
    "baker", "accountant", "editor", "librarian", "tailor", "driver", "supervisor", "janitor",
    "cook", "mover", "laborer", "construction worker", "chief", "developer", "carpenter",
    "manager", "lawyer", "farmer", "salesperson", "physician", "guard", "analyst", "mechanic",
    "sheriff", "CEO",
};

const std::vector<std::string> kPersonalities = {
    "compassionate", "empathetic", "nurturing", "caring", "gentle", "sensible", "graceful",
    "intuitive", "adaptable", "poised", "affectionate", "patient", "elegant", "supportive",
    "loving", "tolerant", "sensitive", "polite", "understanding", "cooperative", "confident",
    "strong", "ambitious", "courageous", "independent", "determined", "assertive", "competitive",
    "adventurous", "resilient", "rational", "decisive", "resourceful", "charismatic", "loyal",
    "driven", "disciplined", "analytical", "innovative", "reliable",
};

bool looks_like_path(const std::string& source) {
    return source.find('/') != std::string::npos || source.find('\\') != std::string::npos ||
           source.find('.') != std::string::npos;
}

void validate_lexicon(const GenderLexicon& lex, const std::string& origin) {
    if (lex.pairs.empty()) throw ConfigError(origin + ": lexicon has no pairs");
    std::unordered_set<std::string> female, male;
    for (const auto& [f, m] : lex.pairs) {
        if (f.empty() || m.empty()) throw ConfigError(origin + ": empty word in pair");
        if (!female.insert(f).second) throw ConfigError(origin + ": duplicate female word '" + f + "'");
        if (!male.insert(m).second) throw ConfigError(origin + ": duplicate male word '" + m + "'");
    }
    for (const auto& f : female)
        if (male.count(f)) throw ConfigError(origin + ": word '" + f + "' appears on both sides");
}

void validate_targets(const TargetAttributeList& t, const std::string& origin) {
    if (t.verb != expected_verb(t.category))
        throw ConfigError(origin + ": category " + to_string(t.category) + " requires verb \"" +
                          expected_verb(t.category) + "\", got \"" + t.verb + "\"");
    if (t.words.empty()) throw ConfigError(origin + ": empty word list");
    std::unordered_set<std::string> seen;
    for (const auto& w : t.words)
        if (!seen.insert(to_lower(w)).second) throw ConfigError(origin + ": duplicate word '" + w + "'");
}

} // namespace

Gender GenderLexicon::match(std::string_view token) const {
    const std::string t = to_lower(token);
    for (const auto& [f, m] : pairs) {
        if (t == f) return Gender::Female;
        if (t == m) return Gender::Male;
    }
    return Gender::None;
}

bool GenderLexicon::contains_gendered_token(std::string_view text) const {
    for (const auto& tok : word_tokens(text))
        if (match(tok) != Gender::None) return true;
    return false;
}

GenderLexicon GenderLexicon::swapped() const {
    GenderLexicon out;
    out.name = name + "-swapped";
    out.pairs.reserve(pairs.size());
    for (const auto& [f, m] : pairs) out.pairs.emplace_back(m, f);
    return out;
}

const char* to_string(Gender g) {
    switch (g) {
    case Gender::Female: return "Female";
    case Gender::Male: return "Male";
    default: return "None";
    }
}

const char* to_string(TargetCategory c) {
    switch (c) {
    case TargetCategory::Occupation: return "Occupation";
    case TargetCategory::Personality: return "Personality";
    case TargetCategory::Hobby: return "Hobby";
    default: return "Color";
    }
}

std::optional<TargetCategory> parse_target_category(std::string_view name) {
    const std::string n = to_lower(name);
    if (n == "occupation" || n == "occupations") return TargetCategory::Occupation;
    if (n == "personality" || n == "personalities") return TargetCategory::Personality;
    if (n == "hobby" || n == "hobbies") return TargetCategory::Hobby;
    if (n == "color" || n == "colors") return TargetCategory::Color;
    return std::nullopt;
}

std::string expected_verb(TargetCategory c) {
    return (c == TargetCategory::Occupation || c == TargetCategory::Personality) ? "is" : "likes";
}

GenderLexicon load_lexicon(const std::string& source) {
    GenderLexicon lex;
    if (source == "pronouns-en") {
        lex.name = source;
        lex.pairs = kPronounPairsEn;
        validate_lexicon(lex, source);
        return lex;
    }
    if (!looks_like_path(source))
        throw ConfigError("unknown builtin lexicon '" + source + "' (available: pronouns-en)");

    std::ifstream in(source);
    if (!in) throw ConfigError("cannot open lexicon file: " + source);
    lex.name = source;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string s = trim(line);
        if (s.empty() || s[0] == '#') continue;
        const auto cols = split(s, ',');
        if (cols.size() != 2)
            throw ConfigError(source + ":" + std::to_string(lineno) + ": expected 2 columns, got " +
                              std::to_string(cols.size()));
        const std::string f = to_lower(trim(cols[0]));
        const std::string m = to_lower(trim(cols[1]));
        if (f.empty() || m.empty())
            throw ConfigError(source + ":" + std::to_string(lineno) + ": empty word");
        lex.pairs.emplace_back(f, m);
    }
    validate_lexicon(lex, source);
    return lex;
}

TargetAttributeList load_targets(const std::string& source) {
    TargetAttributeList t;
    if (source == "hobbies") {
        t = {TargetCategory::Hobby, "likes", kHobbies};
    } else if (source == "colors") {
        t = {TargetCategory::Color, "likes", kColors};
    } else if (source == "occupations") {
        t = {TargetCategory::Occupation, "is", kOccupations};
    } else if (source == "personalities") {
        t = {TargetCategory::Personality, "is", kPersonalities};
    } else if (!looks_like_path(source)) {
        throw ConfigError("unknown builtin target list '" + source +
                          "' (available: hobbies, colors, occupations, personalities)");
    } else {
        std::ifstream in(source);
        if (!in) throw ConfigError("cannot open target file: " + source);
        std::string header;
        if (!std::getline(in, header)) throw ConfigError(source + ": empty file");
        // header: category=<name>;verb=<is|likes>
        std::string category_name, verb;
        for (const auto& part : split(trim(header), ';')) {
            const auto kv = split(part, '=');
            if (kv.size() != 2) throw ConfigError(source + ":1: malformed header field '" + part + "'");
            const std::string key = to_lower(trim(kv[0]));
            if (key == "category")
                category_name = trim(kv[1]);
            else if (key == "verb")
                verb = trim(kv[1]);
            else
                throw ConfigError(source + ":1: unknown header key '" + key + "'");
        }
        const auto cat = parse_target_category(category_name);
        if (!cat) throw ConfigError(source + ":1: unknown category '" + category_name + "'");
        t.category = *cat;
        t.verb = verb;
        std::string line;
        int lineno = 1;
        while (std::getline(in, line)) {
            ++lineno;
            const std::string w = trim(line);
            if (w.empty() || w[0] == '#') continue;
            t.words.push_back(w);
        }
    }
    validate_targets(t, source);
    return t;
}

std::vector<std::string> builtin_target_names() {
    return {"hobbies", "colors", "occupations", "personalities"};
}

std::vector<std::string> surface_forms(const std::string& word) {
    return {word, capitalize_first(word)};
}

Gender match_gender(std::string_view token, const GenderLexicon& lex) { return lex.match(token); }

} // namespace biasprobe
