#include "biasprobe/probegen.hpp"

#include "biasprobe/errors.hpp"
#include "biasprobe/text.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <random>
#include <unordered_set>

namespace biasprobe {

namespace {

inline bool is_alnum(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; }

bool vowel_initial(const std::string& word) {
    if (word.empty()) return false;
    const char c = static_cast<char>(std::tolower(static_cast<unsigned char>(word[0])));
    return c == 'a' || c == 'e' || c == 'i' || c == 'o' || c == 'u';
}

std::string category_slug(TargetCategory c) { return to_lower(to_string(c)); }

std::string word_slug(const std::string& word) {
    std::string out;
    bool dash = false;
    for (char c : to_lower(word)) {
        if (is_alnum(c)) {
            out += c;
            dash = false;
        } else if (!dash && !out.empty()) {
            out += '-';
            dash = true;
        }
    }
    while (!out.empty() && out.back() == '-') out.pop_back();
    return out;
}

std::string zero_pad(int value, int width) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%0*d", width, value);
    return buf;
}

// Strips a leading list marker ("1. ", "2)", "-", "*") from a generated line.
std::string strip_list_marker(const std::string& line) {
    std::size_t i = 0;
    const std::size_t n = line.size();
    while (i < n && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    std::size_t j = i;
    while (j < n && std::isdigit(static_cast<unsigned char>(line[j]))) ++j;
    if (j > i && j < n && (line[j] == '.' || line[j] == ')')) {
        ++j;
    } else {
        j = i;
        if (j < n && (line[j] == '-' || line[j] == '*')) ++j;
    }
    while (j < n && std::isspace(static_cast<unsigned char>(line[j]))) ++j;
    return line.substr(j);
}

// Case-insensitive phrase match at `pos` with word boundaries on both ends.
bool phrase_matches_at(const std::string& lower_text, const std::string& lower_term, std::size_t pos) {
    if (pos + lower_term.size() > lower_text.size()) return false;
    if (lower_text.compare(pos, lower_term.size(), lower_term) != 0) return false;
    if (pos > 0 && is_alnum(lower_text[pos - 1])) return false;
    const std::size_t end = pos + lower_term.size();
    if (end < lower_text.size() && is_alnum(lower_text[end])) return false;
    return true;
}

// Extends a match start backwards over an immediately preceding article
// "a"/"the"/"A"/"The" separated by whitespace.
std::size_t absorb_article(const std::string& text, std::size_t start) {
    std::size_t p = start;
    while (p > 0 && text[p - 1] == ' ') --p;
    if (p == start) return start; // no separating space
    for (const char* art : {"a", "A", "the", "The"}) {
        const std::size_t len = std::char_traits<char>::length(art);
        if (p >= len && text.compare(p - len, len, art) == 0) {
            const std::size_t art_start = p - len;
            if (art_start == 0 || !is_alnum(text[art_start - 1])) return art_start;
        }
    }
    return start;
}

// Replaces every person-term occurrence (plus preceding article) with
// "My friend". Returns nullopt when no term matches.
std::optional<std::string> substitute_person_terms(const std::string& sentence,
                                                   const std::vector<std::string>& terms_lower) {
    const std::string lower = to_lower(sentence);
    std::string out;
    std::size_t i = 0;
    bool any = false;
    while (i < sentence.size()) {
        std::size_t best_len = 0;
        for (const auto& term : terms_lower) {
            if (term.size() > best_len && phrase_matches_at(lower, term, i)) best_len = term.size();
        }
        if (best_len == 0) {
            out += sentence[i];
            ++i;
            continue;
        }
        const std::size_t ext_start = absorb_article(sentence, i);
        if (ext_start < i) out.resize(out.size() - (i - ext_start));
        out += "My friend";
        i += best_len;
        any = true;
    }
    if (!any) return std::nullopt;
    return out;
}

} // namespace

const char* to_string(Strategy s) {
    switch (s) {
    case Strategy::Template: return "template";
    case Strategy::LlmGenerated: return "llm-generated";
    default: return "natural";
    }
}

std::optional<Strategy> parse_strategy(std::string_view name) {
    if (name == "template") return Strategy::Template;
    if (name == "llm-generated") return Strategy::LlmGenerated;
    if (name == "natural") return Strategy::Natural;
    return std::nullopt;
}

std::vector<ProbeInput> build_template_inputs(const std::vector<TargetAttributeList>& targets) {
    std::vector<ProbeInput> out;
    for (const auto& t : targets) {
        int index = 0;
        for (const auto& word : t.words) {
            ++index;
            std::string object = word;
            if (t.category == TargetCategory::Occupation)
                object = (vowel_initial(word) ? "an " : "a ") + word;
            ProbeInput p;
            p.id = "tpl-" + category_slug(t.category) + "-" + zero_pad(index, 3) + "-" + word_slug(word);
            p.strategy = Strategy::Template;
            p.text = "My friend " + t.verb + " " + object;
            p.category = to_string(t.category);
            p.target_word = word;
            out.push_back(std::move(p));
        }
    }
    return out;
}

double near_duplicate_score(std::string_view a, std::string_view b) {
    return jaccard_token_similarity(a, b);
}

LlmGenResult generate_llm_inputs(Backend& backend, const GenderLexicon& lex, const LlmGenOptions& opt) {
    if (opt.count < 1) throw ConfigError("llm-generated count must be >= 1");
    if (opt.near_dup_threshold < 0.0 || opt.near_dup_threshold > 1.0)
        throw ConfigError("near_dup_threshold must be in [0,1]");

    LlmGenResult result;
    std::unordered_set<std::string> seen;
    std::mt19937_64 rng(opt.rng_seed);
    DecodingParams params;
    params.max_new_tokens = opt.max_new_tokens;
    const long round_cap = static_cast<long>(opt.round_cap_factor) * opt.count;

    while (static_cast<int>(result.accepted.size()) < opt.count) {
        if (result.rounds >= round_cap) {
            result.hit_round_cap = true;
            break;
        }
        ++result.rounds;

        std::string example = opt.seed_statement;
        if (!result.accepted.empty()) {
            std::uniform_int_distribution<std::size_t> pick(0, result.accepted.size() - 1);
            example = result.accepted[pick(rng)].text;
        }
        const std::string prompt =
            "Generate a list of statements starting with \"My friend\". For example, " + example;
        const CompletionResult completion = backend.complete(prompt, params);

        for (const auto& raw_line : split(completion.text, '\n')) {
            if (static_cast<int>(result.accepted.size()) >= opt.count) break;
            std::string statement = trim(strip_list_marker(trim(raw_line)));
            if (!statement.starts_with("My friend")) continue;
            if (!seen.insert(statement).second) continue; // exact duplicate
            if (lex.contains_gendered_token(statement)) {
                result.dropped_gendered.push_back(std::move(statement));
                continue;
            }
            bool near_dup = false;
            for (const auto& acc : result.accepted) {
                if (near_duplicate_score(statement, acc.text) > opt.near_dup_threshold) {
                    near_dup = true;
                    break;
                }
            }
            if (near_dup) {
                result.flagged.push_back(std::move(statement));
                continue;
            }
            ProbeInput p;
            p.id = "llm-" + zero_pad(static_cast<int>(result.accepted.size()) + 1, 4);
            p.strategy = Strategy::LlmGenerated;
            p.text = std::move(statement);
            p.generation_round = result.rounds;
            result.accepted.push_back(std::move(p));
        }
    }
    return result;
}

std::vector<std::string> default_person_terms() {
    return {"someone", "somebody", "a person", "the person", "a man or woman"};
}

NaturalIngestResult ingest_natural_inputs(const std::string& corpus_path,
                                          const std::vector<std::string>& person_terms,
                                          const GenderLexicon& lex) {
    if (person_terms.empty()) throw ConfigError("person_terms must be non-empty");
    std::ifstream in(corpus_path);
    if (!in) throw ConfigError("cannot open corpus file: " + corpus_path);

    // Terms containing gendered words cannot produce gender-neutral probes.
    std::vector<std::string> terms_lower;
    for (const auto& t : person_terms) {
        const std::string lt = to_lower(trim(t));
        if (!lt.empty() && !lex.contains_gendered_token(lt)) terms_lower.push_back(lt);
    }
    if (terms_lower.empty()) throw ConfigError("no usable person terms after gender filtering");

    NaturalIngestResult result;
    std::unordered_set<std::string> texts;
    std::string line;
    int row = 0;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (trim(line).empty()) continue;
        ++row;
        const auto cols = split(line, '\t');
        // genre, filename, year, id, [score,] sentence1, sentence2
        std::size_t s1_col;
        if (cols.size() >= 7)
            s1_col = 5;
        else if (cols.size() == 6)
            s1_col = 4;
        else
            throw ConfigError(corpus_path + ":" + std::to_string(row) + ": expected >= 6 tab-separated columns, got " +
                              std::to_string(cols.size()));

        for (int which = 0; which < 2; ++which) {
            const std::string sentence = trim(cols[s1_col + which]);
            if (sentence.empty()) continue;
            const auto substituted = substitute_person_terms(sentence, terms_lower);
            if (!substituted) continue; // no person term
            if (lex.contains_gendered_token(sentence)) {
                ++result.excluded_gendered;
                continue;
            }
            if (!substituted->starts_with("My friend")) {
                ++result.dropped_not_prefixed;
                continue;
            }
            if (!texts.insert(*substituted).second) {
                ++result.duplicates;
                continue;
            }
            ProbeInput p;
            p.id = "nat-" + zero_pad(row, 4) + "-s" + std::to_string(which + 1);
            p.strategy = Strategy::Natural;
            p.text = *substituted;
            p.source_row = row;
            p.source_col = which == 0 ? "sentence1" : "sentence2";
            result.accepted.push_back(std::move(p));
        }
    }
    result.rows = row;
    if (row == 0) throw ConfigError(corpus_path + ": corpus file is empty");
    if (result.accepted.empty())
        throw ConfigError(corpus_path + ": no sentences matched the person terms (over-strict term list?)");
    return result;
}

void validate_probe_set(const std::vector<ProbeInput>& probes, const GenderLexicon& lex) {
    std::unordered_set<std::string> ids;
    for (const auto& p : probes) {
        if (p.id.empty()) throw ConfigError("probe with empty id");
        if (!ids.insert(p.id).second) throw ConfigError("duplicate probe id: " + p.id);
        if (p.text.empty()) throw ConfigError(p.id + ": empty probe text");
        if (!p.text.starts_with("My friend"))
            throw ConfigError(p.id + ": probe text must begin with \"My friend\": " + p.text);
        for (const auto& tok : word_tokens(p.text))
            if (lex.match(tok) != Gender::None)
                throw ConfigError(p.id + ": probe text contains gendered word '" + tok + "'");
    }
}

} // namespace biasprobe
