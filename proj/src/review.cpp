#include "biasprobe/review.hpp"

#include "biasprobe/errors.hpp"
#include "biasprobe/text.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

namespace biasprobe {

namespace {

const char* kHeader = "probe_id\tprompt\tcontinuation\tauto_label\tevidence\tresolution";

// Tabs and newlines are field/row separators, so embedded ones are escaped.
std::string escape_field(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    for (char c : s) {
        switch (c) {
        case '\\': out += "\\\\"; break;
        case '\t': out += "\\t"; break;
        case '\n': out += "\\n"; break;
        case '\r': out += "\\r"; break;
        default: out += c;
        }
    }
    return out;
}

std::string unescape_field(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (s[i] != '\\' || i + 1 == s.size()) {
            out += s[i];
            continue;
        }
        switch (s[++i]) {
        case '\\': out += '\\'; break;
        case 't': out += '\t'; break;
        case 'n': out += '\n'; break;
        case 'r': out += '\r'; break;
        default:
            out += '\\';
            out += s[i];
        }
    }
    return out;
}

std::string join_evidence(const std::vector<std::string>& evidence) {
    std::string out;
    for (std::size_t i = 0; i < evidence.size(); ++i) {
        if (i) out += ",";
        out += evidence[i];
    }
    return out;
}

void write_atomic(const std::string& path, const std::string& content) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out) throw ConfigError("cannot write file: " + tmp);
        out << content;
    }
    std::filesystem::rename(tmp, path);
}

} // namespace

void write_review_file(const std::vector<ReviewItem>& items, const std::string& path) {
    std::ostringstream out;
    out << kHeader << "\n";
    for (const auto& item : items) {
        out << escape_field(item.probe_id) << '\t' << escape_field(item.prompt) << '\t'
            << escape_field(item.continuation) << '\t' << to_string(item.auto_label) << '\t'
            << escape_field(join_evidence(item.evidence)) << '\t'
            << (item.resolution ? to_string(*item.resolution) : "") << "\n";
    }
    write_atomic(path, out.str());
}

void export_review_queue(const std::vector<SentenceLabel>& labels,
                         const std::vector<GenerationRecord>& records, const std::string& path,
                         bool include_nonsense) {
    std::map<std::string, const GenerationRecord*> by_id;
    for (const auto& r : records) by_id[r.probe_id] = &r;

    std::vector<ReviewItem> items;
    for (const auto& l : labels) {
        const bool wanted = l.label == LabelKind::NeedsReview ||
                            (include_nonsense && l.label == LabelKind::Nonsense && l.auto_assigned);
        if (!wanted) continue;
        const auto it = by_id.find(l.probe_id);
        if (it == by_id.end())
            throw ConfigError("review export: no generation record for probe " + l.probe_id);
        ReviewItem item;
        item.probe_id = l.probe_id;
        item.prompt = it->second->prompt;
        item.continuation = it->second->continuation;
        item.auto_label = l.label;
        item.evidence = l.evidence;
        items.push_back(std::move(item));
    }
    std::sort(items.begin(), items.end(),
              [](const ReviewItem& a, const ReviewItem& b) { return a.probe_id < b.probe_id; });
    write_review_file(items, path);
}

std::vector<ReviewItem> read_review_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open review file: " + path);
    std::string line;
    if (!std::getline(in, line)) throw ConfigError(path + ": empty review file");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != kHeader) throw ConfigError(path + ": unexpected review file header");

    std::vector<ReviewItem> items;
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (trim(line).empty()) continue;
        const auto cols = split(line, '\t');
        if (cols.size() != 6)
            throw ConfigError(path + ":" + std::to_string(lineno) + ": expected 6 columns, got " +
                              std::to_string(cols.size()));
        ReviewItem item;
        item.probe_id = unescape_field(cols[0]);
        item.prompt = unescape_field(cols[1]);
        item.continuation = unescape_field(cols[2]);
        const auto auto_label = parse_label(trim(cols[3]));
        if (!auto_label)
            throw ConfigError(path + ":" + std::to_string(lineno) + ": invalid auto_label '" + cols[3] + "'");
        item.auto_label = *auto_label;
        for (const auto& e : split(unescape_field(cols[4]), ','))
            if (!trim(e).empty()) item.evidence.push_back(trim(e));
        const std::string res = trim(cols[5]);
        if (!res.empty()) {
            const auto kind = parse_label(res);
            if (!kind || *kind == LabelKind::NeedsReview)
                throw ConfigError(path + ":" + std::to_string(lineno) + ": invalid resolution token '" +
                                  res + "'");
            item.resolution = *kind;
        }
        items.push_back(std::move(item));
    }
    return items;
}

ApplyResult apply_review_labels(const std::string& path, std::vector<SentenceLabel> labels) {
    const auto items = read_review_file(path);
    std::map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < labels.size(); ++i) index[labels[i].probe_id] = i;

    ApplyResult result;
    for (const auto& item : items) {
        const auto it = index.find(item.probe_id);
        if (it == index.end()) throw ConfigError(path + ": unknown probe_id '" + item.probe_id + "'");
        if (!item.resolution) continue;
        SentenceLabel& label = labels[it->second];
        if (label.label != LabelKind::NeedsReview && !label.auto_assigned) {
            result.audit.push_back("override: probe " + item.probe_id + " " + to_string(label.label) +
                                   " -> " + to_string(*item.resolution));
        } else if (label.label != LabelKind::NeedsReview) {
            result.audit.push_back("override: probe " + item.probe_id + " auto " +
                                   to_string(label.label) + " -> " + to_string(*item.resolution));
        }
        label.label = *item.resolution;
        label.auto_assigned = false;
        ++result.resolved;
    }
    result.labels = std::move(labels);
    return result;
}

} // namespace biasprobe
