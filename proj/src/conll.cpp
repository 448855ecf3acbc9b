#include "vitag/conll.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include "vitag/error.hpp"
#include "vitag/tokenizer.hpp"

namespace vitag {

ConllDataset read_conll(const std::string& path, int word_col, int tag_col,
                        TagScheme scheme) {
    if (word_col < 0 || tag_col < 0) {
        throw ConfigError("read_conll: column indices must be non-negative");
    }
    if (word_col == tag_col) {
        throw ConfigError("read_conll: word and tag columns must differ");
    }
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open '" + path + "'");
    }
    const size_t need = static_cast<size_t>(std::max(word_col, tag_col)) + 1;

    ConllDataset data;
    ConllSentence current;
    std::vector<std::string> labels;
    std::set<std::string> seen;
    auto note_label = [&](const std::string& tag) {
        if (seen.insert(tag).second) labels.push_back(tag);
    };
    auto flush = [&] {
        if (!current.words.empty()) {
            data.sentences.push_back(std::move(current));
            current = {};
        }
    };

    std::string line;
    int64_t line_no = 0;
    while (std::getline(in, line)) {
        line_no += 1;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (!line.empty() && line[0] == '#') continue;
        std::vector<std::string> cols = split_words(line);
        if (cols.empty()) {
            flush();
            continue;
        }
        if (cols.size() < need) {
            throw ParseError(path + ":" + std::to_string(line_no) +
                             ": expected at least " + std::to_string(need) +
                             " columns, got " + std::to_string(cols.size()));
        }
        current.words.push_back(cols[static_cast<size_t>(word_col)]);
        current.tags.push_back(cols[static_cast<size_t>(tag_col)]);
        note_label(current.tags.back());
    }
    flush();
    if (data.sentences.empty()) {
        throw ParseError(path + ": no sentences");
    }

    if (scheme == TagScheme::kNer) {
        // Gold data with a stray I-X still yields a usable inventory.
        const size_t observed = labels.size();
        for (size_t i = 0; i < observed; ++i) {
            if (labels[i].rfind("I-", 0) == 0) {
                note_label("B-" + labels[i].substr(2));
            }
        }
    }
    data.tagset = TagSet::from_labels(std::move(labels), scheme);
    return data;
}

void write_conll(const std::string& path, const ConllDataset& data) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) {
        throw IoError("cannot write '" + path + "'");
    }
    for (const ConllSentence& s : data.sentences) {
        for (size_t i = 0; i < s.words.size(); ++i) {
            out << s.words[i] << '\t' << s.tags[i] << '\n';
        }
        out << '\n';
    }
    out.flush();
    if (!out) {
        throw IoError("failed writing '" + path + "'");
    }
}

}  // namespace vitag
