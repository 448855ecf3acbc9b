#pragma once

#include <string>
#include <vector>

#include "vitag/heads.hpp"

namespace vitag {

struct ConllSentence {
    std::vector<std::string> words;
    std::vector<std::string> tags;
};

// Column-format tagged sentences plus the tag inventory they use.
struct ConllDataset {
    std::vector<ConllSentence> sentences;
    TagSet tagset;
};

// Reads CoNLL-style columns: one token per line, columns split on tabs or
// runs of spaces, a blank line ends a sentence, lines starting with '#' are
// comments. The tag set is inferred in order of first appearance; under the
// NER scheme a missing B-X opener for an observed I-X is added so the
// inventory always validates.
ConllDataset read_conll(const std::string& path, int word_col = 0,
                        int tag_col = 1, TagScheme scheme = TagScheme::kPos);

// Writes "word<TAB>tag" lines with a blank line after each sentence.
// write(read(f)) normalizes whitespace once and is idempotent from then on.
void write_conll(const std::string& path, const ConllDataset& data);

}  // namespace vitag
