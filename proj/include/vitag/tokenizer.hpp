#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace vitag {

// Subword vocabulary. Immutable after construction; ids are dense and the
// five special tokens occupy ids [0,5) in fixed order.
class Vocab {
  public:
    static constexpr const char* kPad = "[PAD]";
    static constexpr const char* kUnk = "[UNK]";
    static constexpr const char* kCls = "[CLS]";
    static constexpr const char* kSep = "[SEP]";
    static constexpr const char* kMask = "[MASK]";
    static constexpr int kNumSpecials = 5;

    // Validates: specials first in fixed order, no duplicates, no whitespace
    // inside non-special tokens.
    static Vocab from_tokens(std::vector<std::string> tokens);
    static std::vector<std::string> special_tokens();

    // One token per line, line number = id.
    static Vocab load(const std::string& path);
    void save(const std::string& path) const;

    int size() const { return static_cast<int>(tokens_.size()); }
    const std::vector<std::string>& tokens() const { return tokens_; }
    const std::string& token(int id) const;
    // -1 when absent
    int find(std::string_view tok) const;
    // LookupError when absent
    int require(std::string_view tok) const;
    bool contains(std::string_view tok) const { return find(tok) >= 0; }

    int pad_id() const { return 0; }
    int unk_id() const { return 1; }
    int cls_id() const { return 2; }
    int sep_id() const { return 3; }
    int mask_id() const { return 4; }
    bool is_special(int id) const { return id >= 0 && id < kNumSpecials; }

  private:
    std::vector<std::string> tokens_;
    std::unordered_map<std::string, int> id_of_;
};

// Encoded sentence with subword→word alignment for tagging.
struct TokenSequence {
    std::vector<int> ids;
    std::vector<int> segment_ids;            // all 0: single-sentence tasks
    std::vector<int> word_index;             // −1 at [CLS]/[SEP]/[PAD]
    std::vector<uint8_t> is_word_start;
    bool truncated = false;

    int length() const { return static_cast<int>(ids.size()); }
};

// Greedy longest-match-first WordPiece over NFC-normalized codepoints.
// Continuation pieces carry the "##" prefix. A word with no full
// segmentation becomes a single [UNK] piece.
std::vector<std::string> wordpiece_tokenize(const std::string& word,
                                            const Vocab& vocab);

// [CLS] + subwords + [SEP]; sentences longer than max_len−2 subwords are
// truncated at a word boundary (flagged, never an error).
TokenSequence encode_sentence(const std::vector<std::string>& words,
                              const Vocab& vocab, int max_len = 256);

// Extends with [PAD] to `len`; word_index −1, is_word_start 0.
void pad_to(TokenSequence& seq, int len, const Vocab& vocab);

std::vector<std::string> split_words(std::string_view line);

struct VocabBuildOptions {
    int min_count = 1;
    int size_budget = 8000;  // only the from-scratch path uses this
};

// With a base vocabulary: keeps exactly the base tokens that still occur in
// some segmentation of the corpus (iterated to a fixed point so the result
// is self-consistent), plus the specials. Without one: character pieces plus
// frequent pair merges up to the size budget.
Vocab build_vocab(const std::vector<std::string>& sentences, const Vocab* base,
                  const VocabBuildOptions& opts = {});

}  // namespace vitag
