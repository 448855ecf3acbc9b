#include "vitag/tokenizer.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>

#include "vitag/error.hpp"
#include "vitag/unicode.hpp"

namespace vitag {

std::vector<std::string> Vocab::special_tokens() {
    return {kPad, kUnk, kCls, kSep, kMask};
}

Vocab Vocab::from_tokens(std::vector<std::string> tokens) {
    const auto specials = special_tokens();
    if (tokens.size() < specials.size()) {
        throw ConfigError("vocab has only " + std::to_string(tokens.size()) +
                          " tokens; the 5 specials are required");
    }
    for (size_t i = 0; i < specials.size(); ++i) {
        if (tokens[i] != specials[i]) {
            throw ConfigError("vocab token " + std::to_string(i) +
                              " must be " + specials[i] + ", got '" +
                              tokens[i] + "'");
        }
    }
    Vocab v;
    for (size_t i = 0; i < tokens.size(); ++i) {
        const std::string& tok = tokens[i];
        if (tok.empty()) {
            throw ConfigError("empty vocab token at id " + std::to_string(i));
        }
        if (i >= specials.size()) {
            for (char c : tok) {
                if (c == ' ' || c == '\t' || c == '\n' || c == '\r') {
                    throw ConfigError("vocab token at id " +
                                      std::to_string(i) +
                                      " contains whitespace");
                }
            }
        }
        if (!v.id_of_.emplace(tok, static_cast<int>(i)).second) {
            throw ConfigError("duplicate vocab token '" + tok + "'");
        }
    }
    v.tokens_ = std::move(tokens);
    return v;
}

Vocab Vocab::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open vocab file: " + path);
    std::vector<std::string> tokens;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        tokens.push_back(line);
    }
    if (in.bad()) throw IoError("read failure on vocab file: " + path);
    return from_tokens(std::move(tokens));
}

void Vocab::save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write vocab file: " + path);
    for (const auto& tok : tokens_) out << tok << '\n';
    if (!out) throw IoError("write failure on vocab file: " + path);
}

const std::string& Vocab::token(int id) const {
    if (id < 0 || id >= size()) {
        throw LookupError("vocab id " + std::to_string(id) +
                          " out of range [0," + std::to_string(size()) + ")");
    }
    return tokens_[static_cast<size_t>(id)];
}

int Vocab::find(std::string_view tok) const {
    auto it = id_of_.find(std::string(tok));
    return it == id_of_.end() ? -1 : it->second;
}

int Vocab::require(std::string_view tok) const {
    const int id = find(tok);
    if (id < 0) throw LookupError("token not in vocab: '" + std::string(tok) + "'");
    return id;
}

namespace {

// Greedy longest-match over codepoints (not bytes): diacritics are
// multi-byte and must never be split mid-character.
std::vector<std::string> wordpiece_pieces(const std::vector<uint32_t>& cps,
                                          const Vocab& vocab) {
    std::vector<std::string> pieces;
    size_t i = 0;
    while (i < cps.size()) {
        size_t j = cps.size();
        std::string match;
        for (; j > i; --j) {
            std::string cand = i > 0 ? "##" : "";
            cand += uni::utf8_encode(
                std::span(cps.data() + i, j - i));
            if (vocab.contains(cand)) {
                match = std::move(cand);
                break;
            }
        }
        if (j == i) return {Vocab::kUnk};  // no match at this position
        pieces.push_back(std::move(match));
        i = j;
    }
    return pieces;
}

}  // namespace

std::vector<std::string> wordpiece_tokenize(const std::string& word,
                                            const Vocab& vocab) {
    if (word.empty()) throw ContractError("wordpiece_tokenize: empty word");
    auto cps = uni::nfc(uni::utf8_decode(word));
    for (uint32_t cp : cps) {
        if (uni::is_space(cp)) {
            throw ContractError(
                "wordpiece_tokenize: word contains whitespace: '" + word +
                "'");
        }
    }
    return wordpiece_pieces(cps, vocab);
}

TokenSequence encode_sentence(const std::vector<std::string>& words,
                              const Vocab& vocab, int max_len) {
    if (words.empty()) throw ContractError("encode_sentence: no words");
    if (max_len < 3) {
        throw ContractError("encode_sentence: max_len " +
                            std::to_string(max_len) + " cannot fit [CLS]/[SEP]");
    }
    TokenSequence seq;
    seq.ids.push_back(vocab.cls_id());
    seq.segment_ids.push_back(0);
    seq.word_index.push_back(-1);
    seq.is_word_start.push_back(0);

    const int budget = max_len - 2;
    int used = 0;
    for (size_t w = 0; w < words.size(); ++w) {
        auto pieces = wordpiece_tokenize(words[w], vocab);
        if (used + static_cast<int>(pieces.size()) > budget) {
            seq.truncated = true;  // whole trailing words dropped
            break;
        }
        for (size_t p = 0; p < pieces.size(); ++p) {
            seq.ids.push_back(vocab.require(pieces[p]));
            seq.segment_ids.push_back(0);
            seq.word_index.push_back(static_cast<int>(w));
            seq.is_word_start.push_back(p == 0 ? 1 : 0);
        }
        used += static_cast<int>(pieces.size());
    }
    seq.ids.push_back(vocab.sep_id());
    seq.segment_ids.push_back(0);
    seq.word_index.push_back(-1);
    seq.is_word_start.push_back(0);
    return seq;
}

void pad_to(TokenSequence& seq, int len, const Vocab& vocab) {
    if (seq.length() > len) {
        throw ContractError("pad_to: sequence length " +
                            std::to_string(seq.length()) + " exceeds " +
                            std::to_string(len));
    }
    while (seq.length() < len) {
        seq.ids.push_back(vocab.pad_id());
        seq.segment_ids.push_back(0);
        seq.word_index.push_back(-1);
        seq.is_word_start.push_back(0);
    }
}

std::vector<std::string> split_words(std::string_view line) {
    std::vector<std::string> words;
    size_t i = 0;
    while (i < line.size()) {
        while (i < line.size() && (line[i] == ' ' || line[i] == '\t' ||
                                   line[i] == '\r' || line[i] == '\n')) {
            ++i;
        }
        size_t j = i;
        while (j < line.size() && line[j] != ' ' && line[j] != '\t' &&
               line[j] != '\r' && line[j] != '\n') {
            ++j;
        }
        if (j > i) words.emplace_back(line.substr(i, j - i));
        i = j;
    }
    return words;
}

namespace {

// Tokens that appear in some segmentation of the corpus under `vocab`,
// with occurrence counts.
std::map<std::string, int64_t> piece_counts(
    const std::vector<std::string>& sentences, const Vocab& vocab) {
    std::map<std::string, int64_t> counts;
    for (const auto& sent : sentences) {
        for (const auto& word : split_words(sent)) {
            for (auto& piece : wordpiece_tokenize(word, vocab)) {
                ++counts[piece];
            }
        }
    }
    return counts;
}

Vocab prune_vocab(const std::vector<std::string>& sentences, const Vocab& base,
                  int min_count) {
    // Dropping a token can change segmentations and strand other tokens, so
    // iterate until the kept set is stable under its own tokenizer.
    std::vector<std::string> current = base.tokens();
    for (;;) {
        Vocab v = Vocab::from_tokens(current);
        auto counts = piece_counts(sentences, v);
        std::vector<std::string> kept = Vocab::special_tokens();
        for (const auto& tok : current) {
            if (v.is_special(v.require(tok))) continue;
            auto it = counts.find(tok);
            if (it != counts.end() && it->second >= min_count) {
                kept.push_back(tok);
            }
        }
        if (kept == current) return v;
        current = std::move(kept);
    }
}

// From-scratch path: start from character pieces, then repeatedly merge the
// most frequent adjacent pair (count ties broken lexicographically) until
// the size budget is reached or nothing frequent remains.
Vocab grow_vocab(const std::vector<std::string>& sentences,
                 const VocabBuildOptions& opts) {
    // word frequencies, NFC-normalized
    std::map<std::string, int64_t> word_freq;
    for (const auto& sent : sentences) {
        for (const auto& word : split_words(sent)) {
            ++word_freq[uni::nfc_string(word)];
        }
    }

    // character-level start: first cp bare, the rest "##"-prefixed
    std::map<std::string, int64_t> piece_freq;
    std::vector<std::pair<std::vector<std::string>, int64_t>> segs;
    for (const auto& [word, freq] : word_freq) {
        auto cps = uni::utf8_decode(word);
        std::vector<std::string> pieces;
        for (size_t i = 0; i < cps.size(); ++i) {
            std::string p = i > 0 ? "##" : "";
            uint32_t cp = cps[i];
            p += uni::utf8_encode(std::span(&cp, 1));
            piece_freq[p] += freq;
            pieces.push_back(std::move(p));
        }
        segs.emplace_back(std::move(pieces), freq);
    }

    // rare characters fall out entirely; affected words tokenize to [UNK]
    std::set<std::string> alive;
    for (const auto& [p, c] : piece_freq) {
        if (c >= opts.min_count) alive.insert(p);
    }
    std::erase_if(segs, [&](const auto& s) {
        for (const auto& p : s.first) {
            if (!alive.count(p)) return true;
        }
        return false;
    });

    const auto merge_of = [](const std::string& a, const std::string& b) {
        return a + (b.starts_with("##") ? b.substr(2) : b);
    };

    const int budget =
        std::max(opts.size_budget - Vocab::kNumSpecials,
                 static_cast<int>(alive.size()));
    while (static_cast<int>(alive.size()) < budget) {
        std::map<std::pair<std::string, std::string>, int64_t> pair_freq;
        for (const auto& [pieces, freq] : segs) {
            for (size_t i = 0; i + 1 < pieces.size(); ++i) {
                pair_freq[{pieces[i], pieces[i + 1]}] += freq;
            }
        }
        // best = highest count, then lexicographically smallest pair
        std::pair<std::string, std::string> best;
        int64_t best_count = 0;
        for (const auto& [pr, c] : pair_freq) {
            if (c > best_count) {
                best = pr;
                best_count = c;
            }
        }
        if (best_count < std::max<int64_t>(opts.min_count, 2)) break;

        const std::string merged = merge_of(best.first, best.second);
        alive.insert(merged);
        for (auto& [pieces, freq] : segs) {
            std::vector<std::string> next;
            size_t i = 0;
            while (i < pieces.size()) {
                if (i + 1 < pieces.size() && pieces[i] == best.first &&
                    pieces[i + 1] == best.second) {
                    next.push_back(merged);
                    i += 2;
                } else {
                    next.push_back(pieces[i]);
                    ++i;
                }
            }
            pieces = std::move(next);
        }
    }

    std::vector<std::string> tokens = Vocab::special_tokens();
    tokens.insert(tokens.end(), alive.begin(), alive.end());  // set: sorted
    return Vocab::from_tokens(std::move(tokens));
}

}  // namespace

Vocab build_vocab(const std::vector<std::string>& sentences, const Vocab* base,
                  const VocabBuildOptions& opts) {
    bool any_word = false;
    for (const auto& s : sentences) {
        if (!split_words(s).empty()) {
            any_word = true;
            break;
        }
    }
    if (!any_word) throw ConfigError("build_vocab: empty corpus");
    return base ? prune_vocab(sentences, *base, opts.min_count)
                : grow_vocab(sentences, opts);
}

}  // namespace vitag
