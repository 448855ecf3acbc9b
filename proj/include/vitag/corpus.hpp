#pragma once

#include <cstdint>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

namespace vitag {

struct CleanStats {
    int64_t docs_in = 0;
    int64_t docs_deduped = 0;
    int64_t sentences_in = 0;
    int64_t sentences_dropped_short = 0;
    int64_t sentences_dropped_charset = 0;
    int64_t sentences_out = 0;

    // key<TAB>value lines, fixed order
    std::string report() const;
    bool operator==(const CleanStats&) const = default;
};

// Allowed-character whitelist for corpus cleaning. The default covers ASCII
// printables, the Vietnamese alphabet with all tone marks, and common
// typographic punctuation.
class Charset {
  public:
    static Charset default_vietnamese();
    // Union of all codepoints in the file (whitespace always allowed).
    static Charset load(const std::string& path);

    bool allows(uint32_t cp) const;
    void add(uint32_t cp) { allowed_.insert(cp); }
    size_t size() const { return allowed_.size(); }

  private:
    std::unordered_set<uint32_t> allowed_;
};

// Hard boundary at newline; within a line, a run of [.?!…] followed by
// whitespace or end of line closes a sentence.
std::vector<std::string> split_sentences(const std::string& text);

// Documents as (identifier, UTF-8 text). Cleaning applies, in order:
// document dedup (first occurrence survives), per-sentence minimum of 4
// whitespace words, then the charset rule. Output sentences have their
// whitespace canonicalized to single spaces.
std::pair<std::vector<std::string>, CleanStats> clean_corpus(
    const std::vector<std::pair<std::string, std::string>>& docs,
    const Charset& charset);

// Every .txt file under `dir` (sorted by name) becomes one document.
std::vector<std::pair<std::string, std::string>> read_documents(
    const std::string& dir);

// Shuffles with the seed, then writes fixed-size shards
// <prefix>-NNNNN.txt (the last one may be short). Returns the paths.
std::vector<std::string> shard_sentences(std::vector<std::string> sentences,
                                         const std::string& out_dir,
                                         const std::string& prefix,
                                         int64_t shard_size, uint64_t seed);

}  // namespace vitag
