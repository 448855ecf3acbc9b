#pragma once

#include <chrono>
#include <map>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "vitag/conll.hpp"
#include "vitag/error.hpp"
#include "vitag/heads.hpp"

namespace vitag {

// A decoded named-entity span over word indices, end exclusive. The label is
// the bare entity type ("PER"), never the B-/I- form it was decoded from.
struct Entity {
    std::string label;
    int start = 0;
    int end = 0;

    bool operator==(const Entity&) const = default;
    bool operator<(const Entity& o) const {
        return std::tie(start, end, label) < std::tie(o.start, o.end, o.label);
    }
};

// Precision/recall/F1 counts for one entity label (or the overall totals).
struct LabelScore {
    int64_t ne_true = 0;  // spans predicted with exact (label, start, end)
    int64_t ne_sys = 0;   // spans the system predicted
    int64_t ne_ref = 0;   // spans in the reference
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

// Scoring summary: token accuracy plus entity precision/recall/F1 overall
// and broken down by label. Zero denominators score 0 rather than NaN so
// degenerate predictions still produce a report.
struct EvalReport {
    double accuracy = 0.0;
    int64_t ne_true = 0;
    int64_t ne_sys = 0;
    int64_t ne_ref = 0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    std::map<std::string, LabelScore> per_label;

    // Human-readable aligned columns, one row per label plus a total row.
    std::string table() const;
    // key=value lines in a fixed order, for diffing runs by machine.
    std::string key_values() const;
};

// Fraction of positions where the predicted tag string equals the gold tag.
double token_accuracy(const std::vector<std::string>& pred,
                      const std::vector<std::string>& gold);

// Decodes an IOB2 tag sequence into entity spans. B-X opens a span,
// consecutive I-X of the same type extend it, and a stray I-X (start of
// sequence, after O, or after a different type) opens a new span, matching
// conlleval's repair. Tags other than "O", "B-…", "I-…" are rejected.
std::vector<Entity> extract_entities(const std::vector<std::string>& tags);

// Entity-level scores of predicted IOB2 tags against the reference; also
// fills token accuracy over the same pair.
EvalReport entity_f1(const std::vector<std::string>& pred,
                     const std::vector<std::string>& gold);

// Dataset-level scoring: token accuracy over all aligned words and, under
// the NER scheme, entity counts pooled per sentence (spans never cross a
// sentence boundary). Under the POS scheme the entity fields stay zero.
EvalReport evaluate_tags(const ConllDataset& pred, const ConllDataset& gold,
                         TagScheme scheme);

struct BenchResult {
    double ms_per_sentence = 0.0;
    double avg_words_per_sentence = 0.0;
};

namespace detail {
// Forces OpenMP to one thread for the measurement, restoring on exit.
class SingleThreadScope {
  public:
    SingleThreadScope();
    ~SingleThreadScope();
    SingleThreadScope(const SingleThreadScope&) = delete;
    SingleThreadScope& operator=(const SingleThreadScope&) = delete;

  private:
    int saved_;
};
}  // namespace detail

// Wall-clock decoding speed: runs tag_sentence over every sentence `warmup`
// discarded passes then `repeats` timed passes, single-threaded, and reports
// milliseconds per sentence alongside the mean sentence length in words.
// Tokenization from raw text is the caller's job and is not timed.
template <class T>
BenchResult bench_decode(const Tagger<T>& model,
                         const std::vector<std::vector<std::string>>& sentences,
                         int warmup, int repeats) {
    if (sentences.empty()) {
        throw ContractError("bench_decode: sentence list is empty");
    }
    if (repeats < 1) {
        throw ContractError("bench_decode: repeats must be >= 1, got " +
                            std::to_string(repeats));
    }
    detail::SingleThreadScope one_thread;
    for (int pass = 0; pass < warmup; ++pass) {
        for (const auto& words : sentences) {
            (void)tag_sentence(model, words);
        }
    }
    const auto start = std::chrono::steady_clock::now();
    for (int pass = 0; pass < repeats; ++pass) {
        for (const auto& words : sentences) {
            (void)tag_sentence(model, words);
        }
    }
    const auto stop = std::chrono::steady_clock::now();
    const double ms =
        std::chrono::duration<double, std::milli>(stop - start).count();

    double words_total = 0.0;
    for (const auto& words : sentences) {
        words_total += static_cast<double>(words.size());
    }
    BenchResult out;
    out.ms_per_sentence =
        ms / (static_cast<double>(sentences.size()) * repeats);
    out.avg_words_per_sentence =
        words_total / static_cast<double>(sentences.size());
    return out;
}

}  // namespace vitag
