#pragma once

#include <vector>

#include "vitag/error.hpp"
#include "vitag/rng.hpp"
#include "vitag/tensor.hpp"
#include "vitag/tokenizer.hpp"

namespace vitag {

// Per-word corruption for masked-language-model pretraining. Selection is a
// whole-word decision; the action is then applied to every subword the word
// owns.
enum class MaskAction { kMask, kKeep, kRandom };

struct MaskPolicy {
    double select_prob = 0.15;  // per-word selection probability
    double mask_frac = 0.8;     // P(all subwords -> [MASK] | selected)
    double keep_frac = 0.1;     // P(ids left unchanged   | selected)
    double random_frac = 0.1;   // P(per-subword random id | selected)
};

// Corruption plan for one sequence. `selected_positions`/`replacement_ids`
// are parallel arrays covering exactly the subword positions owned by
// selected words; `targets` is aligned with the full sequence and holds the
// original id there and -1 (ignore) everywhere else.
struct MaskPlan {
    std::vector<int> selected_words;      // word indices, ascending
    std::vector<MaskAction> actions;      // parallel to selected_words
    std::vector<int> selected_positions;  // subword positions, ascending
    std::vector<int> replacement_ids;     // id actually placed at each one
    std::vector<int> targets;             // per position: original id or -1

    // Returns a corrupted copy of `ids` with the replacements written in.
    std::vector<int> apply(const std::vector<int>& ids) const;
};

// Draws a corruption plan: each word is selected independently with
// probability `select_prob` (one word is forced if the draw comes up empty),
// then per selected word the action is MASK/KEEP/RANDOM with the policy
// fractions. RANDOM replaces each subword independently by a uniformly
// random non-special id. [CLS]/[SEP]/[PAD] positions are never touched.
MaskPlan select_mask_targets(const TokenSequence& seq, const Vocab& vocab,
                             Rng& rng, const MaskPolicy& policy = {});

// Vocabulary logits from hidden states through the (shared) token-embedding
// table: logits = hidden * table^T + bias. `hidden` is [n, e] and `table` is
// [vocab, e]; pass an undefined tensor to skip the bias.
template <class T>
Tensor<T> mlm_logits(const Tensor<T>& hidden, const Tensor<T>& token_table,
                     const Tensor<T>& bias) {
    Tensor<T> logits = matmul_nt(hidden, token_table);
    if (bias.defined()) logits = add_bias(logits, bias);
    return logits;
}

// Mean cross-entropy over the non-ignored positions of a [batch, seq, vocab]
// (or already flat [n, vocab]) logit tensor.
template <class T>
Tensor<T> mlm_loss(const Tensor<T>& logits, const std::vector<int>& targets) {
    Tensor<T> flat = logits;
    if (logits.rank() == 3) {
        flat = reshape(logits, {logits.dim(0) * logits.dim(1), logits.dim(2)});
    }
    return cross_entropy(flat, targets);
}

}  // namespace vitag
