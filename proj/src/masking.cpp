#include "vitag/masking.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace vitag {

std::vector<int> MaskPlan::apply(const std::vector<int>& ids) const {
    std::vector<int> out = ids;
    for (size_t k = 0; k < selected_positions.size(); ++k) {
        int p = selected_positions[k];
        if (p < 0 || p >= static_cast<int>(out.size())) {
            throw ContractError("MaskPlan::apply: position " +
                                std::to_string(p) +
                                " outside sequence of length " +
                                std::to_string(out.size()));
        }
        out[static_cast<size_t>(p)] = replacement_ids[k];
    }
    return out;
}

MaskPlan select_mask_targets(const TokenSequence& seq, const Vocab& vocab,
                             Rng& rng, const MaskPolicy& policy) {
    double frac_sum = policy.mask_frac + policy.keep_frac + policy.random_frac;
    if (std::abs(frac_sum - 1.0) > 1e-9) {
        throw ConfigError("mask policy: action fractions sum to " +
                          std::to_string(frac_sum) + ", expected 1");
    }
    if (!(policy.select_prob > 0.0) || policy.select_prob > 1.0) {
        throw ConfigError("mask policy: select_prob must be in (0, 1]");
    }

    // Group subword positions by owning word. Special and padding positions
    // carry word_index -1 and are skipped, so they can never be selected.
    int n = seq.length();
    int num_words = 0;
    for (int p = 0; p < n; ++p) {
        num_words = std::max(num_words, seq.word_index[p] + 1);
    }
    std::vector<std::vector<int>> positions(static_cast<size_t>(num_words));
    for (int p = 0; p < n; ++p) {
        if (seq.word_index[p] >= 0) {
            positions[static_cast<size_t>(seq.word_index[p])].push_back(p);
        }
    }
    std::vector<int> words;
    for (int w = 0; w < num_words; ++w) {
        if (!positions[static_cast<size_t>(w)].empty()) words.push_back(w);
    }
    if (words.empty()) {
        throw ContractError(
            "select_mask_targets: sequence has no maskable words");
    }

    // Per-word independent selection; if nothing came up, force one word so
    // every training sequence contributes at least one prediction.
    std::vector<char> take(words.size(), 0);
    bool any = false;
    for (size_t i = 0; i < words.size(); ++i) {
        take[i] = rng.bernoulli(policy.select_prob) ? 1 : 0;
        any = any || take[i];
    }
    if (!any) {
        take[static_cast<size_t>(
            rng.uniform_int(static_cast<int64_t>(words.size())))] = 1;
    }

    MaskPlan plan;
    plan.targets.assign(static_cast<size_t>(n), -1);
    int regular = vocab.size() - Vocab::kNumSpecials;

    for (size_t i = 0; i < words.size(); ++i) {
        if (!take[i]) continue;
        double u = rng.uniform();
        MaskAction action =
            u < policy.mask_frac ? MaskAction::kMask
            : u < policy.mask_frac + policy.keep_frac ? MaskAction::kKeep
                                                      : MaskAction::kRandom;
        plan.selected_words.push_back(words[i]);
        plan.actions.push_back(action);
        for (int p : positions[static_cast<size_t>(words[i])]) {
            int original = seq.ids[static_cast<size_t>(p)];
            int placed = original;  // KEEP
            if (action == MaskAction::kMask) {
                placed = vocab.mask_id();
            } else if (action == MaskAction::kRandom) {
                if (regular <= 0) {
                    throw ContractError(
                        "select_mask_targets: vocabulary has no non-special "
                        "tokens to sample replacements from");
                }
                placed = Vocab::kNumSpecials +
                         static_cast<int>(rng.uniform_int(regular));
            }
            plan.selected_positions.push_back(p);
            plan.replacement_ids.push_back(placed);
            plan.targets[static_cast<size_t>(p)] = original;
        }
    }
    return plan;
}

}  // namespace vitag
