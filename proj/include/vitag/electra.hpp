#pragma once

#include <string>
#include <utility>
#include <vector>

#include "vitag/encoder.hpp"
#include "vitag/error.hpp"
#include "vitag/masking.hpp"
#include "vitag/rng.hpp"
#include "vitag/tensor.hpp"
#include "vitag/tokenizer.hpp"

namespace vitag {

// Replaced-token detection: a small masked-LM generator proposes tokens at
// masked positions; a discriminator classifies every position of the sampled
// sequence as original vs replaced.

enum class RtdLabel { kOriginal, kReplaced, kIgnore };

// One sequence after generator sampling: the ids the discriminator sees and
// the per-position classification targets (specials/padding are IGNORE).
struct RtdBatch {
    std::vector<int> corrupted_ids;
    std::vector<RtdLabel> rtd_labels;
};

// 1 = replaced (positive class), 0 = original, -1 = ignore.
inline std::vector<int> rtd_targets(const std::vector<RtdLabel>& labels) {
    std::vector<int> out(labels.size());
    for (size_t i = 0; i < labels.size(); ++i) {
        switch (labels[i]) {
            case RtdLabel::kOriginal: out[i] = 0; break;
            case RtdLabel::kReplaced: out[i] = 1; break;
            case RtdLabel::kIgnore: out[i] = -1; break;
        }
    }
    return out;
}

struct ElectraConfig {
    EncoderConfig generator;
    EncoderConfig discriminator;
    double lambda = 50.0;  // discriminator loss weight in the combined loss

    // Standard sizing: the generator keeps the depth and head count but
    // halves the hidden and feed-forward widths, reading the shared token
    // table at the discriminator's width through an input projection.
    static ElectraConfig from_discriminator(const EncoderConfig& disc,
                                            double lambda = 50.0) {
        ElectraConfig cfg;
        cfg.discriminator = disc;
        cfg.generator = disc;
        cfg.generator.hidden_size = disc.hidden_size / 2;
        cfg.generator.ffn_size = disc.ffn() / 2;
        cfg.generator.embedding_size = disc.embedding();
        cfg.lambda = lambda;
        return cfg;
    }

    void validate() const {
        generator.validate();
        discriminator.validate();
        if (generator.hidden_size > discriminator.hidden_size) {
            throw ConfigError(
                "electra: generator hidden size " +
                std::to_string(generator.hidden_size) +
                " exceeds discriminator hidden size " +
                std::to_string(discriminator.hidden_size));
        }
        if (generator.embedding() != discriminator.embedding()) {
            throw ConfigError(
                "electra: shared token table needs one embedding width, got " +
                std::to_string(generator.embedding()) + " and " +
                std::to_string(discriminator.embedding()));
        }
        if (generator.vocab_size != discriminator.vocab_size) {
            throw ConfigError("electra: generator and discriminator must use "
                              "the same vocabulary");
        }
        if (!(lambda > 0.0)) {
            throw ConfigError("electra: lambda must be positive, got " +
                              std::to_string(lambda));
        }
    }
};

// Generator softmax over the vocabulary: p(v) ∝ exp(e(v)ᵀ h) with the rows
// of `token_table` as the candidate embeddings. No bias term, so zero states
// give the exactly uniform distribution.
template <class T>
Tensor<T> generator_probs(const Tensor<T>& hidden,
                          const Tensor<T>& token_table) {
    if (hidden.rank() != 2 || token_table.rank() != 2 ||
        hidden.dim(1) != token_table.dim(1)) {
        throw ShapeError("generator_probs: states " + shape_string(hidden.shape()) +
                         " vs table " + shape_string(token_table.shape()));
    }
    return softmax(mlm_logits(hidden, token_table, Tensor<T>{}));
}

// Replaced-token probability σ(wᵀ h_t) for every state row; returns [n, 1].
template <class T>
Tensor<T> discriminator_prob(const Tensor<T>& hidden, const Tensor<T>& w) {
    if (hidden.rank() != 2 || w.rank() != 1 || hidden.dim(1) != w.dim(0)) {
        throw ShapeError("discriminator_prob: states " +
                         shape_string(hidden.shape()) + " vs weight " +
                         shape_string(w.shape()));
    }
    return sigmoid(matmul(hidden, reshape(w, {w.dim(0), 1})));
}

// Samples a replacement from `probs` (one row per position of `seq`) at each
// masked position and labels every position. Sampling only reads numeric
// probabilities: no gradient flows from the labels back into the generator.
template <class T>
RtdBatch sample_and_label(const TokenSequence& seq, const MaskPlan& plan,
                          const Tensor<T>& probs, Rng& rng) {
    const int n = seq.length();
    if (probs.rank() != 2 || probs.dim(0) != n) {
        throw ShapeError("sample_and_label: need one probability row per "
                         "position, got " + shape_string(probs.shape()) +
                         " for length " + std::to_string(n));
    }
    const int64_t vocab = probs.dim(1);

    RtdBatch out;
    out.corrupted_ids = seq.ids;
    out.rtd_labels.assign(static_cast<size_t>(n), RtdLabel::kIgnore);
    for (int p = 0; p < n; ++p) {
        if (seq.word_index[p] >= 0) {
            out.rtd_labels[static_cast<size_t>(p)] = RtdLabel::kOriginal;
        }
    }
    for (int p : plan.selected_positions) {
        const T* row = probs.data().data() +
                       static_cast<size_t>(p) * static_cast<size_t>(vocab);
        const double u = rng.uniform();
        double cum = 0.0;
        int pick = static_cast<int>(vocab) - 1;
        for (int64_t v = 0; v < vocab; ++v) {
            cum += static_cast<double>(row[v]);
            if (u < cum) {
                pick = static_cast<int>(v);
                break;
            }
        }
        out.corrupted_ids[static_cast<size_t>(p)] = pick;
        out.rtd_labels[static_cast<size_t>(p)] =
            pick == seq.ids[static_cast<size_t>(p)] ? RtdLabel::kOriginal
                                                    : RtdLabel::kReplaced;
    }
    return out;
}

// Generator and discriminator encoders over one shared token-embedding
// table, plus the two output heads: the generator scores the vocabulary
// through the table (projecting its narrower states up to embedding width
// first when needed), the discriminator reduces each state to one logit.
template <class T>
class ElectraModel {
  public:
    ElectraModel(ElectraConfig cfg, Rng& rng)
        : cfg_(checked(std::move(cfg))),
          token_table_(Tensor<T>::truncated_normal(
              {cfg_.discriminator.vocab_size, cfg_.discriminator.embedding()},
              T(0.02), rng)),
          generator_(cfg_.generator, rng, token_table_),
          discriminator_(cfg_.discriminator, rng, token_table_),
          disc_w_(Tensor<T>::truncated_normal({cfg_.discriminator.hidden_size},
                                              T(0.02), rng)) {
        if (cfg_.generator.hidden_size != cfg_.generator.embedding()) {
            out_proj_w_ = Tensor<T>::truncated_normal(
                {cfg_.generator.hidden_size, cfg_.generator.embedding()},
                T(0.02), rng);
            out_proj_b_ = Tensor<T>::zeros({cfg_.generator.embedding()}, true);
        }
    }

    const ElectraConfig& config() const { return cfg_; }
    Tensor<T> token_table() const { return token_table_; }
    Encoder<T>& generator() { return generator_; }
    Encoder<T>& discriminator() { return discriminator_; }
    Tensor<T> disc_w() const { return disc_w_; }

    // Final generator states mapped into embedding space, flat [batch·seq, e].
    Tensor<T> generator_hidden(const Batch& b, bool train, Rng& rng) const {
        Tensor<T> h = generator_.encode(b, train, rng).layers.back();
        h = reshape(h, {b.batch * b.seq, cfg_.generator.hidden_size});
        if (out_proj_w_.defined()) {
            h = add_bias(matmul(h, out_proj_w_), out_proj_b_);
        }
        return h;
    }

    // Vocabulary logits e(v)ᵀ h for the generator softmax, flat [batch·seq, V].
    Tensor<T> generator_logits(const Batch& b, bool train, Rng& rng) const {
        return mlm_logits(generator_hidden(b, train, rng), token_table_,
                          Tensor<T>{});
    }

    // Replaced-token logits wᵀ h, flat [batch·seq, 1].
    Tensor<T> discriminator_logits(const Batch& b, bool train,
                                   Rng& rng) const {
        Tensor<T> h = discriminator_.encode(b, train, rng).layers.back();
        h = reshape(h, {b.batch * b.seq, cfg_.discriminator.hidden_size});
        return matmul(h, reshape(disc_w_, {disc_w_.dim(0), 1}));
    }

    // Shared table first and exactly once, then each encoder's own
    // parameters under a side prefix, then the two heads.
    std::vector<std::pair<std::string, Tensor<T>>> named_parameters() {
        std::vector<std::pair<std::string, Tensor<T>>> out;
        out.emplace_back("embed.token_table", token_table_);
        for (auto& [name, p] : generator_.named_parameters(false)) {
            out.emplace_back("generator." + name, p);
        }
        if (out_proj_w_.defined()) {
            out.emplace_back("generator.out_proj.weight", out_proj_w_);
            out.emplace_back("generator.out_proj.bias", out_proj_b_);
        }
        for (auto& [name, p] : discriminator_.named_parameters(false)) {
            out.emplace_back("discriminator." + name, p);
        }
        out.emplace_back("discriminator.head.w", disc_w_);
        return out;
    }

  private:
    static ElectraConfig checked(ElectraConfig cfg) {
        // Structural requirements only; lambda is a training-time concern
        // checked by ElectraConfig::validate().
        if (cfg.generator.hidden_size > cfg.discriminator.hidden_size) {
            throw ConfigError("electra: generator wider than discriminator");
        }
        if (cfg.generator.embedding() != cfg.discriminator.embedding() ||
            cfg.generator.vocab_size != cfg.discriminator.vocab_size) {
            throw ConfigError(
                "electra: encoders must share one token table (same "
                "vocabulary and embedding width)");
        }
        return cfg;
    }

    ElectraConfig cfg_;
    Tensor<T> token_table_;
    Encoder<T> generator_;
    Encoder<T> discriminator_;
    Tensor<T> out_proj_w_, out_proj_b_;
    Tensor<T> disc_w_;
};

template <class T>
struct ElectraStepResult {
    Tensor<T> gen_loss;
    Tensor<T> disc_loss;
    Tensor<T> combined;
    std::vector<RtdBatch> rtd;  // per input sequence, for accuracy stats
};

// One joint step over a batch of mask plans: masked-LM cross-entropy for the
// generator, then its samples (taken as constants) corrupt the inputs for
// the discriminator's original-vs-replaced binary cross-entropy.
// combined = gen_loss + lambda · disc_loss.
template <class T>
ElectraStepResult<T> electra_step(ElectraModel<T>& model,
                                  const std::vector<TokenSequence>& seqs,
                                  const std::vector<MaskPlan>& plans,
                                  const Vocab& vocab, bool train, Rng& rng) {
    if (seqs.empty() || seqs.size() != plans.size()) {
        throw ContractError("electra_step: " + std::to_string(plans.size()) +
                            " plans for " + std::to_string(seqs.size()) +
                            " sequences");
    }

    // Generator pass on the masked inputs.
    std::vector<TokenSequence> masked = seqs;
    for (size_t i = 0; i < seqs.size(); ++i) {
        masked[i].ids = plans[i].apply(seqs[i].ids);
    }
    Batch gen_batch = Batch::from_sequences(masked, vocab);
    const int64_t rows = gen_batch.batch * gen_batch.seq;
    Tensor<T> gen_logits = model.generator_logits(gen_batch, train, rng);

    std::vector<int> mlm_targets(static_cast<size_t>(rows), -1);
    for (size_t i = 0; i < seqs.size(); ++i) {
        for (int p = 0; p < seqs[i].length(); ++p) {
            mlm_targets[i * static_cast<size_t>(gen_batch.seq) +
                        static_cast<size_t>(p)] =
                plans[i].targets[static_cast<size_t>(p)];
        }
    }
    ElectraStepResult<T> result;
    result.gen_loss = cross_entropy(gen_logits, mlm_targets);

    // Sample replacements from the same pass, detached from the graph.
    {
        NoGradGuard no_grad;
        Tensor<T> probs = softmax(gen_logits);
        for (size_t i = 0; i < seqs.size(); ++i) {
            const int64_t start = static_cast<int64_t>(i) * gen_batch.seq;
            Tensor<T> row_probs =
                slice(probs, 0, start, start + seqs[i].length());
            result.rtd.push_back(
                sample_and_label(seqs[i], plans[i], row_probs, rng));
        }
    }

    // Discriminator pass on the sampled sequences.
    std::vector<TokenSequence> corrupted = seqs;
    std::vector<int> disc_targets(static_cast<size_t>(rows), -1);
    for (size_t i = 0; i < seqs.size(); ++i) {
        corrupted[i].ids = result.rtd[i].corrupted_ids;
        std::vector<int> t = rtd_targets(result.rtd[i].rtd_labels);
        for (int p = 0; p < seqs[i].length(); ++p) {
            disc_targets[i * static_cast<size_t>(gen_batch.seq) +
                         static_cast<size_t>(p)] = t[static_cast<size_t>(p)];
        }
    }
    Batch disc_batch = Batch::from_sequences(corrupted, vocab);
    Tensor<T> disc_logits = model.discriminator_logits(disc_batch, train, rng);
    result.disc_loss = bce_with_logits(disc_logits, disc_targets);

    result.combined =
        add(result.gen_loss,
            scale(result.disc_loss, static_cast<T>(model.config().lambda)));
    return result;
}

}  // namespace vitag
