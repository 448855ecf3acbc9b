#pragma once

#include <algorithm>
#include <cmath>
#include <iostream>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "vitag/encoder.hpp"
#include "vitag/error.hpp"
#include "vitag/rng.hpp"
#include "vitag/tensor.hpp"
#include "vitag/tokenizer.hpp"

namespace vitag {

// Five-layer tagging architecture: a learned scalar mix over all encoder
// layers feeds one of five heads — linear fine-tune, BiLSTM, BiGRU, or the
// attention variants — ending in a per-position linear classifier that is
// scored at word-start subwords only.

enum class HeadKind { kFineTune, kBiLstm, kBiGru, kBiLstmAttn, kBiGruAttn };

inline const std::vector<HeadKind>& all_head_kinds() {
    static const std::vector<HeadKind> kinds = {
        HeadKind::kFineTune, HeadKind::kBiLstm, HeadKind::kBiGru,
        HeadKind::kBiLstmAttn, HeadKind::kBiGruAttn};
    return kinds;
}

std::string head_kind_name(HeadKind kind);         // config-file key
std::string head_table_label(HeadKind kind);       // results-table row label
HeadKind head_kind_from_string(const std::string& name);

struct HeadConfig {
    HeadKind kind = HeadKind::kFineTune;
    int rnn_hidden = 256;  // units per direction
    int rnn_layers = 1;
    int attn_dim = 64;     // per-head dimension
    int attn_heads = 3;
    double dropout = 0.5;
    int num_tags = 0;

    bool has_rnn() const { return kind != HeadKind::kFineTune; }
    bool has_attention() const {
        return kind == HeadKind::kBiLstmAttn || kind == HeadKind::kBiGruAttn;
    }

    void validate() const {
        if (num_tags < 1) {
            throw ConfigError("head: num_tags must be >= 1, got " +
                              std::to_string(num_tags));
        }
        if (rnn_hidden < 1 || rnn_layers < 1) {
            throw ConfigError("head: rnn_hidden and rnn_layers must be >= 1");
        }
        if (attn_dim < 1 || attn_heads < 1) {
            throw ConfigError("head: attn_dim and attn_heads must be >= 1");
        }
        if (dropout < 0.0 || dropout >= 1.0) {
            throw ConfigError("head: dropout must be in [0, 1), got " +
                              std::to_string(dropout));
        }
    }
};

// Tag inventory. POS sets are flat label lists; NER sets are IOB2 and every
// I-X label must have its B-X counterpart.
enum class TagScheme { kPos, kNer };

// "pos" / "ner", used in files and on the command line.
std::string tag_scheme_name(TagScheme scheme);
TagScheme tag_scheme_from_string(const std::string& name);

class TagSet {
  public:
    static TagSet from_labels(std::vector<std::string> labels,
                              TagScheme scheme);
    // One label per line, id = line number.
    static TagSet load(const std::string& path, TagScheme scheme);
    void save(const std::string& path) const;

    int size() const { return static_cast<int>(labels_.size()); }
    const std::vector<std::string>& labels() const { return labels_; }
    const std::string& label(int id) const;
    // -1 when absent
    int find(std::string_view label) const;
    // LookupError when absent
    int require(std::string_view label) const;
    TagScheme scheme() const { return scheme_; }

  private:
    std::vector<std::string> labels_;
    TagScheme scheme_ = TagScheme::kPos;
};

// Learned layer combination B = γ · Σ_i softmax(w)_i · layer_i, with index 0
// weighting the embedding layer and 1..m the transformer layers.
template <class T>
struct ScalarMixParams {
    Tensor<T> gamma;  // [1], initialized to 1
    Tensor<T> w;      // [num_layers + 1], initialized to 0 (uniform mix)

    explicit ScalarMixParams(int count) {
        if (count < 1) {
            throw ConfigError("scalar mix: need at least one layer, got " +
                              std::to_string(count));
        }
        gamma = Tensor<T>::from_data({1}, {T(1)}, true);
        w = Tensor<T>::zeros({count}, true);
    }
};

template <class T>
Tensor<T> scalar_mix(const std::vector<Tensor<T>>& layers,
                     const ScalarMixParams<T>& params) {
    if (static_cast<int64_t>(layers.size()) != params.w.dim(0)) {
        throw ContractError("scalar_mix: " + std::to_string(layers.size()) +
                            " layers for " + std::to_string(params.w.dim(0)) +
                            " weights");
    }
    const Shape out_shape = layers[0].shape();
    const int64_t flat = layers[0].numel();
    std::vector<Tensor<T>> rows;
    rows.reserve(layers.size());
    for (const auto& layer : layers) {
        if (layer.shape() != out_shape) {
            throw ShapeError("scalar_mix: layer shapes differ: " +
                             shape_string(layer.shape()) + " vs " +
                             shape_string(out_shape));
        }
        rows.push_back(reshape(layer, {1, flat}));
    }
    // softmax(w) [1, m+1] times the stacked layers [m+1, numel], then the
    // gamma scale as a 1×1 matmul so both parameters stay differentiable.
    Tensor<T> weights = softmax(reshape(params.w, {1, params.w.dim(0)}));
    Tensor<T> mixed = matmul(weights, concat(rows, 0));
    mixed = matmul(reshape(params.gamma, {1, 1}), mixed);
    return reshape(mixed, out_shape);
}

enum class RnnKind { kLstm, kGru };

// Bidirectional recurrent encoder over padded batches. Both directions skip
// padding by carrying the previous state through masked positions, so the
// backward pass starts from the true sentence end.
template <class T>
class BiRnn {
  public:
    BiRnn(RnnKind kind, int input_dim, int hidden, int num_layers, Rng& rng)
        : kind_(kind), input_dim_(input_dim), hidden_(hidden) {
        if (input_dim < 1 || hidden < 1 || num_layers < 1) {
            throw ConfigError("rnn: dimensions must be positive");
        }
        const int gates = kind == RnnKind::kLstm ? 4 : 3;
        // Uniform(-k, k) with k = 1/sqrt(hidden), the usual recurrent init.
        const double k = 1.0 / std::sqrt(static_cast<double>(hidden));
        auto init = [&](int64_t r, int64_t c) {
            std::vector<T> data(static_cast<size_t>(r * c));
            for (T& x : data) {
                x = static_cast<T>((rng.uniform() * 2.0 - 1.0) * k);
            }
            return r == 1 ? Tensor<T>::from_data({c}, std::move(data), true)
                          : Tensor<T>::from_data({r, c}, std::move(data), true);
        };
        int in = input_dim;
        for (int l = 0; l < num_layers; ++l) {
            Layer layer;
            for (Direction* d : {&layer.fwd, &layer.bwd}) {
                d->w_ih = init(in, gates * hidden);
                d->w_hh = init(hidden, gates * hidden);
                d->b_ih = init(1, gates * hidden);
                d->b_hh = init(1, gates * hidden);
            }
            layers_.push_back(std::move(layer));
            in = 2 * hidden;
        }
    }

    int output_dim() const { return 2 * hidden_; }

    // x: [batch, seq, input_dim] -> [batch, seq, 2·hidden]
    Tensor<T> forward(const Tensor<T>& x, const Batch& b) const {
        if (x.rank() != 3 || x.dim(0) != b.batch || x.dim(1) != b.seq) {
            throw ShapeError("rnn: input " + shape_string(x.shape()) +
                             " does not match batch " +
                             std::to_string(b.batch) + "×" +
                             std::to_string(b.seq));
        }
        Tensor<T> input = x;
        for (const Layer& layer : layers_) {
            std::vector<Tensor<T>> fwd = run_direction(layer.fwd, input, b, false);
            std::vector<Tensor<T>> bwd = run_direction(layer.bwd, input, b, true);
            std::vector<Tensor<T>> steps;
            steps.reserve(static_cast<size_t>(b.seq));
            for (int64_t t = 0; t < b.seq; ++t) {
                std::vector<Tensor<T>> pair = {fwd[static_cast<size_t>(t)],
                                               bwd[static_cast<size_t>(t)]};
                Tensor<T> both = concat(pair, 1);
                steps.push_back(reshape(both, {b.batch, 1, 2 * hidden_}));
            }
            input = concat(steps, 1);
        }
        return input;
    }

    std::vector<std::pair<std::string, Tensor<T>>> named_parameters() {
        std::vector<std::pair<std::string, Tensor<T>>> out;
        for (size_t l = 0; l < layers_.size(); ++l) {
            const std::pair<const char*, Direction*> dirs[] = {
                {"fwd", &layers_[l].fwd}, {"bwd", &layers_[l].bwd}};
            for (const auto& [side, d] : dirs) {
                const std::string base =
                    "l" + std::to_string(l) + "." + side + ".";
                out.emplace_back(base + "w_ih", d->w_ih);
                out.emplace_back(base + "w_hh", d->w_hh);
                out.emplace_back(base + "b_ih", d->b_ih);
                out.emplace_back(base + "b_hh", d->b_hh);
            }
        }
        return out;
    }

  private:
    struct Direction {
        Tensor<T> w_ih, w_hh, b_ih, b_hh;
    };
    struct Layer {
        Direction fwd, bwd;
    };

    // Constant per-step gates: `gate` is 1 at real tokens, `keep` = 1 - gate.
    std::pair<Tensor<T>, Tensor<T>> step_masks(const Batch& b,
                                               int64_t t) const {
        std::vector<T> gate(static_cast<size_t>(b.batch * hidden_));
        std::vector<T> keep(gate.size());
        for (int64_t bi = 0; bi < b.batch; ++bi) {
            const T real = b.attn[static_cast<size_t>(bi * b.seq + t)] ? T(1)
                                                                       : T(0);
            for (int64_t h = 0; h < hidden_; ++h) {
                gate[static_cast<size_t>(bi * hidden_ + h)] = real;
                keep[static_cast<size_t>(bi * hidden_ + h)] = T(1) - real;
            }
        }
        return {Tensor<T>::from_data({b.batch, hidden_}, std::move(gate)),
                Tensor<T>::from_data({b.batch, hidden_}, std::move(keep))};
    }

    std::vector<Tensor<T>> run_direction(const Direction& d,
                                         const Tensor<T>& input,
                                         const Batch& b, bool reverse) const {
        const int64_t in_dim = input.dim(2);
        const int64_t H = hidden_;
        Tensor<T> h = Tensor<T>::zeros({b.batch, H}, false);
        Tensor<T> c = Tensor<T>::zeros({b.batch, H}, false);
        std::vector<Tensor<T>> out(static_cast<size_t>(b.seq));
        for (int64_t step = 0; step < b.seq; ++step) {
            const int64_t t = reverse ? b.seq - 1 - step : step;
            Tensor<T> x_t =
                reshape(slice(input, 1, t, t + 1), {b.batch, in_dim});
            Tensor<T> zx = add_bias(matmul(x_t, d.w_ih), d.b_ih);
            Tensor<T> zh = add_bias(matmul(h, d.w_hh), d.b_hh);
            Tensor<T> h_new, c_new;
            if (kind_ == RnnKind::kLstm) {
                Tensor<T> z = add(zx, zh);
                Tensor<T> i = sigmoid(slice(z, 1, 0, H));
                Tensor<T> f = sigmoid(slice(z, 1, H, 2 * H));
                Tensor<T> g = tanh(slice(z, 1, 2 * H, 3 * H));
                Tensor<T> o = sigmoid(slice(z, 1, 3 * H, 4 * H));
                c_new = add(mul(f, c), mul(i, g));
                h_new = mul(o, tanh(c_new));
            } else {
                Tensor<T> r = sigmoid(add(slice(zx, 1, 0, H),
                                          slice(zh, 1, 0, H)));
                Tensor<T> u = sigmoid(add(slice(zx, 1, H, 2 * H),
                                          slice(zh, 1, H, 2 * H)));
                Tensor<T> n = tanh(add(slice(zx, 1, 2 * H, 3 * H),
                                       mul(r, slice(zh, 1, 2 * H, 3 * H))));
                Tensor<T> ones = Tensor<T>::full({b.batch, H}, T(1));
                h_new = add(mul(u, h), mul(add(ones, scale(u, T(-1))), n));
            }
            auto [gate, keep] = step_masks(b, t);
            h = add(mul(h_new, gate), mul(h, keep));
            if (kind_ == RnnKind::kLstm) {
                c = add(mul(c_new, gate), mul(c, keep));
            }
            out[static_cast<size_t>(t)] = h;
        }
        return out;
    }

    RnnKind kind_;
    int input_dim_;
    int64_t hidden_;
    std::vector<Layer> layers_;
};

// One of the five tagging heads over mixed encoder states.
template <class T>
class TagHead {
  public:
    TagHead(HeadConfig cfg, int input_dim, Rng& rng) : cfg_(cfg) {
        cfg_.validate();
        int feature = input_dim;
        if (cfg_.has_rnn()) {
            rnn_.emplace(cfg_.kind == HeadKind::kBiLstm ||
                                 cfg_.kind == HeadKind::kBiLstmAttn
                             ? RnnKind::kLstm
                             : RnnKind::kGru,
                         input_dim, cfg_.rnn_hidden, cfg_.rnn_layers, rng);
            feature = rnn_->output_dim();
        }
        if (cfg_.has_attention()) {
            const int64_t proj =
                static_cast<int64_t>(cfg_.attn_heads) * cfg_.attn_dim;
            const T stddev = T(0.02);
            attn_wq_ = Tensor<T>::truncated_normal({feature, proj}, stddev, rng);
            attn_bq_ = Tensor<T>::zeros({proj}, true);
            attn_wk_ = Tensor<T>::truncated_normal({feature, proj}, stddev, rng);
            attn_bk_ = Tensor<T>::zeros({proj}, true);
            attn_wv_ = Tensor<T>::truncated_normal({feature, proj}, stddev, rng);
            attn_bv_ = Tensor<T>::zeros({proj}, true);
            attn_wo_ = Tensor<T>::truncated_normal({proj, feature}, stddev, rng);
            attn_bo_ = Tensor<T>::zeros({feature}, true);
        }
        feature_dim_ = feature;
        linear_w_ = Tensor<T>::truncated_normal({feature, cfg_.num_tags},
                                                T(0.02), rng);
        linear_b_ = Tensor<T>::zeros({cfg_.num_tags}, true);
    }

    const HeadConfig& config() const { return cfg_; }
    int feature_dim() const { return feature_dim_; }

    // x: [batch, seq, input_dim] -> logits [batch, seq, num_tags]
    Tensor<T> forward(const Tensor<T>& x, const Batch& b, bool train,
                      Rng& rng) const {
        Tensor<T> h = x;
        if (rnn_) h = rnn_->forward(h, b);
        if (cfg_.has_attention()) h = attend(h, b);
        h = reshape(h, {b.batch * b.seq, feature_dim_});
        h = dropout(h, cfg_.dropout, train, rng);
        Tensor<T> logits = add_bias(matmul(h, linear_w_), linear_b_);
        return reshape(logits, {b.batch, b.seq, cfg_.num_tags});
    }

    std::vector<std::pair<std::string, Tensor<T>>> named_parameters() {
        std::vector<std::pair<std::string, Tensor<T>>> out;
        if (rnn_) {
            for (auto& [name, p] : rnn_->named_parameters()) {
                out.emplace_back("rnn." + name, p);
            }
        }
        if (cfg_.has_attention()) {
            out.emplace_back("attn.wq", attn_wq_);
            out.emplace_back("attn.bq", attn_bq_);
            out.emplace_back("attn.wk", attn_wk_);
            out.emplace_back("attn.bk", attn_bk_);
            out.emplace_back("attn.wv", attn_wv_);
            out.emplace_back("attn.bv", attn_bv_);
            out.emplace_back("attn.wo", attn_wo_);
            out.emplace_back("attn.bo", attn_bo_);
        }
        out.emplace_back("linear.weight", linear_w_);
        out.emplace_back("linear.bias", linear_b_);
        return out;
    }

  private:
    // Scaled dot-product self-attention over the RNN outputs with a residual
    // add; specials stay attendable, padding is masked out.
    Tensor<T> attend(const Tensor<T>& x, const Batch& b) const {
        const int64_t nh = cfg_.attn_heads;
        const int64_t dh = cfg_.attn_dim;
        const int64_t feature = feature_dim_;
        Tensor<T> x2d = reshape(x, {b.batch * b.seq, feature});

        auto heads = [&](const Tensor<T>& w, const Tensor<T>& bias) {
            Tensor<T> t = add_bias(matmul(x2d, w), bias);
            t = reshape(t, {b.batch, b.seq, nh, dh});
            t = permute(t, {0, 2, 1, 3});
            return reshape(t, {b.batch * nh, b.seq, dh});
        };
        Tensor<T> q = heads(attn_wq_, attn_bq_);
        Tensor<T> k = heads(attn_wk_, attn_bk_);
        Tensor<T> v = heads(attn_wv_, attn_bv_);

        Tensor<T> scores = scale(
            bmm_nt(q, k), static_cast<T>(1.0 / std::sqrt(double(dh))));
        Tensor<T> probs = masked_softmax(scores, attention_key_mask(b, nh));
        Tensor<T> ctx = bmm(probs, v);
        ctx = reshape(ctx, {b.batch, nh, b.seq, dh});
        ctx = permute(ctx, {0, 2, 1, 3});
        ctx = reshape(ctx, {b.batch * b.seq, nh * dh});

        Tensor<T> out = add_bias(matmul(ctx, attn_wo_), attn_bo_);
        return reshape(add(x2d, out), {b.batch, b.seq, feature});
    }

    HeadConfig cfg_;
    std::optional<BiRnn<T>> rnn_;
    Tensor<T> attn_wq_, attn_bq_, attn_wk_, attn_bk_;
    Tensor<T> attn_wv_, attn_bv_, attn_wo_, attn_bo_;
    Tensor<T> linear_w_, linear_b_;
    int64_t feature_dim_ = 0;
};

// Per-position tag targets: the word's gold tag at word-start subwords, -1
// (ignored) at [CLS]/[SEP]/[PAD] and ##-continuations.
inline std::vector<int> tag_targets(const Batch& b,
                                    const std::vector<std::vector<int>>& gold,
                                    int num_tags) {
    if (static_cast<int64_t>(gold.size()) != b.batch) {
        throw ContractError("tag_targets: " + std::to_string(gold.size()) +
                            " tag rows for batch of " +
                            std::to_string(b.batch));
    }
    std::vector<int> targets(static_cast<size_t>(b.batch * b.seq), -1);
    for (int64_t bi = 0; bi < b.batch; ++bi) {
        for (int64_t p = 0; p < b.seq; ++p) {
            const size_t idx = static_cast<size_t>(bi * b.seq + p);
            if (!b.is_word_start[idx]) continue;
            const int w = b.word_index[idx];
            if (w < 0 || static_cast<size_t>(w) >= gold[bi].size()) {
                throw ContractError(
                    "tag_targets: sentence " + std::to_string(bi) +
                    " has no gold tag for word " + std::to_string(w));
            }
            const int tag = gold[static_cast<size_t>(bi)][static_cast<size_t>(w)];
            if (tag < 0 || tag >= num_tags) {
                throw ContractError("tag_targets: tag id " +
                                    std::to_string(tag) +
                                    " outside [0, " +
                                    std::to_string(num_tags) + ")");
            }
            targets[idx] = tag;
        }
    }
    return targets;
}

// Mean cross-entropy over word-start positions only.
template <class T>
Tensor<T> tag_loss(const Tensor<T>& logits, const Batch& b,
                   const std::vector<std::vector<int>>& gold) {
    if (logits.rank() != 3 || logits.dim(0) != b.batch ||
        logits.dim(1) != b.seq) {
        throw ShapeError("tag_loss: logits " + shape_string(logits.shape()) +
                         " do not match batch " + std::to_string(b.batch) +
                         "×" + std::to_string(b.seq));
    }
    const int num_tags = static_cast<int>(logits.dim(2));
    return cross_entropy(
        reshape(logits, {b.batch * b.seq, logits.dim(2)}),
        tag_targets(b, gold, num_tags));
}

// Encoder + scalar mix + head, the full tagging model.
template <class T>
class Tagger {
  public:
    Tagger(const EncoderConfig& encoder_cfg, HeadConfig head_cfg, Vocab vocab,
           TagSet tags, Rng& rng)
        : vocab_(std::move(vocab)),
          tags_(std::move(tags)),
          encoder_(encoder_cfg, rng),
          mix_(encoder_cfg.num_layers + 1),
          head_(with_tag_count(head_cfg, tags_), encoder_cfg.hidden_size,
                rng) {}

    const Vocab& vocab() const { return vocab_; }
    const TagSet& tags() const { return tags_; }
    Encoder<T>& encoder() { return encoder_; }
    const Encoder<T>& encoder() const { return encoder_; }
    ScalarMixParams<T>& mix() { return mix_; }
    TagHead<T>& head() { return head_; }
    const HeadConfig& head_config() const { return head_.config(); }

    Tensor<T> logits(const Batch& b, bool train, Rng& rng) const {
        auto out = encoder_.encode(b, train, rng);
        Tensor<T> mixed = scalar_mix(out.layers, mix_);
        return head_.forward(mixed, b, train, rng);
    }

    std::vector<std::pair<std::string, Tensor<T>>> named_parameters() {
        std::vector<std::pair<std::string, Tensor<T>>> out;
        for (auto& [name, p] : encoder_.named_parameters()) {
            out.emplace_back("encoder." + name, p);
        }
        out.emplace_back("mix.gamma", mix_.gamma);
        out.emplace_back("mix.w", mix_.w);
        for (auto& [name, p] : head_.named_parameters()) {
            out.emplace_back("head." + name, p);
        }
        return out;
    }

  private:
    static HeadConfig with_tag_count(HeadConfig cfg, const TagSet& tags) {
        if (cfg.num_tags == 0) {
            cfg.num_tags = tags.size();
        } else if (cfg.num_tags != tags.size()) {
            throw ConfigError("head: num_tags " + std::to_string(cfg.num_tags) +
                              " does not match tag set of " +
                              std::to_string(tags.size()));
        }
        return cfg;
    }

    Vocab vocab_;
    TagSet tags_;
    Encoder<T> encoder_;
    ScalarMixParams<T> mix_;
    TagHead<T> head_;
};

// Tags one sentence: argmax at each word-start position, ties broken by the
// lowest tag id. Words lost to length truncation fall back to the tag set's
// first label, with a warning on the error stream.
template <class T>
std::vector<std::string> tag_sentence(const Tagger<T>& model,
                                      const std::vector<std::string>& words) {
    if (words.empty()) {
        throw ContractError("tag_sentence: empty word list");
    }
    TokenSequence seq =
        encode_sentence(words, model.vocab(),
                        model.encoder().config().max_positions);
    Batch b = Batch::from_sequences({seq}, model.vocab());

    Rng rng(0);  // eval mode: dropout is the identity, the stream is unused
    Tensor<T> logits;
    {
        NoGradGuard no_grad;
        logits = model.logits(b, false, rng);
    }
    const int64_t num_tags = logits.dim(2);

    std::vector<int> start_pos(words.size(), -1);
    for (int p = 0; p < seq.length(); ++p) {
        if (seq.is_word_start[p] && seq.word_index[p] >= 0) {
            start_pos[static_cast<size_t>(seq.word_index[p])] = p;
        }
    }

    std::vector<std::string> out;
    out.reserve(words.size());
    size_t first_lost = words.size();
    for (size_t w = 0; w < words.size(); ++w) {
        if (start_pos[w] < 0) {
            first_lost = std::min(first_lost, w);
            out.push_back(model.tags().label(0));
            continue;
        }
        int best = 0;
        for (int t = 1; t < num_tags; ++t) {
            if (logits.at({0, start_pos[w], t}) >
                logits.at({0, start_pos[w], best})) {
                best = t;
            }
        }
        out.push_back(model.tags().label(best));
    }
    if (first_lost < words.size()) {
        std::cerr << "warning: sentence truncated after "
                  << first_lost << " words; the rest tagged '"
                  << model.tags().label(0) << "'\n";
    }
    return out;
}

}  // namespace vitag
