#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "vitag/error.hpp"
#include "vitag/rng.hpp"
#include "vitag/tensor.hpp"
#include "vitag/tokenizer.hpp"

namespace vitag {

struct EncoderConfig {
    int num_layers = 4;    // paper-scale 12
    int hidden_size = 64;  // paper-scale 768
    int num_heads = 4;     // paper-scale 12
    int ffn_size = 0;      // 0 → 4 × hidden
    int embedding_size = 0;  // 0 → hidden; smaller encoders can share a
                             // wider embedding table through a projection
    int max_positions = 256;
    int vocab_size = 0;
    double dropout = 0.1;

    int ffn() const { return ffn_size > 0 ? ffn_size : 4 * hidden_size; }
    int embedding() const {
        return embedding_size > 0 ? embedding_size : hidden_size;
    }

    void validate() const {
        if (num_layers < 1) throw ConfigError("encoder: num_layers must be >= 1");
        if (hidden_size < 1 || num_heads < 1 ||
            hidden_size % num_heads != 0) {
            throw ConfigError("encoder: hidden_size " +
                              std::to_string(hidden_size) +
                              " not divisible by num_heads " +
                              std::to_string(num_heads));
        }
        if (vocab_size < Vocab::kNumSpecials) {
            throw ConfigError("encoder: vocab_size " +
                              std::to_string(vocab_size) + " is too small");
        }
        if (max_positions < 3) {
            throw ConfigError("encoder: max_positions must fit [CLS] + [SEP]");
        }
        if (dropout < 0.0 || dropout >= 1.0) {
            throw ConfigError("encoder: dropout must be in [0,1)");
        }
    }
};

// Uniform-length batch with the attention mask derived from [PAD].
struct Batch {
    int64_t batch = 0;
    int64_t seq = 0;
    std::vector<int> ids;            // batch × seq, row-major
    std::vector<int> segment_ids;
    std::vector<unsigned char> attn;  // 1 = real token, 0 = padding
    std::vector<int> word_index;      // −1 at specials/padding
    std::vector<uint8_t> is_word_start;

    static Batch from_sequences(const std::vector<TokenSequence>& seqs,
                                const Vocab& vocab) {
        if (seqs.empty()) throw ContractError("batch: no sequences");
        int max_len = 0;
        for (const auto& s : seqs) max_len = std::max(max_len, s.length());
        Batch b;
        b.batch = static_cast<int64_t>(seqs.size());
        b.seq = max_len;
        for (TokenSequence s : seqs) {
            pad_to(s, max_len, vocab);
            for (int i = 0; i < max_len; ++i) {
                b.ids.push_back(s.ids[i]);
                b.segment_ids.push_back(s.segment_ids[i]);
                b.attn.push_back(s.ids[i] == vocab.pad_id() ? 0 : 1);
                b.word_index.push_back(s.word_index[i]);
                b.is_word_start.push_back(s.is_word_start[i]);
            }
        }
        return b;
    }
};

// [batch*heads, seq, seq] key mask for self-attention over a padded batch:
// row (b,h,q) allows key t iff token (b,t) is real. Padded queries keep at
// least themselves unmasked so softmax stays well-defined; their outputs are
// ignored downstream.
inline std::vector<unsigned char> attention_key_mask(const Batch& b,
                                                     int64_t heads) {
    const int64_t s = b.seq;
    std::vector<unsigned char> mask(
        static_cast<size_t>(b.batch * heads * s * s));
    for (int64_t bi = 0; bi < b.batch; ++bi) {
        for (int64_t h = 0; h < heads; ++h) {
            for (int64_t q = 0; q < s; ++q) {
                const int64_t base = ((bi * heads + h) * s + q) * s;
                const bool q_real = b.attn[bi * s + q] != 0;
                for (int64_t t = 0; t < s; ++t) {
                    mask[base + t] =
                        q_real ? b.attn[bi * s + t]
                               : static_cast<unsigned char>(q == t);
                }
            }
        }
    }
    return mask;
}

// Post-layer-norm transformer encoder (original BERT arrangement): summed
// token/segment/position embeddings, then per layer masked multi-head
// self-attention and a GELU feed-forward block, each followed by
// residual + layer-norm.
template <class T>
class Encoder {
  public:
    struct Output {
        // index 0 = embedding output, 1..m = per-layer hidden states,
        // each [batch, seq, hidden]
        std::vector<Tensor<T>> layers;
        // per layer [batch*heads, seq, seq]; only kept when capture is on
        std::vector<Tensor<T>> attention;
    };

    // `token_table` shares an external embedding (ELECTRA generator and
    // discriminator use one table); default-constructed means "own it".
    Encoder(EncoderConfig cfg, Rng& rng, Tensor<T> token_table = {})
        : cfg_(cfg) {
        cfg_.validate();
        const int64_t h = cfg_.hidden_size;
        const int64_t e = cfg_.embedding();
        const T stddev = T(0.02);

        if (token_table.defined()) {
            if (token_table.shape() !=
                Shape{cfg_.vocab_size, e}) {
                throw ShapeError("encoder: shared token table " +
                                 shape_string(token_table.shape()) +
                                 " does not match vocab " +
                                 std::to_string(cfg_.vocab_size) +
                                 " x embedding " + std::to_string(e));
            }
            token_table_ = std::move(token_table);
            owns_token_table_ = false;
        } else {
            token_table_ = Tensor<T>::truncated_normal(
                {cfg_.vocab_size, e}, stddev, rng);
            owns_token_table_ = true;
        }
        segment_table_ = Tensor<T>::truncated_normal({2, e}, stddev, rng);
        position_table_ = Tensor<T>::truncated_normal(
            {cfg_.max_positions, e}, stddev, rng);
        embed_gain_ = Tensor<T>::full({e}, T(1));
        embed_gain_.set_requires_grad(true);
        embed_bias_ = Tensor<T>::zeros({e}, true);
        if (e != h) {
            embed_proj_ = Tensor<T>::truncated_normal({e, h}, stddev, rng);
        }

        layers_.resize(static_cast<size_t>(cfg_.num_layers));
        for (auto& l : layers_) {
            l.wq = Tensor<T>::truncated_normal({h, h}, stddev, rng);
            l.bq = Tensor<T>::zeros({h}, true);
            l.wk = Tensor<T>::truncated_normal({h, h}, stddev, rng);
            l.bk = Tensor<T>::zeros({h}, true);
            l.wv = Tensor<T>::truncated_normal({h, h}, stddev, rng);
            l.bv = Tensor<T>::zeros({h}, true);
            l.wo = Tensor<T>::truncated_normal({h, h}, stddev, rng);
            l.bo = Tensor<T>::zeros({h}, true);
            l.attn_gain = Tensor<T>::full({h}, T(1));
            l.attn_gain.set_requires_grad(true);
            l.attn_bias = Tensor<T>::zeros({h}, true);
            l.w1 = Tensor<T>::truncated_normal({h, cfg_.ffn()}, stddev, rng);
            l.b1 = Tensor<T>::zeros({cfg_.ffn()}, true);
            l.w2 = Tensor<T>::truncated_normal({cfg_.ffn(), h}, stddev, rng);
            l.b2 = Tensor<T>::zeros({h}, true);
            l.ffn_gain = Tensor<T>::full({h}, T(1));
            l.ffn_gain.set_requires_grad(true);
            l.ffn_bias = Tensor<T>::zeros({h}, true);
        }
    }

    const EncoderConfig& config() const { return cfg_; }
    Tensor<T> token_table() const { return token_table_; }
    bool owns_token_table() const { return owns_token_table_; }
    void set_capture_attention(bool v) { capture_attention_ = v; }

    // Deterministic name→tensor listing; construction order. The shared
    // token table is skipped when `include_token_table` is false so joint
    // setups can register it exactly once.
    std::vector<std::pair<std::string, Tensor<T>>> named_parameters(
        bool include_token_table = true) const {
        std::vector<std::pair<std::string, Tensor<T>>> out;
        if (include_token_table) {
            out.emplace_back("embed.token_table", token_table_);
        }
        out.emplace_back("embed.segment_table", segment_table_);
        out.emplace_back("embed.position_table", position_table_);
        out.emplace_back("embed.norm_gain", embed_gain_);
        out.emplace_back("embed.norm_bias", embed_bias_);
        if (embed_proj_.defined()) {
            out.emplace_back("embed.proj", embed_proj_);
        }
        for (size_t i = 0; i < layers_.size(); ++i) {
            const std::string p = "layer" + std::to_string(i) + ".";
            const auto& l = layers_[i];
            out.emplace_back(p + "attn.wq", l.wq);
            out.emplace_back(p + "attn.bq", l.bq);
            out.emplace_back(p + "attn.wk", l.wk);
            out.emplace_back(p + "attn.bk", l.bk);
            out.emplace_back(p + "attn.wv", l.wv);
            out.emplace_back(p + "attn.bv", l.bv);
            out.emplace_back(p + "attn.wo", l.wo);
            out.emplace_back(p + "attn.bo", l.bo);
            out.emplace_back(p + "attn.norm_gain", l.attn_gain);
            out.emplace_back(p + "attn.norm_bias", l.attn_bias);
            out.emplace_back(p + "ffn.w1", l.w1);
            out.emplace_back(p + "ffn.b1", l.b1);
            out.emplace_back(p + "ffn.w2", l.w2);
            out.emplace_back(p + "ffn.b2", l.b2);
            out.emplace_back(p + "ffn.norm_gain", l.ffn_gain);
            out.emplace_back(p + "ffn.norm_bias", l.ffn_bias);
        }
        return out;
    }

    // Summed token + segment + position embeddings, layer-normed, projected
    // to hidden width when the table is wider, then dropout.
    // Returns [batch, seq, hidden].
    Tensor<T> embed(const Batch& b, bool train, Rng& rng) const {
        check_length(b.seq);
        std::vector<int> positions(b.ids.size());
        for (int64_t r = 0; r < b.batch; ++r) {
            for (int64_t s = 0; s < b.seq; ++s) {
                positions[static_cast<size_t>(r * b.seq + s)] =
                    static_cast<int>(s);
            }
        }
        auto x = add(add(embedding(token_table_, b.ids),
                         embedding(segment_table_, b.segment_ids)),
                     embedding(position_table_, positions));
        x = layer_norm(x, embed_gain_, embed_bias_);
        if (embed_proj_.defined()) x = matmul(x, embed_proj_);
        x = dropout(x, cfg_.dropout, train, rng);
        return reshape(x, {b.batch, b.seq, cfg_.hidden_size});
    }

    Output encode(const Batch& b, bool train, Rng& rng) const {
        Output out;
        out.layers.reserve(static_cast<size_t>(cfg_.num_layers) + 1);
        out.layers.push_back(embed(b, train, rng));
        const auto key_mask = expand_key_mask(b);
        for (const auto& l : layers_) {
            out.layers.push_back(
                run_layer(l, out.layers.back(), b, key_mask, train, rng,
                          capture_attention_ ? &out.attention : nullptr));
        }
        return out;
    }

  private:
    struct Layer {
        Tensor<T> wq, bq, wk, bk, wv, bv, wo, bo;
        Tensor<T> attn_gain, attn_bias;
        Tensor<T> w1, b1, w2, b2;
        Tensor<T> ffn_gain, ffn_bias;
    };

    void check_length(int64_t seq) const {
        if (seq > cfg_.max_positions) {
            throw ContractError("encoder: sequence length " +
                                std::to_string(seq) + " exceeds max_positions " +
                                std::to_string(cfg_.max_positions));
        }
    }

    std::vector<unsigned char> expand_key_mask(const Batch& b) const {
        return attention_key_mask(b, cfg_.num_heads);
    }

    Tensor<T> split_heads(const Tensor<T>& x2d, int64_t batch,
                          int64_t seq) const {
        const int64_t nh = cfg_.num_heads;
        const int64_t dh = cfg_.hidden_size / nh;
        auto x = reshape(x2d, {batch, seq, nh, dh});
        x = permute(x, {0, 2, 1, 3});
        return reshape(x, {batch * nh, seq, dh});
    }

    Tensor<T> run_layer(const Layer& l, const Tensor<T>& prev, const Batch& b,
                        const std::vector<unsigned char>& key_mask, bool train,
                        Rng& rng, std::vector<Tensor<T>>* capture) const {
        const int64_t h = cfg_.hidden_size;
        const int64_t nh = cfg_.num_heads;
        const int64_t dh = h / nh;
        auto x = reshape(prev, {b.batch * b.seq, h});

        auto q = split_heads(add_bias(matmul(x, l.wq), l.bq), b.batch, b.seq);
        auto k = split_heads(add_bias(matmul(x, l.wk), l.bk), b.batch, b.seq);
        auto v = split_heads(add_bias(matmul(x, l.wv), l.bv), b.batch, b.seq);

        auto scores = scale(bmm_nt(q, k),
                            static_cast<T>(1.0 / std::sqrt(double(dh))));
        auto probs = masked_softmax(scores, key_mask);
        if (capture) capture->push_back(probs);

        auto ctx = bmm(probs, v);  // [B*nh, S, dh]
        ctx = reshape(ctx, {b.batch, nh, b.seq, dh});
        ctx = permute(ctx, {0, 2, 1, 3});
        ctx = reshape(ctx, {b.batch * b.seq, h});

        auto attn_out = add_bias(matmul(ctx, l.wo), l.bo);
        attn_out = dropout(attn_out, cfg_.dropout, train, rng);
        auto x1 = layer_norm(add(x, attn_out), l.attn_gain, l.attn_bias);

        auto f = gelu(add_bias(matmul(x1, l.w1), l.b1));
        f = add_bias(matmul(f, l.w2), l.b2);
        f = dropout(f, cfg_.dropout, train, rng);
        auto x2 = layer_norm(add(x1, f), l.ffn_gain, l.ffn_bias);

        return reshape(x2, {b.batch, b.seq, h});
    }

    EncoderConfig cfg_;
    Tensor<T> token_table_, segment_table_, position_table_;
    Tensor<T> embed_gain_, embed_bias_, embed_proj_;
    std::vector<Layer> layers_;
    bool owns_token_table_ = true;
    bool capture_attention_ = false;
};

using EncoderF = Encoder<float>;
using EncoderD = Encoder<double>;

}  // namespace vitag
