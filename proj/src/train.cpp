#include "vitag/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <numeric>
#include <ostream>

namespace vitag {

namespace {

std::string fmt6(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    return buf;
}

std::string fmt4(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.4f", v);
    return buf;
}

// Packs parameters and Adam moments into checkpoint tensor blocks. The
// moment blocks ride along under "adam.m."/"adam.v." names.
Checkpoint pack_training_state(
    const std::vector<std::pair<std::string, TensorF>>& params,
    AdamOptimizer<float>& opt) {
    Checkpoint ck;
    for (const auto& [name, p] : params) {
        TensorF& t = const_cast<TensorF&>(p);
        ck.add(name, t.shape(), t.data());
    }
    for (const auto& group : opt.groups()) {
        for (const auto& slot : group.slots) {
            Shape shape = const_cast<TensorF&>(slot.param).shape();
            ck.add("adam.m." + slot.name, shape,
                   std::span<const float>(slot.m.data(), slot.m.size()));
            ck.add("adam.v." + slot.name, shape,
                   std::span<const float>(slot.v.data(), slot.v.size()));
        }
    }
    ck.adam_step = opt.step_count();
    return ck;
}

void restore_params(const std::vector<std::pair<std::string, TensorF>>& params,
                    const Checkpoint& ck) {
    for (const auto& [name, p] : params) {
        TensorF& t = const_cast<TensorF&>(p);
        const TensorEntry& e = ck.require(name);
        if (e.shape != t.shape()) {
            throw IntegrityError("resume: tensor '" + name + "' is " +
                                 shape_string(e.shape) +
                                 ", the model expects " +
                                 shape_string(t.shape()));
        }
        std::copy(e.data.begin(), e.data.end(), t.data().begin());
    }
}

void restore_optimizer(AdamOptimizer<float>& opt, const Checkpoint& ck) {
    if (ck.adam_step < 0) {
        throw IntegrityError(
            "resume: checkpoint carries no optimizer state");
    }
    for (auto& group : opt.groups()) {
        for (auto& slot : group.slots) {
            const TensorEntry& m = ck.require("adam.m." + slot.name);
            const TensorEntry& v = ck.require("adam.v." + slot.name);
            if (m.data.size() != slot.m.size() ||
                v.data.size() != slot.v.size()) {
                throw IntegrityError("resume: optimizer state for '" +
                                     slot.name + "' has the wrong size");
            }
            std::copy(m.data.begin(), m.data.end(), slot.m.begin());
            std::copy(v.data.begin(), v.data.end(), slot.v.begin());
        }
    }
    opt.set_step_count(ck.adam_step);
}

// Flattens per-sequence targets into the padded [batch·seq] layout, -1 in
// the padding.
std::vector<int> flatten_targets(const std::vector<MaskPlan>& plans,
                                 const Batch& b) {
    std::vector<int> out(static_cast<size_t>(b.batch * b.seq), -1);
    for (size_t i = 0; i < plans.size(); ++i) {
        const std::vector<int>& t = plans[i].targets;
        for (size_t p = 0; p < t.size(); ++p) {
            out[i * static_cast<size_t>(b.seq) + p] = t[p];
        }
    }
    return out;
}

EncoderConfig with_vocab(EncoderConfig cfg, const Vocab& vocab,
                         const char* who) {
    if (cfg.vocab_size == 0) {
        cfg.vocab_size = vocab.size();
    } else if (cfg.vocab_size != vocab.size()) {
        throw ConfigError(std::string(who) + ": encoder vocab_size " +
                          std::to_string(cfg.vocab_size) +
                          " does not match the vocabulary of " +
                          std::to_string(vocab.size()));
    }
    return cfg;
}

}  // namespace

std::vector<std::vector<std::string>> read_token_shards(
    const std::vector<std::string>& paths) {
    if (paths.empty()) {
        throw ConfigError("read_token_shards: no shard files");
    }
    std::vector<std::vector<std::string>> out;
    for (const std::string& path : paths) {
        std::ifstream in(path);
        if (!in) {
            throw IoError("cannot open shard '" + path + "'");
        }
        std::string line;
        while (std::getline(in, line)) {
            std::vector<std::string> words = split_words(line);
            if (!words.empty()) {
                out.push_back(std::move(words));
            }
        }
    }
    return out;
}

AdamConfig pretrain_adam(double lr) {
    AdamConfig cfg;
    cfg.lr = lr;
    cfg.beta1 = 0.9;
    cfg.beta2 = 0.999;
    cfg.eps = 1e-6;
    cfg.weight_decay = 0.01;
    return cfg;
}

AdamConfig finetune_adam(double lr) {
    AdamConfig cfg;
    cfg.lr = lr;
    cfg.beta1 = 0.9;
    cfg.beta2 = 0.999;
    cfg.eps = 1e-8;
    cfg.weight_decay = 0.0;
    return cfg;
}

// ---------------------------------------------------------------------------

MlmTrainResult train_mlm(const std::vector<std::vector<std::string>>& sentences,
                         const Vocab& vocab, const EncoderConfig& encoder_cfg,
                         const MlmTrainConfig& cfg, uint64_t seed,
                         std::ostream* log, const Checkpoint* resume) {
    if (sentences.empty()) {
        throw ConfigError("train_mlm: no sentences");
    }
    EncoderConfig enc_cfg = with_vocab(encoder_cfg, vocab, "train_mlm");
    if (enc_cfg.embedding() != enc_cfg.hidden_size) {
        throw ConfigError(
            "train_mlm: the tied output head needs embedding width equal to "
            "hidden width");
    }
    const int max_len = std::min(cfg.max_len, enc_cfg.max_positions);

    Rng init_rng(Rng::derive(seed, 1));
    Encoder<float> enc(enc_cfg, init_rng);
    TensorF bias =
        TensorF::zeros({static_cast<int64_t>(vocab.size())}, true);
    auto params = enc.named_parameters(true);
    params.emplace_back("mlm.bias", bias);
    AdamOptimizer<float> opt;
    opt.add_group(pretrain_adam(cfg.lr), params);

    int completed = 0;
    if (resume != nullptr) {
        if (resume->task != "mlm") {
            throw ContractError("train_mlm: cannot resume from a '" +
                                resume->task + "' checkpoint");
        }
        restore_params(params, *resume);
        restore_optimizer(opt, *resume);
        completed = static_cast<int>(resume->epoch);
    }

    std::vector<TokenSequence> base;
    base.reserve(sentences.size());
    for (const auto& words : sentences) {
        if (!words.empty()) {
            base.push_back(encode_sentence(words, vocab, max_len));
        }
    }
    if (base.empty()) {
        throw ConfigError("train_mlm: no usable sentences");
    }

    MlmTrainResult result;
    auto snapshot = [&](int epoch) {
        Checkpoint ck = pack_training_state(params, opt);
        ck.task = "mlm";
        ck.seed = seed;
        ck.epoch = epoch;
        ck.encoder = enc_cfg;
        ck.vocab = vocab.tokens();
        return ck;
    };
    Checkpoint last_good = snapshot(completed);

    for (int epoch = completed + 1; epoch <= cfg.epochs; ++epoch) {
        std::vector<size_t> order(base.size());
        std::iota(order.begin(), order.end(), size_t{0});
        Rng order_rng(Rng::derive(seed, 2, static_cast<uint64_t>(epoch)));
        order_rng.shuffle(order);
        Rng fwd_rng(Rng::derive(seed, 3, static_cast<uint64_t>(epoch)));
        const uint64_t plan_salt =
            Rng::derive(seed, 4, static_cast<uint64_t>(epoch));

        double total = 0.0;
        int64_t batches = 0;
        for (size_t start = 0;
             start < order.size() && !result.diverged;
             start += static_cast<size_t>(cfg.batch_size)) {
            const size_t stop = std::min(
                order.size(), start + static_cast<size_t>(cfg.batch_size));
            std::vector<TokenSequence> seqs;
            std::vector<MaskPlan> plans;
            for (size_t i = start; i < stop; ++i) {
                const size_t idx = order[i];
                Rng plan_rng(Rng::derive(plan_salt, idx));
                plans.push_back(select_mask_targets(base[idx], vocab,
                                                    plan_rng, cfg.policy));
                seqs.push_back(base[idx]);
                seqs.back().ids = plans.back().apply(base[idx].ids);
            }
            Batch b = Batch::from_sequences(seqs, vocab);
            // Once weights go non-finite the forward pass itself can throw
            // (softmax sees rows of NaN), so divergence is caught around the
            // whole step, not just around the loss value.
            try {
                auto encoded = enc.encode(b, true, fwd_rng);
                TensorF hidden =
                    reshape(encoded.layers.back(),
                            {b.batch * b.seq, enc_cfg.hidden_size});
                TensorF logits = mlm_logits(hidden, enc.token_table(), bias);
                TensorF loss = mlm_loss(logits, flatten_targets(plans, b));
                const double value = loss.item();
                if (!std::isfinite(value)) {
                    throw OptimizerError("non-finite loss in epoch " +
                                         std::to_string(epoch));
                }
                opt.zero_grad();
                loss.backward();
                opt.step();
                total += value;
                batches += 1;
            } catch (const Error& e) {
                result.diverged = true;
                result.divergence_note = e.what();
                break;
            }
        }
        if (result.diverged) break;

        const double mean = total / static_cast<double>(batches);
        result.epoch_loss.push_back(mean);
        if (log != nullptr) {
            *log << epoch << '\t' << fmt6(mean) << '\n';
        }
        last_good = snapshot(epoch);
    }
    result.checkpoint = std::move(last_good);
    return result;
}

// ---------------------------------------------------------------------------

ElectraTrainResult train_electra(
    const std::vector<std::vector<std::string>>& sentences, const Vocab& vocab,
    const EncoderConfig& discriminator_cfg, const ElectraTrainConfig& cfg,
    uint64_t seed, std::ostream* log, const Checkpoint* init) {
    if (sentences.empty()) {
        throw ConfigError("train_electra: no sentences");
    }
    EncoderConfig disc_cfg =
        with_vocab(discriminator_cfg, vocab, "train_electra");
    ElectraConfig ecfg =
        ElectraConfig::from_discriminator(disc_cfg, cfg.lambda);
    ecfg.validate();
    const int max_len = std::min(cfg.max_len, disc_cfg.max_positions);

    Rng init_rng(Rng::derive(seed, 1));
    ElectraModel<float> model(ecfg, init_rng);
    if (init != nullptr) {
        warm_start_encoder(model.discriminator(), *init,
                           log != nullptr ? *log : std::cerr);
    }
    auto params = model.named_parameters();
    AdamOptimizer<float> opt;
    opt.add_group(pretrain_adam(cfg.lr), params);

    std::vector<TokenSequence> base;
    for (const auto& words : sentences) {
        if (!words.empty()) {
            base.push_back(encode_sentence(words, vocab, max_len));
        }
    }
    if (base.empty()) {
        throw ConfigError("train_electra: no usable sentences");
    }

    ElectraTrainResult result;
    auto snapshot = [&](int epoch) {
        Checkpoint ck = pack_training_state(params, opt);
        ck.task = "electra";
        ck.seed = seed;
        ck.epoch = epoch;
        ck.encoder = disc_cfg;
        ck.vocab = vocab.tokens();
        ck.extra["lambda"] = fmt6(cfg.lambda);
        return ck;
    };
    Checkpoint last_good = snapshot(0);

    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        std::vector<size_t> order(base.size());
        std::iota(order.begin(), order.end(), size_t{0});
        Rng order_rng(Rng::derive(seed, 2, static_cast<uint64_t>(epoch)));
        order_rng.shuffle(order);
        Rng step_rng(Rng::derive(seed, 3, static_cast<uint64_t>(epoch)));
        const uint64_t plan_salt =
            Rng::derive(seed, 4, static_cast<uint64_t>(epoch));

        double gen_total = 0.0, disc_total = 0.0, combined_total = 0.0;
        int64_t batches = 0;
        for (size_t start = 0;
             start < order.size() && !result.diverged;
             start += static_cast<size_t>(cfg.batch_size)) {
            const size_t stop = std::min(
                order.size(), start + static_cast<size_t>(cfg.batch_size));
            std::vector<TokenSequence> seqs;
            std::vector<MaskPlan> plans;
            for (size_t i = start; i < stop; ++i) {
                const size_t idx = order[i];
                Rng plan_rng(Rng::derive(plan_salt, idx));
                seqs.push_back(base[idx]);
                plans.push_back(select_mask_targets(base[idx], vocab,
                                                    plan_rng, cfg.policy));
            }
            // As in train_mlm, a diverged model can throw from the forward
            // pass itself, so the whole step sits in the catch.
            try {
                auto step = electra_step(model, seqs, plans, vocab, true,
                                         step_rng);
                const double gen = step.gen_loss.item();
                const double disc = step.disc_loss.item();
                const double combined = step.combined.item();
                if (!std::isfinite(combined)) {
                    throw OptimizerError("non-finite loss in epoch " +
                                         std::to_string(epoch));
                }
                opt.zero_grad();
                step.combined.backward();
                opt.step();
                gen_total += gen;
                disc_total += disc;
                combined_total += combined;
                batches += 1;
            } catch (const Error& e) {
                result.diverged = true;
                result.divergence_note = e.what();
                break;
            }
        }
        if (result.diverged) break;

        const double n = static_cast<double>(batches);
        result.epoch_loss.push_back(
            {gen_total / n, disc_total / n, combined_total / n});
        if (log != nullptr) {
            *log << epoch << '\t' << fmt6(gen_total / n) << '\t'
                 << fmt6(disc_total / n) << '\t' << fmt6(combined_total / n)
                 << '\n';
        }
        last_good = snapshot(epoch);
    }
    result.checkpoint = std::move(last_good);
    return result;
}

double rtd_accuracy(ElectraModel<float>& model,
                    const std::vector<std::vector<std::string>>& sentences,
                    const Vocab& vocab, const MaskPolicy& policy,
                    uint64_t seed, int max_len) {
    if (sentences.empty()) {
        throw ContractError("rtd_accuracy: no sentences");
    }
    NoGradGuard no_grad;
    Rng rng(Rng::derive(seed, 9));
    int64_t hits = 0, total = 0;
    const size_t batch_size = 32;
    for (size_t start = 0; start < sentences.size(); start += batch_size) {
        const size_t stop =
            std::min(sentences.size(), start + batch_size);
        std::vector<TokenSequence> seqs;
        std::vector<MaskPlan> plans;
        std::vector<TokenSequence> masked;
        for (size_t i = start; i < stop; ++i) {
            seqs.push_back(encode_sentence(sentences[i], vocab, max_len));
            plans.push_back(
                select_mask_targets(seqs.back(), vocab, rng, policy));
            masked.push_back(seqs.back());
            masked.back().ids = plans.back().apply(seqs.back().ids);
        }
        Batch gen_batch = Batch::from_sequences(masked, vocab);
        TensorF probs =
            softmax(model.generator_logits(gen_batch, false, rng));

        std::vector<TokenSequence> corrupted = seqs;
        std::vector<RtdBatch> rtd;
        for (size_t i = 0; i < seqs.size(); ++i) {
            const int64_t row = static_cast<int64_t>(i) * gen_batch.seq;
            TensorF rows = slice(probs, 0, row, row + seqs[i].length());
            rtd.push_back(sample_and_label(seqs[i], plans[i], rows, rng));
            corrupted[i].ids = rtd.back().corrupted_ids;
        }
        Batch disc_batch = Batch::from_sequences(corrupted, vocab);
        TensorF logits = model.discriminator_logits(disc_batch, false, rng);
        for (size_t i = 0; i < seqs.size(); ++i) {
            for (int p = 0; p < seqs[i].length(); ++p) {
                const RtdLabel label = rtd[i].rtd_labels[static_cast<size_t>(p)];
                if (label == RtdLabel::kIgnore) continue;
                const float logit =
                    logits.data()[static_cast<size_t>(i) *
                                      static_cast<size_t>(disc_batch.seq) +
                                  static_cast<size_t>(p)];
                const bool said_replaced = logit > 0.0f;
                hits += said_replaced == (label == RtdLabel::kReplaced);
                total += 1;
            }
        }
    }
    return static_cast<double>(hits) / static_cast<double>(total);
}

// ---------------------------------------------------------------------------

double tagging_accuracy(const Tagger<float>& model, const ConllDataset& data,
                        int batch_size) {
    if (data.sentences.empty()) {
        throw ContractError("tagging_accuracy: empty dataset");
    }
    NoGradGuard no_grad;
    Rng rng(0);
    const int max_positions = model.encoder().config().max_positions;
    int64_t hits = 0, total = 0;
    for (size_t start = 0; start < data.sentences.size();
         start += static_cast<size_t>(batch_size)) {
        const size_t stop = std::min(
            data.sentences.size(), start + static_cast<size_t>(batch_size));
        std::vector<TokenSequence> seqs;
        for (size_t i = start; i < stop; ++i) {
            seqs.push_back(encode_sentence(data.sentences[i].words,
                                           model.vocab(), max_positions));
        }
        Batch b = Batch::from_sequences(seqs, model.vocab());
        TensorF logits = model.logits(b, false, rng);
        const int64_t tags = logits.dim(2);
        for (int64_t bi = 0; bi < b.batch; ++bi) {
            const ConllSentence& sent = data.sentences[start +
                                                       static_cast<size_t>(bi)];
            for (int64_t p = 0; p < b.seq; ++p) {
                const size_t flat =
                    static_cast<size_t>(bi * b.seq + p);
                if (b.is_word_start[flat] == 0) continue;
                const int w = b.word_index[flat];
                int best = 0;
                const float* row = logits.data().data() +
                                   static_cast<size_t>((bi * b.seq + p) * tags);
                for (int64_t t = 1; t < tags; ++t) {
                    if (row[t] > row[best]) best = static_cast<int>(t);
                }
                const int gold =
                    model.tags().find(sent.tags[static_cast<size_t>(w)]);
                hits += best == gold;
                total += 1;
            }
        }
    }
    return static_cast<double>(hits) / static_cast<double>(total);
}

FinetuneResult finetune(const ConllDataset& train, const ConllDataset* dev,
                        const Vocab& vocab, const EncoderConfig& encoder_cfg,
                        const Checkpoint* init, const FinetuneConfig& cfg,
                        uint64_t seed, std::ostream* log) {
    if (train.sentences.empty()) {
        throw ConfigError("finetune: empty training set");
    }
    EncoderConfig enc_cfg = with_vocab(encoder_cfg, vocab, "finetune");
    const TagSet& tags = train.tagset;

    // Materialize the train/dev split.
    std::vector<const ConllSentence*> train_view;
    ConllDataset dev_ds;
    dev_ds.tagset = tags;
    if (dev != nullptr) {
        for (const ConllSentence& s : train.sentences) train_view.push_back(&s);
        dev_ds.sentences = dev->sentences;
    } else {
        const size_t n = train.sentences.size();
        if (n < 2) {
            throw ConfigError(
                "finetune: need at least 2 sentences to hold out a dev set");
        }
        std::vector<size_t> order(n);
        std::iota(order.begin(), order.end(), size_t{0});
        Rng split_rng(Rng::derive(seed, 11));
        split_rng.shuffle(order);
        size_t n_dev = static_cast<size_t>(
            std::llround(cfg.dev_fraction * static_cast<double>(n)));
        n_dev = std::max<size_t>(1, std::min(n_dev, n - 1));
        for (size_t i = 0; i < n; ++i) {
            if (i < n_dev) {
                dev_ds.sentences.push_back(train.sentences[order[i]]);
            } else {
                train_view.push_back(&train.sentences[order[i]]);
            }
        }
    }

    Rng model_rng(Rng::derive(seed, 1));
    Tagger<float> model(enc_cfg, cfg.head, vocab, tags, model_rng);
    if (init != nullptr) {
        warm_start_encoder(model.encoder(), *init,
                           log != nullptr ? *log : std::cerr);
    }

    std::vector<std::pair<std::string, TensorF>> enc_params, head_params;
    for (auto& [name, p] : model.named_parameters()) {
        if (name.rfind("encoder.", 0) == 0) {
            enc_params.emplace_back(name, p);
        } else {
            head_params.emplace_back(name, p);
        }
    }
    AdamOptimizer<float> opt;
    opt.add_group(finetune_adam(cfg.encoder_lr), enc_params);
    opt.add_group(finetune_adam(cfg.head_lr), head_params);

    std::vector<TokenSequence> encoded;
    std::vector<std::vector<int>> gold;
    for (const ConllSentence* s : train_view) {
        encoded.push_back(
            encode_sentence(s->words, vocab, enc_cfg.max_positions));
        std::vector<int> ids;
        for (const std::string& tag : s->tags) ids.push_back(tags.require(tag));
        gold.push_back(std::move(ids));
    }

    FinetuneResult result;
    double best = -1.0;
    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        std::vector<size_t> order(encoded.size());
        std::iota(order.begin(), order.end(), size_t{0});
        Rng order_rng(Rng::derive(seed, 12, static_cast<uint64_t>(epoch)));
        order_rng.shuffle(order);
        Rng fwd_rng(Rng::derive(seed, 13, static_cast<uint64_t>(epoch)));

        double total = 0.0;
        int64_t batches = 0;
        for (size_t start = 0; start < order.size();
             start += static_cast<size_t>(cfg.batch_size)) {
            const size_t stop = std::min(
                order.size(), start + static_cast<size_t>(cfg.batch_size));
            std::vector<TokenSequence> seqs;
            std::vector<std::vector<int>> batch_gold;
            for (size_t i = start; i < stop; ++i) {
                seqs.push_back(encoded[order[i]]);
                batch_gold.push_back(gold[order[i]]);
            }
            Batch b = Batch::from_sequences(seqs, vocab);
            TensorF loss =
                tag_loss(model.logits(b, true, fwd_rng), b, batch_gold);
            total += loss.item();
            batches += 1;
            opt.zero_grad();
            loss.backward();
            opt.step();
        }
        const double mean = total / static_cast<double>(batches);
        const double acc = tagging_accuracy(model, dev_ds);
        result.train_loss.push_back(mean);
        result.dev_accuracy.push_back(acc);
        if (log != nullptr) {
            *log << epoch << '\t' << fmt6(mean) << '\t' << fmt6(acc) << '\n';
        }
        if (acc > best) {
            best = acc;
            result.best_epoch = epoch;
            result.checkpoint = checkpoint_from_tagger(model, seed, epoch);
        }
    }
    result.best_dev_accuracy = best;
    return result;
}

// ---------------------------------------------------------------------------

std::string GridResult::table() const {
    std::vector<std::string> heads = {"head"};
    heads.insert(heads.end(), row_labels.begin(), row_labels.end());

    // Render cells, bolding each column's best accuracy.
    std::vector<std::vector<std::string>> text(
        row_labels.size(), std::vector<std::string>(column_labels.size()));
    for (size_t c = 0; c < column_labels.size(); ++c) {
        double best = -1.0;
        for (size_t r = 0; r < row_labels.size(); ++r) {
            if (cells[r][c].ok) best = std::max(best, cells[r][c].accuracy);
        }
        for (size_t r = 0; r < row_labels.size(); ++r) {
            const GridCell& cell = cells[r][c];
            if (!cell.ok) {
                text[r][c] = "ERR";
            } else if (cell.accuracy == best) {
                text[r][c] = "**" + fmt4(cell.accuracy) + "**";
            } else {
                text[r][c] = fmt4(cell.accuracy);
            }
        }
    }

    size_t label_width = std::string("head").size();
    for (const std::string& r : row_labels) {
        label_width = std::max(label_width, r.size());
    }
    std::vector<size_t> widths(column_labels.size());
    for (size_t c = 0; c < column_labels.size(); ++c) {
        widths[c] = column_labels[c].size();
        for (size_t r = 0; r < row_labels.size(); ++r) {
            widths[c] = std::max(widths[c], text[r][c].size());
        }
    }

    auto pad = [](const std::string& s, size_t width) {
        return s + std::string(width - s.size(), ' ');
    };
    auto end_line = [](std::string& s) {
        while (!s.empty() && s.back() == ' ') s.pop_back();
        s += '\n';
    };
    std::string out = pad("head", label_width);
    for (size_t c = 0; c < column_labels.size(); ++c) {
        out += "  " + pad(column_labels[c], widths[c]);
    }
    end_line(out);
    for (size_t r = 0; r < row_labels.size(); ++r) {
        out += pad(row_labels[r], label_width);
        for (size_t c = 0; c < column_labels.size(); ++c) {
            out += "  " + pad(text[r][c], widths[c]);
        }
        end_line(out);
    }
    return out;
}

GridResult run_grid(const std::vector<GridColumn>& columns,
                    const ConllDataset& train, const ConllDataset& test,
                    const GridConfig& cfg, std::ostream* log) {
    if (columns.empty()) {
        throw ConfigError("run_grid: no encoder columns");
    }
    GridResult grid;
    for (HeadKind kind : all_head_kinds()) {
        grid.row_labels.push_back(head_table_label(kind));
    }
    for (const GridColumn& col : columns) {
        grid.column_labels.push_back(col.name);
    }
    const int64_t rows = static_cast<int64_t>(grid.row_labels.size());
    const int64_t cols = static_cast<int64_t>(columns.size());
    grid.cells.assign(static_cast<size_t>(rows),
                      std::vector<GridCell>(static_cast<size_t>(cols)));

    auto run_cell = [&](int64_t r, int64_t c) {
        GridCell cell;
        try {
            FinetuneConfig fc = cfg.finetune;
            fc.head.kind = all_head_kinds()[static_cast<size_t>(r)];
            const GridColumn& col = columns[static_cast<size_t>(c)];
            FinetuneResult res = finetune(train, nullptr, col.vocab,
                                          col.encoder, col.init, fc, cfg.seed);
            Tagger<float> model = tagger_from_checkpoint(res.checkpoint);
            cell.accuracy = tagging_accuracy(model, test);
            cell.ok = true;
        } catch (const Error& e) {
            cell.error = e.what();
        }
        grid.cells[static_cast<size_t>(r)][static_cast<size_t>(c)] = cell;
    };

    if (cfg.parallel) {
        if (log != nullptr) {
            *log << "notice: parallel grid forfeits bit-exact "
                    "reproducibility between runs\n";
        }
        const int64_t total = rows * cols;
#pragma omp parallel for schedule(dynamic)
        for (int64_t i = 0; i < total; ++i) {
            run_cell(i / cols, i % cols);
        }
    } else {
        for (int64_t r = 0; r < rows; ++r) {
            for (int64_t c = 0; c < cols; ++c) {
                run_cell(r, c);
                if (log != nullptr) {
                    const GridCell& cell =
                        grid.cells[static_cast<size_t>(r)]
                                  [static_cast<size_t>(c)];
                    *log << grid.row_labels[static_cast<size_t>(r)] << " × "
                         << grid.column_labels[static_cast<size_t>(c)]
                         << ": "
                         << (cell.ok ? fmt4(cell.accuracy)
                                     : "ERR (" + cell.error + ")")
                         << '\n';
                }
            }
        }
    }
    return grid;
}

}  // namespace vitag
