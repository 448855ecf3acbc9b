#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "vitag/train.hpp"

using namespace vitag;

namespace {

// Ten words that come in fixed partner pairs: w[i] always appears next to
// w[(i+5) % 10], so a masked token is recoverable from its neighbor.
const std::vector<std::string> kPairWords = {"da", "de", "di", "do", "du",
                                             "ga", "ge", "gi", "go", "gu"};

Vocab pair_vocab() {
    std::vector<std::string> tokens = {"[PAD]", "[UNK]", "[CLS]", "[SEP]",
                                       "[MASK]"};
    tokens.insert(tokens.end(), kPairWords.begin(), kPairWords.end());
    return Vocab::from_tokens(tokens);
}

std::vector<std::vector<std::string>> pair_sentences(int count,
                                                     uint64_t seed) {
    Rng rng(seed);
    std::vector<std::vector<std::string>> out;
    for (int s = 0; s < count; ++s) {
        const size_t i = static_cast<size_t>(rng.uniform_int(5));
        std::vector<std::string> words;
        for (int rep = 0; rep < 2 + static_cast<int>(rng.uniform_int(2));
             ++rep) {
            words.push_back(kPairWords[i]);
            words.push_back(kPairWords[i + 5]);
        }
        out.push_back(std::move(words));
    }
    return out;
}

EncoderConfig desk_encoder() {
    EncoderConfig cfg;
    cfg.num_layers = 1;
    cfg.hidden_size = 16;
    cfg.num_heads = 2;
    cfg.ffn_size = 32;
    cfg.max_positions = 16;
    cfg.dropout = 0.0;
    return cfg;
}

// Each word type carries a fixed tag, so tagging is a lookup the token
// embedding alone can support.
const std::vector<std::string> kTagWordsA = {"ban", "con", "dao", "em",
                                             "gao"};
const std::vector<std::string> kTagWordsB = {"hoa", "kem", "lang", "mua",
                                             "nam"};

Vocab tag_vocab() {
    std::vector<std::string> tokens = {"[PAD]", "[UNK]", "[CLS]", "[SEP]",
                                       "[MASK]"};
    tokens.insert(tokens.end(), kTagWordsA.begin(), kTagWordsA.end());
    tokens.insert(tokens.end(), kTagWordsB.begin(), kTagWordsB.end());
    return Vocab::from_tokens(tokens);
}

ConllDataset tag_dataset(int count, uint64_t seed) {
    Rng rng(seed);
    ConllDataset ds;
    ds.tagset = TagSet::from_labels({"A", "B"}, TagScheme::kPos);
    for (int s = 0; s < count; ++s) {
        ConllSentence sent;
        const int len = 3 + static_cast<int>(rng.uniform_int(4));
        for (int i = 0; i < len; ++i) {
            if (rng.bernoulli(0.5)) {
                sent.words.push_back(
                    kTagWordsA[rng.uniform_int(kTagWordsA.size())]);
                sent.tags.push_back("A");
            } else {
                sent.words.push_back(
                    kTagWordsB[rng.uniform_int(kTagWordsB.size())]);
                sent.tags.push_back("B");
            }
        }
        ds.sentences.push_back(std::move(sent));
    }
    return ds;
}

bool same_tensor_blocks(const Checkpoint& a, const Checkpoint& b) {
    if (a.tensors.size() != b.tensors.size()) return false;
    for (size_t i = 0; i < a.tensors.size(); ++i) {
        const TensorEntry& x = a.tensors[i];
        const TensorEntry& y = b.tensors[i];
        if (x.name != y.name || x.shape != y.shape ||
            x.data.size() != y.data.size()) {
            return false;
        }
        if (std::memcmp(x.data.data(), y.data.data(),
                        x.data.size() * sizeof(float)) != 0) {
            return false;
        }
    }
    return true;
}

int count_lines(const std::string& text) {
    int n = 0;
    for (char c : text) n += c == '\n';
    return n;
}

}  // namespace

TEST_CASE("read_token_shards concatenates files and skips blank lines") {
    const std::string a = "shards_test_a.txt";
    const std::string b = "shards_test_b.txt";
    {
        std::ofstream out(a);
        out << "da ga\n\n  \ndi gi do\n";
    }
    {
        std::ofstream out(b);
        out << "du gu\n";
    }
    auto sentences = read_token_shards({a, b});
    REQUIRE(sentences.size() == 3);
    CHECK(sentences[0] == std::vector<std::string>{"da", "ga"});
    CHECK(sentences[1] == std::vector<std::string>{"di", "gi", "do"});
    CHECK(sentences[2] == std::vector<std::string>{"du", "gu"});
    CHECK_THROWS_AS(read_token_shards({}), ConfigError);
    CHECK_THROWS_AS(read_token_shards({"no_such_shard.txt"}), IoError);
    std::remove(a.c_str());
    std::remove(b.c_str());
}

TEST_CASE("optimizer presets carry the published settings") {
    AdamConfig pre = pretrain_adam(5e-4);
    CHECK(pre.lr == 5e-4);
    CHECK(pre.beta1 == 0.9);
    CHECK(pre.beta2 == 0.999);
    CHECK(pre.eps == 1e-6);
    CHECK(pre.weight_decay == 0.01);

    AdamConfig fine = finetune_adam(2e-5);
    CHECK(fine.lr == 2e-5);
    CHECK(fine.eps == 1e-8);
    CHECK(fine.weight_decay == 0.0);
}

TEST_CASE("train_mlm learns a predictable corpus and logs per epoch") {
    Vocab vocab = pair_vocab();
    auto sentences = pair_sentences(300, 1);
    MlmTrainConfig cfg;
    cfg.epochs = 20;
    cfg.batch_size = 32;
    cfg.max_len = 16;
    cfg.lr = 3e-3;

    std::ostringstream log;
    MlmTrainResult res =
        train_mlm(sentences, vocab, desk_encoder(), cfg, 7, &log);
    CHECK_FALSE(res.diverged);
    REQUIRE(res.epoch_loss.size() == 20);
    for (double l : res.epoch_loss) CHECK(std::isfinite(l));
    // The masked token is implied by its partner; the loss has to fall far
    // below where it started.
    CHECK(res.epoch_loss.back() < 0.5 * res.epoch_loss.front());

    CHECK(count_lines(log.str()) == 20);
    std::istringstream lines(log.str());
    std::string line;
    int epoch = 0;
    while (std::getline(lines, line)) {
        epoch += 1;
        const size_t tab = line.find('\t');
        REQUIRE(tab != std::string::npos);
        CHECK(line.substr(0, tab) == std::to_string(epoch));
        // The log prints six decimals, so allow for that rounding.
        CHECK(std::stod(line.substr(tab + 1)) ==
              doctest::Approx(res.epoch_loss[static_cast<size_t>(epoch - 1)])
                  .epsilon(1e-5));
    }

    CHECK(res.checkpoint.task == "mlm");
    CHECK(res.checkpoint.epoch == 20);
    CHECK(res.checkpoint.adam_step > 0);
    CHECK(res.checkpoint.find("mlm.bias") != nullptr);
    CHECK(res.checkpoint.find("embed.token_table") != nullptr);
    CHECK(res.checkpoint.find("adam.m.embed.token_table") != nullptr);
}

TEST_CASE("train_mlm is bit-reproducible and resumes bit-exactly") {
    Vocab vocab = pair_vocab();
    auto sentences = pair_sentences(60, 2);
    MlmTrainConfig cfg;
    cfg.epochs = 4;
    cfg.batch_size = 16;
    cfg.max_len = 16;
    cfg.lr = 1e-3;
    EncoderConfig enc = desk_encoder();

    MlmTrainResult full = train_mlm(sentences, vocab, enc, cfg, 5);
    MlmTrainResult again = train_mlm(sentences, vocab, enc, cfg, 5);
    CHECK(same_tensor_blocks(full.checkpoint, again.checkpoint));
    CHECK(full.epoch_loss == again.epoch_loss);

    // Stop after two epochs, then pick the run back up.
    MlmTrainConfig half = cfg;
    half.epochs = 2;
    MlmTrainResult first = train_mlm(sentences, vocab, enc, half, 5);
    CHECK(first.checkpoint.epoch == 2);
    MlmTrainResult rest =
        train_mlm(sentences, vocab, enc, cfg, 5, nullptr, &first.checkpoint);
    REQUIRE(rest.epoch_loss.size() == 2);
    CHECK(rest.epoch_loss[0] == full.epoch_loss[2]);
    CHECK(rest.epoch_loss[1] == full.epoch_loss[3]);
    CHECK(same_tensor_blocks(rest.checkpoint, full.checkpoint));
    CHECK(rest.checkpoint.adam_step == full.checkpoint.adam_step);

    // A different seed has to train differently.
    MlmTrainResult other = train_mlm(sentences, vocab, enc, cfg, 6);
    CHECK_FALSE(same_tensor_blocks(full.checkpoint, other.checkpoint));
}

TEST_CASE("train_mlm keeps the last healthy checkpoint when it diverges") {
    Vocab vocab = pair_vocab();
    auto sentences = pair_sentences(40, 3);
    MlmTrainConfig cfg;
    cfg.epochs = 6;
    cfg.batch_size = 16;
    cfg.max_len = 16;
    cfg.lr = 1e12;  // guaranteed blow-up

    MlmTrainResult res = train_mlm(sentences, vocab, desk_encoder(), cfg, 4);
    CHECK(res.diverged);
    CHECK_FALSE(res.divergence_note.empty());
    CHECK(res.checkpoint.epoch < cfg.epochs);
    CHECK(res.epoch_loss.size() ==
          static_cast<size_t>(res.checkpoint.epoch));
    // The rescued snapshot is finite everywhere.
    for (const TensorEntry& e : res.checkpoint.tensors) {
        for (float v : e.data) REQUIRE(std::isfinite(v));
    }
}

TEST_CASE("train_mlm validates its configuration") {
    Vocab vocab = pair_vocab();
    auto sentences = pair_sentences(10, 4);
    MlmTrainConfig cfg;
    cfg.epochs = 1;

    CHECK_THROWS_AS(train_mlm({}, vocab, desk_encoder(), cfg, 0),
                    ConfigError);

    EncoderConfig wrong_vocab = desk_encoder();
    wrong_vocab.vocab_size = 3;
    CHECK_THROWS_AS(train_mlm(sentences, vocab, wrong_vocab, cfg, 0),
                    ConfigError);

    // The output head ties the token table, so a narrower embedding cannot
    // feed it.
    EncoderConfig projected = desk_encoder();
    projected.embedding_size = 8;
    CHECK_THROWS_AS(train_mlm(sentences, vocab, projected, cfg, 0),
                    ConfigError);

    MlmTrainResult res = train_mlm(sentences, vocab, desk_encoder(), cfg, 0);
    Checkpoint wrong_task = res.checkpoint;
    wrong_task.task = "electra";
    CHECK_THROWS_AS(train_mlm(sentences, vocab, desk_encoder(), cfg, 0,
                              nullptr, &wrong_task),
                    ContractError);
}

TEST_CASE("train_electra logs three losses and its discriminator learns") {
    Vocab vocab = pair_vocab();
    auto sentences = pair_sentences(200, 5);
    ElectraTrainConfig cfg;
    cfg.epochs = 8;
    cfg.batch_size = 32;
    cfg.max_len = 16;
    cfg.lr = 2e-3;

    std::ostringstream log;
    ElectraTrainResult res =
        train_electra(sentences, vocab, desk_encoder(), cfg, 9, &log);
    CHECK_FALSE(res.diverged);
    REQUIRE(res.epoch_loss.size() == 8);

    // epoch<TAB>gen<TAB>disc<TAB>combined, combined = gen + λ·disc.
    std::istringstream lines(log.str());
    std::string line;
    size_t epoch = 0;
    while (std::getline(lines, line)) {
        std::istringstream cols(line);
        std::string e, gen, disc, combined;
        REQUIRE(std::getline(cols, e, '\t'));
        REQUIRE(std::getline(cols, gen, '\t'));
        REQUIRE(std::getline(cols, disc, '\t'));
        REQUIRE(std::getline(cols, combined, '\t'));
        CHECK(e == std::to_string(epoch + 1));
        // Six printed decimals; the combined column also sums two rounded
        // numbers, one of them scaled by λ.
        CHECK(std::stod(gen) == doctest::Approx(res.epoch_loss[epoch][0])
                                    .epsilon(1e-5));
        CHECK(std::stod(combined) ==
              doctest::Approx(res.epoch_loss[epoch][0] +
                              cfg.lambda * res.epoch_loss[epoch][1])
                  .epsilon(1e-4));
        epoch += 1;
    }
    CHECK(epoch == 8);

    CHECK(res.checkpoint.task == "electra");
    CHECK(res.checkpoint.extra.count("lambda") == 1);
    CHECK(res.checkpoint.find("embed.token_table") != nullptr);
    CHECK(res.checkpoint.find("generator.layer0.attn.wq") != nullptr);
    CHECK(res.checkpoint.find("discriminator.head.w") != nullptr);

    // Rebuild the model from the checkpoint and score replaced-token
    // detection on fresh corruptions; it must clearly beat a fresh model.
    ElectraConfig ecfg =
        ElectraConfig::from_discriminator(res.checkpoint.encoder, cfg.lambda);
    Rng fresh_rng(77);
    ElectraModel<float> fresh(ecfg, fresh_rng);
    Rng trained_rng(78);
    ElectraModel<float> trained(ecfg, trained_rng);
    for (auto& [name, p] : trained.named_parameters()) {
        const TensorEntry& e = res.checkpoint.require(name);
        REQUIRE(e.shape == p.shape());
        std::copy(e.data.begin(), e.data.end(), p.data().begin());
    }
    auto held_out = pair_sentences(60, 6);
    const double before = rtd_accuracy(fresh, held_out, vocab, cfg.policy,
                                       21, cfg.max_len);
    const double after = rtd_accuracy(trained, held_out, vocab, cfg.policy,
                                      21, cfg.max_len);
    CHECK(after > before);
    CHECK(after >= 0.8);
}

TEST_CASE("train_electra can warm start from an MLM checkpoint") {
    Vocab vocab = pair_vocab();
    auto sentences = pair_sentences(30, 7);
    MlmTrainConfig mlm_cfg;
    mlm_cfg.epochs = 1;
    mlm_cfg.max_len = 16;
    MlmTrainResult mlm =
        train_mlm(sentences, vocab, desk_encoder(), mlm_cfg, 1);

    ElectraTrainConfig cfg;
    cfg.epochs = 1;
    cfg.batch_size = 16;
    cfg.max_len = 16;
    std::ostringstream log;
    ElectraTrainResult res = train_electra(sentences, vocab, desk_encoder(),
                                           cfg, 2, &log, &mlm.checkpoint);
    CHECK_FALSE(res.diverged);
    CHECK(log.str().find("notice: warm start loaded") != std::string::npos);
}

TEST_CASE("tagging_accuracy rejects an empty dataset") {
    Vocab vocab = tag_vocab();
    TagSet tags = TagSet::from_labels({"A", "B"}, TagScheme::kPos);
    HeadConfig head;
    head.kind = HeadKind::kFineTune;
    head.dropout = 0.0;
    Rng rng(1);
    EncoderConfig enc = desk_encoder();
    enc.vocab_size = vocab.size();
    Tagger<float> model(enc, head, vocab, tags, rng);
    ConllDataset empty;
    CHECK_THROWS_AS(tagging_accuracy(model, empty), ContractError);
}

TEST_CASE("finetune learns word-to-tag lookups and keeps the best epoch") {
    Vocab vocab = tag_vocab();
    ConllDataset train_ds = tag_dataset(120, 11);
    FinetuneConfig cfg;
    cfg.head.kind = HeadKind::kFineTune;
    cfg.head.dropout = 0.0;
    cfg.epochs = 10;
    cfg.batch_size = 16;
    cfg.encoder_lr = 3e-3;
    cfg.head_lr = 1e-2;

    std::ostringstream log;
    FinetuneResult res =
        finetune(train_ds, nullptr, vocab, desk_encoder(), nullptr, cfg, 13,
                 &log);
    REQUIRE(res.dev_accuracy.size() == 10);
    CHECK(res.best_dev_accuracy >= 0.95);
    CHECK(res.best_dev_accuracy ==
          *std::max_element(res.dev_accuracy.begin(),
                            res.dev_accuracy.end()));
    CHECK(res.checkpoint.epoch == res.best_epoch);
    CHECK(res.dev_accuracy[static_cast<size_t>(res.best_epoch - 1)] ==
          res.best_dev_accuracy);
    CHECK(res.checkpoint.task == "pos");
    CHECK(res.checkpoint.has_head);
    CHECK(count_lines(log.str()) == 10);

    // The saved model scores unseen sentences well too.
    Tagger<float> model = tagger_from_checkpoint(res.checkpoint);
    ConllDataset test_ds = tag_dataset(40, 12);
    CHECK(tagging_accuracy(model, test_ds) >= 0.95);
}

TEST_CASE("finetune is deterministic for a seed, split included") {
    Vocab vocab = tag_vocab();
    ConllDataset train_ds = tag_dataset(40, 21);
    FinetuneConfig cfg;
    cfg.head.kind = HeadKind::kBiGru;
    cfg.head.rnn_hidden = 4;
    cfg.head.dropout = 0.0;
    cfg.epochs = 3;
    cfg.batch_size = 16;
    cfg.encoder_lr = 1e-3;
    cfg.head_lr = 3e-3;

    FinetuneResult a =
        finetune(train_ds, nullptr, vocab, desk_encoder(), nullptr, cfg, 3);
    FinetuneResult b =
        finetune(train_ds, nullptr, vocab, desk_encoder(), nullptr, cfg, 3);
    CHECK(a.train_loss == b.train_loss);
    CHECK(a.dev_accuracy == b.dev_accuracy);
    CHECK(a.best_epoch == b.best_epoch);
    CHECK(same_tensor_blocks(a.checkpoint, b.checkpoint));

    FinetuneResult c =
        finetune(train_ds, nullptr, vocab, desk_encoder(), nullptr, cfg, 4);
    CHECK_FALSE(same_tensor_blocks(a.checkpoint, c.checkpoint));
}

TEST_CASE("finetune accepts an explicit dev set and a warm start") {
    Vocab vocab = tag_vocab();
    ConllDataset train_ds = tag_dataset(40, 31);
    ConllDataset dev_ds = tag_dataset(12, 32);
    dev_ds.tagset = train_ds.tagset;

    // Pretrain briefly so the warm start has something to donate. The MLM
    // vocabulary must match the fine-tuning one.
    auto sentences = std::vector<std::vector<std::string>>{};
    for (const ConllSentence& s : train_ds.sentences) {
        sentences.push_back(s.words);
    }
    MlmTrainConfig mlm_cfg;
    mlm_cfg.epochs = 1;
    mlm_cfg.max_len = 16;
    MlmTrainResult mlm =
        train_mlm(sentences, vocab, desk_encoder(), mlm_cfg, 1);

    FinetuneConfig cfg;
    cfg.head.kind = HeadKind::kFineTune;
    cfg.head.dropout = 0.0;
    cfg.epochs = 2;
    cfg.encoder_lr = 1e-3;
    cfg.head_lr = 3e-3;

    std::ostringstream log;
    FinetuneResult res = finetune(train_ds, &dev_ds, vocab, desk_encoder(),
                                  &mlm.checkpoint, cfg, 17, &log);
    CHECK(log.str().find("notice: warm start loaded") != std::string::npos);
    CHECK(res.dev_accuracy.size() == 2);

    ConllDataset empty;
    empty.tagset = train_ds.tagset;
    CHECK_THROWS_AS(finetune(empty, &dev_ds, vocab, desk_encoder(), nullptr,
                             cfg, 17),
                    ConfigError);

    ConllDataset lone = tag_dataset(1, 33);
    CHECK_THROWS_AS(finetune(lone, nullptr, vocab, desk_encoder(), nullptr,
                             cfg, 17),
                    ConfigError);
}

TEST_CASE("run_grid fills every head-by-encoder cell and marks failures") {
    Vocab vocab = tag_vocab();
    ConllDataset train_ds = tag_dataset(40, 41);
    ConllDataset test_ds = tag_dataset(20, 42);

    EncoderConfig enc = desk_encoder();
    enc.hidden_size = 8;
    enc.ffn_size = 16;

    EncoderConfig broken = enc;
    broken.vocab_size = 3;  // disagrees with the vocabulary → cell fails

    GridConfig cfg;
    cfg.finetune.head.rnn_hidden = 4;
    cfg.finetune.head.attn_dim = 4;
    cfg.finetune.head.attn_heads = 2;
    cfg.finetune.head.dropout = 0.0;
    cfg.finetune.epochs = 2;
    cfg.finetune.batch_size = 16;
    cfg.finetune.encoder_lr = 1e-3;
    cfg.finetune.head_lr = 3e-3;
    cfg.seed = 51;

    std::vector<GridColumn> columns;
    columns.push_back({"fresh", vocab, enc, nullptr});
    columns.push_back({"broken", vocab, broken, nullptr});

    std::ostringstream log;
    GridResult grid = run_grid(columns, train_ds, test_ds, cfg, &log);
    CHECK(grid.row_labels ==
          std::vector<std::string>{"+Fine-Tune", "+BiLSTM", "+BiGRU",
                                   "+BiLSTM_Attn", "+BiGRU_Attn"});
    CHECK(grid.column_labels == std::vector<std::string>{"fresh", "broken"});
    REQUIRE(grid.cells.size() == 5);
    for (size_t r = 0; r < 5; ++r) {
        REQUIRE(grid.cells[r].size() == 2);
        CHECK(grid.cells[r][0].ok);
        CHECK(grid.cells[r][0].accuracy >= 0.0);
        CHECK(grid.cells[r][0].accuracy <= 1.0);
        CHECK_FALSE(grid.cells[r][1].ok);
        CHECK(grid.cells[r][1].error.find("vocab") != std::string::npos);
    }

    const std::string table = grid.table();
    CHECK(table.find("+BiLSTM_Attn") != std::string::npos);
    CHECK(table.find("ERR") != std::string::npos);
    CHECK(table.find("**") != std::string::npos);
    CHECK(count_lines(table) == 6);  // header plus five rows

    // Sequential grids are reproducible down to the rendered table.
    GridResult again = run_grid(columns, train_ds, test_ds, cfg);
    CHECK(again.table() == table);

    CHECK_THROWS_AS(run_grid({}, train_ds, test_ds, cfg), ConfigError);
}

TEST_CASE("a parallel grid still fills every cell") {
    Vocab vocab = tag_vocab();
    ConllDataset train_ds = tag_dataset(24, 61);
    ConllDataset test_ds = tag_dataset(10, 62);

    EncoderConfig enc = desk_encoder();
    enc.hidden_size = 8;
    enc.ffn_size = 16;

    GridConfig cfg;
    cfg.finetune.head.rnn_hidden = 4;
    cfg.finetune.head.attn_dim = 4;
    cfg.finetune.head.attn_heads = 2;
    cfg.finetune.head.dropout = 0.0;
    cfg.finetune.epochs = 1;
    cfg.finetune.encoder_lr = 1e-3;
    cfg.finetune.head_lr = 3e-3;
    cfg.seed = 71;
    cfg.parallel = true;

    std::ostringstream log;
    GridResult grid =
        run_grid({{"fresh", vocab, enc, nullptr}}, train_ds, test_ds, cfg,
                 &log);
    CHECK(log.str().find("parallel grid") != std::string::npos);
    for (size_t r = 0; r < grid.cells.size(); ++r) {
        CHECK(grid.cells[r][0].ok);
    }
}
