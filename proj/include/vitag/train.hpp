#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "vitag/adam.hpp"
#include "vitag/checkpoint.hpp"
#include "vitag/conll.hpp"
#include "vitag/electra.hpp"
#include "vitag/encoder.hpp"
#include "vitag/heads.hpp"
#include "vitag/masking.hpp"
#include "vitag/tokenizer.hpp"

namespace vitag {

// One whitespace-tokenized sentence per non-empty line, concatenated over
// all shard files in the given order.
std::vector<std::vector<std::string>> read_token_shards(
    const std::vector<std::string>& paths);

// Adam settings used for pretraining (β1 0.9, β2 0.999, ε 1e-6, decoupled
// weight decay 0.01) and fine-tuning (ε 1e-8, no decay).
AdamConfig pretrain_adam(double lr);
AdamConfig finetune_adam(double lr);

// ---------------------------------------------------------------------------
// Masked-language-model pretraining.

struct MlmTrainConfig {
    int epochs = 50;
    int batch_size = 16;
    int max_len = 128;  // positions per sequence, capped by max_positions
    double lr = 1e-4;
    MaskPolicy policy{};
};

struct MlmTrainResult {
    Checkpoint checkpoint;           // after the last completed epoch
    std::vector<double> epoch_loss;  // one mean loss per completed epoch
    bool diverged = false;
    std::string divergence_note;
};

// Trains encoder + tied-embedding output head. Logs one "epoch<TAB>loss"
// line per epoch. On a non-finite loss or gradient the run stops and the
// checkpoint of the last completed epoch is returned with `diverged` set.
// Passing `resume` (a checkpoint this function produced, with optimizer
// state) continues bit-exactly where that run stopped.
MlmTrainResult train_mlm(const std::vector<std::vector<std::string>>& sentences,
                         const Vocab& vocab, const EncoderConfig& encoder_cfg,
                         const MlmTrainConfig& cfg, uint64_t seed,
                         std::ostream* log = nullptr,
                         const Checkpoint* resume = nullptr);

// ---------------------------------------------------------------------------
// Replaced-token-detection pretraining.

struct ElectraTrainConfig {
    int epochs = 50;
    int batch_size = 16;
    int max_len = 128;
    double lr = 1e-4;
    double lambda = 50.0;
    // Corruption masks every selected word; KEEP/RANDOM would leak original
    // ids into positions the discriminator must label as original.
    MaskPolicy policy{0.15, 1.0, 0.0, 0.0};
};

struct ElectraTrainResult {
    Checkpoint checkpoint;
    // Per completed epoch: generator, discriminator, combined.
    std::vector<std::array<double, 3>> epoch_loss;
    bool diverged = false;
    std::string divergence_note;
};

// Joint generator/discriminator training over a shared token table. Logs
// "epoch<TAB>gen<TAB>disc<TAB>combined" per epoch. `init` optionally warm
// starts the discriminator encoder from a pretraining checkpoint.
ElectraTrainResult train_electra(
    const std::vector<std::vector<std::string>>& sentences, const Vocab& vocab,
    const EncoderConfig& discriminator_cfg, const ElectraTrainConfig& cfg,
    uint64_t seed, std::ostream* log = nullptr,
    const Checkpoint* init = nullptr);

// Discriminator accuracy over freshly corrupted batches: the fraction of
// non-ignored positions where P(replaced) > 0.5 agrees with the label.
double rtd_accuracy(ElectraModel<float>& model,
                    const std::vector<std::vector<std::string>>& sentences,
                    const Vocab& vocab, const MaskPolicy& policy,
                    uint64_t seed, int max_len);

// ---------------------------------------------------------------------------
// Supervised fine-tuning.

struct FinetuneConfig {
    HeadConfig head{};  // num_tags 0 → taken from the tag set
    int epochs = 30;
    int batch_size = 16;
    double encoder_lr = 2e-5;
    double head_lr = 1e-3;
    double dev_fraction = 0.1;  // used only when no dev set is supplied
};

struct FinetuneResult {
    Checkpoint checkpoint;  // model state of the best dev-accuracy epoch
    std::vector<double> train_loss;
    std::vector<double> dev_accuracy;
    double best_dev_accuracy = 0.0;
    int best_epoch = 0;
};

// Word-level accuracy of the model's argmax tags against the gold tags,
// counting only words that survive sequence truncation.
double tagging_accuracy(const Tagger<float>& model, const ConllDataset& data,
                        int batch_size = 32);

// Two optimizer groups: encoder parameters at `encoder_lr`, scalar mix and
// head at `head_lr`. When `dev` is null a deterministic `dev_fraction` split
// of the training set (seeded) is held out. The checkpoint of the epoch with
// the best dev accuracy is returned. Logs "epoch<TAB>loss<TAB>dev_acc".
FinetuneResult finetune(const ConllDataset& train, const ConllDataset* dev,
                        const Vocab& vocab, const EncoderConfig& encoder_cfg,
                        const Checkpoint* init, const FinetuneConfig& cfg,
                        uint64_t seed, std::ostream* log = nullptr);

// ---------------------------------------------------------------------------
// The head-comparison grid (one row per head kind, one column per encoder).

struct GridColumn {
    std::string name;
    Vocab vocab;
    EncoderConfig encoder;
    const Checkpoint* init = nullptr;  // optional pretrained warm start
};

struct GridConfig {
    FinetuneConfig finetune;  // head.kind is overridden per row
    uint64_t seed = 0;
    // Runs cells concurrently; cell results may then differ bitwise between
    // runs (reduction order), which the sequential default never does.
    bool parallel = false;
};

struct GridCell {
    bool ok = false;
    double accuracy = 0.0;
    std::string error;
};

struct GridResult {
    std::vector<std::string> row_labels;
    std::vector<std::string> column_labels;
    std::vector<std::vector<GridCell>> cells;  // [row][column]

    // Aligned text table; the best cell per column is wrapped in ** **,
    // failed cells read ERR.
    std::string table() const;
};

// Fine-tunes every (head kind × column) cell with the shared seed and scores
// it on the test set. A failing cell is recorded as ERR and the remaining
// cells still run.
GridResult run_grid(const std::vector<GridColumn>& columns,
                    const ConllDataset& train, const ConllDataset& test,
                    const GridConfig& cfg, std::ostream* log = nullptr);

}  // namespace vitag
