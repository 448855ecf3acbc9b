#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "vitag/encoder.hpp"
#include "vitag/error.hpp"
#include "vitag/heads.hpp"
#include "vitag/tokenizer.hpp"

namespace vitag {

// One saved tensor: row-major float32 block plus its shape.
struct TensorEntry {
    std::string name;
    Shape shape;
    std::vector<float> data;
};

// Self-describing binary snapshot of a model (and optionally its optimizer
// moments): a fixed header, a JSON directory, then raw little-endian float32
// blocks in directory order, each protected by a CRC-32. The directory is
// read and validated in full before any tensor block.
//
// task names what the tensors belong to: "mlm" and "electra" checkpoints
// carry a pretrained encoder (plus their training heads), "pos"/"ner"
// checkpoints carry a complete tagger.
struct Checkpoint {
    static constexpr uint32_t kVersion = 1;

    std::string task;
    uint64_t seed = 0;
    int64_t epoch = 0;
    EncoderConfig encoder;
    bool has_head = false;
    HeadConfig head{};
    TagScheme tag_scheme = TagScheme::kPos;
    std::vector<std::string> tag_labels;
    std::vector<std::string> vocab;
    int64_t adam_step = -1;  // < 0 when no optimizer state is stored
    std::map<std::string, std::string> extra;
    std::vector<TensorEntry> tensors;

    void save(const std::string& path) const;
    static Checkpoint load(const std::string& path);

    // nullptr when absent.
    const TensorEntry* find(std::string_view name) const;
    // IntegrityError when absent.
    const TensorEntry& require(std::string_view name) const;
    void add(std::string name, Shape shape, std::span<const float> data);
};

// Packs a complete tagger (encoder + scalar mix + head) with its vocab and
// tag inventory. task is tag_scheme_name(model.tags().scheme()).
Checkpoint checkpoint_from_tagger(Tagger<float>& model, uint64_t seed,
                                  int64_t epoch);

// Rebuilds the tagger a "pos"/"ner" checkpoint was saved from, bit-exactly.
Tagger<float> tagger_from_checkpoint(const Checkpoint& ck);

// The encoder weights a checkpoint can donate to a fine-tuning run, keyed by
// the encoder's own parameter names (token table included). Empty for
// checkpoints that carry no recognizable encoder tensors.
std::map<std::string, const TensorEntry*> encoder_tensor_map(
    const Checkpoint& ck);

// Copies every matching encoder tensor from the checkpoint into the model,
// leaving the rest (head, mix, any missing encoder tensor) at their fresh
// initialization, and logs one notice describing what happened. Returns the
// number of tensors copied. Shape mismatches are integrity errors.
int warm_start_encoder(Encoder<float>& encoder, const Checkpoint& ck,
                       std::ostream& log);

}  // namespace vitag
