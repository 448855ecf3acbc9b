#include "vitag/checkpoint.hpp"

#include <zlib.h>

#include <cstring>
#include <fstream>
#include <ostream>

#include "json.hpp"

namespace vitag {

namespace {

using nlohmann::json;

constexpr char kMagic[4] = {'V', 'T', 'C', 'K'};

uint32_t crc_of(const void* data, size_t bytes) {
    return static_cast<uint32_t>(
        ::crc32(0L, static_cast<const Bytef*>(data),
                static_cast<uInt>(bytes)));
}

void put_u32(std::string& out, uint32_t v) {
    for (int i = 0; i < 4; ++i) {
        out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
    }
}

void put_u64(std::string& out, uint64_t v) {
    for (int i = 0; i < 8; ++i) {
        out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
    }
}

uint32_t get_u32(const unsigned char* p) {
    return static_cast<uint32_t>(p[0]) | (static_cast<uint32_t>(p[1]) << 8) |
           (static_cast<uint32_t>(p[2]) << 16) |
           (static_cast<uint32_t>(p[3]) << 24);
}

uint64_t get_u64(const unsigned char* p) {
    uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | p[i];
    return v;
}

json encoder_to_json(const EncoderConfig& c) {
    return json{{"num_layers", c.num_layers},
                {"hidden_size", c.hidden_size},
                {"num_heads", c.num_heads},
                {"ffn_size", c.ffn_size},
                {"embedding_size", c.embedding_size},
                {"max_positions", c.max_positions},
                {"vocab_size", c.vocab_size},
                {"dropout", c.dropout}};
}

EncoderConfig encoder_from_json(const json& j) {
    EncoderConfig c;
    c.num_layers = j.at("num_layers").get<int>();
    c.hidden_size = j.at("hidden_size").get<int>();
    c.num_heads = j.at("num_heads").get<int>();
    c.ffn_size = j.at("ffn_size").get<int>();
    c.embedding_size = j.at("embedding_size").get<int>();
    c.max_positions = j.at("max_positions").get<int>();
    c.vocab_size = j.at("vocab_size").get<int>();
    c.dropout = j.at("dropout").get<double>();
    return c;
}

json head_to_json(const HeadConfig& c) {
    return json{{"kind", head_kind_name(c.kind)},
                {"rnn_hidden", c.rnn_hidden},
                {"rnn_layers", c.rnn_layers},
                {"attn_dim", c.attn_dim},
                {"attn_heads", c.attn_heads},
                {"dropout", c.dropout},
                {"num_tags", c.num_tags}};
}

HeadConfig head_from_json(const json& j) {
    HeadConfig c;
    c.kind = head_kind_from_string(j.at("kind").get<std::string>());
    c.rnn_hidden = j.at("rnn_hidden").get<int>();
    c.rnn_layers = j.at("rnn_layers").get<int>();
    c.attn_dim = j.at("attn_dim").get<int>();
    c.attn_heads = j.at("attn_heads").get<int>();
    c.dropout = j.at("dropout").get<double>();
    c.num_tags = j.at("num_tags").get<int>();
    return c;
}

bool starts_with(std::string_view s, std::string_view prefix) {
    return s.substr(0, prefix.size()) == prefix;
}

}  // namespace

void Checkpoint::add(std::string name, Shape shape,
                     std::span<const float> data) {
    int64_t numel = 1;
    for (int64_t d : shape) numel *= d;
    if (numel != static_cast<int64_t>(data.size())) {
        throw ContractError("checkpoint: tensor '" + name + "' shape " +
                            shape_string(shape) + " does not hold " +
                            std::to_string(data.size()) + " values");
    }
    TensorEntry e;
    e.name = std::move(name);
    e.shape = std::move(shape);
    e.data.assign(data.begin(), data.end());
    tensors.push_back(std::move(e));
}

const TensorEntry* Checkpoint::find(std::string_view name) const {
    for (const TensorEntry& e : tensors) {
        if (e.name == name) return &e;
    }
    return nullptr;
}

const TensorEntry& Checkpoint::require(std::string_view name) const {
    const TensorEntry* e = find(name);
    if (e == nullptr) {
        throw IntegrityError("checkpoint: missing tensor '" +
                             std::string(name) + "'");
    }
    return *e;
}

void Checkpoint::save(const std::string& path) const {
    json meta;
    meta["task"] = task;
    meta["seed"] = seed;
    meta["epoch"] = epoch;
    meta["encoder"] = encoder_to_json(encoder);
    if (has_head) {
        meta["head"] = head_to_json(head);
    }
    if (!tag_labels.empty()) {
        meta["tags"] = json{{"scheme", tag_scheme_name(tag_scheme)},
                            {"labels", tag_labels}};
    }
    meta["vocab"] = vocab;
    if (adam_step >= 0) {
        meta["adam_step"] = adam_step;
    }
    if (!extra.empty()) {
        meta["extra"] = extra;
    }
    json dir = json::array();
    for (const TensorEntry& e : tensors) {
        dir.push_back(json{
            {"name", e.name},
            {"shape", e.shape},
            {"crc32", crc_of(e.data.data(), e.data.size() * sizeof(float))}});
    }
    meta["tensors"] = std::move(dir);

    const std::string meta_text = meta.dump();
    std::string header;
    header.append(kMagic, 4);
    put_u32(header, kVersion);
    put_u64(header, meta_text.size());
    put_u32(header, crc_of(meta_text.data(), meta_text.size()));

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw IoError("cannot write checkpoint '" + path + "'");
    }
    out.write(header.data(), static_cast<std::streamsize>(header.size()));
    out.write(meta_text.data(),
              static_cast<std::streamsize>(meta_text.size()));
    for (const TensorEntry& e : tensors) {
        out.write(reinterpret_cast<const char*>(e.data.data()),
                  static_cast<std::streamsize>(e.data.size() * sizeof(float)));
    }
    out.flush();
    if (!out) {
        throw IoError("failed writing checkpoint '" + path + "'");
    }
}

Checkpoint Checkpoint::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot read checkpoint '" + path + "'");
    }
    unsigned char header[20];
    in.read(reinterpret_cast<char*>(header), sizeof(header));
    if (in.gcount() != sizeof(header)) {
        throw IntegrityError("checkpoint '" + path +
                             "': truncated before the header ends");
    }
    if (std::memcmp(header, kMagic, 4) != 0) {
        throw IntegrityError("checkpoint '" + path +
                             "': not a checkpoint file (bad magic)");
    }
    const uint32_t version = get_u32(header + 4);
    if (version != kVersion) {
        throw VersionError("checkpoint '" + path + "': format version " +
                           std::to_string(version) + ", this build reads " +
                           std::to_string(kVersion));
    }
    const uint64_t meta_len = get_u64(header + 8);
    const uint32_t meta_crc = get_u32(header + 16);

    std::string meta_text(meta_len, '\0');
    in.read(meta_text.data(), static_cast<std::streamsize>(meta_len));
    if (static_cast<uint64_t>(in.gcount()) != meta_len) {
        throw IntegrityError("checkpoint '" + path +
                             "': truncated inside the metadata");
    }
    if (crc_of(meta_text.data(), meta_text.size()) != meta_crc) {
        throw IntegrityError("checkpoint '" + path +
                             "': metadata failed its checksum");
    }
    json meta;
    try {
        meta = json::parse(meta_text);
        Checkpoint ck;
        ck.task = meta.at("task").get<std::string>();
        ck.seed = meta.at("seed").get<uint64_t>();
        ck.epoch = meta.at("epoch").get<int64_t>();
        ck.encoder = encoder_from_json(meta.at("encoder"));
        if (meta.contains("head")) {
            ck.has_head = true;
            ck.head = head_from_json(meta.at("head"));
        }
        if (meta.contains("tags")) {
            ck.tag_scheme = tag_scheme_from_string(
                meta.at("tags").at("scheme").get<std::string>());
            ck.tag_labels =
                meta.at("tags").at("labels").get<std::vector<std::string>>();
        }
        ck.vocab = meta.at("vocab").get<std::vector<std::string>>();
        ck.adam_step = meta.value("adam_step", int64_t{-1});
        if (meta.contains("extra")) {
            ck.extra =
                meta.at("extra").get<std::map<std::string, std::string>>();
        }

        for (const json& entry : meta.at("tensors")) {
            TensorEntry e;
            e.name = entry.at("name").get<std::string>();
            e.shape = entry.at("shape").get<Shape>();
            const uint32_t want_crc = entry.at("crc32").get<uint32_t>();
            int64_t numel = 1;
            for (int64_t d : e.shape) numel *= d;
            if (numel < 0) {
                throw IntegrityError("checkpoint '" + path + "': tensor '" +
                                     e.name + "' has a negative extent");
            }
            e.data.resize(static_cast<size_t>(numel));
            in.read(reinterpret_cast<char*>(e.data.data()),
                    static_cast<std::streamsize>(e.data.size() *
                                                 sizeof(float)));
            if (static_cast<size_t>(in.gcount()) !=
                e.data.size() * sizeof(float)) {
                throw IntegrityError("checkpoint '" + path +
                                     "': truncated inside block '" + e.name +
                                     "'");
            }
            if (crc_of(e.data.data(), e.data.size() * sizeof(float)) !=
                want_crc) {
                throw IntegrityError("checkpoint '" + path + "': block '" +
                                     e.name + "' failed its checksum");
            }
            ck.tensors.push_back(std::move(e));
        }
        if (in.peek() != std::ifstream::traits_type::eof()) {
            throw IntegrityError("checkpoint '" + path +
                                 "': trailing bytes after the last block");
        }
        return ck;
    } catch (const json::exception& e) {
        throw IntegrityError("checkpoint '" + path +
                             "': malformed metadata (" + e.what() + ")");
    }
}

Checkpoint checkpoint_from_tagger(Tagger<float>& model, uint64_t seed,
                                  int64_t epoch) {
    Checkpoint ck;
    ck.task = tag_scheme_name(model.tags().scheme());
    ck.seed = seed;
    ck.epoch = epoch;
    ck.encoder = model.encoder().config();
    ck.has_head = true;
    ck.head = model.head_config();
    ck.tag_scheme = model.tags().scheme();
    ck.tag_labels = model.tags().labels();
    ck.vocab = model.vocab().tokens();
    for (auto& [name, p] : model.named_parameters()) {
        ck.add(name, p.shape(), p.data());
    }
    return ck;
}

Tagger<float> tagger_from_checkpoint(const Checkpoint& ck) {
    if (ck.task != "pos" && ck.task != "ner") {
        throw ContractError("checkpoint task '" + ck.task +
                            "' does not contain a tagger");
    }
    if (!ck.has_head || ck.tag_labels.empty()) {
        throw IntegrityError(
            "checkpoint: tagger requires a head config and tag labels");
    }
    Vocab vocab = Vocab::from_tokens(ck.vocab);
    TagSet tags = TagSet::from_labels(ck.tag_labels, ck.tag_scheme);
    Rng rng(0);
    Tagger<float> model(ck.encoder, ck.head, std::move(vocab),
                        std::move(tags), rng);
    for (auto& [name, p] : model.named_parameters()) {
        const TensorEntry& e = ck.require(name);
        if (e.shape != p.shape()) {
            throw IntegrityError("checkpoint: tensor '" + name + "' is " +
                                 shape_string(e.shape) +
                                 ", the model expects " +
                                 shape_string(p.shape()));
        }
        std::copy(e.data.begin(), e.data.end(), p.data().begin());
    }
    return model;
}

std::map<std::string, const TensorEntry*> encoder_tensor_map(
    const Checkpoint& ck) {
    std::map<std::string, const TensorEntry*> out;
    for (const TensorEntry& e : ck.tensors) {
        if (starts_with(e.name, "adam.")) continue;
        if (ck.task == "mlm") {
            if (!starts_with(e.name, "mlm.")) out[e.name] = &e;
        } else if (ck.task == "electra") {
            if (e.name == "embed.token_table") {
                out[e.name] = &e;
            } else if (starts_with(e.name, "discriminator.") &&
                       !starts_with(e.name, "discriminator.head.")) {
                out[e.name.substr(14)] = &e;
            }
        } else {
            if (starts_with(e.name, "encoder.")) out[e.name.substr(8)] = &e;
        }
    }
    return out;
}

int warm_start_encoder(Encoder<float>& encoder, const Checkpoint& ck,
                       std::ostream& log) {
    const auto donors = encoder_tensor_map(ck);
    int copied = 0;
    std::vector<std::string> missing;
    for (auto& [name, p] : encoder.named_parameters()) {
        auto it = donors.find(name);
        if (it == donors.end()) {
            missing.push_back(name);
            continue;
        }
        const TensorEntry& e = *it->second;
        if (e.shape != p.shape()) {
            throw IntegrityError("warm start: tensor '" + name + "' is " +
                                 shape_string(e.shape) +
                                 ", the encoder expects " +
                                 shape_string(p.shape()));
        }
        std::copy(e.data.begin(), e.data.end(), p.data().begin());
        copied += 1;
    }
    log << "notice: warm start loaded " << copied << " encoder tensors from "
        << ck.task << " checkpoint";
    if (!missing.empty()) {
        log << " (" << missing.size()
            << " kept their fresh initialization, first: " << missing.front()
            << ")";
    }
    log << "; head parameters freshly initialized\n";
    return copied;
}

}  // namespace vitag
