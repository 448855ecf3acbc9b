#include "vitag/heads.hpp"

#include <fstream>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

namespace vitag {

std::string head_kind_name(HeadKind kind) {
    switch (kind) {
        case HeadKind::kFineTune: return "fine_tune";
        case HeadKind::kBiLstm: return "bilstm";
        case HeadKind::kBiGru: return "bigru";
        case HeadKind::kBiLstmAttn: return "bilstm_attn";
        case HeadKind::kBiGruAttn: return "bigru_attn";
    }
    throw ContractError("head_kind_name: invalid kind");
}

std::string head_table_label(HeadKind kind) {
    switch (kind) {
        case HeadKind::kFineTune: return "+Fine-Tune";
        case HeadKind::kBiLstm: return "+BiLSTM";
        case HeadKind::kBiGru: return "+BiGRU";
        case HeadKind::kBiLstmAttn: return "+BiLSTM_Attn";
        case HeadKind::kBiGruAttn: return "+BiGRU_Attn";
    }
    throw ContractError("head_table_label: invalid kind");
}

HeadKind head_kind_from_string(const std::string& name) {
    for (HeadKind kind : all_head_kinds()) {
        if (name == head_kind_name(kind)) return kind;
    }
    std::string valid;
    for (HeadKind kind : all_head_kinds()) {
        if (!valid.empty()) valid += ", ";
        valid += head_kind_name(kind);
    }
    throw ConfigError("unknown head kind '" + name + "' (expected one of: " +
                      valid + ")");
}

std::string tag_scheme_name(TagScheme scheme) {
    return scheme == TagScheme::kNer ? "ner" : "pos";
}

TagScheme tag_scheme_from_string(const std::string& name) {
    if (name == "pos") return TagScheme::kPos;
    if (name == "ner") return TagScheme::kNer;
    throw ConfigError("unknown task '" + name + "' (expected pos or ner)");
}

TagSet TagSet::from_labels(std::vector<std::string> labels, TagScheme scheme) {
    if (labels.empty()) {
        throw ConfigError("tag set: no labels");
    }
    std::set<std::string> seen;
    for (const std::string& label : labels) {
        if (label.empty()) {
            throw ConfigError("tag set: empty label");
        }
        for (char c : label) {
            if (c == ' ' || c == '\t' || c == '\n' || c == '\r') {
                throw ConfigError("tag set: label '" + label +
                                  "' contains whitespace");
            }
        }
        if (!seen.insert(label).second) {
            throw ConfigError("tag set: duplicate label '" + label + "'");
        }
    }
    if (scheme == TagScheme::kNer) {
        for (const std::string& label : labels) {
            if (label.rfind("I-", 0) != 0) continue;
            const std::string opener = "B-" + label.substr(2);
            if (seen.count(opener) == 0) {
                throw ConfigError("tag set: '" + label + "' has no '" +
                                  opener + "'");
            }
        }
    }
    TagSet set;
    set.labels_ = std::move(labels);
    set.scheme_ = scheme;
    return set;
}

TagSet TagSet::load(const std::string& path, TagScheme scheme) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open tag set file: " + path);
    }
    std::vector<std::string> labels;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) {
            throw ParseError(path + ":" + std::to_string(labels.size() + 1) +
                             ": empty tag label");
        }
        labels.push_back(line);
    }
    return from_labels(std::move(labels), scheme);
}

void TagSet::save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw IoError("cannot write tag set file: " + path);
    }
    for (const std::string& label : labels_) {
        out << label << '\n';
    }
    if (!out) {
        throw IoError("failed writing tag set file: " + path);
    }
}

const std::string& TagSet::label(int id) const {
    if (id < 0 || id >= size()) {
        throw LookupError("tag id " + std::to_string(id) +
                          " outside tag set of " + std::to_string(size()));
    }
    return labels_[static_cast<size_t>(id)];
}

int TagSet::find(std::string_view label) const {
    for (size_t i = 0; i < labels_.size(); ++i) {
        if (labels_[i] == label) return static_cast<int>(i);
    }
    return -1;
}

int TagSet::require(std::string_view label) const {
    const int id = find(label);
    if (id < 0) {
        throw LookupError("unknown tag '" + std::string(label) + "'");
    }
    return id;
}

}  // namespace vitag
