#include "vitag/eval.hpp"

#include <omp.h>

#include <algorithm>
#include <cstdio>

namespace vitag {

namespace {

// Splits an IOB2 tag into (is_begin, type), throwing on anything that is
// neither "O" nor a B-/I- prefixed non-empty type.
struct IobTag {
    bool outside;
    bool begin;
    std::string type;
};

IobTag parse_iob(const std::string& tag, size_t position) {
    if (tag == "O") {
        return {true, false, ""};
    }
    if (tag.size() > 2 && (tag[0] == 'B' || tag[0] == 'I') && tag[1] == '-') {
        return {false, tag[0] == 'B', tag.substr(2)};
    }
    throw ParseError("extract_entities: malformed IOB2 tag '" + tag +
                     "' at position " + std::to_string(position));
}

void score(LabelScore& s) {
    s.precision = s.ne_sys == 0
                      ? 0.0
                      : static_cast<double>(s.ne_true) /
                            static_cast<double>(s.ne_sys);
    s.recall = s.ne_ref == 0 ? 0.0
                             : static_cast<double>(s.ne_true) /
                                   static_cast<double>(s.ne_ref);
    s.f1 = s.precision + s.recall == 0.0
               ? 0.0
               : 2.0 * s.precision * s.recall / (s.precision + s.recall);
}

std::string format_row(const std::string& label, size_t label_width,
                       const LabelScore& s) {
    char buf[160];
    std::snprintf(buf, sizeof(buf),
                  "%-*s %7lld %7lld %8lld  %9.4f %7.4f %7.4f\n",
                  static_cast<int>(label_width), label.c_str(),
                  static_cast<long long>(s.ne_sys),
                  static_cast<long long>(s.ne_ref),
                  static_cast<long long>(s.ne_true), s.precision, s.recall,
                  s.f1);
    return buf;
}

std::string format_value(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    return buf;
}

}  // namespace

double token_accuracy(const std::vector<std::string>& pred,
                      const std::vector<std::string>& gold) {
    if (pred.empty()) {
        throw ContractError("token_accuracy: empty tag sequences");
    }
    if (pred.size() != gold.size()) {
        throw ContractError("token_accuracy: " + std::to_string(pred.size()) +
                            " predicted tags vs " +
                            std::to_string(gold.size()) + " gold tags");
    }
    int64_t hits = 0;
    for (size_t i = 0; i < pred.size(); ++i) {
        if (pred[i] == gold[i]) hits += 1;
    }
    return static_cast<double>(hits) / static_cast<double>(pred.size());
}

std::vector<Entity> extract_entities(const std::vector<std::string>& tags) {
    std::vector<Entity> out;
    bool open = false;
    for (size_t i = 0; i < tags.size(); ++i) {
        IobTag t = parse_iob(tags[i], i);
        if (t.outside) {
            open = false;
            continue;
        }
        // An I- tag continues the current span only when one is open with
        // the same type; otherwise (stray I-, or any B-) a new span starts.
        if (!t.begin && open && out.back().label == t.type) {
            out.back().end = static_cast<int>(i) + 1;
            continue;
        }
        out.push_back(Entity{t.type, static_cast<int>(i),
                             static_cast<int>(i) + 1});
        open = true;
    }
    return out;
}

EvalReport entity_f1(const std::vector<std::string>& pred,
                     const std::vector<std::string>& gold) {
    EvalReport report;
    report.accuracy = token_accuracy(pred, gold);

    std::vector<Entity> sys = extract_entities(pred);
    std::vector<Entity> ref = extract_entities(gold);
    std::vector<Entity> both;
    std::set_intersection(sys.begin(), sys.end(), ref.begin(), ref.end(),
                          std::back_inserter(both));

    LabelScore total;
    total.ne_sys = static_cast<int64_t>(sys.size());
    total.ne_ref = static_cast<int64_t>(ref.size());
    total.ne_true = static_cast<int64_t>(both.size());
    score(total);
    report.ne_true = total.ne_true;
    report.ne_sys = total.ne_sys;
    report.ne_ref = total.ne_ref;
    report.precision = total.precision;
    report.recall = total.recall;
    report.f1 = total.f1;

    for (const Entity& e : sys) report.per_label[e.label].ne_sys += 1;
    for (const Entity& e : ref) report.per_label[e.label].ne_ref += 1;
    for (const Entity& e : both) report.per_label[e.label].ne_true += 1;
    for (auto& [label, s] : report.per_label) score(s);
    return report;
}

EvalReport evaluate_tags(const ConllDataset& pred, const ConllDataset& gold,
                         TagScheme scheme) {
    if (pred.sentences.empty()) {
        throw ContractError("evaluate_tags: no sentences");
    }
    if (pred.sentences.size() != gold.sentences.size()) {
        throw ContractError("evaluate_tags: " +
                            std::to_string(pred.sentences.size()) +
                            " predicted sentences vs " +
                            std::to_string(gold.sentences.size()) + " gold");
    }

    EvalReport report;
    int64_t hits = 0, words = 0;
    for (size_t i = 0; i < pred.sentences.size(); ++i) {
        const std::vector<std::string>& p = pred.sentences[i].tags;
        const std::vector<std::string>& g = gold.sentences[i].tags;
        if (p.size() != g.size()) {
            throw ContractError("evaluate_tags: sentence " +
                                std::to_string(i + 1) + " has " +
                                std::to_string(p.size()) +
                                " predicted tags vs " +
                                std::to_string(g.size()) + " gold tags");
        }
        for (size_t j = 0; j < p.size(); ++j) hits += p[j] == g[j];
        words += static_cast<int64_t>(p.size());
        if (scheme != TagScheme::kNer) continue;

        // Pool the per-sentence entity counts; rates come at the end.
        EvalReport one = entity_f1(p, g);
        report.ne_true += one.ne_true;
        report.ne_sys += one.ne_sys;
        report.ne_ref += one.ne_ref;
        for (const auto& [label, s] : one.per_label) {
            LabelScore& into = report.per_label[label];
            into.ne_true += s.ne_true;
            into.ne_sys += s.ne_sys;
            into.ne_ref += s.ne_ref;
        }
    }
    report.accuracy = static_cast<double>(hits) / static_cast<double>(words);
    if (scheme == TagScheme::kNer) {
        LabelScore total{report.ne_true, report.ne_sys, report.ne_ref,
                         0.0, 0.0, 0.0};
        score(total);
        report.precision = total.precision;
        report.recall = total.recall;
        report.f1 = total.f1;
        for (auto& [label, s] : report.per_label) score(s);
    }
    return report;
}

std::string EvalReport::table() const {
    std::string out = "token accuracy: " + format_value(accuracy) + "\n";
    // Nothing entity-shaped to tabulate (a POS report, say): stop at the
    // accuracy line.
    if (per_label.empty() && ne_sys == 0 && ne_ref == 0) {
        return out;
    }
    size_t width = 5;  // fits "label" and "ALL"
    for (const auto& [label, s] : per_label) {
        width = std::max(width, label.size());
    }
    char header[160];
    std::snprintf(header, sizeof(header),
                  "%-*s %7s %7s %8s  %9s %7s %7s\n",
                  static_cast<int>(width), "label", "ne_sys", "ne_ref",
                  "ne_true", "precision", "recall", "f1");
    out += "\n";
    out += header;
    LabelScore total{ne_true, ne_sys, ne_ref, precision, recall, f1};
    out += format_row("ALL", width, total);
    for (const auto& [label, s] : per_label) {
        out += format_row(label, width, s);
    }
    return out;
}

std::string EvalReport::key_values() const {
    std::string out;
    out += "accuracy=" + format_value(accuracy) + "\n";
    out += "ne_sys=" + std::to_string(ne_sys) + "\n";
    out += "ne_ref=" + std::to_string(ne_ref) + "\n";
    out += "ne_true=" + std::to_string(ne_true) + "\n";
    out += "precision=" + format_value(precision) + "\n";
    out += "recall=" + format_value(recall) + "\n";
    out += "f1=" + format_value(f1) + "\n";
    for (const auto& [label, s] : per_label) {
        const std::string base = "label." + label + ".";
        out += base + "ne_sys=" + std::to_string(s.ne_sys) + "\n";
        out += base + "ne_ref=" + std::to_string(s.ne_ref) + "\n";
        out += base + "ne_true=" + std::to_string(s.ne_true) + "\n";
        out += base + "precision=" + format_value(s.precision) + "\n";
        out += base + "recall=" + format_value(s.recall) + "\n";
        out += base + "f1=" + format_value(s.f1) + "\n";
    }
    return out;
}

namespace detail {

SingleThreadScope::SingleThreadScope() : saved_(omp_get_max_threads()) {
    omp_set_num_threads(1);
}

SingleThreadScope::~SingleThreadScope() { omp_set_num_threads(saved_); }

}  // namespace detail

}  // namespace vitag
