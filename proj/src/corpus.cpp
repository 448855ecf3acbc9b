#include "vitag/corpus.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "vitag/error.hpp"
#include "vitag/rng.hpp"
#include "vitag/tokenizer.hpp"
#include "vitag/unicode.hpp"

namespace fs = std::filesystem;

namespace vitag {

std::string CleanStats::report() const {
    std::ostringstream os;
    os << "docs_in\t" << docs_in << '\n'
       << "docs_deduped\t" << docs_deduped << '\n'
       << "sentences_in\t" << sentences_in << '\n'
       << "sentences_dropped_short\t" << sentences_dropped_short << '\n'
       << "sentences_dropped_charset\t" << sentences_dropped_charset << '\n'
       << "sentences_out\t" << sentences_out << '\n';
    return os.str();
}

Charset Charset::default_vietnamese() {
    Charset cs;
    for (uint32_t cp = 0x20; cp <= 0x7E; ++cp) cs.add(cp);
    cs.add('\t');
    // Vietnamese letters beyond ASCII: the seven modified bases...
    static const uint32_t kExtendedBases[] = {
        0x0103, 0x0102,  // ă Ă
        0x00E2, 0x00C2,  // â Â
        0x0111, 0x0110,  // đ Đ
        0x00EA, 0x00CA,  // ê Ê
        0x00F4, 0x00D4,  // ô Ô
        0x01A1, 0x01A0,  // ơ Ơ
        0x01B0, 0x01AF,  // ư Ư
    };
    for (uint32_t cp : kExtendedBases) cs.add(cp);
    // ...and every vowel carrying one of the five tone marks, derived by
    // composing base + mark so the list stays in sync with the NFC tables.
    static const uint32_t kVowels[] = {
        'a', 'A', 0x0103, 0x0102, 0x00E2, 0x00C2, 'e',    'E',
        0x00EA, 0x00CA, 'i',    'I',    'o',    'O',    0x00F4, 0x00D4,
        0x01A1, 0x01A0, 'u',    'U',    0x01B0, 0x01AF, 'y',    'Y',
    };
    static const uint32_t kToneMarks[] = {0x0301, 0x0300, 0x0309, 0x0303,
                                          0x0323};
    for (uint32_t v : kVowels) {
        for (uint32_t m : kToneMarks) {
            auto composed = uni::nfc({v, m});
            if (composed.size() != 1) {
                throw ContractError("tone composition failed for vowel " +
                                    std::to_string(v));
            }
            cs.add(composed[0]);
        }
    }
    // typographic punctuation common in news text
    static const uint32_t kPunct[] = {0x2013, 0x2014, 0x2026, 0x201C, 0x201D,
                                      0x2018, 0x2019, 0x00AB, 0x00BB, 0x00B0,
                                      0x2030};
    for (uint32_t cp : kPunct) cs.add(cp);
    return cs;
}

Charset Charset::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open charset file: " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    if (in.bad()) throw IoError("read failure on charset file: " + path);
    Charset cs;
    for (uint32_t cp : uni::utf8_decode(buf.str())) {
        if (!uni::is_space(cp)) cs.add(cp);
    }
    cs.add(' ');
    cs.add('\t');
    return cs;
}

bool Charset::allows(uint32_t cp) const { return allowed_.count(cp) != 0; }

std::vector<std::string> split_sentences(const std::string& text) {
    const auto cps = uni::utf8_decode(text);
    std::vector<std::string> sentences;
    std::vector<uint32_t> cur;
    auto flush = [&] {
        // trim surrounding whitespace; empty candidates are not sentences
        size_t a = 0, b = cur.size();
        while (a < b && uni::is_space(cur[a])) ++a;
        while (b > a && uni::is_space(cur[b - 1])) --b;
        if (b > a) {
            sentences.push_back(
                uni::utf8_encode(std::span(cur.data() + a, b - a)));
        }
        cur.clear();
    };
    const auto is_terminal = [](uint32_t cp) {
        return cp == '.' || cp == '?' || cp == '!' || cp == 0x2026;  // …
    };
    for (size_t i = 0; i < cps.size(); ++i) {
        if (cps[i] == '\n') {
            flush();
            continue;
        }
        cur.push_back(cps[i]);
        if (is_terminal(cps[i])) {
            const bool run_continues = i + 1 < cps.size() &&
                                       is_terminal(cps[i + 1]);
            const bool boundary = i + 1 == cps.size() ||
                                  uni::is_space(cps[i + 1]) ||
                                  cps[i + 1] == '\n';
            if (!run_continues && boundary) flush();
        }
    }
    flush();
    return sentences;
}

std::pair<std::vector<std::string>, CleanStats> clean_corpus(
    const std::vector<std::pair<std::string, std::string>>& docs,
    const Charset& charset) {
    CleanStats stats;
    std::vector<std::string> out;
    std::unordered_set<std::string> seen;

    for (const auto& [id, text] : docs) {
        ++stats.docs_in;
        // dedup key: whitespace-collapsed, case-folded content
        std::string key;
        for (const auto& w : split_words(text)) {
            if (!key.empty()) key += ' ';
            key += uni::lower_string(w);
        }
        if (!seen.insert(std::move(key)).second) {
            ++stats.docs_deduped;
            continue;
        }
        for (const auto& raw : split_sentences(text)) {
            // canonical form up front so the charset test and everything
            // downstream see composed diacritics
            const std::string sentence = uni::nfc_string(raw);
            const auto words = split_words(sentence);
            if (words.empty()) continue;  // not a sentence
            ++stats.sentences_in;
            if (static_cast<int64_t>(words.size()) < 4) {
                ++stats.sentences_dropped_short;
                continue;
            }
            bool ok = true;
            for (uint32_t cp : uni::utf8_decode(sentence)) {
                if (!charset.allows(cp) && !uni::is_space(cp)) {
                    ok = false;
                    break;
                }
            }
            if (!ok) {
                ++stats.sentences_dropped_charset;
                continue;
            }
            std::string canon;
            for (const auto& w : words) {
                if (!canon.empty()) canon += ' ';
                canon += w;
            }
            out.push_back(std::move(canon));
            ++stats.sentences_out;
        }
    }
    return {std::move(out), stats};
}

std::vector<std::pair<std::string, std::string>> read_documents(
    const std::string& dir) {
    std::error_code ec;
    if (!fs::is_directory(dir, ec)) {
        throw IoError("document directory not found: " + dir);
    }
    std::vector<std::string> paths;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (entry.is_regular_file() && entry.path().extension() == ".txt") {
            paths.push_back(entry.path().string());
        }
    }
    std::sort(paths.begin(), paths.end());
    std::vector<std::pair<std::string, std::string>> docs;
    for (const auto& p : paths) {
        std::ifstream in(p, std::ios::binary);
        if (!in) throw IoError("cannot open document: " + p);
        std::stringstream buf;
        buf << in.rdbuf();
        if (in.bad()) throw IoError("read failure on document: " + p);
        docs.emplace_back(p, buf.str());
    }
    return docs;
}

std::vector<std::string> shard_sentences(std::vector<std::string> sentences,
                                         const std::string& out_dir,
                                         const std::string& prefix,
                                         int64_t shard_size, uint64_t seed) {
    if (shard_size < 1) {
        throw ContractError("shard_sentences: shard_size must be >= 1, got " +
                            std::to_string(shard_size));
    }
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) throw IoError("cannot create shard directory: " + out_dir);

    Rng rng(seed);
    rng.shuffle(sentences);

    std::vector<std::string> paths;
    const int64_t n = static_cast<int64_t>(sentences.size());
    for (int64_t start = 0, idx = 0; start < n; start += shard_size, ++idx) {
        char num[24];
        std::snprintf(num, sizeof(num), "%05lld", static_cast<long long>(idx));
        const std::string path =
            (fs::path(out_dir) / (prefix + "-" + num + ".txt")).string();
        std::ofstream out(path, std::ios::binary);
        if (!out) throw IoError("cannot write shard: " + path);
        const int64_t end = std::min(n, start + shard_size);
        for (int64_t i = start; i < end; ++i) out << sentences[i] << '\n';
        if (!out) throw IoError("write failure on shard: " + path);
        paths.push_back(path);
    }
    return paths;
}

}  // namespace vitag
