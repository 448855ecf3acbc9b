#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "vitag/corpus.hpp"
#include "vitag/error.hpp"
#include "vitag/tokenizer.hpp"
#include "vitag/unicode.hpp"

using namespace vitag;
namespace fs = std::filesystem;

TEST_CASE("sentence splitting") {
    auto s = split_sentences("Anh ấy đến Hà Nội. Trời hôm nay đẹp quá!");
    REQUIRE(s.size() == 2);
    CHECK(s[0] == "Anh ấy đến Hà Nội.");
    CHECK(s[1] == "Trời hôm nay đẹp quá!");

    // decimal points and ellipses do not split mid-token
    auto t = split_sentences("Giá 3.5 triệu đồng... Rẻ quá không?");
    REQUIRE(t.size() == 2);
    CHECK(t[0] == "Giá 3.5 triệu đồng...");

    // newline is a hard boundary even without terminal punctuation
    auto u = split_sentences("Tiêu đề bản tin\nNội dung theo sau.");
    REQUIRE(u.size() == 2);
    CHECK(u[0] == "Tiêu đề bản tin");

    CHECK(split_sentences("").empty());
    // punctuation-only candidates survive splitting; the cleaner's 4-word
    // rule is what discards them
    CHECK(split_sentences(" .  . ") == std::vector<std::string>{".", "."});
}

TEST_CASE("exact duplicate documents are dropped, first survives") {
    const std::string text = "phi công điều khiển máy bay.";
    auto [sents, stats] = clean_corpus(
        {{"a.txt", text}, {"b.txt", text}}, Charset::default_vietnamese());
    CHECK(stats.docs_in == 2);
    CHECK(stats.docs_deduped == 1);
    REQUIRE(sents.size() == 1);
    CHECK(sents[0] == "phi công điều khiển máy bay.");
}

TEST_CASE("dedup key collapses whitespace and case") {
    auto [sents, stats] = clean_corpus(
        {{"a", "Phi công điều khiển máy bay."},
         {"b", "phi  công điều\tkhiển máy BAY."}},
        Charset::default_vietnamese());
    CHECK(stats.docs_deduped == 1);
    CHECK(sents.size() == 1);
}

TEST_CASE("short and bad-charset sentences are dropped") {
    const Charset cs = Charset::default_vietnamese();
    auto [sents, stats] = clean_corpus(
        {{"d", "máy bay hạ. phi công điều khiển máy bay. "
               "четыре слова на русском."}},
        cs);
    CHECK(stats.sentences_in == 3);
    CHECK(stats.sentences_dropped_short == 1);
    CHECK(stats.sentences_dropped_charset == 1);
    CHECK(stats.sentences_out == 1);
    REQUIRE(sents.size() == 1);
    CHECK(sents[0] == "phi công điều khiển máy bay.");
}

TEST_CASE("hand-counted ten-document fixture") {
    // 10 docs: #4 duplicates #1, #9 duplicates #6 (after case folding);
    // across the survivors: 3 sentences under 4 words, 1 with a letter
    // outside the whitelist, 8 clean.
    std::vector<std::pair<std::string, std::string>> docs = {
        {"doc0", "hôm nay trời rất đẹp. máy bay hạ."},          // 1 ok, 1 short
        {"doc1", "phi công điều khiển máy bay an toàn."},       // 1 ok
        {"doc2", "giá vàng tăng mạnh hôm nay?\nngắn thôi."},    // 1 ok, 1 short
        {"doc3", "hôm nay trời rất đẹp. máy bay hạ."},          // dup of doc0
        {"doc4", "bản tin có chữ кирилл bên trong nhé. "
                 "tin thứ hai thì hoàn toàn sạch."},            // 1 charset, 1 ok
        {"doc5", "đội tuyển thắng trận chung kết tối qua!"},    // 1 ok
        {"doc6", "ngắn."},                                       // 1 short
        {"doc7", "chính phủ công bố kế hoạch mới. "
                 "người dân theo dõi thông tin này."},          // 2 ok
        {"doc8", "ĐỘI TUYỂN THẮNG TRẬN CHUNG KẾT TỐI QUA!"},    // dup of doc5
        {"doc9", "thị trường chứng khoán giảm nhẹ sáng nay."},  // 1 ok
    };
    auto [sents, stats] =
        clean_corpus(docs, Charset::default_vietnamese());
    CleanStats want;
    want.docs_in = 10;
    want.docs_deduped = 2;
    want.sentences_in = 12;
    want.sentences_dropped_short = 3;
    want.sentences_dropped_charset = 1;
    want.sentences_out = 8;
    CHECK(stats == want);
    CHECK(sents.size() == 8);

    // survivor invariants: ≥4 words, whitelist-only letters
    const Charset cs = Charset::default_vietnamese();
    for (const auto& s : sents) {
        CHECK(split_words(s).size() >= 4);
        for (uint32_t cp : uni::utf8_decode(s)) {
            CHECK((cs.allows(cp) || uni::is_space(cp)));
        }
    }

    // the invariant the stats must always satisfy
    CHECK(stats.sentences_out == stats.sentences_in -
                                     stats.sentences_dropped_short -
                                     stats.sentences_dropped_charset);
    CHECK(stats.report().find("docs_deduped\t2") != std::string::npos);
}

TEST_CASE("charset loads from a file") {
    const std::string path = "charset_test.txt";
    {
        std::ofstream out(path, std::ios::binary);
        out << "abcđ\n";
    }
    auto cs = Charset::load(path);
    CHECK(cs.allows('a'));
    CHECK(cs.allows(0x0111));
    CHECK_FALSE(cs.allows('z'));
    CHECK(cs.allows(' '));
    fs::remove(path);
    CHECK_THROWS_AS(Charset::load("missing_charset.txt"), IoError);
}

TEST_CASE("read_documents walks the directory in sorted order") {
    const fs::path dir = "docs_test_dir";
    fs::create_directories(dir);
    std::ofstream(dir / "b.txt") << "second";
    std::ofstream(dir / "a.txt") << "first";
    std::ofstream(dir / "ignored.dat") << "not text";
    auto docs = read_documents(dir.string());
    REQUIRE(docs.size() == 2);
    CHECK(docs[0].second == "first");
    CHECK(docs[1].second == "second");
    fs::remove_all(dir);
    CHECK_THROWS_AS(read_documents("no_such_dir"), IoError);
}

TEST_CASE("sharding partitions and is deterministic") {
    const fs::path dir = "shards_test_dir";
    std::vector<std::string> sentences;
    for (int i = 0; i < 95; ++i) {
        sentences.push_back("sentence number " + std::to_string(i) + " end");
    }

    auto paths = shard_sentences(sentences, dir.string(), "shard", 10, 42);
    REQUIRE(paths.size() == 10);

    std::multiset<std::string> read_back;
    std::vector<size_t> sizes;
    for (const auto& p : paths) {
        std::ifstream in(p);
        std::string line;
        size_t count = 0;
        while (std::getline(in, line)) {
            read_back.insert(line);
            ++count;
        }
        sizes.push_back(count);
    }
    CHECK(sizes == std::vector<size_t>{10, 10, 10, 10, 10, 10, 10, 10, 10, 5});
    CHECK(read_back ==
          std::multiset<std::string>(sentences.begin(), sentences.end()));

    // same seed → byte-identical shards
    auto paths2 = shard_sentences(sentences, (dir / "again").string(),
                                  "shard", 10, 42);
    for (size_t i = 0; i < paths.size(); ++i) {
        std::ifstream f1(paths[i], std::ios::binary);
        std::ifstream f2(paths2[i], std::ios::binary);
        std::stringstream b1, b2;
        b1 << f1.rdbuf();
        b2 << f2.rdbuf();
        CHECK(b1.str() == b2.str());
    }

    // single shard case
    auto one = shard_sentences({sentences.begin(), sentences.begin() + 10},
                               (dir / "one").string(), "shard", 10, 7);
    CHECK(one.size() == 1);

    CHECK_THROWS_AS(shard_sentences(sentences, dir.string(), "bad", 0, 1),
                    ContractError);
    fs::remove_all(dir);
}
