// End-to-end tests of the command-line front end. Each case launches the
// real binary in a subprocess, captures stdout/stderr/exit status, and
// checks the documented contract: exit code 0/1/2 for success/usage/runtime,
// deterministic output under --seed, and flags beating config-file keys.
//
// A shared workspace (fixture corpus, vocabulary, and a tiny pretrained
// checkpoint) is built once by the first case that needs it.

#include <sys/wait.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "vitag/checkpoint.hpp"
#include "vitag/error.hpp"
#include "vitag/tokenizer.hpp"

using namespace vitag;

namespace {

const std::string& cli_path() {
    static const std::string path = [] {
        if (const char* env = std::getenv("VITAG_CLI")) return std::string(env);
        return std::string(VITAG_CLI_PATH);
    }();
    return path;
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    out << text;
}

struct CliResult {
    int status = -1;
    std::string out, err;
};

// Runs `vitag <args>` and captures both streams. `args` is a shell fragment,
// so paths passed in must not contain shell metacharacters.
CliResult run_cli(const std::string& args) {
    static int counter = 0;
    const std::string tag = std::to_string(counter++);
    const std::string out_path = "cli_stdout_" + tag + ".txt";
    const std::string err_path = "cli_stderr_" + tag + ".txt";
    const std::string cmd = "\"" + cli_path() + "\" " + args + " > " +
                            out_path + " 2> " + err_path;
    const int raw = std::system(cmd.c_str());
    CliResult res;
    res.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
    res.out = slurp(out_path);
    res.err = slurp(err_path);
    std::remove(out_path.c_str());
    std::remove(err_path.c_str());
    return res;
}

// A run that must succeed; the error stream is folded into the failure
// message so a broken fixture is diagnosable from the test log.
CliResult run_ok(const std::string& args) {
    CliResult res = run_cli(args);
    if (res.status != 0) {
        throw std::runtime_error("fixture command failed (" +
                                 std::to_string(res.status) + "): vitag " +
                                 args + "\n" + res.err);
    }
    return res;
}

std::vector<std::string> lines_of(const std::string& text) {
    std::vector<std::string> lines;
    std::istringstream ss(text);
    std::string line;
    while (std::getline(ss, line)) lines.push_back(line);
    return lines;
}

// Fixture corpus shared by every case: raw documents, CoNLL data, plain
// sentences, plus artifacts produced by the pipeline itself (shards,
// vocabulary, and a small pretrained checkpoint).
struct Workspace {
    std::string dir = "cli_ws";
    std::string docs = dir + "/docs";
    std::string shards_dir = dir + "/shards";
    std::string vocab = dir + "/vocab.txt";
    std::string mlm_ck = dir + "/mlm.vtck";
    std::string train_conll = dir + "/train.conll";
    std::string test_conll = dir + "/test.conll";
    std::string sentences = dir + "/sentences.txt";
    std::vector<std::string> shard_paths;
    std::string clean_stdout;

    // Encoder geometry used by every training run in this file.
    std::string enc_flags =
        "--layers 1 --hidden 16 --heads 2 --ffn 32 --max-positions 32 "
        "--dropout 0";

    Workspace() {
        namespace fs = std::filesystem;
        fs::remove_all(dir);
        fs::create_directories(docs);

        write_file(docs + "/a.txt",
                   "Tôi ăn cơm ngon hôm nay. Anh ấy đi học rất sớm mỗi "
                   "ngày.\nChúng tôi chơi bóng đá ở sân trường. Cô giáo dạy "
                   "toán rất hay.\n");
        write_file(docs + "/b.txt",
                   "Hôm qua trời mưa rất to. Em bé ngủ ngon trong nôi "
                   "nhỏ.\nMẹ nấu canh chua cá lóc. Bố đọc báo mỗi buổi sáng "
                   "sớm.\n");

        const std::string block =
            "Tôi\tP\năn\tV\ncơm\tN\n\n"
            "Anh\tP\nđi\tV\nhọc\tV\n\n"
            "Mẹ\tN\nnấu\tV\ncanh\tN\n\n"
            "Bố\tN\nđọc\tV\nbáo\tN\n\n"
            "Em\tP\nngủ\tV\nngon\tA\n\n"
            "Cô\tN\ndạy\tV\ntoán\tN\n\n";
        write_file(train_conll, block + block);  // 12 sentences
        write_file(test_conll, block);
        write_file(sentences, "Tôi ăn cơm\nMẹ nấu canh\n");

        clean_stdout = run_ok("clean --input " + docs + " --output " +
                              shards_dir + " --shard-size 8 --seed 1")
                           .out;
        for (const std::string& line : lines_of(clean_stdout)) {
            if (line.rfind("shard\t", 0) == 0) {
                shard_paths.push_back(line.substr(6));
            }
        }
        if (shard_paths.empty()) {
            throw std::runtime_error("clean produced no shards:\n" +
                                     clean_stdout);
        }

        std::string inputs;
        for (const std::string& p : shard_paths) inputs += " " + p;
        run_ok("build-vocab --input" + inputs + " --output " + vocab +
               " --min-count 1");

        run_ok("pretrain-mlm --shards" + inputs + " --vocab " + vocab +
               " --output " + mlm_ck + " " + enc_flags +
               " --epochs 2 --batch-size 8 --lr 1e-3 --seed 3");
    }

    std::string shard_args() const {
        std::string inputs;
        for (const std::string& p : shard_paths) inputs += " " + p;
        return inputs;
    }
};

const Workspace& ws() {
    static Workspace w;
    return w;
}

}  // namespace

TEST_CASE("cli maps misuse to exit code 1") {
    // No subcommand, unknown subcommand, unknown flag, missing required
    // option, and contradictory flags all fail before any work starts.
    CHECK(run_cli("").status == 1);
    CHECK(run_cli("frobnicate").status == 1);
    CHECK(run_cli("tag --no-such-flag").status == 1);

    CliResult missing = run_cli("tag --model x.vtck");
    CHECK(missing.status == 1);
    CHECK(missing.err.find("--input") != std::string::npos);

    CliResult no_vocab = run_cli("finetune --train " + ws().train_conll +
                                 " --output " + ws().dir + "/x.vtck");
    CHECK(no_vocab.status == 1);
    CHECK(no_vocab.err.find("--vocab or --init") != std::string::npos);

    CliResult bad_col = run_cli("grid --train " + ws().train_conll +
                                " --test " + ws().test_conll +
                                " --column nameonly");
    CHECK(bad_col.status == 1);
    CHECK(bad_col.err.find("name=checkpoint") != std::string::npos);
}

TEST_CASE("cli maps runtime failures to exit code 2") {
    CliResult no_model = run_cli("tag --model missing.vtck --input " +
                                 ws().sentences);
    CHECK(no_model.status == 2);
    CHECK(no_model.err.rfind("error: ", 0) == 0);

    // Sentence counts disagree between the two files: a data error found
    // mid-run, not a flag problem.
    const std::string pred = ws().dir + "/short_pred.conll";
    write_file(pred, "Tôi\tP\n\n");
    CliResult mismatch = run_cli("eval --pred " + pred + " --gold " +
                                 ws().test_conll);
    CHECK(mismatch.status == 2);
    CHECK(mismatch.err.find("sentence") != std::string::npos);
}

TEST_CASE("cli --help succeeds and lists the subcommands") {
    CliResult top = run_cli("--help");
    CHECK(top.status == 0);
    for (const char* name : {"clean", "build-vocab", "pretrain-mlm",
                             "pretrain-electra", "finetune", "tag", "eval",
                             "bench", "grid"}) {
        CAPTURE(name);
        CHECK(top.out.find(name) != std::string::npos);
    }
    CliResult sub = run_cli("finetune --help");
    CHECK(sub.status == 0);
    CHECK(sub.out.find("--head-lr") != std::string::npos);
}

TEST_CASE("clean reports statistics and writes the shards it lists") {
    const std::string& out = ws().clean_stdout;
    CHECK(out.find("docs_in\t2") != std::string::npos);
    CHECK(out.find("sentences_out\t") != std::string::npos);
    for (const std::string& p : ws().shard_paths) {
        CAPTURE(p);
        CHECK(std::filesystem::exists(p));
    }

    // Same seed, fresh output directory: identical report and shard bytes.
    CliResult again = run_ok("clean --input " + ws().docs + " --output " +
                             ws().dir + "/shards2 --shard-size 8 --seed 1");
    std::string expect = ws().clean_stdout;
    size_t pos;
    while ((pos = expect.find("/shards/")) != std::string::npos) {
        expect.replace(pos, 8, "/shards2/");
    }
    CHECK(again.out == expect);
    CHECK(slurp(ws().shard_paths[0]) ==
          slurp(ws().dir + "/shards2/shard-00000.txt"));
}

TEST_CASE("build-vocab writes a loadable vocabulary and reports its size") {
    CliResult res = run_ok("build-vocab --input" + ws().shard_args() +
                           " --output " + ws().dir +
                           "/vocab2.txt --min-count 1");
    Vocab vocab = Vocab::load(ws().dir + "/vocab2.txt");
    CHECK(res.out == "vocab_size\t" + std::to_string(vocab.size()) + "\n");
    CHECK(vocab.size() > 5);
    CHECK(slurp(ws().dir + "/vocab2.txt") == slurp(ws().vocab));
}

TEST_CASE("pretrain-mlm logs one loss per epoch and repeats byte-for-byte") {
    const std::string base = "pretrain-mlm --shards" + ws().shard_args() +
                             " --vocab " + ws().vocab + " " + ws().enc_flags +
                             " --epochs 2 --batch-size 8 --lr 1e-3";
    CliResult a = run_ok(base + " --seed 3 --output " + ws().dir +
                         "/rep_a.vtck");
    CliResult b = run_ok(base + " --seed 3 --output " + ws().dir +
                         "/rep_b.vtck");

    std::vector<std::string> log = lines_of(a.out);
    REQUIRE(log.size() == 2);
    CHECK(log[0].rfind("1\t", 0) == 0);
    CHECK(log[1].rfind("2\t", 0) == 0);

    // Same seed: same stdout and the same checkpoint file, byte for byte.
    CHECK(a.out == b.out);
    CHECK(slurp(ws().dir + "/rep_a.vtck") == slurp(ws().dir + "/rep_b.vtck"));
    CHECK(slurp(ws().dir + "/rep_a.vtck") == slurp(ws().mlm_ck));

    CliResult other = run_ok(base + " --seed 4 --output " + ws().dir +
                             "/rep_c.vtck");
    CHECK(other.out != a.out);
}

TEST_CASE("pretrain-mlm --resume matches an uninterrupted run") {
    const std::string base = "pretrain-mlm --shards" + ws().shard_args() +
                             " --vocab " + ws().vocab + " " + ws().enc_flags +
                             " --batch-size 8 --lr 1e-3 --seed 3";
    run_ok(base + " --epochs 4 --output " + ws().dir + "/straight.vtck");
    run_ok(base + " --epochs 4 --resume " + ws().mlm_ck + " --output " +
           ws().dir + "/resumed.vtck");
    CHECK(slurp(ws().dir + "/straight.vtck") ==
          slurp(ws().dir + "/resumed.vtck"));
}

TEST_CASE("pretrain-mlm survives divergence with a warning and exit 0") {
    CliResult res = run_ok("pretrain-mlm --shards" + ws().shard_args() +
                           " --vocab " + ws().vocab + " " + ws().enc_flags +
                           " --epochs 3 --batch-size 8 --lr 1e12 --seed 3" +
                           " --output " + ws().dir + "/diverged.vtck");
    CHECK(res.err.find("warning: training diverged") != std::string::npos);
    CHECK(std::filesystem::exists(ws().dir + "/diverged.vtck"));
}

TEST_CASE("pretrain-electra logs three losses per epoch and warm starts") {
    CliResult res = run_ok("pretrain-electra --shards" + ws().shard_args() +
                           " --vocab " + ws().vocab + " " + ws().enc_flags +
                           " --epochs 1 --batch-size 8 --lr 1e-3 --seed 5" +
                           " --init " + ws().mlm_ck + " --output " +
                           ws().dir + "/electra.vtck");
    CHECK(res.out.find("warm start") != std::string::npos);
    std::vector<std::string> log = lines_of(res.out);
    REQUIRE(!log.empty());
    // Last line is "epoch<TAB>gen<TAB>disc<TAB>combined".
    std::istringstream last(log.back());
    std::string field;
    int fields = 0;
    while (std::getline(last, field, '\t')) ++fields;
    CHECK(fields == 4);

    Checkpoint ck = Checkpoint::load(ws().dir + "/electra.vtck");
    CHECK(ck.task == "electra");
}

TEST_CASE("config file fills in flags and the command line wins") {
    const std::string cfg = ws().dir + "/mlm.cfg";
    write_file(cfg, "# defaults for the tiny fixture corpus\n"
                    "shards=" + ws().shard_args().substr(1) + "\n"
                    "vocab=" + ws().vocab + "\n"
                    "output=" + ws().dir + "/from_cfg.vtck\n"
                    "layers=1\nhidden=16\nheads=2\nffn=32\n"
                    "max-positions=32\ndropout=0\n"
                    "epochs=2\nbatch-size=8\nlr=1e-3\nseed=3\n");
    CliResult from_cfg = run_ok("pretrain-mlm --config " + cfg);
    CHECK(slurp(ws().dir + "/from_cfg.vtck") == slurp(ws().mlm_ck));

    // An explicit flag overrides the file's value for the same key.
    CliResult override_run = run_ok("pretrain-mlm --config " + cfg +
                                    " --epochs 1 --output " + ws().dir +
                                    "/from_cfg1.vtck");
    CHECK(lines_of(override_run.out).size() == 1);
    CHECK(lines_of(from_cfg.out).size() == 2);
}

TEST_CASE("config file mistakes are usage errors") {
    auto check_usage = [&](const std::string& text, const std::string& msg) {
        const std::string cfg = ws().dir + "/bad.cfg";
        write_file(cfg, text);
        CliResult res = run_cli("pretrain-mlm --config " + cfg);
        CAPTURE(text);
        CHECK(res.status == 1);
        CHECK(res.err.find(msg) != std::string::npos);
    };
    check_usage("bogus=1\n", "unknown key 'bogus'");
    check_usage("epochs=2\nepochs=3\n", "duplicate key 'epochs'");
    check_usage("no equals sign\n", "expected key=value");
    check_usage("config=other.cfg\n", "cannot chain");

    CliResult missing = run_cli("pretrain-mlm --config nowhere.cfg");
    CHECK(missing.status == 2);
    CHECK(missing.err.find("cannot open config file") != std::string::npos);
}

TEST_CASE("finetune then tag emits word/TAG lines deterministically") {
    const std::string base = "finetune --train " + ws().train_conll +
                             " --init " + ws().mlm_ck +
                             " --head bigru --rnn-hidden 4" +
                             " --epochs 2 --batch-size 8 --seed 7";
    CliResult a = run_ok(base + " --output " + ws().dir + "/pos_a.vtck");
    CliResult b = run_ok(base + " --output " + ws().dir + "/pos_b.vtck");
    CHECK(a.out == b.out);
    CHECK(slurp(ws().dir + "/pos_a.vtck") == slurp(ws().dir + "/pos_b.vtck"));
    CHECK(a.out.find("best_epoch\t") != std::string::npos);
    CHECK(a.out.find("best_dev_accuracy\t") != std::string::npos);

    CliResult tagged = run_ok("tag --model " + ws().dir + "/pos_a.vtck" +
                              " --input " + ws().sentences);
    std::vector<std::string> out_lines = lines_of(tagged.out);
    std::vector<std::string> in_lines = lines_of(slurp(ws().sentences));
    REQUIRE(out_lines.size() == in_lines.size());
    for (size_t i = 0; i < out_lines.size(); ++i) {
        std::istringstream want(in_lines[i]), got(out_lines[i]);
        std::string w, g;
        while (want >> w) {
            REQUIRE(static_cast<bool>(got >> g));
            // Each token is the input word plus "/<tag>".
            CHECK(g.rfind(w + "/", 0) == 0);
            CHECK(g.size() > w.size() + 1);
        }
        CHECK_FALSE(static_cast<bool>(got >> g));
    }
    CliResult tagged_again = run_ok("tag --model " + ws().dir +
                                    "/pos_a.vtck --input " + ws().sentences);
    CHECK(tagged_again.out == tagged.out);
}

TEST_CASE("eval prints the accuracy table or key=value lines") {
    const std::string gold = ws().dir + "/gold.conll";
    const std::string pred = ws().dir + "/pred.conll";
    write_file(gold, "Tôi\tP\năn\tV\ncơm\tN\n\nMẹ\tN\n\n");
    write_file(pred, "Tôi\tP\năn\tV\ncơm\tV\n\nMẹ\tN\n\n");

    CliResult table = run_ok("eval --pred " + pred + " --gold " + gold);
    CHECK(table.out == "token accuracy: 0.750000\n");

    CliResult keys = run_ok("eval --pred " + pred + " --gold " + gold +
                            " --keys");
    CHECK(keys.out.find("accuracy=0.750000\n") != std::string::npos);

    // Under the NER scheme a perfect prediction scores F1 = 1.
    const std::string ner = ws().dir + "/ner.conll";
    write_file(ner, "Đông\tB-PER\nHà\tI-PER\nđi\tO\n\n");
    CliResult ner_keys = run_ok("eval --pred " + ner + " --gold " + ner +
                                " --task ner --keys");
    CHECK(ner_keys.out.find("f1=1.000000\n") != std::string::npos);
    CHECK(ner_keys.out.find("label.PER.ne_true=1\n") != std::string::npos);
}

TEST_CASE("bench prints the measurement schema") {
    CliResult res = run_ok("bench --model " + ws().dir + "/pos_a.vtck" +
                           " --input " + ws().sentences +
                           " --warmup 1 --repeats 2");
    std::vector<std::string> log = lines_of(res.out);
    REQUIRE(log.size() == 3);
    CHECK(log[0] == "sentences\t2");
    CHECK(log[1].rfind("avg_words_per_sentence\t3.000000", 0) == 0);
    // The timing field is the one line that may differ between runs.
    CHECK(log[2].rfind("ms_per_sentence\t", 0) == 0);
    CHECK(std::stod(log[2].substr(16)) > 0.0);
}

TEST_CASE("grid prints only the table on stdout and reruns identically") {
    const std::string base =
        "grid --train " + ws().train_conll + " --test " + ws().test_conll +
        " --column pretrained=" + ws().mlm_ck + " --fresh scratch --vocab " +
        ws().vocab + " " + ws().enc_flags +
        " --rnn-hidden 4 --attn-dim 4 --attn-heads 2" +
        " --epochs 2 --batch-size 8 --seed 9";
    CliResult a = run_ok(base);
    CHECK(!a.err.empty());  // progress lines go to stderr

    std::vector<std::string> rows = lines_of(a.out);
    REQUIRE(rows.size() == 6);
    CHECK(rows[0].find("pretrained") != std::string::npos);
    CHECK(rows[0].find("scratch") != std::string::npos);
    const char* labels[] = {"+Fine-Tune", "+BiLSTM", "+BiGRU", "+BiLSTM_Attn",
                            "+BiGRU_Attn"};
    for (size_t i = 0; i < 5; ++i) {
        CAPTURE(i);
        CHECK(rows[i + 1].rfind(labels[i], 0) == 0);
    }

    CliResult b = run_ok(base);
    CHECK(b.out == a.out);
}
