// Command-line front end: corpus cleaning, vocabulary building, MLM and
// ELECTRA pretraining, fine-tuning, tagging, scoring, benchmarking, and the
// head-comparison grid. Every subcommand reads an optional key=value config
// file (--config) with command-line flags taking precedence, and seeds all
// randomness from --seed. Exit codes: 0 success, 1 usage error, 2 runtime
// error.

#include <algorithm>
#include <cstdio>
#include <deque>
#include <fstream>
#include <iostream>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "vitag/checkpoint.hpp"
#include "vitag/conll.hpp"
#include "vitag/corpus.hpp"
#include "vitag/eval.hpp"
#include "vitag/train.hpp"

namespace {

using namespace vitag;

std::string fmt6(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    return buf;
}

// Non-empty lines of a text file, one whitespace-tokenized sentence each.
std::vector<std::vector<std::string>> read_sentences(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path + "'");
    std::vector<std::vector<std::string>> out;
    std::string line;
    while (std::getline(in, line)) {
        std::vector<std::string> words = split_words(line);
        if (!words.empty()) out.push_back(std::move(words));
    }
    return out;
}

// Shared option bundles. Every subcommand owns one Options struct that its
// callback reads after parsing.

struct EncoderFlags {
    EncoderConfig cfg;

    std::vector<CLI::Option*> add_to(CLI::App* cmd) {
        std::vector<CLI::Option*> opts;
        opts.push_back(cmd->add_option("--layers", cfg.num_layers,
                                       "Encoder layers")
                           ->capture_default_str());
        opts.push_back(cmd->add_option("--hidden", cfg.hidden_size,
                                       "Hidden width")
                           ->capture_default_str());
        opts.push_back(cmd->add_option("--heads", cfg.num_heads,
                                       "Attention heads")
                           ->capture_default_str());
        opts.push_back(cmd->add_option(
            "--ffn", cfg.ffn_size, "Feed-forward width (0: 4x hidden)"));
        opts.push_back(cmd->add_option(
            "--embedding", cfg.embedding_size,
            "Embedding width (0: same as hidden)"));
        opts.push_back(cmd->add_option("--max-positions", cfg.max_positions,
                                       "Longest encodable sequence")
                           ->capture_default_str());
        opts.push_back(cmd->add_option("--dropout", cfg.dropout,
                                       "Encoder dropout")
                           ->capture_default_str());
        return opts;
    }
};

struct HeadFlags {
    std::string kind = "fine_tune";
    HeadConfig cfg;

    void add_to(CLI::App* cmd, bool with_kind) {
        if (with_kind) {
            cmd->add_option("--head", kind,
                            "Head kind: fine_tune, bilstm, bigru, "
                            "bilstm_attn, bigru_attn")
                ->capture_default_str();
        }
        cmd->add_option("--rnn-hidden", cfg.rnn_hidden,
                        "BiRNN hidden size per direction")
            ->capture_default_str();
        cmd->add_option("--rnn-layers", cfg.rnn_layers, "Stacked BiRNN layers")
            ->capture_default_str();
        cmd->add_option("--attn-dim", cfg.attn_dim,
                        "Per-head attention width of attention heads")
            ->capture_default_str();
        cmd->add_option("--attn-heads", cfg.attn_heads,
                        "Heads in the attention block")
            ->capture_default_str();
        cmd->add_option("--head-dropout", cfg.dropout, "Head dropout")
            ->capture_default_str();
    }

    HeadConfig resolved() const {
        HeadConfig out = cfg;
        out.kind = head_kind_from_string(kind);
        return out;
    }
};

struct ConllFlags {
    std::string task = "pos";
    int word_col = 0;
    int tag_col = 1;

    void add_to(CLI::App* cmd) {
        cmd->add_option("--task", task, "Tagging task: pos or ner")
            ->capture_default_str();
        cmd->add_option("--word-col", word_col, "Word column index")
            ->capture_default_str();
        cmd->add_option("--tag-col", tag_col, "Tag column index")
            ->capture_default_str();
    }

    TagScheme scheme() const { return tag_scheme_from_string(task); }
    ConllDataset read(const std::string& path) const {
        return read_conll(path, word_col, tag_col, scheme());
    }
};

void add_config_and_seed(CLI::App* cmd, uint64_t& seed) {
    // The file itself is applied by expand_config() before parsing; the
    // option exists so the flag is recognized and documented per subcommand.
    cmd->add_option("--config",
                    "key=value file; flags given on the command line win");
    cmd->add_option("--seed", seed, "Random seed governing the run")
        ->capture_default_str();
}

// Applies a flat key=value defaults file to the subcommand being run. Each
// key names one of its long options ("epochs=40" stands for "--epochs 40").
// The expansion appends tokens only for keys absent from the command line,
// so explicit flags always win and required-option checks still apply.
void expand_config(const CLI::App& app, std::vector<std::string>& args) {
    std::size_t sub_index = args.size();
    const CLI::App* sub = nullptr;
    for (std::size_t i = 0; i < args.size(); ++i) {
        if (args[i].rfind("-", 0) == 0) continue;
        sub = app.get_subcommand_no_throw(args[i]);
        sub_index = i;
        break;
    }
    if (sub == nullptr) return;  // let the parser report the bad subcommand

    std::string path;
    std::set<std::string> given;
    for (std::size_t i = sub_index + 1; i < args.size(); ++i) {
        const std::string& tok = args[i];
        if (tok.rfind("--", 0) != 0) continue;
        std::string name = tok.substr(0, tok.find('='));
        given.insert(name);
        if (name == "--config") {
            if (tok.size() > name.size())
                path = tok.substr(name.size() + 1);
            else if (i + 1 < args.size())
                path = args[i + 1];
        }
    }
    if (path.empty()) return;

    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file '" + path + "'");
    std::string line;
    std::set<std::string> seen;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string entry = CLI::detail::trim_copy(line);
        if (entry.empty() || entry[0] == '#') continue;
        std::string where = path + ":" + std::to_string(lineno);
        std::size_t eq = entry.find('=');
        if (eq == std::string::npos)
            throw UsageError(where + ": expected key=value");
        std::string key = CLI::detail::trim_copy(entry.substr(0, eq));
        std::string value = CLI::detail::trim_copy(entry.substr(eq + 1));
        if (key.empty()) throw UsageError(where + ": empty key");
        if (key == "config")
            throw UsageError(where + ": config files cannot chain");
        if (!seen.insert(key).second)
            throw UsageError(where + ": duplicate key '" + key + "'");
        std::string flag = "--" + key;
        if (given.count(flag)) continue;  // the command line wins
        const CLI::Option* opt = sub->get_option_no_throw(flag);
        if (opt == nullptr)
            throw UsageError(where + ": unknown key '" + key +
                             "' for subcommand '" + sub->get_name() + "'");
        if (opt->get_items_expected_max() > 1) {
            args.push_back(flag);
            for (std::string& piece : split_words(value))
                args.push_back(std::move(piece));
        } else {
            args.push_back(flag + "=" + value);
        }
    }
}

// ---------------------------------------------------------------------------

void add_clean(CLI::App& app) {
    struct Opts {
        std::string input, output, charset;
        std::string prefix = "shard";
        int64_t shard_size = 1000;
        uint64_t seed = 0;
    };
    auto opts = std::make_shared<Opts>();
    auto* o = opts.get();
    CLI::App* cmd = app.add_subcommand(
        "clean", "Clean raw documents into sentence shards");
    cmd->add_option("--input", o->input, "Directory of .txt documents")
        ->required();
    cmd->add_option("--output", o->output, "Directory for sentence shards")
        ->required();
    cmd->add_option("--charset", o->charset,
                    "Allowed-characters file (default: Vietnamese)");
    cmd->add_option("--shard-size", o->shard_size, "Sentences per shard")
        ->capture_default_str();
    cmd->add_option("--prefix", o->prefix, "Shard file prefix")
        ->capture_default_str();
    add_config_and_seed(cmd, o->seed);
    cmd->callback([opts] {
        Charset charset = opts->charset.empty()
                              ? Charset::default_vietnamese()
                              : Charset::load(opts->charset);
        auto docs = read_documents(opts->input);
        auto [sentences, stats] = clean_corpus(docs, charset);
        auto paths = shard_sentences(sentences, opts->output, opts->prefix,
                                     opts->shard_size, opts->seed);
        std::cout << stats.report();
        for (const std::string& p : paths) {
            std::cout << "shard\t" << p << "\n";
        }
    });
}

void add_build_vocab(CLI::App& app) {
    struct Opts {
        std::vector<std::string> inputs;
        std::string base, output;
        VocabBuildOptions build;
    };
    auto opts = std::make_shared<Opts>();
    auto* o = opts.get();
    CLI::App* cmd = app.add_subcommand(
        "build-vocab", "Build a word-piece vocabulary from sentence shards");
    cmd->add_option("--input", o->inputs, "Sentence shard files")->required();
    cmd->add_option("--base", o->base,
                    "Existing vocabulary to prune against the corpus");
    cmd->add_option("--output", o->output, "Vocabulary file to write")
        ->required();
    cmd->add_option("--min-count", o->build.min_count,
                    "Minimum occurrences for a piece")
        ->capture_default_str();
    cmd->add_option("--size-budget", o->build.size_budget,
                    "Vocabulary size limit for the from-scratch path")
        ->capture_default_str();
    uint64_t seed = 0;  // vocabulary building is deterministic
    add_config_and_seed(cmd, seed);
    cmd->callback([opts] {
        std::vector<std::string> sentences;
        for (const std::string& path : opts->inputs) {
            std::ifstream in(path);
            if (!in) throw IoError("cannot open shard '" + path + "'");
            std::string line;
            while (std::getline(in, line)) {
                if (!split_words(line).empty()) sentences.push_back(line);
            }
        }
        Vocab base;
        const Vocab* base_ptr = nullptr;
        if (!opts->base.empty()) {
            base = Vocab::load(opts->base);
            base_ptr = &base;
        }
        Vocab vocab = build_vocab(sentences, base_ptr, opts->build);
        vocab.save(opts->output);
        std::cout << "vocab_size\t" << vocab.size() << "\n";
    });
}

void add_pretrain_mlm(CLI::App& app) {
    struct Opts {
        std::vector<std::string> shards;
        std::string vocab, output, resume;
        EncoderFlags enc;
        MlmTrainConfig train;
        uint64_t seed = 0;
    };
    auto opts = std::make_shared<Opts>();
    auto* o = opts.get();
    CLI::App* cmd = app.add_subcommand(
        "pretrain-mlm", "Pretrain an encoder with masked-token prediction");
    cmd->add_option("--shards", o->shards, "Sentence shard files")->required();
    cmd->add_option("--vocab", o->vocab, "Vocabulary file")->required();
    cmd->add_option("--output", o->output, "Checkpoint to write")->required();
    cmd->add_option("--resume", o->resume,
                    "Checkpoint of an earlier run to continue");
    o->enc.add_to(cmd);
    cmd->add_option("--epochs", o->train.epochs, "Training epochs")
        ->capture_default_str();
    cmd->add_option("--batch-size", o->train.batch_size, "Sentences per step")
        ->capture_default_str();
    cmd->add_option("--max-len", o->train.max_len,
                    "Positions per training sequence")
        ->capture_default_str();
    cmd->add_option("--lr", o->train.lr, "Peak Adam learning rate")
        ->capture_default_str();
    add_config_and_seed(cmd, o->seed);
    cmd->callback([opts] {
        Vocab vocab = Vocab::load(opts->vocab);
        auto sentences = read_token_shards(opts->shards);
        Checkpoint resume;
        const Checkpoint* resume_ptr = nullptr;
        if (!opts->resume.empty()) {
            resume = Checkpoint::load(opts->resume);
            resume_ptr = &resume;
        }
        MlmTrainResult res =
            train_mlm(sentences, vocab, opts->enc.cfg, opts->train,
                      opts->seed, &std::cout, resume_ptr);
        res.checkpoint.save(opts->output);
        if (res.diverged) {
            std::cerr << "warning: training diverged ("
                      << res.divergence_note << "); saved the last healthy "
                      << "state, epoch " << res.checkpoint.epoch << "\n";
        }
    });
}

void add_pretrain_electra(CLI::App& app) {
    struct Opts {
        std::vector<std::string> shards;
        std::string vocab, output, init;
        EncoderFlags enc;
        ElectraTrainConfig train;
        uint64_t seed = 0;
    };
    auto opts = std::make_shared<Opts>();
    auto* o = opts.get();
    CLI::App* cmd = app.add_subcommand(
        "pretrain-electra",
        "Pretrain a discriminator with replaced-token detection");
    cmd->add_option("--shards", o->shards, "Sentence shard files")->required();
    cmd->add_option("--vocab", o->vocab, "Vocabulary file")->required();
    cmd->add_option("--output", o->output, "Checkpoint to write")->required();
    cmd->add_option("--init", o->init,
                    "Checkpoint to warm start the discriminator from");
    o->enc.add_to(cmd);
    cmd->add_option("--epochs", o->train.epochs, "Training epochs")
        ->capture_default_str();
    cmd->add_option("--batch-size", o->train.batch_size, "Sentences per step")
        ->capture_default_str();
    cmd->add_option("--max-len", o->train.max_len,
                    "Positions per training sequence")
        ->capture_default_str();
    cmd->add_option("--lr", o->train.lr, "Peak Adam learning rate")
        ->capture_default_str();
    cmd->add_option("--lambda", o->train.lambda,
                    "Discriminator weight in the combined loss")
        ->capture_default_str();
    add_config_and_seed(cmd, o->seed);
    cmd->callback([opts] {
        Vocab vocab = Vocab::load(opts->vocab);
        auto sentences = read_token_shards(opts->shards);
        Checkpoint init;
        const Checkpoint* init_ptr = nullptr;
        if (!opts->init.empty()) {
            init = Checkpoint::load(opts->init);
            init_ptr = &init;
        }
        ElectraTrainResult res =
            train_electra(sentences, vocab, opts->enc.cfg, opts->train,
                          opts->seed, &std::cout, init_ptr);
        res.checkpoint.save(opts->output);
        if (res.diverged) {
            std::cerr << "warning: training diverged ("
                      << res.divergence_note << "); saved the last healthy "
                      << "state, epoch " << res.checkpoint.epoch << "\n";
        }
    });
}

void add_finetune(CLI::App& app) {
    struct Opts {
        std::string train_path, dev_path, vocab, init, output;
        ConllFlags conll;
        EncoderFlags enc;
        HeadFlags head;
        FinetuneConfig train;
        uint64_t seed = 0;
    };
    auto opts = std::make_shared<Opts>();
    auto* o = opts.get();
    CLI::App* cmd = app.add_subcommand(
        "finetune", "Fine-tune a tagger on CoNLL-format data");
    cmd->add_option("--train", o->train_path, "Training data")->required();
    cmd->add_option("--dev", o->dev_path,
                    "Dev data (default: held-out slice of --train)");
    CLI::Option* vocab_opt =
        cmd->add_option("--vocab", o->vocab, "Vocabulary file");
    CLI::Option* init_opt = cmd->add_option(
        "--init", o->init,
        "Pretrained checkpoint; supplies the encoder shape and vocabulary");
    cmd->add_option("--output", o->output, "Checkpoint to write")->required();
    o->conll.add_to(cmd);
    auto enc_opts = o->enc.add_to(cmd);
    // A warm start dictates the architecture and vocabulary, so the flags
    // that would contradict it are rejected alongside it.
    for (CLI::Option* e : enc_opts) init_opt->excludes(e);
    init_opt->excludes(vocab_opt);
    o->head.add_to(cmd, true);
    cmd->add_option("--epochs", o->train.epochs, "Training epochs")
        ->capture_default_str();
    cmd->add_option("--batch-size", o->train.batch_size, "Sentences per step")
        ->capture_default_str();
    cmd->add_option("--encoder-lr", o->train.encoder_lr,
                    "Adam learning rate for encoder parameters")
        ->capture_default_str();
    cmd->add_option("--head-lr", o->train.head_lr,
                    "Adam learning rate for mix and head parameters")
        ->capture_default_str();
    cmd->add_option("--dev-fraction", o->train.dev_fraction,
                    "Held-out fraction when --dev is absent")
        ->capture_default_str();
    add_config_and_seed(cmd, o->seed);
    cmd->callback([opts] {
        ConllDataset train_ds = opts->conll.read(opts->train_path);
        ConllDataset dev_ds;
        const ConllDataset* dev_ptr = nullptr;
        if (!opts->dev_path.empty()) {
            dev_ds = opts->conll.read(opts->dev_path);
            dev_ptr = &dev_ds;
        }
        Checkpoint init;
        const Checkpoint* init_ptr = nullptr;
        Vocab vocab;
        EncoderConfig enc = opts->enc.cfg;
        if (!opts->init.empty()) {
            init = Checkpoint::load(opts->init);
            init_ptr = &init;
            vocab = Vocab::from_tokens(init.vocab);
            enc = init.encoder;
        } else if (!opts->vocab.empty()) {
            vocab = Vocab::load(opts->vocab);
        } else {
            throw UsageError("finetune needs --vocab or --init");
        }
        FinetuneConfig cfg = opts->train;
        cfg.head = opts->head.resolved();
        FinetuneResult res = finetune(train_ds, dev_ptr, vocab, enc,
                                      init_ptr, cfg, opts->seed, &std::cout);
        res.checkpoint.save(opts->output);
        std::cout << "best_epoch\t" << res.best_epoch << "\n";
        std::cout << "best_dev_accuracy\t" << fmt6(res.best_dev_accuracy)
                  << "\n";
    });
}

void add_tag(CLI::App& app) {
    struct Opts {
        std::string model, input;
        uint64_t seed = 0;
    };
    auto opts = std::make_shared<Opts>();
    auto* o = opts.get();
    CLI::App* cmd = app.add_subcommand(
        "tag", "Tag sentences with a fine-tuned model");
    cmd->add_option("--model", o->model, "Tagger checkpoint")->required();
    cmd->add_option("--input", o->input,
                    "Text file, one tokenized sentence per line")
        ->required();
    add_config_and_seed(cmd, o->seed);
    cmd->callback([opts] {
        Tagger<float> model =
            tagger_from_checkpoint(Checkpoint::load(opts->model));
        for (const auto& words : read_sentences(opts->input)) {
            std::vector<std::string> tags = tag_sentence(model, words);
            for (size_t i = 0; i < words.size(); ++i) {
                std::cout << (i ? " " : "") << words[i] << '/' << tags[i];
            }
            std::cout << "\n";
        }
    });
}

void add_eval(CLI::App& app) {
    struct Opts {
        std::string pred, gold;
        ConllFlags conll;
        bool keys = false;
        uint64_t seed = 0;
    };
    auto opts = std::make_shared<Opts>();
    auto* o = opts.get();
    CLI::App* cmd = app.add_subcommand(
        "eval", "Score predicted tags against gold CoNLL data");
    cmd->add_option("--pred", o->pred, "Predicted tags, CoNLL format")
        ->required();
    cmd->add_option("--gold", o->gold, "Gold tags, CoNLL format")->required();
    o->conll.add_to(cmd);
    cmd->add_flag("--keys", o->keys,
                  "Print key=value lines instead of the table");
    add_config_and_seed(cmd, o->seed);
    cmd->callback([opts] {
        ConllDataset pred = opts->conll.read(opts->pred);
        ConllDataset gold = opts->conll.read(opts->gold);
        EvalReport report =
            evaluate_tags(pred, gold, opts->conll.scheme());
        std::cout << (opts->keys ? report.key_values() : report.table());
    });
}

void add_bench(CLI::App& app) {
    struct Opts {
        std::string model, input;
        int warmup = 1;
        int repeats = 3;
        uint64_t seed = 0;
    };
    auto opts = std::make_shared<Opts>();
    auto* o = opts.get();
    CLI::App* cmd = app.add_subcommand(
        "bench", "Measure single-threaded decoding time per sentence");
    cmd->add_option("--model", o->model, "Tagger checkpoint")->required();
    cmd->add_option("--input", o->input,
                    "Text file, one tokenized sentence per line")
        ->required();
    cmd->add_option("--warmup", o->warmup, "Untimed passes")
        ->capture_default_str();
    cmd->add_option("--repeats", o->repeats, "Timed passes")
        ->capture_default_str();
    add_config_and_seed(cmd, o->seed);
    cmd->callback([opts] {
        Tagger<float> model =
            tagger_from_checkpoint(Checkpoint::load(opts->model));
        auto sentences = read_sentences(opts->input);
        BenchResult res =
            bench_decode(model, sentences, opts->warmup, opts->repeats);
        std::cout << "sentences\t" << sentences.size() << "\n";
        std::cout << "avg_words_per_sentence\t"
                  << fmt6(res.avg_words_per_sentence) << "\n";
        std::cout << "ms_per_sentence\t" << fmt6(res.ms_per_sentence) << "\n";
    });
}

void add_grid(CLI::App& app) {
    struct Opts {
        std::string train_path, test_path, vocab;
        std::vector<std::string> columns;
        std::vector<std::string> fresh;
        ConllFlags conll;
        EncoderFlags enc;
        HeadFlags head;
        GridConfig grid;
        uint64_t seed = 0;
    };
    auto opts = std::make_shared<Opts>();
    auto* o = opts.get();
    CLI::App* cmd = app.add_subcommand(
        "grid", "Fine-tune and score every head kind per encoder column");
    cmd->add_option("--train", o->train_path, "Training data")->required();
    cmd->add_option("--test", o->test_path, "Test data")->required();
    cmd->add_option("--column", o->columns,
                    "name=checkpoint column (repeatable)");
    cmd->add_option("--fresh", o->fresh,
                    "Column trained from scratch with the encoder flags "
                    "(repeatable, needs --vocab)");
    cmd->add_option("--vocab", o->vocab, "Vocabulary for --fresh columns");
    o->conll.add_to(cmd);
    o->enc.add_to(cmd);
    o->head.add_to(cmd, false);  // the grid row decides the head kind
    cmd->add_option("--epochs", o->grid.finetune.epochs,
                    "Fine-tuning epochs per cell")
        ->capture_default_str();
    cmd->add_option("--batch-size", o->grid.finetune.batch_size,
                    "Sentences per step")
        ->capture_default_str();
    cmd->add_option("--encoder-lr", o->grid.finetune.encoder_lr,
                    "Adam learning rate for encoder parameters")
        ->capture_default_str();
    cmd->add_option("--head-lr", o->grid.finetune.head_lr,
                    "Adam learning rate for mix and head parameters")
        ->capture_default_str();
    cmd->add_option("--dev-fraction", o->grid.finetune.dev_fraction,
                    "Held-out fraction of the training data")
        ->capture_default_str();
    cmd->add_flag("--parallel", o->grid.parallel,
                  "Run cells concurrently (forfeits bit-exact reruns)");
    add_config_and_seed(cmd, o->seed);
    cmd->callback([opts] {
        ConllDataset train_ds = opts->conll.read(opts->train_path);
        ConllDataset test_ds = opts->conll.read(opts->test_path);

        std::deque<Checkpoint> loaded;  // keeps GridColumn::init pointers live
        std::vector<GridColumn> columns;
        for (const std::string& spec : opts->columns) {
            const size_t eq = spec.find('=');
            if (eq == std::string::npos || eq == 0) {
                throw UsageError("--column expects name=checkpoint, got '" +
                                 spec + "'");
            }
            loaded.push_back(Checkpoint::load(spec.substr(eq + 1)));
            GridColumn col;
            col.name = spec.substr(0, eq);
            col.vocab = Vocab::from_tokens(loaded.back().vocab);
            col.encoder = loaded.back().encoder;
            col.init = &loaded.back();
            columns.push_back(std::move(col));
        }
        if (!opts->fresh.empty()) {
            if (opts->vocab.empty()) {
                throw UsageError("--fresh columns need --vocab");
            }
            Vocab vocab = Vocab::load(opts->vocab);
            for (const std::string& name : opts->fresh) {
                GridColumn col;
                col.name = name;
                col.vocab = vocab;
                col.encoder = opts->enc.cfg;
                columns.push_back(std::move(col));
            }
        }

        GridConfig cfg = opts->grid;
        cfg.finetune.head = opts->head.resolved();
        cfg.seed = opts->seed;
        // Progress goes to stderr; stdout carries exactly the table.
        GridResult grid = run_grid(columns, train_ds, test_ds, cfg,
                                   &std::cerr);
        std::cout << grid.table();
    });
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Vietnamese sequence-tagging toolkit"};
    app.require_subcommand(1);
    app.failure_message(CLI::FailureMessage::help);

    add_clean(app);
    add_build_vocab(app);
    add_pretrain_mlm(app);
    add_pretrain_electra(app);
    add_finetune(app);
    add_tag(app);
    add_eval(app);
    add_bench(app);
    add_grid(app);

    std::vector<std::string> args(argv + 1, argv + argc);
    try {
        expand_config(app, args);
        std::reverse(args.begin(), args.end());  // parse() consumes back first
        app.parse(std::move(args));
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    } catch (const vitag::UsageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const vitag::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
