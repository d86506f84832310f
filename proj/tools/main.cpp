// pgnet command-line front end: preprocessing, vocabulary building,
// training, summarization, and ROUGE evaluation over JSONL corpora.
//
// Exit codes: 0 success, 1 usage, 2 I/O, 3 numerical abort,
// 4 checkpoint mismatch.

#include <atomic>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include <pgnet/beam.hpp>
#include <pgnet/errors.hpp>
#include <pgnet/model.hpp>
#include <pgnet/rng.hpp>
#include <pgnet/rouge.hpp>
#include <pgnet/text.hpp>
#include <pgnet/trainer.hpp>

namespace {

using namespace pgnet;

struct CliConfig {
    // shared hyperparameters (paper defaults)
    std::int64_t vocab_size = 50000;
    std::int64_t hidden = 512;
    std::int64_t emb = 128;
    std::int64_t max_enc = 400;
    std::int64_t max_dec = 100;
    double lr = 0.15;
    double coverage_weight = 1.0;
    double clip_norm = 2.0;
    double adagrad_init_acc = 0.1;
    std::int64_t batch_size = 16;
    std::int64_t phase1_steps = 0;
    std::int64_t phase2_steps = 0;
    std::int64_t checkpoint_every = 1000;
    std::uint64_t seed = 1;

    // decode / eval
    std::int64_t beam = 4;
    std::int64_t min_dec = 8;
    std::int64_t sample = 0;  // 0 = everything
    std::int64_t threads = 1;
    std::string coverage_mode = "auto";  // auto|on|off

    // paths
    std::string corpus, vocab, checkpoint_dir, out, loss_csv;
    std::string input, text, candidates, report, per_example, split = "all";
    std::string config_path;
};

// defaults < --config JSON < explicit flags.
void apply_config_file(CLI::App* cmd, CliConfig& cfg) {
    if (cfg.config_path.empty()) return;
    std::ifstream in(cfg.config_path);
    if (!in) throw IoError("cannot open config file: " + cfg.config_path);
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception& e) {
        throw UsageError("unparsable config file " + cfg.config_path + ": " + e.what());
    }
    if (!doc.is_object()) throw UsageError("config file must hold a JSON object");

    const auto set_if_default = [&](const char* flag, auto& field) {
        const CLI::Option* opt = cmd->get_option_no_throw(std::string("--") + flag);
        if (!doc.contains(flag)) return;
        if (opt && opt->count() > 0) return;  // explicit flag wins
        using T = std::decay_t<decltype(field)>;
        try {
            field = doc.at(flag).get<T>();
        } catch (const nlohmann::json::exception&) {
            throw UsageError(std::string("config key '") + flag + "' has the wrong type");
        }
    };
    set_if_default("vocab-size", cfg.vocab_size);
    set_if_default("hidden", cfg.hidden);
    set_if_default("emb", cfg.emb);
    set_if_default("max-enc", cfg.max_enc);
    set_if_default("max-dec", cfg.max_dec);
    set_if_default("lr", cfg.lr);
    set_if_default("coverage-weight", cfg.coverage_weight);
    set_if_default("clip-norm", cfg.clip_norm);
    set_if_default("adagrad-init-acc", cfg.adagrad_init_acc);
    set_if_default("batch-size", cfg.batch_size);
    set_if_default("phase1-steps", cfg.phase1_steps);
    set_if_default("phase2-steps", cfg.phase2_steps);
    set_if_default("checkpoint-every", cfg.checkpoint_every);
    set_if_default("seed", cfg.seed);
    set_if_default("beam", cfg.beam);
    set_if_default("min-dec", cfg.min_dec);
    set_if_default("sample", cfg.sample);
    set_if_default("threads", cfg.threads);
    set_if_default("coverage", cfg.coverage_mode);
    set_if_default("corpus", cfg.corpus);
    set_if_default("vocab", cfg.vocab);
    set_if_default("checkpoint-dir", cfg.checkpoint_dir);
}

bool flag_given(const CLI::App* cmd, const std::string& name) {
    const CLI::Option* opt = cmd->get_option_no_throw(name);
    return opt && opt->count() > 0;
}

std::vector<std::string> prepare_tokens(const std::string& raw) {
    return tokenize(normalize(raw));
}

// ---------------------------------------------------------------------------

int cmd_preprocess(const CliConfig& cfg) {
    const Corpus corpus = read_corpus(cfg.input);
    std::ofstream out(cfg.out, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open output file: " + cfg.out);

    std::size_t kept = 0, dropped = 0;
    for (const ArticlePair& pair : corpus.pairs) {
        const std::string article = normalize(pair.article);
        const std::string summary = normalize(pair.summary);
        if (article.empty() || summary.empty()) {
            ++dropped;
            continue;
        }
        nlohmann::json obj{{"article", article}, {"summary", summary}};
        out << obj.dump() << '\n';
        ++kept;
    }
    if (!out) throw IoError("failed writing output file: " + cfg.out);

    const std::string report = "kept=" + std::to_string(kept) +
                               " dropped=" + std::to_string(dropped) +
                               " skipped_lines=" + std::to_string(corpus.skipped);
    std::cout << report << '\n';
    if (!cfg.report.empty()) {
        std::ofstream rep(cfg.report, std::ios::trunc);
        if (!rep) throw IoError("cannot open report file: " + cfg.report);
        rep << report << '\n';
    }
    return 0;
}

int cmd_build_vocab(const CliConfig& cfg) {
    if (cfg.vocab_size <= Vocabulary::kReservedCount) {
        throw UsageError("--vocab-size must exceed the " +
                         std::to_string(Vocabulary::kReservedCount) + " reserved tokens");
    }
    const Corpus corpus = read_corpus(cfg.corpus);
    std::vector<std::vector<std::string>> sequences;
    sequences.reserve(corpus.pairs.size() * 2);
    for (const ArticlePair& pair : corpus.pairs) {
        sequences.push_back(prepare_tokens(pair.article));
        sequences.push_back(prepare_tokens(pair.summary));
    }
    const Vocabulary vocab = build_vocab(sequences, static_cast<std::int32_t>(cfg.vocab_size));
    save_vocab(vocab, cfg.out);
    std::cout << "vocab_size=" << vocab.size() << " written to " << cfg.out << '\n';
    return 0;
}

struct PreparedCorpus {
    std::vector<EncodedExample> train, val, test;
};

PreparedCorpus encode_corpus(const Corpus& corpus, const Vocabulary& vocab,
                             std::int64_t max_enc, std::int64_t max_dec) {
    PreparedCorpus out;
    std::size_t unusable = 0;
    for (std::size_t i = 0; i < corpus.pairs.size(); ++i) {
        const std::vector<std::string> article = prepare_tokens(corpus.pairs[i].article);
        const std::vector<std::string> summary = prepare_tokens(corpus.pairs[i].summary);
        if (article.empty() || summary.empty()) {
            ++unusable;
            continue;
        }
        EncodedExample ex = encode_example(article, summary, vocab, max_enc, max_dec);
        switch (split_of_index(i)) {
            case Split::train: out.train.push_back(std::move(ex)); break;
            case Split::val: out.val.push_back(std::move(ex)); break;
            case Split::test: out.test.push_back(std::move(ex)); break;
        }
    }
    if (unusable > 0) {
        std::cerr << "note: " << unusable << " pairs empty after cleaning were skipped\n";
    }
    return out;
}

int cmd_train(const CLI::App* cmd, const CliConfig& cfg) {
    if (cfg.phase1_steps + cfg.phase2_steps <= 0) {
        throw UsageError("nothing to do: --phase1-steps + --phase2-steps must be positive");
    }
    if (cfg.phase2_steps == 0 && flag_given(cmd, "--coverage-weight") &&
        cfg.coverage_weight > 0) {
        std::cerr << "warning: --coverage-weight has no effect with --phase2-steps 0\n";
    }
    const Vocabulary vocab = load_vocab(cfg.vocab);
    if (flag_given(cmd, "--vocab-size") &&
        vocab.size() != static_cast<std::int32_t>(cfg.vocab_size)) {
        throw UsageError("--vocab-size " + std::to_string(cfg.vocab_size) +
                         " does not match the vocabulary file (" + std::to_string(vocab.size()) +
                         " entries)");
    }
    const Corpus corpus = read_corpus(cfg.corpus);
    const PreparedCorpus prepared = encode_corpus(corpus, vocab, cfg.max_enc, cfg.max_dec);
    if (prepared.train.empty()) throw EmptyInputError("no usable training examples in the corpus");

    TrainConfig tc;
    tc.vocab_size = vocab.size();
    tc.d_e = static_cast<std::int32_t>(cfg.emb);
    tc.d_h = static_cast<std::int32_t>(cfg.hidden);
    tc.max_enc = cfg.max_enc;
    tc.max_dec = cfg.max_dec;
    tc.lr = static_cast<real>(cfg.lr);
    tc.adagrad_init_acc = static_cast<real>(cfg.adagrad_init_acc);
    tc.clip_norm = static_cast<real>(cfg.clip_norm);
    tc.batch_size = static_cast<std::int32_t>(cfg.batch_size);
    tc.coverage_weight = static_cast<real>(cfg.coverage_weight);
    tc.phase1_steps = cfg.phase1_steps;
    tc.phase2_steps = cfg.phase2_steps;
    tc.seed = cfg.seed;
    tc.checkpoint_every = cfg.checkpoint_every;
    tc.checkpoint_dir = cfg.checkpoint_dir;
    tc.loss_csv_path = cfg.loss_csv.empty() && !cfg.checkpoint_dir.empty()
                           ? (std::filesystem::path(cfg.checkpoint_dir) / "loss.csv").string()
                           : cfg.loss_csv;
    tc.validate();

    ModelParams params;
    AdagradState opt;
    std::int64_t start_step = 0;
    if (!cfg.checkpoint_dir.empty() && checkpoint_exists(cfg.checkpoint_dir)) {
        LoadedCheckpoint loaded = load_checkpoint(cfg.checkpoint_dir);
        const auto must_match = [&](const std::string& field, auto want, auto have) {
            if (want != have) {
                throw CheckpointMismatchError(
                    "checkpoint field '" + field + "' is " + std::to_string(have) +
                        " but the requested configuration says " + std::to_string(want),
                    field);
            }
        };
        must_match("vocab_size", tc.vocab_size, loaded.meta.vocab_size);
        must_match("emb", tc.d_e, loaded.meta.d_e);
        must_match("hidden", tc.d_h, loaded.meta.d_h);
        params = std::move(loaded.params);
        opt = std::move(loaded.opt);
        start_step = loaded.meta.step;
        std::cerr << "resuming from step " << start_step << " in " << cfg.checkpoint_dir << '\n';
    } else {
        params = init_params(tc.vocab_size, tc.d_e, tc.d_h, tc.seed);
        opt.init(params, tc.adagrad_init_acc);
    }

    const TrainResult result =
        train(tc, prepared.train, prepared.val, params, opt, start_step,
              [](const std::string& line) { std::cerr << line << '\n'; });
    std::cout << "trained to step " << result.final_step << " (" << result.history.size()
              << " steps this run)\n";
    if (!tc.loss_csv_path.empty()) std::cout << "loss history: " << tc.loss_csv_path << '\n';
    return 0;
}

struct DecodeSetup {
    ModelParams params;
    Vocabulary vocab;
    BeamConfig beam;
};

DecodeSetup load_decode_setup(const CLI::App* cmd, const CliConfig& cfg) {
    if (cfg.checkpoint_dir.empty()) throw UsageError("--checkpoint-dir is required");
    if (!checkpoint_exists(cfg.checkpoint_dir)) {
        throw IoError("no checkpoint manifest in " + cfg.checkpoint_dir);
    }
    LoadedCheckpoint loaded = load_checkpoint(cfg.checkpoint_dir);

    const auto reject_mismatch = [&](const char* flag, const std::string& field, auto requested,
                                     auto actual) {
        if (flag_given(cmd, flag) && requested != actual) {
            throw CheckpointMismatchError(
                "checkpoint field '" + field + "' is " + std::to_string(actual) +
                    " but the command line requests " + std::to_string(requested),
                field);
        }
    };
    reject_mismatch("--hidden", "hidden", static_cast<std::int32_t>(cfg.hidden),
                    loaded.meta.d_h);
    reject_mismatch("--emb", "emb", static_cast<std::int32_t>(cfg.emb), loaded.meta.d_e);
    reject_mismatch("--vocab-size", "vocab_size", static_cast<std::int32_t>(cfg.vocab_size),
                    loaded.meta.vocab_size);
    reject_mismatch("--max-enc", "max_enc", cfg.max_enc, loaded.meta.max_enc);

    DecodeSetup setup;
    setup.vocab = load_vocab(cfg.vocab);
    if (setup.vocab.size() != loaded.meta.vocab_size) {
        throw CheckpointMismatchError("vocabulary file has " + std::to_string(setup.vocab.size()) +
                                          " entries but the checkpoint was trained with " +
                                          std::to_string(loaded.meta.vocab_size),
                                      "vocab_size");
    }
    setup.beam.beam = static_cast<std::int32_t>(cfg.beam);
    setup.beam.min_dec = cfg.min_dec;
    setup.beam.max_dec = flag_given(cmd, "--max-dec") ? cfg.max_dec : loaded.meta.max_dec;
    setup.beam.max_enc = flag_given(cmd, "--max-enc") ? cfg.max_enc : loaded.meta.max_enc;
    if (cfg.coverage_mode == "auto") {
        setup.beam.coverage_enabled = loaded.meta.phase == 2;
    } else if (cfg.coverage_mode == "on") {
        setup.beam.coverage_enabled = true;
    } else if (cfg.coverage_mode == "off") {
        setup.beam.coverage_enabled = false;
    } else {
        throw UsageError("--coverage must be auto, on, or off");
    }
    setup.params = std::move(loaded.params);
    return setup;
}

// Articles decoded in parallel, output order restored.
std::vector<BeamResult> decode_all(const DecodeSetup& setup,
                                   const std::vector<std::vector<std::string>>& articles,
                                   std::int64_t threads) {
    std::vector<BeamResult> results(articles.size());
    const std::size_t workers = static_cast<std::size_t>(
        std::max<std::int64_t>(1, std::min<std::int64_t>(threads,
                                                         static_cast<std::int64_t>(articles.size()))));
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    const auto work = [&]() {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= articles.size()) return;
            results[i] = beam_search(articles[i], setup.params, setup.vocab, setup.beam);
        }
    };
    if (workers == 1) {
        work();
    } else {
        pool.reserve(workers);
        for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
        for (std::thread& t : pool) t.join();
    }
    return results;
}

int cmd_summarize(const CLI::App* cmd, const CliConfig& cfg) {
    const bool has_text = flag_given(cmd, "--text");
    if (has_text == !cfg.input.empty()) {
        throw UsageError("provide exactly one of --input or --text");
    }
    if (has_text && normalize(cfg.text).empty()) {
        throw UsageError("--text is empty after cleaning");
    }
    const DecodeSetup setup = load_decode_setup(cmd, cfg);

    std::vector<std::vector<std::string>> articles;
    if (has_text) {
        articles.push_back(prepare_tokens(cfg.text));
    } else {
        std::ifstream in(cfg.input, std::ios::binary);
        if (!in) throw IoError("cannot open input file: " + cfg.input);
        std::string line;
        std::size_t lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
            nlohmann::json obj;
            try {
                obj = nlohmann::json::parse(line);
            } catch (const nlohmann::json::exception&) {
                throw UsageError("input line " + std::to_string(lineno) + " is not JSON");
            }
            if (!obj.contains("article") || !obj["article"].is_string()) {
                throw UsageError("input line " + std::to_string(lineno) +
                                 " lacks a string 'article' field");
            }
            const auto tokens = prepare_tokens(obj["article"].get<std::string>());
            if (tokens.empty()) {
                throw UsageError("input line " + std::to_string(lineno) +
                                 " is empty after cleaning");
            }
            articles.push_back(tokens);
        }
    }

    const std::vector<BeamResult> results = decode_all(setup, articles, cfg.threads);

    std::ofstream file_out;
    std::ostream* out = &std::cout;
    if (!cfg.out.empty() && cfg.out != "-") {
        file_out.open(cfg.out, std::ios::binary | std::ios::trunc);
        if (!file_out) throw IoError("cannot open output file: " + cfg.out);
        out = &file_out;
    }
    for (const BeamResult& r : results) (*out) << detokenize(r.tokens) << '\n';
    return 0;
}

int cmd_evaluate(const CLI::App* cmd, const CliConfig& cfg) {
    const Corpus corpus = read_corpus(cfg.corpus);

    std::vector<std::size_t> indices;
    for (std::size_t i = 0; i < corpus.pairs.size(); ++i) {
        if (cfg.split == "all") {
            indices.push_back(i);
        } else {
            const Split s = split_of_index(i);
            if ((cfg.split == "train" && s == Split::train) ||
                (cfg.split == "val" && s == Split::val) ||
                (cfg.split == "test" && s == Split::test)) {
                indices.push_back(i);
            }
        }
    }
    if (indices.empty()) throw EmptyInputError("no examples selected for evaluation");

    if (cfg.sample > 0 && static_cast<std::size_t>(cfg.sample) < indices.size()) {
        Rng rng(cfg.seed);
        rng.shuffle(indices);
        indices.resize(static_cast<std::size_t>(cfg.sample));
    }

    std::vector<std::vector<std::string>> articles, references;
    for (const std::size_t i : indices) {
        articles.push_back(prepare_tokens(corpus.pairs[i].article));
        references.push_back(prepare_tokens(corpus.pairs[i].summary));
        if (articles.back().empty() || references.back().empty()) {
            throw EmptyInputError("example " + std::to_string(i) +
                                  " is empty after cleaning; run preprocess first");
        }
    }

    std::vector<std::vector<std::string>> candidates;
    if (!cfg.candidates.empty()) {
        std::ifstream in(cfg.candidates, std::ios::binary);
        if (!in) throw IoError("cannot open candidates file: " + cfg.candidates);
        std::string line;
        while (std::getline(in, line)) candidates.push_back(prepare_tokens(line));
        if (candidates.size() != indices.size()) {
            throw UsageError("candidates file has " + std::to_string(candidates.size()) +
                             " lines but " + std::to_string(indices.size()) +
                             " examples are selected");
        }
    } else {
        const DecodeSetup setup = load_decode_setup(cmd, cfg);
        for (const BeamResult& r : decode_all(setup, articles, cfg.threads)) {
            candidates.push_back(r.tokens);
        }
    }

    std::vector<TokenizedPair> pairs;
    std::size_t duplicated = 0;
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        if (has_duplicate_ngram(candidates[i], 3)) ++duplicated;
        pairs.emplace_back(candidates[i], references[i]);
    }
    const CorpusRouge scores = corpus_rouge(pairs);
    const double dup_rate = static_cast<double>(duplicated) / static_cast<double>(pairs.size());

    const auto csv_row = [](const char* name, const RougeScore& s) {
        char buf[128];
        std::snprintf(buf, sizeof(buf), "%s,%.6f,%.6f,%.6f\n", name, s.precision, s.recall, s.f1);
        return std::string(buf);
    };
    const std::string csv = std::string("metric,precision,recall,f1\n") +
                            csv_row("rouge_1", scores.rouge1) + csv_row("rouge_2", scores.rouge2) +
                            csv_row("rouge_l", scores.rougeL);
    std::cout << csv;
    char dup_buf[64];
    std::snprintf(dup_buf, sizeof(dup_buf), "duplicate_trigram_rate\t%.6f\n", dup_rate);
    std::cout << dup_buf;

    if (!cfg.report.empty()) {
        std::ofstream rep(cfg.report, std::ios::trunc);
        if (!rep) throw IoError("cannot open report file: " + cfg.report);
        rep << csv;
    }
    if (!cfg.per_example.empty()) {
        std::ofstream tsv(cfg.per_example, std::ios::trunc);
        if (!tsv) throw IoError("cannot open per-example file: " + cfg.per_example);
        tsv << "index\trouge1_f1\trouge2_f1\trougel_f1\tdup_trigram\tcandidate\n";
        for (std::size_t i = 0; i < pairs.size(); ++i) {
            const RougeScore r1 = rouge_n(candidates[i], references[i], 1);
            const RougeScore r2 = rouge_n(candidates[i], references[i], 2);
            const RougeScore rl = rouge_l(candidates[i], references[i]);
            char buf[64];
            std::snprintf(buf, sizeof(buf), "%zu\t%.6f\t%.6f\t%.6f\t%d\t", indices[i], r1.f1,
                          r2.f1, rl.f1, has_duplicate_ngram(candidates[i], 3) ? 1 : 0);
            tsv << buf << detokenize(candidates[i]) << '\n';
        }
    }
    return 0;
}

void add_model_flags(CLI::App* cmd, CliConfig& cfg) {
    cmd->add_option("--vocab-size", cfg.vocab_size, "Vocabulary size cap");
    cmd->add_option("--hidden", cfg.hidden, "Hidden state size");
    cmd->add_option("--emb", cfg.emb, "Embedding size");
    cmd->add_option("--max-enc", cfg.max_enc, "Maximum encoder steps");
    cmd->add_option("--max-dec", cfg.max_dec, "Maximum decoder steps");
}

void add_config_flag(CLI::App* cmd, CliConfig& cfg) {
    cmd->add_option("--config", cfg.config_path, "JSON config file (defaults < file < flags)");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"pointer-generator summarization pipeline"};
    app.require_subcommand(1);
    CliConfig cfg;

    CLI::App* pre = app.add_subcommand("preprocess", "Clean a raw JSONL corpus");
    pre->add_option("--in", cfg.input, "Raw JSONL corpus")->required();
    pre->add_option("--out", cfg.out, "Cleaned JSONL output")->required();
    pre->add_option("--report", cfg.report, "Write the kept/dropped report here too");

    CLI::App* bv = app.add_subcommand("build-vocab", "Count tokens and write the vocabulary file");
    bv->add_option("--corpus", cfg.corpus, "Cleaned JSONL corpus")->required();
    bv->add_option("--out", cfg.out, "Vocabulary file to write")->required();
    bv->add_option("--vocab-size", cfg.vocab_size, "Vocabulary size cap");
    add_config_flag(bv, cfg);

    CLI::App* tr = app.add_subcommand("train", "Run the two-phase training loop");
    tr->add_option("--corpus", cfg.corpus, "Cleaned JSONL corpus")->required();
    tr->add_option("--vocab", cfg.vocab, "Vocabulary file")->required();
    tr->add_option("--checkpoint-dir", cfg.checkpoint_dir, "Checkpoint directory")->required();
    tr->add_option("--loss-csv", cfg.loss_csv, "Loss history CSV (default: <ckpt>/loss.csv)");
    add_model_flags(tr, cfg);
    tr->add_option("--lr", cfg.lr, "Adagrad learning rate");
    tr->add_option("--coverage-weight", cfg.coverage_weight, "Coverage penalty weight (phase 2)");
    tr->add_option("--clip-norm", cfg.clip_norm, "Global gradient norm cap");
    tr->add_option("--adagrad-init-acc", cfg.adagrad_init_acc, "Adagrad accumulator init");
    tr->add_option("--batch-size", cfg.batch_size, "Batch size");
    tr->add_option("--phase1-steps", cfg.phase1_steps, "Steps without coverage");
    tr->add_option("--phase2-steps", cfg.phase2_steps, "Steps with coverage");
    tr->add_option("--checkpoint-every", cfg.checkpoint_every, "Checkpoint interval");
    tr->add_option("--seed", cfg.seed, "Training seed");
    add_config_flag(tr, cfg);

    CLI::App* su = app.add_subcommand("summarize", "Decode articles with beam search");
    su->add_option("--checkpoint-dir", cfg.checkpoint_dir, "Checkpoint directory")->required();
    su->add_option("--vocab", cfg.vocab, "Vocabulary file")->required();
    su->add_option("--input", cfg.input, "JSONL file with 'article' fields");
    su->add_option("--text", cfg.text, "Summarize this single article");
    su->add_option("--out", cfg.out, "Output file ('-' for stdout)");
    su->add_option("--beam", cfg.beam, "Beam width");
    su->add_option("--min-dec", cfg.min_dec, "Minimum summary length");
    su->add_option("--threads", cfg.threads, "Parallel decode workers");
    su->add_option("--coverage", cfg.coverage_mode, "auto|on|off (default: checkpoint phase)");
    add_model_flags(su, cfg);
    add_config_flag(su, cfg);

    CLI::App* ev = app.add_subcommand("evaluate", "ROUGE evaluation of decoded summaries");
    ev->add_option("--checkpoint-dir", cfg.checkpoint_dir, "Checkpoint directory");
    ev->add_option("--vocab", cfg.vocab, "Vocabulary file");
    ev->add_option("--corpus", cfg.corpus, "JSONL corpus with references")->required();
    ev->add_option("--sample", cfg.sample, "Evaluate a random sample of N examples (0 = all)");
    ev->add_option("--seed", cfg.seed, "Sampling seed");
    ev->add_option("--split", cfg.split, "all|train|val|test (hash split)");
    ev->add_option("--candidates", cfg.candidates, "Skip decoding; score these summaries");
    ev->add_option("--report", cfg.report, "Write the metric CSV here too");
    ev->add_option("--per-example", cfg.per_example, "Per-example TSV");
    ev->add_option("--beam", cfg.beam, "Beam width");
    ev->add_option("--min-dec", cfg.min_dec, "Minimum summary length");
    ev->add_option("--threads", cfg.threads, "Parallel decode workers");
    ev->add_option("--coverage", cfg.coverage_mode, "auto|on|off (default: checkpoint phase)");
    add_model_flags(ev, cfg);
    add_config_flag(ev, cfg);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (pre->parsed()) return cmd_preprocess(cfg);
        if (bv->parsed()) {
            apply_config_file(bv, cfg);
            return cmd_build_vocab(cfg);
        }
        if (tr->parsed()) {
            apply_config_file(tr, cfg);
            return cmd_train(tr, cfg);
        }
        if (su->parsed()) {
            apply_config_file(su, cfg);
            return cmd_summarize(su, cfg);
        }
        if (ev->parsed()) {
            apply_config_file(ev, cfg);
            return cmd_evaluate(ev, cfg);
        }
        return 1;
    } catch (const CheckpointMismatchError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 4;
    } catch (const NumericalError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    } catch (const IoError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const CorruptionError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const EncodingError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << '\n';
        return 1;
    }
}
