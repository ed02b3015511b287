// Command-line front end for the scene-embedding pipeline:
//   preprocess -> cooccur -> train -> query / mask-eval
// Exit codes: 0 success, 1 usage/config error, 2 data error, 3 numeric failure.

#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "scenevec/cooccur.hpp"
#include "scenevec/corpus.hpp"
#include "scenevec/embedding.hpp"
#include "scenevec/errors.hpp"
#include "scenevec/eval.hpp"
#include "scenevec/train.hpp"
#include "scenevec/vector_io.hpp"

namespace {

using namespace scenevec;

std::ifstream open_input(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open input file: " + path);
    return in;
}

std::ofstream open_output(const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open output file: " + path);
    return out;
}

void add_config_support(CLI::App* cmd, bool& emit_config) {
    cmd->add_flag("--emit-config", emit_config,
                  "Print the fully resolved configuration and exit");
}

bool handle_emit_config(CLI::App* cmd, bool emit_config) {
    if (!emit_config) return false;
    std::cout << cmd->config_to_str(true, true);
    return true;
}

// ---------------------------------------------------------------- preprocess

struct PreprocessOptions {
    std::string annotations;
    std::string class_names;
    std::string out_sentences;
    std::string out_vocab;
    std::int64_t min_count = 10;
    std::string scan = "horizontal";
    ColumnMap columns;
    bool emit_config = false;
};

void run_preprocess(const PreprocessOptions& opt) {
    auto in = open_input(opt.annotations);
    AnnotationBatch batch = parse_annotations(in, opt.columns);

    if (!opt.class_names.empty()) {
        auto names_in = open_input(opt.class_names);
        apply_label_names(batch.boxes, load_label_names(names_in));
    }

    for (std::size_t e = 0; e < batch.errors.size(); ++e) {
        if (e == 20) {
            std::cerr << "... " << (batch.errors.size() - e) << " more row errors\n";
            break;
        }
        std::cerr << opt.annotations << ":" << batch.errors[e].line << ": "
                  << batch.errors[e].message << '\n';
    }

    Vocabulary vocab = build_vocabulary(batch.boxes, opt.min_count);
    const ScanAxis axis = opt.scan == "vertical" ? ScanAxis::Vertical : ScanAxis::Horizontal;

    auto groups = group_by_image(batch.boxes);
    std::vector<SceneSentence> sentences;
    sentences.reserve(groups.size());
    for (const auto& [image_id, boxes] : groups) {
        sentences.push_back(scan_image(image_id, boxes, axis, vocab));
    }

    {
        auto out = open_output(opt.out_sentences);
        save_sentences(out, sentences);
    }
    {
        auto out = open_output(opt.out_vocab);
        vocab.save(out);
    }

    std::int64_t retained_boxes = 0;
    for (int id = 0; id < vocab.size(); ++id) retained_boxes += vocab.count(id);
    std::cout << "images: " << groups.size() << '\n'
              << "boxes: " << batch.boxes.size() << '\n'
              << "boxes in vocabulary: " << retained_boxes << '\n'
              << "rejected rows: " << batch.errors.size() << '\n'
              << "retained classes: " << vocab.size() << '\n';
}

// ------------------------------------------------------------------ cooccur

struct CooccurOptions {
    std::string sentences;
    std::string vocab;
    std::string out_dir;
    int window = 10;
    std::string mode = "unit";
    int threads = 1;
    std::size_t shard_records = 1u << 20;
    std::string text_dump;
    bool emit_config = false;
};

void run_cooccur(const CooccurOptions& opt) {
    auto vocab_in = open_input(opt.vocab);
    Vocabulary vocab = Vocabulary::load(vocab_in);
    auto sentences_in = open_input(opt.sentences);
    auto sentences = load_sentences(sentences_in);

    const auto mode = opt.mode == "harmonic" ? CooccurWeighting::Harmonic : CooccurWeighting::Unit;
    CooccurTable table = accumulate(sentences, vocab.size(), opt.window, mode, opt.threads);
    save_shards(table, opt.out_dir, opt.shard_records);

    if (!opt.text_dump.empty()) {
        auto out = open_output(opt.text_dump);
        export_text(table, out);
    }

    std::cout << "sentences: " << sentences.size() << '\n'
              << "nonzero entries: " << table.nonzero_count() << '\n'
              << "total weight: " << table.total_weight() << '\n';
}

// -------------------------------------------------------------------- train

struct TrainOptions {
    std::string shards;
    std::string vocab;
    std::string out_vectors;
    bool binary = false;
    TrainConfig config;
    std::string output_mode = "sum";
    int checkpoint_every = 0;
    std::string checkpoint_path;
    std::string resume_path;
    bool quiet = false;
    bool emit_config = false;
};

void run_train(const TrainOptions& opt) {
    auto vocab_in = open_input(opt.vocab);
    Vocabulary vocab = Vocabulary::load(vocab_in);
    CooccurTable table = load_shards(opt.shards);
    if (table.vocab_size() != vocab.size()) {
        throw DataError("shards were built for V = " + std::to_string(table.vocab_size()) +
                        " but the vocabulary has " + std::to_string(vocab.size()) + " entries");
    }

    TrainConfig cfg = opt.config;
    cfg.output_mode = opt.output_mode == "main" ? OutputMode::MainOnly
                                                : OutputMode::SumMainContext;
    cfg.validate();
    if (table.nonzero_count() == 0) throw DataError("co-occurrence table is empty");
    if (table.vocab_size() < 2) throw DataError("training requires a vocabulary of at least 2");

    ModelParams params;
    int first_epoch = 0;
    if (!opt.resume_path.empty()) {
        Checkpoint checkpoint = load_checkpoint(opt.resume_path);
        if (checkpoint.params.vocab_size() != table.vocab_size()) {
            throw DataError("checkpoint vocabulary size does not match the shards");
        }
        if (checkpoint.config.dim != cfg.dim) {
            throw DataError("checkpoint dimension " + std::to_string(checkpoint.config.dim) +
                            " does not match --dim " + std::to_string(cfg.dim));
        }
        params = std::move(checkpoint.params);
        first_epoch = checkpoint.epochs_done;
    } else {
        params = init_params(table.vocab_size(), cfg.dim, cfg.seed);
    }

    EpochCallback after_epoch = [&](int epoch, const ModelParams& snapshot) {
        if (!opt.quiet) std::cerr << "epoch " << (epoch + 1) << "/" << cfg.epochs << '\n';
        if (opt.checkpoint_every > 0 && !opt.checkpoint_path.empty() &&
            (epoch + 1) % opt.checkpoint_every == 0) {
            save_checkpoint(opt.checkpoint_path, {cfg, epoch + 1, snapshot});
            auto out = open_output(opt.checkpoint_path + ".txt");
            save_vectors_text(out, {vocab.labels(), finalize(snapshot, cfg.output_mode)});
        }
    };

    TrainReport report = train_epochs(params, table, cfg, first_epoch, after_epoch);

    LabeledVectors vectors{vocab.labels(), finalize(params, cfg.output_mode)};
    auto out = open_output(opt.out_vectors);
    if (opt.binary) {
        save_vectors_binary(out, vectors);
    } else {
        save_vectors_text(out, vectors);
    }

    if (!report.epoch_mean_loss.empty()) {
        std::cout << "epochs: " << report.epoch_mean_loss.size() << '\n'
                  << "first epoch mean loss: " << report.epoch_mean_loss.front() << '\n'
                  << "final epoch mean loss: " << report.epoch_mean_loss.back() << '\n';
    }
    std::cout << "entries processed: " << report.entries_processed << '\n'
              << "wall seconds: " << report.wall_seconds << '\n';
}

// -------------------------------------------------------------------- query

struct QueryOptions {
    std::string vectors;
    std::string vocab;
    std::string out;
    std::string label;
    std::string anchor_a;
    std::string anchor_b;
    std::vector<std::string> labels;
    int k = 10;
    std::int64_t min_count = 0;
    bool emit_config = false;
};

EmbeddingStore load_store(const QueryOptions& opt) {
    EmbeddingStore store = EmbeddingStore::load(opt.vectors);
    if (!opt.vocab.empty()) {
        auto vocab_in = open_input(opt.vocab);
        store.attach_counts(Vocabulary::load(vocab_in));
    }
    return store;
}

std::ostream& query_output(const QueryOptions& opt, std::ofstream& file) {
    if (opt.out.empty() || opt.out == "-") return std::cout;
    file = open_output(opt.out);
    return file;
}

void run_knn(const QueryOptions& opt) {
    EmbeddingStore store = load_store(opt);
    NeighborList list = nearest_neighbors(store, opt.label, opt.k, opt.min_count);
    std::ofstream file;
    auto& out = query_output(opt, file);
    char buffer[64];
    for (std::size_t r = 0; r < list.neighbors.size(); ++r) {
        std::snprintf(buffer, sizeof(buffer), "%.6f", list.neighbors[r].distance);
        out << (r + 1) << '\t' << list.neighbors[r].label << '\t' << buffer << '\n';
    }
}

void run_project(const QueryOptions& opt) {
    EmbeddingStore store = load_store(opt);
    AxisProjection projection = project_axis(store, opt.anchor_a, opt.anchor_b, opt.labels);
    std::ofstream file;
    auto& out = query_output(opt, file);
    char buffer[64];
    out << "label,coordinate\n";
    for (const auto& [label, coordinate] : projection.coordinates) {
        std::snprintf(buffer, sizeof(buffer), "%.17g", coordinate);
        out << label << ',' << buffer << '\n';
    }
}

void run_pca(const QueryOptions& opt) {
    EmbeddingStore store = load_store(opt);
    auto points = pca_2d(store, opt.labels);
    std::ofstream file;
    auto& out = query_output(opt, file);
    char buffer[128];
    out << "label,x,y\n";
    for (const auto& point : points) {
        std::snprintf(buffer, sizeof(buffer), "%.17g,%.17g", point.x, point.y);
        out << point.label << ',' << buffer << '\n';
    }
}

void run_enrich(const QueryOptions& opt) {
    EmbeddingStore store = load_store(opt);
    std::cout << enrich_prompt(store, opt.label, opt.k) << '\n';
}

// ---------------------------------------------------------------- mask-eval

struct MaskEvalOptions {
    std::string vectors;
    std::string sentences;
    std::vector<int> ks = {1, 5, 10};
    std::string dump;
    std::string jsonl;
    int threads = 1;
    bool emit_config = false;
};

void run_mask_eval(const MaskEvalOptions& opt) {
    EmbeddingStore store = EmbeddingStore::load(opt.vectors);
    auto sentences_in = open_input(opt.sentences);
    auto sentences = load_sentences(sentences_in);

    std::ofstream dump_file;
    std::ostream* dump = nullptr;
    if (!opt.dump.empty()) {
        dump_file = open_output(opt.dump);
        dump = &dump_file;
    }

    MaskingReport report = evaluate(store, sentences, opt.ks, opt.threads, dump);
    print_report(std::cout, report, &store.labels());
    if (!opt.jsonl.empty()) {
        if (opt.jsonl == "-") {
            write_report_jsonl(std::cout, report);
        } else {
            auto out = open_output(opt.jsonl);
            write_report_jsonl(out, report);
        }
    }

    auto baseline = random_baseline(store.size(), opt.ks);
    std::cout << "random baseline:";
    char buffer[64];
    for (std::size_t i = 0; i < opt.ks.size(); ++i) {
        std::snprintf(buffer, sizeof(buffer), " acc@%d=%.3f", opt.ks[i], baseline[i]);
        std::cout << buffer;
    }
    std::cout << '\n';
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Scene-based object embeddings from detection annotations"};
    app.require_subcommand(1);
    app.set_config("--config", "",
                   "INI config file with one section per subcommand, e.g. [train]");

    PreprocessOptions pre;
    auto* cmd_pre = app.add_subcommand(
        "preprocess", "Turn annotation CSVs into scene sentences and a vocabulary");
    cmd_pre->add_option("--annotations", pre.annotations, "Annotation CSV with box coordinates")
        ->required()
        ->check(CLI::ExistingFile);
    cmd_pre->add_option("--class-names", pre.class_names,
                        "Optional label,name CSV for readable labels")
        ->check(CLI::ExistingFile);
    cmd_pre->add_option("--out-sentences", pre.out_sentences, "Sentence file to write")->required();
    cmd_pre->add_option("--out-vocab", pre.out_vocab, "Vocabulary file to write")->required();
    cmd_pre->add_option("--min-count", pre.min_count, "Discard classes seen fewer times")
        ->envname("SCENEVEC_MIN_COUNT")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    cmd_pre->add_option("--scan", pre.scan, "Scan axis")
        ->check(CLI::IsMember({"horizontal", "vertical"}))
        ->capture_default_str();
    cmd_pre->add_option("--col-image-id", pre.columns.image_id)->capture_default_str();
    cmd_pre->add_option("--col-label", pre.columns.label)->capture_default_str();
    cmd_pre->add_option("--col-xmin", pre.columns.x_min)->capture_default_str();
    cmd_pre->add_option("--col-xmax", pre.columns.x_max)->capture_default_str();
    cmd_pre->add_option("--col-ymin", pre.columns.y_min)->capture_default_str();
    cmd_pre->add_option("--col-ymax", pre.columns.y_max)->capture_default_str();
    add_config_support(cmd_pre, pre.emit_config);

    CooccurOptions co;
    auto* cmd_co = app.add_subcommand("cooccur", "Accumulate windowed co-occurrence shards");
    cmd_co->add_option("--sentences", co.sentences, "Sentence file from preprocess")
        ->required()
        ->check(CLI::ExistingFile);
    cmd_co->add_option("--vocab", co.vocab, "Vocabulary file from preprocess")
        ->required()
        ->check(CLI::ExistingFile);
    cmd_co->add_option("--out", co.out_dir, "Directory for binary shards")->required();
    cmd_co->add_option("--window", co.window, "Window size in tokens")
        ->envname("SCENEVEC_WINDOW")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    cmd_co->add_option("--mode", co.mode, "Pair weighting")
        ->check(CLI::IsMember({"unit", "harmonic"}))
        ->capture_default_str();
    cmd_co->add_option("--threads", co.threads, "Worker threads")
        ->envname("SCENEVEC_THREADS")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    cmd_co->add_option("--shard-records", co.shard_records, "Max records per shard")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    cmd_co->add_option("--text-dump", co.text_dump, "Also write an `i j weight` text dump");
    add_config_support(cmd_co, co.emit_config);

    TrainOptions tr;
    auto* cmd_tr = app.add_subcommand("train", "Fit embedding vectors to co-occurrence shards");
    cmd_tr->add_option("--shards", tr.shards, "Shard directory from cooccur")->required();
    cmd_tr->add_option("--vocab", tr.vocab, "Vocabulary file from preprocess")
        ->required()
        ->check(CLI::ExistingFile);
    cmd_tr->add_option("--out", tr.out_vectors, "Vector file to write")->required();
    cmd_tr->add_flag("--binary", tr.binary, "Write the binary vector format");
    cmd_tr->add_option("--dim", tr.config.dim, "Embedding dimension")
        ->envname("SCENEVEC_DIM")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    cmd_tr->add_option("--epochs", tr.config.epochs, "Training epochs")
        ->envname("SCENEVEC_EPOCHS")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    cmd_tr->add_option("--xmax", tr.config.x_max, "Weighting cutoff x_max")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    cmd_tr->add_option("--alpha", tr.config.alpha, "Weighting exponent in (0,1]")
        ->check(CLI::Range(std::numeric_limits<double>::min(), 1.0))
        ->capture_default_str();
    cmd_tr->add_option("--eta", tr.config.initial_step, "Initial step size")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    cmd_tr->add_option("--seed", tr.config.seed, "Seed for init and shuffling")
        ->envname("SCENEVEC_SEED")
        ->capture_default_str();
    cmd_tr->add_option("--threads", tr.config.threads,
                       "Worker threads (>1 forfeits bit-determinism)")
        ->envname("SCENEVEC_THREADS")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    cmd_tr->add_option("--output-mode", tr.output_mode, "Published vectors: main+context or main")
        ->check(CLI::IsMember({"sum", "main"}))
        ->capture_default_str();
    cmd_tr->add_option("--checkpoint-every", tr.checkpoint_every,
                       "Checkpoint cadence in epochs (0 disables)")
        ->capture_default_str();
    cmd_tr->add_option("--checkpoint", tr.checkpoint_path, "Checkpoint file to write");
    cmd_tr->add_option("--resume", tr.resume_path, "Resume from a binary checkpoint")
        ->check(CLI::ExistingFile);
    cmd_tr->add_flag("--quiet", tr.quiet, "Suppress per-epoch progress");
    add_config_support(cmd_tr, tr.emit_config);

    QueryOptions qu;
    auto* cmd_qu = app.add_subcommand("query", "Query a trained embedding");
    cmd_qu->require_subcommand(1);

    auto add_query_common = [&](CLI::App* sub) {
        sub->add_option("--vectors", qu.vectors, "Vector file (text or binary)")
            ->required()
            ->check(CLI::ExistingFile);
        sub->add_option("--out", qu.out, "Output file (default stdout)");
    };

    auto* cmd_knn = cmd_qu->add_subcommand("knn", "k nearest neighbors by cosine distance");
    add_query_common(cmd_knn);
    cmd_knn->add_option("--label", qu.label, "Query label")->required();
    cmd_knn->add_option("-k,--k", qu.k, "Neighbor count")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    cmd_knn->add_option("--min-count", qu.min_count,
                        "Exclude candidates seen fewer times (needs --vocab)")
        ->check(CLI::NonNegativeNumber);
    cmd_knn->add_option("--vocab", qu.vocab, "Vocabulary file carrying counts")
        ->check(CLI::ExistingFile);
    add_config_support(cmd_knn, qu.emit_config);

    auto* cmd_project = cmd_qu->add_subcommand("project", "Project labels on an anchor axis");
    add_query_common(cmd_project);
    cmd_project->add_option("--anchor-a", qu.anchor_a, "Axis start label")->required();
    cmd_project->add_option("--anchor-b", qu.anchor_b, "Axis end label")->required();
    cmd_project->add_option("--labels", qu.labels, "Labels to project (default all)")
        ->delimiter(',');
    add_config_support(cmd_project, qu.emit_config);

    auto* cmd_pca = cmd_qu->add_subcommand("pca", "2-D principal component export");
    add_query_common(cmd_pca);
    cmd_pca->add_option("--labels", qu.labels, "Labels to project (default all)")->delimiter(',');
    add_config_support(cmd_pca, qu.emit_config);

    auto* cmd_enrich = cmd_qu->add_subcommand("enrich", "Neighbor-enriched prompt string");
    add_query_common(cmd_enrich);
    cmd_enrich->add_option("--label", qu.label, "Prompt object")->required();
    cmd_enrich->add_option("-k,--k", qu.k, "Neighbors to append")
        ->check(CLI::NonNegativeNumber)
        ->capture_default_str();
    add_config_support(cmd_enrich, qu.emit_config);

    MaskEvalOptions me;
    auto* cmd_me = app.add_subcommand("mask-eval", "Masked-label prediction accuracy");
    cmd_me->add_option("--vectors", me.vectors, "Vector file (text or binary)")
        ->required()
        ->check(CLI::ExistingFile);
    cmd_me->add_option("--sentences", me.sentences, "Sentence file to evaluate on")
        ->required()
        ->check(CLI::ExistingFile);
    cmd_me->add_option("--ks", me.ks, "Cutoffs for acc@k, ascending")
        ->delimiter(',')
        ->capture_default_str();
    cmd_me->add_option("--dump", me.dump, "Per-instance TSV: image_id, answer, rank");
    cmd_me->add_option("--jsonl", me.jsonl, "JSON-lines report path (- for stdout)");
    cmd_me->add_option("--threads", me.threads, "Worker threads")
        ->envname("SCENEVEC_THREADS")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    add_config_support(cmd_me, me.emit_config);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    try {
        if (cmd_pre->parsed()) {
            if (!handle_emit_config(cmd_pre, pre.emit_config)) run_preprocess(pre);
        } else if (cmd_co->parsed()) {
            if (!handle_emit_config(cmd_co, co.emit_config)) run_cooccur(co);
        } else if (cmd_tr->parsed()) {
            if (!handle_emit_config(cmd_tr, tr.emit_config)) run_train(tr);
        } else if (cmd_qu->parsed()) {
            CLI::App* sub = cmd_qu->get_subcommands().front();
            if (!handle_emit_config(sub, qu.emit_config)) {
                if (sub == cmd_knn) run_knn(qu);
                else if (sub == cmd_project) run_project(qu);
                else if (sub == cmd_pca) run_pca(qu);
                else run_enrich(qu);
            }
        } else if (cmd_me->parsed()) {
            if (!handle_emit_config(cmd_me, me.emit_config)) run_mask_eval(me);
        }
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 1;
    } catch (const NumericError& e) {
        std::cerr << "numeric error: " << e.what() << '\n';
        return 3;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 0;
}
