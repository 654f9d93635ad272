// Command-line front end: prepare / train / evaluate / predict / gradcheck.

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "ser/checkpoint.hpp"
#include "ser/error.hpp"
#include "ser/eval.hpp"
#include "ser/gradcheck.hpp"
#include "ser/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct CliOptions {
    ser::RunConfig config;
    std::string model_name = "mha-2";
    std::string attention_mode_name = "strict";
    std::string config_file;
    std::string manifest;
    std::string prepared;
    std::string out_dir = ".";
    std::string checkpoint;
    std::string vocab_path;
    std::string out_file;
    std::size_t fold = 0;
};

void add_config_options(CLI::App* cmd, CliOptions& o) {
    cmd->add_option("--config", o.config_file, "key=value config file; flags override it");
    cmd->add_option("--model", o.model_name,
                    "audio-bre | text-bre | mha-1 | mha-2 | mha-3");
    cmd->add_option("--d_h_audio", o.config.d_h_audio, "audio LSTM hidden size");
    cmd->add_option("--d_h_text", o.config.d_h_text, "text LSTM hidden size");
    cmd->add_option("--d_e", o.config.d_e, "token embedding dim");
    cmd->add_option("--d_p", o.config.d_p, "prosodic vector dim (0 disables)");
    cmd->add_option("--layers", o.config.layers, "recurrent layers per direction");
    cmd->add_option("--dropout_rate", o.config.dropout_rate, "dropout rate in [0,1)");
    cmd->add_option("--learning_rate", o.config.learning_rate, "Adam learning rate");
    cmd->add_option("--clip_norm", o.config.clip_norm, "global gradient norm cap");
    cmd->add_option("--adam_beta1", o.config.adam_beta1, "Adam beta1");
    cmd->add_option("--adam_beta2", o.config.adam_beta2, "Adam beta2");
    cmd->add_option("--adam_epsilon", o.config.adam_epsilon, "Adam epsilon");
    cmd->add_option("--batch_size", o.config.batch_size, "minibatch size");
    cmd->add_option("--max_epochs", o.config.max_epochs, "epoch cap");
    cmd->add_option("--patience", o.config.patience,
                    "early-stop patience on dev WA (0 disables)");
    cmd->add_option("--seed", o.config.seed, "master seed");
    cmd->add_option("--max_audio_len", o.config.max_audio_len, "audio frame cap");
    cmd->add_option("--max_text_len", o.config.max_text_len, "token cap");
    cmd->add_option("--n_folds", o.config.n_folds, "cross-validation folds");
    cmd->add_flag("--group_by_session", o.config.group_by_session,
                  "assign whole sessions to folds");
    cmd->add_option("--attention_mode", o.attention_mode_name, "strict | projected");
    cmd->add_option("--mfcc_dim", o.config.mfcc_dim,
                    "expected manifest mfcc_dim (0 accepts any)");
}

// The config file is the base layer; explicitly passed flags override it.
void apply_config_file(const CLI::App* cmd, CliOptions& o) {
    if (o.config_file.empty()) return;
    std::ifstream in(o.config_file);
    if (!in) throw ser::ConfigError("cannot read config file " + o.config_file);

    auto set_size = [](std::size_t& f) {
        return [&f](const std::string& v) { f = std::stoull(v); };
    };
    auto set_double = [](double& f) {
        return [&f](const std::string& v) { f = std::stod(v); };
    };
    auto set_string = [](std::string& f) {
        return [&f](const std::string& v) { f = v; };
    };
    const std::map<std::string, std::function<void(const std::string&)>> setters{
        {"model", set_string(o.model_name)},
        {"d_h_audio", set_size(o.config.d_h_audio)},
        {"d_h_text", set_size(o.config.d_h_text)},
        {"d_e", set_size(o.config.d_e)},
        {"d_p", set_size(o.config.d_p)},
        {"layers", set_size(o.config.layers)},
        {"dropout_rate", set_double(o.config.dropout_rate)},
        {"learning_rate", set_double(o.config.learning_rate)},
        {"clip_norm", set_double(o.config.clip_norm)},
        {"adam_beta1", set_double(o.config.adam_beta1)},
        {"adam_beta2", set_double(o.config.adam_beta2)},
        {"adam_epsilon", set_double(o.config.adam_epsilon)},
        {"batch_size", set_size(o.config.batch_size)},
        {"max_epochs", set_size(o.config.max_epochs)},
        {"patience", set_size(o.config.patience)},
        {"seed", [&o](const std::string& v) { o.config.seed = std::stoull(v); }},
        {"max_audio_len", set_size(o.config.max_audio_len)},
        {"max_text_len", set_size(o.config.max_text_len)},
        {"n_folds", set_size(o.config.n_folds)},
        {"group_by_session",
         [&o](const std::string& v) {
             if (v == "true" || v == "1")
                 o.config.group_by_session = true;
             else if (v == "false" || v == "0")
                 o.config.group_by_session = false;
             else
                 throw ser::ConfigError("group_by_session must be true or false, got " + v);
         }},
        {"attention_mode", set_string(o.attention_mode_name)},
        {"mfcc_dim", set_size(o.config.mfcc_dim)},
    };

    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        const std::size_t first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos) continue;
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw ser::ConfigError(o.config_file + ":" + std::to_string(lineno) +
                                   ": expected key=value");
        auto trim = [](std::string s) {
            const auto b = s.find_first_not_of(" \t\r");
            const auto e = s.find_last_not_of(" \t\r");
            return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
        };
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        auto it = setters.find(key);
        if (it == setters.end())
            throw ser::ConfigError(o.config_file + ":" + std::to_string(lineno) +
                                   ": unknown key '" + key + "'");
        if (cmd->count("--" + key) > 0) continue;  // explicit flag wins
        try {
            it->second(value);
        } catch (const ser::ConfigError&) {
            throw;
        } catch (const std::exception&) {
            throw ser::ConfigError(o.config_file + ":" + std::to_string(lineno) +
                                   ": bad value '" + value + "' for " + key);
        }
    }
}

void finalize_config(const CLI::App* cmd, CliOptions& o) {
    apply_config_file(cmd, o);
    o.config.model = ser::model_kind_from_string(o.model_name);
    o.config.attention_mode = ser::attention_mode_from_string(o.attention_mode_name);
    o.config.validate();
}

ser::LoadedDataset load_dataset(const CliOptions& o, const fs::path& manifest) {
    std::optional<std::size_t> expect_mfcc;
    if (o.config.mfcc_dim > 0) expect_mfcc = o.config.mfcc_dim;
    std::optional<std::size_t> expect_prosody;
    if (o.config.d_p > 0) expect_prosody = o.config.d_p;
    return ser::load_manifest(manifest, expect_mfcc, expect_prosody);
}

void write_text(const fs::path& path, const std::string& content) {
    std::ofstream out(path);
    if (!out) throw ser::RuntimeFailure("cannot write " + path.string());
    out << content;
}

json fold_record(const ser::FoldSplit& fold, const std::vector<ser::Utterance>& utts) {
    auto ids = [&](const std::vector<std::size_t>& idx) {
        std::vector<std::string> v;
        v.reserve(idx.size());
        for (std::size_t i : idx) v.push_back(utts[i].id);
        return v;
    };
    return json{{"fold", fold.fold_index},
                {"train", ids(fold.train)},
                {"dev", ids(fold.dev)},
                {"test", ids(fold.test)}};
}

// ---- prepare ---------------------------------------------------------------

int cmd_prepare(const CLI::App* cmd, CliOptions& o) {
    finalize_config(cmd, o);
    const fs::path out_dir(o.out_dir);
    fs::create_directories(out_dir);

    ser::LoadedDataset ds = load_dataset(o, o.manifest);

    std::map<std::string, std::size_t> class_counts;
    for (const ser::Utterance& u : ds.utterances) class_counts[to_string(u.label)] += 1;

    json report{{"total_accepted", ds.utterances.size()},
                {"total_rejected", ds.rejected.size()},
                {"class_counts", class_counts},
                {"rejected", json::array()}};
    for (const ser::RejectedUtterance& r : ds.rejected)
        report["rejected"].push_back({{"id", r.id}, {"reason", r.reason}});

    std::ostringstream text;
    text << "accepted " << ds.utterances.size() << " utterances, rejected "
         << ds.rejected.size() << "\n";
    for (const char* name : {"angry", "happy", "sad", "neutral"})
        text << "  " << name << ": " << class_counts[name] << "\n";
    if (ds.utterances.empty())
        text << "warning: no utterance carries a usable 4-class label; nothing to train on\n";

    if (!ds.utterances.empty()) {
        if (ds.utterances.size() < o.config.n_folds)
            throw ser::DataError("prepare: " + std::to_string(ds.utterances.size()) +
                                 " utterances cannot fill " +
                                 std::to_string(o.config.n_folds) + " folds");
        const auto folds = ser::make_folds(ds.utterances, o.config.n_folds,
                                           ser::Rng(o.config.seed), o.config.group_by_session);
        json folds_json{{"seed", o.config.seed},
                        {"n_folds", o.config.n_folds},
                        {"group_by_session", o.config.group_by_session},
                        {"folds", json::array()}};
        for (const ser::FoldSplit& f : folds) {
            folds_json["folds"].push_back(fold_record(f, ds.utterances));
            const ser::Vocabulary vocab = ser::build_vocabulary(ds.utterances, f.train);
            vocab.save(out_dir / ("vocab_fold" + std::to_string(f.fold_index) + ".txt"));
        }
        write_text(out_dir / "folds.json", folds_json.dump(2) + "\n");
    }

    json meta{{"manifest", fs::absolute(o.manifest).string()},
              {"seed", o.config.seed},
              {"n_folds", o.config.n_folds},
              {"group_by_session", o.config.group_by_session},
              {"mfcc_dim", ds.header.mfcc_dim},
              {"prosody_dim", ds.header.prosody_dim},
              {"compute_deltas", ds.header.compute_deltas},
              {"feature_dim", ds.feature_dim},
              {"utterance_count", ds.utterances.size()},
              {"config", o.config.to_json()}};
    write_text(out_dir / "meta.json", meta.dump(2) + "\n");
    write_text(out_dir / "report.json", report.dump(2) + "\n");
    write_text(out_dir / "report.txt", text.str());
    std::cout << text.str();
    return 0;
}

// ---- shared prepared-dir plumbing -------------------------------------------

struct Prepared {
    json meta;
    ser::LoadedDataset dataset;
    std::vector<ser::FoldSplit> folds;
};

Prepared load_prepared(CliOptions& o) {
    const fs::path dir(o.prepared);
    std::ifstream meta_in(dir / "meta.json");
    if (!meta_in)
        throw ser::DataError("prepared dir " + dir.string() + " has no meta.json "
                             "(run `ser prepare` first)");
    Prepared p;
    meta_in >> p.meta;

    p.dataset = load_dataset(o, p.meta.at("manifest").get<std::string>());
    if (p.dataset.utterances.empty())
        throw ser::DataError("prepared dataset is empty");

    // The fold protocol is fixed at prepare time; training/eval seeds may differ.
    p.folds = ser::make_folds(p.dataset.utterances, p.meta.at("n_folds").get<std::size_t>(),
                              ser::Rng(p.meta.at("seed").get<std::uint64_t>()),
                              p.meta.at("group_by_session").get<bool>());
    return p;
}

ser::Vocabulary fold_vocabulary(const CliOptions& o, std::size_t fold) {
    return ser::Vocabulary::load(fs::path(o.prepared) /
                                 ("vocab_fold" + std::to_string(fold) + ".txt"));
}

// ---- train -------------------------------------------------------------------

int cmd_train(const CLI::App* cmd, CliOptions& o) {
    finalize_config(cmd, o);
    Prepared p = load_prepared(o);
    if (o.fold >= p.folds.size())
        throw ser::ConfigError("fold " + std::to_string(o.fold) + " out of range (have " +
                               std::to_string(p.folds.size()) + ")");
    const ser::FoldSplit& fold = p.folds[o.fold];
    const ser::Vocabulary vocab = fold_vocabulary(o, o.fold);

    const auto train = ser::prepare_samples(p.dataset.utterances, fold.train, vocab, o.config);
    const auto dev = ser::prepare_samples(p.dataset.utterances, fold.dev, vocab, o.config);
    ser::DataDims dims{p.dataset.feature_dim, o.config.d_p, vocab.size()};

    ser::TrainResult result =
        ser::train_model(train, dev, o.config, dims,
                         ser::Rng(o.config.seed).derive("fold", o.fold));

    const fs::path out_dir(o.out_dir);
    fs::create_directories(out_dir);
    const std::string tag = "fold" + std::to_string(o.fold);
    ser::save_checkpoint(out_dir / ("checkpoint_" + tag + ".bin"), result.best_params,
                         o.config, vocab.hash());

    std::ostringstream log;
    log << std::setprecision(17);
    json epochs = json::array();
    for (const ser::EpochLog& e : result.log) {
        log << "epoch " << e.epoch << " train_loss_sum " << e.train_loss_sum
            << " train_loss_mean " << e.train_loss_mean << " dev_wa " << e.dev_wa
            << " dev_ua " << e.dev_ua << "\n";
        epochs.push_back({{"epoch", e.epoch},
                          {"train_loss_sum", e.train_loss_sum},
                          {"train_loss_mean", e.train_loss_mean},
                          {"dev_wa", e.dev_wa},
                          {"dev_ua", e.dev_ua}});
    }
    log << "best epoch " << result.best_epoch << " dev_wa " << result.best_dev_wa << "\n";
    write_text(out_dir / ("train_" + tag + ".log"), log.str());
    write_text(out_dir / ("train_" + tag + ".json"),
               json{{"config", o.config.to_json()},
                    {"fold", o.fold},
                    {"best_epoch", result.best_epoch},
                    {"best_dev_wa", result.best_dev_wa},
                    {"best_dev_ua", result.best_dev_ua},
                    {"epochs", epochs}}
                       .dump(2) +
                   "\n");
    std::cout << "fold " << o.fold << ": trained " << result.log.size()
              << " epochs, best dev WA " << result.best_dev_wa << " at epoch "
              << result.best_epoch << "\n"
              << "checkpoint: " << (out_dir / ("checkpoint_" + tag + ".bin")).string()
              << "\n";
    return 0;
}

// ---- evaluate ------------------------------------------------------------------

int cmd_evaluate(const CLI::App* cmd, CliOptions& o) {
    finalize_config(cmd, o);
    Prepared p = load_prepared(o);

    ser::CrossValidationResult cv =
        ser::cross_validate(p.dataset.utterances, p.dataset.feature_dim, o.config, p.folds);

    const fs::path out_dir(o.out_dir);
    fs::create_directories(out_dir);

    std::ostringstream text;
    text << std::fixed << std::setprecision(3);
    json folds_json = json::array();
    for (const ser::FoldOutcome& f : cv.folds) {
        if (f.failed) {
            text << "fold " << f.fold_index << ": FAILED (" << f.diagnostics << ")\n";
            folds_json.push_back(
                {{"fold", f.fold_index}, {"failed", true}, {"diagnostics", f.diagnostics}});
            continue;
        }
        text << "fold " << f.fold_index << ": WA " << f.report.wa << " / UA " << f.report.ua
             << " (test " << f.test_count << ", best epoch " << f.best_epoch << ")\n";
        json rec = f.report.to_json();
        rec["fold"] = f.fold_index;
        rec["failed"] = false;
        rec["test_count"] = f.test_count;
        rec["best_epoch"] = f.best_epoch;
        folds_json.push_back(rec);
        write_text(out_dir / ("eval_fold" + std::to_string(f.fold_index) + ".json"),
                   folds_json.back().dump(2) + "\n");
    }
    text << "aggregate over " << cv.evaluated_folds << " folds: WA " << cv.mean_wa
         << " / UA " << cv.mean_ua << "\n";
    if (cv.excluded_folds > 0)
        text << "excluded " << cv.excluded_folds << " failed fold(s) from the aggregate\n";

    write_text(out_dir / "eval_aggregate.json",
               json{{"config", o.config.to_json()},
                    {"seed", o.config.seed},
                    {"mean_wa", cv.mean_wa},
                    {"mean_ua", cv.mean_ua},
                    {"evaluated_folds", cv.evaluated_folds},
                    {"excluded_folds", cv.excluded_folds},
                    {"folds", folds_json}}
                       .dump(2) +
                   "\n");
    write_text(out_dir / "report.txt", text.str());
    std::cout << text.str();
    return 0;
}

// ---- predict --------------------------------------------------------------------

int cmd_predict(CliOptions& o) {
    ser::Checkpoint ckpt = ser::load_checkpoint(o.checkpoint);
    const ser::Vocabulary vocab = ser::Vocabulary::load(o.vocab_path);
    if (vocab.hash() != ckpt.vocab_hash)
        throw ser::DataError("predict: vocabulary " + o.vocab_path +
                             " does not match the checkpoint's vocabulary hash");
    if (vocab.size() != ckpt.dims.vocab_size)
        throw ser::DataError("predict: vocabulary size mismatch");

    CliOptions load_opts = o;
    load_opts.config = ckpt.config;
    ser::LoadedDataset ds = load_dataset(load_opts, o.manifest);
    if (ds.feature_dim != ckpt.dims.audio_feature_dim)
        throw ser::DataError("predict: manifest feature dim " +
                             std::to_string(ds.feature_dim) + " != checkpoint's " +
                             std::to_string(ckpt.dims.audio_feature_dim));

    std::vector<std::size_t> all(ds.utterances.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    const auto samples = ser::prepare_samples(ds.utterances, all, vocab, ckpt.config);

    std::ostringstream out;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        ser::ForwardResult f =
            ser::forward_sample(ckpt.params, samples[i], 0.0, false, ser::Rng(0));
        std::size_t arg = 0;
        std::vector<double> probs(4);
        for (std::size_t c = 0; c < 4; ++c) {
            probs[c] = f.probabilities(c);
            if (probs[c] > probs[arg]) arg = c;
        }
        json rec{{"id", ds.utterances[i].id},
                 {"label", to_string(ser::label_from_index(arg))},
                 {"true_label", to_string(ds.utterances[i].label)},
                 {"probabilities", probs}};
        json hops = json::array();
        const std::vector<bool>* masks[3] = {&samples[i].token_mask, &samples[i].audio_mask,
                                             &samples[i].token_mask};
        for (std::size_t h = 0; h < f.hop_trace.size(); ++h) {
            std::vector<double> w;
            for (std::size_t t = 0; t < f.hop_trace[h].weights.numel(); ++t)
                if ((*masks[h])[t]) w.push_back(f.hop_trace[h].weights(t));
            hops.push_back(w);
        }
        rec["attention"] = hops;
        out << rec.dump() << "\n";
    }
    if (!o.out_file.empty())
        write_text(o.out_file, out.str());
    else
        std::cout << out.str();
    return 0;
}

// ---- gradcheck ---------------------------------------------------------------------

int cmd_gradcheck(CliOptions& o) {
    std::ostringstream text;
    bool all_pass = true;
    for (const ser::GradCheckReport& r : ser::gradcheck_all(o.config.seed)) {
        text << r.to_text();
        all_pass = all_pass && r.pass;
    }
    text << (all_pass ? "gradcheck: ALL PASS\n" : "gradcheck: FAILURES PRESENT\n");
    if (!o.out_file.empty()) write_text(o.out_file, text.str());
    std::cout << text.str();
    return 0;  // failures are report content, not an error
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"multimodal speech emotion classifier (BRE encoders + multi-hop attention)"};
    app.require_subcommand(1);
    CliOptions opts;

    CLI::App* config_cmd = app.add_subcommand("config", "configuration helpers");
    config_cmd->require_subcommand(1);
    CLI::App* dump_cmd = config_cmd->add_subcommand("dump", "print all defaults as key=value");

    CLI::App* prepare = app.add_subcommand("prepare", "validate a manifest, build folds and "
                                                      "per-fold vocabularies");
    prepare->add_option("--manifest", opts.manifest, "dataset manifest (JSONL)")->required();
    prepare->add_option("--out", opts.out_dir, "output directory")->required();
    add_config_options(prepare, opts);

    CLI::App* train = app.add_subcommand("train", "train one fold, saving the best-dev "
                                                  "checkpoint");
    train->add_option("--prepared", opts.prepared, "directory from `prepare`")->required();
    train->add_option("--fold", opts.fold, "fold index");
    train->add_option("--out", opts.out_dir, "output directory")->required();
    add_config_options(train, opts);

    CLI::App* evaluate = app.add_subcommand("evaluate", "cross-validate and report WA/UA "
                                                        "plus confusion matrices");
    evaluate->add_option("--prepared", opts.prepared, "directory from `prepare`")->required();
    evaluate->add_option("--out", opts.out_dir, "output directory")->required();
    add_config_options(evaluate, opts);

    CLI::App* predict = app.add_subcommand("predict", "label a manifest with a trained "
                                                      "checkpoint");
    predict->add_option("--checkpoint", opts.checkpoint, "checkpoint file")->required();
    predict->add_option("--manifest", opts.manifest, "dataset manifest (JSONL)")->required();
    predict->add_option("--vocab", opts.vocab_path, "vocabulary file")->required();
    predict->add_option("--out", opts.out_file, "output JSONL (default stdout)");

    CLI::App* gradcheck = app.add_subcommand("gradcheck", "compare analytic gradients with "
                                                          "finite differences on all variants");
    gradcheck->add_option("--seed", opts.config.seed, "seed for the tiny models");
    gradcheck->add_option("--out", opts.out_file, "write the report here too");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (dump_cmd->parsed()) {
            std::cout << ser::RunConfig{}.dump();
            return 0;
        }
        if (prepare->parsed()) return cmd_prepare(prepare, opts);
        if (train->parsed()) return cmd_train(train, opts);
        if (evaluate->parsed()) return cmd_evaluate(evaluate, opts);
        if (predict->parsed()) return cmd_predict(opts);
        if (gradcheck->parsed()) return cmd_gradcheck(opts);
    } catch (const ser::ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
