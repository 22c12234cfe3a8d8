// facegame command-line tool: AU model training, the game server, dataset
// export, co-occurrence, statistics, the CNN harness and fixture generation.

#include <csignal>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <pthread.h>
#include <random>
#include <thread>

#include <CLI11.hpp>

#include "facegame/au/classifier.hpp"
#include "facegame/au/model_io.hpp"
#include "facegame/au/training_data.hpp"
#include "facegame/explain/dictionary.hpp"
#include "facegame/ferlab/experiment.hpp"
#include "facegame/forge/cooccurrence.hpp"
#include "facegame/forge/dataset.hpp"
#include "facegame/game/http_api.hpp"
#include "facegame/game/store.hpp"
#include "facegame/stats/analysis.hpp"
#include "facegame/synth/expression_set.hpp"

namespace fs = std::filesystem;
using namespace facegame;

namespace {

/// Accepts a decimal ("0.3333") or a fraction ("1/3").
double parse_threshold(const std::string& s)
{
    double v = 0.0;
    try {
        const auto slash = s.find('/');
        if (slash == std::string::npos) {
            std::size_t used = 0;
            v = std::stod(s, &used);
            if (used != s.size()) throw std::invalid_argument(s);
        } else {
            std::size_t used_n = 0, used_d = 0;
            const std::string num = s.substr(0, slash), den = s.substr(slash + 1);
            const double n = std::stod(num, &used_n), d = std::stod(den, &used_d);
            if (used_n != num.size() || used_d != den.size() || d == 0.0) throw std::invalid_argument(s);
            v = n / d;
        }
    } catch (const std::logic_error&) {
        throw BadRequest("threshold '" + s + "' is neither a number nor a fraction");
    }
    forge::check_threshold(v);
    return v;
}

void write_text(const std::string& out, const std::string& text)
{
    if (out.empty() || out == "-") {
        std::cout << text;
        return;
    }
    const fs::path p(out);
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    std::ofstream f(p, std::ios::trunc);
    if (!f) throw StoreError("cannot write " + out);
    f << text;
    if (!f) throw StoreError("write failed for " + out);
}

std::vector<std::uint64_t> parse_seeds(const std::string& s)
{
    std::vector<std::uint64_t> out;
    std::size_t at = 0;
    while (at <= s.size() && !s.empty()) {
        const auto comma = s.find(',', at);
        const auto part = s.substr(at, comma == std::string::npos ? std::string::npos : comma - at);
        try {
            std::size_t used = 0;
            out.push_back(std::stoull(part, &used));
            if (used != part.size()) throw std::invalid_argument(part);
        } catch (const std::logic_error&) {
            throw BadRequest("bad seed '" + part + "'");
        }
        if (comma == std::string::npos) break;
        at = comma + 1;
    }
    return out;
}

// ---- train-au ---------------------------------------------------------------------------

struct TrainAuArgs
{
    std::string data, out;
    au::AuTrainOptions opt;
};

int run_train_au(const TrainAuArgs& a)
{
    const auto data = au::load_au_training_set(a.data);
    std::printf("training on %zu examples\n", data.size());
    const auto result = au::train(data, a.opt);
    au::save_model(result.model, a.out);
    for (std::size_t k = 0; k < kAuCount; ++k) {
        std::printf("AU%-3d final loss %.5f\n", ActionUnit::from_index(k).code(), result.final_loss[k]);
    }
    std::printf("model written to %s\n", a.out.c_str());
    return 0;
}

// ---- serve ------------------------------------------------------------------------------

struct ServeArgs
{
    std::string host = "127.0.0.1";
    int port = 8080;
    std::string targets, model, store, dictionary = FACEGAME_DATA_DIR "/au_dictionary.json", static_dir;
    int attempts = 5;
    std::string mode = "experiment";
    std::uint64_t seed = 0;
};

int run_serve(const ServeArgs& a)
{
    auto classifier = std::make_shared<au::ReferenceAuClassifier>(au::load_model(a.model));
    auto dictionary = std::make_shared<explain::AuDictionary>(explain::load_dictionary(a.dictionary));
    auto catalog = std::make_shared<game::TargetCatalog>();
    game::load_target_dir(a.targets, *classifier, *catalog);
    auto store = std::make_shared<game::RecordStore>(a.store);

    game::ServiceConfig cfg;
    cfg.max_attempts = a.attempts;
    cfg.mode = game::parse_play_mode(a.mode);
    cfg.seed = a.seed;
    cfg.targets_dir = a.targets;
    game::GameService service(cfg, catalog, classifier, dictionary, store);
    game::HttpApi api(service);
    if (!a.static_dir.empty() && !api.mount_static(a.static_dir)) {
        throw BadRequest("static directory not found: " + a.static_dir);
    }

    // SIGINT/SIGTERM are taken synchronously by a watcher thread
    sigset_t signals;
    sigemptyset(&signals);
    sigaddset(&signals, SIGINT);
    sigaddset(&signals, SIGTERM);
    pthread_sigmask(SIG_BLOCK, &signals, nullptr);
    std::jthread watcher([&] {
        int sig = 0;
        sigwait(&signals, &sig);
        api.stop();
    });

    const int port = api.bind(a.host, a.port);
    std::printf("%zu targets, %s mode, %d attempts per round\n", catalog->size(), a.mode.c_str(), a.attempts);
    std::printf("listening on http://%s:%d\n", a.host.c_str(), port);
    std::fflush(stdout);
    api.run();
    pthread_kill(watcher.native_handle(), SIGTERM); // release the watcher if the server stopped on its own
    return 0;
}

// ---- export / cooccur / stats -------------------------------------------------------------

int run_export(const std::string& store, const std::string& threshold, const std::string& out, bool strict)
{
    const double tau = parse_threshold(threshold);
    const auto records = game::read_records(store);
    const auto m = forge::export_dataset(records, tau, store, out, strict);
    std::printf("%zu of %zu records kept (%s, threshold %.6g)\n", m.entries.size(), records.size(), forge::kKeepRule, tau);
    if (!m.missing_frames.empty()) std::printf("%zu records without a frame\n", m.missing_frames.size());
    std::printf("dataset written to %s\n", out.c_str());
    return 0;
}

int run_cooccur(const std::string& store, const std::string& threshold, const std::string& out)
{
    const double tau = parse_threshold(threshold);
    const auto m = forge::cooccurrence(game::read_records(store), tau);
    const auto raster = forge::render_heatmap(m, out);
    std::printf("%zu records counted; matrix in %s, heatmap in %s\n", m.records_used, out.c_str(),
                raster.string().c_str());
    return 0;
}

int run_stats(const std::string& store, const std::string& out)
{
    write_text(out, stats::analysis_report(game::read_records(store)));
    if (!out.empty() && out != "-") std::printf("report written to %s\n", out.c_str());
    return 0;
}

// ---- train-fer / experiment ------------------------------------------------------------

struct FerArgs
{
    std::size_t size = 48;
    int epochs = 20;
    double lr = 0.05;
    std::size_t batch = 32;
    std::uint64_t seed = 1;
};

ferlab::CnnConfig cnn_config(const FerArgs& a)
{
    ferlab::CnnConfig cfg;
    cfg.input_size = a.size;
    ferlab::validate_config(cfg);
    return cfg;
}

ferlab::TrainOptions train_options(const FerArgs& a)
{
    ferlab::TrainOptions t;
    t.epochs = a.epochs;
    t.lr = a.lr;
    t.batch_size = a.batch;
    t.seed = a.seed;
    return t;
}

int run_train_fer(const std::string& data_dir, const std::string& out, const FerArgs& a)
{
    const auto cfg = cnn_config(a);
    const auto data = ferlab::load_image_dir(data_dir, cfg.input_size);
    if (data.empty()) throw BadRequest("no labelled images in " + data_dir);
    std::printf("training on %zu images (%zux%zu)\n", data.size(), cfg.input_size, cfg.input_size);
    auto model = ferlab::build_model(cfg, a.seed);
    const auto h = ferlab::train_cnn(model, data.images(), data.labels(), train_options(a));
    for (std::size_t e = 0; e < h.epochs.size(); ++e) {
        std::printf("epoch %3zu  loss %.5f  accuracy %.4f\n", e + 1, h.epochs[e].loss, h.epochs[e].accuracy);
    }
    ferlab::save_cnn(model, out);
    std::printf("model written to %s\n", out.c_str());
    return 0;
}

struct ExperimentArgs
{
    std::string base, extra, out, seeds;
    std::size_t k = 5, n_train = 200, n_test = 50, threads = 1;
    FerArgs fer;
};

int run_experiment(const ExperimentArgs& a)
{
    ferlab::ExperimentOptions opt;
    opt.k = a.k;
    opt.seeds = parse_seeds(a.seeds);
    opt.n_train = a.n_train;
    opt.n_test = a.n_test;
    opt.cnn = cnn_config(a.fer);
    opt.train = train_options(a.fer);
    opt.threads = a.threads;
    const auto base = ferlab::load_image_dir(a.base, opt.cnn.input_size);
    const auto extra = a.extra.empty() ? ferlab::LabeledImageSet("none")
                                       : ferlab::load_image_dir(a.extra, opt.cnn.input_size);
    const auto report = ferlab::run_enrichment_experiment(base, extra, opt);
    write_text(a.out, ferlab::format_enrichment_report(report));
    if (!a.out.empty() && a.out != "-") std::printf("report written to %s\n", a.out.c_str());
    return 0;
}

// ---- synth ----------------------------------------------------------------------------

struct SynthArgs
{
    std::string out;
    std::uint64_t seed = 1;
    std::size_t au_train = 240;
    std::size_t fer_base = 0, fer_extra = 0, fer_size = 48;
};

void synth_au_train(const fs::path& dir, std::size_t n, std::mt19937_64& rng)
{
    fs::create_directories(dir / "images");
    std::ofstream manifest(dir / "manifest.jsonl", std::ios::trunc);
    for (std::size_t i = 0; i < n; ++i) {
        const auto spec = synth::random_face_spec(rng);
        const auto face = synth::render_face(spec);
        const std::string rel = "images/" + std::to_string(i) + ".pgm";
        write_pgm(dir / rel, face.image);
        manifest << au::to_json(au::AuManifestEntry{rel, face.landmarks, spec.aus}).dump() << '\n';
    }
}

void synth_targets(const fs::path& dir)
{
    for (auto e : kAllEmotions) {
        synth::FaceSpec spec;
        spec.aus = synth::prototype_aus(e);
        const auto face = synth::render_face(spec);
        TargetEntry t;
        t.target_id = "t-" + std::string(to_string(e));
        t.image = face.image;
        t.landmarks = face.landmarks;
        t.emotion = e;
        t.au_set = spec.aus;
        game::save_target(dir, t);
    }
}

int run_synth(const SynthArgs& a)
{
    const fs::path out(a.out);
    std::mt19937_64 rng(a.seed);
    if (a.au_train > 0) {
        synth_au_train(out / "au-train", a.au_train, rng);
        std::printf("%zu AU training faces in %s\n", a.au_train, (out / "au-train").c_str());
    }
    synth_targets(out / "targets");
    std::printf("%zu targets in %s\n", kEmotionCount, (out / "targets").c_str());
    if (a.fer_base > 0) {
        ferlab::save_image_dir(synth::expression_set(a.fer_base, a.fer_size, a.seed + 1, "fer-base"), out / "fer-base");
        std::printf("%zu expression images per class in %s\n", a.fer_base, (out / "fer-base").c_str());
    }
    if (a.fer_extra > 0) {
        ferlab::save_image_dir(synth::expression_set(a.fer_extra, a.fer_size, a.seed + 2, "fer-extra"), out / "fer-extra");
        std::printf("%zu expression images per class in %s\n", a.fer_extra, (out / "fer-extra").c_str());
    }
    return 0;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"facegame: expression-imitation game server and dataset tools"};
    app.require_subcommand(1);

    TrainAuArgs tau;
    auto* train_au = app.add_subcommand("train-au", "train the reference AU classifier");
    train_au->add_option("--data", tau.data, "AU training manifest (JSON lines)")->required()->check(CLI::ExistingFile);
    train_au->add_option("--l2", tau.opt.l2, "L2 penalty")->capture_default_str();
    train_au->add_option("--lr", tau.opt.lr, "learning rate")->capture_default_str();
    train_au->add_option("--epochs", tau.opt.epochs, "full-batch epochs")->capture_default_str();
    train_au->add_option("--seed", tau.opt.seed, "initialization seed")->capture_default_str();
    train_au->add_option("--out", tau.out, "model file")->required();

    ServeArgs sv;
    auto* serve = app.add_subcommand("serve", "run the game server");
    serve->add_option("--host", sv.host)->capture_default_str();
    serve->add_option("--port", sv.port, "0 picks a free port")->capture_default_str();
    serve->add_option("--targets", sv.targets, "target directory")->required()->check(CLI::ExistingDirectory);
    serve->add_option("--model", sv.model, "AU model file")->required()->check(CLI::ExistingFile);
    serve->add_option("--store", sv.store, "record store directory")->required();
    serve->add_option("--dictionary", sv.dictionary, "prescription dictionary")->capture_default_str();
    serve->add_option("--attempts", sv.attempts, "attempts per round")->capture_default_str();
    serve->add_option("--mode", sv.mode, "experiment | free")->capture_default_str();
    serve->add_option("--seed", sv.seed, "session randomization seed")->capture_default_str();
    serve->add_option("--static", sv.static_dir, "serve browser client files from this directory");

    std::string ex_store, ex_threshold = "1/3", ex_out;
    bool ex_strict = false;
    auto* exp = app.add_subcommand("export", "export the quality-filtered dataset");
    exp->add_option("--store", ex_store)->required()->check(CLI::ExistingDirectory);
    exp->add_option("--threshold", ex_threshold, "keep score >= threshold; decimal or fraction")->capture_default_str();
    exp->add_option("--out", ex_out)->required();
    exp->add_flag("--strict", ex_strict, "fail on records whose frame is missing");

    std::string co_store, co_threshold = "1/3", co_out;
    auto* co = app.add_subcommand("cooccur", "emotion x AU co-occurrence matrix and heatmap");
    co->add_option("--store", co_store)->required()->check(CLI::ExistingDirectory);
    co->add_option("--threshold", co_threshold)->capture_default_str();
    co->add_option("--out", co_out, "matrix text file; the heatmap goes next to it as .pgm")->required();

    std::string st_store, st_out;
    auto* st = app.add_subcommand("stats", "score-trajectory analysis report");
    st->add_option("--store", st_store)->required()->check(CLI::ExistingDirectory);
    st->add_option("--out", st_out, "report file, '-' for stdout")->capture_default_str();

    std::string tf_data, tf_out;
    FerArgs tf;
    auto* train_fer = app.add_subcommand("train-fer", "train the CNN on a labelled image directory");
    train_fer->add_option("--data", tf_data)->required()->check(CLI::ExistingDirectory);
    train_fer->add_option("--epochs", tf.epochs)->capture_default_str();
    train_fer->add_option("--lr", tf.lr)->capture_default_str();
    train_fer->add_option("--batch", tf.batch)->capture_default_str();
    train_fer->add_option("--size", tf.size, "input side, multiple of 8")->capture_default_str();
    train_fer->add_option("--seed", tf.seed)->capture_default_str();
    train_fer->add_option("--out", tf_out)->required();

    ExperimentArgs ea;
    auto* ex = app.add_subcommand("experiment", "paired CNN runs without / with extra training data");
    ex->add_option("--base", ea.base)->required()->check(CLI::ExistingDirectory);
    ex->add_option("--extra", ea.extra)->check(CLI::ExistingDirectory);
    ex->add_option("--k", ea.k, "repetitions")->capture_default_str();
    ex->add_option("--seeds", ea.seeds, "comma-separated, one per repetition (default 1..k)");
    ex->add_option("--n-train", ea.n_train, "training instances per class")->capture_default_str();
    ex->add_option("--n-test", ea.n_test, "test instances per class")->capture_default_str();
    ex->add_option("--epochs", ea.fer.epochs)->capture_default_str();
    ex->add_option("--lr", ea.fer.lr)->capture_default_str();
    ex->add_option("--batch", ea.fer.batch)->capture_default_str();
    ex->add_option("--size", ea.fer.size)->capture_default_str();
    ex->add_option("--threads", ea.threads, "repetitions run concurrently")->capture_default_str();
    ex->add_option("--out", ea.out, "report file, '-' for stdout")->capture_default_str();

    SynthArgs sy;
    auto* syn = app.add_subcommand("synth", "write synthetic fixtures: AU training faces, targets, expression sets");
    syn->add_option("--out", sy.out)->required();
    syn->add_option("--seed", sy.seed)->capture_default_str();
    syn->add_option("--au-train", sy.au_train, "AU training faces (0 to skip)")->capture_default_str();
    syn->add_option("--fer-base", sy.fer_base, "expression images per class for fer-base/")->capture_default_str();
    syn->add_option("--fer-extra", sy.fer_extra, "expression images per class for fer-extra/")->capture_default_str();
    syn->add_option("--fer-size", sy.fer_size)->capture_default_str();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*train_au) return run_train_au(tau);
        if (*serve) return run_serve(sv);
        if (*exp) return run_export(ex_store, ex_threshold, ex_out, ex_strict);
        if (*co) return run_cooccur(co_store, co_threshold, co_out);
        if (*st) return run_stats(st_store, st_out);
        if (*train_fer) return run_train_fer(tf_data, tf_out, tf);
        if (*ex) return run_experiment(ea);
        if (*syn) return run_synth(sy);
    } catch (const Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
    return 0;
}
