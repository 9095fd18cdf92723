// sno: dataset generation, training, evaluation, super-resolution, transform
// inspection and runtime benchmarking from one executable.

#include "sno/archive.hpp"
#include "sno/datagen.hpp"
#include "sno/error.hpp"
#include "sno/evalbench.hpp"
#include "sno/hash.hpp"
#include "sno/model.hpp"
#include "sno/parallel.hpp"
#include "sno/polycore.hpp"
#include "sno/trainer.hpp"
#include "sno/version.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace sno;

namespace {

constexpr const char* kExitCodes =
    "Exit codes:\n"
    "  0  success\n"
    "  1  unexpected internal error\n"
    "  2  configuration, spec or command-line error\n"
    "  3  numerical fault or solver failure\n"
    "  4  file format, version or shape mismatch\n"
    "\n"
    "SNO_THREADS sets the worker count when --threads is not given.";

int exit_code(ErrorKind kind) {
    switch (kind) {
    case ErrorKind::NumericalFault:
    case ErrorKind::SolverDiverged:
    case ErrorKind::CFLViolation:
    case ErrorKind::IllConditioned:
    case ErrorKind::ZeroTarget:
    case ErrorKind::DegenerateChannel:
    case ErrorKind::ExtrapolationOutOfRange:
    case ErrorKind::ClockTooCoarse:
    case ErrorKind::GradientMissing:
    case ErrorKind::NoTape:
        return 3;
    case ErrorKind::FormatError:
    case ErrorKind::ChecksumError:
    case ErrorKind::ShapeMismatch:
        return 4;
    default:
        return 2;
    }
}

struct Common {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out;
    int threads = 0;
    std::optional<std::size_t> resolution;
    std::optional<int> degree;
};

void add_common(CLI::App* app, Common& c, bool out_required = true) {
    app->add_option("--config", c.config, "JSON config file")->check(CLI::ExistingFile);
    app->add_option("--seed", c.seed, "RNG seed (overrides the config)");
    auto* out = app->add_option("--out", c.out, "output directory");
    if (out_required) out->required();
    app->add_option("--threads", c.threads, "worker threads (default: SNO_THREADS or 1)");
}

json read_json_file(const std::string& path) {
    std::ifstream in(path);
    require(static_cast<bool>(in), ErrorKind::IoError, "cannot open " + path);
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        fail(ErrorKind::ParseError, path + ": " + e.what());
    }
}

std::string hex(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

std::string file_hash(const fs::path& p) { return hex(fnv1a(nn::read_file_bytes(p))); }

void write_text(const fs::path& p, const std::string& s) { nn::write_file_bytes(p, {s.begin(), s.end()}); }

class Manifest {
public:
    Manifest(std::string command, const Common& c, std::vector<std::string> argv)
        : dir_(c.out) {
        j_["command"] = std::move(command);
        j_["argv"] = std::move(argv);
        j_["config_path"] = c.config;
        j_["output_dir"] = c.out;
        j_["tool_version"] = kVersion;
        j_["inputs"] = json::object();
        j_["outputs"] = json::object();
        j_["status"] = "running";
    }
    void set(const std::string& key, json v) { j_[key] = std::move(v); }
    void input(const fs::path& p) { j_["inputs"][p.string()] = file_hash(p); }
    void output(const fs::path& p) { j_["outputs"][p.filename().string()] = file_hash(p); }
    void write() {
        fs::create_directories(dir_);
        write_text(dir_ / "manifest.json", j_.dump(2) + "\n");
    }
    void finish() {
        j_["status"] = "complete";
        write();
    }

private:
    fs::path dir_;
    json j_;
};

data::TaskDataset load_data(const std::string& path, std::optional<std::size_t> resolution) {
    auto ds = data::load_dataset(path);
    if (resolution) {
        const std::size_t n = ds.grid_points.size();
        require(*resolution >= 2 && n % *resolution == 0, ErrorKind::GridIncompatible,
                "--resolution " + std::to_string(*resolution) + " does not divide " + std::to_string(n));
        ds = data::subsample(ds, n / *resolution);
    }
    return ds;
}

// --- gen --------------------------------------------------------------------

int cmd_gen(const Common& c, const std::vector<std::string>& argv) {
    require(!c.config.empty(), ErrorKind::ConfigError, "gen needs --config <task spec>");
    json j = read_json_file(c.config);
    if (c.seed) j["seed"] = *c.seed;
    if (c.resolution) j["resolution"] = *c.resolution;
    const auto spec = data::spec_from_json(j);
    const unsigned threads = resolve_threads(c.threads);

    Manifest m("gen", c, argv);
    m.set("seed", spec.seed);
    m.set("spec", data::to_json(spec));
    m.input(c.config);
    m.write();

    const auto ds = data::build_dataset(spec, threads);
    const fs::path out = fs::path(c.out) / "dataset.snod";
    data::save_dataset(ds, out);
    m.output(out);
    m.finish();
    std::cout << "wrote " << out.string() << " inputs " << nn::shape_string(ds.inputs.shape())
              << " outputs " << nn::shape_string(ds.outputs.shape()) << " train " << ds.n_train
              << " test " << ds.n_test() << "\n";
    return 0;
}

// --- train ------------------------------------------------------------------

struct TrainFlags {
    std::string data;
    std::optional<int> epochs;
    std::optional<std::size_t> batch_size;
    std::optional<double> lr;
    int checkpoint_every = -1;
    bool quiet = false;
};

int cmd_train(const Common& c, const TrainFlags& f, const std::vector<std::string>& argv) {
    json j = c.config.empty() ? json::object() : read_json_file(c.config);
    std::string data_path = f.data;
    if (j.contains("dataset")) {
        require(j.at("dataset").is_string(), ErrorKind::ConfigError, "'dataset' must be a path");
        if (data_path.empty()) {
            data_path = j.at("dataset").get<std::string>();
            if (fs::path(data_path).is_relative() && !c.config.empty())
                data_path = (fs::path(c.config).parent_path() / data_path).string();
        }
        j.erase("dataset");
    }
    require(!data_path.empty(), ErrorKind::ConfigError, "train needs --data or a 'dataset' entry");
    auto cfg = train::train_config_from_json(j);
    if (c.seed) cfg.seed = cfg.model.seed = *c.seed;
    if (c.degree) cfg.model.degree = *c.degree;
    if (f.epochs) cfg.epochs = *f.epochs;
    if (f.batch_size) cfg.batch_size = *f.batch_size;
    if (f.lr) cfg.lr = *f.lr;
    if (f.checkpoint_every >= 0) cfg.checkpoint_every = f.checkpoint_every;

    auto ds = load_data(data_path, c.resolution);
    cfg.model.in_channels = static_cast<int>(ds.inputs.dim(1));
    cfg.model.out_channels = static_cast<int>(ds.outputs.dim(1));
    cfg.checkpoint_path = fs::path(c.out) / "model.snot";
    cfg.validate();

    Manifest m("train", c, argv);
    m.set("seed", cfg.seed);
    m.set("train_config", train::to_json(cfg));
    m.set("dataset", data_path);
    m.input(data_path);
    if (!c.config.empty()) m.input(c.config);
    m.write();

    if (!ds.normalized) ds = train::normalize(std::move(ds));
    auto model = model::init_model(cfg.model);
    const auto report = train::train(model, ds, cfg, [&](const train::EpochRecord& r) {
        if (!f.quiet && (r.epoch == 1 || r.epoch % 10 == 0 || r.epoch == cfg.epochs))
            std::fprintf(stderr, "epoch %d  train %.6g  test %.6g  %.2fs\n", r.epoch, r.train_loss,
                         r.test_rel_l2, r.seconds);
    });
    const fs::path csv = fs::path(c.out) / "train.csv";
    train::write_train_csv(report, csv);
    const auto& last = report.epochs.back();
    json summary = {{"epochs", report.epochs.size()},
                    {"final_train_loss", last.train_loss},
                    {"final_test_rel_l2", last.test_rel_l2},
                    {"parameters", model::parameter_count(cfg.model)},
                    {"checkpoint", report.final_checkpoint.string()}};
    write_text(fs::path(c.out) / "train_summary.json", summary.dump(2) + "\n");
    m.output(csv);
    m.output(cfg.checkpoint_path);
    m.finish();
    std::cout << "final test rel-L2 " << last.test_rel_l2 << ", checkpoint "
              << report.final_checkpoint.string() << "\n";
    return 0;
}

// --- eval / superres ----------------------------------------------------------

int cmd_eval(const Common& c, const std::string& checkpoint, const std::string& data_path,
             const std::vector<std::string>& argv) {
    Manifest m("eval", c, argv);
    m.set("checkpoint", checkpoint);
    m.set("dataset", data_path);
    m.input(checkpoint);
    m.input(data_path);
    m.write();

    const auto model = model::load_checkpoint(checkpoint);
    const auto ds = load_data(data_path, c.resolution);
    const auto report = eval::evaluate(model, ds, resolve_threads(c.threads));
    const fs::path dir(c.out);
    write_text(dir / "eval.csv", eval::eval_csv(report));
    write_text(dir / "eval_summary.json", eval::eval_summary(report).dump(2) + "\n");
    eval::write_flat_grid(dir / "worst_error.f64", report.worst_error);
    eval::write_flat_grid(dir / "median_error.f64", report.median_error);
    m.output(dir / "eval.csv");
    m.finish();
    std::printf("mean %.9g  median %.9g  max %.9g  (%zu samples)\n", report.mean, report.median,
                report.max, report.per_sample.size());
    return 0;
}

std::vector<std::size_t> parse_sizes(const std::string& s) {
    std::vector<std::size_t> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            std::size_t used = 0;
            const auto v = std::stoull(item, &used);
            require(used == item.size(), ErrorKind::ConfigError, "bad size '" + item + "'");
            out.push_back(static_cast<std::size_t>(v));
        } catch (const std::logic_error&) {
            fail(ErrorKind::ConfigError, "bad size '" + item + "'");
        }
    }
    require(!out.empty(), ErrorKind::ConfigError, "empty size list");
    return out;
}

int cmd_superres(const Common& c, const std::string& checkpoint, const std::string& data_path,
                 std::size_t base, const std::string& resolutions,
                 const std::vector<std::string>& argv) {
    const auto eval_ns = parse_sizes(resolutions);
    Manifest m("superres", c, argv);
    m.set("checkpoint", checkpoint);
    m.set("dataset", data_path);
    m.set("base_resolution", base);
    m.set("resolutions", eval_ns);
    m.input(checkpoint);
    m.input(data_path);
    m.write();

    const auto model = model::load_checkpoint(checkpoint);
    const auto fine = data::load_dataset(data_path);
    const auto report = eval::superres_eval(model, fine, base, eval_ns, resolve_threads(c.threads));
    const fs::path dir(c.out);
    write_text(dir / "superres.csv", eval::superres_csv(report));
    json summary = {{"base_resolution", report.base_resolution}, {"base_rel_l2", report.base_rel_l2}};
    for (const auto& r : report.rows)
        summary["rows"].push_back({{"resolution", r.resolution},
                                   {"model_rel_l2", r.model_rel_l2},
                                   {"baseline_rel_l2", r.baseline_rel_l2}});
    write_text(dir / "superres_summary.json", summary.dump(2) + "\n");
    m.output(dir / "superres.csv");
    m.finish();
    std::cout << eval::superres_csv(report);
    return 0;
}

// --- bench --------------------------------------------------------------------

int cmd_bench(const Common& c, const std::string& sizes, const std::string& methods,
              std::size_t reps, const std::vector<std::string>& argv) {
    eval::BenchOptions opt;
    if (c.degree) opt.degree = *c.degree;
    opt.reps = reps;
    const auto ns = parse_sizes(sizes);
    std::vector<eval::Method> ms;
    std::stringstream ss(methods);
    for (std::string item; std::getline(ss, item, ',');) ms.push_back(eval::parse_method(item));

    Manifest m("bench", c, argv);
    m.set("sizes", ns);
    m.set("degree", opt.degree);
    m.set("reps", reps);
    m.set("methods", methods);
    m.write();

    std::vector<eval::RuntimeReport> reports;
    for (auto method : ms) reports.push_back(eval::runtime_bench(method, ns, opt));
    const fs::path dir(c.out);
    write_text(dir / "bench.csv", eval::runtime_csv(reports));
    write_text(dir / "bench_summary.json", eval::runtime_summary(reports).dump(2) + "\n");
    m.output(dir / "bench.csv");
    m.finish();
    for (const auto& r : reports)
        std::printf("%-14s log-log slope %.3f\n", std::string(eval::to_string(r.method)).c_str(),
                    r.slope);
    return 0;
}

// --- transform ----------------------------------------------------------------

struct Signal {
    std::vector<double> t;
    std::vector<double> f;
};

Signal read_signal_csv(const std::string& path) {
    std::ifstream in(path);
    require(static_cast<bool>(in), ErrorKind::IoError, "cannot open " + path);
    Signal s;
    std::size_t cols = 0, line_no = 0;
    for (std::string line; std::getline(in, line);) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.find_first_not_of(" \t") == std::string::npos) continue;
        std::vector<double> vals;
        std::stringstream ls(line);
        for (std::string cell; std::getline(ls, cell, ',');) {
            const auto b = cell.find_first_not_of(" \t");
            const auto e = cell.find_last_not_of(" \t");
            const std::string v = b == std::string::npos ? "" : cell.substr(b, e - b + 1);
            char* end = nullptr;
            const double d = std::strtod(v.c_str(), &end);
            require(!v.empty() && end == v.c_str() + v.size() && std::isfinite(d),
                    ErrorKind::ParseError,
                    path + ":" + std::to_string(line_no) + ": non-numeric value '" + v + "'");
            vals.push_back(d);
        }
        require(vals.size() == 1 || vals.size() == 2, ErrorKind::ParseError,
                path + ":" + std::to_string(line_no) + ": expected 1 or 2 columns");
        if (cols == 0) cols = vals.size();
        require(vals.size() == cols, ErrorKind::ParseError,
                path + ":" + std::to_string(line_no) + ": inconsistent column count");
        if (cols == 1) {
            s.t.push_back(static_cast<double>(s.f.size()));
            s.f.push_back(vals[0]);
        } else {
            s.t.push_back(vals[0]);
            s.f.push_back(vals[1]);
        }
    }
    require(s.f.size() >= 2, ErrorKind::ParseError, path + ": need at least two samples");
    return s;
}

int cmd_transform(const std::string& input, std::optional<int> degree, const std::string& out) {
    const auto sig = read_signal_csv(input);
    const poly::Grid grid(sig.t);
    const int d = degree.value_or(std::min<int>(poly::kDefaultDegree, static_cast<int>(grid.size()) - 1));
    const auto op = poly::make_fit_operator(grid, d);
    const auto coeffs = poly::fit_poly(sig.f, op);
    const auto spectrum = poly::sumudu_forward(coeffs);
    const auto recon = poly::horner_eval(coeffs, grid);
    double max_abs = 0.0, sq = 0.0, ref = 0.0;
    for (std::size_t i = 0; i < recon.size(); ++i) {
        const double r = recon[i] - sig.f[i];
        max_abs = std::max(max_abs, std::abs(r));
        sq += r * r;
        ref += sig.f[i] * sig.f[i];
    }

    std::string csv = "k,coefficient,spectrum\n";
    char buf[160];
    for (std::size_t k = 0; k < coeffs.coeffs.size(); ++k) {
        std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g\n", k, coeffs.coeffs[k],
                      spectrum.scaled_coeffs[k]);
        csv += buf;
    }
    std::snprintf(buf, sizeof buf,
                  "degree %d  samples %zu  residual max %.3e  rms %.3e  rel_l2 %.3e\n", d,
                  grid.size(), max_abs, std::sqrt(sq / static_cast<double>(recon.size())),
                  ref > 0 ? std::sqrt(sq / ref) : std::sqrt(sq));
    if (out.empty()) {
        std::cout << csv;
        std::cerr << buf;
    } else {
        write_text(out, csv);
        std::cout << buf;
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Sumudu neural operator toolkit", "sno"};
    app.footer(kExitCodes);
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);
    const std::vector<std::string> args(argv, argv + argc);

    Common common;
    TrainFlags tf;
    std::string checkpoint, data_path, resolutions, sizes = "4096,8192,16384,32768,65536,131072,262144",
                                                    methods = "poly-fit,fft", input, out_file;
    std::size_t base = 64, reps = 20;
    std::optional<int> transform_degree;

    auto* gen = app.add_subcommand("gen", "generate a task dataset from a JSON task spec");
    add_common(gen, common);
    gen->add_option("--resolution", common.resolution, "grid points (overrides the task spec file)");

    auto* trn = app.add_subcommand("train", "train a model; writes model.snot and train.csv");
    add_common(trn, common);
    trn->add_option("--data", tf.data, "dataset file (overrides the config's 'dataset')");
    trn->add_option("--resolution", common.resolution, "train on a subsampled grid");
    trn->add_option("--degree", common.degree, "polynomial degree");
    trn->add_option("--epochs", tf.epochs, "epochs");
    trn->add_option("--batch-size", tf.batch_size, "mini-batch size");
    trn->add_option("--lr", tf.lr, "Adam learning rate");
    trn->add_option("--checkpoint-every", tf.checkpoint_every, "epochs between checkpoints");
    trn->add_flag("--quiet", tf.quiet, "no per-epoch progress");

    auto* evl = app.add_subcommand("eval", "relative L2 on the test split");
    add_common(evl, common);
    evl->add_option("--checkpoint", checkpoint, "model checkpoint")->required();
    evl->add_option("--data", data_path, "dataset file")->required();
    evl->add_option("--resolution", common.resolution, "evaluate on a subsampled grid");

    auto* sr = app.add_subcommand("superres", "zero-shot super-resolution from a base resolution");
    add_common(sr, common);
    sr->add_option("--checkpoint", checkpoint, "model checkpoint")->required();
    sr->add_option("--data", data_path, "fine-resolution dataset file")->required();
    sr->add_option("--base", base, "base (training) resolution");
    sr->add_option("--resolutions", resolutions, "comma-separated evaluation resolutions")->required();

    auto* bench = app.add_subcommand("bench", "time poly-fit / poly-fit-cold / fft decompositions");
    add_common(bench, common);
    bench->add_option("--sizes", sizes, "comma-separated power-of-two sizes");
    bench->add_option("--degree", common.degree, "polynomial degree");
    bench->add_option("--methods", methods, "comma-separated methods");
    bench->add_option("--reps", reps, "timed repetitions per size (>= 20)");

    auto* tr = app.add_subcommand("transform", "polynomial coefficients and spectrum of a CSV signal");
    tr->add_option("--input", input, "CSV: one column f, or two columns t,f")->required()->check(CLI::ExistingFile);
    tr->add_option("--degree", transform_degree, "polynomial degree (default min(16, n-1))");
    tr->add_option("--out", out_file, "CSV output path (default stdout)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (*gen) return cmd_gen(common, args);
        if (*trn) return cmd_train(common, tf, args);
        if (*evl) return cmd_eval(common, checkpoint, data_path, args);
        if (*sr) return cmd_superres(common, checkpoint, data_path, base, resolutions, args);
        if (*bench) return cmd_bench(common, sizes, methods, reps, args);
        if (*tr) return cmd_transform(input, transform_degree, out_file);
    } catch (const Error& e) {
        std::cerr << "sno: " << e.what() << "\n";
        return exit_code(e.kind());
    } catch (const fs::filesystem_error& e) {
        std::cerr << "sno: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "sno: internal error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
