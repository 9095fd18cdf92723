#include "sno/trainer.hpp"

#include "sno/archive.hpp"
#include "sno/error.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>

namespace sno::train {

namespace {

template <class T>
T field(const nlohmann::json& j, const char* key, T fallback) {
    if (!j.contains(key)) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::ConfigError, std::string("field '") + key + "': " + e.what());
    }
}

template <class Fn>
Tensor per_channel(const Tensor& x, const nn::ChannelStats& stats, Fn fn) {
    require(x.rank() >= 2 && x.dim(1) == stats.mean.size() && stats.std.size() == stats.mean.size(),
            ErrorKind::ShapeMismatch,
            "stats for " + std::to_string(stats.mean.size()) + " channels vs tensor " +
                nn::shape_string(x.shape()));
    Tensor out = x;
    const std::size_t ch = x.dim(1), inner = x.inner(2), items = x.dim(0);
    for (std::size_t b = 0; b < items; ++b)
        for (std::size_t c = 0; c < ch; ++c) {
            double* p = out.ptr() + (b * ch + c) * inner;
            for (std::size_t i = 0; i < inner; ++i) p[i] = fn(p[i], stats.mean[c], stats.std[c]);
        }
    return out;
}

std::mt19937_64 epoch_rng(std::uint64_t seed, int epoch) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(epoch), 0x7261u};
    return std::mt19937_64(seq);
}

}  // namespace

Tensor apply_stats(const Tensor& x, const nn::ChannelStats& stats) {
    return per_channel(x, stats, [](double v, double m, double s) { return (v - m) / s; });
}

Tensor invert_stats(const Tensor& x, const nn::ChannelStats& stats) {
    return per_channel(x, stats, [](double v, double m, double s) { return v * s + m; });
}

TaskDataset normalize(TaskDataset ds) {
    require(!ds.normalized, ErrorKind::AlreadyNormalized, "dataset is already normalized");
    require(!ds.input_stats.empty(), ErrorKind::ConfigError, "dataset has no input stats");
    for (std::size_t c = 0; c < ds.input_stats.std.size(); ++c)
        require(ds.input_stats.std[c] > 0.0, ErrorKind::DegenerateChannel,
                "input channel " + std::to_string(c) + " has zero std on the training split");
    ds.inputs = apply_stats(ds.inputs, ds.input_stats);
    ds.normalized = true;
    return ds;
}

TaskDataset denormalize(TaskDataset ds) {
    require(ds.normalized, ErrorKind::ConfigError, "dataset is not normalized");
    ds.inputs = invert_stats(ds.inputs, ds.input_stats);
    ds.normalized = false;
    return ds;
}

void TrainConfig::validate() const {
    require(lr > 0.0 && std::isfinite(lr), ErrorKind::ConfigError, "lr must be > 0");
    require(batch_size >= 1, ErrorKind::ConfigError, "batch_size must be >= 1");
    require(epochs >= 1, ErrorKind::ConfigError, "epochs must be >= 1");
    require(checkpoint_every >= 0, ErrorKind::ConfigError, "checkpoint_every must be >= 0");
    model.validate();
}

nlohmann::json to_json(const TrainConfig& c) {
    return {{"lr", c.lr},
            {"batch_size", c.batch_size},
            {"epochs", c.epochs},
            {"seed", c.seed},
            {"checkpoint_every", c.checkpoint_every},
            {"model",
             {{"width", c.model.width},
              {"n_layers", c.model.n_layers},
              {"degree", c.model.degree},
              {"in_channels", c.model.in_channels},
              {"out_channels", c.model.out_channels},
              {"seed", c.model.seed}}}};
}

TrainConfig train_config_from_json(const nlohmann::json& j, TrainConfig c) {
    require(j.is_object(), ErrorKind::ConfigError, "train config must be an object");
    const auto known = to_json(c);
    for (const auto& [key, _] : j.items())
        require(known.contains(key), ErrorKind::ConfigError, "unknown train config key '" + key + "'");
    c.lr = field(j, "lr", c.lr);
    c.batch_size = field(j, "batch_size", c.batch_size);
    c.epochs = field(j, "epochs", c.epochs);
    c.seed = field(j, "seed", c.seed);
    c.checkpoint_every = field(j, "checkpoint_every", c.checkpoint_every);
    if (j.contains("model")) {
        const auto& m = j.at("model");
        require(m.is_object(), ErrorKind::ConfigError, "model must be an object");
        for (const auto& [key, _] : m.items())
            require(known.at("model").contains(key), ErrorKind::ConfigError,
                    "unknown model key '" + key + "'");
        c.model.width = field(m, "width", c.model.width);
        c.model.n_layers = field(m, "n_layers", c.model.n_layers);
        c.model.degree = field(m, "degree", c.model.degree);
        c.model.in_channels = field(m, "in_channels", c.model.in_channels);
        c.model.out_channels = field(m, "out_channels", c.model.out_channels);
        c.model.seed = field(m, "seed", c.model.seed);
    }
    return c;
}

double test_rel_l2(const model::SNOModel& model, const TaskDataset& ds) {
    if (ds.n_test() == 0) return 0.0;
    const auto grid = ds.grid();
    const Tensor x = TaskDataset::rows(ds.inputs, ds.n_train, ds.size());
    const Tensor y = TaskDataset::rows(ds.outputs, ds.n_train, ds.size());
    const auto errs = nn::rel_l2_per_item(model::forward(model, x, grid), y);
    return std::accumulate(errs.begin(), errs.end(), 0.0) / static_cast<double>(errs.size());
}

TrainReport train(model::SNOModel& model, const TaskDataset& ds, const TrainConfig& config,
                  const EpochCallback& on_epoch) {
    config.validate();
    require(ds.normalized, ErrorKind::ConfigError, "train expects a normalized dataset");
    require(ds.n_train >= 1, ErrorKind::EmptySplit, "training split is empty");
    require(ds.inputs.dim(1) == static_cast<std::size_t>(model.config.in_channels) &&
                ds.outputs.dim(1) == static_cast<std::size_t>(model.config.out_channels),
            ErrorKind::ShapeMismatch,
            "dataset channels " + std::to_string(ds.inputs.dim(1)) + "->" +
                std::to_string(ds.outputs.dim(1)) + " vs model " +
                std::to_string(model.config.in_channels) + "->" +
                std::to_string(model.config.out_channels));
    require(ds.grid_points.size() >= static_cast<std::size_t>(model.config.degree) + 1,
            ErrorKind::GridIncompatible, "resolution below degree + 1");
    model.input_stats = ds.input_stats;

    const auto grid = ds.grid();
    auto adam = nn::make_adam(model.params, config.lr);
    std::vector<std::size_t> order(ds.n_train);
    TrainReport report;
    const bool checkpoints = !config.checkpoint_path.empty();
    using clock = std::chrono::steady_clock;

    for (int epoch = 1; epoch <= config.epochs; ++epoch) {
        const auto t0 = clock::now();
        std::iota(order.begin(), order.end(), std::size_t{0});
        auto rng = epoch_rng(config.seed, epoch);
        std::shuffle(order.begin(), order.end(), rng);

        double loss_sum = 0.0;
        std::size_t n_batches = 0;
        for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
            const std::size_t end = std::min(order.size(), start + config.batch_size);
            const std::span<const std::size_t> idx(order.data() + start, end - start);
            const Tensor xb = TaskDataset::gather(ds.inputs, idx);
            const Tensor yb = TaskDataset::gather(ds.outputs, idx);
            try {
                model::ForwardTape tape;
                const Tensor pred = model::forward(model, xb, grid, &tape);
                const auto loss = nn::rel_l2_loss(pred, yb);
                require(std::isfinite(loss.value), ErrorKind::NumericalFault, "non-finite loss");
                model::backward(model, tape, loss.grad);
                for (const auto& p : model.params) p.grad.check_finite(p.name);
                nn::adam_step(model.params, adam);
                loss_sum += loss.value;
            } catch (const Error& e) {
                if (e.kind() != ErrorKind::NumericalFault) throw;
                throw Error(e.kind(), "epoch " + std::to_string(epoch) + " batch " +
                                          std::to_string(n_batches) + ": " + e.detail());
            }
            ++n_batches;
        }

        EpochRecord rec;
        rec.epoch = epoch;
        rec.train_loss = loss_sum / static_cast<double>(n_batches);
        rec.test_rel_l2 = test_rel_l2(model, ds);
        rec.seconds = std::chrono::duration<double>(clock::now() - t0).count();
        report.epochs.push_back(rec);
        if (on_epoch) on_epoch(rec);

        if (checkpoints && (epoch == config.epochs ||
                            (config.checkpoint_every > 0 && epoch % config.checkpoint_every == 0))) {
            model::save_checkpoint(model, config.checkpoint_path);
            report.final_checkpoint = config.checkpoint_path;
        }
    }
    return report;
}

std::string train_csv(const TrainReport& report) {
    std::string out = "epoch,train_loss,test_rel_l2,seconds\n";
    char buf[128];
    for (const auto& r : report.epochs) {
        std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g,%.6f\n", r.epoch, r.train_loss,
                      r.test_rel_l2, r.seconds);
        out += buf;
    }
    return out;
}

void write_train_csv(const TrainReport& report, const std::filesystem::path& path) {
    const auto s = train_csv(report);
    nn::write_file_bytes(path, {s.begin(), s.end()});
}

}  // namespace sno::train
