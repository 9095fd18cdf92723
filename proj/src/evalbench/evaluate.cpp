#include "sno/evalbench.hpp"

#include "sno/error.hpp"
#include "sno/parallel.hpp"
#include "sno/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace sno::eval {

namespace {

void check_channels(const model::SNOModel& model, const TaskDataset& ds) {
    require(ds.inputs.dim(1) == static_cast<std::size_t>(model.config.in_channels) &&
                ds.outputs.dim(1) == static_cast<std::size_t>(model.config.out_channels),
            ErrorKind::ShapeMismatch,
            "dataset maps " + std::to_string(ds.inputs.dim(1)) + " -> " +
                std::to_string(ds.outputs.dim(1)) + " channels, model maps " +
                std::to_string(model.config.in_channels) + " -> " +
                std::to_string(model.config.out_channels));
}

// Runs fn(begin, end) -> [end-begin, C, n] over row chunks and stitches the results.
template <class Fn>
Tensor chunked(std::size_t rows, unsigned threads, Fn fn) {
    const std::size_t chunk = std::max<std::size_t>(1, (rows + threads - 1) / std::max(1u, threads));
    const std::size_t n_chunks = (rows + chunk - 1) / chunk;
    std::vector<Tensor> parts(n_chunks);
    parallel_for(n_chunks, threads, [&](std::size_t i) {
        parts[i] = fn(i * chunk, std::min(rows, (i + 1) * chunk));
    });
    auto shape = parts.front().shape();
    shape[0] = rows;
    Tensor out(shape);
    std::size_t off = 0;
    for (const auto& p : parts) {
        std::copy(p.data().begin(), p.data().end(), out.ptr() + off);
        off += p.numel();
    }
    return out;
}

std::vector<double> item_error(const Tensor& pred, const Tensor& truth, std::size_t i) {
    const std::size_t m = pred.inner(1);
    std::vector<double> e(m);
    for (std::size_t k = 0; k < m; ++k) e[k] = pred[i * m + k] - truth[i * m + k];
    return e;
}

Tensor subsample_rows(const Tensor& t, std::size_t stride) {
    if (stride == 1) return t;
    const std::size_t n = t.dim(t.rank() - 1), m = n / stride, rows = t.numel() / n;
    auto shape = t.shape();
    shape.back() = m;
    Tensor out(shape);
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t i = 0; i < m; ++i) out[r * m + i] = t[r * n + i * stride];
    return out;
}

double mean_of(const std::vector<double>& v) {
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

}  // namespace

EvalReport summarize(const Tensor& pred, const Tensor& truth, std::string task) {
    require(pred.shape() == truth.shape(), ErrorKind::ShapeMismatch,
            "prediction " + nn::shape_string(pred.shape()) + " vs truth " +
                nn::shape_string(truth.shape()));
    require(pred.rank() >= 1 && pred.dim(0) > 0, ErrorKind::EmptySplit, "nothing to evaluate");
    EvalReport r;
    r.task = std::move(task);
    r.per_sample = nn::rel_l2_per_item(pred, truth);
    r.mean = mean_of(r.per_sample);
    const auto [lo, hi] = std::minmax_element(r.per_sample.begin(), r.per_sample.end());
    r.min = *lo;
    r.max = *hi;
    r.worst_index = static_cast<std::size_t>(hi - r.per_sample.begin());

    std::vector<std::size_t> order(r.per_sample.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return r.per_sample[a] < r.per_sample[b]; });
    const std::size_t k = order.size();
    r.median = k % 2 ? r.per_sample[order[k / 2]]
                     : 0.5 * (r.per_sample[order[k / 2 - 1]] + r.per_sample[order[k / 2]]);
    r.median_index = order[(k - 1) / 2];
    r.worst_error = item_error(pred, truth, r.worst_index);
    r.median_error = item_error(pred, truth, r.median_index);
    return r;
}

Tensor model_inputs(const model::SNOModel& model, const TaskDataset& ds, std::size_t begin,
                    std::size_t end) {
    Tensor x = TaskDataset::rows(ds.inputs, begin, end);
    if (ds.normalized) {
        if (model.input_stats.empty() || model.input_stats == ds.input_stats) return x;
        x = train::invert_stats(x, ds.input_stats);
    }
    if (model.input_stats.empty()) return x;
    return train::apply_stats(x, model.input_stats);
}

EvalReport evaluate(const model::SNOModel& model, const TaskDataset& ds, unsigned threads) {
    require(ds.n_test() > 0, ErrorKind::EmptySplit, "dataset has no test split");
    check_channels(model, ds);
    const auto grid = ds.grid();
    const Tensor pred = chunked(ds.n_test(), threads, [&](std::size_t b, std::size_t e) {
        return model::forward(model, model_inputs(model, ds, ds.n_train + b, ds.n_train + e), grid);
    });
    const Tensor truth = TaskDataset::rows(ds.outputs, ds.n_train, ds.size());
    return summarize(pred, truth, std::string(data::to_string(ds.spec.task)));
}

SuperResReport superres_eval(const model::SNOModel& model, const TaskDataset& fine,
                             std::size_t base_n, std::span<const std::size_t> eval_ns,
                             unsigned threads) {
    require(fine.n_test() > 0, ErrorKind::EmptySplit, "dataset has no test split");
    check_channels(model, fine);
    const std::size_t fine_n = fine.grid_points.size();
    auto stride_for = [&](std::size_t n) {
        require(n >= 2 && fine_n % n == 0, ErrorKind::GridIncompatible,
                "resolution " + std::to_string(n) + " is not a subsampling of the " +
                    std::to_string(fine_n) + "-point grid");
        return fine_n / n;
    };
    const TaskDataset base = data::subsample(fine, stride_for(base_n));
    const auto base_grid = base.grid();
    const Tensor x = model_inputs(model, base, base.n_train, base.size());
    const Tensor base_pred = chunked(base.n_test(), threads, [&](std::size_t b, std::size_t e) {
        return model::forward(model, TaskDataset::rows(x, b, e), base_grid);
    });

    // Baseline source grid, closed periodically for PDE tasks.
    poly::Grid interp_grid = base_grid;
    Tensor interp_src = base_pred;
    if (data::is_pde(fine.spec.task)) {
        auto pts = base.grid_points;
        pts.push_back(pts.front() + fine.spec.extent);
        interp_grid = poly::Grid(pts);
        const std::size_t n = base_n, rows = base_pred.numel() / n;
        auto shape = base_pred.shape();
        shape.back() = n + 1;
        interp_src = Tensor(shape);
        for (std::size_t r = 0; r < rows; ++r) {
            std::copy_n(base_pred.ptr() + r * n, n, interp_src.ptr() + r * (n + 1));
            interp_src[r * (n + 1) + n] = base_pred[r * n];
        }
    }

    SuperResReport report;
    report.base_resolution = base_n;
    report.base_rel_l2 =
        summarize(base_pred, TaskDataset::rows(base.outputs, base.n_train, base.size())).mean;
    const Tensor fine_truth = TaskDataset::rows(fine.outputs, fine.n_train, fine.size());
    for (std::size_t n : eval_ns) {
        const std::size_t stride = stride_for(n);
        std::vector<double> pts;
        for (std::size_t i = 0; i < fine_n; i += stride) pts.push_back(fine.grid_points[i]);
        const poly::Grid eval_grid(pts);
        const Tensor truth = subsample_rows(fine_truth, stride);
        const Tensor pred =
            n == base_n ? base_pred
                        : chunked(base.n_test(), threads, [&](std::size_t b, std::size_t e) {
                              return model::forward_at_resolution(model, TaskDataset::rows(x, b, e),
                                                                  base_grid, eval_grid);
                          });
        const Tensor interp = model::interpolate_last_axis(interp_src, interp_grid, eval_grid);
        SuperResRow row;
        row.resolution = n;
        row.model_rel_l2 = summarize(pred, truth).mean;
        row.baseline_rel_l2 = summarize(interp, truth).mean;
        report.rows.push_back(row);
    }
    return report;
}

}  // namespace sno::eval
