#pragma once

// Mini-batch training of an SNOModel on a TaskDataset with relative-L2 loss
// and Adam, plus per-channel input normalization.

#include "sno/datagen.hpp"
#include "sno/model.hpp"

#include "json.hpp"

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

namespace sno::train {

using data::TaskDataset;
using nn::Tensor;

// (x - mean[c]) / std[c] over channel axis 1 of a [N, C, ...] tensor.
Tensor apply_stats(const Tensor& x, const nn::ChannelStats& stats);
Tensor invert_stats(const Tensor& x, const nn::ChannelStats& stats);

// z-scores inputs with the training-split stats; outputs stay physical.
// AlreadyNormalized on a second call, DegenerateChannel on a zero-std channel.
TaskDataset normalize(TaskDataset ds);
TaskDataset denormalize(TaskDataset ds);

struct TrainConfig {
    double lr = 1e-3;
    std::size_t batch_size = 20;
    int epochs = 1000;
    std::uint64_t seed = 0;
    model::ModelConfig model;
    int checkpoint_every = 0;  // epochs between checkpoints; 0 = final only
    std::filesystem::path checkpoint_path;  // empty = no checkpoints

    void validate() const;
};

nlohmann::json to_json(const TrainConfig& c);
// Missing keys keep `base`; ConfigError on unknown keys.
TrainConfig train_config_from_json(const nlohmann::json& j, TrainConfig base = {});

struct EpochRecord {
    int epoch = 0;
    double train_loss = 0.0;
    double test_rel_l2 = 0.0;
    double seconds = 0.0;
};

struct TrainReport {
    std::vector<EpochRecord> epochs;
    std::filesystem::path final_checkpoint;
};

// Mean relative L2 over the test split of a normalized dataset.
double test_rel_l2(const model::SNOModel& model, const TaskDataset& ds);

using EpochCallback = std::function<void(const EpochRecord&)>;

// Seeded shuffle per epoch, forward -> rel_l2_loss -> backward -> Adam.
// Copies the dataset's input stats into the model.
TrainReport train(model::SNOModel& model, const TaskDataset& ds, const TrainConfig& config,
                  const EpochCallback& on_epoch = {});

// epoch,train_loss,test_rel_l2,seconds
std::string train_csv(const TrainReport& report);
void write_train_csv(const TrainReport& report, const std::filesystem::path& path);

}  // namespace sno::train
