#pragma once

#include <array>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mtbr/dataio.hpp"
#include "mtbr/metrics.hpp"
#include "mtbr/model.hpp"

namespace mtbr {

enum class OptimizerKind { Sgd, Adam };
enum class Monitor { ValMap, ValLoss };

struct TrainConfig {
    OptimizerKind optimizer = OptimizerKind::Sgd;
    double learning_rate = 0.01;
    std::size_t max_epochs = 300;
    std::size_t patience = 10;
    std::size_t batch_size = 32;
    std::uint64_t seed = 0;
    Monitor monitor = Monitor::ValMap;
    // An epoch improves on the best only by more than this.
    double min_delta = 1e-6;

    static double default_learning_rate(OptimizerKind k) { return k == OptimizerKind::Sgd ? 0.01 : 0.001; }
    void validate() const;
};

struct EpochReport {
    std::size_t epoch = 0;  // 1-based
    double train_loss = 0.0;
    double val_loss = 0.0;
    double val_map = 0.0;
    std::vector<std::optional<double>> per_class_ap;
    std::map<Modality, std::array<double, kNumViews>> attention;
    double monitor_value = 0.0;
};

// Tracks the best monitored value and the parameters that produced it.
class EarlyStopping {
public:
    EarlyStopping(std::size_t patience, bool maximize, double min_delta);

    // Returns true when value improves on the best so far.
    bool observe(std::size_t epoch, double value, const Model& model);
    bool should_stop() const { return epochs_since_improvement_ >= patience_; }

    double best_metric() const { return best_; }
    std::size_t best_epoch() const { return best_epoch_; }
    std::size_t epochs_since_improvement() const { return epochs_since_improvement_; }
    const std::vector<Tensor>& best_params() const { return best_params_; }

private:
    std::size_t patience_;
    bool maximize_;
    double min_delta_;
    double best_;
    std::size_t best_epoch_ = 0;
    std::size_t epochs_since_improvement_ = 0;
    std::vector<Tensor> best_params_;
};

struct FitHooks {
    // Replaces the monitored value of an epoch.
    std::function<double(const EpochReport&)> monitor_override;
    // Called after every epoch with the model in its end-of-epoch state.
    std::function<void(const EpochReport&, const Model&)> on_epoch;
};

struct FitResult {
    std::vector<EpochReport> reports;
    std::size_t best_epoch = 0;
    double best_metric = 0.0;
    std::vector<Tensor> best_params;
};

// Mini-batch BCE training with per-epoch validation and early stopping.
// Leaves model holding the best epoch's parameters.
FitResult fit(Model& model, const Dataset& dataset, const TrainConfig& config, const FitHooks& hooks = {});

struct EvalResult {
    double loss = 0.0;
    APResult ap;
    std::map<Modality, std::array<double, kNumViews>> attention;
};

EvalResult evaluate(const Model& model, std::span<const SampleRecord* const> records);

// Scores of every record, row-major [n×n_classes].
PredictionMatrix predict(const Model& model, std::span<const SampleRecord* const> records);

// --- run configuration and history ------------------------------------------

struct RunConfig {
    TrainConfig train;
    std::string dataset_path;
    std::string modalities = "rgb";
    std::string output_dir = ".";
};

// Flat key=value text, '#' comments. Unknown or repeated keys are errors.
RunConfig parse_run_config(const std::string& text);
RunConfig load_run_config(const std::string& path);

// One JSON object, no trailing newline.
std::string epoch_report_json(const EpochReport& report);

}  // namespace mtbr
