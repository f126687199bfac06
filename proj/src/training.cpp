#include "mtbr/training.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>

#include <json.hpp>

#include "mtbr/errors.hpp"
#include "mtbr/optim.hpp"

namespace mtbr {

void TrainConfig::validate() const {
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) throw ValidationError("learning_rate must be > 0");
    if (patience < 1) throw ValidationError("patience must be at least 1");
    if (batch_size < 1) throw ValidationError("batch_size must be at least 1");
    if (max_epochs < 1) throw ValidationError("max_epochs must be at least 1");
    if (!(min_delta >= 0.0)) throw ValidationError("min_delta must be >= 0");
}

EarlyStopping::EarlyStopping(std::size_t patience, bool maximize, double min_delta)
    : patience_(patience),
      maximize_(maximize),
      min_delta_(min_delta),
      best_(maximize ? -std::numeric_limits<double>::infinity() : std::numeric_limits<double>::infinity()) {}

bool EarlyStopping::observe(std::size_t epoch, double value, const Model& model) {
    const bool improved = maximize_ ? value > best_ + min_delta_ : value < best_ - min_delta_;
    if (improved) {
        best_ = value;
        best_epoch_ = epoch;
        epochs_since_improvement_ = 0;
        best_params_ = model.snapshot();
    } else {
        ++epochs_since_improvement_;
    }
    return improved;
}

namespace {

constexpr std::size_t kEvalChunk = 256;

}  // namespace

PredictionMatrix predict(const Model& model, std::span<const SampleRecord* const> records) {
    PredictionMatrix pm;
    pm.n_classes = model.n_classes();
    for (std::size_t start = 0; start < records.size(); start += kEvalChunk) {
        const auto chunk = records.subspan(start, std::min(kEvalChunk, records.size() - start));
        Batch b = make_batch(model, chunk);
        Tape tape;
        auto p = bind_parameters(tape, model, false);
        const Tensor& probs = model.forward(tape, p, b).probs.value();
        for (std::size_t i = 0; i < chunk.size(); ++i) {
            pm.append(probs.data().subspan(i * pm.n_classes, pm.n_classes), chunk[i]->labels);
        }
    }
    return pm;
}

EvalResult evaluate(const Model& model, std::span<const SampleRecord* const> records) {
    if (records.empty()) throw ContractError("evaluate: no records");
    EvalResult res;
    PredictionMatrix pm;
    pm.n_classes = model.n_classes();
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < records.size(); start += kEvalChunk) {
        const auto chunk = records.subspan(start, std::min(kEvalChunk, records.size() - start));
        Batch b = make_batch(model, chunk);
        Tape tape;
        auto p = bind_parameters(tape, model, false);
        auto out = model.forward(tape, p, b);
        loss_sum += bce_loss(out.probs, b.targets).value()[0] * static_cast<double>(chunk.size());
        const Tensor& probs = out.probs.value();
        for (std::size_t i = 0; i < chunk.size(); ++i) {
            pm.append(probs.data().subspan(i * pm.n_classes, pm.n_classes), chunk[i]->labels);
        }
        for (const auto& [mod, alpha] : out.attention) {
            auto& acc = res.attention.try_emplace(mod, std::array<double, kNumViews>{}).first->second;
            const Tensor& a = alpha.value();
            for (std::size_t r = 0; r < a.dim(0); ++r)
                for (std::size_t v = 0; v < kNumViews; ++v) acc[v] += a.at(r, v);
        }
    }
    const double n = static_cast<double>(records.size());
    res.loss = loss_sum / n;
    for (auto& [mod, acc] : res.attention)
        for (auto& v : acc) v /= n;
    res.ap = mean_average_precision(pm);
    return res;
}

FitResult fit(Model& model, const Dataset& dataset, const TrainConfig& config, const FitHooks& hooks) {
    config.validate();
    const auto train = dataset.split(Split::Train);
    const auto val = dataset.split(Split::Val);
    if (train.empty()) throw ContractError("fit: train split is empty");
    if (val.empty()) throw ContractError("fit: validation split is empty");

    auto shuffle_rng = stream_rng(config.seed, kShuffleStream);
    std::vector<std::size_t> trainable;
    {
        const auto refs = model.parameters();
        for (std::size_t i = 0; i < refs.size(); ++i)
            if (refs[i].trainable) trainable.push_back(i);
    }
    AdamState adam;
    adam.lr = config.learning_rate;

    EarlyStopping stopper(config.patience, config.monitor == Monitor::ValMap, config.min_delta);
    FitResult result;
    std::vector<std::size_t> order(train.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::vector<const SampleRecord*> batch_records;

    for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), shuffle_rng);
        double loss_sum = 0.0;
        std::size_t batch_index = 0;
        for (std::size_t start = 0; start < order.size(); start += config.batch_size, ++batch_index) {
            const std::size_t end = std::min(start + config.batch_size, order.size());
            batch_records.clear();
            for (std::size_t i = start; i < end; ++i) batch_records.push_back(train[order[i]]);
            Batch batch = make_batch(model, batch_records);

            Tape tape;
            auto p = bind_parameters(tape, model, true);
            Var loss = bce_loss(model.forward(tape, p, batch).probs, batch.targets);
            const double lv = loss.value()[0];
            if (!std::isfinite(lv)) {
                throw NumericError("non-finite training loss at epoch " + std::to_string(epoch) + ", batch " +
                                   std::to_string(batch_index));
            }
            loss_sum += lv * static_cast<double>(batch.size);
            tape.backward(loss);

            auto refs = model.parameters();
            std::vector<Tensor*> targets;
            std::vector<Tensor> grads;
            for (auto i : trainable) {
                targets.push_back(refs[i].value);
                grads.push_back(p[i].grad());
            }
            if (config.optimizer == OptimizerKind::Sgd) sgd_step(targets, grads, config.learning_rate);
            else adam_step(targets, grads, adam);
        }

        EpochReport report;
        report.epoch = epoch;
        report.train_loss = loss_sum / static_cast<double>(order.size());
        auto ev = evaluate(model, val);
        report.val_loss = ev.loss;
        report.val_map = ev.ap.map;
        report.per_class_ap = ev.ap.per_class;
        report.attention = ev.attention;
        report.monitor_value = config.monitor == Monitor::ValMap ? ev.ap.map : ev.loss;
        if (hooks.monitor_override) report.monitor_value = hooks.monitor_override(report);

        stopper.observe(epoch, report.monitor_value, model);
        result.reports.push_back(report);
        if (hooks.on_epoch) hooks.on_epoch(result.reports.back(), model);
        if (stopper.should_stop()) break;
    }

    result.best_epoch = stopper.best_epoch();
    result.best_metric = stopper.best_metric();
    result.best_params = stopper.best_params();
    model.restore(result.best_params);
    return result;
}

// --- run configuration ---------------------------------------------------------

RunConfig parse_run_config(const std::string& text) {
    RunConfig rc;
    bool lr_given = false;
    std::set<std::string> seen;
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    auto trim = [](std::string s) {
        const auto b = s.find_first_not_of(" \t\r");
        if (b == std::string::npos) return std::string();
        const auto e = s.find_last_not_of(" \t\r");
        return s.substr(b, e - b + 1);
    };
    auto to_size = [&](const std::string& key, const std::string& v) -> std::size_t {
        try {
            std::size_t used = 0;
            const long long n = std::stoll(v, &used);
            if (used != v.size() || n < 0) throw std::invalid_argument(v);
            return static_cast<std::size_t>(n);
        } catch (const std::exception&) {
            throw ValidationError("config line " + std::to_string(lineno) + ": " + key + " expects a non-negative integer");
        }
    };
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ValidationError("config line " + std::to_string(lineno) + ": expected key=value");
        }
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (!seen.insert(key).second) throw ValidationError("config line " + std::to_string(lineno) + ": repeated key " + key);
        if (key == "optimizer") {
            if (value == "sgd") rc.train.optimizer = OptimizerKind::Sgd;
            else if (value == "adam") rc.train.optimizer = OptimizerKind::Adam;
            else throw ValidationError("config: optimizer must be sgd or adam");
        } else if (key == "learning_rate") {
            try {
                std::size_t used = 0;
                rc.train.learning_rate = std::stod(value, &used);
                if (used != value.size()) throw std::invalid_argument(value);
            } catch (const std::exception&) {
                throw ValidationError("config line " + std::to_string(lineno) + ": learning_rate expects a number");
            }
            lr_given = true;
        } else if (key == "max_epochs") {
            rc.train.max_epochs = to_size(key, value);
        } else if (key == "patience") {
            rc.train.patience = to_size(key, value);
        } else if (key == "batch_size") {
            rc.train.batch_size = to_size(key, value);
        } else if (key == "seed") {
            rc.train.seed = to_size(key, value);
        } else if (key == "monitor") {
            if (value == "val_map") rc.train.monitor = Monitor::ValMap;
            else if (value == "val_loss") rc.train.monitor = Monitor::ValLoss;
            else throw ValidationError("config: monitor must be val_map or val_loss");
        } else if (key == "dataset_path") {
            rc.dataset_path = value;
        } else if (key == "modalities") {
            rc.modalities = value;
        } else if (key == "output_dir") {
            rc.output_dir = value;
        } else {
            throw ValidationError("config line " + std::to_string(lineno) + ": unknown key \"" + key + "\"");
        }
    }
    if (!lr_given) rc.train.learning_rate = TrainConfig::default_learning_rate(rc.train.optimizer);
    if (rc.dataset_path.empty()) throw ValidationError("config: dataset_path is required");
    rc.train.validate();
    model_kind_for_modalities(rc.modalities);
    return rc;
}

RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open config " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_run_config(ss.str());
}

std::string epoch_report_json(const EpochReport& r) {
    nlohmann::ordered_json j;
    j["epoch"] = r.epoch;
    j["train_loss"] = r.train_loss;
    j["val_loss"] = r.val_loss;
    j["val_map"] = r.val_map;
    auto ap = nlohmann::ordered_json::array();
    for (const auto& v : r.per_class_ap) {
        if (v) ap.push_back(*v);
        else ap.push_back(nullptr);
    }
    j["per_class_ap"] = ap;
    auto att = nlohmann::ordered_json::object();
    for (const auto& [mod, a] : r.attention) att[std::string(modality_name(mod))] = a;
    j["attention"] = att;
    j["monitor"] = r.monitor_value;
    return j.dump();
}

}  // namespace mtbr
