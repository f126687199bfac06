#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace mtbr {

// Row-major n_samples × n_classes scores and binary targets.
struct PredictionMatrix {
    std::size_t n_samples = 0;
    std::size_t n_classes = 0;
    std::vector<double> scores;
    std::vector<std::uint8_t> targets;

    void append(std::span<const double> score_row, std::span<const std::uint8_t> target_row);
};

struct APResult {
    std::vector<std::optional<double>> per_class;  // nullopt: class has no positives
    std::vector<std::size_t> n_positive;
    double map = 0.0;  // mean over defined classes
    std::vector<std::size_t> skipped;
};

// Mean of precision@k over the ranks k of positive items, ranking by score
// descending with ties broken by ascending index. nullopt when no positives.
std::optional<double> average_precision(std::span<const double> scores, std::span<const std::uint8_t> targets);

// Per-class AP and their mean over classes with at least one positive. Skipped
// classes are listed in the result and, if warn is set, reported there.
APResult mean_average_precision(const PredictionMatrix& pm, std::ostream* warn = nullptr);

// Expected AP of a uniformly random ranking of n items holding p positives.
double expected_random_ap(std::size_t positives, std::size_t n);

std::string classwise_table(const APResult& result, std::span<const std::string_view> class_names);
std::string classwise_csv(const APResult& result, std::span<const std::string_view> class_names);

}  // namespace mtbr
