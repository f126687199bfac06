#include "mtbr/metrics.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>

#include "mtbr/errors.hpp"

namespace mtbr {

void PredictionMatrix::append(std::span<const double> score_row, std::span<const std::uint8_t> target_row) {
    if (n_samples == 0 && n_classes == 0) n_classes = score_row.size();
    if (score_row.size() != n_classes || target_row.size() != n_classes) {
        throw DimensionError("prediction row has " + std::to_string(score_row.size()) + " scores and " +
                             std::to_string(target_row.size()) + " targets, expected " + std::to_string(n_classes));
    }
    scores.insert(scores.end(), score_row.begin(), score_row.end());
    targets.insert(targets.end(), target_row.begin(), target_row.end());
    ++n_samples;
}

std::optional<double> average_precision(std::span<const double> scores, std::span<const std::uint8_t> targets) {
    if (scores.size() != targets.size()) {
        throw DimensionError("average_precision: " + std::to_string(scores.size()) + " scores vs " +
                             std::to_string(targets.size()) + " targets");
    }
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
    std::size_t hits = 0;
    double total = 0.0;
    for (std::size_t rank = 0; rank < order.size(); ++rank) {
        if (targets[order[rank]]) {
            ++hits;
            total += static_cast<double>(hits) / static_cast<double>(rank + 1);
        }
    }
    if (hits == 0) return std::nullopt;
    return total / static_cast<double>(hits);
}

APResult mean_average_precision(const PredictionMatrix& pm, std::ostream* warn) {
    if (pm.n_samples == 0) throw ContractError("mean_average_precision: no samples");
    if (pm.scores.size() != pm.n_samples * pm.n_classes || pm.targets.size() != pm.scores.size()) {
        throw DimensionError("mean_average_precision: matrix storage disagrees with its shape");
    }
    APResult res;
    std::vector<double> col(pm.n_samples);
    std::vector<std::uint8_t> tcol(pm.n_samples);
    double sum = 0.0;
    std::size_t defined = 0;
    for (std::size_t c = 0; c < pm.n_classes; ++c) {
        std::size_t pos = 0;
        for (std::size_t i = 0; i < pm.n_samples; ++i) {
            col[i] = pm.scores[i * pm.n_classes + c];
            tcol[i] = pm.targets[i * pm.n_classes + c];
            pos += tcol[i] ? 1 : 0;
        }
        auto ap = average_precision(col, tcol);
        res.per_class.push_back(ap);
        res.n_positive.push_back(pos);
        if (ap) {
            sum += *ap;
            ++defined;
        } else {
            res.skipped.push_back(c);
        }
    }
    res.map = defined ? sum / static_cast<double>(defined) : 0.0;
    if (warn && !res.skipped.empty()) {
        *warn << "warning: no positive samples for class index";
        for (auto c : res.skipped) *warn << " " << c;
        *warn << "; excluded from mAP\n";
    }
    return res;
}

double expected_random_ap(std::size_t positives, std::size_t n) {
    if (positives == 0 || positives > n) throw ContractError("expected_random_ap: need 1 <= positives <= n");
    if (n == 1) return 1.0;
    double harmonic = 0.0;
    for (std::size_t k = 1; k <= n; ++k) harmonic += 1.0 / static_cast<double>(k);
    const double p = static_cast<double>(positives), dn = static_cast<double>(n);
    return (p - 1.0) / (dn - 1.0) + (dn - p) * harmonic / (dn * (dn - 1.0));
}

namespace {

std::string_view name_at(std::span<const std::string_view> names, std::size_t c) {
    if (c >= names.size()) throw DimensionError("classwise table: missing name for class " + std::to_string(c));
    return names[c];
}

}  // namespace

std::string classwise_table(const APResult& result, std::span<const std::string_view> class_names) {
    std::string out;
    char line[160];
    std::snprintf(line, sizeof line, "%-20s %8s %10s\n", "class", "AP", "positives");
    out += line;
    for (std::size_t c = 0; c < result.per_class.size(); ++c) {
        const auto name = std::string(name_at(class_names, c));
        if (result.per_class[c]) {
            std::snprintf(line, sizeof line, "%-20s %8.3f %10zu\n", name.c_str(), *result.per_class[c],
                          result.n_positive[c]);
        } else {
            std::snprintf(line, sizeof line, "%-20s %8s %10zu\n", name.c_str(), "n/a", result.n_positive[c]);
        }
        out += line;
    }
    std::snprintf(line, sizeof line, "%-20s %8.3f\n", "mAP", result.map);
    out += line;
    return out;
}

std::string classwise_csv(const APResult& result, std::span<const std::string_view> class_names) {
    std::string out = "class,ap,n_positive\n";
    char line[160];
    for (std::size_t c = 0; c < result.per_class.size(); ++c) {
        const auto name = std::string(name_at(class_names, c));
        if (result.per_class[c]) {
            std::snprintf(line, sizeof line, "%s,%.6f,%zu\n", name.c_str(), *result.per_class[c], result.n_positive[c]);
        } else {
            std::snprintf(line, sizeof line, "%s,n/a,%zu\n", name.c_str(), result.n_positive[c]);
        }
        out += line;
    }
    return out;
}

}  // namespace mtbr
