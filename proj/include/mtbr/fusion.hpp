#pragma once

#include <array>
#include <map>
#include <random>
#include <span>
#include <vector>

#include "mtbr/autodiff.hpp"
#include "mtbr/model.hpp"

namespace mtbr {

// Trainable weights of one modality's three-view attention fusion network.
struct MultiviewAttentionParams {
    std::array<Tensor, kNumViews> view_weight;  // [feat_dim×hidden]
    std::array<Tensor, kNumViews> view_bias;    // [hidden]
    Tensor att_weight;                          // [3·hidden×3]
    Tensor att_bias;                            // [3]
    Tensor norm_gamma;                          // [hidden]
    Tensor norm_beta;                           // [hidden]
    Tensor cls_weight;                          // [hidden×n_classes]
    Tensor cls_bias;                            // [n_classes]

    // Branch tensors first (10 entries), classifier head last (2 entries).
    std::vector<ParamRef> refs(const std::string& prefix);
};

inline constexpr std::size_t kBranchParamCount = 10;

// Glorot weights, zero biases, unit gamma, zero beta.
MultiviewAttentionParams init_params(const FusionConfig& config, std::mt19937_64& rng);

// Tape handles for the fusion branch (classifier excluded).
struct BranchVars {
    std::array<Var, kNumViews> view_weight;
    std::array<Var, kNumViews> view_bias;
    Var att_weight, att_bias, norm_gamma, norm_beta;

    // Reads kBranchParamCount vars in MultiviewAttentionParams::refs order.
    static BranchVars from(std::span<const Var> p);
};

struct BranchOutputs {
    Var alpha;  // [b×3], rows on the simplex
    Var fused;  // [b×hidden]
};

// h_v = dense_v(x_v); alpha = softmax(concat(h)·W_att + b_att);
// fused = Σ_v alpha_v · layer_norm(h_v).
BranchOutputs fuse_views(const BranchVars& branch, const std::array<Var, kNumViews>& views, double eps);

// One sample through a standalone multiview network.
struct MultiviewOutput {
    std::vector<double> probs;
    std::array<double, kNumViews> alpha{};
    std::vector<double> fused;
};

MultiviewOutput multiview_forward(const MultiviewAttentionParams& params,
                                  const std::array<std::span<const double>, kNumViews>& views,
                                  double layer_norm_eps = 1e-5);

class MultiviewModel final : public Model {
public:
    MultiviewModel(Modality modality, const FusionConfig& config);

    ModelKind kind() const override;
    const ModelConfig& config() const override { return config_; }
    std::size_t n_classes() const override { return config_.fusion.n_classes; }
    std::uint8_t required_modalities() const override;
    std::vector<ParamRef> parameters() override;
    ForwardResult forward(Tape& tape, const std::vector<Var>& p, const Batch& batch) const override;

    Modality modality() const { return modality_; }
    MultiviewAttentionParams& net() { return net_; }
    const MultiviewAttentionParams& net() const { return net_; }

private:
    Modality modality_;
    ModelConfig config_;
    MultiviewAttentionParams net_;
};

// Additive fusion of the RGB and DCT fused descriptors (plus a projected
// LaViLa vector when trimodal) ahead of one sigmoid classifier. The
// per-modality classifier heads are not part of this path.
class FusionModel final : public Model {
public:
    explicit FusionModel(const ModelConfig& config);

    ModelKind kind() const override { return config_.kind; }
    const ModelConfig& config() const override { return config_; }
    std::size_t n_classes() const override { return config_.fusion.n_classes; }
    std::uint8_t required_modalities() const override;
    std::vector<ParamRef> parameters() override;
    ForwardResult forward(Tape& tape, const std::vector<Var>& p, const Batch& batch) const override;

    bool trimodal() const { return config_.kind == ModelKind::Trimodal; }
    MultiviewAttentionParams& branch(Modality m) { return m == Modality::Rgb ? rgb_ : dct_; }
    const MultiviewAttentionParams& branch(Modality m) const { return m == Modality::Rgb ? rgb_ : dct_; }
    Tensor& head_weight() { return head_weight_; }
    Tensor& head_bias() { return head_bias_; }
    Tensor& lavila_weight() { return lavila_weight_; }
    Tensor& lavila_bias() { return lavila_bias_; }

    // Copies a trained standalone network into the matching branch.
    void load_branch(const MultiviewModel& source);

    // Single-sample probabilities.
    std::vector<double> predict_one(const std::array<std::span<const double>, kNumViews>& rgb_views,
                                    const std::array<std::span<const double>, kNumViews>& dct_views,
                                    std::span<const double> lavila = {}) const;

private:
    ModelConfig config_;
    MultiviewAttentionParams rgb_;
    MultiviewAttentionParams dct_;
    Tensor lavila_weight_;  // [lavila_dim×hidden], trimodal only
    Tensor lavila_bias_;    // [hidden]
    Tensor head_weight_;    // [hidden×n_classes]
    Tensor head_bias_;      // [n_classes]
};

// Mean attention scores per view over the records, per fused modality.
std::map<Modality, std::array<double, kNumViews>> attention_report(
    const Model& model, std::span<const SampleRecord* const> records);
std::map<Modality, std::array<double, kNumViews>> attention_report(const Model& model, const Dataset& dataset,
                                                                   Split split);

}  // namespace mtbr
