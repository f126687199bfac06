#pragma once

#include <random>
#include <vector>

#include "mtbr/autodiff.hpp"
#include "mtbr/model.hpp"

namespace mtbr {

// One pre-norm encoder block: x + MHSA(LN(x)), then x + FFN(LN(x)).
// The key projection has no bias: it would shift each score row by a
// constant, which the softmax cancels.
struct EncoderLayerParams {
    Tensor attn_norm_gamma, attn_norm_beta;  // [d_model]
    Tensor wq, bq, wk, wv, bv;               // [d_model×d_model], [d_model]
    Tensor wo, bo;                           // output projection
    Tensor ffn_norm_gamma, ffn_norm_beta;    // [d_model]
    Tensor w1, b1;                           // [d_model×d_ff], [d_ff]
    Tensor w2, b2;                           // [d_ff×d_model], [d_model]

    std::vector<ParamRef> refs(const std::string& prefix);
};

inline constexpr std::size_t kEncoderLayerParamCount = 15;

struct EncoderParams {
    std::vector<EncoderLayerParams> layers;
    Tensor cls_weight;  // [d_model×n_classes]
    Tensor cls_bias;    // [n_classes]

    std::vector<ParamRef> refs();
};

EncoderParams init_encoder(const EncoderConfig& config, std::mt19937_64& rng);

// Graph builders. x is one token sequence [seq_len×d_model].
struct LayerVars {
    Var attn_norm_gamma, attn_norm_beta, wq, bq, wk, wv, bv, wo, bo;
    Var ffn_norm_gamma, ffn_norm_beta, w1, b1, w2, b2;

    static LayerVars from(std::span<const Var> p);
};

Var mhsa_block(const LayerVars& layer, Var x, const EncoderConfig& config, std::vector<Var>* attention = nullptr);
Var ffn_block(const LayerVars& layer, Var x, const EncoderConfig& config);
// Encoder layers then mean pooling over tokens: [1×d_model].
Var encode_pooled(std::span<const Var> p, Var x, const EncoderConfig& config);

// Sinusoidal position table [seq_len×d_model].
Tensor sinusoidal_positions(std::size_t seq_len, std::size_t d_model);

// Plain evaluations against frozen parameters.
struct MhsaOutput {
    Tensor output;                 // [seq_len×d_model]
    std::vector<Tensor> attention;  // per head, [seq_len×seq_len]
};
MhsaOutput mhsa_forward(const EncoderLayerParams& layer, const Tensor& x, const EncoderConfig& config);
Tensor ffn_forward(const EncoderLayerParams& layer, const Tensor& x, const EncoderConfig& config);
std::vector<double> encoder_classify(const EncoderParams& params, const Tensor& x, const EncoderConfig& config);
std::vector<double> extract_transformer_feature(const EncoderParams& params, const Tensor& x,
                                                const EncoderConfig& config);

// Encoder-only classifier over token sequences. When trained from a dataset,
// each sample's LaViLa vector is read as a row-major [len/d_model × d_model]
// token sequence.
class TransformerModel final : public Model {
public:
    explicit TransformerModel(const EncoderConfig& config);

    ModelKind kind() const override { return ModelKind::Transformer; }
    const ModelConfig& config() const override { return config_; }
    std::size_t n_classes() const override { return config_.encoder.n_classes; }
    std::uint8_t required_modalities() const override { return kMaskLavila; }
    std::vector<ParamRef> parameters() override { return params_.refs(); }
    ForwardResult forward(Tape& tape, const std::vector<Var>& p, const Batch& batch) const override;

    EncoderParams& params() { return params_; }
    const EncoderParams& params() const { return params_; }

private:
    ModelConfig config_;
    EncoderParams params_;
};

}  // namespace mtbr
