#include "mtbr/transformer.hpp"

#include <cmath>

#include "mtbr/errors.hpp"

namespace mtbr {

std::vector<ParamRef> EncoderLayerParams::refs(const std::string& prefix) {
    return {
        {prefix + "attn_norm.gamma", &attn_norm_gamma}, {prefix + "attn_norm.beta", &attn_norm_beta},
        {prefix + "query.weight", &wq},                 {prefix + "query.bias", &bq},
        {prefix + "key.weight", &wk},
        {prefix + "value.weight", &wv},                 {prefix + "value.bias", &bv},
        {prefix + "out.weight", &wo},                   {prefix + "out.bias", &bo},
        {prefix + "ffn_norm.gamma", &ffn_norm_gamma},   {prefix + "ffn_norm.beta", &ffn_norm_beta},
        {prefix + "ffn1.weight", &w1},                  {prefix + "ffn1.bias", &b1},
        {prefix + "ffn2.weight", &w2},                  {prefix + "ffn2.bias", &b2},
    };
}

std::vector<ParamRef> EncoderParams::refs() {
    std::vector<ParamRef> out;
    for (std::size_t l = 0; l < layers.size(); ++l) {
        auto r = layers[l].refs("layer" + std::to_string(l) + ".");
        out.insert(out.end(), r.begin(), r.end());
    }
    out.push_back({"classifier.weight", &cls_weight});
    out.push_back({"classifier.bias", &cls_bias});
    return out;
}

EncoderParams init_encoder(const EncoderConfig& config, std::mt19937_64& rng) {
    config.validate();
    const std::size_t d = config.d_model;
    EncoderParams p;
    for (std::size_t l = 0; l < config.n_layers; ++l) {
        EncoderLayerParams L;
        L.attn_norm_gamma = Tensor({d}, 1.0);
        L.attn_norm_beta = Tensor({d});
        L.wq = glorot_uniform(d, d, rng);
        L.bq = Tensor({d});
        L.wk = glorot_uniform(d, d, rng);
        L.wv = glorot_uniform(d, d, rng);
        L.bv = Tensor({d});
        L.wo = glorot_uniform(d, d, rng);
        L.bo = Tensor({d});
        L.ffn_norm_gamma = Tensor({d}, 1.0);
        L.ffn_norm_beta = Tensor({d});
        L.w1 = glorot_uniform(d, config.d_ff, rng);
        L.b1 = Tensor({config.d_ff});
        L.w2 = glorot_uniform(config.d_ff, d, rng);
        L.b2 = Tensor({d});
        p.layers.push_back(std::move(L));
    }
    p.cls_weight = glorot_uniform(d, config.n_classes, rng);
    p.cls_bias = Tensor({config.n_classes});
    return p;
}

LayerVars LayerVars::from(std::span<const Var> p) {
    if (p.size() < kEncoderLayerParamCount) throw ContractError("encoder layer needs 15 parameter handles");
    return {p[0], p[1], p[2], p[3], p[4], p[5], p[6], p[7], p[8], p[9], p[10], p[11], p[12], p[13], p[14]};
}

Var mhsa_block(const LayerVars& layer, Var x, const EncoderConfig& config, std::vector<Var>* attention) {
    const Tensor& xv = x.value();
    if (xv.rank() != 2 || xv.dim(1) != config.d_model) {
        throw DimensionError("mhsa: tokens " + shape_str(xv.shape()) + " do not have width " +
                             std::to_string(config.d_model));
    }
    Var normed = layer_norm(x, layer.attn_norm_gamma, layer.attn_norm_beta, config.layer_norm_eps);
    Var q = dense(normed, layer.wq, layer.bq);
    Var k = matmul(normed, layer.wk);
    Var v = dense(normed, layer.wv, layer.bv);
    const std::size_t head_dim = config.d_model / config.n_heads;
    const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(head_dim));
    std::vector<Var> heads;
    for (std::size_t h = 0; h < config.n_heads; ++h) {
        Var qh = slice_cols(q, h * head_dim, head_dim);
        Var kh = slice_cols(k, h * head_dim, head_dim);
        Var vh = slice_cols(v, h * head_dim, head_dim);
        Var weights = softmax(scale(matmul(qh, transpose(kh)), inv_sqrt));
        if (attention) attention->push_back(weights);
        heads.push_back(matmul(weights, vh));
    }
    Var merged = heads.size() == 1 ? heads.front() : concat(heads);
    return add(x, dense(merged, layer.wo, layer.bo));
}

Var ffn_block(const LayerVars& layer, Var x, const EncoderConfig& config) {
    Var normed = layer_norm(x, layer.ffn_norm_gamma, layer.ffn_norm_beta, config.layer_norm_eps);
    Var inner = relu(dense(normed, layer.w1, layer.b1));
    return add(x, dense(inner, layer.w2, layer.b2));
}

Var encode_pooled(std::span<const Var> p, Var x, const EncoderConfig& config) {
    if (p.size() < config.n_layers * kEncoderLayerParamCount) {
        throw ContractError("encoder: too few parameter handles");
    }
    Tape& tape = *x.tape;
    if (config.positional_encoding) {
        x = add(x, tape.constant(sinusoidal_positions(x.value().dim(0), config.d_model)));
    }
    for (std::size_t l = 0; l < config.n_layers; ++l) {
        auto layer = LayerVars::from(p.subspan(l * kEncoderLayerParamCount, kEncoderLayerParamCount));
        x = ffn_block(layer, mhsa_block(layer, x, config), config);
    }
    return mean_rows(x);
}

Tensor sinusoidal_positions(std::size_t seq_len, std::size_t d_model) {
    Tensor pe({seq_len, d_model});
    for (std::size_t pos = 0; pos < seq_len; ++pos) {
        for (std::size_t i = 0; i < d_model; ++i) {
            const double freq = std::pow(10000.0, -static_cast<double>(i - i % 2) / static_cast<double>(d_model));
            const double angle = static_cast<double>(pos) * freq;
            pe.at(pos, i) = i % 2 == 0 ? std::sin(angle) : std::cos(angle);
        }
    }
    return pe;
}

namespace {

std::vector<Var> constants_of(Tape& tape, std::vector<ParamRef> refs) {
    std::vector<Var> out;
    for (auto& r : refs) out.push_back(tape.constant(*r.value));
    return out;
}

void check_tokens(const Tensor& x, const EncoderConfig& config) {
    if (x.rank() != 2 || x.dim(1) != config.d_model) {
        throw DimensionError("token sequence " + shape_str(x.shape()) + " does not have width " +
                             std::to_string(config.d_model));
    }
}

}  // namespace

MhsaOutput mhsa_forward(const EncoderLayerParams& layer, const Tensor& x, const EncoderConfig& config) {
    check_tokens(x, config);
    Tape tape;
    auto p = constants_of(tape, const_cast<EncoderLayerParams&>(layer).refs(""));
    std::vector<Var> attn;
    Var out = mhsa_block(LayerVars::from(p), tape.constant(x), config, &attn);
    MhsaOutput res{out.value(), {}};
    for (auto a : attn) res.attention.push_back(a.value());
    return res;
}

Tensor ffn_forward(const EncoderLayerParams& layer, const Tensor& x, const EncoderConfig& config) {
    check_tokens(x, config);
    Tape tape;
    auto p = constants_of(tape, const_cast<EncoderLayerParams&>(layer).refs(""));
    return ffn_block(LayerVars::from(p), tape.constant(x), config).value();
}

std::vector<double> extract_transformer_feature(const EncoderParams& params, const Tensor& x,
                                                const EncoderConfig& config) {
    check_tokens(x, config);
    Tape tape;
    auto p = constants_of(tape, const_cast<EncoderParams&>(params).refs());
    return encode_pooled(p, tape.constant(x), config).value().storage();
}

std::vector<double> encoder_classify(const EncoderParams& params, const Tensor& x, const EncoderConfig& config) {
    check_tokens(x, config);
    Tape tape;
    auto p = constants_of(tape, const_cast<EncoderParams&>(params).refs());
    Var pooled = encode_pooled(p, tape.constant(x), config);
    const std::size_t n = p.size();
    return sigmoid(dense(pooled, p[n - 2], p[n - 1])).value().storage();
}

// --- TransformerModel --------------------------------------------------------

TransformerModel::TransformerModel(const EncoderConfig& config) {
    config_.kind = ModelKind::Transformer;
    config_.encoder = config;
    config_.fusion.n_classes = config.n_classes;
    auto rng = stream_rng(config.seed, kInitStream);
    params_ = init_encoder(config, rng);
}

ForwardResult TransformerModel::forward(Tape& tape, const std::vector<Var>& p, const Batch& batch) const {
    const auto& ec = config_.encoder;
    const Tensor& tokens = batch.lavila;
    if (tokens.rank() != 2 || tokens.dim(0) != batch.size || tokens.dim(1) % ec.d_model != 0) {
        throw DimensionError("transformer batch " + shape_str(tokens.shape()) + " is not a whole number of " +
                             std::to_string(ec.d_model) + "-wide tokens per sample");
    }
    const std::size_t seq = tokens.dim(1) / ec.d_model;
    const std::size_t n = p.size();
    std::vector<Var> pooled;
    for (std::size_t i = 0; i < batch.size; ++i) {
        std::vector<double> row(tokens.data().begin() + static_cast<std::ptrdiff_t>(i * tokens.dim(1)),
                                tokens.data().begin() + static_cast<std::ptrdiff_t>((i + 1) * tokens.dim(1)));
        Var x = tape.constant(Tensor({seq, ec.d_model}, std::move(row)));
        pooled.push_back(encode_pooled(p, x, ec));
    }
    Var probs = sigmoid(dense(concat_rows(pooled), p[n - 2], p[n - 1]));
    return {probs, {}};
}

}  // namespace mtbr
