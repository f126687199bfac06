#include "mtbr/fusion.hpp"

#include "mtbr/errors.hpp"

namespace mtbr {

std::vector<ParamRef> MultiviewAttentionParams::refs(const std::string& prefix) {
    std::vector<ParamRef> out;
    for (std::size_t v = 0; v < kNumViews; ++v) {
        out.push_back({prefix + "view" + std::to_string(v) + ".weight", &view_weight[v]});
        out.push_back({prefix + "view" + std::to_string(v) + ".bias", &view_bias[v]});
    }
    out.push_back({prefix + "attention.weight", &att_weight});
    out.push_back({prefix + "attention.bias", &att_bias});
    out.push_back({prefix + "norm.gamma", &norm_gamma});
    out.push_back({prefix + "norm.beta", &norm_beta});
    out.push_back({prefix + "classifier.weight", &cls_weight});
    out.push_back({prefix + "classifier.bias", &cls_bias});
    return out;
}

MultiviewAttentionParams init_params(const FusionConfig& config, std::mt19937_64& rng) {
    config.validate();
    MultiviewAttentionParams p;
    for (std::size_t v = 0; v < kNumViews; ++v) {
        p.view_weight[v] = glorot_uniform(config.feat_dim, config.hidden, rng);
        p.view_bias[v] = Tensor({config.hidden});
    }
    p.att_weight = glorot_uniform(kNumViews * config.hidden, kNumViews, rng);
    p.att_bias = Tensor({kNumViews});
    p.norm_gamma = Tensor({config.hidden}, 1.0);
    p.norm_beta = Tensor({config.hidden});
    p.cls_weight = glorot_uniform(config.hidden, config.n_classes, rng);
    p.cls_bias = Tensor({config.n_classes});
    return p;
}

BranchVars BranchVars::from(std::span<const Var> p) {
    if (p.size() < kBranchParamCount) throw ContractError("fusion branch needs 10 parameter handles");
    BranchVars b;
    for (std::size_t v = 0; v < kNumViews; ++v) {
        b.view_weight[v] = p[2 * v];
        b.view_bias[v] = p[2 * v + 1];
    }
    b.att_weight = p[6];
    b.att_bias = p[7];
    b.norm_gamma = p[8];
    b.norm_beta = p[9];
    return b;
}

BranchOutputs fuse_views(const BranchVars& branch, const std::array<Var, kNumViews>& views, double eps) {
    std::vector<Var> projected;
    for (std::size_t v = 0; v < kNumViews; ++v) {
        projected.push_back(dense(views[v], branch.view_weight[v], branch.view_bias[v]));
    }
    // Attention reads the raw projections; the weighted sum uses normalised ones.
    Var alpha = softmax(dense(concat(projected), branch.att_weight, branch.att_bias));
    Var fused;
    for (std::size_t v = 0; v < kNumViews; ++v) {
        Var z = layer_norm(projected[v], branch.norm_gamma, branch.norm_beta, eps);
        Var weighted = row_scale(z, slice_cols(alpha, v, 1));
        fused = v == 0 ? weighted : add(fused, weighted);
    }
    return {alpha, fused};
}

namespace {

std::array<Var, kNumViews> view_constants(Tape& tape, const std::array<std::span<const double>, kNumViews>& views,
                                          std::size_t feat_dim) {
    std::array<Var, kNumViews> out;
    for (std::size_t v = 0; v < kNumViews; ++v) {
        if (views[v].size() != feat_dim) {
            throw DimensionError("view " + std::to_string(v) + " has " + std::to_string(views[v].size()) +
                                 " features, expected " + std::to_string(feat_dim));
        }
        out[v] = tape.constant(Tensor({1, feat_dim}, std::vector<double>(views[v].begin(), views[v].end())));
    }
    return out;
}

std::vector<Var> constants_for(Tape& tape, std::vector<ParamRef> refs) {
    std::vector<Var> out;
    for (auto& r : refs) out.push_back(tape.constant(*r.value));
    return out;
}

void check_batch_views(const Batch& batch, Modality m, std::size_t feat_dim) {
    const auto& views = batch.views[static_cast<std::size_t>(m)];
    if (views.size() != kNumViews) {
        throw DimensionError("batch lacks the three " + std::string(modality_name(m)) + " views");
    }
    for (const auto& v : views) {
        if (v.rank() != 2 || v.dim(0) != batch.size || v.dim(1) != feat_dim) {
            throw DimensionError(std::string(modality_name(m)) + " view batch " + shape_str(v.shape()) +
                                 " does not match [" + std::to_string(batch.size) + "x" + std::to_string(feat_dim) + "]");
        }
    }
}

std::array<Var, kNumViews> batch_views(Tape& tape, const Batch& batch, Modality m) {
    const auto& views = batch.views[static_cast<std::size_t>(m)];
    return {tape.constant(views[0]), tape.constant(views[1]), tape.constant(views[2])};
}

}  // namespace

MultiviewOutput multiview_forward(const MultiviewAttentionParams& params,
                                  const std::array<std::span<const double>, kNumViews>& views,
                                  double layer_norm_eps) {
    Tape tape;
    auto p = constants_for(tape, const_cast<MultiviewAttentionParams&>(params).refs(""));
    auto xs = view_constants(tape, views, params.view_weight[0].dim(0));
    auto out = fuse_views(BranchVars::from(p), xs, layer_norm_eps);
    Var probs = sigmoid(dense(out.fused, p[10], p[11]));
    MultiviewOutput res;
    res.probs = probs.value().storage();
    for (std::size_t v = 0; v < kNumViews; ++v) res.alpha[v] = out.alpha.value()[v];
    res.fused = out.fused.value().storage();
    return res;
}

// --- MultiviewModel ----------------------------------------------------------

MultiviewModel::MultiviewModel(Modality modality, const FusionConfig& config) : modality_(modality) {
    if (modality == Modality::Lavila) throw ContractError("multiview fusion needs the rgb or dct modality");
    config_.kind = kind();
    config_.fusion = config;
    auto rng = stream_rng(config.seed, kInitStream);
    net_ = init_params(config, rng);
}

ModelKind MultiviewModel::kind() const {
    return modality_ == Modality::Rgb ? ModelKind::MultiviewRgb : ModelKind::MultiviewDct;
}

std::uint8_t MultiviewModel::required_modalities() const {
    return modality_ == Modality::Rgb ? kMaskRgb : kMaskDct;
}

std::vector<ParamRef> MultiviewModel::parameters() { return net_.refs(""); }

ForwardResult MultiviewModel::forward(Tape& tape, const std::vector<Var>& p, const Batch& batch) const {
    check_batch_views(batch, modality_, config_.fusion.feat_dim);
    auto out = fuse_views(BranchVars::from(p), batch_views(tape, batch, modality_), config_.fusion.layer_norm_eps);
    Var probs = sigmoid(dense(out.fused, p[10], p[11]));
    return {probs, {{modality_, out.alpha}}};
}

// --- FusionModel -------------------------------------------------------------

FusionModel::FusionModel(const ModelConfig& config) : config_(config) {
    if (config.kind != ModelKind::Bimodal && config.kind != ModelKind::Trimodal) {
        throw ContractError("FusionModel is either bimodal or trimodal");
    }
    const auto& fc = config_.fusion;
    fc.validate();
    auto rng = stream_rng(fc.seed, kInitStream);
    rgb_ = init_params(fc, rng);
    dct_ = init_params(fc, rng);
    if (trimodal()) {
        if (config_.lavila_dim == 0) throw ContractError("lavila_dim must be positive");
        lavila_weight_ = glorot_uniform(config_.lavila_dim, fc.hidden, rng);
        lavila_bias_ = Tensor({fc.hidden});
    }
    head_weight_ = glorot_uniform(fc.hidden, fc.n_classes, rng);
    head_bias_ = Tensor({fc.n_classes});
}

std::uint8_t FusionModel::required_modalities() const {
    return kMaskRgb | kMaskDct | (trimodal() ? kMaskLavila : 0);
}

std::vector<ParamRef> FusionModel::parameters() {
    std::vector<ParamRef> out;
    for (auto* net : {&rgb_, &dct_}) {
        auto refs = net->refs(net == &rgb_ ? "rgb." : "dct.");
        refs.resize(kBranchParamCount);
        for (auto& r : refs) {
            r.trainable = !config_.freeze_branches;
            out.push_back(std::move(r));
        }
    }
    if (trimodal()) {
        out.push_back({"lavila.weight", &lavila_weight_});
        out.push_back({"lavila.bias", &lavila_bias_});
    }
    out.push_back({"head.weight", &head_weight_});
    out.push_back({"head.bias", &head_bias_});
    return out;
}

ForwardResult FusionModel::forward(Tape& tape, const std::vector<Var>& p, const Batch& batch) const {
    const auto& fc = config_.fusion;
    check_batch_views(batch, Modality::Rgb, fc.feat_dim);
    check_batch_views(batch, Modality::Dct, fc.feat_dim);
    const std::span<const Var> all(p);
    auto rgb = fuse_views(BranchVars::from(all.subspan(0, kBranchParamCount)), batch_views(tape, batch, Modality::Rgb),
                          fc.layer_norm_eps);
    auto dct = fuse_views(BranchVars::from(all.subspan(kBranchParamCount, kBranchParamCount)),
                          batch_views(tape, batch, Modality::Dct), fc.layer_norm_eps);
    Var sum = add(rgb.fused, dct.fused);
    std::size_t next = 2 * kBranchParamCount;
    if (trimodal()) {
        if (batch.lavila.rank() != 2 || batch.lavila.dim(0) != batch.size || batch.lavila.dim(1) != config_.lavila_dim) {
            throw DimensionError("trimodal fusion needs lavila features [" + std::to_string(batch.size) + "x" +
                                 std::to_string(config_.lavila_dim) + "], got " + shape_str(batch.lavila.shape()));
        }
        sum = add(sum, dense(tape.constant(batch.lavila), p[next], p[next + 1]));
        next += 2;
    }
    Var probs = sigmoid(dense(sum, p[next], p[next + 1]));
    return {probs, {{Modality::Rgb, rgb.alpha}, {Modality::Dct, dct.alpha}}};
}

void FusionModel::load_branch(const MultiviewModel& source) {
    const auto& fc = source.config().fusion;
    if (fc.feat_dim != config_.fusion.feat_dim || fc.hidden != config_.fusion.hidden) {
        throw DimensionError("branch shapes differ from the fusion model's");
    }
    branch(source.modality()) = source.net();
}

std::vector<double> FusionModel::predict_one(const std::array<std::span<const double>, kNumViews>& rgb_views,
                                             const std::array<std::span<const double>, kNumViews>& dct_views,
                                             std::span<const double> lavila) const {
    Batch b;
    b.size = 1;
    const std::size_t fd = config_.fusion.feat_dim;
    for (std::size_t v = 0; v < kNumViews; ++v) {
        for (auto [m, src] : {std::pair{0, &rgb_views}, std::pair{1, &dct_views}}) {
            if ((*src)[v].size() != fd) {
                throw DimensionError("view " + std::to_string(v) + " has " + std::to_string((*src)[v].size()) +
                                     " features, expected " + std::to_string(fd));
            }
            b.views[m].emplace_back(Shape{1, fd}, std::vector<double>((*src)[v].begin(), (*src)[v].end()));
        }
    }
    if (trimodal()) {
        if (lavila.size() != config_.lavila_dim) throw DimensionError("trimodal fusion needs the lavila modality");
        b.lavila = Tensor({1, lavila.size()}, std::vector<double>(lavila.begin(), lavila.end()));
    }
    Tape tape;
    auto p = bind_parameters(tape, *this, false);
    return forward(tape, p, b).probs.value().storage();
}

// --- attention report ------------------------------------------------------------

std::map<Modality, std::array<double, kNumViews>> attention_report(const Model& model,
                                                                   std::span<const SampleRecord* const> records) {
    if (records.empty()) throw ContractError("attention_report: empty split");
    std::map<Modality, std::array<double, kNumViews>> sums;
    constexpr std::size_t kChunk = 256;
    for (std::size_t start = 0; start < records.size(); start += kChunk) {
        const auto chunk = records.subspan(start, std::min(kChunk, records.size() - start));
        Batch b = make_batch(model, chunk);
        Tape tape;
        auto p = bind_parameters(tape, model, false);
        auto out = model.forward(tape, p, b);
        for (const auto& [mod, alpha] : out.attention) {
            auto& acc = sums.try_emplace(mod, std::array<double, kNumViews>{}).first->second;
            const Tensor& a = alpha.value();
            for (std::size_t r = 0; r < a.dim(0); ++r)
                for (std::size_t v = 0; v < kNumViews; ++v) acc[v] += a.at(r, v);
        }
    }
    for (auto& [mod, acc] : sums)
        for (auto& v : acc) v /= static_cast<double>(records.size());
    return sums;
}

std::map<Modality, std::array<double, kNumViews>> attention_report(const Model& model, const Dataset& dataset,
                                                                   Split split) {
    const auto records = dataset.split(split);
    if (records.empty()) throw ContractError("attention_report: split " + std::string(split_name(split)) + " is empty");
    return attention_report(model, std::span<const SampleRecord* const>(records));
}

}  // namespace mtbr
