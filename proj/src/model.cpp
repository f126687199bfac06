#include "mtbr/model.hpp"

#include <algorithm>
#include <cmath>

#include "mtbr/binary_io.hpp"
#include "mtbr/errors.hpp"
#include "mtbr/fusion.hpp"
#include "mtbr/transformer.hpp"

namespace mtbr {

std::string_view model_kind_name(ModelKind k) {
    switch (k) {
        case ModelKind::MultiviewRgb: return "multiview-rgb";
        case ModelKind::MultiviewDct: return "multiview-dct";
        case ModelKind::Bimodal: return "bimodal";
        case ModelKind::Trimodal: return "trimodal";
        case ModelKind::Transformer: return "transformer";
    }
    return "?";
}

ModelKind parse_model_kind(std::string_view name) {
    for (auto k : {ModelKind::MultiviewRgb, ModelKind::MultiviewDct, ModelKind::Bimodal, ModelKind::Trimodal,
                   ModelKind::Transformer}) {
        if (model_kind_name(k) == name) return k;
    }
    throw ValidationError("unknown model kind \"" + std::string(name) + "\"");
}

ModelKind model_kind_for_modalities(std::string_view modalities) {
    std::uint8_t mask = 0;
    std::size_t pos = 0;
    while (pos <= modalities.size()) {
        const auto comma = std::min(modalities.find(',', pos), modalities.size());
        auto tok = modalities.substr(pos, comma - pos);
        while (!tok.empty() && tok.front() == ' ') tok.remove_prefix(1);
        while (!tok.empty() && tok.back() == ' ') tok.remove_suffix(1);
        if (tok == "rgb") mask |= kMaskRgb;
        else if (tok == "dct") mask |= kMaskDct;
        else if (tok == "lavila") mask |= kMaskLavila;
        else throw ValidationError("unknown modality \"" + std::string(tok) + "\"");
        pos = comma + 1;
    }
    switch (mask) {
        case kMaskRgb: return ModelKind::MultiviewRgb;
        case kMaskDct: return ModelKind::MultiviewDct;
        case kMaskRgb | kMaskDct: return ModelKind::Bimodal;
        case kMaskRgb | kMaskDct | kMaskLavila: return ModelKind::Trimodal;
        case kMaskLavila: return ModelKind::Transformer;
        default: throw ValidationError("no model consumes modalities \"" + std::string(modalities) + "\"");
    }
}

void FusionConfig::validate() const {
    if (feat_dim == 0 || hidden == 0 || n_classes == 0) throw ContractError("fusion config sizes must be positive");
    if (n_views != kNumViews) throw ContractError("fusion networks take exactly 3 views");
    if (hidden < 2) throw ContractError("hidden width must be at least 2 for layer normalisation");
    if (!(layer_norm_eps > 0.0)) throw ContractError("layer_norm_eps must be positive");
}

void EncoderConfig::validate() const {
    if (d_model == 0 || n_heads == 0 || d_ff == 0 || n_layers == 0 || seq_len == 0 || n_classes == 0) {
        throw ContractError("encoder config sizes must be positive");
    }
    if (d_model % n_heads != 0) {
        throw ContractError("n_heads (" + std::to_string(n_heads) + ") must divide d_model (" +
                            std::to_string(d_model) + ")");
    }
    if (d_model < 2) throw ContractError("d_model must be at least 2");
    if (!(layer_norm_eps > 0.0)) throw ContractError("layer_norm_eps must be positive");
}

std::vector<ConstParamRef> Model::parameters() const {
    std::vector<ConstParamRef> out;
    for (auto& r : const_cast<Model*>(this)->parameters()) out.push_back({r.name, r.value, r.trainable});
    return out;
}

std::vector<Tensor> Model::snapshot() const {
    std::vector<Tensor> out;
    for (const auto& r : parameters()) out.push_back(*r.value);
    return out;
}

void Model::restore(const std::vector<Tensor>& values) {
    auto refs = parameters();
    if (refs.size() != values.size()) throw ContractError("restore: parameter count mismatch");
    for (std::size_t i = 0; i < refs.size(); ++i) {
        if (refs[i].value->shape() != values[i].shape()) {
            throw DimensionError("restore: " + refs[i].name + " expects " + shape_str(refs[i].value->shape()) +
                                 ", got " + shape_str(values[i].shape()));
        }
        *refs[i].value = values[i];
    }
}

std::vector<Var> bind_parameters(Tape& tape, const Model& model, bool with_grad) {
    std::vector<Var> out;
    for (const auto& r : model.parameters()) out.push_back(tape.leaf(*r.value, with_grad && r.trainable));
    return out;
}

std::unique_ptr<Model> make_model(const ModelConfig& config) {
    std::unique_ptr<Model> m;
    switch (config.kind) {
        case ModelKind::MultiviewRgb: m = std::make_unique<MultiviewModel>(Modality::Rgb, config.fusion); break;
        case ModelKind::MultiviewDct: m = std::make_unique<MultiviewModel>(Modality::Dct, config.fusion); break;
        case ModelKind::Bimodal:
        case ModelKind::Trimodal: m = std::make_unique<FusionModel>(config); break;
        case ModelKind::Transformer: m = std::make_unique<TransformerModel>(config.encoder); break;
    }
    if (!m) throw ContractError("unknown model kind");
    return m;
}

Batch make_batch(const Model& model, std::span<const SampleRecord* const> records) {
    Batch b;
    b.size = records.size();
    if (records.empty()) return b;
    const std::uint8_t need = model.required_modalities();
    const std::size_t c = model.n_classes();
    b.targets = Tensor({b.size, c});
    for (std::size_t i = 0; i < b.size; ++i) {
        if (records[i]->labels.size() != c) {
            throw DimensionError("record " + std::to_string(records[i]->id) + " has " +
                                 std::to_string(records[i]->labels.size()) + " labels, model predicts " +
                                 std::to_string(c));
        }
        for (std::size_t k = 0; k < c; ++k) b.targets.at(i, k) = records[i]->labels[k];
    }
    for (Modality mod : {Modality::Rgb, Modality::Dct}) {
        if (!(need & (mod == Modality::Rgb ? kMaskRgb : kMaskDct))) continue;
        auto& views = b.views[static_cast<std::size_t>(mod)];
        for (std::size_t v = 0; v < kNumViews; ++v) {
            const auto& first = records.front()->views(mod);
            if (first.size() != kNumViews) {
                throw DimensionError("dataset lacks the " + std::string(modality_name(mod)) + " modality");
            }
            const std::size_t dim = first[v].size();
            Tensor t({b.size, dim});
            for (std::size_t i = 0; i < b.size; ++i) {
                const auto& src = records[i]->views(mod);
                if (src.size() != kNumViews || src[v].size() != dim) {
                    throw DimensionError("record " + std::to_string(records[i]->id) + " has ragged " +
                                         std::string(modality_name(mod)) + " features");
                }
                std::copy(src[v].begin(), src[v].end(), t.data().begin() + static_cast<std::ptrdiff_t>(i * dim));
            }
            views.push_back(std::move(t));
        }
    }
    if (need & kMaskLavila) {
        const std::size_t dim = records.front()->lavila.size();
        if (dim == 0) throw DimensionError("dataset lacks the lavila modality");
        b.lavila = Tensor({b.size, dim});
        for (std::size_t i = 0; i < b.size; ++i) {
            if (records[i]->lavila.size() != dim) throw DimensionError("ragged lavila features");
            std::copy(records[i]->lavila.begin(), records[i]->lavila.end(),
                      b.lavila.data().begin() + static_cast<std::ptrdiff_t>(i * dim));
        }
    }
    return b;
}

double glorot_bound(std::size_t fan_in, std::size_t fan_out) {
    return std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
}

Tensor glorot_uniform(std::size_t fan_in, std::size_t fan_out, std::mt19937_64& rng) {
    const double bound = glorot_bound(fan_in, fan_out);
    std::uniform_real_distribution<double> dist(-bound, bound);
    Tensor w({fan_in, fan_out});
    for (auto& v : w.data()) v = dist(rng);
    return w;
}

std::mt19937_64 stream_rng(std::uint64_t seed, std::uint64_t stream) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
    return std::mt19937_64(seq);
}

// --- MTBP checkpoints ----------------------------------------------------------

std::vector<char> encode_checkpoint(const Model& model) {
    const ModelConfig& c = model.config();
    ByteWriter w;
    w.bytes("MTBP");
    w.u8(kCheckpointFormatVersion);
    w.u8(static_cast<std::uint8_t>(c.kind));
    w.u32(static_cast<std::uint32_t>(c.fusion.feat_dim));
    w.u32(static_cast<std::uint32_t>(c.fusion.hidden));
    w.u16(static_cast<std::uint16_t>(c.fusion.n_views));
    w.u16(static_cast<std::uint16_t>(c.fusion.n_classes));
    w.f64(c.fusion.layer_norm_eps);
    w.u64(c.fusion.seed);
    w.u32(static_cast<std::uint32_t>(c.lavila_dim));
    w.u8(c.freeze_branches ? 1 : 0);
    w.u32(static_cast<std::uint32_t>(c.encoder.d_model));
    w.u32(static_cast<std::uint32_t>(c.encoder.n_heads));
    w.u32(static_cast<std::uint32_t>(c.encoder.d_ff));
    w.u32(static_cast<std::uint32_t>(c.encoder.n_layers));
    w.u32(static_cast<std::uint32_t>(c.encoder.seq_len));
    w.u16(static_cast<std::uint16_t>(c.encoder.n_classes));
    w.u8(c.encoder.positional_encoding ? 1 : 0);
    w.f64(c.encoder.layer_norm_eps);
    w.u64(c.encoder.seed);

    const auto params = model.parameters();
    w.u32(static_cast<std::uint32_t>(params.size()));
    for (const auto& p : params) {
        w.u16(static_cast<std::uint16_t>(p.name.size()));
        w.bytes(p.name);
        w.u8(static_cast<std::uint8_t>(p.value->rank()));
        for (auto d : p.value->shape()) w.u32(static_cast<std::uint32_t>(d));
        for (double v : p.value->data()) w.f64(v);
    }
    return w.buffer();
}

std::unique_ptr<Model> decode_checkpoint(std::vector<char> bytes) {
    ByteReader r(std::move(bytes));
    r.expect_magic("MTBP");
    if (r.u8() != kCheckpointFormatVersion) r.fail("unsupported MTBP version");
    ModelConfig c;
    const auto kind = r.u8();
    if (kind > static_cast<std::uint8_t>(ModelKind::Transformer)) r.fail("unknown model kind " + std::to_string(kind));
    c.kind = static_cast<ModelKind>(kind);
    c.fusion.feat_dim = r.u32();
    c.fusion.hidden = r.u32();
    c.fusion.n_views = r.u16();
    c.fusion.n_classes = r.u16();
    c.fusion.layer_norm_eps = r.f64();
    c.fusion.seed = r.u64();
    c.lavila_dim = r.u32();
    c.freeze_branches = r.u8() != 0;
    c.encoder.d_model = r.u32();
    c.encoder.n_heads = r.u32();
    c.encoder.d_ff = r.u32();
    c.encoder.n_layers = r.u32();
    c.encoder.seq_len = r.u32();
    c.encoder.n_classes = r.u16();
    c.encoder.positional_encoding = r.u8() != 0;
    c.encoder.layer_norm_eps = r.f64();
    c.encoder.seed = r.u64();
    const std::uint64_t config_end = r.offset();

    std::unique_ptr<Model> model;
    try {
        model = make_model(c);
    } catch (const std::exception& e) {
        throw FormatError(std::string("invalid model configuration: ") + e.what(), config_end);
    }
    auto params = model->parameters();
    const auto count = r.u32();
    if (count != params.size()) {
        r.fail("checkpoint holds " + std::to_string(count) + " tensors, model expects " + std::to_string(params.size()));
    }
    for (auto& p : params) {
        const auto len = r.u16();
        const std::string name = r.str(len);
        if (name != p.name) r.fail("expected tensor \"" + p.name + "\", found \"" + name + "\"");
        const auto rank = r.u8();
        Shape shape;
        for (std::uint8_t i = 0; i < rank; ++i) shape.push_back(r.u32());
        if (shape != p.value->shape()) {
            r.fail("tensor " + name + " has shape " + shape_str(shape) + ", expected " + shape_str(p.value->shape()));
        }
        if (r.remaining() / 8 < p.value->numel()) r.fail("truncated payload of tensor " + name);
        for (auto& v : p.value->data()) v = r.f64();
    }
    r.expect_end();
    return model;
}

void save_checkpoint(const Model& model, const std::string& path) {
    write_file_bytes(path, encode_checkpoint(model));
}

std::unique_ptr<Model> load_checkpoint(const std::string& path) { return decode_checkpoint(read_file_bytes(path)); }

}  // namespace mtbr
