#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mtbr/autodiff.hpp"
#include "mtbr/dataio.hpp"
#include "mtbr/tensor.hpp"

namespace mtbr {

struct ParamRef {
    std::string name;
    Tensor* value = nullptr;
    bool trainable = true;
};

struct ConstParamRef {
    std::string name;
    const Tensor* value = nullptr;
    bool trainable = true;
};

// Features of a mini-batch, converted to double. Only the slots a model
// needs are filled.
struct Batch {
    std::size_t size = 0;
    std::array<std::vector<Tensor>, 2> views;  // [rgb|dct][view] -> [b×feat_dim]
    Tensor lavila;                             // [b×lavila_dim]
    Tensor targets;                            // [b×n_classes]
};

struct ForwardResult {
    Var probs;                                  // [b×n_classes]
    std::vector<std::pair<Modality, Var>> attention;  // [b×3] per fused modality
};

enum class ModelKind : std::uint8_t {
    MultiviewRgb = 0,
    MultiviewDct = 1,
    Bimodal = 2,
    Trimodal = 3,
    Transformer = 4,
};

std::string_view model_kind_name(ModelKind k);
ModelKind parse_model_kind(std::string_view name);

// Maps a modality list such as "rgb,dct" onto the model that consumes it:
// rgb / dct -> multiview, rgb,dct -> bimodal, rgb,dct,lavila -> trimodal,
// lavila -> transformer.
ModelKind model_kind_for_modalities(std::string_view modalities);

struct FusionConfig {
    std::size_t feat_dim = kSwinFeatureDim;
    std::size_t hidden = 64;
    std::size_t n_views = kNumViews;
    std::size_t n_classes = kNumClasses;
    double layer_norm_eps = 1e-5;
    std::uint64_t seed = 0;

    void validate() const;
};

struct EncoderConfig {
    std::size_t d_model = kLavilaDim;
    std::size_t n_heads = 4;
    std::size_t d_ff = 2048;
    std::size_t n_layers = 1;
    std::size_t seq_len = 256;
    std::size_t n_classes = kNumClasses;
    bool positional_encoding = false;
    double layer_norm_eps = 1e-5;
    std::uint64_t seed = 0;

    void validate() const;
};

struct ModelConfig {
    ModelKind kind = ModelKind::MultiviewRgb;
    FusionConfig fusion;
    std::size_t lavila_dim = kLavilaDim;
    EncoderConfig encoder;
    // Fusion models: keep the per-modality branches fixed, train only the heads.
    bool freeze_branches = false;
};

class Model {
public:
    virtual ~Model() = default;

    virtual ModelKind kind() const = 0;
    virtual const ModelConfig& config() const = 0;
    virtual std::size_t n_classes() const = 0;
    // Dataset modality bits this model reads.
    virtual std::uint8_t required_modalities() const = 0;

    virtual std::vector<ParamRef> parameters() = 0;
    std::vector<ConstParamRef> parameters() const;

    // Builds the batch graph on tape. p holds one Var per parameters() entry.
    virtual ForwardResult forward(Tape& tape, const std::vector<Var>& p, const Batch& batch) const = 0;

    std::vector<Tensor> snapshot() const;
    void restore(const std::vector<Tensor>& values);
};

// Puts every parameter on the tape; trainable ones record gradients when
// with_grad is set, the rest are constants.
std::vector<Var> bind_parameters(Tape& tape, const Model& model, bool with_grad);

std::unique_ptr<Model> make_model(const ModelConfig& config);

// Gathers the given records into a batch laid out for model.
Batch make_batch(const Model& model, std::span<const SampleRecord* const> records);

// Glorot-uniform weight matrix, bound √(6/(fan_in+fan_out)).
Tensor glorot_uniform(std::size_t fan_in, std::size_t fan_out, std::mt19937_64& rng);
double glorot_bound(std::size_t fan_in, std::size_t fan_out);

// Seeded generator for a named stream, so init and data order can vary
// independently of each other.
std::mt19937_64 stream_rng(std::uint64_t seed, std::uint64_t stream);

inline constexpr std::uint64_t kInitStream = 1;
inline constexpr std::uint64_t kShuffleStream = 2;

// MTBP checkpoint file.
inline constexpr std::uint8_t kCheckpointFormatVersion = 1;
std::vector<char> encode_checkpoint(const Model& model);
std::unique_ptr<Model> decode_checkpoint(std::vector<char> bytes);
void save_checkpoint(const Model& model, const std::string& path);
std::unique_ptr<Model> load_checkpoint(const std::string& path);

}  // namespace mtbr
