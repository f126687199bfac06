#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace mtbr {

enum class Modality : std::uint8_t { Rgb = 0, Dct = 1, Lavila = 2 };
enum class Split : std::uint8_t { Train = 0, Val = 1, Test = 2 };

inline constexpr std::uint8_t kMaskRgb = 1u << 0;
inline constexpr std::uint8_t kMaskDct = 1u << 1;
inline constexpr std::uint8_t kMaskLavila = 1u << 2;

inline constexpr std::size_t kNumViews = 3;  // frontal, left, right
inline constexpr std::size_t kNumClasses = 14;
inline constexpr std::size_t kSwinFeatureDim = 1024;
inline constexpr std::size_t kLavilaDim = 768;

// Label index order.
inline constexpr std::array<std::string_view, kNumClasses> kBehaviorClasses = {
    "hand-face", "hand-mouth", "gesture", "fumble", "scratch",
    "stretching", "smearing-hands", "shrug", "adjusting-clothing", "groom",
    "fold-arms", "leg-movements", "settle", "legs-crossed"};

std::string_view split_name(Split s);
Split parse_split(std::string_view name);
std::string_view modality_name(Modality m);

struct SampleRecord {
    std::uint64_t id = 0;
    Split split = Split::Train;
    std::vector<std::uint8_t> labels;           // n_classes entries of {0,1}
    std::vector<std::vector<float>> rgb;        // [view][feat_dim]; empty when absent
    std::vector<std::vector<float>> dct;        // [view][feat_dim]; empty when absent
    std::vector<float> lavila;                  // [lavila_dim]; empty when absent

    const std::vector<std::vector<float>>& views(Modality m) const { return m == Modality::Rgb ? rgb : dct; }

    friend bool operator==(const SampleRecord&, const SampleRecord&) = default;
};

struct DatasetManifest {
    std::uint16_t n_views = kNumViews;
    std::uint16_t n_classes = kNumClasses;
    std::uint32_t feat_dim = kSwinFeatureDim;
    std::uint8_t modality_mask = kMaskRgb | kMaskDct;
    std::uint32_t lavila_dim = kLavilaDim;
    std::map<std::uint64_t, Split> splits;

    std::uint64_t n_samples() const { return splits.size(); }
    bool has(Modality m) const { return (modality_mask >> static_cast<unsigned>(m)) & 1u; }

    friend bool operator==(const DatasetManifest&, const DatasetManifest&) = default;
};

struct Dataset {
    DatasetManifest manifest;
    std::vector<SampleRecord> records;

    std::vector<const SampleRecord*> split(Split s) const;
};

// Builds the manifest (split map included) describing a record list.
DatasetManifest make_manifest(const std::vector<SampleRecord>& records, std::uint8_t modality_mask,
                              std::uint32_t feat_dim, std::uint16_t n_classes = kNumClasses,
                              std::uint32_t lavila_dim = kLavilaDim);

// Throws ValidationError when records disagree with the manifest.
void validate_dataset(const DatasetManifest& manifest, const std::vector<SampleRecord>& records);

// MTBR binary dataset file.
inline constexpr std::uint8_t kDatasetFormatVersion = 1;
std::vector<char> encode_dataset(const DatasetManifest& manifest, const std::vector<SampleRecord>& records);
Dataset decode_dataset(std::vector<char> bytes);
void write_dataset(const std::vector<SampleRecord>& records, const DatasetManifest& manifest,
                   const std::string& path);
Dataset read_dataset(const std::string& path);

// Per-class positive fraction.
std::vector<double> class_prevalence(const std::vector<SampleRecord>& records);
std::vector<double> class_prevalence(const std::vector<const SampleRecord*>& records);

// --- synthetic data with planted structure ----------------------------------

enum class InformativeModality : std::uint8_t { Rgb, Dct, Both };

struct SynthSpec {
    std::uint64_t seed = 0;
    std::size_t n_train = 2000;
    std::size_t n_val = 500;
    std::size_t n_test = 0;
    std::size_t n_classes = kNumClasses;
    std::size_t feat_dim = kSwinFeatureDim;
    std::size_t lavila_dim = kLavilaDim;
    std::uint8_t modality_mask = kMaskRgb | kMaskDct;
    std::vector<std::size_t> informative_view;                // per class
    std::vector<InformativeModality> informative_modality;    // per class
    double signal_strength = 3.0;
    std::vector<double> label_prevalence;                     // per class, in (0,1)
    double noise_sigma = 1.0;

    // Every class planted in the same (modality, view) at one prevalence.
    static SynthSpec uniform(std::size_t n_classes, std::size_t view, InformativeModality modality,
                             double prevalence);

    void validate() const;
};

// Deterministic in spec. For each positive class c a seeded unit direction
// u_c scaled by signal_strength is added only to the informative
// (modality, view) slot; every feature gets N(0, noise_sigma²) noise.
Dataset generate_synthetic(const SynthSpec& spec);

// Unit-norm planted direction of every class (rows), as used by the generator.
std::vector<std::vector<double>> planted_directions(const SynthSpec& spec);

}  // namespace mtbr
