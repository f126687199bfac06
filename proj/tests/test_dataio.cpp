#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>

#include "mtbr/binary_io.hpp"
#include "mtbr/dataio.hpp"
#include "mtbr/errors.hpp"
#include "test_support.hpp"

using namespace mtbr;
using mtbr::testing::ScratchDir;

namespace {

std::vector<SampleRecord> random_records(std::size_t n, std::uint8_t mask, std::size_t feat_dim, std::size_t n_classes,
                                         std::size_t lavila_dim, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<float> u(-3.0f, 3.0f);
    std::bernoulli_distribution coin(0.3);
    std::vector<SampleRecord> out;
    for (std::size_t i = 0; i < n; ++i) {
        SampleRecord r;
        r.id = 1000 + 7 * i;
        r.split = static_cast<Split>(i % 3);
        for (std::size_t c = 0; c < n_classes; ++c) r.labels.push_back(coin(rng) ? 1 : 0);
        auto views = [&] {
            std::vector<std::vector<float>> v(kNumViews, std::vector<float>(feat_dim));
            for (auto& row : v)
                for (auto& x : row) x = u(rng);
            return v;
        };
        if (mask & kMaskRgb) r.rgb = views();
        if (mask & kMaskDct) r.dct = views();
        if (mask & kMaskLavila) {
            r.lavila.resize(lavila_dim);
            for (auto& x : r.lavila) x = u(rng);
        }
        out.push_back(std::move(r));
    }
    return out;
}

// Rank-based AUC: fraction of (positive, negative) pairs ordered correctly.
double auc(const std::vector<double>& scores, const std::vector<int>& y) {
    double good = 0, pairs = 0;
    for (std::size_t i = 0; i < scores.size(); ++i)
        for (std::size_t j = 0; j < scores.size(); ++j)
            if (y[i] == 1 && y[j] == 0) {
                pairs += 1;
                good += scores[i] > scores[j] ? 1.0 : (scores[i] == scores[j] ? 0.5 : 0.0);
            }
    return good / pairs;
}

// Full-batch gradient-descent logistic regression on one feature slot.
double probe_auc(const Dataset& ds, Modality m, std::size_t view, std::size_t cls) {
    const auto train = ds.split(Split::Train), val = ds.split(Split::Val);
    const std::size_t d = ds.manifest.feat_dim;
    std::vector<double> w(d, 0.0);
    double b = 0.0;
    for (int it = 0; it < 300; ++it) {
        std::vector<double> gw(d, 0.0);
        double gb = 0.0;
        for (const auto* r : train) {
            const auto& x = r->views(m)[view];
            double z = b;
            for (std::size_t k = 0; k < d; ++k) z += w[k] * x[k];
            const double err = 1.0 / (1.0 + std::exp(-z)) - r->labels[cls];
            for (std::size_t k = 0; k < d; ++k) gw[k] += err * x[k];
            gb += err;
        }
        const double n = static_cast<double>(train.size());
        for (std::size_t k = 0; k < d; ++k) w[k] -= 0.5 * gw[k] / n;
        b -= 0.5 * gb / n;
    }
    std::vector<double> scores;
    std::vector<int> y;
    for (const auto* r : val) {
        const auto& x = r->views(m)[view];
        double z = b;
        for (std::size_t k = 0; k < d; ++k) z += w[k] * x[k];
        scores.push_back(z);
        y.push_back(r->labels[cls]);
    }
    return auc(scores, y);
}

}  // namespace

// --- file format --------------------------------------------------------------

TEST(DatasetFile, RoundTripHundredRecords) {
    ScratchDir dir("ds");
    const auto mask = static_cast<std::uint8_t>(kMaskRgb | kMaskDct | kMaskLavila);
    const auto records = random_records(100, mask, 6, 14, 5, 1);
    const auto manifest = make_manifest(records, mask, 6, 14, 5);
    write_dataset(records, manifest, dir.file("a.mtbr"));
    const Dataset back = read_dataset(dir.file("a.mtbr"));
    EXPECT_EQ(back.manifest, manifest);
    EXPECT_EQ(back.records, records);
}

TEST(DatasetFile, WriteReadWriteIsByteIdentical) {
    ScratchDir dir("ds2");
    const auto records = random_records(20, kMaskRgb, 4, 5, 0, 2);
    const auto manifest = make_manifest(records, kMaskRgb, 4, 5, 0);
    write_dataset(records, manifest, dir.file("a.mtbr"));
    const Dataset back = read_dataset(dir.file("a.mtbr"));
    write_dataset(back.records, back.manifest, dir.file("b.mtbr"));
    EXPECT_EQ(mtbr::testing::slurp(dir.file("a.mtbr")), mtbr::testing::slurp(dir.file("b.mtbr")));
}

TEST(DatasetFile, HeaderLayout) {
    const auto records = random_records(2, kMaskDct, 3, 4, 0, 3);
    const auto bytes = encode_dataset(make_manifest(records, kMaskDct, 3, 4, 0), records);
    ASSERT_GE(bytes.size(), 27u);
    EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 4), "MTBR");
    EXPECT_EQ(bytes[4], 1);
    EXPECT_EQ(bytes[5], 2);  // u64 n_samples, little-endian
    EXPECT_EQ(bytes[13], 3);  // u16 n_views
    EXPECT_EQ(bytes[15], 4);  // u16 n_classes
    EXPECT_EQ(bytes[17], 3);  // u32 feat_dim
    EXPECT_EQ(bytes[21], kMaskDct);
    // Per record: id, split, labels, 3 views × 3 floats.
    EXPECT_EQ(bytes.size(), 26u + 2 * (8 + 1 + 4 + 3 * 3 * 4));
}

TEST(DatasetFile, EmptyDatasetIsValid) {
    ScratchDir dir("empty");
    const DatasetManifest manifest = make_manifest({}, kMaskRgb, 8);
    write_dataset({}, manifest, dir.file("e.mtbr"));
    const Dataset back = read_dataset(dir.file("e.mtbr"));
    EXPECT_TRUE(back.records.empty());
    EXPECT_EQ(back.manifest.feat_dim, 8u);
}

TEST(DatasetFile, TruncationReportsOffsetAndNoRecords) {
    const auto records = random_records(5, kMaskRgb, 4, 3, 0, 4);
    auto bytes = encode_dataset(make_manifest(records, kMaskRgb, 4, 3, 0), records);
    for (std::size_t cut : {bytes.size() - 1, bytes.size() - 20, std::size_t{30}, std::size_t{10}, std::size_t{3}}) {
        std::vector<char> part(bytes.begin(), bytes.begin() + static_cast<std::ptrdiff_t>(cut));
        try {
            decode_dataset(part);
            FAIL() << "expected FormatError at cut " << cut;
        } catch (const FormatError& e) {
            EXPECT_LE(e.offset(), cut);
            EXPECT_NE(std::string(e.what()).find("offset"), std::string::npos);
        }
    }
}

TEST(DatasetFile, BadMagicVersionSplitAndTrailingBytes) {
    const auto records = random_records(3, kMaskRgb, 2, 2, 0, 5);
    const auto good = encode_dataset(make_manifest(records, kMaskRgb, 2, 2, 0), records);
    auto bad_magic = good;
    bad_magic[0] = 'X';
    EXPECT_THROW(decode_dataset(bad_magic), FormatError);
    auto bad_version = good;
    bad_version[4] = 2;
    EXPECT_THROW(decode_dataset(bad_version), FormatError);
    auto bad_split = good;
    bad_split[26 + 8] = 7;
    EXPECT_THROW(decode_dataset(bad_split), FormatError);
    auto bad_label = good;
    bad_label[26 + 9] = 2;
    EXPECT_THROW(decode_dataset(bad_label), FormatError);
    auto trailing = good;
    trailing.push_back(0);
    EXPECT_THROW(decode_dataset(trailing), FormatError);
}

TEST(DatasetFile, InconsistentRecordsRejectedBeforeWrite) {
    ScratchDir dir("bad");
    auto records = random_records(4, kMaskRgb, 4, 3, 0, 6);
    const auto manifest = make_manifest(records, kMaskRgb, 4, 3, 0);
    records[2].rgb[1].pop_back();
    EXPECT_THROW(write_dataset(records, manifest, dir.file("x.mtbr")), ValidationError);
    EXPECT_FALSE(std::filesystem::exists(dir.file("x.mtbr")));
}

TEST(DatasetFile, NonFiniteFeatureRejected) {
    auto records = random_records(2, kMaskRgb, 3, 2, 0, 7);
    const auto manifest = make_manifest(records, kMaskRgb, 3, 2, 0);
    records[1].rgb[0][1] = std::nanf("");
    EXPECT_THROW(validate_dataset(manifest, records), ValidationError);
}

TEST(DatasetFile, DuplicateIdsRejected) {
    auto records = random_records(3, kMaskRgb, 3, 2, 0, 8);
    const auto manifest = make_manifest(records, kMaskRgb, 3, 2, 0);
    records[2].id = records[0].id;
    EXPECT_THROW(validate_dataset(manifest, records), ValidationError);
}

TEST(DatasetFile, MissingFileIsFormatError) {
    EXPECT_THROW(read_dataset("/nonexistent/nowhere.mtbr"), FormatError);
}

TEST(Dataset, SplitSelectsInFileOrder) {
    const auto records = random_records(9, kMaskRgb, 2, 2, 0, 9);
    Dataset ds{make_manifest(records, kMaskRgb, 2, 2, 0), records};
    const auto val = ds.split(Split::Val);
    ASSERT_EQ(val.size(), 3u);
    EXPECT_EQ(val[0]->id, records[1].id);
    EXPECT_EQ(val[2]->id, records[7].id);
}

TEST(SplitNames, RoundTrip) {
    for (Split s : {Split::Train, Split::Val, Split::Test}) EXPECT_EQ(parse_split(split_name(s)), s);
    EXPECT_THROW(parse_split("validation"), ValidationError);
}

// --- prevalence ---------------------------------------------------------------

TEST(ClassPrevalence, AllZeroAndAllOne) {
    auto records = random_records(5, kMaskRgb, 2, 4, 0, 10);
    for (auto& r : records) std::fill(r.labels.begin(), r.labels.end(), 0);
    for (double p : class_prevalence(records)) EXPECT_EQ(p, 0.0);
    std::vector<SampleRecord> one(records.begin(), records.begin() + 1);
    std::fill(one[0].labels.begin(), one[0].labels.end(), 1);
    for (double p : class_prevalence(one)) EXPECT_EQ(p, 1.0);
}

TEST(ClassPrevalence, EmptyListRejected) {
    EXPECT_THROW(class_prevalence(std::vector<SampleRecord>{}), ContractError);
}

TEST(ClassPrevalence, ThousandSamplesConcentrate) {
    auto spec = SynthSpec::uniform(14, 1, InformativeModality::Rgb, 0.2);
    spec.n_train = 1000;
    spec.n_val = 0;
    spec.feat_dim = 4;
    spec.modality_mask = kMaskRgb;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        spec.seed = seed;
        for (double p : class_prevalence(generate_synthetic(spec).records)) {
            EXPECT_GE(p, 0.15);
            EXPECT_LE(p, 0.25);
        }
    }
}

// --- generator ----------------------------------------------------------------

TEST(Synthetic, DeterministicInSeed) {
    auto spec = SynthSpec::uniform(5, 2, InformativeModality::Both, 0.3);
    spec.n_train = 30;
    spec.n_val = 10;
    spec.n_test = 5;
    spec.feat_dim = 7;
    spec.modality_mask = kMaskRgb | kMaskDct | kMaskLavila;
    spec.lavila_dim = 6;
    spec.seed = 42;
    const Dataset a = generate_synthetic(spec), b = generate_synthetic(spec);
    EXPECT_EQ(a.records, b.records);
    EXPECT_EQ(a.manifest, b.manifest);
    EXPECT_EQ(encode_dataset(a.manifest, a.records), encode_dataset(b.manifest, b.records));
    spec.seed = 43;
    EXPECT_FALSE(generate_synthetic(spec).records == a.records);
    EXPECT_EQ(a.split(Split::Train).size(), 30u);
    EXPECT_EQ(a.split(Split::Val).size(), 10u);
    EXPECT_EQ(a.split(Split::Test).size(), 5u);
}

TEST(Synthetic, DirectionsAreUnitNorm) {
    auto spec = SynthSpec::uniform(6, 0, InformativeModality::Rgb, 0.2);
    spec.feat_dim = 50;
    for (const auto& d : planted_directions(spec)) {
        double n = 0;
        for (double x : d) n += x * x;
        EXPECT_NEAR(n, 1.0, 1e-12);
    }
}

TEST(Synthetic, NoiseFreeFeaturesAreExactlyThePlantedSum) {
    auto spec = SynthSpec::uniform(4, 2, InformativeModality::Dct, 0.4);
    spec.n_train = 20;
    spec.n_val = 0;
    spec.feat_dim = 5;
    spec.noise_sigma = 0.0;
    spec.signal_strength = 2.0;
    const Dataset ds = generate_synthetic(spec);
    const auto dirs = planted_directions(spec);
    for (const auto& r : ds.records) {
        for (std::size_t v = 0; v < kNumViews; ++v) {
            for (std::size_t k = 0; k < 5; ++k) {
                double want = 0;
                if (v == 2)
                    for (std::size_t c = 0; c < 4; ++c) want += r.labels[c] * 2.0 * dirs[c][k];
                EXPECT_FLOAT_EQ(r.dct[v][k], static_cast<float>(want));
                EXPECT_EQ(r.rgb[v][k], 0.0f);
            }
        }
    }
}

TEST(Synthetic, ZeroStrengthGivesPureNoise) {
    auto spec = SynthSpec::uniform(3, 1, InformativeModality::Rgb, 0.5);
    spec.n_train = 400;
    spec.n_val = 0;
    spec.feat_dim = 8;
    spec.modality_mask = kMaskRgb;
    spec.signal_strength = 0.0;
    const Dataset ds = generate_synthetic(spec);
    // Class-conditional means of view 1 agree within sampling error.
    for (std::size_t k = 0; k < 8; ++k) {
        double pos = 0, neg = 0, npos = 0, nneg = 0;
        for (const auto& r : ds.records) {
            (r.labels[0] ? pos : neg) += r.rgb[1][k];
            (r.labels[0] ? npos : nneg) += 1;
        }
        EXPECT_LT(std::abs(pos / npos - neg / nneg), 0.4);
    }
}

TEST(Synthetic, InvalidSpecRejected) {
    auto spec = SynthSpec::uniform(3, 1, InformativeModality::Dct, 0.2);
    spec.modality_mask = kMaskRgb;
    EXPECT_THROW(spec.validate(), ValidationError);
    spec = SynthSpec::uniform(3, 3, InformativeModality::Rgb, 0.2);
    EXPECT_THROW(spec.validate(), ValidationError);
    spec = SynthSpec::uniform(3, 0, InformativeModality::Rgb, 1.0);
    EXPECT_THROW(spec.validate(), ValidationError);
}

TEST(Synthetic, PlantedSignalOnlyInDesignatedSlot) {
    auto spec = SynthSpec::uniform(3, 1, InformativeModality::Rgb, 0.3);
    spec.n_train = 1000;
    spec.n_val = 500;
    spec.feat_dim = 32;
    spec.modality_mask = kMaskRgb | kMaskDct;
    spec.seed = 11;
    const Dataset ds = generate_synthetic(spec);
    EXPECT_GT(probe_auc(ds, Modality::Rgb, 1, 0), 0.95);
    EXPECT_LT(probe_auc(ds, Modality::Rgb, 0, 0), 0.6);
    EXPECT_LT(probe_auc(ds, Modality::Rgb, 2, 0), 0.6);
    EXPECT_LT(probe_auc(ds, Modality::Dct, 1, 0), 0.6);
}
