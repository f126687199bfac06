#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "mtbr/cli.hpp"
#include "mtbr/errors.hpp"
#include "mtbr/fusion.hpp"
#include "mtbr/training.hpp"
#include "test_support.hpp"

using namespace mtbr;
using Vec = std::vector<double>;
using Views = std::array<Vec, kNumViews>;

namespace {

// --- straight-line reference evaluator on plain vectors -------------------------

Vec dense(const Vec& x, const Tensor& w, const Tensor& b) {
    const std::size_t in = w.dim(0), out = w.dim(1);
    Vec y(out);
    for (std::size_t j = 0; j < out; ++j) {
        double s = b[j];
        for (std::size_t i = 0; i < in; ++i) s += x[i] * w[i * out + j];
        y[j] = s;
    }
    return y;
}

Vec layer_norm(const Vec& x, const Tensor& gamma, const Tensor& beta, double eps) {
    double mean = 0;
    for (double v : x) mean += v;
    mean /= static_cast<double>(x.size());
    double var = 0;
    for (double v : x) var += (v - mean) * (v - mean);
    var /= static_cast<double>(x.size());
    Vec y(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) y[i] = (x[i] - mean) / std::sqrt(var + eps) * gamma[i] + beta[i];
    return y;
}

Vec softmax(const Vec& x) {
    const double m = *std::max_element(x.begin(), x.end());
    Vec y(x.size());
    double s = 0;
    for (std::size_t i = 0; i < x.size(); ++i) s += y[i] = std::exp(x[i] - m);
    for (auto& v : y) v /= s;
    return y;
}

Vec sigmoid(const Vec& x) {
    Vec y(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) y[i] = 1.0 / (1.0 + std::exp(-x[i]));
    return y;
}

struct RefBranch {
    Vec alpha, fused;
};

RefBranch ref_branch(const MultiviewAttentionParams& p, const Views& x, double eps = 1e-5) {
    std::array<Vec, kNumViews> h;
    Vec cat;
    for (std::size_t v = 0; v < kNumViews; ++v) {
        h[v] = dense(x[v], p.view_weight[v], p.view_bias[v]);
        cat.insert(cat.end(), h[v].begin(), h[v].end());
    }
    RefBranch r;
    r.alpha = softmax(dense(cat, p.att_weight, p.att_bias));
    r.fused.assign(h[0].size(), 0.0);
    for (std::size_t v = 0; v < kNumViews; ++v) {
        const Vec z = layer_norm(h[v], p.norm_gamma, p.norm_beta, eps);
        for (std::size_t k = 0; k < z.size(); ++k) r.fused[k] += r.alpha[v] * z[k];
    }
    return r;
}

// --- fixtures ------------------------------------------------------------------------

void randomize(std::vector<ParamRef> refs, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    for (auto& r : refs) *r.value = mtbr::testing::random_tensor(r.value->shape(), rng, -0.8, 0.8);
}

Views random_views(std::size_t dim, std::mt19937_64& rng) {
    Views v;
    for (auto& x : v) x = mtbr::testing::random_vector(dim, rng, -2.0, 2.0);
    return v;
}

std::array<std::span<const double>, kNumViews> spans(const Views& v) { return {v[0], v[1], v[2]}; }

FusionConfig small_fusion(std::size_t feat_dim = 7, std::size_t hidden = 5, std::size_t n_classes = 4) {
    FusionConfig c;
    c.feat_dim = feat_dim;
    c.hidden = hidden;
    c.n_classes = n_classes;
    return c;
}

ModelConfig fusion_model_config(ModelKind kind, std::size_t lavila_dim = 6) {
    ModelConfig mc;
    mc.kind = kind;
    mc.fusion = small_fusion();
    mc.lavila_dim = lavila_dim;
    return mc;
}

void expect_all_near(const Vec& a, const Vec& b, double tol) {
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], b[i], tol) << "index " << i;
}

}  // namespace

// --- multiview -------------------------------------------------------------------------

TEST(Multiview, SymmetricViewsGiveUniformAttention) {
    std::mt19937_64 rng(1);
    auto p = init_params(small_fusion(), rng);
    for (std::size_t v = 1; v < kNumViews; ++v) {
        p.view_weight[v] = p.view_weight[0];
        p.view_bias[v] = p.view_bias[0];
    }
    // A view-symmetric attention head scores every view with the same column.
    for (std::size_t r = 0; r < 15; ++r)
        for (std::size_t c = 1; c < 3; ++c) p.att_weight[r * 3 + c] = p.att_weight[r * 3];
    const Vec x = mtbr::testing::random_vector(7, rng);
    const auto out = multiview_forward(p, {x, x, x});
    for (double a : out.alpha) EXPECT_NEAR(a, 1.0 / 3.0, 1e-15);
}

TEST(Multiview, ZeroClassifierGivesHalf) {
    std::mt19937_64 rng(2);
    auto p = init_params(small_fusion(), rng);
    p.cls_weight = Tensor(p.cls_weight.shape());
    p.cls_bias = Tensor(p.cls_bias.shape());
    const auto out = multiview_forward(p, spans(random_views(7, rng)));
    for (double v : out.probs) EXPECT_EQ(v, 0.5);
}

TEST(Multiview, MatchesStraightLineOracle) {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        std::mt19937_64 rng(seed);
        auto p = init_params(small_fusion(), rng);
        randomize(p.refs("rgb"), seed + 100);
        const Views x = random_views(7, rng);
        const auto got = multiview_forward(p, spans(x));
        const auto want = ref_branch(p, x);
        expect_all_near(Vec(got.alpha.begin(), got.alpha.end()), want.alpha, 1e-12);
        expect_all_near(got.fused, want.fused, 1e-12);
        expect_all_near(got.probs, sigmoid(dense(want.fused, p.cls_weight, p.cls_bias)), 1e-12);
    }
}

TEST(Multiview, AttentionOnSimplex) {
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        std::mt19937_64 rng(seed);
        auto p = init_params(small_fusion(), rng);
        randomize(p.refs("rgb"), seed);
        const auto out = multiview_forward(p, spans(random_views(7, rng)));
        double s = 0;
        for (double a : out.alpha) {
            EXPECT_GE(a, 0.0);
            EXPECT_LE(a, 1.0);
            s += a;
        }
        EXPECT_NEAR(s, 1.0, 1e-14);
    }
}

TEST(Multiview, PermutationEquivariance) {
    const std::array<std::size_t, 3> perm{2, 0, 1};  // new view i reads old view perm[i]
    std::mt19937_64 rng(5);
    auto p = init_params(small_fusion(), rng);
    randomize(p.refs("rgb"), 5);
    const Views x = random_views(7, rng);
    auto q = p;
    Views y;
    for (std::size_t i = 0; i < kNumViews; ++i) {
        y[i] = x[perm[i]];
        q.view_weight[i] = p.view_weight[perm[i]];
        q.view_bias[i] = p.view_bias[perm[i]];
        for (std::size_t r = 0; r < 5; ++r)
            for (std::size_t c = 0; c < 3; ++c)
                q.att_weight[(i * 5 + r) * 3 + c] = p.att_weight[(perm[i] * 5 + r) * 3 + perm[c]];
        q.att_bias[i] = p.att_bias[perm[i]];
    }
    const auto a = multiview_forward(p, spans(x));
    const auto b = multiview_forward(q, spans(y));
    for (std::size_t i = 0; i < kNumViews; ++i) EXPECT_NEAR(b.alpha[i], a.alpha[perm[i]], 1e-14);
    expect_all_near(b.fused, a.fused, 1e-14);
    expect_all_near(b.probs, a.probs, 1e-14);
}

TEST(Multiview, WrongViewWidthRejected) {
    std::mt19937_64 rng(6);
    const auto p = init_params(small_fusion(), rng);
    const Vec ok(7, 0.0), bad(6, 0.0);
    EXPECT_THROW(multiview_forward(p, {ok, bad, ok}), DimensionError);
}

// --- bimodal / trimodal -------------------------------------------------------------

TEST(Bimodal, MatchesStraightLineOracle) {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        FusionModel m(fusion_model_config(ModelKind::Bimodal));
        randomize(m.parameters(), seed);
        std::mt19937_64 rng(seed + 1);
        const Views r = random_views(7, rng), d = random_views(7, rng);
        const auto fr = ref_branch(m.branch(Modality::Rgb), r).fused;
        const auto fd = ref_branch(m.branch(Modality::Dct), d).fused;
        Vec sum(fr.size());
        for (std::size_t k = 0; k < sum.size(); ++k) sum[k] = fr[k] + fd[k];
        expect_all_near(m.predict_one(spans(r), spans(d)), sigmoid(dense(sum, m.head_weight(), m.head_bias())),
                        1e-12);
    }
}

TEST(Bimodal, ZeroDctDescriptorReducesToRgbHead) {
    FusionModel m(fusion_model_config(ModelKind::Bimodal));
    randomize(m.parameters(), 9);
    auto& dct = m.branch(Modality::Dct);
    dct.norm_gamma = Tensor(dct.norm_gamma.shape());
    dct.norm_beta = Tensor(dct.norm_beta.shape());
    std::mt19937_64 rng(9);
    const Views r = random_views(7, rng), d = random_views(7, rng);
    const auto rgb = multiview_forward(m.branch(Modality::Rgb), spans(r));
    expect_all_near(m.predict_one(spans(r), spans(d)), sigmoid(dense(rgb.fused, m.head_weight(), m.head_bias())),
                    1e-14);
}

TEST(Bimodal, SwappingModalitiesLeavesOutputUnchanged) {
    FusionModel m(fusion_model_config(ModelKind::Bimodal));
    randomize(m.parameters(), 10);
    FusionModel s = m;
    s.branch(Modality::Rgb) = m.branch(Modality::Dct);
    s.branch(Modality::Dct) = m.branch(Modality::Rgb);
    std::mt19937_64 rng(10);
    const Views r = random_views(7, rng), d = random_views(7, rng);
    expect_all_near(s.predict_one(spans(d), spans(r)), m.predict_one(spans(r), spans(d)), 1e-15);
}

TEST(Trimodal, MatchesStraightLineOracleInEverySummandOrder) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        FusionModel m(fusion_model_config(ModelKind::Trimodal));
        randomize(m.parameters(), seed);
        std::mt19937_64 rng(seed + 7);
        const Views r = random_views(7, rng), d = random_views(7, rng);
        const Vec lav = mtbr::testing::random_vector(6, rng, -2, 2);
        const std::array<Vec, 3> parts{ref_branch(m.branch(Modality::Rgb), r).fused,
                                       ref_branch(m.branch(Modality::Dct), d).fused,
                                       dense(lav, m.lavila_weight(), m.lavila_bias())};
        const Vec got = m.predict_one(spans(r), spans(d), lav);
        std::array<std::size_t, 3> order{0, 1, 2};
        do {
            Vec sum(parts[0].size(), 0.0);
            for (std::size_t i : order)
                for (std::size_t k = 0; k < sum.size(); ++k) sum[k] += parts[i][k];
            expect_all_near(got, sigmoid(dense(sum, m.head_weight(), m.head_bias())), 1e-12);
        } while (std::next_permutation(order.begin(), order.end()));
    }
}

TEST(Trimodal, ZeroLavilaReducesToBimodal) {
    FusionModel tri(fusion_model_config(ModelKind::Trimodal));
    randomize(tri.parameters(), 12);
    tri.lavila_bias() = Tensor(tri.lavila_bias().shape());
    FusionModel bi(fusion_model_config(ModelKind::Bimodal));
    bi.branch(Modality::Rgb) = tri.branch(Modality::Rgb);
    bi.branch(Modality::Dct) = tri.branch(Modality::Dct);
    bi.head_weight() = tri.head_weight();
    bi.head_bias() = tri.head_bias();
    std::mt19937_64 rng(12);
    const Views r = random_views(7, rng), d = random_views(7, rng);
    const Vec zero(6, 0.0);
    expect_all_near(tri.predict_one(spans(r), spans(d), zero), bi.predict_one(spans(r), spans(d)), 1e-15);
}

TEST(Trimodal, MissingLavilaRejected) {
    FusionModel tri(fusion_model_config(ModelKind::Trimodal));
    const Vec x(7, 0.0);
    EXPECT_THROW(tri.predict_one({x, x, x}, {x, x, x}), DimensionError);
}

TEST(Fusion, EndToEndGradcheck) {
    for (const char* name : {"multiview", "bimodal", "trimodal"}) {
        for (std::uint64_t seed = 0; seed < 3; ++seed) {
            const auto report = gradcheck_miniature(name, seed);
            EXPECT_LT(report.max_rel_error, 1e-4) << name << " worst " << report.worst_param;
        }
    }
}

TEST(Fusion, FrozenBranchesAreNotTrainable) {
    auto mc = fusion_model_config(ModelKind::Bimodal);
    mc.freeze_branches = true;
    FusionModel m(mc);
    std::size_t trainable = 0;
    for (const auto& r : m.parameters()) {
        const bool head = r.name.rfind("head.", 0) == 0;
        EXPECT_EQ(r.trainable, head) << r.name;
        trainable += r.trainable;
    }
    EXPECT_EQ(trainable, 2u);
}

// --- init ------------------------------------------------------------------------------

TEST(Init, DeterministicInSeed) {
    std::mt19937_64 a(77), b(77);
    auto pa = init_params(small_fusion(), a);
    auto pb = init_params(small_fusion(), b);
    const auto ra = pa.refs("x"), rb = pb.refs("x");
    for (std::size_t i = 0; i < ra.size(); ++i) EXPECT_EQ(*ra[i].value, *rb[i].value) << ra[i].name;
}

TEST(Init, WeightsWithinGlorotBoundAndBiasesZero) {
    std::mt19937_64 rng(3);
    auto p = init_params(small_fusion(40, 16, 14), rng);
    auto check = [](const Tensor& w) {
        const double bound = glorot_bound(w.dim(0), w.dim(1));
        for (double v : w.data()) EXPECT_LE(std::abs(v), bound);
    };
    for (const auto& w : p.view_weight) check(w);
    check(p.att_weight);
    check(p.cls_weight);
    for (const auto& b : p.view_bias)
        for (double v : b.data()) EXPECT_EQ(v, 0.0);
    for (double v : p.norm_gamma.data()) EXPECT_EQ(v, 1.0);
    for (double v : p.norm_beta.data()) EXPECT_EQ(v, 0.0);
}

TEST(Init, EmpiricalVarianceMatchesGlorot) {
    std::mt19937_64 rng(4);
    const Tensor w = glorot_uniform(1024, 64, rng);
    double mean = 0;
    for (double v : w.data()) mean += v;
    mean /= static_cast<double>(w.numel());
    double var = 0;
    for (double v : w.data()) var += (v - mean) * (v - mean);
    var /= static_cast<double>(w.numel());
    const double want = 2.0 / (1024 + 64);
    EXPECT_NEAR(var, want, 0.2 * want);
}

// --- attention report ------------------------------------------------------------------

namespace {

Dataset small_dataset(std::size_t n, std::uint64_t seed, double strength = 3.0) {
    auto spec = SynthSpec::uniform(4, 1, InformativeModality::Rgb, 0.3);
    spec.n_train = n;
    spec.n_val = n / 2;
    spec.feat_dim = 7;
    spec.signal_strength = strength;
    spec.seed = seed;
    return generate_synthetic(spec);
}

}  // namespace

TEST(AttentionReport, SingleSampleEqualsItsAlpha) {
    MultiviewModel m(Modality::Rgb, small_fusion());
    randomize(m.parameters(), 21);
    const Dataset ds = small_dataset(4, 21);
    const SampleRecord* one = &ds.records[0];
    const auto rep = attention_report(m, std::span<const SampleRecord* const>(&one, 1));
    Views x;
    for (std::size_t v = 0; v < kNumViews; ++v) x[v] = Vec(one->rgb[v].begin(), one->rgb[v].end());
    const auto out = multiview_forward(m.net(), spans(x));
    ASSERT_EQ(rep.size(), 1u);
    for (std::size_t v = 0; v < kNumViews; ++v) EXPECT_NEAR(rep.at(Modality::Rgb)[v], out.alpha[v], 1e-15);
}

TEST(AttentionReport, SymmetricParamsOnIdenticalViewsGiveThirds) {
    MultiviewModel m(Modality::Dct, small_fusion());
    auto& p = m.net();
    for (std::size_t v = 1; v < kNumViews; ++v) {
        p.view_weight[v] = p.view_weight[0];
        p.view_bias[v] = p.view_bias[0];
    }
    p.att_weight = Tensor(p.att_weight.shape());
    Dataset ds = small_dataset(10, 22);
    for (auto& r : ds.records) r.dct[1] = r.dct[2] = r.dct[0];
    const auto rep = attention_report(m, ds, Split::Train);
    for (double a : rep.at(Modality::Dct)) EXPECT_NEAR(a, 1.0 / 3.0, 1e-15);
}

TEST(AttentionReport, BimodalReportsBothModalities) {
    FusionModel m(fusion_model_config(ModelKind::Bimodal));
    const Dataset ds = small_dataset(10, 23);
    const auto rep = attention_report(m, ds, Split::Val);
    EXPECT_EQ(rep.size(), 2u);
    EXPECT_TRUE(rep.count(Modality::Rgb) && rep.count(Modality::Dct));
}

TEST(AttentionReport, EmptySplitRejected) {
    MultiviewModel m(Modality::Rgb, small_fusion());
    const Dataset ds = small_dataset(10, 24);
    EXPECT_THROW(attention_report(m, ds, Split::Test), ContractError);
}

TEST(AttentionReport, MonotoneInPlantedStrength) {
    std::vector<double> view1;
    for (double strength : {1.0, 2.0, 3.0}) {
        auto spec = SynthSpec::uniform(4, 1, InformativeModality::Rgb, 0.3);
        spec.n_train = 400;
        spec.n_val = 200;
        spec.feat_dim = 16;
        spec.modality_mask = kMaskRgb;
        spec.signal_strength = strength;
        spec.seed = 31;
        const Dataset ds = generate_synthetic(spec);
        auto fc = small_fusion(16, 16, 4);
        fc.seed = 31;
        MultiviewModel m(Modality::Rgb, fc);
        TrainConfig tc;
        tc.optimizer = OptimizerKind::Adam;
        tc.learning_rate = TrainConfig::default_learning_rate(OptimizerKind::Adam);
        tc.max_epochs = 40;
        tc.seed = 31;
        fit(m, ds, tc);
        view1.push_back(attention_report(m, ds, Split::Val).at(Modality::Rgb)[1]);
    }
    EXPECT_LE(view1[0], view1[1]);
    EXPECT_LE(view1[1], view1[2]);
    EXPECT_GT(view1[2], 1.0 / 3.0);
}

// --- checkpoints -----------------------------------------------------------------------

TEST(Checkpoint, RoundTripEveryFusionKind) {
    mtbr::testing::ScratchDir dir("ckpt");
    for (ModelKind k : {ModelKind::MultiviewRgb, ModelKind::MultiviewDct, ModelKind::Bimodal, ModelKind::Trimodal}) {
        auto model = make_model(fusion_model_config(k));
        randomize(model->parameters(), 40);
        const std::string path = dir.file(std::string(model_kind_name(k)) + ".mtbp");
        save_checkpoint(*model, path);
        const auto back = load_checkpoint(path);
        EXPECT_EQ(back->kind(), k);
        EXPECT_EQ(back->snapshot(), model->snapshot());
        EXPECT_EQ(encode_checkpoint(*back), mtbr::testing::slurp(path));
    }
}

TEST(Checkpoint, TruncatedIsFormatError) {
    auto model = make_model(fusion_model_config(ModelKind::Bimodal));
    auto bytes = encode_checkpoint(*model);
    bytes.resize(bytes.size() / 2);
    EXPECT_THROW(decode_checkpoint(bytes), FormatError);
}
