#include "mtbr/dataio.hpp"

#include <cmath>
#include <random>
#include <set>

#include "mtbr/binary_io.hpp"
#include "mtbr/errors.hpp"

namespace mtbr {

std::string_view split_name(Split s) {
    switch (s) {
        case Split::Train: return "train";
        case Split::Val: return "val";
        case Split::Test: return "test";
    }
    return "?";
}

Split parse_split(std::string_view name) {
    if (name == "train") return Split::Train;
    if (name == "val") return Split::Val;
    if (name == "test") return Split::Test;
    throw ValidationError("unknown split \"" + std::string(name) + "\"");
}

std::string_view modality_name(Modality m) {
    switch (m) {
        case Modality::Rgb: return "rgb";
        case Modality::Dct: return "dct";
        case Modality::Lavila: return "lavila";
    }
    return "?";
}

std::vector<const SampleRecord*> Dataset::split(Split s) const {
    std::vector<const SampleRecord*> out;
    for (const auto& r : records)
        if (r.split == s) out.push_back(&r);
    return out;
}

DatasetManifest make_manifest(const std::vector<SampleRecord>& records, std::uint8_t modality_mask,
                              std::uint32_t feat_dim, std::uint16_t n_classes, std::uint32_t lavila_dim) {
    DatasetManifest m;
    m.n_classes = n_classes;
    m.feat_dim = feat_dim;
    m.modality_mask = modality_mask;
    m.lavila_dim = lavila_dim;
    for (const auto& r : records) m.splits[r.id] = r.split;
    return m;
}

void validate_dataset(const DatasetManifest& m, const std::vector<SampleRecord>& records) {
    auto bad = [](const std::string& what) { throw ValidationError(what); };
    if (m.n_views != kNumViews) bad("n_views must be 3, got " + std::to_string(m.n_views));
    if (m.n_classes == 0) bad("n_classes must be positive");
    if (m.modality_mask == 0 || m.modality_mask > 7) bad("modality mask must select 1-3 of bits 0..2");
    if ((m.has(Modality::Rgb) || m.has(Modality::Dct)) && m.feat_dim == 0) bad("feat_dim must be positive");
    if (m.has(Modality::Lavila) && m.lavila_dim == 0) bad("lavila_dim must be positive");
    if (m.splits.size() != records.size()) {
        bad("manifest lists " + std::to_string(m.splits.size()) + " ids but there are " +
            std::to_string(records.size()) + " records");
    }
    std::set<std::uint64_t> seen;
    for (const auto& r : records) {
        const std::string where = "record " + std::to_string(r.id) + ": ";
        if (!seen.insert(r.id).second) bad(where + "duplicate id");
        auto it = m.splits.find(r.id);
        if (it == m.splits.end() || it->second != r.split) bad(where + "split disagrees with manifest");
        if (r.labels.size() != m.n_classes) bad(where + "label count " + std::to_string(r.labels.size()));
        for (auto l : r.labels)
            if (l > 1) bad(where + "labels must be 0 or 1");
        for (Modality mod : {Modality::Rgb, Modality::Dct}) {
            const auto& views = r.views(mod);
            if (!m.has(mod)) {
                if (!views.empty()) bad(where + std::string(modality_name(mod)) + " present but not in mask");
                continue;
            }
            if (views.size() != m.n_views) bad(where + std::string(modality_name(mod)) + " view count");
            for (const auto& v : views) {
                if (v.size() != m.feat_dim) {
                    bad(where + std::string(modality_name(mod)) + " feature dim " + std::to_string(v.size()) +
                        " != " + std::to_string(m.feat_dim));
                }
                for (float x : v)
                    if (!std::isfinite(x)) bad(where + "non-finite feature");
            }
        }
        if (m.has(Modality::Lavila)) {
            if (r.lavila.size() != m.lavila_dim) bad(where + "lavila dim " + std::to_string(r.lavila.size()));
            for (float x : r.lavila)
                if (!std::isfinite(x)) bad(where + "non-finite feature");
        } else if (!r.lavila.empty()) {
            bad(where + "lavila present but not in mask");
        }
    }
}

std::vector<char> encode_dataset(const DatasetManifest& m, const std::vector<SampleRecord>& records) {
    validate_dataset(m, records);
    ByteWriter w;
    w.bytes("MTBR");
    w.u8(kDatasetFormatVersion);
    w.u64(records.size());
    w.u16(m.n_views);
    w.u16(m.n_classes);
    w.u32(m.feat_dim);
    w.u8(m.modality_mask);
    w.u32(m.lavila_dim);
    for (const auto& r : records) {
        w.u64(r.id);
        w.u8(static_cast<std::uint8_t>(r.split));
        for (auto l : r.labels) w.u8(l);
        for (Modality mod : {Modality::Rgb, Modality::Dct}) {
            if (!m.has(mod)) continue;
            for (const auto& v : r.views(mod))
                for (float x : v) w.f32(x);
        }
        if (m.has(Modality::Lavila))
            for (float x : r.lavila) w.f32(x);
    }
    return w.buffer();
}

Dataset decode_dataset(std::vector<char> bytes) {
    ByteReader r(std::move(bytes));
    r.expect_magic("MTBR");
    if (r.u8() != kDatasetFormatVersion) r.fail("unsupported MTBR version");
    const std::uint64_t n = r.u64();
    Dataset ds;
    DatasetManifest& m = ds.manifest;
    m.n_views = r.u16();
    if (m.n_views != kNumViews) r.fail("n_views must be 3");
    m.n_classes = r.u16();
    if (m.n_classes == 0) r.fail("n_classes must be positive");
    m.feat_dim = r.u32();
    m.modality_mask = r.u8();
    if (m.modality_mask == 0 || m.modality_mask > 7) r.fail("invalid modality mask");
    m.lavila_dim = r.u32();

    std::uint64_t record_bytes = 8 + 1 + m.n_classes;
    if (m.has(Modality::Rgb)) record_bytes += std::uint64_t{4} * m.n_views * m.feat_dim;
    if (m.has(Modality::Dct)) record_bytes += std::uint64_t{4} * m.n_views * m.feat_dim;
    if (m.has(Modality::Lavila)) record_bytes += std::uint64_t{4} * m.lavila_dim;
    if (n > 0 && r.remaining() / record_bytes < n) {
        r.fail("truncated: header declares " + std::to_string(n) + " records of " + std::to_string(record_bytes) +
               " bytes, only " + std::to_string(r.remaining()) + " bytes follow");
    }

    std::vector<SampleRecord> records;
    records.reserve(n);
    for (std::uint64_t i = 0; i < n; ++i) {
        SampleRecord rec;
        rec.id = r.u64();
        const auto split = r.u8();
        if (split > 2) r.fail("invalid split code " + std::to_string(split));
        rec.split = static_cast<Split>(split);
        rec.labels.resize(m.n_classes);
        for (auto& l : rec.labels) {
            l = r.u8();
            if (l > 1) r.fail("label byte must be 0 or 1");
        }
        for (Modality mod : {Modality::Rgb, Modality::Dct}) {
            if (!m.has(mod)) continue;
            auto& views = mod == Modality::Rgb ? rec.rgb : rec.dct;
            views.assign(m.n_views, std::vector<float>(m.feat_dim));
            for (auto& v : views)
                for (auto& x : v) {
                    x = r.f32();
                    if (!std::isfinite(x)) r.fail("non-finite feature value");
                }
        }
        if (m.has(Modality::Lavila)) {
            rec.lavila.resize(m.lavila_dim);
            for (auto& x : rec.lavila) {
                x = r.f32();
                if (!std::isfinite(x)) r.fail("non-finite feature value");
            }
        }
        if (!m.splits.emplace(rec.id, rec.split).second) r.fail("duplicate record id " + std::to_string(rec.id));
        records.push_back(std::move(rec));
    }
    r.expect_end();
    ds.records = std::move(records);
    return ds;
}

void write_dataset(const std::vector<SampleRecord>& records, const DatasetManifest& manifest,
                   const std::string& path) {
    write_file_bytes(path, encode_dataset(manifest, records));
}

Dataset read_dataset(const std::string& path) { return decode_dataset(read_file_bytes(path)); }

namespace {

template <typename Range, typename Deref>
std::vector<double> prevalence_of(const Range& records, Deref deref) {
    if (records.empty()) throw ContractError("class_prevalence: empty record list");
    const std::size_t c = deref(records.front()).labels.size();
    std::vector<double> p(c, 0.0);
    for (const auto& item : records) {
        const auto& rec = deref(item);
        if (rec.labels.size() != c) throw ValidationError("records disagree on class count");
        for (std::size_t k = 0; k < c; ++k) p[k] += rec.labels[k];
    }
    for (auto& v : p) v /= static_cast<double>(records.size());
    return p;
}

}  // namespace

std::vector<double> class_prevalence(const std::vector<SampleRecord>& records) {
    return prevalence_of(records, [](const SampleRecord& r) -> const SampleRecord& { return r; });
}

std::vector<double> class_prevalence(const std::vector<const SampleRecord*>& records) {
    return prevalence_of(records, [](const SampleRecord* r) -> const SampleRecord& { return *r; });
}

// --- synthetic data ----------------------------------------------------------

SynthSpec SynthSpec::uniform(std::size_t n_classes, std::size_t view, InformativeModality modality,
                             double prevalence) {
    SynthSpec s;
    s.n_classes = n_classes;
    s.informative_view.assign(n_classes, view);
    s.informative_modality.assign(n_classes, modality);
    s.label_prevalence.assign(n_classes, prevalence);
    return s;
}

void SynthSpec::validate() const {
    auto bad = [](const std::string& what) { throw ValidationError("synth spec: " + what); };
    if (n_classes == 0) bad("n_classes must be positive");
    if (feat_dim == 0) bad("feat_dim must be positive");
    if ((modality_mask & (kMaskRgb | kMaskDct)) == 0) bad("at least one of rgb/dct is required");
    if (modality_mask > 7) bad("invalid modality mask");
    if ((modality_mask & kMaskLavila) && lavila_dim == 0) bad("lavila_dim must be positive");
    if (informative_view.size() != n_classes) bad("informative_view needs one entry per class");
    if (informative_modality.size() != n_classes) bad("informative_modality needs one entry per class");
    if (label_prevalence.size() != n_classes) bad("label_prevalence needs one entry per class");
    for (auto v : informative_view)
        if (v >= kNumViews) bad("informative view index out of range");
    for (auto p : label_prevalence)
        if (!(p > 0.0 && p < 1.0)) bad("prevalence must lie in (0, 1)");
    for (std::size_t c = 0; c < n_classes; ++c) {
        const auto im = informative_modality[c];
        if ((im != InformativeModality::Dct && !(modality_mask & kMaskRgb)) ||
            (im != InformativeModality::Rgb && !(modality_mask & kMaskDct))) {
            bad("class " + std::to_string(c) + " is planted in a modality that is not generated");
        }
    }
    if (!(signal_strength >= 0.0) || !std::isfinite(signal_strength)) bad("signal_strength must be >= 0");
    if (!(noise_sigma >= 0.0) || !std::isfinite(noise_sigma)) bad("noise_sigma must be >= 0");
}

std::vector<std::vector<double>> planted_directions(const SynthSpec& spec) {
    std::seed_seq seq{static_cast<std::uint32_t>(spec.seed), static_cast<std::uint32_t>(spec.seed >> 32), 0x5eedu, 1u};
    std::mt19937_64 rng(seq);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::vector<std::vector<double>> dirs(spec.n_classes, std::vector<double>(spec.feat_dim));
    for (auto& d : dirs) {
        double norm = 0.0;
        for (auto& x : d) {
            x = gauss(rng);
            norm += x * x;
        }
        norm = std::sqrt(norm);
        for (auto& x : d) x /= norm;
    }
    return dirs;
}

Dataset generate_synthetic(const SynthSpec& spec) {
    spec.validate();
    const auto dirs = planted_directions(spec);
    std::seed_seq seq{static_cast<std::uint32_t>(spec.seed), static_cast<std::uint32_t>(spec.seed >> 32), 0x5eedu, 2u};
    std::mt19937_64 rng(seq);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    auto noise_vector = [&](std::size_t dim) {
        std::vector<float> v(dim);
        for (auto& x : v) x = static_cast<float>(spec.noise_sigma * gauss(rng));
        return v;
    };

    Dataset ds;
    const std::size_t total = spec.n_train + spec.n_val + spec.n_test;
    ds.records.reserve(total);
    for (std::size_t i = 0; i < total; ++i) {
        SampleRecord rec;
        rec.id = i;
        rec.split = i < spec.n_train ? Split::Train : (i < spec.n_train + spec.n_val ? Split::Val : Split::Test);
        rec.labels.resize(spec.n_classes);
        for (std::size_t c = 0; c < spec.n_classes; ++c) rec.labels[c] = unit(rng) < spec.label_prevalence[c] ? 1 : 0;

        // Noise is accumulated in double before the single rounding to float.
        std::vector<std::vector<std::vector<double>>> acc(2);
        for (Modality mod : {Modality::Rgb, Modality::Dct}) {
            const std::uint8_t bit = mod == Modality::Rgb ? kMaskRgb : kMaskDct;
            if (!(spec.modality_mask & bit)) continue;
            auto& views = acc[static_cast<std::size_t>(mod)];
            views.assign(kNumViews, std::vector<double>(spec.feat_dim));
            for (auto& v : views)
                for (auto& x : v) x = spec.noise_sigma * gauss(rng);
        }
        for (std::size_t c = 0; c < spec.n_classes; ++c) {
            if (!rec.labels[c]) continue;
            const auto im = spec.informative_modality[c];
            for (Modality mod : {Modality::Rgb, Modality::Dct}) {
                const bool planted = im == InformativeModality::Both ||
                                     (mod == Modality::Rgb ? im == InformativeModality::Rgb
                                                           : im == InformativeModality::Dct);
                if (!planted) continue;
                auto& v = acc[static_cast<std::size_t>(mod)][spec.informative_view[c]];
                for (std::size_t k = 0; k < spec.feat_dim; ++k) v[k] += spec.signal_strength * dirs[c][k];
            }
        }
        for (Modality mod : {Modality::Rgb, Modality::Dct}) {
            auto& src = acc[static_cast<std::size_t>(mod)];
            if (src.empty()) continue;
            auto& dst = mod == Modality::Rgb ? rec.rgb : rec.dct;
            for (const auto& v : src) dst.emplace_back(v.begin(), v.end());
        }
        if (spec.modality_mask & kMaskLavila) rec.lavila = noise_vector(spec.lavila_dim);
        ds.records.push_back(std::move(rec));
    }
    ds.manifest = make_manifest(ds.records, spec.modality_mask, static_cast<std::uint32_t>(spec.feat_dim),
                                static_cast<std::uint16_t>(spec.n_classes),
                                static_cast<std::uint32_t>(spec.lavila_dim));
    return ds;
}

}  // namespace mtbr
