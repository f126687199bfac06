#include "mtbr/cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "mtbr/binary_io.hpp"
#include "mtbr/dct.hpp"
#include "mtbr/errors.hpp"
#include "mtbr/fusion.hpp"
#include "mtbr/training.hpp"
#include "mtbr/transformer.hpp"
#include "mtbr/video_io.hpp"

namespace mtbr {

namespace {

namespace fs = std::filesystem;

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(trim(item));
    return out;
}

std::string read_text(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::uint64_t parse_u64(const std::string& key, const std::string& v) {
    try {
        std::size_t used = 0;
        const unsigned long long n = std::stoull(v, &used);
        if (used != v.size() || v.front() == '-') throw std::invalid_argument(v);
        return n;
    } catch (const std::exception&) {
        throw ValidationError(key + " expects a non-negative integer, got \"" + v + "\"");
    }
}

double parse_double(const std::string& key, const std::string& v) {
    try {
        std::size_t used = 0;
        const double d = std::stod(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return d;
    } catch (const std::exception&) {
        throw ValidationError(key + " expects a number, got \"" + v + "\"");
    }
}

std::uint8_t parse_modality_mask(const std::string& s) {
    std::uint8_t mask = 0;
    for (const auto& m : split_list(s)) {
        if (m == "rgb") mask |= kMaskRgb;
        else if (m == "dct") mask |= kMaskDct;
        else if (m == "lavila") mask |= kMaskLavila;
        else throw ValidationError("unknown modality \"" + m + "\"");
    }
    if (mask == 0) throw ValidationError("empty modality list");
    return mask;
}

InformativeModality parse_informative(const std::string& s) {
    if (s == "rgb") return InformativeModality::Rgb;
    if (s == "dct") return InformativeModality::Dct;
    if (s == "both") return InformativeModality::Both;
    throw ValidationError("informative_modality must be rgb, dct or both, got \"" + s + "\"");
}

template <class T, class F>
std::vector<T> per_class(const std::string& key, const std::string& raw, std::size_t n_classes, F parse) {
    const auto items = split_list(raw);
    if (items.size() == 1) return std::vector<T>(n_classes, parse(items.front()));
    if (items.size() != n_classes) {
        throw ValidationError(key + " lists " + std::to_string(items.size()) + " values for " +
                              std::to_string(n_classes) + " classes");
    }
    std::vector<T> out;
    for (const auto& it : items) out.push_back(parse(it));
    return out;
}

std::string fmt(const char* format, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, format, v);
    return buf;
}

std::vector<std::string_view> class_names(std::size_t n_classes) {
    std::vector<std::string_view> names;
    static std::vector<std::string> extra;
    for (std::size_t c = 0; c < n_classes; ++c) {
        if (c < kBehaviorClasses.size()) {
            names.push_back(kBehaviorClasses[c]);
        } else {
            while (extra.size() <= c - kBehaviorClasses.size())
                extra.push_back("class-" + std::to_string(kBehaviorClasses.size() + extra.size()));
            names.push_back(extra[c - kBehaviorClasses.size()]);
        }
    }
    return names;
}

// --- model construction for a dataset ------------------------------------------

ModelConfig config_for_dataset(ModelKind kind, const DatasetManifest& m, std::uint64_t seed) {
    ModelConfig mc;
    mc.kind = kind;
    mc.fusion.feat_dim = m.feat_dim;
    mc.fusion.n_views = m.n_views;
    mc.fusion.n_classes = m.n_classes;
    mc.fusion.seed = seed;
    mc.lavila_dim = m.lavila_dim;
    mc.encoder.n_classes = m.n_classes;
    mc.encoder.seed = seed;
    if (kind == ModelKind::Transformer) {
        if (m.lavila_dim == 0) throw ValidationError("dataset has no LaViLa features");
        if (m.lavila_dim % mc.encoder.d_model != 0) mc.encoder.d_model = m.lavila_dim;
        mc.encoder.seq_len = m.lavila_dim / mc.encoder.d_model;
        if (mc.encoder.d_model % mc.encoder.n_heads != 0) mc.encoder.n_heads = 1;
    }
    return mc;
}

void check_model_fits(const Model& model, const Dataset& ds) {
    const auto need = model.required_modalities();
    if ((ds.manifest.modality_mask & need) != need) {
        throw ValidationError("dataset lacks a modality the model reads");
    }
    if (model.n_classes() != ds.manifest.n_classes) {
        throw ValidationError("model predicts " + std::to_string(model.n_classes()) + " classes, dataset has " +
                              std::to_string(ds.manifest.n_classes));
    }
}

// --- subcommands -----------------------------------------------------------------

struct DctArgs {
    std::string input, output, visualize;
    std::size_t snippet = 0;
    std::size_t resize = 0;
};

int cmd_dct(const DctArgs& a, std::ostream& out) {
    auto frames = read_video(a.input);
    if (a.snippet > 0) frames = take_snippet(std::move(frames), a.snippet).frames;
    if (a.resize > 0) {
        for (auto& f : frames) f = resize_bilinear(f, a.resize, a.resize);
    }
    const auto coeffs = video_dct(VideoSnippet{std::move(frames)});
    write_video(a.output, coeffs);
    if (!a.visualize.empty()) {
        fs::create_directories(a.visualize);
        for (std::size_t i = 0; i < coeffs.size(); ++i) {
            const Frame vis = dct_visualize(coeffs[i]);
            char name[32];
            std::snprintf(name, sizeof name, "frame_%04zu.%s", i, vis.channels == 1 ? "pgm" : "ppm");
            write_netpbm((fs::path(a.visualize) / name).string(), vis);
        }
    }
    out << "wrote " << coeffs.size() << " DCT frames to " << a.output << "\n";
    return kExitOk;
}

int cmd_synth(const std::string& spec_path, const std::string& output, std::ostream& out) {
    const SynthSpec spec = parse_synth_spec(read_text(spec_path));
    const Dataset ds = generate_synthetic(spec);
    write_dataset(ds.records, ds.manifest, output);
    out << "wrote " << ds.records.size() << " samples to " << output << "\n";
    return kExitOk;
}

int cmd_train(const std::string& config_path, std::ostream& out, std::ostream& err) {
    const RunConfig rc = load_run_config(config_path);
    const Dataset ds = read_dataset(rc.dataset_path);
    const ModelKind kind = model_kind_for_modalities(rc.modalities);
    auto model = make_model(config_for_dataset(kind, ds.manifest, rc.train.seed));
    check_model_fits(*model, ds);

    fs::create_directories(rc.output_dir);
    const fs::path dir(rc.output_dir);
    std::ofstream history(dir / "history.jsonl", std::ios::binary | std::ios::trunc);
    if (!history) throw ValidationError("cannot write " + (dir / "history.jsonl").string());
    FitHooks hooks;
    hooks.on_epoch = [&](const EpochReport& r, const Model&) { history << epoch_report_json(r) << '\n'; };
    const FitResult fr = fit(*model, ds, rc.train, hooks);
    history.close();

    save_checkpoint(*model, (dir / "best.mtbp").string());
    const PredictionMatrix pm = predict(*model, ds.split(Split::Val));
    const APResult ap = mean_average_precision(pm, &err);
    const auto names = class_names(ap.per_class.size());
    write_file_bytes((dir / "classwise.csv").string(), [&] {
        const std::string csv = classwise_csv(ap, names);
        return std::vector<char>(csv.begin(), csv.end());
    }());
    out << "epochs run: " << fr.reports.size() << ", best epoch: " << fr.best_epoch << "\n";
    out << "val mAP: " << fmt("%.4f", ap.map) << "\n";
    return kExitOk;
}

int cmd_eval(const std::string& checkpoint, const std::string& dataset, const std::string& split, std::ostream& out,
             std::ostream& err) {
    auto model = load_checkpoint(checkpoint);
    const Dataset ds = read_dataset(dataset);
    check_model_fits(*model, ds);
    const auto records = ds.split(parse_split(split));
    if (records.empty()) throw ValidationError("split " + split + " is empty");
    const APResult ap = mean_average_precision(predict(*model, records), &err);
    out << split << " mAP: " << fmt("%.4f", ap.map) << "\n";
    out << classwise_table(ap, class_names(ap.per_class.size()));
    return kExitOk;
}

int cmd_attention_report(const std::string& checkpoint, const std::string& dataset, const std::string& split,
                         std::ostream& out) {
    auto model = load_checkpoint(checkpoint);
    if (model->kind() == ModelKind::Transformer) throw ValidationError("transformer checkpoints have no view attention");
    const Dataset ds = read_dataset(dataset);
    check_model_fits(*model, ds);
    const auto report = attention_report(*model, ds, parse_split(split));

    nlohmann::ordered_json j;
    j["split"] = split;
    j["views"] = {"frontal", "left", "right"};
    auto att = nlohmann::ordered_json::object();
    for (const auto& [mod, a] : report) att[std::string(modality_name(mod))] = a;
    j["attention"] = att;
    out << j.dump() << "\n";

    char line[128];
    std::snprintf(line, sizeof line, "%-10s %9s %9s %9s\n", "modality", "frontal", "left", "right");
    out << line;
    for (const auto& [mod, a] : report) {
        std::snprintf(line, sizeof line, "%-10s %9.3f %9.3f %9.3f\n", std::string(modality_name(mod)).c_str(), a[0],
                      a[1], a[2]);
        out << line;
    }
    return kExitOk;
}

int cmd_gradcheck(const std::string& model, std::uint64_t seed, std::ostream& out) {
    const GradcheckReport r = gradcheck_miniature(model, seed);
    out << model << " seed " << seed << ": max relative error " << fmt("%.3e", r.max_rel_error) << "\n";
    if (r.max_rel_error < kGradcheckTolerance) return kExitOk;
    out << "worst parameter: " << r.worst_param << "\n";
    return kExitNumeric;
}

}  // namespace

SynthSpec parse_synth_spec(const std::string& text) {
    std::map<std::string, std::string> kv;
    static const std::set<std::string> keys = {
        "seed",          "n_train",         "n_val",      "n_test",           "n_classes",
        "feat_dim",      "lavila_dim",      "modalities", "signal_strength",  "noise_sigma",
        "prevalence",    "informative_view", "informative_modality"};
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ValidationError("spec line " + std::to_string(lineno) + ": expected key=value");
        const std::string key = trim(line.substr(0, eq));
        if (!keys.count(key)) throw ValidationError("spec line " + std::to_string(lineno) + ": unknown key \"" + key + "\"");
        if (!kv.emplace(key, trim(line.substr(eq + 1))).second) {
            throw ValidationError("spec line " + std::to_string(lineno) + ": repeated key " + key);
        }
    }
    auto get = [&](const char* k, const char* dflt) { return kv.count(k) ? kv.at(k) : std::string(dflt); };

    SynthSpec s;
    s.seed = parse_u64("seed", get("seed", "0"));
    s.n_train = parse_u64("n_train", get("n_train", "2000"));
    s.n_val = parse_u64("n_val", get("n_val", "500"));
    s.n_test = parse_u64("n_test", get("n_test", "0"));
    s.n_classes = parse_u64("n_classes", get("n_classes", "14"));
    s.feat_dim = parse_u64("feat_dim", get("feat_dim", "1024"));
    s.lavila_dim = parse_u64("lavila_dim", get("lavila_dim", "768"));
    s.modality_mask = parse_modality_mask(get("modalities", "rgb,dct"));
    s.signal_strength = parse_double("signal_strength", get("signal_strength", "3.0"));
    s.noise_sigma = parse_double("noise_sigma", get("noise_sigma", "1.0"));
    s.label_prevalence = per_class<double>("prevalence", get("prevalence", "0.2"), s.n_classes,
                                           [](const std::string& v) { return parse_double("prevalence", v); });
    s.informative_view = per_class<std::size_t>("informative_view", get("informative_view", "1"), s.n_classes,
                                                [](const std::string& v) { return parse_u64("informative_view", v); });
    s.informative_modality = per_class<InformativeModality>(
        "informative_modality", get("informative_modality", "rgb"), s.n_classes, parse_informative);
    s.validate();
    return s;
}

GradcheckReport gradcheck_miniature(const std::string& name, std::uint64_t seed) {
    SynthSpec spec;
    spec.seed = seed;
    spec.n_train = 3;
    spec.n_val = 0;
    spec.n_classes = 4;
    spec.feat_dim = 5;
    spec.lavila_dim = 64;
    spec.modality_mask = kMaskRgb | kMaskDct | kMaskLavila;
    spec.informative_view.assign(spec.n_classes, 1);
    spec.informative_modality.assign(spec.n_classes, InformativeModality::Both);
    spec.label_prevalence.assign(spec.n_classes, 0.5);
    spec.signal_strength = 1.0;
    const Dataset ds = generate_synthetic(spec);

    ModelConfig mc;
    if (name == "multiview") mc.kind = ModelKind::MultiviewRgb;
    else if (name == "bimodal") mc.kind = ModelKind::Bimodal;
    else if (name == "trimodal") mc.kind = ModelKind::Trimodal;
    else if (name == "transformer") mc.kind = ModelKind::Transformer;
    else throw ValidationError("unknown gradcheck model \"" + name + "\"");
    mc.fusion.feat_dim = spec.feat_dim;
    mc.fusion.hidden = 6;
    mc.fusion.n_classes = spec.n_classes;
    mc.fusion.seed = seed;
    mc.lavila_dim = spec.lavila_dim;
    mc.encoder.d_model = 16;
    mc.encoder.n_heads = 2;
    mc.encoder.d_ff = 32;
    mc.encoder.n_layers = 1;
    mc.encoder.seq_len = spec.lavila_dim / mc.encoder.d_model;
    mc.encoder.n_classes = spec.n_classes;
    mc.encoder.positional_encoding = true;
    mc.encoder.seed = seed;
    auto model = make_model(mc);

    std::vector<const SampleRecord*> records;
    for (const auto& r : ds.records) records.push_back(&r);
    const Batch batch = make_batch(*model, records);
    const Model& m = *model;
    LossFn loss = [&](Tape& tape, const std::vector<Var>& p) { return bce_loss(m.forward(tape, p, batch).probs, batch.targets); };
    const GradCheckResult g = grad_check(loss, model->snapshot(), kGradcheckStep);
    return {g.max_rel_error, model->parameters()[g.worst_param].name};
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Multiview bodily-behaviour recognition toolkit", "mtbr"};
    app.require_subcommand(1);

    DctArgs dct;
    auto* s_dct = app.add_subcommand("dct", "Frame-wise 2-D DCT of an MTVF video");
    s_dct->add_option("--input", dct.input, "Input MTVF video")->required();
    s_dct->add_option("--output", dct.output, "Output MTVF coefficient video")->required();
    s_dct->add_option("--visualize", dct.visualize, "Directory for log-magnitude frames");
    s_dct->add_option("--snippet", dct.snippet, "Centered snippet length (0 keeps all frames)");
    s_dct->add_option("--resize", dct.resize, "Resize frames to N×N before the transform");

    std::string synth_spec, synth_out;
    auto* s_synth = app.add_subcommand("synth", "Generate a planted-signal dataset");
    s_synth->add_option("--spec", synth_spec, "key=value recipe")->required();
    s_synth->add_option("--output", synth_out, "Output MTBR dataset")->required();

    std::string train_config;
    auto* s_train = app.add_subcommand("train", "Train a model from a run configuration");
    s_train->add_option("--config", train_config, "key=value run configuration")->required();

    std::string ckpt, dataset, split = "val";
    auto* s_eval = app.add_subcommand("eval", "Score a checkpoint on a dataset split");
    s_eval->add_option("--checkpoint", ckpt, "MTBP checkpoint")->required();
    s_eval->add_option("--dataset", dataset, "MTBR dataset")->required();
    s_eval->add_option("--split", split, "val or test")->check(CLI::IsMember({"val", "test"}));

    auto* s_att = app.add_subcommand("attention-report", "Mean view attention of a fusion checkpoint");
    s_att->add_option("--checkpoint", ckpt, "MTBP checkpoint")->required();
    s_att->add_option("--dataset", dataset, "MTBR dataset")->required();
    s_att->add_option("--split", split, "train, val or test")->check(CLI::IsMember({"train", "val", "test"}));

    std::string gc_model;
    std::uint64_t gc_seed = 0;
    auto* s_gc = app.add_subcommand("gradcheck", "Finite-difference check of a miniature model");
    s_gc->add_option("--model", gc_model, "multiview, bimodal, trimodal or transformer")
        ->required()
        ->check(CLI::IsMember({"multiview", "bimodal", "trimodal", "transformer"}));
    s_gc->add_option("--seed", gc_seed, "Seed of the miniature instance");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n" << app.help();
        return kExitUsage;
    }

    try {
        if (*s_dct) return cmd_dct(dct, out);
        if (*s_synth) return cmd_synth(synth_spec, synth_out, out);
        if (*s_train) return cmd_train(train_config, out, err);
        if (*s_eval) return cmd_eval(ckpt, dataset, split, out, err);
        if (*s_att) return cmd_attention_report(ckpt, dataset, split, out);
        if (*s_gc) return cmd_gradcheck(gc_model, gc_seed, out);
    } catch (const NumericError& e) {
        err << "numeric failure: " << e.what() << "\n";
        return kExitNumeric;
    } catch (const FormatError& e) {
        err << "format error: " << e.what() << "\n";
        return kExitData;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitData;
    }
    err << app.help();
    return kExitUsage;
}

}  // namespace mtbr
