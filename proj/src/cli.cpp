#include "mannerist/cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <random>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "mannerist/errors.hpp"
#include "mannerist/evaluation.hpp"
#include "mannerist/parallel.hpp"
#include "mannerist/synthetic.hpp"

namespace fs = std::filesystem;

namespace mannerist {

namespace {

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    if (in.bad()) throw IoError("error reading " + path.string());
    return buf.str();
}

/// Writes through a temporary sibling and renames it into place.
void write_file(const fs::path& path, const std::string& content) {
    if (path.has_parent_path()) {
        std::error_code ec;
        fs::create_directories(path.parent_path(), ec);
    }
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream o(tmp, std::ios::binary | std::ios::trunc);
        if (!o) throw IoError("cannot write " + path.string());
        o << content;
        if (!o) throw IoError("error writing " + path.string());
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) {
        fs::remove(tmp, ec);
        throw IoError("cannot write " + path.string());
    }
}

std::string fmt(const char* format, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, format, v);
    return buf;
}

std::uint64_t resolve_seed(const RunConfig& config, std::ostream& err) {
    if (config.seed) return *config.seed;
    std::random_device rd;
    const std::uint64_t seed = (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
    err << "no --seed given; using seed " << seed << "\n";
    return seed;
}

HyperGrid grid_of(const RunConfig& config) {
    HyperGrid grid{config.gammas, config.nus};
    grid.validate();
    return grid;
}

std::vector<ClipFeatures> load_features(const std::vector<std::string>& paths) {
    std::vector<ClipFeatures> all;
    for (const auto& p : paths) {
        auto clips = read_feature_vectors(read_file(p));
        all.insert(all.end(), std::make_move_iterator(clips.begin()), std::make_move_iterator(clips.end()));
    }
    return all;
}

/// `name=path` names the set explicitly; a bare path is named by its stem.
/// Files sharing a name are pooled into one set.
std::vector<LabeledClipSet> load_decoys(const std::vector<std::string>& specs) {
    std::vector<std::string> order;
    std::map<std::string, std::vector<std::string>> files;
    for (const auto& spec : specs) {
        std::string name;
        std::string path = spec;
        if (const auto eq = spec.find('='); eq != std::string::npos) {
            name = spec.substr(0, eq);
            path = spec.substr(eq + 1);
        } else {
            name = fs::path(spec).stem().string();
            if (name.ends_with(".features")) name.resize(name.size() - 9);
        }
        if (!files.contains(name)) order.push_back(name);
        files[name].push_back(path);
    }
    std::vector<LabeledClipSet> sets;
    for (const auto& name : order) {
        const auto clips = load_features(files[name]);
        sets.push_back({name, Label::NonTarget, to_matrix(clips)});
    }
    return sets;
}

Family family_option(const std::string& name) {
    const auto family = parse_family(name);
    if (!family) throw CLI::ValidationError("--family", "expected facial, gestural or combined");
    return *family;
}

// ---------------------------------------------------------------------------

struct SynthArgs {
    std::string out_dir;
    double duration_s = 1800.0;
    double separation = 3.0;
    double ar_coeff = kPersonaArCoeff;
    int personas = 2;
};

int cmd_synth(const RunConfig& config, const SynthArgs& args, std::ostream& out, std::ostream& err) {
    const auto seed = resolve_seed(config, err);
    auto [a, b] = make_persona_pair(args.separation, seed, args.ar_coeff);
    std::vector<PersonaSpec> personas{a};
    if (args.personas == 2) personas.push_back(b);
    const fs::path dir(args.out_dir);
    for (const auto& p : personas) {
        const auto stream = sample_stream(p, args.duration_s, config.fps);
        write_file(dir / (p.label + ".csv"), write_feature_csv(stream));
        write_file(dir / (p.label + ".persona.json"), persona_to_json(p));
        out << p.label << ": " << stream.frames.size() << " frames -> " << (dir / (p.label + ".csv")).string() << "\n";
    }
    out << "seed " << seed << "\n";
    return kExitOk;
}

struct FeaturizeArgs {
    std::vector<std::string> inputs;
    std::string out_dir = ".";
};

int cmd_featurize(const RunConfig& config, const FeaturizeArgs& args, std::ostream& out, std::ostream& err) {
    std::vector<fs::path> written;
    try {
        for (const auto& input : args.inputs) {
            const fs::path path(input);
            if (!fs::exists(path)) throw IoError("no such file: " + input);
            auto stem = path.stem().string();
            const auto stream = parse_feature_csv(read_file(path), config.fps, stem);
            const auto result = featurize_stream(stream, config.pipeline);
            const fs::path target = fs::path(args.out_dir) / (stem + ".features.csv");
            write_file(target, write_feature_vectors(result.clips));
            written.push_back(target);
            out << input << ": " << result.clips.size() << " clips (" << result.segments << " segments, "
                << result.flagged_frames << " motion frames) -> " << target.string() << "\n";
            if (result.clips.empty()) err << "warning: " << input << " produced no clips\n";
        }
    } catch (...) {
        std::error_code ec;
        for (const auto& p : written) fs::remove(p, ec);
        throw;
    }
    return kExitOk;
}

struct TrainArgs {
    std::vector<std::string> real;
    std::vector<std::string> decoys;
    std::string family = "combined";
    std::string label;
    std::string training_date;
};

int cmd_train(const RunConfig& config, const TrainArgs& args, std::ostream& out, std::ostream& err) {
    const auto family = family_option(args.family);
    const auto seed = resolve_seed(config, err);
    const auto real_clips = load_features(args.real);
    if (real_clips.size() < 5) {
        throw InsufficientDataError("need at least 5 real clips, got " + std::to_string(real_clips.size()));
    }
    const auto subset = family_pairs(family);
    const Matrix real = project_columns(to_matrix(real_clips), subset);
    Matrix decoys;
    if (!args.decoys.empty()) decoys = project_columns(to_matrix(load_features(args.decoys)), subset);

    const double target = config.calibration_target.value_or(default_target(family));
    GridSearchOptions options;
    options.validation_fraction = config.validation_fraction;
    options.seed = seed;
    options.jobs = config.jobs;
    if (decoys.rows() > 0) {
        err << "grid objective: balanced accuracy against " << decoys.rows() << " decoy clips\n";
    } else {
        err << "grid objective: true-positive rate (no decoys)\n";
    }
    auto result = grid_search(real, decoys.rows() > 0 ? &decoys : nullptr, grid_of(config), target, options);
    auto& model = result.model;
    if (family != Family::Combined) model.feature_subset = subset;
    model.metadata.family = std::string(family_name(family));
    model.metadata.persona_label = args.label;
    model.metadata.training_date = args.training_date;

    const double acceptance = acceptance_rate(decision_values(model, real), model.threshold);
    const auto path = config.output.empty() ? std::string("model.json") : config.output;
    write_file(path, save_model(model));
    out << "family " << family_name(family) << " (dimension " << model.dimension() << ")\n";
    out << "gamma " << fmt("%.6g", result.gamma) << " nu " << fmt("%.6g", result.nu) << "\n";
    out << "threshold " << fmt("%.17g", model.threshold) << "\n";
    out << "training acceptance " << fmt("%.4f", acceptance) << " (target " << fmt("%.2f", target) << ")\n";
    out << "support vectors " << model.alphas.size() << " of " << real.rows() << "\n";
    out << "model -> " << path << "\n";
    return kExitOk;
}

struct ClassifyArgs {
    std::string model;
    std::vector<std::string> inputs;
};

int cmd_classify(const RunConfig& config, const ClassifyArgs& args, std::ostream& out, std::ostream&) {
    const auto model = load_model(read_file(args.model));
    if (model.feature_order_hash != feature_order_hash()) {
        throw IncompatibleError("model feature order " + model.feature_order_hash + " does not match " +
                                feature_order_hash());
    }
    nlohmann::json files = nlohmann::json::array();
    for (const auto& input : args.inputs) {
        const auto clips = read_feature_vectors(read_file(input));
        nlohmann::json rows = nlohmann::json::array();
        std::size_t accepted = 0;
        out << input << "\n";
        for (const auto& c : clips) {
            const double s = score(model, c.vector);
            const bool is_target = s >= model.threshold;
            accepted += is_target ? 1 : 0;
            rows.push_back({{"source_id", c.source_id},
                            {"start_time", c.start_time},
                            {"score", s},
                            {"verdict", is_target ? "target" : "non-target"}});
            out << "  " << c.source_id << " @" << fmt("%.2f", c.start_time) << "s  score " << fmt("%+.6f", s)
                << "  " << (is_target ? "target" : "non-target") << "\n";
        }
        const double fraction = clips.empty() ? 0.0 : static_cast<double>(accepted) / static_cast<double>(clips.size());
        out << "  fraction target " << fmt("%.4f", fraction) << " (" << accepted << "/" << clips.size() << ")\n";
        files.push_back({{"path", input}, {"n_clips", clips.size()}, {"fraction_target", fraction}, {"clips", rows}});
    }
    if (!config.output.empty()) {
        nlohmann::json doc;
        doc["model"] = {{"gamma", model.gamma}, {"nu", model.nu}, {"threshold", model.threshold},
                        {"family", model.metadata.family}};
        doc["files"] = files;
        write_file(config.output, doc.dump(2) + "\n");
    }
    return kExitOk;
}

struct EvaluateArgs {
    std::vector<std::string> real;
    std::vector<std::string> decoys;
    std::string family = "all";
    std::size_t repeats = 100;
    double train_fraction = 0.8;
    bool table = false;
    std::vector<std::size_t> sizes{10, 25, 50, 100, 200, 300, 400, 496};
    std::size_t samples = 25;
    std::size_t classifiers = 500;
    std::size_t subset_size = 10;
    std::size_t top = 20;
};

EvalOptions eval_options(const RunConfig& config, const EvaluateArgs& args, std::uint64_t seed) {
    EvalOptions options;
    options.repeats = args.repeats;
    options.train_fraction = args.train_fraction;
    options.grid = grid_of(config);
    options.target = config.calibration_target.value_or(default_target(Family::Combined));
    options.seed = seed;
    options.grid_options.validation_fraction = config.validation_fraction;
    options.jobs = config.jobs;
    return options;
}

void emit(const RunConfig& config, const std::string& json, std::ostream& out) {
    if (config.output.empty()) {
        out << json;
    } else {
        write_file(config.output, json);
    }
}

int cmd_evaluate(const RunConfig& config, const EvaluateArgs& args, std::ostream& out, std::ostream& err) {
    const auto seed = resolve_seed(config, err);
    const Matrix real = to_matrix(load_features(args.real));
    const auto decoys = load_decoys(args.decoys);
    const auto options = eval_options(config, args, seed);

    std::vector<Family> families;
    if (args.family == "all") {
        families = {Family::Facial, Family::Gestural, Family::Combined};
    } else {
        families = {family_option(args.family)};
    }
    std::vector<DatasetReport> reports;
    for (const auto family : families) {
        auto family_options = options;
        auto report = feature_family_eval(family, real, decoys, family_options);
        if (config.calibration_target) {
            family_options.target = *config.calibration_target;
            family_options.feature_subset = family == Family::Combined ? std::vector<std::size_t>{} : family_pairs(family);
            report = repeated_split_eval(real, decoys, family_options);
            report.family = std::string(family_name(family));
        }
        err << "evaluated " << report.family << "\n";
        reports.push_back(std::move(report));
    }

    std::string json;
    if (reports.size() == 1) {
        json = report_to_json(reports.front());
    } else {
        auto doc = nlohmann::json::object();
        doc["reports"] = nlohmann::json::array();
        for (const auto& r : reports) doc["reports"].push_back(nlohmann::json::parse(report_to_json(r)));
        json = doc.dump(2) + "\n";
    }
    emit(config, json, out);
    if (args.table) (config.output.empty() ? err : out) << format_table(reports);
    return kExitOk;
}

int cmd_sweep(const RunConfig& config, const EvaluateArgs& args, std::ostream& out, std::ostream& err) {
    const auto seed = resolve_seed(config, err);
    const Matrix real = to_matrix(load_features(args.real));
    const auto decoys = load_decoys(args.decoys);
    const auto report = subset_sweep(real, decoys, args.sizes, args.samples, eval_options(config, args, seed));
    emit(config, sweep_to_json(report), out);
    auto& log = config.output.empty() ? err : out;
    for (const auto& s : report.per_size) {
        log << "size " << s.size << ": median " << fmt("%.4f", s.median) << " [" << fmt("%.4f", s.q25) << ", "
            << fmt("%.4f", s.q75) << "]\n";
    }
    return kExitOk;
}

int cmd_importance(const RunConfig& config, const EvaluateArgs& args, std::ostream& out, std::ostream& err) {
    const auto seed = resolve_seed(config, err);
    const Matrix real = to_matrix(load_features(args.real));
    const auto decoys = load_decoys(args.decoys);
    const auto table =
        feature_importance(real, decoys, args.classifiers, args.subset_size, eval_options(config, args, seed));
    emit(config, importance_to_json(table), out);
    auto& log = config.output.empty() ? err : out;
    log << "classifier accuracy range " << fmt("%.4f", table.min_accuracy) << " .. " << fmt("%.4f", table.max_accuracy)
        << "\n";
    for (std::size_t i = 0; i < std::min(args.top, table.rows.size()); ++i) {
        const auto& r = table.rows[i];
        if (!r.mean_accuracy) break;
        log << fmt("%6.2f", 100.0 * *r.mean_accuracy) << "  " << r.name << " (" << r.participation << ")\n";
    }
    return kExitOk;
}

} // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Behavioral-fingerprint toolkit: featurize clips, train and apply one-class models, evaluate.",
                 "mannerist"};
    app.require_subcommand(1);
    app.set_config("--config", "", "Flat key = value file supplying defaults for any option");

    RunConfig config;
    std::uint64_t seed_value = 0;
    // Shared settings live on the root so a flat config file can set them;
    // subcommands fall through to it.
    {
        auto* sub = &app;
        sub->add_option("--window", config.pipeline.window_s, "Clip length in seconds")
            ->capture_default_str()->check(CLI::PositiveNumber);
        sub->add_option("--stride", config.pipeline.stride_s, "Seconds between clip starts")
            ->capture_default_str()->check(CLI::PositiveNumber);
        sub->add_option("--motion-threshold", config.pipeline.motion_threshold,
                        "Margin difference above which a frame counts as camera motion")
            ->capture_default_str()->check(CLI::Range(0.0, 1.0));
        sub->add_option("--fps", config.fps, "Frame rate of the input streams")->capture_default_str()->check(CLI::PositiveNumber);
        sub->add_option("--gammas", config.gammas, "Kernel widths to search")->delimiter(',')->capture_default_str();
        sub->add_option("--nus", config.nus, "Outlier fractions to search")->delimiter(',')->capture_default_str();
        sub->add_option("--target", config.calibration_target,
                        "Calibration target (default 0.95 single family, 0.99 combined)")
            ->check(CLI::Range(0.0, 1.0));
        sub->add_option("--validation-fraction", config.validation_fraction,
                        "Share of real training clips held out to score grid cells (0 = in-sample)")
            ->capture_default_str()->check(CLI::Range(0.0, 0.9));
        sub->add_option("--seed", seed_value, "Master seed");
        sub->add_option("--jobs", config.jobs, "Worker threads")->capture_default_str()->check(CLI::PositiveNumber);
        sub->add_option("-o,--output", config.output, "Output file");
    }
    auto add_common = [](CLI::App* sub) {
        sub->fallthrough();
        sub->footer("Shared options (--seed, --jobs, -o, --config, ...) are listed by `mannerist --help`.");
    };

    SynthArgs synth;
    auto* synth_cmd = app.add_subcommand("synth", "Write feature CSVs for a synthetic persona pair");
    add_common(synth_cmd);
    synth_cmd->add_option("--out-dir", synth.out_dir, "Output directory")->required();
    synth_cmd->add_option("--duration", synth.duration_s, "Seconds of footage per persona")->capture_default_str();
    synth_cmd->add_option("--separation", synth.separation, "Perturbation size between the two personas")->capture_default_str();
    synth_cmd->add_option("--ar", synth.ar_coeff, "AR(1) coefficient of the feature process")->capture_default_str()->check(CLI::Range(0.0, 0.999));
    synth_cmd->add_option("--personas", synth.personas, "1 or 2")->capture_default_str()->check(CLI::Range(1, 2));

    FeaturizeArgs featurize;
    auto* featurize_cmd = app.add_subcommand("featurize", "Canonical feature CSVs -> per-clip correlation vectors");
    add_common(featurize_cmd);
    featurize_cmd->add_option("inputs", featurize.inputs, "Feature CSV files")->required();
    featurize_cmd->add_option("--out-dir", featurize.out_dir, "Directory for <stem>.features.csv")->capture_default_str();

    TrainArgs train_args;
    auto* train_cmd = app.add_subcommand("train", "Grid-search, train and calibrate a one-class model");
    add_common(train_cmd);
    train_cmd->add_option("--real", train_args.real, "Feature-vector files of the target identity")->required();
    train_cmd->add_option("--decoy", train_args.decoys, "Feature-vector files of other identities");
    train_cmd->add_option("--family", train_args.family, "facial, gestural or combined")->capture_default_str();
    train_cmd->add_option("--label", train_args.label, "Persona label stored in the model");
    train_cmd->add_option("--training-date", train_args.training_date, "Date stored in the model metadata");

    ClassifyArgs classify;
    auto* classify_cmd = app.add_subcommand("classify", "Score feature-vector files against a model");
    add_common(classify_cmd);
    classify_cmd->add_option("--model", classify.model, "Model JSON")->required();
    classify_cmd->add_option("inputs", classify.inputs, "Feature-vector files");

    EvaluateArgs eval;
    auto add_eval_inputs = [&](CLI::App* sub) {
        add_common(sub);
        sub->add_option("--real", eval.real, "Feature-vector files of the target identity")->required();
        sub->add_option("--decoy", eval.decoys, "Decoy files, as PATH or NAME=PATH");
    };
    auto* evaluate_cmd = app.add_subcommand("evaluate", "Repeated train/test split evaluation");
    add_eval_inputs(evaluate_cmd);
    evaluate_cmd->add_option("--family", eval.family, "facial, gestural, combined or all")->capture_default_str();
    evaluate_cmd->add_option("--repeats", eval.repeats, "Number of random splits")->capture_default_str()->check(CLI::PositiveNumber);
    evaluate_cmd->add_option("--train-fraction", eval.train_fraction, "Training share of each split")->capture_default_str()->check(CLI::Range(0.0, 1.0));
    evaluate_cmd->add_flag("--table", eval.table, "Print a plain-text accuracy table");

    auto* sweep_cmd = app.add_subcommand("sweep", "Accuracy versus random feature-subset size");
    add_eval_inputs(sweep_cmd);
    sweep_cmd->add_option("--sizes", eval.sizes, "Subset sizes")->delimiter(',')->capture_default_str();
    sweep_cmd->add_option("--samples", eval.samples, "Subsets per size")->capture_default_str()->check(CLI::PositiveNumber);
    sweep_cmd->add_option("--train-fraction", eval.train_fraction, "Training share of the split")->capture_default_str();

    auto* importance_cmd = app.add_subcommand("importance", "Rank feature pairs over many small random-subset classifiers");
    add_eval_inputs(importance_cmd);
    importance_cmd->add_option("--classifiers", eval.classifiers, "Number of classifiers")->capture_default_str()->check(CLI::PositiveNumber);
    importance_cmd->add_option("--subset-size", eval.subset_size, "Pairs per classifier")->capture_default_str()->check(CLI::Range(1, 496));
    importance_cmd->add_option("--top", eval.top, "Rows to print")->capture_default_str();
    importance_cmd->add_option("--train-fraction", eval.train_fraction, "Training share of the split")->capture_default_str();

    std::vector<std::string> reversed(args.rbegin(), args.rend() - 1);
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitUsage;
    }

    if (app.count("--seed") > 0) config.seed = seed_value;

    try {
        if (synth_cmd->parsed()) return cmd_synth(config, synth, out, err);
        if (featurize_cmd->parsed()) return cmd_featurize(config, featurize, out, err);
        if (train_cmd->parsed()) return cmd_train(config, train_args, out, err);
        if (classify_cmd->parsed()) return cmd_classify(config, classify, out, err);
        if (evaluate_cmd->parsed()) return cmd_evaluate(config, eval, out, err);
        if (sweep_cmd->parsed()) return cmd_sweep(config, eval, out, err);
        if (importance_cmd->parsed()) return cmd_importance(config, eval, out, err);
    } catch (const CLI::ValidationError& e) {
        err << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const InsufficientDataError& e) {
        err << "error: " << e.what() << "\n";
        return kExitInsufficientData;
    } catch (const IncompatibleError& e) {
        err << "error: " << e.what() << "\n";
        return kExitIncompatible;
    } catch (const ConvergenceError& e) {
        err << "error: " << e.what() << "\n";
        return kExitSolver;
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return kExitIo;
    } catch (const std::invalid_argument& e) {
        err << "error: " << e.what() << "\n";
        return kExitUsage;
    }
    return kExitUsage;
}

} // namespace mannerist
