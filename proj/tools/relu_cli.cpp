// relu: command-line front end for the relative-uncertainty detection toolkit.
//
// Subcommands: synth, train, infer, fit, score, evaluate, tune, experiment,
// plot. Every command prints a one-line JSON provenance record on success.
// Exit codes: 0 success, 1 input error, 2 protocol error, 3 numerical failure.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "relu/relu.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kVersion = "0.1.0";

struct GlobalArgs {
    std::uint64_t seed = 0;
    std::string out_dir;
    std::string format = "json,csv";
    std::string config_path;

    bool wants(const std::string& fmt) const {
        return format.find(fmt) != std::string::npos;
    }
};

std::string resolve_out_dir(const GlobalArgs& g) {
    if (!g.out_dir.empty()) return g.out_dir;
    if (const char* env = std::getenv("RELU_OUT_DIR"); env != nullptr && *env != '\0') return env;
    return ".";
}

void ensure_dir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw relu::InputError("cannot create output directory " + dir + ": " + ec.message());
}

void print_provenance(const std::string& command, const GlobalArgs& g,
                      const std::vector<std::string>& outputs, json extra = json::object()) {
    json j;
    j["command"] = command;
    j["config"] = g.config_path.empty() ? json() : json(g.config_path);
    j["out_dir"] = resolve_out_dir(g);
    j["outputs"] = outputs;
    j["seed"] = g.seed;
    j["version"] = kVersion;
    if (!extra.empty()) j["details"] = std::move(extra);
    std::cout << j.dump() << "\n";
}

json config_json(const GlobalArgs& g) {
    if (g.config_path.empty()) return json::object();
    return relu::io::parse_json_file(g.config_path);
}

// ---- dataset assembly shared by fit/score/evaluate/tune ----

struct TableArgs {
    std::string logits_path;
    std::string labels_path;
    std::string features_path;
    std::string model_path;
    bool probs = false;
};

relu::EvalDataset load_dataset(const TableArgs& args, const std::string& tag) {
    const relu::Matrix table = relu::io::load_matrix(args.logits_path);
    std::vector<int> labels;
    if (!args.labels_path.empty()) {
        labels = relu::io::load_labels(args.labels_path, static_cast<int>(table.cols));
    } else {
        // No labels supplied: use the predicted class, which keeps the sample
        // invariants intact for label-free uses (scoring, membership).
        labels.reserve(table.rows);
        for (std::size_t r = 0; r < table.rows; ++r) {
            std::vector<double> row(table.row(r), table.row(r) + table.cols);
            labels.push_back(relu::argmax_predict(row));
        }
    }
    auto ds = relu::io::dataset_from_tables(table, labels, args.probs, tag);
    if (!args.features_path.empty()) {
        const relu::Matrix feats = relu::io::load_matrix(args.features_path);
        if (feats.rows != ds.samples.size())
            throw relu::InputError("features row count (" + std::to_string(feats.rows) +
                                   ") does not match the logits table (" +
                                   std::to_string(ds.samples.size()) + ")");
        for (std::size_t r = 0; r < feats.rows; ++r)
            ds.samples[r].features.assign(feats.row(r), feats.row(r) + feats.cols);
    }
    return ds;
}

std::optional<relu::ClassifierModel> load_model_if(const std::string& path) {
    if (path.empty()) return std::nullopt;
    return relu::io::load_model(path);
}

// ---- experiment assembly ----

struct BuiltDataset {
    relu::EvalDataset dataset;
    std::optional<relu::ClassifierModel> model;
};

relu::TrainOptions train_options_from(const json& cfg) {
    relu::TrainOptions opts;
    if (cfg.contains("epochs")) opts.epochs = cfg["epochs"].get<int>();
    if (cfg.contains("learning_rate")) opts.learning_rate = cfg["learning_rate"].get<double>();
    if (cfg.contains("hidden_width")) opts.hidden_width = cfg["hidden_width"].get<int>();
    if (cfg.contains("seed")) opts.seed = cfg["seed"].get<std::uint64_t>();
    return opts;
}

relu::Architecture arch_from(const json& cfg) {
    if (cfg.contains("arch")) return relu::architecture_from_name(cfg["arch"].get<std::string>());
    return relu::Architecture::LinearSoftmax;
}

relu::SynthConfig synth_config_from_spec(const json& spec) {
    if (spec.contains("preset")) {
        const std::string preset = spec["preset"].get<std::string>();
        if (preset != "asymmetric-confusion")
            throw relu::InputError("unknown synth preset: " + preset);
        std::uint64_t seed = 7;
        if (spec.contains("seed")) seed = spec["seed"].get<std::uint64_t>();
        return relu::asymmetric_confusion_benchmark(seed);
    }
    if (spec.contains("synth")) return relu::io::synth_config_from_json(spec["synth"]);
    throw relu::InputError("dataset spec: expected 'synth', 'preset', or 'logits'");
}

// Builds the evaluated dataset for one experiment role. A synthetic spec
// trains its own classifier (or reuses `shared_model` for the secondary
// role); a file spec loads tables directly.
BuiltDataset build_dataset(const json& spec, const json& train_cfg,
                           const relu::ClassifierModel* shared_model, const std::string& tag) {
    BuiltDataset out;
    if (spec.contains("logits")) {
        TableArgs args;
        args.logits_path = spec["logits"].get<std::string>();
        if (spec.contains("labels")) args.labels_path = spec["labels"].get<std::string>();
        if (spec.contains("features")) args.features_path = spec["features"].get<std::string>();
        if (spec.contains("probs")) args.probs = spec["probs"].get<bool>();
        out.dataset = load_dataset(args, tag);
        if (spec.contains("model")) out.model = relu::io::load_model(spec["model"].get<std::string>());
        return out;
    }

    const relu::SynthConfig cfg = synth_config_from_spec(spec);
    const auto data = relu::synth_generate(cfg);
    if (shared_model != nullptr) {
        out.dataset = relu::infer_dataset(*shared_model, data.test.features, data.test.labels, tag);
        return out;
    }
    const auto trained = relu::train_classifier(data.train.features, data.train.labels,
                                                arch_from(train_cfg), cfg.num_classes,
                                                train_options_from(train_cfg));
    out.model = trained.model;
    out.dataset = relu::infer_dataset(trained.model, data.test.features, data.test.labels, tag);
    return out;
}

std::vector<relu::Method> methods_from(const json& cfg) {
    std::vector<relu::Method> methods;
    if (cfg.contains("methods")) {
        for (const auto& m : cfg["methods"]) methods.push_back(relu::method_from_name(m.get<std::string>()));
    } else {
        methods = {relu::Method::Msp, relu::Method::Odin, relu::Method::GiniDoctor, relu::Method::RelU};
    }
    if (methods.empty()) throw relu::InputError("experiment config: empty method list");
    return methods;
}

relu::ExperimentOptions experiment_options_from(const json& cfg) {
    relu::ExperimentOptions options;
    if (cfg.contains("alpha")) options.alpha = cfg["alpha"].get<double>();
    if (cfg.contains("norm_budget")) options.norm_budget = cfg["norm_budget"].get<double>();
    if (cfg.contains("mlp")) {
        const auto& m = cfg["mlp"];
        if (m.contains("hidden_width")) options.mlp_options.hidden_width = m["hidden_width"].get<int>();
        if (m.contains("epochs")) options.mlp_options.epochs = m["epochs"].get<int>();
        if (m.contains("learning_rate"))
            options.mlp_options.learning_rate = m["learning_rate"].get<double>();
    }
    return options;
}

// Writes results plus, when a Rel-U seed succeeded, the first fitted observer
// and the matching tuning-split confusion matrix for interpretability plots.
std::vector<std::string> write_experiment_outputs(const relu::ExperimentResult& result,
                                                  const relu::EvalDataset& dataset,
                                                  const GlobalArgs& g) {
    const std::string dir = resolve_out_dir(g);
    ensure_dir(dir);
    std::vector<std::string> outputs;
    if (g.wants("json")) {
        const std::string path = dir + "/results.json";
        relu::io::write_text_file(path, relu::io::experiment_to_json(result).dump(2) + "\n");
        outputs.push_back(path);
    }
    if (g.wants("csv")) {
        const std::string path = dir + "/results.csv";
        relu::io::write_text_file(path, relu::io::method_results_to_csv(result.methods));
        outputs.push_back(path);
    }

    for (const auto& mr : result.methods) {
        if (mr.method != relu::Method::RelU) continue;
        for (const auto& outcome : mr.outcomes) {
            if (!outcome.ok || !outcome.detector || !outcome.detector->observer) continue;
            const std::string base = dir + "/d_matrix_seed" + std::to_string(outcome.seed);
            relu::io::save_observer(*outcome.detector->observer, base + ".csv", base + ".json",
                                    "experiment " + result.name + " seed " +
                                        std::to_string(outcome.seed));
            outputs.push_back(base + ".csv");
            outputs.push_back(base + ".json");

            const auto split = relu::make_split(dataset, result.splits.fraction,
                                                result.splits.stratify, outcome.seed);
            const auto tune_data = relu::subset(dataset, split.tune_idx);
            const std::string conf_path =
                dir + "/confusion_seed" + std::to_string(outcome.seed) + ".csv";
            relu::io::save_matrix_csv(conf_path, relu::confusion_matrix(tune_data));
            outputs.push_back(conf_path);
            break;
        }
    }
    return outputs;
}

// ---- subcommand bodies ----

int cmd_synth(const GlobalArgs& g) {
    const json cfg = config_json(g);
    relu::SynthConfig synth_cfg;
    if (cfg.contains("synth") || cfg.contains("preset"))
        synth_cfg = synth_config_from_spec(cfg);
    else if (!cfg.empty())
        synth_cfg = relu::io::synth_config_from_json(cfg);
    if (g.seed != 0) synth_cfg.seed = g.seed;

    const auto data = relu::synth_generate(synth_cfg);
    const std::string dir = resolve_out_dir(g);
    ensure_dir(dir);

    std::vector<std::string> outputs;
    const auto dump_split = [&](const char* name, const relu::SynthData& split) {
        const std::string fpath = dir + "/" + name + "_features.npy";
        const std::string lpath = dir + "/" + name + "_labels.npy";
        relu::npy::save_matrix(fpath, split.features);
        std::vector<long long> labels(split.labels.begin(), split.labels.end());
        relu::npy::save_int_vector(lpath, labels);
        outputs.push_back(fpath);
        outputs.push_back(lpath);
    };
    dump_split("train", data.train);
    dump_split("tune", data.tune);
    dump_split("test", data.test);

    json manifest;
    manifest["config"] = relu::io::synth_config_to_json(synth_cfg);
    manifest["num_classes"] = data.num_classes;
    manifest["tag"] = data.tag;
    const std::string mpath = dir + "/dataset.json";
    relu::io::write_text_file(mpath, manifest.dump(2) + "\n");
    outputs.push_back(mpath);

    print_provenance("synth", g, outputs, {{"tag", data.tag}});
    return 0;
}

int cmd_train(const GlobalArgs& g, const TableArgs& tables, const std::string& arch,
              int num_classes, int epochs, double lr, int width, const std::string& out_path) {
    const relu::Matrix features = relu::io::load_matrix(tables.features_path);
    const std::vector<int> labels = relu::io::load_labels(tables.labels_path, num_classes);

    relu::TrainOptions opts;
    opts.epochs = epochs;
    opts.learning_rate = lr;
    opts.hidden_width = width;
    opts.seed = g.seed;
    const auto trained = relu::train_classifier(features, labels,
                                                relu::architecture_from_name(arch), num_classes, opts);
    ensure_dir(fs::path(out_path).parent_path().empty()
                   ? "."
                   : fs::path(out_path).parent_path().string());
    relu::io::save_model(trained.model, out_path);
    print_provenance("train", g, {out_path}, {{"final_loss", trained.final_loss}});
    return 0;
}

int cmd_infer(const GlobalArgs& g, const std::string& model_path, const std::string& features_path,
              const std::string& out_path) {
    const auto model = relu::io::load_model(model_path);
    const relu::Matrix features = relu::io::load_matrix(features_path);
    if (static_cast<int>(features.cols) != model.input_dim)
        throw relu::InputError("feature dimension " + std::to_string(features.cols) +
                               " does not match the model input dimension " +
                               std::to_string(model.input_dim));
    relu::Matrix logits(features.rows, static_cast<std::size_t>(model.num_classes));
    for (std::size_t r = 0; r < features.rows; ++r) {
        std::vector<double> x(features.row(r), features.row(r) + features.cols);
        const auto z = model.forward(x);
        for (std::size_t c = 0; c < z.size(); ++c) logits(r, c) = z[c];
    }
    if (out_path.size() >= 4 && out_path.substr(out_path.size() - 4) == ".csv")
        relu::io::save_matrix_csv(out_path, logits);
    else
        relu::npy::save_matrix(out_path, logits);
    print_provenance("infer", g, {out_path});
    return 0;
}

int cmd_fit(const GlobalArgs& g, const TableArgs& tables, const TableArgs& secondary,
            const std::string& method_name_str, const std::string& mode, double temperature,
            double lambda, bool lambda_given, double alpha, double norm_budget, int mlp_width,
            int mlp_epochs, double mlp_lr, const std::string& out_path) {
    const auto dataset = load_dataset(tables, "fit-input");
    std::optional<relu::EvalDataset> secondary_ds;
    if (!secondary.logits_path.empty()) secondary_ds = load_dataset(secondary, "fit-secondary");

    relu::DetectorConfig cfg;
    cfg.method = relu::method_from_name(method_name_str);
    cfg.temperature = temperature;
    cfg.alpha = alpha;

    relu::FitContext ctx;
    ctx.tune_data = &dataset;
    ctx.tune_secondary = secondary_ds ? &*secondary_ds : nullptr;
    ctx.mode = (mode == "membership") ? relu::GroupMode::Membership : relu::GroupMode::Correctness;
    ctx.norm_budget = norm_budget;
    ctx.mlp_options.hidden_width = mlp_width;
    ctx.mlp_options.epochs = mlp_epochs;
    ctx.mlp_options.learning_rate = mlp_lr;
    ctx.mlp_options.seed = g.seed;

    if (cfg.method == relu::Method::RelU && !lambda_given) {
        const auto groups =
            relu::assign_groups(dataset, ctx.mode, ctx.tune_secondary, cfg.temperature);
        cfg.lambda = relu::default_lambda(groups);
    } else {
        cfg.lambda = lambda;
    }

    const auto det = relu::fit_detector(cfg, ctx);
    ensure_dir(fs::path(out_path).parent_path().empty()
                   ? "."
                   : fs::path(out_path).parent_path().string());
    relu::io::save_detector(det, out_path);
    std::vector<std::string> outputs = {out_path};

    if (det.observer) {
        const std::string stem = (fs::path(out_path).parent_path() /
                                  fs::path(out_path).stem()).string();
        relu::io::save_observer(*det.observer, stem + "_d.csv", stem + "_d.json",
                                "fit " + tables.logits_path);
        outputs.push_back(stem + "_d.csv");
        outputs.push_back(stem + "_d.json");
    }

    json extra;
    extra["method"] = method_name(cfg.method);
    extra["lambda"] = cfg.lambda;
    if (det.observer) extra["fallback"] = det.observer->fallback;
    print_provenance("fit", g, outputs, std::move(extra));
    return 0;
}

int cmd_score(const GlobalArgs& g, const TableArgs& tables, const std::string& detector_path,
              const std::string& method_name_str, double temperature, double epsilon,
              const std::string& out_path) {
    relu::FittedDetector det;
    if (!detector_path.empty()) {
        det = relu::io::load_detector(detector_path);
        if (!method_name_str.empty())
            throw relu::InputError("--detector and --method are mutually exclusive");
    } else {
        if (method_name_str.empty())
            throw relu::InputError("score: need --detector or --method");
        det.config.method = relu::method_from_name(method_name_str);
        det.config.temperature = temperature;
        det.config.epsilon = epsilon;
        if (det.config.method == relu::Method::RelU || det.config.method == relu::Method::Mlp ||
            det.config.method == relu::Method::Conformal)
            throw relu::InputError("method " + method_name_str +
                                   " carries fitted state; pass a --detector file from `fit`");
    }

    const auto dataset = load_dataset(tables, "score-input");
    const auto model = load_model_if(tables.model_path);

    std::vector<double> scores;
    scores.reserve(dataset.size());
    for (const auto& sample : dataset.samples)
        scores.push_back(relu::detector_score(det, sample, model ? &*model : nullptr,
                                              dataset.logits_are_probs));
    ensure_dir(fs::path(out_path).parent_path().empty()
                   ? "."
                   : fs::path(out_path).parent_path().string());
    relu::io::save_scores_csv(out_path, scores);
    print_provenance("score", g, {out_path}, {{"n", scores.size()}});
    return 0;
}

int cmd_evaluate(const GlobalArgs& g, const TableArgs& tables, const std::string& scores_path,
                 const std::string& correct_path, double temperature) {
    const std::vector<double> scores = relu::io::load_scores(scores_path);

    std::vector<bool> correct;
    std::optional<relu::EvalDataset> dataset;
    if (!correct_path.empty()) {
        if (relu::npy::looks_like_npy(correct_path)) {
            for (long long v : relu::npy::load_int_vector(correct_path)) correct.push_back(v != 0);
        } else {
            for (int v : relu::io::load_labels(correct_path, 2)) correct.push_back(v != 0);
        }
    } else {
        if (tables.logits_path.empty() || tables.labels_path.empty())
            throw relu::InputError("evaluate: need --correct, or --logits plus --labels");
        dataset = load_dataset(tables, "evaluate-input");
        for (const auto& s : dataset->samples) correct.push_back(s.correct);
    }
    if (correct.size() != scores.size())
        throw relu::InputError("evaluate: scores (" + std::to_string(scores.size()) +
                               ") and correctness flags (" + std::to_string(correct.size()) +
                               ") differ in length");

    relu::ScoredPopulation pop;
    for (std::size_t i = 0; i < scores.size(); ++i)
        (correct[i] ? pop.pos_scores : pop.neg_scores).push_back(scores[i]);

    relu::MetricsReport report;
    report.method = "external";
    report.config.temperature = temperature;
    report.seed = g.seed;
    report.n_eval = scores.size();
    report.n_pos = pop.pos_scores.size();
    report.n_neg = pop.neg_scores.size();
    for (double level : {0.80, 0.90, 0.95, 0.99})
        report.fpr_at_tpr_levels[level] = relu::fpr_at_tpr(pop, level);
    report.auroc = relu::auroc(pop);
    report.roc_points = relu::roc_curve(pop);
    const auto rc = relu::risk_coverage(scores, correct);
    report.aurc = rc.aurc;
    report.rc_points = rc.points;
    std::size_t hits = 0;
    for (bool b : correct) hits += b;
    report.accuracy = static_cast<double>(hits) / static_cast<double>(correct.size());
    if (dataset && !dataset->logits_are_probs) {
        std::vector<relu::ProbVector> probs;
        std::vector<int> labels;
        for (const auto& s : dataset->samples) {
            probs.push_back(relu::softmax_with_temperature(s.logits, temperature));
            labels.push_back(s.true_label);
        }
        report.ece = relu::ece(probs, labels);
        report.source_tag = dataset->source_tag;
    }

    const std::string dir = resolve_out_dir(g);
    ensure_dir(dir);
    const auto outputs = relu::io::emit_report(report, dir, g.wants("json"), g.wants("csv"));
    print_provenance("evaluate", g, outputs,
                     {{"fpr95", report.fpr95()}, {"auroc", report.auroc}});
    return 0;
}

int cmd_tune(const GlobalArgs& g, const TableArgs& tables, const std::string& method_name_str,
             double fraction, bool stratify, double alpha) {
    const json cfg = config_json(g);
    relu::GridSpec grid;
    if (cfg.contains("grid")) grid = relu::io::grid_spec_from_json(cfg["grid"]);

    const auto dataset = load_dataset(tables, "tune-input");
    const auto model = load_model_if(tables.model_path);

    relu::DetectionTask task;
    task.dataset = &dataset;
    task.model = model ? &*model : nullptr;
    task.split = relu::make_split(dataset, fraction, stratify, g.seed);
    task.alpha = alpha;
    task.mlp_options.seed = relu::derive_seed(g.seed, "mlp-detector");

    const auto method = relu::method_from_name(method_name_str);
    const auto search = relu::grid_search(method, task, grid);
    const auto report = relu::evaluate_detector(search.best, task);

    const std::string dir = resolve_out_dir(g);
    ensure_dir(dir);
    const std::string det_path = dir + "/detector.json";
    relu::io::save_detector(search.best, det_path);

    json tuning;
    tuning["method"] = method_name(method);
    tuning["best_tuning_fpr95"] = search.best_metric;
    tuning["cells_failed"] = search.cells_failed;
    json cells = json::array();
    for (const auto& cell : search.cells) {
        json c;
        c["T"] = cell.config.temperature;
        c["epsilon"] = cell.config.epsilon;
        c["lambda"] = cell.config.lambda;
        c["failed"] = cell.failed;
        c["tuning_fpr95"] = cell.tuning_metric;
        if (cell.failed) c["error"] = cell.error;
        cells.push_back(std::move(c));
    }
    tuning["cells"] = std::move(cells);
    tuning["evaluation_report"] = relu::io::report_to_json(report);
    const std::string tune_path = dir + "/tuning.json";
    relu::io::write_text_file(tune_path, tuning.dump(2) + "\n");

    print_provenance("tune", g, {det_path, tune_path},
                     {{"best_tuning_fpr95", search.best_metric},
                      {"selected_T", search.best.config.temperature},
                      {"selected_epsilon", search.best.config.epsilon},
                      {"selected_lambda", search.best.config.lambda}});
    return 0;
}

int cmd_experiment(const GlobalArgs& g) {
    if (g.config_path.empty()) throw relu::InputError("experiment: --config is required");
    const json cfg = relu::io::parse_json_file(g.config_path);

    const std::string protocol =
        cfg.contains("protocol") ? cfg["protocol"].get<std::string>() : "matched";
    const json train_cfg = cfg.contains("train") ? cfg["train"] : json::object();
    if (!cfg.contains("dataset")) throw relu::InputError("experiment config: missing 'dataset'");

    BuiltDataset primary = build_dataset(cfg["dataset"], train_cfg, nullptr, "primary");
    const relu::ClassifierModel* model = primary.model ? &*primary.model : nullptr;

    relu::SplitSpec splits;
    if (cfg.contains("splits")) splits = relu::io::split_spec_from_json(cfg["splits"]);
    relu::GridSpec grid;
    if (cfg.contains("grid")) grid = relu::io::grid_spec_from_json(cfg["grid"]);
    const auto methods = methods_from(cfg);
    const auto options = experiment_options_from(cfg);
    const std::string name = cfg.contains("name") ? cfg["name"].get<std::string>() : "experiment";

    std::vector<std::string> outputs;
    if (protocol == "matched") {
        auto result = relu::run_matched_experiment(model, primary.dataset, splits, grid, methods,
                                                   options);
        result.name = name;
        outputs = write_experiment_outputs(result, primary.dataset, g);
    } else if (protocol == "mismatch") {
        if (!cfg.contains("secondary"))
            throw relu::InputError("mismatch experiment: missing 'secondary' dataset");
        BuiltDataset secondary = build_dataset(cfg["secondary"], train_cfg, model, "secondary");
        if (cfg.contains("splits") && cfg["splits"].contains("fractions")) {
            // Validation-size sweep: one full run per tuning fraction.
            const auto fractions = cfg["splits"]["fractions"].get<std::vector<double>>();
            const auto sweep = relu::run_mismatch_split_sweep(
                model, primary.dataset, secondary.dataset, fractions, splits, grid, methods,
                options);
            const std::string dir = resolve_out_dir(g);
            ensure_dir(dir);
            std::string summary =
                "fraction,method,mean_fpr95,std_fpr95,mean_auroc,std_auroc,effective_seeds\n";
            for (const auto& entry : sweep) {
                const std::string label = relu::io::format_level(entry.fraction);
                if (g.wants("json")) {
                    const std::string path = dir + "/results_fraction" + label + ".json";
                    auto named = entry.result;
                    named.name = name + " @ fraction " + label;
                    relu::io::write_text_file(path,
                                              relu::io::experiment_to_json(named).dump(2) + "\n");
                    outputs.push_back(path);
                }
                for (const auto& mr : entry.result.methods) {
                    const auto& a = mr.aggregate;
                    summary += label + std::string(",") + method_name(mr.method) + "," +
                               relu::io::format_double(a.mean_fpr95) + "," +
                               relu::io::format_double(a.std_fpr95) + "," +
                               relu::io::format_double(a.mean_auroc) + "," +
                               relu::io::format_double(a.std_auroc) + "," +
                               std::to_string(a.effective_seeds) + "\n";
                }
            }
            const std::string summary_path = dir + "/fractions_summary.csv";
            relu::io::write_text_file(summary_path, summary);
            outputs.push_back(summary_path);
        } else {
            auto result = relu::run_mismatch_experiment(model, primary.dataset, secondary.dataset,
                                                        splits, grid, methods, options);
            result.name = name;
            outputs = write_experiment_outputs(result, primary.dataset, g);
        }
    } else if (protocol == "ablation") {
        if (!cfg.contains("ablation"))
            throw relu::InputError("ablation experiment: missing 'ablation' section");
        const auto axis =
            relu::ablation_axis_from_name(cfg["ablation"].at("axis").get<std::string>());
        const auto values = cfg["ablation"].at("values").get<std::vector<double>>();
        const auto result =
            relu::run_ablation(model, primary.dataset, axis, values, splits, methods, options);
        const std::string dir = resolve_out_dir(g);
        ensure_dir(dir);
        const std::string path = dir + "/results.json";
        relu::io::write_text_file(path, relu::io::ablation_to_json(result).dump(2) + "\n");
        outputs.push_back(path);
        if (g.wants("csv")) {
            std::string csv = "axis,value,method,mean_fpr95,std_fpr95,mean_auroc,std_auroc,"
                              "mean_aurc,std_aurc,effective_seeds\n";
            for (const auto& series : result.series) {
                for (std::size_t i = 0; i < series.per_value.size(); ++i) {
                    const auto& a = series.per_value[i].aggregate;
                    csv += std::string(relu::ablation_axis_name(result.axis)) + "," +
                           relu::io::format_double(result.values[i]) + "," +
                           method_name(series.method) + "," + relu::io::format_double(a.mean_fpr95) +
                           "," + relu::io::format_double(a.std_fpr95) + "," +
                           relu::io::format_double(a.mean_auroc) + "," +
                           relu::io::format_double(a.std_auroc) + "," +
                           relu::io::format_double(a.mean_aurc) + "," +
                           relu::io::format_double(a.std_aurc) + "," +
                           std::to_string(a.effective_seeds) + "\n";
                }
            }
            const std::string csv_path = dir + "/results.csv";
            relu::io::write_text_file(csv_path, csv);
            outputs.push_back(csv_path);
        }
    } else {
        throw relu::InputError("unknown protocol: " + protocol);
    }

    print_provenance("experiment", g, outputs, {{"protocol", protocol}, {"name", name}});
    return 0;
}

int cmd_plot(const GlobalArgs& g, const std::string& results_path, const std::string& d_matrix_csv,
             const std::string& confusion_csv) {
    relu::PlotInputs inputs;

    if (!results_path.empty()) {
        const json j = relu::io::parse_json_file(results_path);
        if (j.contains("methods")) {
            // Experiment results: first successful seed per method.
            for (const auto& mr : j["methods"]) {
                for (const auto& seed : mr["seeds"]) {
                    if (seed["ok"].get<bool>()) {
                        inputs.reports.push_back(relu::io::report_from_json(seed["report"]));
                        break;
                    }
                }
            }
        } else if (j.contains("series")) {
            // Ablation results: radar over the axis values per method.
            for (const auto& v : j["values"])
                inputs.radar_axes.push_back(relu::io::format_level(v.get<double>()));
            for (const auto& series : j["series"]) {
                relu::svg::RadarSeries rs;
                rs.label = series["method"].get<std::string>();
                for (const auto& cell : series["per_value"])
                    rs.values.push_back(relu::io::json_double(cell["aggregate"]["mean_fpr95"]));
                inputs.radar_series.push_back(std::move(rs));
            }
            for (const auto& series : j["series"]) {
                for (const auto& cell : series["per_value"]) {
                    for (const auto& seed : cell["seeds"]) {
                        if (seed["ok"].get<bool>()) {
                            inputs.reports.push_back(relu::io::report_from_json(seed["report"]));
                            break;
                        }
                    }
                    break;
                }
            }
        } else {
            inputs.reports.push_back(relu::io::report_from_json(j));
        }
    }
    if (!d_matrix_csv.empty()) inputs.observer = relu::io::load_matrix_csv(d_matrix_csv);
    if (!confusion_csv.empty()) inputs.confusion = relu::io::load_matrix_csv(confusion_csv);

    const std::string dir = resolve_out_dir(g);
    ensure_dir(dir);
    const auto written = relu::render_plots(inputs, dir);
    print_provenance("plot", g, written);
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"relative-uncertainty misclassification and mismatch detection toolkit"};
    app.require_subcommand(1);
    app.fallthrough(); // global flags may follow the subcommand name
    app.set_version_flag("--version", kVersion);

    GlobalArgs g;
    app.add_option("--seed", g.seed, "master random seed")->capture_default_str();
    app.add_option("--out-dir", g.out_dir, "output directory (default: $RELU_OUT_DIR or .)");
    app.add_option("--format", g.format, "report formats: json, csv, or json,csv")
        ->capture_default_str();
    app.add_option("--config", g.config_path, "JSON configuration file");

    // synth
    auto* synth = app.add_subcommand("synth", "generate a synthetic dataset");

    // train
    auto* train = app.add_subcommand("train", "fit a classifier on features + labels");
    TableArgs train_tables;
    std::string train_arch = "linear", train_out = "model.json";
    int train_classes = 0, train_epochs = 300, train_width = 32;
    double train_lr = 0.5;
    train->add_option("--features", train_tables.features_path)->required();
    train->add_option("--labels", train_tables.labels_path)->required();
    train->add_option("--arch", train_arch, "linear or mlp")->capture_default_str();
    train->add_option("--num-classes", train_classes)->required();
    train->add_option("--epochs", train_epochs)->capture_default_str();
    train->add_option("--lr", train_lr)->capture_default_str();
    train->add_option("--width", train_width, "hidden width (mlp)")->capture_default_str();
    train->add_option("--out", train_out)->capture_default_str();

    // infer
    auto* infer = app.add_subcommand("infer", "run a model over features, write logits");
    std::string infer_model, infer_features, infer_out = "logits.npy";
    infer->add_option("--model", infer_model)->required();
    infer->add_option("--features", infer_features)->required();
    infer->add_option("--out", infer_out)->capture_default_str();

    // fit
    auto* fit = app.add_subcommand("fit", "fit detector artifacts on a tuning set");
    TableArgs fit_tables, fit_secondary;
    std::string fit_method = "REL_U", fit_mode = "correctness", fit_out = "detector.json";
    double fit_T = 1.0, fit_lambda = 0.5, fit_alpha = 0.1, fit_budget = 1.0, fit_mlp_lr = 1e-3;
    int fit_mlp_width = 128, fit_mlp_epochs = 400;
    fit->add_option("--logits", fit_tables.logits_path)->required();
    fit->add_option("--labels", fit_tables.labels_path);
    fit->add_flag("--probs", fit_tables.probs, "rows are probabilities, not logits");
    fit->add_option("--secondary-logits", fit_secondary.logits_path,
                    "secondary dataset (membership mode)");
    fit->add_option("--secondary-labels", fit_secondary.labels_path);
    fit->add_option("--method", fit_method, "REL_U, CONFORMAL, or MLP")->capture_default_str();
    fit->add_option("--mode", fit_mode, "correctness or membership")->capture_default_str();
    fit->add_option("-T,--temperature", fit_T)->capture_default_str();
    auto* fit_lambda_opt = fit->add_option("--lambda", fit_lambda,
                                           "contrast weight (default: positive fraction)");
    fit->add_option("--alpha", fit_alpha, "conformal miscoverage")->capture_default_str();
    fit->add_option("--norm-budget", fit_budget)->capture_default_str();
    fit->add_option("--mlp-width", fit_mlp_width)->capture_default_str();
    fit->add_option("--mlp-epochs", fit_mlp_epochs)->capture_default_str();
    fit->add_option("--mlp-lr", fit_mlp_lr)->capture_default_str();
    fit->add_option("--out", fit_out)->capture_default_str();

    // score
    auto* score = app.add_subcommand("score", "score a logits file with a detector");
    TableArgs score_tables;
    std::string score_detector, score_method, score_out = "scores.csv";
    double score_T = 1.0, score_eps = 0.0;
    score->add_option("--logits", score_tables.logits_path)->required();
    score->add_flag("--probs", score_tables.probs);
    score->add_option("--features", score_tables.features_path);
    score->add_option("--model", score_tables.model_path);
    score->add_option("--detector", score_detector, "detector JSON from `fit` or `tune`");
    score->add_option("--method", score_method, "fitless method: MSP, ENTROPY, ODIN, GINI_DOCTOR");
    score->add_option("-T,--temperature", score_T)->capture_default_str();
    score->add_option("--epsilon", score_eps)->capture_default_str();
    score->add_option("--out", score_out)->capture_default_str();

    // evaluate
    auto* evaluate = app.add_subcommand("evaluate", "metrics from scores + correctness");
    TableArgs eval_tables;
    std::string eval_scores, eval_correct;
    double eval_T = 1.0;
    evaluate->add_option("--scores", eval_scores)->required();
    evaluate->add_option("--logits", eval_tables.logits_path);
    evaluate->add_option("--labels", eval_tables.labels_path);
    evaluate->add_flag("--probs", eval_tables.probs);
    evaluate->add_option("--correct", eval_correct, "0/1 correctness column");
    evaluate->add_option("-T,--temperature", eval_T, "temperature for the ECE probabilities")
        ->capture_default_str();

    // tune
    auto* tune = app.add_subcommand("tune", "grid search on a tuning split");
    TableArgs tune_tables;
    std::string tune_method = "REL_U";
    double tune_fraction = 0.5, tune_alpha = 0.1;
    bool tune_no_stratify = false;
    tune->add_option("--logits", tune_tables.logits_path)->required();
    tune->add_option("--labels", tune_tables.labels_path)->required();
    tune->add_flag("--probs", tune_tables.probs);
    tune->add_option("--features", tune_tables.features_path);
    tune->add_option("--model", tune_tables.model_path);
    tune->add_option("--method", tune_method)->capture_default_str();
    tune->add_option("--fraction", tune_fraction, "tuning fraction")->capture_default_str();
    tune->add_flag("--no-stratify", tune_no_stratify);
    tune->add_option("--alpha", tune_alpha)->capture_default_str();

    // experiment
    auto* experiment = app.add_subcommand("experiment",
                                          "full matched/mismatch/ablation run from --config");

    // plot
    auto* plot = app.add_subcommand("plot", "render SVG plots from reports");
    std::string plot_results, plot_dmatrix, plot_confusion;
    plot->add_option("--results", plot_results, "results.json or a single report.json");
    plot->add_option("--d-matrix", plot_dmatrix, "observer matrix CSV");
    plot->add_option("--confusion", plot_confusion, "confusion matrix CSV");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 1;
    }

    try {
        if (synth->parsed()) return cmd_synth(g);
        if (train->parsed())
            return cmd_train(g, train_tables, train_arch, train_classes, train_epochs, train_lr,
                             train_width, train_out);
        if (infer->parsed()) return cmd_infer(g, infer_model, infer_features, infer_out);
        if (fit->parsed())
            return cmd_fit(g, fit_tables, fit_secondary, fit_method, fit_mode, fit_T, fit_lambda,
                           fit_lambda_opt->count() > 0, fit_alpha, fit_budget, fit_mlp_width,
                           fit_mlp_epochs, fit_mlp_lr, fit_out);
        if (score->parsed())
            return cmd_score(g, score_tables, score_detector, score_method, score_T, score_eps,
                             score_out);
        if (evaluate->parsed()) return cmd_evaluate(g, eval_tables, eval_scores, eval_correct, eval_T);
        if (tune->parsed())
            return cmd_tune(g, tune_tables, tune_method, tune_fraction, !tune_no_stratify,
                            tune_alpha);
        if (experiment->parsed()) return cmd_experiment(g);
        if (plot->parsed()) return cmd_plot(g, plot_results, plot_dmatrix, plot_confusion);
    } catch (const relu::ProtocolError& e) {
        std::cerr << "protocol error: " << e.what() << "\n";
        return 2;
    } catch (const relu::NumericalError& e) {
        std::cerr << "numerical error: " << e.what() << "\n";
        return 3;
    } catch (const relu::InputError& e) {
        std::cerr << "input error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
