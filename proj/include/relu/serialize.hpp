#pragma once

#include <cstdio>
#include <fstream>
#include <limits>
#include <string>
#include <vector>

#include <json.hpp>

#include "relu/detect.hpp"
#include "relu/synth.hpp"
#include "relu/table_io.hpp"
#include "relu/tune.hpp"

namespace relu {

// JSON and CSV forms of every artifact the CLI exchanges. nlohmann::json
// keeps keys in sorted order, so serialized bytes are canonical and
// deterministic for deterministic inputs.

namespace io {

using nlohmann::json;

inline std::string format_level(double level) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%g", level);
    return buf;
}

inline void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("cannot write file: " + path);
    out << content;
    if (!out) throw InputError("write failed: " + path);
}

inline std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open file: " + path);
    return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

inline json parse_json_file(const std::string& path) {
    try {
        return json::parse(read_text_file(path));
    } catch (const json::parse_error& e) {
        throw InputError(path + ": invalid JSON (" + e.what() + ")");
    }
}

// ---- matrices ----

inline json matrix_to_json(const Matrix& m) {
    json rows = json::array();
    for (std::size_t r = 0; r < m.rows; ++r) {
        json row = json::array();
        for (std::size_t c = 0; c < m.cols; ++c) row.push_back(m(r, c));
        rows.push_back(std::move(row));
    }
    return rows;
}

inline Matrix matrix_from_json(const json& j) {
    if (!j.is_array() || j.empty()) throw InputError("matrix JSON: expected a nonempty array of rows");
    const std::size_t cols = j.front().size();
    Matrix m(j.size(), cols);
    for (std::size_t r = 0; r < j.size(); ++r) {
        if (j[r].size() != cols) throw InputError("matrix JSON: ragged rows");
        for (std::size_t c = 0; c < cols; ++c) m(r, c) = j[r][c].get<double>();
    }
    return m;
}

// ---- observer matrix: CSV + JSON sidecar ----

inline void save_observer(const RelUMatrix& d, const std::string& csv_path,
                          const std::string& sidecar_path, const std::string& provenance) {
    save_matrix_csv(csv_path, d.entries);
    json side;
    side["fallback"] = d.fallback;
    side["lambda"] = d.lambda_used;
    side["norm_budget"] = d.norm_budget;
    side["num_classes"] = d.num_classes();
    side["provenance"] = provenance;
    write_text_file(sidecar_path, side.dump(2) + "\n");
}

inline RelUMatrix load_observer(const std::string& csv_path, const std::string& sidecar_path) {
    RelUMatrix d;
    d.entries = load_matrix_csv(csv_path);
    const json side = parse_json_file(sidecar_path);
    d.fallback = side.at("fallback").get<bool>();
    d.lambda_used = side.at("lambda").get<double>();
    d.norm_budget = side.at("norm_budget").get<double>();
    if (side.at("num_classes").get<std::size_t>() != d.entries.rows)
        throw InputError(sidecar_path + ": class count disagrees with the CSV matrix");
    d.validate();
    return d;
}

// ---- classifier model ----

inline json model_to_json(const ClassifierModel& m) {
    json j;
    j["architecture"] = architecture_name(m.arch);
    j["input_dim"] = m.input_dim;
    j["num_classes"] = m.num_classes;
    j["hidden_width"] = m.hidden_width;
    j["w1"] = matrix_to_json(m.w1);
    j["b1"] = m.b1;
    if (m.arch == Architecture::Mlp1Hidden) {
        j["w2"] = matrix_to_json(m.w2);
        j["b2"] = m.b2;
    }
    return j;
}

inline ClassifierModel model_from_json(const json& j) {
    ClassifierModel m;
    m.arch = architecture_from_name(j.at("architecture").get<std::string>());
    m.input_dim = j.at("input_dim").get<int>();
    m.num_classes = j.at("num_classes").get<int>();
    m.hidden_width = j.at("hidden_width").get<int>();
    m.w1 = matrix_from_json(j.at("w1"));
    m.b1 = j.at("b1").get<std::vector<double>>();
    if (m.arch == Architecture::Mlp1Hidden) {
        m.w2 = matrix_from_json(j.at("w2"));
        m.b2 = j.at("b2").get<std::vector<double>>();
    }
    return m;
}

inline void save_model(const ClassifierModel& m, const std::string& path) {
    write_text_file(path, model_to_json(m).dump(2) + "\n");
}

inline ClassifierModel load_model(const std::string& path) {
    return model_from_json(parse_json_file(path));
}

// ---- fitted detectors ----

inline json detector_to_json(const FittedDetector& det) {
    json j;
    j["method"] = method_name(det.config.method);
    j["temperature"] = det.config.temperature;
    j["epsilon"] = det.config.epsilon;
    j["lambda"] = det.config.lambda;
    j["alpha"] = det.config.alpha;
    if (det.observer) {
        json o;
        o["entries"] = matrix_to_json(det.observer->entries);
        o["fallback"] = det.observer->fallback;
        o["lambda_used"] = det.observer->lambda_used;
        o["norm_budget"] = det.observer->norm_budget;
        j["observer"] = std::move(o);
    }
    if (det.conformal) {
        json c;
        c["alpha"] = det.conformal->alpha;
        c["qhat"] = det.conformal->qhat;
        c["n"] = det.conformal->n;
        j["conformal"] = std::move(c);
    }
    if (det.mlp) {
        json m;
        m["input_dim"] = det.mlp->input_dim;
        m["hidden_width"] = det.mlp->hidden_width;
        m["w1"] = matrix_to_json(det.mlp->w1);
        m["b1"] = det.mlp->b1;
        m["w2"] = det.mlp->w2;
        m["b2"] = det.mlp->b2;
        j["mlp"] = std::move(m);
    }
    return j;
}

inline FittedDetector detector_from_json(const json& j) {
    FittedDetector det;
    det.config.method = method_from_name(j.at("method").get<std::string>());
    det.config.temperature = j.at("temperature").get<double>();
    det.config.epsilon = j.at("epsilon").get<double>();
    det.config.lambda = j.at("lambda").get<double>();
    det.config.alpha = j.at("alpha").get<double>();
    det.config.validate();
    if (j.contains("observer")) {
        RelUMatrix d;
        d.entries = matrix_from_json(j["observer"].at("entries"));
        d.fallback = j["observer"].at("fallback").get<bool>();
        d.lambda_used = j["observer"].at("lambda_used").get<double>();
        d.norm_budget = j["observer"].at("norm_budget").get<double>();
        d.validate();
        det.observer = std::move(d);
    }
    if (j.contains("conformal")) {
        ConformalCalibration c;
        c.alpha = j["conformal"].at("alpha").get<double>();
        c.qhat = j["conformal"].at("qhat").get<double>();
        c.n = j["conformal"].at("n").get<std::size_t>();
        det.conformal = c;
    }
    if (j.contains("mlp")) {
        MlpDetector m;
        m.input_dim = j["mlp"].at("input_dim").get<int>();
        m.hidden_width = j["mlp"].at("hidden_width").get<int>();
        m.w1 = matrix_from_json(j["mlp"].at("w1"));
        m.b1 = j["mlp"].at("b1").get<std::vector<double>>();
        m.w2 = j["mlp"].at("w2").get<std::vector<double>>();
        m.b2 = j["mlp"].at("b2").get<double>();
        det.mlp = std::move(m);
    }
    return det;
}

inline void save_detector(const FittedDetector& det, const std::string& path) {
    write_text_file(path, detector_to_json(det).dump(2) + "\n");
}

inline FittedDetector load_detector(const std::string& path) {
    return detector_from_json(parse_json_file(path));
}

// ---- metrics reports ----

inline json report_to_json(const MetricsReport& r) {
    json j;
    j["accuracy"] = r.accuracy;
    j["auroc"] = r.auroc;
    j["aurc"] = r.aurc;
    j["ece"] = r.ece;
    j["fallback_used"] = r.fallback_used;
    json levels;
    for (const auto& [level, fpr] : r.fpr_at_tpr_levels) levels[format_level(level)] = fpr;
    j["fpr_at_tpr"] = std::move(levels);
    json cfg;
    cfg["alpha"] = r.config.alpha;
    cfg["epsilon"] = r.config.epsilon;
    cfg["lambda"] = r.config.lambda;
    cfg["method"] = method_name(r.config.method);
    cfg["temperature"] = r.config.temperature;
    j["config"] = std::move(cfg);
    j["method"] = r.method;
    j["n_eval"] = r.n_eval;
    j["n_pos"] = r.n_pos;
    j["n_neg"] = r.n_neg;
    j["n_tune"] = r.n_tune;
    json roc = json::array();
    for (const auto& p : r.roc_points) roc.push_back({p.fpr, p.tpr, p.threshold});
    j["roc_points"] = std::move(roc);
    json rc = json::array();
    for (const auto& p : r.rc_points) rc.push_back({p.coverage, p.risk, p.threshold});
    j["rc_points"] = std::move(rc);
    j["seed"] = r.seed;
    j["source_tag"] = r.source_tag;
    return j;
}

inline double json_double(const json& j) {
    return j.is_null() ? std::numeric_limits<double>::quiet_NaN() : j.get<double>();
}

inline MetricsReport report_from_json(const json& j) {
    MetricsReport r;
    r.accuracy = json_double(j.at("accuracy"));
    r.auroc = json_double(j.at("auroc"));
    r.aurc = json_double(j.at("aurc"));
    r.ece = json_double(j.at("ece"));
    r.fallback_used = j.at("fallback_used").get<bool>();
    for (const auto& [key, value] : j.at("fpr_at_tpr").items())
        r.fpr_at_tpr_levels[std::stod(key)] = json_double(value);
    const auto& cfg = j.at("config");
    r.config.alpha = cfg.at("alpha").get<double>();
    r.config.epsilon = cfg.at("epsilon").get<double>();
    r.config.lambda = cfg.at("lambda").get<double>();
    r.config.method = method_from_name(cfg.at("method").get<std::string>());
    r.config.temperature = cfg.at("temperature").get<double>();
    r.method = j.at("method").get<std::string>();
    r.n_eval = j.at("n_eval").get<std::size_t>();
    r.n_pos = j.at("n_pos").get<std::size_t>();
    r.n_neg = j.at("n_neg").get<std::size_t>();
    r.n_tune = j.at("n_tune").get<std::size_t>();
    for (const auto& p : j.at("roc_points"))
        r.roc_points.push_back({p[0].get<double>(), p[1].get<double>(), p[2].get<double>()});
    for (const auto& p : j.at("rc_points"))
        r.rc_points.push_back({p[0].get<double>(), p[1].get<double>(), p[2].get<double>()});
    r.seed = j.at("seed").get<std::uint64_t>();
    r.source_tag = j.at("source_tag").get<std::string>();
    return r;
}

inline const char* kReportCsvHeader =
    "seed,method,temperature,epsilon,lambda,alpha,n_tune,n_eval,n_pos,n_neg,"
    "fpr80,fpr90,fpr95,fpr99,auroc,aurc,ece,accuracy,fallback,status,error";

inline std::string report_csv_row(const MetricsReport& r, const std::string& status,
                                  const std::string& error) {
    const auto level = [&](double l) {
        const auto it = r.fpr_at_tpr_levels.find(l);
        return it == r.fpr_at_tpr_levels.end() ? std::numeric_limits<double>::quiet_NaN()
                                               : it->second;
    };
    std::string row;
    row += std::to_string(r.seed) + ",";
    row += r.method + ",";
    row += format_double(r.config.temperature) + ",";
    row += format_double(r.config.epsilon) + ",";
    row += format_double(r.config.lambda) + ",";
    row += format_double(r.config.alpha) + ",";
    row += std::to_string(r.n_tune) + "," + std::to_string(r.n_eval) + ",";
    row += std::to_string(r.n_pos) + "," + std::to_string(r.n_neg) + ",";
    row += format_double(level(0.80)) + "," + format_double(level(0.90)) + ",";
    row += format_double(level(0.95)) + "," + format_double(level(0.99)) + ",";
    row += format_double(r.auroc) + "," + format_double(r.aurc) + ",";
    row += format_double(r.ece) + "," + format_double(r.accuracy) + ",";
    row += std::string(r.fallback_used ? "1" : "0") + ",";
    row += status + ",";
    row += error;
    return row;
}

// Writes one report into `dir` as report.json / report.csv. Output bytes are
// a pure function of the report.
inline std::vector<std::string> emit_report(const MetricsReport& report, const std::string& dir,
                                            bool as_json = true, bool as_csv = true) {
    std::vector<std::string> written;
    if (as_json) {
        const std::string path = dir + "/report.json";
        write_text_file(path, report_to_json(report).dump(2) + "\n");
        written.push_back(path);
    }
    if (as_csv) {
        const std::string path = dir + "/report.csv";
        write_text_file(path, std::string(kReportCsvHeader) + "\n" +
                                  report_csv_row(report, "ok", "") + "\n");
        written.push_back(path);
    }
    return written;
}

// ---- experiment results ----

inline json aggregate_to_json(const Aggregate& a) {
    json j;
    j["effective_seeds"] = a.effective_seeds;
    j["mean_fpr95"] = a.mean_fpr95;
    j["std_fpr95"] = a.std_fpr95;
    j["mean_auroc"] = a.mean_auroc;
    j["std_auroc"] = a.std_auroc;
    j["mean_aurc"] = a.mean_aurc;
    j["std_aurc"] = a.std_aurc;
    return j;
}

inline json method_result_to_json(const MethodResult& mr) {
    json j;
    j["method"] = method_name(mr.method);
    j["aggregate"] = aggregate_to_json(mr.aggregate);
    json seeds = json::array();
    for (const auto& o : mr.outcomes) {
        json s;
        s["seed"] = o.seed;
        s["ok"] = o.ok;
        s["error"] = o.error;
        if (o.ok) s["report"] = report_to_json(o.report);
        seeds.push_back(std::move(s));
    }
    j["seeds"] = std::move(seeds);
    return j;
}

inline json split_spec_to_json(const SplitSpec& s) {
    json j;
    j["fraction"] = s.fraction;
    j["seeds"] = s.seeds;
    j["stratify"] = s.stratify;
    return j;
}

inline json grid_spec_to_json(const GridSpec& g) {
    json j;
    j["T"] = g.temperatures;
    j["epsilon"] = g.epsilons;
    j["lambda"] = g.lambdas;
    j["tpr_level"] = g.tpr_level;
    return j;
}

inline json experiment_to_json(const ExperimentResult& r) {
    json j;
    j["name"] = r.name;
    j["protocol"] = r.protocol;
    j["splits"] = split_spec_to_json(r.splits);
    j["grid"] = grid_spec_to_json(r.grid);
    json methods = json::array();
    for (const auto& mr : r.methods) methods.push_back(method_result_to_json(mr));
    j["methods"] = std::move(methods);
    return j;
}

// One row per (seed, method) plus one aggregate row per method.
inline std::string method_results_to_csv(const std::vector<MethodResult>& methods) {
    std::string csv = std::string(kReportCsvHeader) + "\n";
    for (const auto& mr : methods) {
        for (const auto& o : mr.outcomes) {
            if (o.ok) {
                csv += report_csv_row(o.report, "ok", "") + "\n";
            } else {
                MetricsReport empty;
                empty.method = method_name(mr.method);
                empty.seed = o.seed;
                csv += report_csv_row(empty, "failed", o.error) + "\n";
            }
        }
        const auto& a = mr.aggregate;
        csv += std::string("aggregate,") + method_name(mr.method) + ",,,,,,,,,,,";
        csv += format_double(a.mean_fpr95) + " (" + format_double(a.std_fpr95) + "),,";
        csv += format_double(a.mean_auroc) + " (" + format_double(a.std_auroc) + "),";
        csv += format_double(a.mean_aurc) + " (" + format_double(a.std_aurc) + "),,,,ok,";
        csv += "effective_seeds=" + std::to_string(a.effective_seeds) + "\n";
    }
    return csv;
}

inline json ablation_to_json(const AblationResult& r) {
    json j;
    j["axis"] = ablation_axis_name(r.axis);
    j["values"] = r.values;
    j["splits"] = split_spec_to_json(r.splits);
    json series = json::array();
    for (const auto& s : r.series) {
        json entry;
        entry["method"] = method_name(s.method);
        json per_value = json::array();
        for (std::size_t i = 0; i < s.per_value.size(); ++i) {
            json cell;
            cell["value"] = r.values[i];
            cell["aggregate"] = aggregate_to_json(s.per_value[i].aggregate);
            json seeds = json::array();
            for (const auto& o : s.per_value[i].outcomes) {
                json so;
                so["seed"] = o.seed;
                so["ok"] = o.ok;
                so["error"] = o.error;
                if (o.ok) so["report"] = report_to_json(o.report);
                seeds.push_back(std::move(so));
            }
            cell["seeds"] = std::move(seeds);
            per_value.push_back(std::move(cell));
        }
        entry["per_value"] = std::move(per_value);
        series.push_back(std::move(entry));
    }
    j["series"] = std::move(series);
    return j;
}

// ---- synth config ----

inline SynthConfig synth_config_from_json(const json& j) {
    SynthConfig cfg;
    if (j.contains("num_classes")) cfg.num_classes = j["num_classes"].get<int>();
    if (j.contains("feature_dim")) cfg.feature_dim = j["feature_dim"].get<int>();
    if (j.contains("mean_radius")) cfg.mean_radius = j["mean_radius"].get<double>();
    if (j.contains("cov_scale")) cfg.cov_scale = j["cov_scale"].get<double>();
    if (j.contains("train_count")) cfg.train_count = j["train_count"].get<std::size_t>();
    if (j.contains("tune_count")) cfg.tune_count = j["tune_count"].get<std::size_t>();
    if (j.contains("test_count")) cfg.test_count = j["test_count"].get<std::size_t>();
    if (j.contains("seed")) cfg.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("confusion_pairs")) {
        cfg.confusion_pairs.clear();
        for (const auto& p : j["confusion_pairs"]) {
            if (!p.is_array() || (p.size() != 3 && p.size() != 5))
                throw InputError("synth config: confusion pair must be "
                                 "[class_a, class_b, strength] or "
                                 "[class_a, class_b, strength, in_train, in_eval]");
            ConfusionPair pair{p[0].get<int>(), p[1].get<int>(), p[2].get<double>(), true, true};
            if (p.size() == 5) {
                pair.in_train = p[3].get<bool>();
                pair.in_eval = p[4].get<bool>();
            }
            cfg.confusion_pairs.push_back(pair);
        }
    }
    cfg.validate();
    return cfg;
}

inline json synth_config_to_json(const SynthConfig& cfg) {
    json j;
    j["num_classes"] = cfg.num_classes;
    j["feature_dim"] = cfg.feature_dim;
    j["mean_radius"] = cfg.mean_radius;
    j["cov_scale"] = cfg.cov_scale;
    j["train_count"] = cfg.train_count;
    j["tune_count"] = cfg.tune_count;
    j["test_count"] = cfg.test_count;
    j["seed"] = cfg.seed;
    json pairs = json::array();
    for (const auto& p : cfg.confusion_pairs)
        pairs.push_back({p.class_a, p.class_b, p.strength, p.in_train, p.in_eval});
    j["confusion_pairs"] = std::move(pairs);
    return j;
}

inline SplitSpec split_spec_from_json(const json& j) {
    SplitSpec s;
    if (j.contains("fraction")) s.fraction = j["fraction"].get<double>();
    if (j.contains("seeds")) s.seeds = j["seeds"].get<std::vector<std::uint64_t>>();
    if (j.contains("stratify")) s.stratify = j["stratify"].get<bool>();
    s.validate();
    return s;
}

inline GridSpec grid_spec_from_json(const json& j) {
    GridSpec g;
    if (j.contains("T")) g.temperatures = j["T"].get<std::vector<double>>();
    if (j.contains("epsilon")) g.epsilons = j["epsilon"].get<std::vector<double>>();
    if (j.contains("lambda")) g.lambdas = j["lambda"].get<std::vector<double>>();
    if (j.contains("tpr_level")) g.tpr_level = j["tpr_level"].get<double>();
    g.validate();
    return g;
}

} // namespace io

} // namespace relu
