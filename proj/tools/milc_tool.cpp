// Command-line front end: frf / analyze / design / simulate / casestudy.
//
// Configuration comes from a single JSON file (--config); the documented CLI
// flags override file values. Exit codes: 0 ok, 2 input error, 3 numerical
// error, 4 strict-verdict failure, 5 no feasible cut-off.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "milc/analysis.hpp"
#include "milc/case_study.hpp"
#include "milc/frf.hpp"
#include "milc/lti.hpp"
#include "milc/sim.hpp"
#include "milc/synthesis.hpp"

namespace {

constexpr const char* kVersion = "1.0.0";

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct RunConfig {
    std::string model;      // TransferMatrix JSON
    std::string frf;        // FrfMatrix CSV or JSON
    std::string design;     // IlcDesign JSON
    std::string reference;  // CSV, one column per channel
    std::string s_model;    // TransferMatrix JSON for S (simulate; default identity)
    int grid_points = 2000;
    std::string grid_spacing = "log";
    double grid_min_hz = 0.1;
    double grid_max_hz = 0.0;  // 0 = Nyquist
    double ts = 1e-3;
    std::string mode = "alg3";
    std::string target = "monotone";
    int preview = 200;
    double regularization = 1e-8;
    int trials = 10;
    std::string out = ".";
    unsigned long seed = 0;
};

std::string read_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot open '" + path + "'");
    std::stringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

void reject_unknown(const nlohmann::json& j, std::initializer_list<const char*> allowed,
                    const std::string& where) {
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool known = false;
        for (const char* k : allowed)
            if (it.key() == k) known = true;
        if (!known) throw ConfigError("unknown config key '" + where + it.key() + "'");
    }
}

RunConfig load_config(const std::string& path) {
    RunConfig c;
    if (path.empty()) return c;
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(read_file(path));
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("config parse error: ") + e.what());
    }
    reject_unknown(j,
                   {"model", "frf", "design", "reference", "s_model", "grid", "ts", "mode",
                    "target", "preview", "regularization", "trials", "out", "seed"},
                   "");
    auto get = [&j](const char* k, auto& dst) {
        if (j.contains(k)) dst = j[k].template get<std::decay_t<decltype(dst)>>();
    };
    get("model", c.model);
    get("frf", c.frf);
    get("design", c.design);
    get("reference", c.reference);
    get("s_model", c.s_model);
    get("ts", c.ts);
    get("mode", c.mode);
    get("target", c.target);
    get("preview", c.preview);
    get("regularization", c.regularization);
    get("trials", c.trials);
    get("out", c.out);
    get("seed", c.seed);
    if (j.contains("grid")) {
        const auto& g = j["grid"];
        reject_unknown(g, {"points", "spacing", "min_hz", "max_hz"}, "grid.");
        if (g.contains("points")) c.grid_points = g["points"].get<int>();
        if (g.contains("spacing")) c.grid_spacing = g["spacing"].get<std::string>();
        if (g.contains("min_hz")) c.grid_min_hz = g["min_hz"].get<double>();
        if (g.contains("max_hz")) c.grid_max_hz = g["max_hz"].get<double>();
    }
    return c;
}

void validate(const RunConfig& c) {
    if (c.ts <= 0) throw ConfigError("ts must be > 0");
    if (c.grid_points < 2) throw ConfigError("grid.points must be >= 2");
    if (c.grid_spacing != "log" && c.grid_spacing != "linear")
        throw ConfigError("grid.spacing must be 'log' or 'linear'");
    if (c.grid_min_hz < 0) throw ConfigError("grid.min_hz must be >= 0");
    if (c.preview < 1) throw ConfigError("preview must be >= 1");
    if (c.regularization < 0) throw ConfigError("regularization must be >= 0");
    if (c.trials < 1) throw ConfigError("trials must be >= 1");
    if (c.target != "convergent" && c.target != "monotone")
        throw ConfigError("target must be 'convergent' or 'monotone'");
    double nyq = 0.5 / c.ts;
    if (c.grid_max_hz > nyq)
        throw ConfigError("grid.max_hz " + std::to_string(c.grid_max_hz) +
                          " Hz is outside [0, pi] rad/sample (Nyquist " + std::to_string(nyq) +
                          " Hz)");
    if (c.grid_min_hz > nyq)
        throw ConfigError("grid.min_hz " + std::to_string(c.grid_min_hz) +
                          " Hz is outside [0, pi] rad/sample (Nyquist " + std::to_string(nyq) +
                          " Hz)");
}

// Canonical serialization of the effective configuration, hashed into every
// output header so artifacts can be traced back to their exact inputs.
std::string canonical(const RunConfig& c) {
    nlohmann::json j;
    j["model"] = c.model;
    j["frf"] = c.frf;
    j["design"] = c.design;
    j["reference"] = c.reference;
    j["s_model"] = c.s_model;
    j["grid"] = {{"points", c.grid_points},
                 {"spacing", c.grid_spacing},
                 {"min_hz", c.grid_min_hz},
                 {"max_hz", c.grid_max_hz}};
    j["ts"] = c.ts;
    j["mode"] = c.mode;
    j["target"] = c.target;
    j["preview"] = c.preview;
    j["regularization"] = c.regularization;
    j["trials"] = c.trials;
    j["seed"] = c.seed;
    return j.dump();
}

std::string fnv1a_hex(const std::string& s) {
    unsigned long long h = 1469598103934665603ull;
    for (unsigned char ch : s) {
        h ^= ch;
        h *= 1099511628211ull;
    }
    char buf[20];
    std::snprintf(buf, sizeof(buf), "%016llx", h);
    return buf;
}

std::string header_line(const RunConfig& c) {
    return std::string("milc ") + kVersion + " config=" + fnv1a_hex(canonical(c));
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream os(path);
    if (!os) throw ConfigError("cannot write '" + path.string() + "'");
    os << text;
}

// JSON cannot carry comment lines; the header goes into a top-level key that
// all loaders ignore.
std::string with_header(const std::string& json_text, const std::string& header) {
    nlohmann::json j = nlohmann::json::parse(json_text);
    j["header"] = header;
    return j.dump(2);
}

milc::FrequencyGrid build_grid(const RunConfig& c) {
    double nyq = 0.5 / c.ts;
    double max_hz = c.grid_max_hz > 0 ? c.grid_max_hz : nyq;
    if (c.grid_spacing == "log" && c.grid_min_hz == 0.1 && max_hz == nyq)
        return milc::FrequencyGrid::log_default(c.ts, c.grid_points);
    std::vector<double> omega;
    double lo = milc::FrequencyGrid::hz_to_omega(c.grid_min_hz, c.ts);
    double hi = milc::FrequencyGrid::hz_to_omega(max_hz, c.ts);
    if (c.grid_spacing == "linear") {
        for (int k = 0; k < c.grid_points; ++k)
            omega.push_back(lo + (hi - lo) * k / (c.grid_points - 1.0));
    } else {
        if (lo <= 0) throw ConfigError("grid.min_hz must be > 0 for log spacing");
        for (int k = 0; k < c.grid_points; ++k)
            omega.push_back(lo * std::pow(hi / lo, k / (c.grid_points - 1.0)));
    }
    return milc::FrequencyGrid(std::move(omega), c.ts);
}

milc::FrfMatrix load_frf(const std::string& path, double ts) {
    if (path.size() > 4 && path.substr(path.size() - 4) == ".csv") {
        std::ifstream is(path);
        if (!is) throw ConfigError("cannot open '" + path + "'");
        return milc::FrfMatrix::read_csv(is, ts);
    }
    return milc::FrfMatrix::from_json(read_file(path));
}

Eigen::MatrixXd load_reference(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot open '" + path + "'");
    std::vector<std::vector<double>> rows;
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::stringstream ss(line);
        std::string tok;
        std::vector<double> vals;
        bool numeric = true;
        while (std::getline(ss, tok, ',')) {
            try {
                size_t pos = 0;
                vals.push_back(std::stod(tok, &pos));
            } catch (const std::exception&) {
                numeric = false;
                break;
            }
        }
        if (!numeric) continue;  // column-header line
        if (!rows.empty() && vals.size() != rows.front().size())
            throw ConfigError("reference CSV: inconsistent column count in '" + path + "'");
        rows.push_back(std::move(vals));
    }
    if (rows.empty()) throw ConfigError("reference CSV '" + path + "' has no data rows");
    Eigen::MatrixXd r(static_cast<long>(rows.front().size()), static_cast<long>(rows.size()));
    for (size_t k = 0; k < rows.size(); ++k)
        for (size_t i = 0; i < rows[k].size(); ++i)
            r(static_cast<long>(i), static_cast<long>(k)) = rows[k][i];
    return r;
}

// --- commands ---

int cmd_frf(const RunConfig& c) {
    if (c.model.empty()) throw ConfigError("frf: config key 'model' is required");
    milc::TransferMatrix tm = milc::TransferMatrix::from_json(read_file(c.model));
    RunConfig gc = c;
    gc.ts = tm.ts();
    validate(gc);
    milc::FrfMatrix frf = milc::evaluate_frf(tm, build_grid(gc));
    std::filesystem::create_directories(c.out);
    std::ostringstream csv;
    csv << "# " << header_line(c) << "\n";
    frf.write_csv(csv);
    write_text(std::filesystem::path(c.out) / "frf.csv", csv.str());
    write_text(std::filesystem::path(c.out) / "frf.json",
               with_header(frf.to_json(), header_line(c)));
    std::cout << "wrote " << (std::filesystem::path(c.out) / "frf.csv").string() << " ("
              << frf.npoints() << " points, " << frf.ny() << "x" << frf.nu() << ")\n";
    return 0;
}

int cmd_analyze(const RunConfig& c, bool strict) {
    if (c.frf.empty()) throw ConfigError("analyze: config key 'frf' is required");
    if (c.design.empty()) throw ConfigError("analyze: config key 'design' is required");
    milc::FrfMatrix J_frf = load_frf(c.frf, c.ts);
    milc::IlcDesign design = milc::IlcDesign::from_json(read_file(c.design));
    milc::FrfMatrix L_resp = design.L.response(J_frf.grid());
    milc::FrfMatrix Q_resp = design.q_response(J_frf.grid());
    milc::ConvergenceReport rep = milc::build_report(Q_resp, L_resp, J_frf);

    std::filesystem::create_directories(c.out);
    std::ostringstream csv;
    csv << "# " << header_line(c) << "\n";
    rep.write_csv(csv);
    write_text(std::filesystem::path(c.out) / "analysis.csv", csv.str());
    write_text(std::filesystem::path(c.out) / "analysis.json",
               with_header(rep.summary_json(), header_line(c)));

    bool convergent = rep.thm1.convergent;
    bool monotone = rep.thm2.monotone;
    char buf[160];
    std::snprintf(buf, sizeof(buf), "convergent=%s monotone=%s gamma=%.6f worst_omega=%.6f",
                  convergent ? "true" : "false", monotone ? "true" : "false", rep.gamma,
                  rep.worst_omega);
    std::cout << buf << "\n";
    if (strict && !(convergent && monotone)) return 4;
    return 0;
}

int cmd_design(const RunConfig& c) {
    milc::DesignMode mode;
    try {
        mode = milc::mode_from_name(c.mode);
    } catch (const milc::MilcError& e) {
        throw ConfigError(e.what());
    }
    milc::DesignModels models;
    if (!c.model.empty()) {
        milc::TransferMatrix tm = milc::TransferMatrix::from_json(read_file(c.model));
        std::vector<milc::RationalTransfer> diag;
        for (int i = 0; i < std::min(tm.ny(), tm.nu()); ++i) diag.push_back(tm.at(i, i));
        models.full = tm;
        models.diag = std::move(diag);
    }
    if (mode == milc::DesignMode::Centralized && !models.full)
        throw ConfigError("centralized mode requires full MIMO model");
    if (!models.full) throw ConfigError("design: config key 'model' is required");

    RunConfig gc = c;
    gc.ts = models.full->ts();
    validate(gc);
    milc::FrfMatrix J_frf =
        c.frf.empty() ? milc::evaluate_frf(*models.full, build_grid(gc)) : load_frf(c.frf, c.ts);
    milc::SynthesisOptions opts;
    opts.preview = c.preview;
    opts.regularization = c.regularization;
    opts.target =
        c.target == "convergent" ? milc::TuneTarget::Convergent : milc::TuneTarget::Monotone;
    milc::IlcDesign design = milc::build_design(mode, models, J_frf, opts);

    std::filesystem::create_directories(c.out);
    write_text(std::filesystem::path(c.out) / "design.json",
               with_header(design.to_json(), header_line(c)));
    std::cout << "mode=" << milc::mode_name(mode) << " fc=[";
    for (const auto& q : design.Q) std::cout << " " << q.fc();
    std::cout << " ] Hz fit_error=" << design.L.fit_error() << "\n";
    return 0;
}

int cmd_simulate(const RunConfig& c, bool strict) {
    if (c.design.empty()) throw ConfigError("simulate: config key 'design' is required");
    if (c.model.empty()) throw ConfigError("simulate: config key 'model' is required");
    if (c.reference.empty()) throw ConfigError("simulate: config key 'reference' is required");
    milc::IlcDesign design = milc::IlcDesign::from_json(read_file(c.design));
    milc::TransferMatrix J_tm = milc::TransferMatrix::from_json(read_file(c.model));
    Eigen::MatrixXd r = load_reference(c.reference);
    if (r.rows() != J_tm.ny())
        throw milc::DimensionMismatch("simulate: reference has " + std::to_string(r.rows()) +
                                      " channels, model expects " + std::to_string(J_tm.ny()));
    long N = r.cols();
    milc::LiftedOperator J_lift = milc::LiftedOperator::lift(J_tm, N);
    milc::LiftedOperator S_lift =
        c.s_model.empty()
            ? milc::LiftedOperator::identity(J_tm.ny(), N)
            : milc::LiftedOperator::lift(milc::TransferMatrix::from_json(read_file(c.s_model)), N);

    std::vector<milc::TrialRecord> trials =
        milc::run_trials(design, S_lift, J_lift, r, c.trials);
    double gamma_lift = milc::lifted_gamma(design, J_lift);
    bool monotone = false;
    bool have_fixed = false;
    try {
        milc::FixedPoint fp = milc::fixed_points(design, S_lift, J_lift, r);
        milc::MonotoneAudit audit = milc::monotonicity_audit(trials, fp.f_inf, gamma_lift);
        monotone = audit.monotone;
        have_fixed = true;
    } catch (const milc::NonContractive&) {
        // divergent design: no fixed point, audit impossible
    }

    std::filesystem::create_directories(c.out);
    std::ostringstream csv;
    csv << "# " << header_line(c) << "\n";
    milc::write_trials_csv(csv, trials);
    write_text(std::filesystem::path(c.out) / "trials.csv", csv.str());
    std::ostringstream sig;
    sig << "# " << header_line(c) << "\n";
    milc::write_trial_signals_csv(sig, trials.back());
    write_text(std::filesystem::path(c.out) / "signals_final.csv", sig.str());

    char buf[120];
    std::snprintf(buf, sizeof(buf), "monotone=%s gamma_lift=%.6f trials=%zu",
                  monotone ? "true" : "false", gamma_lift, trials.size());
    std::cout << buf << "\n";
    if (strict && have_fixed && !monotone) return 4;
    if (strict && !have_fixed) return 4;
    return 0;
}

int cmd_casestudy(const RunConfig& c) {
    milc::Scenario sc = milc::build_scenario();
    sc.trials = c.trials;
    milc::ScenarioReport rep = milc::run_procedure2(sc);
    std::filesystem::create_directories(c.out);
    milc::write_report(rep, sc, c.out, header_line(c));
    for (const auto& m : rep.modes) {
        std::cout << milc::mode_name(m.mode) << ": fc=[";
        for (double f : m.fc) std::cout << " " << f;
        std::cout << " ] Hz e_inf_F=" << m.e_inf_F << " convergent=" << m.convergent
                  << " monotone=" << m.monotone << " diverged=" << m.diverged << "\n";
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Frequency-domain multivariable ILC design toolbox"};
    app.set_version_flag("--version", std::string("milc ") + kVersion);
    app.require_subcommand(1);
    app.fallthrough();

    std::string config_path, out_override, mode_override, target_override;
    int grid_points_override = 0, preview_override = 0;
    double reg_override = -1.0;
    bool strict = false;
    app.add_option("--config", config_path, "JSON configuration file");
    app.add_option("--out", out_override, "output directory (overrides config)");
    app.add_option("--grid-points", grid_points_override, "grid point count (overrides config)");
    app.add_flag("--strict", strict, "exit 4 when the analysis verdict is negative");

    CLI::App* c_frf = app.add_subcommand("frf", "sample a parametric model on a grid");
    CLI::App* c_analyze = app.add_subcommand("analyze", "convergence / monotonicity analysis");
    CLI::App* c_design = app.add_subcommand("design", "synthesize L and tune Q");
    c_design->add_option("--mode", mode_override, "naive|alg1|alg2|alg3");
    c_design->add_option("--preview", preview_override, "FIR preview length K");
    c_design->add_option("--reg", reg_override, "inversion regularization");
    c_design->add_option("--target", target_override, "convergent|monotone");
    CLI::App* c_simulate = app.add_subcommand("simulate", "run ILC trials with a saved design");
    CLI::App* c_casestudy = app.add_subcommand("casestudy", "frozen surrogate Procedure-2 run");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int r = app.exit(e);
        return r == 0 ? 0 : 2;
    }

    try {
        RunConfig cfg = load_config(config_path);
        if (!out_override.empty()) cfg.out = out_override;
        if (grid_points_override > 0) cfg.grid_points = grid_points_override;
        if (!mode_override.empty()) cfg.mode = mode_override;
        if (preview_override > 0) cfg.preview = preview_override;
        if (reg_override >= 0) cfg.regularization = reg_override;
        if (!target_override.empty()) cfg.target = target_override;
        validate(cfg);

        if (c_frf->parsed()) return cmd_frf(cfg);
        if (c_analyze->parsed()) return cmd_analyze(cfg, strict);
        if (c_design->parsed()) return cmd_design(cfg);
        if (c_simulate->parsed()) return cmd_simulate(cfg, strict);
        if (c_casestudy->parsed()) return cmd_casestudy(cfg);
        return 2;
    } catch (const milc::NoFeasibleCutoff& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 5;
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const milc::DimensionMismatch& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const milc::ModelMissing& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const nlohmann::json::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const milc::MilcError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
}
