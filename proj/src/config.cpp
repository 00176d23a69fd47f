#include "qme/config.hpp"

#include <fstream>
#include <sstream>

#include "qme/steady.hpp"

namespace qme::cli {

using nlohmann::json;
using nlohmann::ordered_json;

const char* family_name(QmeFamily f) {
    switch (f) {
        case QmeFamily::Redfield: return "redfield";
        case QmeFamily::Secular: return "secular";
        case QmeFamily::Ule: return "ule";
        case QmeFamily::Tle: return "tle";
    }
    return "?";
}

const char* task_name(Task t) {
    switch (t) {
        case Task::Steady: return "steady";
        case Task::Perturbative: return "perturbative";
        case Task::Mfg: return "mfg";
        case Task::Compare: return "compare";
        case Task::SweepEpsilon: return "sweep_epsilon";
        case Task::SweepBeta: return "sweep_beta";
        case Task::Evolve: return "evolve";
    }
    return "?";
}

namespace {

QmeFamily family_from(const std::string& s) {
    if (s == "redfield") return QmeFamily::Redfield;
    if (s == "secular") return QmeFamily::Secular;
    if (s == "ule") return QmeFamily::Ule;
    if (s == "tle") return QmeFamily::Tle;
    throw ValidationError("unknown qme family '" + s + "'");
}

Task task_from(const std::string& s) {
    if (s == "steady") return Task::Steady;
    if (s == "perturbative") return Task::Perturbative;
    if (s == "mfg") return Task::Mfg;
    if (s == "compare") return Task::Compare;
    if (s == "sweep_epsilon") return Task::SweepEpsilon;
    if (s == "sweep_beta") return Task::SweepBeta;
    if (s == "evolve") return Task::Evolve;
    throw ValidationError("unknown task '" + s + "'");
}

double get_num(const json& j, const char* key, double fallback) {
    if (!j.contains(key)) return fallback;
    if (!j.at(key).is_number()) throw ValidationError(std::string(key) + " must be a number");
    return j.at(key).get<double>();
}

Eigen::MatrixXcd parse_matrix(const json& j, const char* what) {
    if (!j.is_array() || j.empty())
        throw ValidationError(std::string(what) + " must be a non-empty array of rows");
    const auto rows = static_cast<Eigen::Index>(j.size());
    Eigen::MatrixXcd m(rows, rows);
    for (Eigen::Index r = 0; r < rows; ++r) {
        const json& row = j.at(static_cast<std::size_t>(r));
        if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != rows)
            throw ValidationError(std::string(what) + " must be square");
        for (Eigen::Index c = 0; c < rows; ++c) {
            const json& e = row.at(static_cast<std::size_t>(c));
            if (e.is_number()) {
                m(r, c) = e.get<double>();
            } else if (e.is_array() && e.size() == 2) {
                m(r, c) = std::complex<double>(e.at(0).get<double>(), e.at(1).get<double>());
            } else {
                throw ValidationError(std::string(what) +
                                      " entries must be numbers or [re, im] pairs");
            }
        }
    }
    return m;
}

std::vector<std::pair<double, double>> read_two_column_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open tabulated kernel file '" + path + "'");
    std::vector<std::pair<double, double>> samples;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::replace(line.begin(), line.end(), ',', ' ');
        std::istringstream row(line);
        double w, v;
        if (row >> w >> v) samples.emplace_back(w, v);
    }
    if (samples.size() < 2)
        throw ValidationError("tabulated kernel file '" + path + "' has fewer than two rows");
    return samples;
}

bath::SpectralDensity parse_density(const json& j) {
    const std::string kind = j.value("kind", "ohmic_debye");
    if (kind == "ohmic_debye")
        return bath::SpectralDensity::ohmic_debye(get_num(j, "j0", 1.0),
                                                  get_num(j, "omega_d", 1.0));
    if (kind == "ohmic_gaussian")
        return bath::SpectralDensity::ohmic_gaussian(get_num(j, "omega0_scale", 1.0),
                                                     get_num(j, "cutoff_lambda", 1.0));
    if (kind == "tabulated") {
        if (j.contains("csv"))
            return bath::SpectralDensity::tabulated(
                read_two_column_csv(j.at("csv").get<std::string>()));
        if (j.contains("samples")) {
            std::vector<std::pair<double, double>> samples;
            for (const auto& s : j.at("samples"))
                samples.emplace_back(s.at(0).get<double>(), s.at(1).get<double>());
            return bath::SpectralDensity::tabulated(std::move(samples));
        }
        throw ValidationError("tabulated bath needs 'csv' or 'samples'");
    }
    throw ValidationError("unknown bath kind '" + kind + "'");
}

ordered_json echo_density(const bath::SpectralDensity& sd) {
    ordered_json j;
    switch (sd.kind) {
        case bath::SpectralKind::OhmicDebye:
            j["kind"] = "ohmic_debye";
            j["j0"] = sd.j0;
            j["omega_d"] = sd.omega_d;
            break;
        case bath::SpectralKind::OhmicGaussian:
            j["kind"] = "ohmic_gaussian";
            j["omega0_scale"] = sd.omega0_scale;
            j["cutoff_lambda"] = sd.cutoff;
            break;
        case bath::SpectralKind::Tabulated:
            j["kind"] = "tabulated";
            j["sample_count"] = sd.samples.size();
            break;
    }
    return j;
}

QmeChoice parse_qme(const json& j) {
    QmeChoice q;
    if (j.contains("family")) q.family = family_from(j.at("family").get<std::string>());
    q.include_lamb = j.value("include_lamb", true);
    q.epsilon = get_num(j, "epsilon", 0.1);
    return q;
}

}  // namespace

RunConfig parse_config(const json& doc) {
    if (!doc.is_object()) throw ValidationError("config root must be a JSON object");
    RunConfig cfg;

    // --- model --------------------------------------------------------------
    if (!doc.contains("model")) throw ValidationError("config needs a 'model' section");
    const json& jm = doc.at("model");
    cfg.model.kind = jm.value("kind", "spin_boson");
    cfg.model.omega_d_beta_product = get_num(jm, "omega_d_beta_product", 0.0);
    if (cfg.model.kind == "spin_boson") {
        auto& sb = cfg.model.spin_boson;
        sb.omega0 = get_num(jm, "omega0", 1.0);
        sb.cx = get_num(jm, "c_x", 1.0);
        sb.cy = get_num(jm, "c_y", 1.0);
        sb.cz = get_num(jm, "c_z", 1.0);
        sb.j0 = get_num(jm, "j0", 1.0);
        sb.beta = get_num(jm, "beta", 0.0);
        sb.omega_d = get_num(jm, "omega_d",
                             cfg.model.omega_d_beta_product > 0.0 && sb.beta > 0.0
                                 ? cfg.model.omega_d_beta_product / sb.beta
                                 : 1.0);
    } else if (cfg.model.kind == "spin_chain") {
        auto& sc = cfg.model.spin_chain;
        sc.n_sites = static_cast<int>(get_num(jm, "n", 3));
        sc.b_z = get_num(jm, "b_z", 8.0);
        sc.eta = get_num(jm, "eta", 1.0);
        sc.cutoff_lambda = get_num(jm, "cutoff_lambda", 100.0);
        sc.omega0_scale = get_num(jm, "omega0_scale", 2.0);
        sc.beta = get_num(jm, "beta", 0.0);
        sc.lamb_shift = jm.value("lamb_shift", false);
    } else if (cfg.model.kind == "generic") {
        auto& g = cfg.model.generic;
        if (!jm.contains("hamiltonian"))
            throw ValidationError("generic model needs 'hamiltonian'");
        g.hamiltonian = parse_matrix(jm.at("hamiltonian"), "hamiltonian");
        g.beta = get_num(jm, "beta", 0.0);
        if (!jm.contains("channels") || !jm.at("channels").is_array())
            throw ValidationError("generic model needs a 'channels' array");
        for (const auto& ch : jm.at("channels"))
            g.channels.emplace_back(parse_matrix(ch.at("a"), "channel coupling"),
                                    parse_density(ch.value("bath", json::object())));
    } else {
        throw ValidationError("unknown model kind '" + cfg.model.kind + "'");
    }

    // --- qme / task ----------------------------------------------------------
    if (doc.contains("qme")) {
        cfg.qme = parse_qme(doc.at("qme"));
        if (doc.at("qme").contains("families"))
            for (const auto& f : doc.at("qme").at("families"))
                cfg.families.push_back(family_from(f.get<std::string>()));
    }
    // The chain spec carries its own Lamb-shift switch; it provides the
    // default when the qme section does not say otherwise.
    if (cfg.model.kind == "spin_chain" &&
        (!doc.contains("qme") || !doc.at("qme").contains("include_lamb")))
        cfg.qme.include_lamb = cfg.model.spin_chain.lamb_shift;
    if (cfg.families.empty()) cfg.families.push_back(cfg.qme.family);
    cfg.task = task_from(doc.value("task", "perturbative"));

    // --- quadrature overrides -------------------------------------------------
    if (doc.contains("quad")) {
        const json& q = doc.at("quad");
        auto& s = cfg.quad;
        s.pv_linear_nodes = static_cast<int>(get_num(q, "pv_linear_nodes", s.pv_linear_nodes));
        s.pv_log_nodes = static_cast<int>(get_num(q, "pv_log_nodes", s.pv_log_nodes));
        s.pv_split = get_num(q, "pv_split", s.pv_split);
        s.tail_factor = get_num(q, "tail_factor", s.tail_factor);
        s.pv_refine_tol = get_num(q, "pv_refine_tol", s.pv_refine_tol);
        s.corr_linear_nodes =
            static_cast<int>(get_num(q, "corr_linear_nodes", s.corr_linear_nodes));
        s.corr_log_nodes = static_cast<int>(get_num(q, "corr_log_nodes", s.corr_log_nodes));
        s.corr_tail_factor = get_num(q, "corr_tail_factor", s.corr_tail_factor);
        s.imag_time_nodes = static_cast<int>(get_num(q, "imag_time_nodes", s.imag_time_nodes));
        s.panel_order = static_cast<int>(get_num(q, "panel_order", s.panel_order));
    }

    // --- output / seed ---------------------------------------------------------
    if (doc.contains("output")) {
        const json& o = doc.at("output");
        const std::string fmt = o.value("format", "csv");
        if (fmt == "csv")
            cfg.format = OutputFormat::Csv;
        else if (fmt == "json")
            cfg.format = OutputFormat::Json;
        else
            throw ValidationError("output format must be 'csv' or 'json'");
        cfg.out_dir = o.value("path", cfg.out_dir);
    }
    cfg.seed = doc.value("seed", std::uint64_t{1});

    // --- task sections -----------------------------------------------------------
    if (doc.contains("sweep")) {
        const json& s = doc.at("sweep");
        if (s.contains("epsilon_sq_grid"))
            for (const auto& v : s.at("epsilon_sq_grid"))
                cfg.sweep.epsilon_sq_grid.push_back(v.get<double>());
        if (s.contains("beta_grid"))
            for (const auto& v : s.at("beta_grid"))
                cfg.sweep.beta_grid.push_back(v.get<double>());
    }
    if (doc.contains("evolve")) {
        const json& e = doc.at("evolve");
        cfg.evolve.initial = e.value("initial", cfg.evolve.initial);
        cfg.evolve.t_end = get_num(e, "t_end", cfg.evolve.t_end);
        cfg.evolve.dt = get_num(e, "dt", cfg.evolve.dt);
        cfg.evolve.snap_every = static_cast<int>(get_num(e, "snap_every", 10));
        cfg.evolve.include_state = e.value("include_state", true);
    }
    if (doc.contains("compare")) {
        auto parse_side = [](const json& s) {
            CompareSide side;
            side.state = s.value("state", "gibbs");
            if (s.contains("family") || s.contains("epsilon") || s.contains("include_lamb"))
                side.qme = parse_qme(s);
            side.mfg_route = s.value("route", "contour");
            return side;
        };
        cfg.compare_a = parse_side(doc.at("compare").value("a", json::object()));
        cfg.compare_b = parse_side(doc.at("compare").value("b", json::object()));
    }

    // --- resolved echo -------------------------------------------------------------
    ordered_json echo;
    echo["model"]["kind"] = cfg.model.kind;
    if (cfg.model.kind == "spin_boson") {
        const auto& sb = cfg.model.spin_boson;
        echo["model"]["omega0"] = sb.omega0;
        echo["model"]["c_x"] = sb.cx;
        echo["model"]["c_y"] = sb.cy;
        echo["model"]["c_z"] = sb.cz;
        echo["model"]["j0"] = sb.j0;
        echo["model"]["omega_d"] = sb.omega_d;
        echo["model"]["beta"] = sb.beta;
    } else if (cfg.model.kind == "spin_chain") {
        const auto& sc = cfg.model.spin_chain;
        echo["model"]["n"] = sc.n_sites;
        echo["model"]["b_z"] = sc.b_z;
        echo["model"]["eta"] = sc.eta;
        echo["model"]["cutoff_lambda"] = sc.cutoff_lambda;
        echo["model"]["omega0_scale"] = sc.omega0_scale;
        echo["model"]["beta"] = sc.beta;
        echo["model"]["lamb_shift"] = sc.lamb_shift;
    } else {
        echo["model"]["dim"] = cfg.model.generic.hamiltonian.rows();
        echo["model"]["beta"] = cfg.model.generic.beta;
        for (const auto& [a, sd] : cfg.model.generic.channels)
            echo["model"]["channels"].push_back(echo_density(sd));
    }
    if (cfg.model.omega_d_beta_product > 0.0)
        echo["model"]["omega_d_beta_product"] = cfg.model.omega_d_beta_product;
    echo["qme"]["family"] = family_name(cfg.qme.family);
    echo["qme"]["include_lamb"] = cfg.qme.include_lamb;
    echo["qme"]["epsilon"] = cfg.qme.epsilon;
    for (const auto f : cfg.families) echo["qme"]["families"].push_back(family_name(f));
    echo["task"] = task_name(cfg.task);
    echo["quad"] = {{"pv_linear_nodes", cfg.quad.pv_linear_nodes},
                    {"pv_log_nodes", cfg.quad.pv_log_nodes},
                    {"pv_split", cfg.quad.pv_split},
                    {"tail_factor", cfg.quad.tail_factor},
                    {"pv_refine_tol", cfg.quad.pv_refine_tol},
                    {"corr_linear_nodes", cfg.quad.corr_linear_nodes},
                    {"corr_log_nodes", cfg.quad.corr_log_nodes},
                    {"corr_tail_factor", cfg.quad.corr_tail_factor},
                    {"imag_time_nodes", cfg.quad.imag_time_nodes},
                    {"panel_order", cfg.quad.panel_order}};
    echo["output"]["format"] = cfg.format == OutputFormat::Csv ? "csv" : "json";
    echo["output"]["path"] = cfg.out_dir;
    echo["seed"] = cfg.seed;
    if (!cfg.sweep.epsilon_sq_grid.empty())
        echo["sweep"]["epsilon_sq_grid"] = cfg.sweep.epsilon_sq_grid;
    if (!cfg.sweep.beta_grid.empty()) echo["sweep"]["beta_grid"] = cfg.sweep.beta_grid;
    if (cfg.task == Task::Evolve) {
        echo["evolve"] = {{"initial", cfg.evolve.initial},
                          {"t_end", cfg.evolve.t_end},
                          {"dt", cfg.evolve.dt},
                          {"snap_every", cfg.evolve.snap_every},
                          {"include_state", cfg.evolve.include_state}};
    }
    if (cfg.task == Task::Compare) {
        auto echo_side = [](const CompareSide& s) {
            ordered_json j;
            j["state"] = s.state;
            if (s.state == "steady" || s.state == "perturbative") {
                j["family"] = family_name(s.qme.family);
                j["include_lamb"] = s.qme.include_lamb;
                j["epsilon"] = s.qme.epsilon;
            }
            if (s.state == "mfg") j["route"] = s.mfg_route;
            return j;
        };
        echo["compare"]["a"] = echo_side(cfg.compare_a);
        echo["compare"]["b"] = echo_side(cfg.compare_b);
    }
    cfg.resolved = std::move(echo);
    return cfg;
}

RunConfig load_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open config file '" + path + "'");
    json doc;
    try {
        in >> doc;
    } catch (const json::exception& e) {
        throw ValidationError(std::string("config is not valid JSON: ") + e.what());
    }
    return parse_config(doc);
}

models::Model build_model(const RunConfig& cfg, double beta_override) {
    if (cfg.model.kind == "spin_boson") {
        models::SpinBosonSpec spec = cfg.model.spin_boson;
        if (beta_override > 0.0) {
            spec.beta = beta_override;
            if (cfg.model.omega_d_beta_product > 0.0)
                spec.omega_d = cfg.model.omega_d_beta_product / spec.beta;
        }
        return models::build_spin_boson(spec, cfg.quad);
    }
    if (cfg.model.kind == "spin_chain") {
        models::SpinChainSpec spec = cfg.model.spin_chain;
        if (beta_override > 0.0) spec.beta = beta_override;
        return models::build_spin_chain(spec, cfg.quad);
    }
    models::GenericSpec spec = cfg.model.generic;
    if (beta_override > 0.0) spec.beta = beta_override;
    return models::build_generic(spec, cfg.quad);
}

std::vector<Diagnostic> validate(const RunConfig& cfg) {
    std::vector<Diagnostic> out;
    double beta = 0.0;
    if (cfg.model.kind == "spin_boson") beta = cfg.model.spin_boson.beta;
    if (cfg.model.kind == "spin_chain") beta = cfg.model.spin_chain.beta;
    if (cfg.model.kind == "generic") beta = cfg.model.generic.beta;
    if (!(beta > 0.0)) out.push_back({true, "beta required (positive inverse temperature)"});

    if (cfg.model.kind == "spin_boson") {
        const auto& sb = cfg.model.spin_boson;
        if (sb.cx == 0.0 && sb.cy == 0.0 && sb.cz == 0.0)
            out.push_back({true, "spin_boson coupling vanishes: set at least one of c_x, c_y, c_z"});
        if (!(sb.omega_d > 0.0)) out.push_back({true, "omega_d must be positive"});
    }
    if (cfg.model.kind == "spin_chain") {
        const auto& sc = cfg.model.spin_chain;
        if (sc.n_sites < 1 || sc.n_sites > 8)
            out.push_back({true, "spin_chain n must be in [1, 8]"});
    }
    if (cfg.model.kind == "generic" && cfg.model.generic.channels.empty())
        out.push_back({true, "generic model needs at least one channel"});

    if (cfg.qme.family == QmeFamily::Tle) {
        const bool multi = cfg.model.kind == "generic" && cfg.model.generic.channels.size() > 1;
        if (multi) out.push_back({true, "tle is single-channel; the model declares several"});
    }

    if (cfg.task == Task::SweepEpsilon && cfg.sweep.epsilon_sq_grid.empty())
        out.push_back({true, "sweep_epsilon needs sweep.epsilon_sq_grid"});
    if (cfg.task == Task::SweepBeta && cfg.sweep.beta_grid.empty())
        out.push_back({true, "sweep_beta needs sweep.beta_grid"});

    // Degeneracy pre-scan for the perturbative routes.
    const bool perturbative_task = cfg.task == Task::Perturbative || cfg.task == Task::Mfg ||
                                   cfg.task == Task::SweepBeta;
    if (perturbative_task && out.empty()) {
        try {
            const auto model = build_model(cfg);
            steady::require_nondegenerate(model.basis);
        } catch (const DegeneracyError&) {
            out.push_back({true, "degenerate spectrum: use steady/evolve"});
        } catch (const std::exception& e) {
            out.push_back({true, std::string("model construction failed: ") + e.what()});
        }
    }
    return out;
}

}  // namespace qme::cli
