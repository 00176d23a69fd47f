#include "qme/runner.hpp"

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>

#include "qme/dynamics.hpp"
#include "qme/parallel.hpp"
#include "qme/steady.hpp"
#include "qme/superop.hpp"
#include "qme/text.hpp"
#include "qme/version.hpp"

namespace qme::cli {

namespace {

using nlohmann::ordered_json;
using op::Matrix;

int worker_cap() {
    if (const char* env = std::getenv("QME_THREADS")) {
        const int n = std::atoi(env);
        if (n > 0) return n;
    }
    return 0;  // hardware concurrency
}

// One CSV table kept in memory until the run succeeds, then flushed through a
// single writer so artifacts are always complete.
struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    void write_csv(std::ostream& out) const {
        for (std::size_t i = 0; i < header.size(); ++i)
            out << header[i] << (i + 1 < header.size() ? "," : "");
        out << "\n";
        for (const auto& row : rows) {
            for (std::size_t i = 0; i < row.size(); ++i)
                out << row[i] << (i + 1 < row.size() ? "," : "");
            out << "\n";
        }
    }

    ordered_json to_json() const {
        ordered_json rows_json = ordered_json::array();
        for (const auto& row : rows) {
            ordered_json o;
            for (std::size_t i = 0; i < header.size(); ++i) o[header[i]] = row[i];
            rows_json.push_back(std::move(o));
        }
        return rows_json;
    }
};

std::string fmt(double x) { return text::fmt17(x); }

void append_state_columns(std::vector<std::string>& header, const std::string& prefix,
                          Eigen::Index d) {
    for (Eigen::Index i = 0; i < d; ++i)
        for (Eigen::Index j = 0; j < d; ++j) {
            header.push_back(prefix + "_re_" + std::to_string(i) + "_" + std::to_string(j));
            header.push_back(prefix + "_im_" + std::to_string(i) + "_" + std::to_string(j));
        }
}

void append_state_values(std::vector<std::string>& row, const Matrix& m) {
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            row.push_back(fmt(m(i, j).real()));
            row.push_back(fmt(m(i, j).imag()));
        }
}

struct Assembled {
    super::Superoperator total;
    ordered_json notes;
};

Assembled assemble_total(const models::Model& model, const QmeChoice& choice) {
    const auto free_part = super::build_free(model.basis);
    ordered_json notes;
    if (choice.family == QmeFamily::Redfield) {
        const auto parts = super::build_redfield(model.basis, model.bohr, model.bath);
        return {super::combine(free_part, {&parts.s_part, &parts.gamma_part},
                               choice.epsilon),
                notes};
    }
    if (choice.family == QmeFamily::Secular) {
        const auto parts = super::build_secular(model.basis, model.bohr, model.bath);
        return {super::combine(free_part, {&parts.ls, &parts.diss}, choice.epsilon), notes};
    }
    if (choice.family == QmeFamily::Tle) {
        const auto parts = super::build_tle(model.basis, model.couplings.at(0), model.bath);
        notes["tle_lambda"] = parts.params.lambda;
        notes["tle_phi"] = parts.params.phi;
        notes["tle_rescale"] = parts.params.rescale;
        return {super::combine(free_part, {&parts.lamb, &parts.diss}, choice.epsilon),
                notes};
    }
    const auto parts =
        super::build_ule(model.basis, model.bohr, model.bath, choice.include_lamb);
    std::vector<const super::Superoperator*> ptrs{&parts.diss};
    if (parts.lamb) ptrs.push_back(&*parts.lamb);
    notes["include_lamb"] = choice.include_lamb;
    return {super::combine(free_part, ptrs, choice.epsilon), notes};
}

steady::PerturbativeState perturbative_state(const models::Model& model, QmeFamily family,
                                             bool include_lamb) {
    switch (family) {
        case QmeFamily::Redfield:
            return steady::redfield_perturbative(model.basis, model.bohr, model.bath);
        case QmeFamily::Ule:
            return steady::ule_perturbative(model.basis, model.bohr, model.bath,
                                            include_lamb);
        case QmeFamily::Tle:
            return steady::tle_steady(model.basis, model.couplings.at(0), model.bath);
        case QmeFamily::Secular:
            throw ValidationError(
                "secular perturbative corrections vanish identically; compare against the "
                "gibbs state or use task=steady");
    }
    throw ValidationError("unreachable family");
}

op::DensityMatrix initial_state(const models::Model& model, const EvolveConfig& ev,
                                std::uint64_t seed) {
    const Eigen::Index d = model.basis.dim();
    if (ev.initial == "gibbs") return op::gibbs_state(model.basis, model.bath.beta());
    if (ev.initial == "maximally_mixed")
        return op::DensityMatrix(Matrix::Identity(d, d) / static_cast<double>(d),
                                 op::StateBasis::Energy);
    if (ev.initial == "all_down") {
        // Computational basis state with every spin against the field.
        Matrix rho = Matrix::Zero(d, d);
        rho(d - 1, d - 1) = 1.0;
        return op::DensityMatrix(model.basis.to_eigen(rho), op::StateBasis::Energy, 1e-10);
    }
    if (ev.initial == "plus_x") {
        if (d != 2) throw ValidationError("plus_x initial state needs a two-level system");
        Matrix rho = 0.5 * Matrix::Ones(2, 2);
        return op::DensityMatrix(model.basis.to_eigen(rho), op::StateBasis::Energy, 1e-10);
    }
    if (ev.initial == "random_pure") {
        std::mt19937_64 rng(seed);
        std::normal_distribution<double> dist(0.0, 1.0);
        Eigen::VectorXcd v(d);
        for (Eigen::Index i = 0; i < d; ++i)
            v[i] = std::complex<double>(dist(rng), dist(rng));
        v /= v.norm();
        return op::DensityMatrix((v * v.adjoint()).eval(), op::StateBasis::Energy, 1e-10);
    }
    if (ev.initial.rfind("level:", 0) == 0) {
        const int level = std::atoi(ev.initial.c_str() + 6);
        if (level < 0 || level >= d) throw ValidationError("initial level out of range");
        Matrix rho = Matrix::Zero(d, d);
        rho(level, level) = 1.0;
        return op::DensityMatrix(rho, op::StateBasis::Energy);
    }
    throw ValidationError("unknown initial state '" + ev.initial + "'");
}

op::DensityMatrix side_state(const models::Model& model, const CompareSide& side) {
    if (side.state == "gibbs") return op::gibbs_state(model.basis, model.bath.beta());
    if (side.state == "mfg") {
        const auto route = side.mfg_route == "integral" ? steady::MfgRoute::Integral
                                                        : steady::MfgRoute::Contour;
        return steady::mfg_second_order(model.basis, model.bohr, model.bath, route)
            .at_epsilon(side.qme.epsilon);
    }
    if (side.state == "steady")
        return steady::null_space_steady(assemble_total(model, side.qme).total).rho;
    if (side.state == "perturbative")
        return perturbative_state(model, side.qme.family, side.qme.include_lamb)
            .at_epsilon(side.qme.epsilon);
    throw ValidationError("unknown compare state '" + side.state + "'");
}

// ---- task bodies ------------------------------------------------------------

void run_steady(const RunConfig& cfg, Table& table, ordered_json& results) {
    const auto model = build_model(cfg);
    const auto assembled = assemble_total(model, cfg.qme);
    const auto sol = steady::null_space_steady(assembled.total);
    const auto gibbs = op::gibbs_state(model.basis, model.bath.beta());
    const auto cmp = steady::compare_states(sol.rho, gibbs);

    table.header = {"beta", "epsilon", "family", "residual", "spectral_gap",
                    "trace_distance_to_gibbs"};
    append_state_columns(table.header, "rho", model.basis.dim());
    std::vector<std::string> row{fmt(model.bath.beta()), fmt(cfg.qme.epsilon),
                                 family_name(cfg.qme.family), fmt(sol.residual),
                                 fmt(sol.spectral_gap), fmt(cmp.trace_distance)};
    append_state_values(row, sol.rho.matrix());
    table.rows.push_back(std::move(row));

    results["residual"] = sol.residual;
    results["spectral_gap"] = sol.spectral_gap;
    results["trace_distance_to_gibbs"] = cmp.trace_distance;
    results["notes"] = assembled.notes;
}

void run_perturbative(const RunConfig& cfg, Table& table, ordered_json& results) {
    std::vector<double> betas = cfg.sweep.beta_grid;
    if (betas.empty()) betas.push_back(0.0);  // configured temperature

    const auto probe = build_model(cfg, betas.front());
    const Eigen::Index d = probe.basis.dim();
    table.header = {"beta", "family"};
    for (Eigen::Index n = 0; n < d; ++n) table.header.push_back("rho0_" + std::to_string(n));
    append_state_columns(table.header, "rho2", d);

    struct Row {
        double beta;
        QmeFamily family;
        steady::PerturbativeState state;
    };
    std::vector<Row> rows;
    for (double beta : betas)
        for (QmeFamily family : cfg.families)
            rows.push_back({beta, family,
                            steady::PerturbativeState{
                                op::DensityMatrix::unchecked(Matrix(), op::StateBasis::Energy),
                                Matrix(), steady::Provenance::Redfield, false}});

    par::parallel_for(
        rows.size(),
        [&](std::size_t i) {
            const auto model = build_model(cfg, rows[i].beta);
            rows[i].state =
                perturbative_state(model, rows[i].family, cfg.qme.include_lamb);
            rows[i].beta = model.bath.beta();
        },
        worker_cap());

    for (const auto& r : rows) {
        std::vector<std::string> row{fmt(r.beta), family_name(r.family)};
        for (Eigen::Index n = 0; n < d; ++n)
            row.push_back(fmt(r.state.rho0.matrix()(n, n).real()));
        append_state_values(row, r.state.rho2);
        table.rows.push_back(std::move(row));
    }
    results["rows"] = table.rows.size();
}

void run_mfg(const RunConfig& cfg, Table& table, ordered_json& results) {
    const auto model = build_model(cfg);
    const auto contour = steady::mfg_second_order(model.basis, model.bohr, model.bath,
                                                  steady::MfgRoute::Contour);
    const auto integral = steady::mfg_second_order(model.basis, model.bohr, model.bath,
                                                   steady::MfgRoute::Integral);
    const Eigen::Index d = model.basis.dim();

    table.header = {"route", "beta"};
    for (Eigen::Index n = 0; n < d; ++n) table.header.push_back("rho0_" + std::to_string(n));
    append_state_columns(table.header, "rho2", d);
    for (const auto* ps : {&contour, &integral}) {
        std::vector<std::string> row{ps == &contour ? "contour" : "integral",
                                     fmt(model.bath.beta())};
        for (Eigen::Index n = 0; n < d; ++n)
            row.push_back(fmt(ps->rho0.matrix()(n, n).real()));
        append_state_values(row, ps->rho2);
        table.rows.push_back(std::move(row));
    }

    const double scale = std::max(op::max_abs(contour.rho2), 1e-300);
    results["route_cross_residual"] = op::max_abs(contour.rho2 - integral.rho2) / scale;
}

void run_compare(const RunConfig& cfg, Table& table, ordered_json& results) {
    const auto model = build_model(cfg);
    const auto a = side_state(model, cfg.compare_a);
    const auto b = side_state(model, cfg.compare_b);
    const auto cmp = steady::compare_states(a, b);

    table.header = {"trace_distance", "max_abs_diff"};
    for (Eigen::Index n = 0; n < model.basis.dim(); ++n)
        table.header.push_back("rel_pop_diff_" + std::to_string(n));
    std::vector<std::string> row{fmt(cmp.trace_distance), fmt(cmp.max_abs_diff)};
    for (Eigen::Index n = 0; n < cmp.rel_population_diff.size(); ++n)
        row.push_back(fmt(cmp.rel_population_diff[n]));
    table.rows.push_back(std::move(row));

    results["trace_distance"] = cmp.trace_distance;
    results["max_abs_diff"] = cmp.max_abs_diff;
}

void run_sweep_epsilon(const RunConfig& cfg, Table& table, ordered_json& results) {
    const auto model = build_model(cfg);
    const auto gibbs = op::gibbs_populations(model.basis, model.bath.beta());
    const Eigen::Index d = model.basis.dim();

    // The generator parts are epsilon-free; assemble once and rescale.
    const auto free_part = super::build_free(model.basis);
    const auto probe = assemble_total(model, cfg.qme);  // validates the family
    (void)probe;

    table.header = {"eps_sq", "max_abs_rel_pop_dev"};
    for (Eigen::Index n = 0; n < d; ++n)
        table.header.push_back("rel_pop_dev_" + std::to_string(n));

    std::vector<std::vector<std::string>> rows(cfg.sweep.epsilon_sq_grid.size());
    std::vector<double> devs(cfg.sweep.epsilon_sq_grid.size());
    par::parallel_for(
        cfg.sweep.epsilon_sq_grid.size(),
        [&](std::size_t i) {
            QmeChoice choice = cfg.qme;
            choice.epsilon = std::sqrt(cfg.sweep.epsilon_sq_grid[i]);
            const auto assembled = assemble_total(model, choice);
            const auto sol = steady::null_space_steady(assembled.total);
            std::vector<std::string> row{fmt(cfg.sweep.epsilon_sq_grid[i])};
            double max_dev = 0.0;
            std::vector<std::string> partial;
            for (Eigen::Index n = 0; n < d; ++n) {
                const double dev =
                    (sol.rho.matrix()(n, n).real() - gibbs[n]) / gibbs[n];
                max_dev = std::max(max_dev, std::abs(dev));
                partial.push_back(fmt(dev));
            }
            row.push_back(fmt(max_dev));
            row.insert(row.end(), partial.begin(), partial.end());
            rows[i] = std::move(row);
            devs[i] = max_dev;
        },
        worker_cap());
    table.rows = std::move(rows);

    // Log-log slope of max deviation against eps^2.
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const auto n_pts = static_cast<double>(devs.size());
    for (std::size_t i = 0; i < devs.size(); ++i) {
        const double x = std::log(cfg.sweep.epsilon_sq_grid[i]);
        const double y = std::log(std::max(devs[i], 1e-300));
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    results["loglog_slope"] = (n_pts * sxy - sx * sy) / (n_pts * sxx - sx * sx);
}

void run_sweep_beta(const RunConfig& cfg, Table& table, ordered_json& results) {
    auto builder = [&](double beta) {
        const auto model = build_model(cfg, beta);
        return perturbative_state(model, cfg.qme.family, cfg.qme.include_lamb);
    };
    const auto scan =
        steady::high_temperature_scan(builder, cfg.sweep.beta_grid, worker_cap());

    table.header = {"beta", "rho2_max"};
    for (const auto& row : scan.rows)
        table.rows.push_back({fmt(row.beta), fmt(row.rho2_max)});
    results["tail_slope"] = scan.tail_slope;
    results["vanishing"] = scan.vanishing;
}

void run_evolve(const RunConfig& cfg, ordered_json& results, std::string& raw_csv) {
    const auto model = build_model(cfg);
    const auto assembled = assemble_total(model, cfg.qme);
    const auto rho0 = initial_state(model, cfg.evolve, cfg.seed);

    dyn::EvolveOptions opts;
    opts.t_end = cfg.evolve.t_end;
    opts.dt = cfg.evolve.dt;
    opts.snap_every = cfg.evolve.snap_every;
    const auto traj = dyn::evolve(assembled.total, rho0, opts);

    std::ostringstream csv;
    dyn::export_csv(traj, csv, cfg.evolve.include_state);
    raw_csv = csv.str();

    const auto watch = dyn::positivity_watch(traj);
    results["snapshots"] = traj.times.size();
    results["converged_at"] =
        traj.converged_at ? ordered_json(*traj.converged_at) : ordered_json(nullptr);
    results["positivity_violation"] = watch.violation;
    results["worst_eigenvalue"] = watch.worst_eigenvalue;
    results["notes"] = assembled.notes;
}

}  // namespace

int run(const RunConfig& cfg, const std::string& out_dir_arg) {
    const std::string out_dir = out_dir_arg.empty() ? cfg.out_dir : out_dir_arg;
    try {
        const auto diagnostics = validate(cfg);
        for (const auto& d : diagnostics)
            std::cerr << (d.is_error ? "error: " : "warning: ") << d.message << "\n";
        if (std::any_of(diagnostics.begin(), diagnostics.end(),
                        [](const Diagnostic& d) { return d.is_error; }))
            return 2;

        Table table;
        ordered_json results;
        std::string raw_csv;
        switch (cfg.task) {
            case Task::Steady: run_steady(cfg, table, results); break;
            case Task::Perturbative: run_perturbative(cfg, table, results); break;
            case Task::Mfg: run_mfg(cfg, table, results); break;
            case Task::Compare: run_compare(cfg, table, results); break;
            case Task::SweepEpsilon: run_sweep_epsilon(cfg, table, results); break;
            case Task::SweepBeta: run_sweep_beta(cfg, table, results); break;
            case Task::Evolve: run_evolve(cfg, results, raw_csv); break;
        }

        std::filesystem::create_directories(out_dir);
        const std::string stem = task_name(cfg.task);
        if (cfg.task == Task::Evolve) {
            std::ofstream out(out_dir + "/trajectory.csv");
            out << raw_csv;
        } else if (cfg.format == OutputFormat::Csv) {
            std::ofstream out(out_dir + "/" + stem + ".csv");
            table.write_csv(out);
        } else {
            std::ofstream out(out_dir + "/" + stem + ".json");
            out << table.to_json().dump(2) << "\n";
        }

        ordered_json meta;
        meta["tool"] = kProjectName;
        meta["version"] = kProjectVersion;
        meta["config"] = cfg.resolved;
        meta["results"] = results;
        std::ofstream meta_out(out_dir + "/metadata.json");
        meta_out << meta.dump(2) << "\n";
        return 0;
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const ConvergenceError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
}

}  // namespace qme::cli
