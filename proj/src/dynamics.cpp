#include "qme/dynamics.hpp"

#include <cmath>
#include <complex>

#include "qme/text.hpp"

namespace qme::dyn {

using op::Matrix;
using op::Vector;

namespace {

Monitor monitor_of(const Matrix& rho) {
    Monitor m;
    m.trace_dev = std::abs(rho.trace() - std::complex<double>(1.0, 0.0));
    m.herm_dev = op::max_abs(rho - rho.adjoint());
    Eigen::SelfAdjointEigenSolver<Matrix> solver(0.5 * (rho + rho.adjoint()));
    m.min_eig = solver.eigenvalues().minCoeff();
    return m;
}

}  // namespace

Trajectory evolve(const super::Superoperator& total, const op::DensityMatrix& rho0,
                  const EvolveOptions& opts) {
    const Eigen::Index d = total.sys_dim;
    if (rho0.dim() != d) throw ValidationError("evolve: state dimension mismatch");
    if (!(opts.t_end > 0.0)) throw ValidationError("evolve: t_end must be positive");

    const double norm = std::max(op::max_abs(total.matrix), 1e-300);
    const double dt_max = 0.1 / norm;
    double dt = opts.dt;
    if (dt <= 0.0) dt = 0.08 / norm;
    if (dt > dt_max)
        throw ValidationError("evolve: dt = " + std::to_string(dt) +
                              " violates the step guard; use dt <= " + std::to_string(dt_max));
    const int snap_every = std::max(opts.snap_every, 1);

    const Eigen::MatrixXcd& L = total.matrix;
    Vector v = op::vectorize(rho0.matrix());

    Trajectory traj;
    auto snapshot = [&](double t) {
        const Matrix rho = op::devectorize(v);
        traj.times.push_back(t);
        traj.states.push_back(rho);
        traj.monitors.push_back(monitor_of(rho));
        return op::max_abs(op::devectorize((L * v).eval()));
    };

    double prev_residual = snapshot(0.0);
    const auto steps = static_cast<long long>(std::ceil(opts.t_end / dt));
    Vector k1(d * d), k2(d * d), k3(d * d), k4(d * d);
    for (long long s = 1; s <= steps; ++s) {
        k1.noalias() = L * v;
        k2.noalias() = L * (v + (0.5 * dt) * k1);
        k3.noalias() = L * (v + (0.5 * dt) * k2);
        k4.noalias() = L * (v + dt * k3);
        v += (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);

        if (s % snap_every == 0 || s == steps) {
            const double t = static_cast<double>(s) * dt;
            const double residual = snapshot(t);
            if (residual < opts.conv_tol && prev_residual < opts.conv_tol &&
                !traj.converged_at) {
                traj.converged_at = t;
                if (opts.stop_at_convergence) break;
            }
            prev_residual = residual;
        }
    }
    return traj;
}

PositivityReport positivity_watch(const Trajectory& traj, double pos_tol) {
    PositivityReport rep;
    double worst = 0.0;
    for (std::size_t i = 0; i < traj.monitors.size(); ++i) {
        worst = std::min(worst, traj.monitors[i].min_eig);
        if (!rep.violation && traj.monitors[i].min_eig < -pos_tol) {
            rep.violation = true;
            rep.first_time = traj.times[i];
        }
    }
    rep.worst_eigenvalue = worst;
    return rep;
}

std::vector<double> expectation_series(const Trajectory& traj, const Matrix& obs) {
    std::vector<double> out;
    out.reserve(traj.states.size());
    for (const Matrix& rho : traj.states)
        out.push_back((obs * rho).trace().real());
    return out;
}

std::vector<double> magnetization(const Trajectory& traj, int site,
                                  const op::EigenBasis& basis) {
    const Eigen::Index d = basis.dim();
    int n_sites = 0;
    for (Eigen::Index p = 1; p < d; p <<= 1) ++n_sites;
    if ((Eigen::Index(1) << n_sites) != d)
        throw ValidationError("magnetization: dimension is not a power of two");
    if (site < 0 || site >= n_sites) throw ValidationError("magnetization: site out of range");
    const Matrix obs = basis.to_eigen(op::site_operator(n_sites, site, op::pauli_z()));
    return expectation_series(traj, obs);
}

void export_csv(const Trajectory& traj, std::ostream& out, bool include_state) {
    out << "t,trace_dev,herm_dev,min_eig";
    if (include_state && !traj.states.empty()) {
        const Eigen::Index d = traj.states.front().rows();
        for (Eigen::Index i = 0; i < d; ++i)
            for (Eigen::Index j = 0; j < d; ++j)
                out << ",re_" << i << "_" << j << ",im_" << i << "_" << j;
    }
    out << "\n";
    for (std::size_t k = 0; k < traj.times.size(); ++k) {
        out << text::fmt17(traj.times[k]) << "," << text::fmt17(traj.monitors[k].trace_dev)
            << "," << text::fmt17(traj.monitors[k].herm_dev) << ","
            << text::fmt17(traj.monitors[k].min_eig);
        if (include_state) {
            const Matrix& rho = traj.states[k];
            for (Eigen::Index i = 0; i < rho.rows(); ++i)
                for (Eigen::Index j = 0; j < rho.cols(); ++j)
                    out << "," << text::fmt17(rho(i, j).real()) << ","
                        << text::fmt17(rho(i, j).imag());
        }
        out << "\n";
    }
}

}  // namespace qme::dyn
