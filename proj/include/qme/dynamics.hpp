// dynamics.hpp — Fixed-step time evolution of vectorized density matrices
// with physicality monitors and steady-state convergence detection.

#pragma once

#include <Eigen/Dense>

#include <optional>
#include <ostream>
#include <vector>

#include "qme/opcore.hpp"
#include "qme/superop.hpp"

namespace qme::dyn {

struct Monitor {
    double trace_dev = 0.0;  // |Tr rho - 1|
    double herm_dev = 0.0;   // max |rho - rho^dag|
    double min_eig = 0.0;
};

struct Trajectory {
    std::vector<double> times;
    std::vector<op::Matrix> states;  // energy-basis snapshots
    std::vector<Monitor> monitors;
    std::optional<double> converged_at;
};

struct EvolveOptions {
    double t_end = 1.0;
    double dt = 0.0;            // <= 0 selects 0.08 / max|L|
    int snap_every = 10;        // steps between snapshots
    double conv_tol = 1e-10;    // max |L[rho]| threshold, two consecutive snapshots
    bool stop_at_convergence = true;
};

// Classical fourth-order fixed-step integration of d rho / dt = L[rho].
// The step must satisfy dt <= 0.1 / max|L| or the call is rejected with a
// suggested step size.
Trajectory evolve(const super::Superoperator& total, const op::DensityMatrix& rho0,
                  const EvolveOptions& opts);

struct PositivityReport {
    bool violation = false;
    double first_time = 0.0;
    double worst_eigenvalue = 0.0;
};

PositivityReport positivity_watch(const Trajectory& traj, double pos_tol = 1e-8);

// Tr(obs * rho(t)) per snapshot; obs in the same (energy) basis as the states.
std::vector<double> expectation_series(const Trajectory& traj, const op::Matrix& obs);

// Tr(sigma^z_site rho(t)) for qubit-chain systems (d = 2^N); the observable is
// rotated into the energy basis internally.
std::vector<double> magnetization(const Trajectory& traj, int site,
                                  const op::EigenBasis& basis);

// Columns: t, trace_dev, herm_dev, min_eig, then optionally the row-major
// real/imag state entries.
void export_csv(const Trajectory& traj, std::ostream& out, bool include_state = false);

}  // namespace qme::dyn
