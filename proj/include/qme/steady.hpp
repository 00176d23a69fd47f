// steady.hpp — Steady states by null space, second-order perturbation, and
// mean-force expansion, plus comparison metrics.
//
// Perturbative routes expand rho_ss = rho0 + eps^2 rho2 + O(eps^4). All of
// them refuse degenerate Hamiltonians (the coherence formulas divide by Bohr
// gaps); the direct null-space solve and time evolution stay available there.

#pragma once

#include <Eigen/Dense>

#include <functional>
#include <vector>

#include "qme/bath.hpp"
#include "qme/opcore.hpp"
#include "qme/superop.hpp"

namespace qme::steady {

enum class Provenance { Redfield, Mfg, Ule, Tle };
const char* provenance_name(Provenance p);

struct PerturbativeState {
    op::DensityMatrix rho0;  // zeroth order, diagonal in the energy basis
    op::Matrix rho2;         // per unit eps^2; traceless after normalization
    Provenance provenance = Provenance::Redfield;
    bool normalized = true;

    op::DensityMatrix at_epsilon(double eps) const;
};

struct SteadySolution {
    op::DensityMatrix rho;
    double residual;      // max |L[rho]| at the returned state
    double spectral_gap;  // second-smallest eigenvalue modulus of L
};

// Eigenvector of the eigenvalue nearest zero, Hermitized and trace-normalized,
// with shift-inverse refinement when the residual warrants it. Throws when a
// second eigenvalue sits within 1e-10 * max|L| of zero.
SteadySolution null_space_steady(const super::Superoperator& total);

// Second-order Redfield steady state via the Lamb-shift kernels; populations
// come from the gap -> 0 limit of the coherence formula, which trades the
// ill-conditioned limit for S and its derivative in closed form.
PerturbativeState redfield_perturbative(const op::EigenBasis& basis,
                                        const std::vector<op::BohrDecomposition>& bohr,
                                        const bath::BathModel& model);

enum class MfgRoute {
    Contour,   // same closed-form S/S' expressions as the Redfield route
    Integral,  // two-dimensional imaginary-time quadrature of the defining integral
};

PerturbativeState mfg_second_order(const op::EigenBasis& basis,
                                   const std::vector<op::BohrDecomposition>& bohr,
                                   const bath::BathModel& model, MfgRoute route);

PerturbativeState ule_perturbative(const op::EigenBasis& basis,
                                   const std::vector<op::BohrDecomposition>& bohr,
                                   const bath::BathModel& model, bool include_lamb = true);

// Truncated-Lindblad steady state: zeroth order solves the |W|^2-weighted
// balance equations (not Gibbs), second-order coherences follow from the rate
// tensor. Second-order populations are not defined for this family and are
// stored as zero.
PerturbativeState tle_steady(const op::EigenBasis& basis, const op::HermitianOperator& coupling,
                             const bath::BathModel& model);

// Trace-one kernel of the |W_nk|^2 |A_nk|^2 rate matrix; exposed so surrogate
// W matrices can be checked for detailed-balance consistency.
Eigen::VectorXd tle_populations_from_w(const op::Matrix& w, const op::Matrix& a_eigen);

struct StateComparison {
    double trace_distance = 0.0;
    double max_abs_diff = 0.0;
    Eigen::VectorXd rel_population_diff;  // (a_nn - b_nn) / b_nn
};

StateComparison compare_states(const op::DensityMatrix& a, const op::DensityMatrix& b);

struct HighTScanRow {
    double beta;
    double rho2_max;
};

struct HighTScanResult {
    std::vector<HighTScanRow> rows;   // in the given beta order
    double tail_slope = 0.0;          // d ln|rho2| / d ln beta over the last three rows
    bool vanishing = false;           // strictly decreasing over the last three rows
};

// Evaluates the builder over a descending beta grid (points run concurrently,
// capped at max_threads; 0 means hardware concurrency).
HighTScanResult high_temperature_scan(const std::function<PerturbativeState(double)>& builder,
                                      const std::vector<double>& betas_descending,
                                      int max_threads = 0);

// Throws DegeneracyError unless all level pairs are separated by more than
// bin_tol (bin_tol < 0 selects the 1e-9 * spread default).
void require_nondegenerate(const op::EigenBasis& basis, double bin_tol = -1.0);

}  // namespace qme::steady
