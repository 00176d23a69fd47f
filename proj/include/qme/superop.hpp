// superop.hpp — Second-order generators of the four master equations.
//
// All superoperators are dense d^2 x d^2 matrices acting on column-stacked
// density matrices in the energy eigenbasis. Dissipative parts exclude the
// squared coupling strength: callers scale by epsilon^2 when combining with
// the free part (one assembly then serves a whole epsilon sweep).

#pragma once

#include <Eigen/Dense>

#include <optional>
#include <vector>

#include "qme/bath.hpp"
#include "qme/opcore.hpp"

namespace qme::super {

enum class Family {
    Free,
    RedfieldS,
    RedfieldGamma,
    SecularLS,
    SecularDiss,
    UleLamb,
    UleDiss,
    TleLS,
    TleDiss,
    Total,
};

const char* family_name(Family f);

struct Superoperator {
    Eigen::MatrixXcd matrix;  // d^2 x d^2
    Family family = Family::Free;
    Eigen::Index sys_dim = 0;

    static constexpr const char* epsilon_convention =
        "matrix excludes epsilon^2; caller scales";

    static Superoperator zero(Eigen::Index d, Family f);
    op::Matrix apply(const op::Matrix& rho) const;
};

// Building blocks in the column-stacking convention:
//   rho -> X rho     :  I kron X
//   rho -> rho Y     :  Y^T kron I
//   rho -> X rho Y   :  Y^T kron X
Eigen::MatrixXcd left_mult(const op::Matrix& x);
Eigen::MatrixXcd right_mult(const op::Matrix& y);
Eigen::MatrixXcd sandwich(const op::Matrix& x, const op::Matrix& y);

// Free part: -i [H_S, rho], diagonal in vectorized space.
Superoperator build_free(const op::EigenBasis& basis);

struct RedfieldParts {
    Superoperator s_part;      // coefficients S(w); spoils Gibbs stationarity
    Superoperator gamma_part;  // coefficients gamma(w); annihilates the Gibbs state
};

// Redfield generator split into its Lamb-shift-coefficient part and its gamma
// part; the sum is the full second-order Redfield generator.
RedfieldParts build_redfield(const op::EigenBasis& basis,
                             const std::vector<op::BohrDecomposition>& bohr,
                             const bath::BathModel& model);

struct SecularParts {
    Superoperator ls;    // -i [H_LS, .]
    Superoperator diss;  // Lindblad dissipator with rates gamma(w)
    op::Matrix h_ls;     // H_LS = sum S(w) A^dag(w) A(w), commutes with H_S
};

// Frequency-diagonal restriction of the Redfield double sum.
SecularParts build_secular(const op::EigenBasis& basis,
                           const std::vector<op::BohrDecomposition>& bohr,
                           const bath::BathModel& model);

struct UleParts {
    std::optional<Superoperator> lamb;  // absent when the Lamb-like term is ignored
    Superoperator diss;
    std::vector<op::Matrix> jump_ops;
    op::Matrix lambda_op;  // the Hermitian generator of the lamb part (zero if omitted)
};

UleParts build_ule(const op::EigenBasis& basis, const std::vector<op::BohrDecomposition>& bohr,
                   const bath::BathModel& model, bool include_lamb = true);

struct TleParams {
    double lambda = 0.0;     // optimized scale at stationarity
    double phi = 0.0;        // optimized phase
    double gbar_sq = 0.0;    // weighted average of Re(G)^2
    double hbar_sq = 0.0;    // weighted average of Im(G)^2
    double hbar = 0.0;       // weighted average of Im(G)
    double rescale = 1.0;    // applied coupling normalization factor
};

struct TleParts {
    Superoperator lamb;
    Superoperator diss;
    TleParams params;
    op::Matrix jump_op;       // W elementwise A, energy eigenbasis
    op::Matrix w_matrix;      // W_nm
    op::Matrix g_matrix;      // G_nm = Gamma(-Delta_nm)
    op::Matrix coupling;      // normalized A in the energy eigenbasis
};

// Single-channel truncated-Lindblad builder. The coupling is rescaled to unit
// Frobenius norm (a warning is printed when the factor differs from one) and
// the optimized (lambda, phi) are evaluated from the stationary kernels.
TleParts build_tle(const op::EigenBasis& basis, const op::HermitianOperator& coupling,
                   const bath::BathModel& model);

// free + epsilon^2 * (sum of parts).
Superoperator combine(const Superoperator& free_part,
                      const std::vector<const Superoperator*>& parts, double epsilon);

// Spectrum of the Choi matrix restricted to the orthogonal complement of the
// maximally entangled vector. Non-negative (up to roundoff) exactly when the
// generator is of Lindblad form; the nonzero eigenvalues are the Kossakowski
// spectrum.
Eigen::VectorXd kossakowski_spectrum(const Superoperator& sop);

}  // namespace qme::super
