// models.hpp — Reference systems wired to baths.
//
// The spin-boson two-level model (with its closed-form second-order steady
// states used as oracles), the transverse-coupled Heisenberg spin chain, and
// a generic builder for explicit Hamiltonians and channel lists.

#pragma once

#include <Eigen/Dense>

#include <vector>

#include "qme/bath.hpp"
#include "qme/opcore.hpp"
#include "qme/steady.hpp"

namespace qme::models {

struct SpinBosonSpec {
    double omega0 = 1.0;           // level splitting, H_S = (omega0/2) sigma_z
    double cx = 1.0, cy = 1.0, cz = 1.0;
    double j0 = 1.0;               // Ohmic strength
    double omega_d = 10.0;         // Debye cutoff
    double beta = 1.0;
};

struct SpinChainSpec {
    int n_sites = 3;
    double b_z = 8.0;              // field, in units of eta
    double eta = 1.0;              // neighbor coupling
    double cutoff_lambda = 100.0;  // Gaussian ultraviolet cutoff
    double omega0_scale = 2.0;     // kernel energy scale
    double beta = 0.5;
    bool lamb_shift = false;
};

struct GenericSpec {
    Eigen::MatrixXcd hamiltonian;
    std::vector<std::pair<Eigen::MatrixXcd, bath::SpectralDensity>> channels;
    double beta = 1.0;
};

struct Model {
    op::EigenBasis basis;
    std::vector<op::BohrDecomposition> bohr;   // one per channel
    bath::BathModel bath;
    std::vector<op::HermitianOperator> couplings;  // computational basis
    Eigen::MatrixXcd hamiltonian;                  // computational basis
    int n_sites = 0;                               // chain models only
};

Model build_spin_boson(const SpinBosonSpec& spec, const bath::QuadSettings& quad = {});
Model build_spin_chain(const SpinChainSpec& spec, const bath::QuadSettings& quad = {});
Model build_generic(const GenericSpec& spec, const bath::QuadSettings& quad = {});

// Closed-form second-order steady states of the two-level model, evaluated
// from the scalar kernels S, S', f, g alone. Kept deliberately separate from
// the generic matrix-element pipeline so the two can cross-validate.
struct SpinBosonOracle {
    steady::PerturbativeState redfield;  // equals the mean-force expansion
    steady::PerturbativeState ule;
};

SpinBosonOracle spin_boson_oracle(const SpinBosonSpec& spec,
                                  const bath::QuadSettings& quad = {});

}  // namespace qme::models
