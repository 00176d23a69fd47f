// opcore.hpp — Dense Hermitian operator algebra.
//
// Eigendecompositions with a deterministic phase convention, energy-eigenbasis
// transforms, Bohr-frequency block decompositions, Gibbs states, PSD matrix
// square roots, and the column-stacking vectorization convention used by the
// superoperator layer.

#pragma once

#include <Eigen/Dense>

#include <complex>
#include <vector>

#include "qme/errors.hpp"

namespace qme::op {

using Matrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXcd;
using Complex = std::complex<double>;

inline double max_abs(const Matrix& m) {
    return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff();
}

// A validated Hermitian matrix. Hamiltonians carry energy units, coupling
// operators are dimensionless (hbar = 1 throughout).
class HermitianOperator {
public:
    explicit HermitianOperator(Matrix entries, double tol = 1e-12);
    const Matrix& matrix() const { return m_; }
    Eigen::Index dim() const { return m_.rows(); }

private:
    Matrix m_;
};

// Eigensystem of a Hamiltonian: ascending energies, unitary V whose columns
// are the eigenstates. Phases are fixed by making the largest-magnitude
// component of each column real positive, so downstream coherences are
// reproducible across runs.
struct EigenBasis {
    Eigen::VectorXd energies;
    Matrix vectors;

    Eigen::Index dim() const { return energies.size(); }
    double delta(Eigen::Index n, Eigen::Index m) const { return energies[n] - energies[m]; }
    double spread() const { return energies[dim() - 1] - energies[0]; }

    Matrix to_eigen(const Matrix& a_computational) const;
    Matrix to_computational(const Matrix& a_eigen) const;

    // Smallest |E_n - E_m| over n != m; infinity for dim 1.
    double min_gap() const;
};

EigenBasis eigh(const HermitianOperator& h);

// Coupling operator resolved into Bohr-frequency blocks A(w) in the energy
// eigenbasis: element (i, j) of A belongs to the block with w = E_j - E_i.
// A(-w) = A(w)^dag and sum_w A(w) recovers the eigenbasis representation.
struct BohrDecomposition {
    std::vector<double> freqs;   // sorted ascending, one entry per kept block
    std::vector<Matrix> blocks;  // aligned with freqs
    double bin_tol = 0.0;
    Matrix a_eigen;              // full operator in the eigenbasis

    Eigen::Index dim() const { return a_eigen.rows(); }
    std::size_t size() const { return freqs.size(); }
};

// bin_tol < 0 selects the default 1e-9 * (E_max - E_min). Frequencies within
// bin_tol of each other share a bin whose representative is their mean; blocks
// that vanish identically are dropped.
BohrDecomposition bohr_decompose(const HermitianOperator& a, const EigenBasis& basis,
                                 double bin_tol = -1.0);

enum class StateBasis { Computational, Energy };

class DensityMatrix {
public:
    DensityMatrix(Matrix entries, StateBasis basis, double tol = 1e-12);
    static DensityMatrix unchecked(Matrix entries, StateBasis basis);

    const Matrix& matrix() const { return m_; }
    StateBasis basis() const { return basis_; }
    Eigen::Index dim() const { return m_.rows(); }
    double min_eigenvalue() const;

private:
    DensityMatrix() = default;
    Matrix m_;
    StateBasis basis_ = StateBasis::Energy;
};

// exp(-beta H)/Z in the energy eigenbasis, evaluated with a max-energy shift
// so large beta never overflows. beta >= 0.
DensityMatrix gibbs_state(const EigenBasis& basis, double beta);
Eigen::VectorXd gibbs_populations(const EigenBasis& basis, double beta);

// Hermitian PSD square root. Eigenvalues in [-clamp_tol, 0) are clamped to
// zero; anything below -clamp_tol raises NotPsdError. clamp_tol < 0 selects
// the default 1e-12 * max|M|.
Matrix psd_sqrt(const Matrix& m, double clamp_tol = -1.0);

// Column-stacking convention: element (i, j) lands at position j*d + i, so
// vec(X rho Y) = (Y^T kron X) vec(rho).
Vector vectorize(const Matrix& rho);
Matrix devectorize(const Vector& v);

// Pauli matrices and lattice embeddings (shared by models and observables).
Matrix pauli_x();
Matrix pauli_y();
Matrix pauli_z();
Matrix identity2();
// op2 acting on `site` of an n_sites chain of qubits (site 0 is the leftmost
// factor in the Kronecker ordering).
Matrix site_operator(int n_sites, int site, const Matrix& op2);

}  // namespace qme::op
