#include "qme/opcore.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace qme::op {

HermitianOperator::HermitianOperator(Matrix entries, double tol) : m_(std::move(entries)) {
    if (m_.rows() != m_.cols() || m_.rows() == 0)
        throw ValidationError("HermitianOperator: matrix must be square and non-empty");
    if (m_.rows() > 256)
        throw ValidationError("HermitianOperator: dense algebra is capped at d = 256");
    const double scale = std::max(max_abs(m_), 1e-300);
    const double dev = max_abs(m_ - m_.adjoint());
    if (dev > tol * scale)
        throw ValidationError("HermitianOperator: Hermiticity deviation " + std::to_string(dev) +
                              " exceeds tolerance");
}

Matrix EigenBasis::to_eigen(const Matrix& a) const {
    if (a.rows() != dim() || a.cols() != dim())
        throw ValidationError("EigenBasis::to_eigen: dimension mismatch");
    return vectors.adjoint() * a * vectors;
}

Matrix EigenBasis::to_computational(const Matrix& a) const {
    if (a.rows() != dim() || a.cols() != dim())
        throw ValidationError("EigenBasis::to_computational: dimension mismatch");
    return vectors * a * vectors.adjoint();
}

double EigenBasis::min_gap() const {
    double g = std::numeric_limits<double>::infinity();
    for (Eigen::Index n = 1; n < dim(); ++n) g = std::min(g, energies[n] - energies[n - 1]);
    return g;
}

EigenBasis eigh(const HermitianOperator& h) {
    Eigen::SelfAdjointEigenSolver<Matrix> solver(h.matrix());
    if (solver.info() != Eigen::Success)
        throw ConvergenceError("eigh: eigendecomposition failed");

    EigenBasis basis;
    basis.energies = solver.eigenvalues();
    basis.vectors = solver.eigenvectors();

    // Phase convention: largest-magnitude component of each column made real
    // positive (first one wins on ties).
    const Eigen::Index d = basis.dim();
    for (Eigen::Index c = 0; c < d; ++c) {
        Eigen::Index k = 0;
        double best = -1.0;
        for (Eigen::Index r = 0; r < d; ++r) {
            const double a = std::abs(basis.vectors(r, c));
            if (a > best + 1e-14) {
                best = a;
                k = r;
            }
        }
        const Complex pivot = basis.vectors(k, c);
        if (std::abs(pivot) > 0.0) basis.vectors.col(c) *= std::abs(pivot) / pivot;
    }

    const double scale = std::max(max_abs(h.matrix()), 1e-300);
    if (max_abs(basis.vectors.adjoint() * basis.vectors - Matrix::Identity(d, d)) > 1e-10)
        throw ConvergenceError("eigh: eigenvector matrix not unitary to 1e-10");
    const Matrix rebuilt =
        basis.vectors * basis.energies.asDiagonal().toDenseMatrix().cast<Complex>() *
        basis.vectors.adjoint();
    if (max_abs(rebuilt - h.matrix()) > 1e-10 * scale)
        throw ConvergenceError("eigh: reconstruction residual exceeds 1e-10");
    return basis;
}

BohrDecomposition bohr_decompose(const HermitianOperator& a, const EigenBasis& basis,
                                 double bin_tol) {
    if (a.dim() != basis.dim())
        throw ValidationError("bohr_decompose: operator and basis dimensions differ");
    if (bin_tol < 0.0) bin_tol = 1e-9 * basis.spread();

    const Eigen::Index d = basis.dim();
    BohrDecomposition out;
    out.bin_tol = bin_tol;
    out.a_eigen = basis.to_eigen(a.matrix());

    // Sort every (i, j) pair by its gap E_j - E_i and greedily group values
    // within bin_tol of the running bin.
    struct Entry {
        double freq;
        Eigen::Index i, j;
    };
    std::vector<Entry> entries;
    entries.reserve(static_cast<std::size_t>(d * d));
    for (Eigen::Index i = 0; i < d; ++i)
        for (Eigen::Index j = 0; j < d; ++j)
            entries.push_back({basis.energies[j] - basis.energies[i], i, j});
    std::sort(entries.begin(), entries.end(),
              [](const Entry& x, const Entry& y) { return x.freq < y.freq; });

    const double drop_tol = 1e-14 * std::max(max_abs(out.a_eigen), 1e-300);
    std::size_t start = 0;
    while (start < entries.size()) {
        std::size_t stop = start + 1;
        while (stop < entries.size() && entries[stop].freq - entries[stop - 1].freq <= bin_tol)
            ++stop;
        double mean = 0.0;
        Matrix block = Matrix::Zero(d, d);
        for (std::size_t k = start; k < stop; ++k) {
            mean += entries[k].freq;
            block(entries[k].i, entries[k].j) = out.a_eigen(entries[k].i, entries[k].j);
        }
        mean /= static_cast<double>(stop - start);
        if (max_abs(block) > drop_tol) {
            out.freqs.push_back(mean);
            out.blocks.push_back(std::move(block));
        }
        start = stop;
    }
    return out;
}

DensityMatrix::DensityMatrix(Matrix entries, StateBasis basis, double tol)
    : m_(std::move(entries)), basis_(basis) {
    if (m_.rows() != m_.cols() || m_.rows() == 0)
        throw ValidationError("DensityMatrix: matrix must be square and non-empty");
    const double scale = std::max(max_abs(m_), 1.0);
    if (max_abs(m_ - m_.adjoint()) > tol * scale)
        throw ValidationError("DensityMatrix: not Hermitian within tolerance");
    if (std::abs(m_.trace() - Complex(1.0, 0.0)) > tol * scale)
        throw ValidationError("DensityMatrix: trace deviates from one");
}

DensityMatrix DensityMatrix::unchecked(Matrix entries, StateBasis basis) {
    DensityMatrix rho;
    rho.m_ = std::move(entries);
    rho.basis_ = basis;
    return rho;
}

double DensityMatrix::min_eigenvalue() const {
    Eigen::SelfAdjointEigenSolver<Matrix> solver(0.5 * (m_ + m_.adjoint()));
    return solver.eigenvalues().minCoeff();
}

Eigen::VectorXd gibbs_populations(const EigenBasis& basis, double beta) {
    if (beta < 0.0) throw ValidationError("gibbs_state: beta must be non-negative");
    const Eigen::Index d = basis.dim();
    const double e_min = basis.energies.minCoeff();
    Eigen::VectorXd p(d);
    for (Eigen::Index n = 0; n < d; ++n) p[n] = std::exp(-beta * (basis.energies[n] - e_min));
    p /= p.sum();
    return p;
}

DensityMatrix gibbs_state(const EigenBasis& basis, double beta) {
    const Eigen::VectorXd p = gibbs_populations(basis, beta);
    Matrix rho = Matrix::Zero(basis.dim(), basis.dim());
    rho.diagonal() = p.cast<Complex>();
    return DensityMatrix(std::move(rho), StateBasis::Energy);
}

Matrix psd_sqrt(const Matrix& m, double clamp_tol) {
    if (m.rows() != m.cols() || m.rows() == 0)
        throw ValidationError("psd_sqrt: matrix must be square and non-empty");
    const double scale = max_abs(m);
    if (max_abs(m - m.adjoint()) > 1e-12 * std::max(scale, 1e-300))
        throw ValidationError("psd_sqrt: matrix not Hermitian");
    if (clamp_tol < 0.0) clamp_tol = 1e-12 * scale;

    Eigen::SelfAdjointEigenSolver<Matrix> solver(m);
    Eigen::VectorXd vals = solver.eigenvalues();
    for (Eigen::Index i = 0; i < vals.size(); ++i) {
        if (vals[i] < -clamp_tol)
            throw NotPsdError("psd_sqrt: eigenvalue " + std::to_string(vals[i]) +
                                  " below -clamp_tol",
                              vals[i]);
        vals[i] = std::sqrt(std::max(vals[i], 0.0));
    }
    return solver.eigenvectors() * vals.asDiagonal() * solver.eigenvectors().adjoint();
}

Vector vectorize(const Matrix& rho) {
    return Eigen::Map<const Vector>(rho.data(), rho.size());
}

Matrix devectorize(const Vector& v) {
    const auto n = v.size();
    const auto d = static_cast<Eigen::Index>(std::llround(std::sqrt(static_cast<double>(n))));
    if (d * d != n) throw ValidationError("devectorize: length is not a perfect square");
    return Eigen::Map<const Matrix>(v.data(), d, d);
}

Matrix pauli_x() {
    Matrix m(2, 2);
    m << 0, 1, 1, 0;
    return m;
}

Matrix pauli_y() {
    Matrix m(2, 2);
    m << 0, Complex(0, -1), Complex(0, 1), 0;
    return m;
}

Matrix pauli_z() {
    Matrix m(2, 2);
    m << 1, 0, 0, -1;
    return m;
}

Matrix identity2() { return Matrix::Identity(2, 2); }

Matrix site_operator(int n_sites, int site, const Matrix& op2) {
    if (n_sites < 1) throw ValidationError("site_operator: need at least one site");
    if (site < 0 || site >= n_sites) throw ValidationError("site_operator: site out of range");
    if (op2.rows() != 2 || op2.cols() != 2)
        throw ValidationError("site_operator: expected a 2x2 operator");
    Matrix out = Matrix::Identity(1, 1);
    for (int s = 0; s < n_sites; ++s) {
        const Matrix& factor = (s == site) ? op2 : identity2();
        Matrix next(out.rows() * 2, out.cols() * 2);
        for (Eigen::Index i = 0; i < out.rows(); ++i)
            for (Eigen::Index j = 0; j < out.cols(); ++j)
                next.block(2 * i, 2 * j, 2, 2) = out(i, j) * factor;
        out.swap(next);
    }
    return out;
}

}  // namespace qme::op
