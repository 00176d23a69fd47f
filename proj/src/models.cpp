#include "qme/models.hpp"

#include <cmath>
#include <complex>

namespace qme::models {

using op::Matrix;
using Complex = std::complex<double>;

namespace {

constexpr Complex kI{0.0, 1.0};

Matrix spin_boson_coupling(const SpinBosonSpec& s) {
    return s.cx * op::pauli_x() + s.cy * op::pauli_y() + s.cz * op::pauli_z();
}

}  // namespace

Model build_spin_boson(const SpinBosonSpec& spec, const bath::QuadSettings& quad) {
    if (spec.cx == 0.0 && spec.cy == 0.0 && spec.cz == 0.0)
        throw ValidationError("build_spin_boson: all coupling constants vanish");
    if (!(spec.beta > 0.0)) throw ValidationError("build_spin_boson: beta must be positive");

    const Matrix h = 0.5 * spec.omega0 * op::pauli_z();
    op::EigenBasis basis = op::eigh(op::HermitianOperator(h));
    bath::BathModel bathm(spec.beta,
                          {bath::SpectralDensity::ohmic_debye(spec.j0, spec.omega_d)}, quad,
                          basis.spread());
    op::HermitianOperator a(spin_boson_coupling(spec));
    std::vector<op::BohrDecomposition> bohr{op::bohr_decompose(a, basis)};
    return {std::move(basis), std::move(bohr), std::move(bathm), {std::move(a)}, h, 0};
}

Model build_spin_chain(const SpinChainSpec& spec, const bath::QuadSettings& quad) {
    if (spec.n_sites < 1 || spec.n_sites > 8)
        throw ValidationError("build_spin_chain: n_sites must be in [1, 8] (d <= 256)");
    if (!(spec.beta > 0.0)) throw ValidationError("build_spin_chain: beta must be positive");

    const int n = spec.n_sites;
    const Eigen::Index d = Eigen::Index(1) << n;
    Matrix h = Matrix::Zero(d, d);
    for (int i = 0; i < n; ++i) h -= spec.b_z * op::site_operator(n, i, op::pauli_z());
    for (int i = 0; i + 1 < n; ++i) {
        h -= spec.eta * (op::site_operator(n, i, op::pauli_x()) *
                         op::site_operator(n, i + 1, op::pauli_x()));
        h -= spec.eta * (op::site_operator(n, i, op::pauli_y()) *
                         op::site_operator(n, i + 1, op::pauli_y()));
        h -= spec.eta * (op::site_operator(n, i, op::pauli_z()) *
                         op::site_operator(n, i + 1, op::pauli_z()));
    }

    op::EigenBasis basis = op::eigh(op::HermitianOperator(h));
    bath::BathModel bathm(
        spec.beta,
        {bath::SpectralDensity::ohmic_gaussian(spec.omega0_scale, spec.cutoff_lambda)}, quad,
        basis.spread());
    op::HermitianOperator a(op::site_operator(n, 0, op::pauli_x()));
    std::vector<op::BohrDecomposition> bohr{op::bohr_decompose(a, basis)};
    return {std::move(basis), std::move(bohr), std::move(bathm), {std::move(a)}, h, n};
}

Model build_generic(const GenericSpec& spec, const bath::QuadSettings& quad) {
    if (spec.channels.empty())
        throw ValidationError("build_generic: need at least one coupling channel");
    if (!(spec.beta > 0.0)) throw ValidationError("build_generic: beta must be positive");

    op::HermitianOperator h(spec.hamiltonian);
    op::EigenBasis basis = op::eigh(h);

    std::vector<bath::SpectralDensity> densities;
    std::vector<op::HermitianOperator> couplings;
    densities.reserve(spec.channels.size());
    couplings.reserve(spec.channels.size());
    for (const auto& [a, sd] : spec.channels) {
        couplings.emplace_back(a);
        if (couplings.back().dim() != basis.dim())
            throw ValidationError("build_generic: coupling dimension mismatch");
        densities.push_back(sd);
    }

    bath::BathModel bathm(spec.beta, std::move(densities), quad, basis.spread());
    std::vector<op::BohrDecomposition> bohr;
    bohr.reserve(couplings.size());
    for (const auto& a : couplings) bohr.push_back(op::bohr_decompose(a, basis));
    return {std::move(basis), std::move(bohr), std::move(bathm), std::move(couplings),
            spec.hamiltonian, 0};
}

SpinBosonOracle spin_boson_oracle(const SpinBosonSpec& spec, const bath::QuadSettings& quad) {
    if (spec.cx == 0.0 && spec.cy == 0.0 && spec.cz == 0.0)
        throw ValidationError("spin_boson_oracle: all coupling constants vanish");
    const double w0 = spec.omega0;
    if (!(w0 > 0.0)) throw ValidationError("spin_boson_oracle: omega0 must be positive");

    bath::BathModel bathm(spec.beta,
                          {bath::SpectralDensity::ohmic_debye(spec.j0, spec.omega_d)}, quad,
                          w0);
    const double beta = spec.beta;

    // Energy ordering: index 0 is the ground state |->, index 1 is |+>.
    const double z = std::exp(-0.5 * beta * w0) + std::exp(0.5 * beta * w0);
    const double p_plus = std::exp(-0.5 * beta * w0) / z;
    const double p_minus = std::exp(0.5 * beta * w0) / z;

    const double s0 = bathm.lamb_shift(0.0)(0, 0).real();
    const double sp = bathm.lamb_shift(w0)(0, 0).real();
    const double sm = bathm.lamb_shift(-w0)(0, 0).real();
    const double dsp = bathm.lamb_shift_derivative(w0)(0, 0).real();
    const double dsm = bathm.lamb_shift_derivative(-w0)(0, 0).real();

    const double cz2 = spec.cz * spec.cz;
    const double cxy2 = spec.cx * spec.cx + spec.cy * spec.cy;
    const Complex a_pm(spec.cx, -spec.cy);  // A_{+-} = c_x - i c_y

    const Matrix gibbs = [&] {
        Matrix g = Matrix::Zero(2, 2);
        g(0, 0) = p_minus;
        g(1, 1) = p_plus;
        return g;
    }();

    auto normalized = [&](Complex coh_pm, double bar_pp, double bar_mm) {
        Matrix rho2 = Matrix::Zero(2, 2);
        rho2(1, 0) = coh_pm;
        rho2(0, 1) = std::conj(coh_pm);
        const double pp = bar_pp - p_plus * (bar_pp + bar_mm);
        rho2(1, 1) = pp;
        rho2(0, 0) = -pp;
        return rho2;
    };

    // Redfield / mean-force closed forms.
    const Complex red_coh =
        2.0 * spec.cz * a_pm / w0 * (s0 - p_plus * sp - p_minus * sm);
    const double red_pp = cz2 * (-beta * s0) * p_plus +
                          cxy2 * ((dsp - beta * sp) * p_plus - dsm * p_minus);
    const double red_mm = cz2 * (-beta * s0) * p_minus +
                          cxy2 * ((dsm - beta * sm) * p_minus - dsp * p_plus);

    // Universal-Lindblad closed forms.
    const double f_0_m = bathm.f_function(0.0, -w0)(0, 0).real();
    const double f_m_0 = bathm.f_function(-w0, 0.0)(0, 0).real();
    const double g0 = bathm.g_kernel(0.0)(0, 0).real();
    const double gp = bathm.g_kernel(w0)(0, 0).real();
    const double gm = bathm.g_kernel(-w0)(0, 0).real();
    const Complex ule_coh =
        spec.cz * a_pm / w0 *
        ((f_0_m - f_m_0) * (p_plus - p_minus) +
         0.5 * kI * g0 * ((gm - 3.0 * gp) * p_plus - (gp - 3.0 * gm) * p_minus));
    const double ule_pp = -beta * p_plus * (cz2 * s0 + cxy2 * sp);
    const double ule_mm = -beta * p_minus * (cz2 * s0 + cxy2 * sm);

    SpinBosonOracle oracle{
        {op::DensityMatrix(gibbs, op::StateBasis::Energy),
         normalized(red_coh, red_pp, red_mm), steady::Provenance::Redfield, true},
        {op::DensityMatrix(gibbs, op::StateBasis::Energy),
         normalized(ule_coh, ule_pp, ule_mm), steady::Provenance::Ule, true}};
    return oracle;
}

}  // namespace qme::models
