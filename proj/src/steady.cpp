#include "qme/steady.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <queue>

#include "qme/parallel.hpp"
#include "qme/quadrature.hpp"

namespace qme::steady {

using op::Matrix;
using Complex = std::complex<double>;

namespace {

constexpr Complex kI{0.0, 1.0};

// rho2_nn = rho2bar_nn - p_n * sum_k rho2bar_kk; a second pass clears the
// residual trace left by floating-point summation.
Matrix normalized_correction(Matrix rho2_bar, const Eigen::VectorXd& p) {
    for (int pass = 0; pass < 2; ++pass) {
        const Complex tr = rho2_bar.trace();
        rho2_bar.diagonal() -= tr * p.cast<Complex>();
    }
    return rho2_bar;
}

void require_channels(const std::vector<op::BohrDecomposition>& bohr,
                      const bath::BathModel& model, const char* who) {
    if (bohr.empty() || static_cast<int>(bohr.size()) != model.channels())
        throw ValidationError(std::string(who) + ": channel count mismatch");
}

// Second-order state from the Lamb-shift kernels; shared by the Redfield
// route and the contour route of the mean-force expansion, which coincide.
Matrix second_order_from_lamb_kernels(const op::EigenBasis& basis,
                                      const std::vector<op::BohrDecomposition>& bohr,
                                      const bath::BathModel& model) {
    const Eigen::Index d = basis.dim();
    const int nch = model.channels();
    const double beta = model.beta();
    const Eigen::VectorXd p = op::gibbs_populations(basis, beta);

    auto s_at = [&](double w) { return model.lamb_shift(w); };
    auto sp_at = [&](double w) { return model.lamb_shift_derivative(w); };

    Matrix rho2 = Matrix::Zero(d, d);

    // Coherences.
    for (Eigen::Index n = 0; n < d; ++n) {
        for (Eigen::Index m = 0; m < d; ++m) {
            if (n == m) continue;
            Complex acc = 0.0;
            for (Eigen::Index j = 0; j < d; ++j) {
                const Eigen::MatrixXcd s_jn = s_at(basis.delta(j, n));
                const Eigen::MatrixXcd s_jm = s_at(basis.delta(j, m));
                const Eigen::MatrixXcd s_nj = s_at(basis.delta(n, j));
                const Eigen::MatrixXcd s_mj = s_at(basis.delta(m, j));
                for (int al = 0; al < nch; ++al) {
                    for (int be = 0; be < nch; ++be) {
                        const Complex amp =
                            bohr[static_cast<std::size_t>(al)].a_eigen(n, j) *
                            bohr[static_cast<std::size_t>(be)].a_eigen(j, m);
                        if (amp == 0.0) continue;
                        acc += ((s_jn(be, al) - s_jm(be, al)) * p[j] + s_nj(al, be) * p[n] -
                                s_mj(al, be) * p[m]) *
                               amp;
                    }
                }
            }
            rho2(n, m) = acc / basis.delta(n, m);
        }
    }

    // Populations before normalization. The j = n summand cancels
    // algebraically except for its -beta S(0) piece, so S'(0) never enters.
    const Eigen::MatrixXcd s_zero = s_at(0.0);
    for (Eigen::Index n = 0; n < d; ++n) {
        Complex acc = 0.0;
        for (Eigen::Index j = 0; j < d; ++j) {
            if (j == n) {
                for (int al = 0; al < nch; ++al)
                    for (int mu = 0; mu < nch; ++mu)
                        acc += -beta * s_zero(al, mu) * p[n] *
                               bohr[static_cast<std::size_t>(al)].a_eigen(n, n) *
                               bohr[static_cast<std::size_t>(mu)].a_eigen(n, n);
                continue;
            }
            const Eigen::MatrixXcd s_nj = s_at(basis.delta(n, j));
            const Eigen::MatrixXcd sp_jn = sp_at(basis.delta(j, n));
            const Eigen::MatrixXcd sp_nj = sp_at(basis.delta(n, j));
            for (int al = 0; al < nch; ++al) {
                for (int mu = 0; mu < nch; ++mu) {
                    const Complex amp = bohr[static_cast<std::size_t>(al)].a_eigen(n, j) *
                                        bohr[static_cast<std::size_t>(mu)].a_eigen(j, n);
                    if (amp == 0.0) continue;
                    acc += (-sp_jn(mu, al) * p[j] + sp_nj(al, mu) * p[n] -
                            beta * s_nj(al, mu) * p[n]) *
                           amp;
                }
            }
        }
        rho2(n, n) = acc;
    }

    return normalized_correction(std::move(rho2), p);
}

}  // namespace

const char* provenance_name(Provenance p) {
    switch (p) {
        case Provenance::Redfield: return "redfield";
        case Provenance::Mfg: return "mfg";
        case Provenance::Ule: return "ule";
        case Provenance::Tle: return "tle";
    }
    return "?";
}

op::DensityMatrix PerturbativeState::at_epsilon(double eps) const {
    Matrix m = rho0.matrix() + (eps * eps) * rho2;
    return op::DensityMatrix(std::move(m), rho0.basis(), 1e-10);
}

void require_nondegenerate(const op::EigenBasis& basis, double bin_tol) {
    if (bin_tol < 0.0) bin_tol = 1e-9 * basis.spread();
    for (Eigen::Index n = 1; n < basis.dim(); ++n) {
        const double gap = basis.energies[n] - basis.energies[n - 1];
        if (gap <= bin_tol)
            throw DegeneracyError(
                "degenerate spectrum: levels " + std::to_string(n - 1) + " and " +
                std::to_string(n) + " are separated by " + std::to_string(gap) +
                "; perturbative routes divide by this gap (use steady/evolve instead)");
    }
}

SteadySolution null_space_steady(const super::Superoperator& total) {
    const Eigen::Index d = total.sys_dim;
    const Eigen::Index n2 = d * d;
    const double scale = std::max(op::max_abs(total.matrix), 1e-300);

    Eigen::ComplexEigenSolver<Eigen::MatrixXcd> solver(total.matrix);
    if (solver.info() != Eigen::Success)
        throw ConvergenceError("null_space_steady: eigendecomposition failed");

    std::vector<Eigen::Index> order(static_cast<std::size_t>(n2));
    for (Eigen::Index i = 0; i < n2; ++i) order[static_cast<std::size_t>(i)] = i;
    std::sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
        return std::abs(solver.eigenvalues()[a]) < std::abs(solver.eigenvalues()[b]);
    });

    if (n2 > 1 && std::abs(solver.eigenvalues()[order[1]]) < 1e-10 * scale)
        throw ConvergenceError(
            "non-unique steady state: two eigenvalues within 1e-10 * |L| of zero (|l1| = " +
            std::to_string(std::abs(solver.eigenvalues()[order[0]])) + ", |l2| = " +
            std::to_string(std::abs(solver.eigenvalues()[order[1]])) + ")");

    // Complex eigenvalues pair up; among near-minimal moduli pick the one
    // with the smallest imaginary part so the state Hermitizes cleanly.
    const double min_mod = std::abs(solver.eigenvalues()[order[0]]);
    Eigen::Index pick = order[0];
    for (std::size_t k = 0; k < order.size(); ++k) {
        const Complex ev = solver.eigenvalues()[order[k]];
        if (std::abs(ev) > std::max(2.0 * min_mod, min_mod + 1e-14 * scale)) break;
        if (std::abs(ev.imag()) < std::abs(solver.eigenvalues()[pick].imag())) pick = order[k];
    }

    Eigen::VectorXcd v = solver.eigenvectors().col(pick);
    auto to_state = [&](const Eigen::VectorXcd& vec) {
        Matrix rho = op::devectorize(vec);
        rho = 0.5 * (rho + rho.adjoint()).eval();
        const Complex tr = rho.trace();
        if (std::abs(tr) < 1e-10)
            throw ConvergenceError("null_space_steady: candidate null vector is traceless");
        rho /= tr;
        return rho;
    };

    Matrix rho = to_state(v);
    double residual = op::max_abs(total.apply(rho));

    if (residual > 1e-9 * std::max(1.0, scale)) {
        // One round of shift-inverted iteration off a tiny shift.
        Eigen::MatrixXcd shifted = total.matrix;
        shifted.diagonal().array() -= Complex(1e-13 * scale, 0.0);
        Eigen::PartialPivLU<Eigen::MatrixXcd> lu(shifted);
        Eigen::VectorXcd x = v;
        for (int it = 0; it < 3; ++it) {
            x = lu.solve(x);
            const double nrm = x.norm();
            if (!(nrm > 0.0) || !std::isfinite(nrm)) break;
            x /= nrm;
            const Matrix candidate = to_state(x);
            const double r = op::max_abs(total.apply(candidate));
            if (r < residual) {
                rho = candidate;
                residual = r;
            }
        }
    }

    return {op::DensityMatrix(rho, op::StateBasis::Energy), residual,
            n2 > 1 ? std::abs(solver.eigenvalues()[order[1]]) : 0.0};
}

PerturbativeState redfield_perturbative(const op::EigenBasis& basis,
                                        const std::vector<op::BohrDecomposition>& bohr,
                                        const bath::BathModel& model) {
    require_channels(bohr, model, "redfield_perturbative");
    require_nondegenerate(basis, bohr.front().bin_tol);
    return {op::gibbs_state(basis, model.beta()),
            second_order_from_lamb_kernels(basis, bohr, model), Provenance::Redfield, true};
}

PerturbativeState mfg_second_order(const op::EigenBasis& basis,
                                   const std::vector<op::BohrDecomposition>& bohr,
                                   const bath::BathModel& model, MfgRoute route) {
    require_channels(bohr, model, "mfg_second_order");
    if (route == MfgRoute::Contour) {
        require_nondegenerate(basis, bohr.front().bin_tol);
        return {op::gibbs_state(basis, model.beta()),
                second_order_from_lamb_kernels(basis, bohr, model), Provenance::Mfg, true};
    }

    const Eigen::Index d = basis.dim();
    const int nch = model.channels();
    const double beta = model.beta();
    const double e_min = basis.energies.minCoeff();
    const Eigen::VectorXd shifted = basis.energies.array() - e_min;
    const double z = (-beta * shifted.array()).exp().sum();
    const Eigen::VectorXd p = op::gibbs_populations(basis, beta);

    const int n_nodes = std::max(model.settings().imag_time_nodes, 4);
    const quadr::Rule outer = quadr::gauss_on_interval(0.0, beta, n_nodes);
    const quadr::GaussLegendre inner_gl(n_nodes);

    auto decay = [&](double s) {
        return ((-s * shifted.array()).exp()).matrix().asDiagonal().toDenseMatrix().eval();
    };

    Matrix dmat = Matrix::Zero(d, d);
    for (std::size_t i = 0; i < outer.size(); ++i) {
        const double l1 = outer.nodes[i];
        const double w1 = outer.weights[i];
        const Eigen::MatrixXd d1 = decay(beta - l1);
        for (int q = 0; q < n_nodes; ++q) {
            const double l2 = 0.5 * l1 * (inner_gl.nodes[static_cast<std::size_t>(q)] + 1.0);
            const double w2 = 0.5 * l1 * inner_gl.weights[static_cast<std::size_t>(q)];
            const Eigen::MatrixXcd c = model.imag_time_corr(l1 - l2);
            const Eigen::MatrixXd d2 = decay(l1 - l2);
            const Eigen::MatrixXd d3 = decay(l2);
            for (int al = 0; al < nch; ++al) {
                const Matrix left = d1 * bohr[static_cast<std::size_t>(al)].a_eigen * d2;
                for (int ga = 0; ga < nch; ++ga) {
                    const Complex cval = c(al, ga);
                    if (cval == 0.0) continue;
                    dmat.noalias() += (w1 * w2) * cval *
                                      (left * bohr[static_cast<std::size_t>(ga)].a_eigen * d3);
                }
            }
        }
    }

    // The exact correction is Hermitian; the triangular quadrature breaks the
    // symmetry at its own error level, so fold it back.
    dmat = 0.5 * (dmat + dmat.adjoint()).eval();
    Matrix rho2 = normalized_correction(dmat / z, p);
    return {op::gibbs_state(basis, beta), std::move(rho2), Provenance::Mfg, true};
}

PerturbativeState ule_perturbative(const op::EigenBasis& basis,
                                   const std::vector<op::BohrDecomposition>& bohr,
                                   const bath::BathModel& model, bool include_lamb) {
    require_channels(bohr, model, "ule_perturbative");
    require_nondegenerate(basis, bohr.front().bin_tol);

    const Eigen::Index d = basis.dim();
    const int nch = model.channels();
    const double beta = model.beta();
    const Eigen::VectorXd p = op::gibbs_populations(basis, beta);

    auto a_of = [&](int ch) -> const Matrix& {
        return bohr[static_cast<std::size_t>(ch)].a_eigen;
    };

    Matrix rho2 = Matrix::Zero(d, d);

    for (Eigen::Index n = 0; n < d; ++n) {
        for (Eigen::Index m = 0; m < d; ++m) {
            if (n == m) continue;
            Complex acc = 0.0;
            for (Eigen::Index k = 0; k < d; ++k) {
                if (include_lamb) {
                    const Eigen::MatrixXcd f = model.f_function(basis.delta(k, n),
                                                                basis.delta(m, k));
                    for (int al = 0; al < nch; ++al)
                        for (int be = 0; be < nch; ++be)
                            acc += -kI * f(al, be) * a_of(al)(n, k) * a_of(be)(k, m) *
                                   (p[m] - p[n]);
                }
                const Eigen::MatrixXcd g_kn = model.g_kernel(basis.delta(k, n));
                const Eigen::MatrixXcd g_km = model.g_kernel(basis.delta(k, m));
                const Eigen::MatrixXcd g_nk = model.g_kernel(basis.delta(n, k));
                const Eigen::MatrixXcd g_mk = model.g_kernel(basis.delta(m, k));
                for (int be = 0; be < nch; ++be) {
                    for (int ga = 0; ga < nch; ++ga) {
                        const Complex amp = a_of(be)(n, k) * a_of(ga)(k, m);
                        if (amp == 0.0) continue;
                        for (int al = 0; al < nch; ++al) {
                            acc += amp * (g_kn(al, be) * g_km(ga, al) * p[k] -
                                          0.5 * g_nk(be, al) * g_mk(al, ga) * (p[m] + p[n]));
                        }
                    }
                }
            }
            rho2(n, m) = acc / (kI * basis.delta(n, m));
        }
    }

    if (include_lamb) {
        // Populations depend only on the Lamb-like term; without it the
        // second-order populations vanish identically.
        for (Eigen::Index n = 0; n < d; ++n) {
            Complex acc = 0.0;
            for (Eigen::Index k = 0; k < d; ++k) {
                const Eigen::MatrixXcd f = model.f_function(basis.delta(k, n),
                                                            basis.delta(n, k));
                for (int al = 0; al < nch; ++al)
                    for (int de = 0; de < nch; ++de)
                        acc += -beta * f(al, de) * a_of(al)(n, k) * a_of(de)(k, n) * p[n];
            }
            rho2(n, n) = acc;
        }
    }

    return {op::gibbs_state(basis, beta), normalized_correction(std::move(rho2), p),
            Provenance::Ule, true};
}

Eigen::VectorXd tle_populations_from_w(const Matrix& w, const Matrix& a_eigen) {
    const Eigen::Index d = a_eigen.rows();
    if (w.rows() != d || w.cols() != d)
        throw ValidationError("tle_populations_from_w: dimension mismatch");

    // Connectivity of the |A_nk|^2 > 0 graph decides uniqueness of the kernel.
    const double edge_tol = 1e-14 * std::max(op::max_abs(a_eigen), 1e-300);
    std::vector<bool> seen(static_cast<std::size_t>(d), false);
    std::queue<Eigen::Index> frontier;
    frontier.push(0);
    seen[0] = true;
    while (!frontier.empty()) {
        const Eigen::Index n = frontier.front();
        frontier.pop();
        for (Eigen::Index k = 0; k < d; ++k) {
            if (k == n || seen[static_cast<std::size_t>(k)]) continue;
            if (std::abs(a_eigen(n, k)) > edge_tol) {
                seen[static_cast<std::size_t>(k)] = true;
                frontier.push(k);
            }
        }
    }
    if (!std::all_of(seen.begin(), seen.end(), [](bool b) { return b; }))
        throw ValidationError(
            "tle_steady: non-unique leading order (coupling graph is disconnected)");

    // Balance: sum_k (|W_nk|^2 p_k - |W_kn|^2 p_n) |A_nk|^2 = 0, trace one.
    Eigen::MatrixXd rate = Eigen::MatrixXd::Zero(d, d);
    for (Eigen::Index n = 0; n < d; ++n) {
        for (Eigen::Index k = 0; k < d; ++k) {
            if (k == n) continue;
            const double a2 = std::norm(a_eigen(n, k));
            rate(n, k) += std::norm(w(n, k)) * a2;
            rate(n, n) -= std::norm(w(k, n)) * a2;
        }
    }
    Eigen::MatrixXd sys = Eigen::MatrixXd::Zero(d, d);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(d);
    sys.topRows(d - 1) = rate.topRows(d - 1);
    sys.row(d - 1).setOnes();
    rhs[d - 1] = 1.0;
    Eigen::VectorXd p = sys.partialPivLu().solve(rhs);
    if (p.minCoeff() < -1e-10)
        throw ConvergenceError("tle_steady: balance solve produced negative populations");
    p = p.cwiseMax(0.0);
    p /= p.sum();
    return p;
}

PerturbativeState tle_steady(const op::EigenBasis& basis, const op::HermitianOperator& coupling,
                             const bath::BathModel& model) {
    const super::TleParts parts = super::build_tle(basis, coupling, model);
    require_nondegenerate(basis, -1.0);

    const Eigen::Index d = basis.dim();
    const Matrix& a = parts.coupling;
    const Matrix& w = parts.w_matrix;
    const Matrix& g = parts.g_matrix;

    const Eigen::VectorXd p = tle_populations_from_w(w, a);
    Matrix rho0 = Matrix::Zero(d, d);
    rho0.diagonal() = p.cast<Complex>();

    // i Delta_nm rho2_nm = sum_k R_{nm,kk} p_k with the stationary rate tensor.
    Matrix rho2 = Matrix::Zero(d, d);
    for (Eigen::Index n = 0; n < d; ++n) {
        for (Eigen::Index m = 0; m < d; ++m) {
            if (n == m) continue;
            Complex acc = 0.0;
            for (Eigen::Index k = 0; k < d; ++k) {
                Complex r = w(n, k) * std::conj(w(m, k)) * a(n, k) * a(k, m);
                if (k == m) {
                    Complex sum = 0.0;
                    for (Eigen::Index j = 0; j < d; ++j)
                        sum += (g(j, k) - std::conj(g(j, n)) + std::conj(w(j, n)) * w(j, k)) *
                               a(n, j) * a(j, k);
                    r -= 0.5 * sum;
                }
                if (k == n) {
                    Complex sum = 0.0;
                    for (Eigen::Index j = 0; j < d; ++j)
                        sum += (std::conj(g(j, k)) - g(j, m) + std::conj(w(j, k)) * w(j, m)) *
                               a(k, j) * a(j, m);
                    r -= 0.5 * sum;
                }
                acc += r * p[k];
            }
            rho2(n, m) = acc / (kI * basis.delta(n, m));
        }
    }
    // Second-order populations are not determined for this family; the
    // correction carries coherences only and is already traceless.

    return {op::DensityMatrix(rho0, op::StateBasis::Energy), std::move(rho2), Provenance::Tle,
            true};
}

StateComparison compare_states(const op::DensityMatrix& a, const op::DensityMatrix& b) {
    if (a.dim() != b.dim()) throw ValidationError("compare_states: dimension mismatch");
    if (a.basis() != b.basis()) throw ValidationError("compare_states: basis mismatch");
    const Matrix diff = a.matrix() - b.matrix();

    StateComparison cmp;
    Eigen::SelfAdjointEigenSolver<Matrix> solver(0.5 * (diff + diff.adjoint()));
    cmp.trace_distance = 0.5 * solver.eigenvalues().cwiseAbs().sum();
    cmp.max_abs_diff = op::max_abs(diff);
    cmp.rel_population_diff.resize(a.dim());
    for (Eigen::Index n = 0; n < a.dim(); ++n) {
        const double bn = b.matrix()(n, n).real();
        cmp.rel_population_diff[n] = (a.matrix()(n, n).real() - bn) / bn;
    }
    return cmp;
}

HighTScanResult high_temperature_scan(const std::function<PerturbativeState(double)>& builder,
                                      const std::vector<double>& betas_descending,
                                      int max_threads) {
    if (betas_descending.size() < 3)
        throw ValidationError("high_temperature_scan: need at least three beta points");

    HighTScanResult out;
    out.rows.resize(betas_descending.size());
    par::parallel_for(
        betas_descending.size(),
        [&](std::size_t i) {
            const PerturbativeState ps = builder(betas_descending[i]);
            out.rows[i] = {betas_descending[i], op::max_abs(ps.rho2)};
        },
        max_threads);

    const std::size_t n = out.rows.size();
    out.vanishing = out.rows[n - 1].rho2_max < out.rows[n - 2].rho2_max &&
                    out.rows[n - 2].rho2_max < out.rows[n - 3].rho2_max;

    // Least-squares slope of ln|rho2| against ln(beta) over the last three rows.
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = n - 3; i < n; ++i) {
        const double x = std::log(out.rows[i].beta);
        const double y = std::log(std::max(out.rows[i].rho2_max, 1e-300));
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    out.tail_slope = (3.0 * sxy - sx * sy) / (3.0 * sxx - sx * sx);
    return out;
}

}  // namespace qme::steady
