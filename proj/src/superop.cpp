#include "qme/superop.hpp"

#include <unsupported/Eigen/KroneckerProduct>

#include <cmath>
#include <complex>
#include <iostream>

namespace qme::super {

using op::Matrix;
using Complex = std::complex<double>;

namespace {

constexpr Complex kI{0.0, 1.0};

// Union of per-channel Bohr frequency lists with per-channel block lookup;
// bins from different channels are identified within the common tolerance.
struct AlignedBohr {
    std::vector<double> freqs;
    std::vector<std::vector<const Matrix*>> blocks;  // [freq][channel], may be null
};

AlignedBohr align(const std::vector<op::BohrDecomposition>& bohr) {
    double tol = 0.0;
    for (const auto& b : bohr) tol = std::max(tol, b.bin_tol);
    tol = std::max(tol, 1e-300);

    struct Tagged {
        double freq;
        std::size_t channel, idx;
    };
    std::vector<Tagged> all;
    for (std::size_t c = 0; c < bohr.size(); ++c)
        for (std::size_t k = 0; k < bohr[c].size(); ++k)
            all.push_back({bohr[c].freqs[k], c, k});
    std::sort(all.begin(), all.end(),
              [](const Tagged& a, const Tagged& b) { return a.freq < b.freq; });

    AlignedBohr out;
    std::size_t start = 0;
    while (start < all.size()) {
        std::size_t stop = start + 1;
        while (stop < all.size() && all[stop].freq - all[stop - 1].freq <= tol) ++stop;
        double mean = 0.0;
        std::vector<const Matrix*> row(bohr.size(), nullptr);
        for (std::size_t k = start; k < stop; ++k) {
            mean += all[k].freq;
            row[all[k].channel] = &bohr[all[k].channel].blocks[all[k].idx];
        }
        out.freqs.push_back(mean / static_cast<double>(stop - start));
        out.blocks.push_back(std::move(row));
        start = stop;
    }
    return out;
}

void require_consistent(const op::EigenBasis& basis,
                        const std::vector<op::BohrDecomposition>& bohr,
                        const bath::BathModel& model, const char* who) {
    if (bohr.empty()) throw ValidationError(std::string(who) + ": no coupling channels");
    if (static_cast<int>(bohr.size()) != model.channels())
        throw ValidationError(std::string(who) +
                              ": channel count differs between decomposition and bath");
    for (const auto& b : bohr)
        if (b.dim() != basis.dim())
            throw ValidationError(std::string(who) + ": dimension mismatch");
}

}  // namespace

const char* family_name(Family f) {
    switch (f) {
        case Family::Free: return "free";
        case Family::RedfieldS: return "redfield_S";
        case Family::RedfieldGamma: return "redfield_gamma";
        case Family::SecularLS: return "secular_LS";
        case Family::SecularDiss: return "secular_diss";
        case Family::UleLamb: return "ule_lamb";
        case Family::UleDiss: return "ule_diss";
        case Family::TleLS: return "tle_LS";
        case Family::TleDiss: return "tle_diss";
        case Family::Total: return "total";
    }
    return "?";
}

Superoperator Superoperator::zero(Eigen::Index d, Family f) {
    return {Eigen::MatrixXcd::Zero(d * d, d * d), f, d};
}

Matrix Superoperator::apply(const Matrix& rho) const {
    if (rho.rows() != sys_dim || rho.cols() != sys_dim)
        throw ValidationError("Superoperator::apply: dimension mismatch");
    return op::devectorize((matrix * op::vectorize(rho)).eval());
}

Eigen::MatrixXcd left_mult(const Matrix& x) {
    return Eigen::kroneckerProduct(Matrix::Identity(x.rows(), x.cols()), x);
}

Eigen::MatrixXcd right_mult(const Matrix& y) {
    return Eigen::kroneckerProduct(y.transpose(), Matrix::Identity(y.rows(), y.cols()));
}

Eigen::MatrixXcd sandwich(const Matrix& x, const Matrix& y) {
    return Eigen::kroneckerProduct(y.transpose(), x);
}

Superoperator build_free(const op::EigenBasis& basis) {
    const Eigen::Index d = basis.dim();
    Superoperator sop = Superoperator::zero(d, Family::Free);
    for (Eigen::Index j = 0; j < d; ++j)
        for (Eigen::Index i = 0; i < d; ++i)
            sop.matrix(j * d + i, j * d + i) = -kI * basis.delta(i, j);
    return sop;
}

RedfieldParts build_redfield(const op::EigenBasis& basis,
                             const std::vector<op::BohrDecomposition>& bohr,
                             const bath::BathModel& model) {
    require_consistent(basis, bohr, model, "build_redfield");
    const Eigen::Index d = basis.dim();
    const int nch = model.channels();
    const AlignedBohr ab = align(bohr);

    Superoperator part_s = Superoperator::zero(d, Family::RedfieldS);
    Superoperator part_g = Superoperator::zero(d, Family::RedfieldGamma);

    std::vector<Eigen::MatrixXcd> s_at(ab.freqs.size()), gamma_at(ab.freqs.size());
    for (std::size_t k = 0; k < ab.freqs.size(); ++k) {
        s_at[k] = model.lamb_shift(ab.freqs[k]);
        gamma_at[k] = model.gamma(ab.freqs[k]);
    }

    for (std::size_t iw = 0; iw < ab.freqs.size(); ++iw) {
        for (std::size_t iwp = 0; iwp < ab.freqs.size(); ++iwp) {
            for (int be = 0; be < nch; ++be) {
                for (int al = 0; al < nch; ++al) {
                    const Complex s = s_at[iw](al, be);
                    const Complex g = gamma_at[iw](al, be);
                    if (std::abs(s) < 1e-300 && std::abs(g) < 1e-300) continue;

                    const Matrix* b_w = ab.blocks[iw][static_cast<std::size_t>(be)];
                    const Matrix* b_wp = ab.blocks[iwp][static_cast<std::size_t>(be)];
                    const Matrix* a_w = ab.blocks[iw][static_cast<std::size_t>(al)];
                    const Matrix* a_wp = ab.blocks[iwp][static_cast<std::size_t>(al)];

                    // Pieces of both decompositions share the same operator
                    // skeleton: combos (A_beta(x) rho A_alpha(y)^dag) and the
                    // one-sided products.
                    if (b_w && a_wp) {
                        const Eigen::MatrixXcd sw = sandwich(*b_w, a_wp->adjoint());
                        part_s.matrix.noalias() += (-kI * s) * (-1.0) * sw;
                        part_g.matrix.noalias() += (0.5 * g) * sw;
                        const Eigen::MatrixXcd lm = left_mult((a_wp->adjoint() * *b_w).eval());
                        part_s.matrix.noalias() += (-kI * s) * lm;
                        part_g.matrix.noalias() += (0.5 * g) * (-1.0) * lm;
                    }
                    if (b_wp && a_w) {
                        const Eigen::MatrixXcd sw = sandwich(*b_wp, a_w->adjoint());
                        part_s.matrix.noalias() += (-kI * s) * sw;
                        part_g.matrix.noalias() += (0.5 * g) * sw;
                        const Eigen::MatrixXcd rm = right_mult((a_w->adjoint() * *b_wp).eval());
                        part_s.matrix.noalias() += (-kI * s) * (-1.0) * rm;
                        part_g.matrix.noalias() += (0.5 * g) * (-1.0) * rm;
                    }
                }
            }
        }
    }
    return {std::move(part_s), std::move(part_g)};
}

SecularParts build_secular(const op::EigenBasis& basis,
                           const std::vector<op::BohrDecomposition>& bohr,
                           const bath::BathModel& model) {
    require_consistent(basis, bohr, model, "build_secular");
    const Eigen::Index d = basis.dim();
    const int nch = model.channels();
    const AlignedBohr ab = align(bohr);

    Matrix h_ls = Matrix::Zero(d, d);
    Superoperator diss = Superoperator::zero(d, Family::SecularDiss);

    for (std::size_t iw = 0; iw < ab.freqs.size(); ++iw) {
        const Eigen::MatrixXcd s_mat = model.lamb_shift(ab.freqs[iw]);
        const Eigen::MatrixXcd g_mat = model.gamma(ab.freqs[iw]);
        for (int be = 0; be < nch; ++be) {
            const Matrix* b = ab.blocks[iw][static_cast<std::size_t>(be)];
            if (!b) continue;
            for (int al = 0; al < nch; ++al) {
                const Matrix* a = ab.blocks[iw][static_cast<std::size_t>(al)];
                if (!a) continue;
                const Complex s = s_mat(al, be);
                const Complex g = g_mat(al, be);
                const Matrix ad_b = (a->adjoint() * *b).eval();
                h_ls.noalias() += s * ad_b;
                if (std::abs(g) > 1e-300) {
                    diss.matrix.noalias() += g * sandwich(*b, a->adjoint());
                    diss.matrix.noalias() -= (0.5 * g) * (left_mult(ad_b) + right_mult(ad_b));
                }
            }
        }
    }

    Superoperator ls = Superoperator::zero(d, Family::SecularLS);
    ls.matrix = -kI * (left_mult(h_ls) - right_mult(h_ls));
    return {std::move(ls), std::move(diss), std::move(h_ls)};
}

UleParts build_ule(const op::EigenBasis& basis, const std::vector<op::BohrDecomposition>& bohr,
                   const bath::BathModel& model, bool include_lamb) {
    require_consistent(basis, bohr, model, "build_ule");
    const Eigen::Index d = basis.dim();
    const int nch = model.channels();
    const AlignedBohr ab = align(bohr);

    // Jump operators L_alpha = sum_beta sum_w g_{alpha beta}(w) A_beta(w).
    std::vector<Matrix> jumps(static_cast<std::size_t>(nch), Matrix::Zero(d, d));
    for (std::size_t iw = 0; iw < ab.freqs.size(); ++iw) {
        const Eigen::MatrixXcd g_mat = model.g_kernel(ab.freqs[iw]);
        for (int be = 0; be < nch; ++be) {
            const Matrix* b = ab.blocks[iw][static_cast<std::size_t>(be)];
            if (!b) continue;
            for (int al = 0; al < nch; ++al) {
                const Complex g = g_mat(al, be);
                if (std::abs(g) > 1e-300) jumps[static_cast<std::size_t>(al)].noalias() += g * *b;
            }
        }
    }

    UleParts parts;
    parts.diss = Superoperator::zero(d, Family::UleDiss);
    for (const Matrix& L : jumps) {
        const Matrix ldl = (L.adjoint() * L).eval();
        parts.diss.matrix.noalias() += sandwich(L, L.adjoint());
        parts.diss.matrix.noalias() -= 0.5 * (left_mult(ldl) + right_mult(ldl));
    }
    parts.jump_ops = std::move(jumps);
    parts.lambda_op = Matrix::Zero(d, d);

    if (include_lamb) {
        Matrix lambda = Matrix::Zero(d, d);
        for (std::size_t iw = 0; iw < ab.freqs.size(); ++iw) {
            for (std::size_t iwp = 0; iwp < ab.freqs.size(); ++iwp) {
                const Eigen::MatrixXcd f_mat = model.f_function(ab.freqs[iw], ab.freqs[iwp]);
                for (int al = 0; al < nch; ++al) {
                    const Matrix* a = ab.blocks[iw][static_cast<std::size_t>(al)];
                    if (!a) continue;
                    for (int be = 0; be < nch; ++be) {
                        const Matrix* b = ab.blocks[iwp][static_cast<std::size_t>(be)];
                        if (!b) continue;
                        const Complex f = f_mat(al, be);
                        if (std::abs(f) > 1e-300) lambda.noalias() += f * (*a * *b);
                    }
                }
            }
        }
        Superoperator lamb = Superoperator::zero(d, Family::UleLamb);
        lamb.matrix = -kI * (left_mult(lambda) - right_mult(lambda));
        parts.lamb = std::move(lamb);
        parts.lambda_op = std::move(lambda);
    }
    return parts;
}

TleParts build_tle(const op::EigenBasis& basis, const op::HermitianOperator& coupling,
                   const bath::BathModel& model) {
    if (model.channels() != 1)
        throw ValidationError("build_tle: the truncated Lindblad builder is single-channel");
    if (coupling.dim() != basis.dim())
        throw ValidationError("build_tle: coupling dimension mismatch");
    const Eigen::Index d = basis.dim();

    Matrix a = basis.to_eigen(coupling.matrix());
    const double frob = a.norm();
    if (!(frob > 0.0)) throw ValidationError("build_tle: coupling operator vanishes");
    if (std::abs(frob - 1.0) > 1e-9)
        std::cerr << "build_tle: rescaling coupling by 1/" << frob
                  << " to meet the unit normalization; fold the factor into epsilon\n";
    a /= frob;

    // G_nm = int_0^inf dt exp(-i Delta_nm t) C(t), the half-line transform at
    // the negated gap.
    Matrix g_mat(d, d);
    for (Eigen::Index n = 0; n < d; ++n)
        for (Eigen::Index m = 0; m < d; ++m)
            g_mat(n, m) = model.half_fourier(-basis.delta(n, m))(0, 0);

    double gbar_sq = 0.0, hbar_sq = 0.0, hbar = 0.0;
    for (Eigen::Index n = 0; n < d; ++n) {
        for (Eigen::Index m = 0; m < d; ++m) {
            const double w2 = std::norm(a(n, m));
            gbar_sq += w2 * g_mat(n, m).real() * g_mat(n, m).real();
            hbar_sq += w2 * g_mat(n, m).imag() * g_mat(n, m).imag();
            hbar += w2 * g_mat(n, m).imag();
        }
    }
    const double quart = std::sqrt(gbar_sq + hbar_sq);  // lambda^4
    if (!(quart > 0.0)) throw ConvergenceError("TLE optimization degenerate: vanishing kernels");
    const double sin_phi = hbar / quart;
    const double cos_sq = 1.0 - sin_phi * sin_phi;
    if (cos_sq <= 1e-12)
        throw ConvergenceError("TLE optimization degenerate: cos(phi) <= 0");
    const double phi = std::asin(sin_phi);
    const double lambda = std::pow(quart, 0.25);
    const Complex lambda_plus = lambda * std::exp(-kI * (0.5 * phi));
    const double norm_w = 1.0 / std::sqrt(2.0 * std::cos(phi));

    Matrix w_mat(d, d), jump(d, d);
    for (Eigen::Index n = 0; n < d; ++n) {
        for (Eigen::Index m = 0; m < d; ++m) {
            w_mat(n, m) = norm_w * (lambda_plus + g_mat(n, m) / lambda_plus);
            jump(n, m) = w_mat(n, m) * a(n, m);
        }
    }

    // H_LS = (A M - M^dag A) / 2i with M = G elementwise A.
    const Matrix m_op = g_mat.cwiseProduct(a);
    const Matrix h_ls = (a * m_op - m_op.adjoint() * a) / (2.0 * kI);

    TleParts parts;
    parts.lamb = Superoperator::zero(d, Family::TleLS);
    parts.lamb.matrix = -kI * (left_mult(h_ls) - right_mult(h_ls));
    parts.diss = Superoperator::zero(d, Family::TleDiss);
    const Matrix ldl = (jump.adjoint() * jump).eval();
    parts.diss.matrix = sandwich(jump, jump.adjoint()) -
                        0.5 * (left_mult(ldl) + right_mult(ldl));
    parts.params = {lambda, phi, gbar_sq, hbar_sq, hbar, frob};
    parts.jump_op = std::move(jump);
    parts.w_matrix = std::move(w_mat);
    parts.g_matrix = std::move(g_mat);
    parts.coupling = std::move(a);
    return parts;
}

Superoperator combine(const Superoperator& free_part,
                      const std::vector<const Superoperator*>& parts, double epsilon) {
    Superoperator total = free_part;
    total.family = Family::Total;
    const double e2 = epsilon * epsilon;
    for (const Superoperator* p : parts) {
        if (!p) continue;
        if (p->sys_dim != free_part.sys_dim)
            throw ValidationError("combine: dimension mismatch");
        total.matrix.noalias() += e2 * p->matrix;
    }
    return total;
}

Eigen::VectorXd kossakowski_spectrum(const Superoperator& sop) {
    const Eigen::Index d = sop.sys_dim;
    Eigen::MatrixXcd choi = Eigen::MatrixXcd::Zero(d * d, d * d);
    // Choi matrix of the map: J_{(a d + i),(b d + j)} = L_{(b d + a),(j d + i)}.
    for (Eigen::Index a = 0; a < d; ++a)
        for (Eigen::Index i = 0; i < d; ++i)
            for (Eigen::Index b = 0; b < d; ++b)
                for (Eigen::Index j = 0; j < d; ++j)
                    choi(a * d + i, b * d + j) = sop.matrix(b * d + a, j * d + i);

    Eigen::VectorXcd omega = Eigen::VectorXcd::Zero(d * d);
    for (Eigen::Index i = 0; i < d; ++i) omega(i * d + i) = 1.0 / std::sqrt(double(d));
    const Eigen::MatrixXcd q =
        Eigen::MatrixXcd::Identity(d * d, d * d) - omega * omega.adjoint();
    Eigen::MatrixXcd restricted = q * choi * q;
    restricted = 0.5 * (restricted + restricted.adjoint()).eval();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> solver(restricted);
    return solver.eigenvalues();
}

}  // namespace qme::super
