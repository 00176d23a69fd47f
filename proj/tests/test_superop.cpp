#include "doctest.h"

#include <cmath>
#include <complex>
#include <random>

#include "qme/models.hpp"
#include "qme/superop.hpp"
#include "test_helpers.hpp"

using namespace qme;
using test::Matrix;
using Complex = std::complex<double>;

namespace {

models::Model fig2_model() {
    return models::build_spin_boson({1.0, 1.0, 1.0, 1.0, 1.0, 10.0, 1.0});
}

// Trace and Hermiticity preservation, shared by every family.
void check_preservation(const super::Superoperator& sop) {
    const Eigen::Index d = sop.sys_dim;
    const double scale = std::max(test::max_abs(sop.matrix), 1.0);

    Eigen::RowVectorXcd id_left = op::vectorize(Matrix::Identity(d, d)).transpose();
    CHECK(test::max_abs((id_left * sop.matrix).transpose().eval()) < 1e-10 * scale);

    std::mt19937 rng(1234);
    for (int rep = 0; rep < 10; ++rep) {
        const Matrix rho = test::random_matrix(d, rng);
        const Matrix lhs = sop.apply(rho.adjoint().eval());
        const Matrix rhs = sop.apply(rho).adjoint();
        CHECK(test::max_abs(lhs - rhs) < 1e-10 * scale * test::max_abs(rho));
    }
}

}  // namespace

TEST_SUITE_BEGIN("superop");

TEST_CASE("free part leaves populations untouched and rotates coherences") {
    const auto model = fig2_model();
    const auto free_part = super::build_free(model.basis);

    Matrix pop = Matrix::Zero(2, 2);
    pop(0, 0) = 1.0;
    CHECK(test::max_abs(free_part.apply(pop)) == 0.0);

    Matrix coh = Matrix::Zero(2, 2);
    coh(1, 0) = 1.0;  // |+><-| coherence at gap +omega0
    const Matrix out = free_part.apply(coh);
    CHECK(std::abs(out(1, 0) - Complex(0.0, -1.0)) < 1e-14);  // -i omega0, omega0 = 1

    check_preservation(free_part);
}

TEST_CASE("free evolution preserves eigenvalues of random states") {
    std::mt19937 rng(5);
    const auto model = fig2_model();
    const auto free_part = super::build_free(model.basis);
    const Matrix rho = test::random_density(2, rng);
    Eigen::SelfAdjointEigenSolver<Matrix> before(rho);

    for (double t : {0.3, 2.0}) {
        // exp(L0 t) acts as elementwise phases in vectorized space.
        Eigen::VectorXcd v = op::vectorize(rho);
        for (Eigen::Index k = 0; k < v.size(); ++k)
            v[k] *= std::exp(free_part.matrix(k, k) * t);
        Eigen::SelfAdjointEigenSolver<Matrix> after(op::devectorize(v));
        CHECK((before.eigenvalues() - after.eigenvalues()).cwiseAbs().maxCoeff() < 1e-12);
    }
}

TEST_CASE("redfield gamma part annihilates the Gibbs state, the S part does not") {
    const auto model = fig2_model();
    const auto parts = super::build_redfield(model.basis, model.bohr, model.bath);
    const Matrix gibbs = op::gibbs_state(model.basis, model.bath.beta()).matrix();

    CHECK(test::max_abs(parts.gamma_part.apply(gibbs)) < 1e-9);
    CHECK(test::max_abs(parts.s_part.apply(gibbs)) > 1e-6);

    check_preservation(parts.s_part);
    check_preservation(parts.gamma_part);
}

TEST_CASE("redfield sum matches the direct time-domain assembly") {
    const auto model = fig2_model();
    const auto parts = super::build_redfield(model.basis, model.bohr, model.bath);
    const Matrix total = parts.s_part.matrix + parts.gamma_part.matrix;

    // Independent route: L[rho] = -int_0^T ds ( C(s) [A, A(-s) rho] + h.c. )
    // with A(-s) the interaction-picture coupling at negative time.
    const Matrix a = model.bohr[0].a_eigen;
    const Eigen::Index d = 2;
    Matrix oracle = Matrix::Zero(d * d, d * d);
    quadr::Rule rule;
    const quadr::GaussLegendre gl(24);
    double left = 0.0;
    const double t_max = 8.0;
    for (double right = t_max * std::pow(0.5, 30); right < t_max; right *= 2.0) {
        rule.add_panel(left, right, gl);
        left = right;
    }
    rule.add_panel(left, t_max, gl);

    for (std::size_t i = 0; i < rule.size(); ++i) {
        const double s = rule.nodes[i];
        const Complex c = model.bath.corr_time(s)(0, 0);
        Matrix a_back(d, d);
        for (Eigen::Index n = 0; n < d; ++n)
            for (Eigen::Index m = 0; m < d; ++m)
                a_back(n, m) =
                    std::exp(Complex(0.0, -s * model.basis.delta(n, m))) * a(n, m);
        const Matrix ab = (a * a_back).eval();
        const Matrix ba = (a_back * a).eval();
        oracle -= rule.weights[i] *
                  (c * (super::left_mult(ab) - super::sandwich(a_back, a)) +
                   std::conj(c) * (super::right_mult(ba) - super::sandwich(a, a_back)));
    }
    CHECK(test::max_abs(oracle - total) < 1e-3 * test::max_abs(total));
}

TEST_CASE("secular generator is Lindblad with a commuting Lamb shift") {
    const auto model = fig2_model();
    const auto parts = super::build_secular(model.basis, model.bohr, model.bath);
    const Matrix gibbs = op::gibbs_state(model.basis, model.bath.beta()).matrix();

    // Full secular generator annihilates the Gibbs state.
    CHECK(test::max_abs(parts.ls.apply(gibbs) + parts.diss.apply(gibbs)) < 1e-9);

    CHECK(test::max_abs(parts.h_ls - parts.h_ls.adjoint()) < 1e-10);
    Matrix h_s = Matrix::Zero(2, 2);
    h_s.diagonal() = model.basis.energies.cast<Complex>();
    CHECK(test::max_abs(parts.h_ls * h_s - h_s * parts.h_ls) < 1e-10);

    check_preservation(parts.ls);
    check_preservation(parts.diss);

    // The dissipator is completely positive: restricted Choi spectrum >= 0.
    const Eigen::VectorXd kossakowski = super::kossakowski_spectrum(parts.diss);
    CHECK(kossakowski.minCoeff() > -1e-10 * std::max(1.0, kossakowski.maxCoeff()));
}

TEST_CASE("secular equals redfield on the population-population block") {
    const auto model = fig2_model();  // distinct Bohr gaps
    const auto red = super::build_redfield(model.basis, model.bohr, model.bath);
    const auto sec = super::build_secular(model.basis, model.bohr, model.bath);
    const Matrix r_total = red.s_part.matrix + red.gamma_part.matrix;
    const Matrix s_total = sec.ls.matrix + sec.diss.matrix;
    const Eigen::Index d = 2;
    for (Eigen::Index n = 0; n < d; ++n)
        for (Eigen::Index k = 0; k < d; ++k)
            CHECK(std::abs(r_total(n * d + n, k * d + k) - s_total(n * d + n, k * d + k)) <
                  1e-6 * test::max_abs(r_total));
}

TEST_CASE("ule dissipator leaves Gibbs populations stationary but the state moves") {
    const auto model = fig2_model();
    const auto parts = super::build_ule(model.basis, model.bohr, model.bath, true);
    const Matrix gibbs = op::gibbs_state(model.basis, model.bath.beta()).matrix();

    const Matrix moved = parts.diss.apply(gibbs);
    for (Eigen::Index n = 0; n < 2; ++n) CHECK(std::abs(moved(n, n)) < 1e-9);

    // The full generator does not annihilate the Gibbs state.
    const Matrix total_move = moved + parts.lamb->apply(gibbs);
    CHECK(test::max_abs(total_move) > 1e-6);

    CHECK(test::max_abs(parts.lambda_op - parts.lambda_op.adjoint()) < 1e-10);

    check_preservation(parts.diss);
    check_preservation(*parts.lamb);

    const Eigen::VectorXd kossakowski = super::kossakowski_spectrum(parts.diss);
    CHECK(kossakowski.minCoeff() > -1e-10 * std::max(1.0, kossakowski.maxCoeff()));
}

TEST_CASE("ule without the lamb term omits it") {
    const auto model = fig2_model();
    const auto parts = super::build_ule(model.basis, model.bohr, model.bath, false);
    CHECK(!parts.lamb.has_value());
    CHECK(test::max_abs(parts.lambda_op) == 0.0);
}

TEST_CASE("ule agrees with redfield on secular elements for well-separated gaps") {
    // Two-level splitting fifty times the kernel width.
    models::SpinBosonSpec spec{50.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0};
    const auto model = models::build_spin_boson(spec);
    const auto red = super::build_redfield(model.basis, model.bohr, model.bath);
    const auto ule = super::build_ule(model.basis, model.bohr, model.bath, true);
    const Matrix r_total = red.s_part.matrix + red.gamma_part.matrix;
    const Matrix u_total = ule.lamb->matrix + ule.diss.matrix;
    const Eigen::Index d = 2;
    for (Eigen::Index n = 0; n < d; ++n)
        for (Eigen::Index k = 0; k < d; ++k) {
            const Complex a = r_total(n * d + n, k * d + k);
            const Complex b = u_total(n * d + n, k * d + k);
            CHECK(std::abs(a - b) <= 1e-6 * std::max(std::abs(a), 1e-12));
        }
}

TEST_CASE("redfield generator is not conditionally completely positive") {
    const auto model = fig2_model();
    const auto parts = super::build_redfield(model.basis, model.bohr, model.bath);
    super::Superoperator total = parts.s_part;
    total.matrix += parts.gamma_part.matrix;
    const Eigen::VectorXd spectrum = super::kossakowski_spectrum(total);
    CHECK(spectrum.minCoeff() < -1e-6);
}

TEST_CASE("tle builder produces a rank-one Lindblad dissipator") {
    const auto model = fig2_model();
    const auto parts = super::build_tle(model.basis, model.couplings[0], model.bath);

    check_preservation(parts.lamb);
    check_preservation(parts.diss);

    const Eigen::VectorXd spectrum = super::kossakowski_spectrum(parts.diss);
    const double top = spectrum.maxCoeff();
    CHECK(top > 0.0);
    CHECK(spectrum.minCoeff() > -1e-10 * top);
    // Rank one: every other eigenvalue is numerically zero.
    int positive = 0;
    for (Eigen::Index i = 0; i < spectrum.size(); ++i)
        if (spectrum[i] > 1e-10 * top) ++positive;
    CHECK(positive == 1);

    // sigma_x + sigma_y + sigma_z has squared Frobenius norm 6.
    CHECK(parts.params.rescale == doctest::Approx(std::sqrt(6.0)));
    CHECK(std::abs(parts.coupling.norm() - 1.0) < 1e-12);
}

TEST_CASE("tle optimized parameters and the phi = 0 specialization") {
    // Symmetric tabulated kernel: S is odd, so the Im(G)-average vanishes and
    // the optimized phase is zero; W then reduces to (lambda + G/lambda)/sqrt(2).
    std::vector<std::pair<double, double>> samples;
    for (int i = -200; i <= 200; ++i) {
        const double w = 0.05 * i;
        samples.emplace_back(w, std::exp(-w * w));
    }
    bath::BathModel bathm(1.0, {bath::SpectralDensity::tabulated(samples)}, {}, 2.0);
    const auto basis = op::eigh(op::HermitianOperator((0.5 * op::pauli_z()).eval()));
    const auto parts = super::build_tle(basis, op::HermitianOperator(op::pauli_x()), bathm);

    CHECK(std::abs(parts.params.phi) < 1e-10);
    const double lambda = parts.params.lambda;
    for (Eigen::Index n = 0; n < 2; ++n)
        for (Eigen::Index m = 0; m < 2; ++m) {
            const Complex expect =
                (lambda + parts.g_matrix(n, m) / lambda) / std::sqrt(2.0);
            CHECK(std::abs(parts.w_matrix(n, m) - expect) < 1e-10);
        }
}

TEST_CASE("tle rate tensor conserves probability") {
    // sum_n R_{nn,kk} = 0 for each k: feed population basis states through the
    // assembled generator and inspect the trace of the image.
    const auto model = fig2_model();
    const auto parts = super::build_tle(model.basis, model.couplings[0], model.bath);
    for (Eigen::Index k = 0; k < 2; ++k) {
        Matrix pop = Matrix::Zero(2, 2);
        pop(k, k) = 1.0;
        const Matrix image = parts.lamb.apply(pop) + parts.diss.apply(pop);
        CHECK(std::abs(image(0, 0) + image(1, 1)) < 1e-12);
    }
}

TEST_CASE("assembled ule generator matches its element tensor entry by entry") {
    // Single channel: the lamb-like part contributes
    //   -i [ delta_lm f(D_jn, D_kj) A_nj A_jk - delta_kn f(D_jl, D_mj) A_lj A_jm ]
    // summed over j, and the dissipator contributes
    //   g(D_kn) g(D_lm) A_nk A_lm
    //   - 1/2 delta_lm sum_j g(D_nj) g(D_kj) A_nj A_jk
    //   - 1/2 delta_kn sum_j g(D_lj) g(D_mj) A_lj A_jm
    // at tensor slot (nm, kl).
    const auto model = fig2_model();
    const auto parts = super::build_ule(model.basis, model.bohr, model.bath, true);
    const auto& basis = model.basis;
    const Matrix a = model.bohr[0].a_eigen;
    const Eigen::Index d = 2;
    auto delta = [&](Eigen::Index n, Eigen::Index m) { return basis.delta(n, m); };
    auto g = [&](double w) { return model.bath.g_kernel(w)(0, 0).real(); };
    auto f = [&](double w, double wp) { return model.bath.f_function(w, wp)(0, 0).real(); };

    Matrix ref = Matrix::Zero(d * d, d * d);
    for (Eigen::Index n = 0; n < d; ++n)
        for (Eigen::Index m = 0; m < d; ++m)
            for (Eigen::Index k = 0; k < d; ++k)
                for (Eigen::Index l = 0; l < d; ++l) {
                    Complex lamb = 0.0;
                    if (l == m)
                        for (Eigen::Index j = 0; j < d; ++j)
                            lamb += f(delta(j, n), delta(k, j)) * a(n, j) * a(j, k);
                    if (k == n)
                        for (Eigen::Index j = 0; j < d; ++j)
                            lamb -= f(delta(j, l), delta(m, j)) * a(l, j) * a(j, m);
                    Complex diss = g(delta(k, n)) * g(delta(l, m)) * a(n, k) * a(l, m);
                    if (l == m) {
                        Complex sum = 0.0;
                        for (Eigen::Index j = 0; j < d; ++j)
                            sum += g(delta(n, j)) * g(delta(k, j)) * a(n, j) * a(j, k);
                        diss -= 0.5 * sum;
                    }
                    if (k == n) {
                        Complex sum = 0.0;
                        for (Eigen::Index j = 0; j < d; ++j)
                            sum += g(delta(l, j)) * g(delta(m, j)) * a(l, j) * a(j, m);
                        diss -= 0.5 * sum;
                    }
                    ref(m * d + n, l * d + k) = Complex(0.0, -1.0) * lamb + diss;
                }

    const Matrix built = parts.lamb->matrix + parts.diss.matrix;
    CHECK(test::max_abs(built - ref) < 1e-13 * test::max_abs(built));
}

TEST_CASE("combine scales dissipative parts by epsilon squared") {
    const auto model = fig2_model();
    const auto free_part = super::build_free(model.basis);
    const auto parts = super::build_ule(model.basis, model.bohr, model.bath, true);
    const double eps = 0.3;
    const auto total = super::combine(free_part, {&*parts.lamb, &parts.diss}, eps);
    const Matrix expect =
        free_part.matrix + eps * eps * (parts.lamb->matrix + parts.diss.matrix);
    CHECK(test::max_abs(total.matrix - expect) < 1e-15);
    CHECK(total.family == super::Family::Total);
}

TEST_SUITE_END();
