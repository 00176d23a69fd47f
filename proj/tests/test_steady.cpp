#include "doctest.h"

#include <cmath>
#include <complex>

#include "qme/models.hpp"
#include "qme/steady.hpp"
#include "qme/superop.hpp"
#include "test_helpers.hpp"

using namespace qme;
using test::Matrix;
using Complex = std::complex<double>;

namespace {

models::SpinBosonSpec fig2_spec(double beta = 1.0) {
    // c_x = c_y = c_z = J0 = 1 with beta * omega_d pinned at 10.
    return {1.0, 1.0, 1.0, 1.0, 1.0, 10.0 / beta, beta};
}

super::Superoperator ule_total(const models::Model& model, double eps, bool lamb = true) {
    const auto free_part = super::build_free(model.basis);
    const auto parts = super::build_ule(model.basis, model.bohr, model.bath, lamb);
    std::vector<const super::Superoperator*> ptrs{&parts.diss};
    if (parts.lamb) ptrs.push_back(&*parts.lamb);
    return super::combine(free_part, ptrs, eps);
}

}  // namespace

TEST_SUITE_BEGIN("steady");

TEST_CASE("null space of the secular generator is the Gibbs state") {
    const auto model = models::build_spin_boson(fig2_spec());
    const auto sec = super::build_secular(model.basis, model.bohr, model.bath);
    const auto total =
        super::combine(super::build_free(model.basis), {&sec.ls, &sec.diss}, 0.2);
    const auto sol = steady::null_space_steady(total);
    const Matrix gibbs = op::gibbs_state(model.basis, model.bath.beta()).matrix();
    CHECK(test::max_abs(sol.rho.matrix() - gibbs) < 1e-8);
    CHECK(sol.residual < 1e-9 * std::max(1.0, test::max_abs(total.matrix)));
}

TEST_CASE("free part alone has a degenerate null space") {
    const auto model = models::build_spin_boson(fig2_spec());
    const auto free_part = super::build_free(model.basis);
    CHECK_THROWS_AS(steady::null_space_steady(free_part), ConvergenceError);
}

TEST_CASE("ule null-space steady state matches the perturbative expansion to O(eps^4)") {
    // Lamb-like term ignored: the second-order populations vanish identically
    // and the remainder is a clean eps^4. The remainder-over-eps^4 ratio must
    // stay bounded.
    const auto model = models::build_spin_boson(fig2_spec());
    const auto pert = steady::ule_perturbative(model.basis, model.bohr, model.bath, false);
    double ratio_min = 1e300, ratio_max = 0.0;
    for (double eps : {0.05, 0.1, 0.2}) {
        const auto sol = steady::null_space_steady(ule_total(model, eps, false));
        const Matrix expansion = pert.rho0.matrix() + eps * eps * pert.rho2;
        const double diff = test::max_abs(sol.rho.matrix() - expansion);
        CHECK(diff < 5.0 * std::pow(eps, 4));
        ratio_min = std::min(ratio_min, diff / std::pow(eps, 4));
        ratio_max = std::max(ratio_max, diff / std::pow(eps, 4));
    }
    CHECK(ratio_max < 1.5 * ratio_min);
}

TEST_CASE("with the lamb term the continuation gives coherences of the fixed point "
          "but different populations") {
    // The gap -> 0 limit of the coherence formula is the method's definition
    // of the second-order populations; it reproduces the generator's exact
    // coherences yet differs from the populations the generator relaxes to.
    const auto model = models::build_spin_boson(fig2_spec());
    const auto pert = steady::ule_perturbative(model.basis, model.bohr, model.bath, true);
    for (double eps : {0.05, 0.1}) {
        const auto sol = steady::null_space_steady(ule_total(model, eps, true));
        const Matrix remainder =
            sol.rho.matrix() - pert.rho0.matrix() - eps * eps * pert.rho2;
        CHECK(std::abs(remainder(1, 0)) < 5.0 * std::pow(eps, 4));
        // Populations: a genuine O(eps^2) difference between the two objects.
        CHECK(std::abs(remainder(0, 0)) > 1e-2 * eps * eps);
    }
}

TEST_CASE("redfield perturbative state matches the closed-form oracle") {
    // Ten (beta, omega0) points compared at relative 1e-6.
    for (double beta : {0.25, 0.5, 1.0, 2.0, 4.0}) {
        for (double omega0 : {1.0, 2.0}) {
            models::SpinBosonSpec spec{omega0, 1.0, 1.0, 1.0, 1.0, 10.0 / beta, beta};
            const auto model = models::build_spin_boson(spec);
            const auto generic =
                steady::redfield_perturbative(model.basis, model.bohr, model.bath);
            const auto oracle = models::spin_boson_oracle(spec);
            const double scale = test::max_abs(oracle.redfield.rho2);
            CHECK(test::max_abs(generic.rho2 - oracle.redfield.rho2) < 1e-6 * scale);
            CHECK(test::max_abs(generic.rho0.matrix() - oracle.redfield.rho0.matrix()) <
                  1e-12);
        }
    }
}

TEST_CASE("ule perturbative state matches the closed-form oracle") {
    for (double beta : {0.25, 0.5, 1.0, 2.0, 4.0}) {
        for (double omega0 : {1.0, 2.0}) {
            models::SpinBosonSpec spec{omega0, 1.0, 1.0, 1.0, 1.0, 10.0 / beta, beta};
            const auto model = models::build_spin_boson(spec);
            const auto generic =
                steady::ule_perturbative(model.basis, model.bohr, model.bath, true);
            const auto oracle = models::spin_boson_oracle(spec);
            const double scale = test::max_abs(oracle.ule.rho2);
            CHECK(test::max_abs(generic.rho2 - oracle.ule.rho2) < 1e-6 * scale);
        }
    }
}

TEST_CASE("mean-force routes cross-validate and match the redfield expansion") {
    for (double beta : {0.5, 1.0}) {
        const auto model = models::build_spin_boson(fig2_spec(beta));
        const auto contour = steady::mfg_second_order(model.basis, model.bohr, model.bath,
                                                      steady::MfgRoute::Contour);
        const auto integral = steady::mfg_second_order(model.basis, model.bohr, model.bath,
                                                       steady::MfgRoute::Integral);
        const auto redfield =
            steady::redfield_perturbative(model.basis, model.bohr, model.bath);

        const double scale = test::max_abs(contour.rho2);
        CHECK(test::max_abs(contour.rho2 - integral.rho2) < 1e-3 * scale);
        CHECK(test::max_abs(contour.rho2 - redfield.rho2) < 1e-3 * scale);
    }
}

TEST_CASE("redfield equals the mean-force correction across the parameter grid") {
    // The central equivalence, checked on a 5x5 (beta, omega0) grid for both
    // mean-force routes.
    for (double beta : {0.25, 0.5, 1.0, 2.0, 4.0}) {
        for (double omega0 : {0.5, 0.75, 1.0, 1.5, 2.0}) {
            models::SpinBosonSpec spec{omega0, 1.0, 1.0, 1.0, 1.0, 10.0 / beta, beta};
            const auto model = models::build_spin_boson(spec);
            const auto red =
                steady::redfield_perturbative(model.basis, model.bohr, model.bath);
            const auto contour = steady::mfg_second_order(
                model.basis, model.bohr, model.bath, steady::MfgRoute::Contour);
            const auto integral = steady::mfg_second_order(
                model.basis, model.bohr, model.bath, steady::MfgRoute::Integral);
            const double scale = test::max_abs(red.rho2);
            CHECK(test::max_abs(contour.rho2 - red.rho2) < 1e-3 * scale);
            CHECK(test::max_abs(integral.rho2 - red.rho2) < 1e-3 * scale);
        }
    }
}

TEST_CASE("commuting coupling produces no second-order coherences") {
    models::SpinBosonSpec spec{1.0, 0.0, 0.0, 1.0, 1.0, 10.0, 1.0};
    const auto model = models::build_spin_boson(spec);
    const auto red = steady::redfield_perturbative(model.basis, model.bohr, model.bath);
    CHECK(std::abs(red.rho2(1, 0)) < 1e-14);
    CHECK(std::abs(red.rho2(0, 1)) < 1e-14);
}

TEST_CASE("perturbative corrections are traceless and Hermitian") {
    const auto model = models::build_spin_boson(fig2_spec());
    for (const auto& ps :
         {steady::redfield_perturbative(model.basis, model.bohr, model.bath),
          steady::ule_perturbative(model.basis, model.bohr, model.bath, true),
          steady::mfg_second_order(model.basis, model.bohr, model.bath,
                                   steady::MfgRoute::Integral),
          steady::tle_steady(model.basis, model.couplings[0], model.bath)}) {
        CHECK(std::abs(ps.rho2.trace()) < 1e-15 * std::max(1.0, test::max_abs(ps.rho2)));
        CHECK(test::max_abs((ps.rho2 - ps.rho2.adjoint()).eval()) <
              1e-10 * std::max(1.0, test::max_abs(ps.rho2)));
        CHECK(std::abs(ps.rho0.matrix().trace() - Complex(1.0)) < 1e-12);
    }
}

TEST_CASE("ule differs from the mean-force state at beta omega0 = 1") {
    const auto model = models::build_spin_boson(fig2_spec(1.0));
    const auto ule = steady::ule_perturbative(model.basis, model.bohr, model.bath, true);
    const auto mfg = steady::mfg_second_order(model.basis, model.bohr, model.bath,
                                              steady::MfgRoute::Contour);
    CHECK(std::abs(ule.rho2(1, 0) - mfg.rho2(1, 0)) > 1e-4);
    CHECK(std::abs(ule.rho2(1, 1) - mfg.rho2(1, 1)) > 1e-4);
}

TEST_CASE("ule dissipator bracket vanishes quadratically at closing gaps") {
    // The KMS-reduced combination g(D_kn) g(D_km) p_k
    //   - (1/2) g(D_nk) g(D_mk) (p_m + p_n) is O(theta^2) as E_m -> E_n.
    const auto model = models::build_spin_boson(fig2_spec());
    const auto& bathm = model.bath;
    const double beta = bathm.beta();
    const double e_k = 0.0, e_n = 1.0;
    auto bracket = [&](double theta) {
        const double e_m = e_n - theta;
        const double z =
            std::exp(-beta * e_k) + std::exp(-beta * e_n) + std::exp(-beta * e_m);
        const double p_k = std::exp(-beta * e_k) / z;
        const double p_n = std::exp(-beta * e_n) / z;
        const double p_m = std::exp(-beta * e_m) / z;
        const double g_kn = bathm.g_kernel(e_k - e_n)(0, 0).real();
        const double g_km = bathm.g_kernel(e_k - e_m)(0, 0).real();
        const double g_nk = bathm.g_kernel(e_n - e_k)(0, 0).real();
        const double g_mk = bathm.g_kernel(e_m - e_k)(0, 0).real();
        return g_kn * g_km * p_k - 0.5 * g_nk * g_mk * (p_m + p_n);
    };
    const double b3 = std::abs(bracket(1e-3));
    const double b4 = std::abs(bracket(1e-4));
    CHECK(b3 / b4 == doctest::Approx(100.0).epsilon(0.05));
}

TEST_CASE("ule populations without the lamb term vanish at second order") {
    const auto model = models::build_spin_boson(fig2_spec());
    const auto pert = steady::ule_perturbative(model.basis, model.bohr, model.bath, false);
    for (Eigen::Index n = 0; n < 2; ++n) CHECK(std::abs(pert.rho2(n, n)) == 0.0);
}

TEST_CASE("tle leading order obeys the |W|^2 ratio and is not Gibbs") {
    const auto model = models::build_spin_boson(fig2_spec(1.0));
    const auto ps = steady::tle_steady(model.basis, model.couplings[0], model.bath);
    const auto parts = super::build_tle(model.basis, model.couplings[0], model.bath);

    const double p_minus = ps.rho0.matrix()(0, 0).real();
    const double p_plus = ps.rho0.matrix()(1, 1).real();
    // Excited over ground: |W_{+-}|^2 / |W_{-+}|^2 (indices: 1 = +, 0 = -).
    const double expected =
        std::norm(parts.w_matrix(1, 0)) / std::norm(parts.w_matrix(0, 1));
    CHECK(p_plus / p_minus == doctest::Approx(expected).epsilon(1e-10));

    const double boltzmann = std::exp(-model.bath.beta() * model.basis.delta(1, 0));
    CHECK(std::abs(p_plus / p_minus - boltzmann) > 1e-6);
}

TEST_CASE("a detailed-balance surrogate W reproduces the Gibbs state") {
    std::mt19937 rng(23);
    const Matrix h = test::random_hermitian(3, rng);
    const auto basis = op::eigh(op::HermitianOperator(h));
    const double beta = 0.9;

    Matrix w(3, 3), a(3, 3);
    for (Eigen::Index n = 0; n < 3; ++n)
        for (Eigen::Index m = 0; m < 3; ++m) {
            w(n, m) = std::exp(-0.25 * beta * basis.delta(n, m));
            a(n, m) = 1.0;  // fully connected coupling graph
        }
    const Eigen::VectorXd p = steady::tle_populations_from_w(w, a);
    const Eigen::VectorXd gibbs = op::gibbs_populations(basis, beta);
    CHECK((p - gibbs).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("tle refuses a disconnected coupling graph") {
    Matrix w = Matrix::Ones(4, 4);
    Matrix a = Matrix::Zero(4, 4);
    a(0, 1) = a(1, 0) = 1.0;  // {0,1} and {2,3} never talk
    a(2, 3) = a(3, 2) = 1.0;
    CHECK_THROWS_AS(steady::tle_populations_from_w(w, a), ValidationError);
}

TEST_CASE("perturbative coherences equal the generator's response to rho0") {
    // For every family the off-diagonal second order must satisfy
    // rho2_nm = (L2[rho0])_nm / (i Delta_nm) with the assembled generator.
    const auto model = models::build_spin_boson(fig2_spec());
    const Complex i_gap(0.0, model.basis.delta(1, 0));

    const auto ule_parts = super::build_ule(model.basis, model.bohr, model.bath, true);
    const auto ule = steady::ule_perturbative(model.basis, model.bohr, model.bath, true);
    const Matrix ule_image = ule_parts.lamb->apply(ule.rho0.matrix()) +
                             ule_parts.diss.apply(ule.rho0.matrix());
    CHECK(std::abs(ule.rho2(1, 0) - ule_image(1, 0) / i_gap) < 1e-12);

    const auto red_parts = super::build_redfield(model.basis, model.bohr, model.bath);
    const auto red = steady::redfield_perturbative(model.basis, model.bohr, model.bath);
    const Matrix red_image = red_parts.s_part.apply(red.rho0.matrix()) +
                             red_parts.gamma_part.apply(red.rho0.matrix());
    CHECK(std::abs(red.rho2(1, 0) - red_image(1, 0) / i_gap) < 1e-12);

    const auto tle_parts = super::build_tle(model.basis, model.couplings[0], model.bath);
    const auto tle = steady::tle_steady(model.basis, model.couplings[0], model.bath);
    const Matrix tle_image = tle_parts.lamb.apply(tle.rho0.matrix()) +
                             tle_parts.diss.apply(tle.rho0.matrix());
    CHECK(std::abs(tle.rho2(1, 0) - tle_image(1, 0) / i_gap) < 1e-12);
}

TEST_CASE("four-level coherences equal the generator response for every family") {
    // Random nondegenerate four-level system: exercises intermediate-level
    // sums that a two-level model never reaches.
    std::mt19937 rng(77);
    Matrix h = test::random_hermitian(4, rng);
    Matrix a = test::random_hermitian(4, rng);
    models::GenericSpec spec;
    spec.hamiltonian = h;
    spec.channels.emplace_back(a, bath::SpectralDensity::ohmic_debye(1.0, 10.0));
    spec.beta = 0.4;
    const auto model = models::build_generic(spec);
    steady::require_nondegenerate(model.basis);

    const Matrix gibbs = op::gibbs_state(model.basis, model.bath.beta()).matrix();
    auto check_coherences = [&](const Matrix& rho2, const Matrix& image) {
        const double scale = std::max(test::max_abs(rho2), 1.0);
        for (Eigen::Index n = 0; n < 4; ++n)
            for (Eigen::Index m = 0; m < 4; ++m) {
                if (n == m) continue;
                const Complex expect =
                    image(n, m) / Complex(0.0, model.basis.delta(n, m));
                CHECK(std::abs(rho2(n, m) - expect) < 1e-11 * scale);
            }
    };

    const auto red_parts = super::build_redfield(model.basis, model.bohr, model.bath);
    const auto red = steady::redfield_perturbative(model.basis, model.bohr, model.bath);
    check_coherences(red.rho2,
                     red_parts.s_part.apply(gibbs) + red_parts.gamma_part.apply(gibbs));

    const auto ule_parts = super::build_ule(model.basis, model.bohr, model.bath, true);
    const auto ule = steady::ule_perturbative(model.basis, model.bohr, model.bath, true);
    check_coherences(ule.rho2,
                     ule_parts.lamb->apply(gibbs) + ule_parts.diss.apply(gibbs));

    const auto tle_parts = super::build_tle(model.basis, model.couplings[0], model.bath);
    const auto tle = steady::tle_steady(model.basis, model.couplings[0], model.bath);
    check_coherences(tle.rho2, tle_parts.lamb.apply(tle.rho0.matrix()) +
                                   tle_parts.diss.apply(tle.rho0.matrix()));
}

TEST_CASE("compare_states metrics") {
    const auto model = models::build_spin_boson(fig2_spec());
    const auto gibbs = op::gibbs_state(model.basis, model.bath.beta());

    const auto same = steady::compare_states(gibbs, gibbs);
    CHECK(same.trace_distance == 0.0);
    CHECK(same.max_abs_diff == 0.0);
    CHECK(same.rel_population_diff.cwiseAbs().maxCoeff() == 0.0);

    // Secular steady state against Gibbs: zero to solver accuracy.
    const auto sec = super::build_secular(model.basis, model.bohr, model.bath);
    const auto total =
        super::combine(super::build_free(model.basis), {&sec.ls, &sec.diss}, 0.2);
    const auto sol = steady::null_space_steady(total);
    const auto cmp = steady::compare_states(sol.rho, gibbs);
    CHECK(cmp.trace_distance < 1e-8);

    // Universal-Lindblad vs mean-force at finite epsilon: visibly different.
    const double eps = 0.1;
    const auto ule = steady::ule_perturbative(model.basis, model.bohr, model.bath, true);
    const auto mfg = steady::mfg_second_order(model.basis, model.bohr, model.bath,
                                              steady::MfgRoute::Contour);
    const auto gap = steady::compare_states(ule.at_epsilon(eps), mfg.at_epsilon(eps));
    CHECK(gap.max_abs_diff > 1e-4 * eps * eps);
}

TEST_CASE("high-temperature scan sees both families collapse to Gibbs") {
    const std::vector<double> betas{1.0, 0.6, 0.3, 0.15, 0.08};
    auto ule_builder = [&](double beta) {
        const auto model = models::build_spin_boson(fig2_spec(beta));
        return steady::ule_perturbative(model.basis, model.bohr, model.bath, true);
    };
    auto mfg_builder = [&](double beta) {
        const auto model = models::build_spin_boson(fig2_spec(beta));
        return steady::mfg_second_order(model.basis, model.bohr, model.bath,
                                        steady::MfgRoute::Contour);
    };
    const auto ule_scan = steady::high_temperature_scan(ule_builder, betas, 2);
    CHECK(ule_scan.vanishing);
    CHECK(ule_scan.tail_slope > 0.0);
    const auto mfg_scan = steady::high_temperature_scan(mfg_builder, betas, 2);
    CHECK(mfg_scan.vanishing);
    CHECK(mfg_scan.tail_slope > 0.0);
}

TEST_CASE("second-order correction is linear in the kernel strength") {
    models::SpinBosonSpec weak = fig2_spec();
    models::SpinBosonSpec strong = weak;
    strong.j0 = 2.0 * weak.j0;
    const auto m1 = models::build_spin_boson(weak);
    const auto m2 = models::build_spin_boson(strong);
    const auto p1 = steady::redfield_perturbative(m1.basis, m1.bohr, m1.bath);
    const auto p2 = steady::redfield_perturbative(m2.basis, m2.bohr, m2.bath);
    CHECK(test::max_abs(p2.rho2 - 2.0 * p1.rho2) < 1e-8 * test::max_abs(p2.rho2));
}

TEST_CASE("perturbative routes refuse degenerate spectra with a clear message") {
    // Explicitly degenerate three-level ladder; couplings connect everything.
    Matrix h = Matrix::Zero(4, 4);
    h.diagonal() << 0.0, 1.0, 1.0, 2.0;
    models::GenericSpec spec;
    spec.hamiltonian = h;
    spec.channels.emplace_back(Matrix::Ones(4, 4),
                               bath::SpectralDensity::ohmic_debye(1.0, 10.0));
    spec.beta = 1.0;
    const auto model = models::build_generic(spec);
    CHECK_THROWS_AS(steady::redfield_perturbative(model.basis, model.bohr, model.bath),
                    DegeneracyError);
    CHECK_THROWS_AS(steady::ule_perturbative(model.basis, model.bohr, model.bath, false),
                    DegeneracyError);
    CHECK_THROWS_AS(steady::tle_steady(model.basis, model.couplings[0], model.bath),
                    DegeneracyError);
}

TEST_CASE("sixteen-level chain assembles and solves cleanly") {
    // d = 16 exercises bin merging of coincident gaps across many level
    // pairs and the full Lamb-like kernel assembly.
    const auto model = models::build_spin_chain({4, 8.0, 1.0, 100.0, 2.0, 0.5, false});
    const auto free_part = super::build_free(model.basis);
    const auto parts = super::build_ule(model.basis, model.bohr, model.bath, true);
    const auto total = super::combine(free_part, {&*parts.lamb, &parts.diss}, 0.3);
    const auto sol = steady::null_space_steady(total);

    CHECK(sol.residual < 1e-10 * std::max(1.0, test::max_abs(total.matrix)));
    CHECK(sol.rho.min_eigenvalue() > -1e-12);

    Eigen::RowVectorXcd id_left = op::vectorize(Matrix::Identity(16, 16)).transpose();
    const Matrix second_order = parts.lamb->matrix + parts.diss.matrix;
    CHECK((id_left * second_order).cwiseAbs().maxCoeff() <
          1e-10 * test::max_abs(second_order));

    const auto kossakowski = super::kossakowski_spectrum(parts.diss);
    CHECK(kossakowski.minCoeff() > -1e-10 * kossakowski.maxCoeff());
}

TEST_CASE("the short transverse-field chain is actually nondegenerate") {
    // Open-boundary three-site chain at B_z = 8 eta: spectrum
    // {-26,-10,-8,-4,6,8,12,22} eta, minimum gap 2 eta. Perturbative routes
    // therefore remain available for it; dense chains are another matter.
    const auto model = models::build_spin_chain({3, 8.0, 1.0, 100.0, 2.0, 0.5, false});
    CHECK(model.basis.min_gap() == doctest::Approx(2.0).epsilon(1e-10));
    CHECK_NOTHROW(steady::require_nondegenerate(model.basis));
}

TEST_SUITE_END();
