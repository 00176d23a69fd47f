#include "doctest.h"

#include <cmath>

#include "qme/quadrature.hpp"

using namespace qme;

TEST_SUITE_BEGIN("quadrature");

TEST_CASE("gauss-legendre integrates polynomials exactly") {
    const quadr::GaussLegendre gl(8);
    double acc = 0.0;
    for (std::size_t i = 0; i < gl.nodes.size(); ++i)
        acc += gl.weights[i] * std::pow(gl.nodes[i], 14);  // degree 14 < 2*8
    CHECK(acc == doctest::Approx(2.0 / 15.0).epsilon(1e-13));
}

TEST_CASE("composite panels reproduce a gaussian integral") {
    quadr::Rule rule;
    rule.add_linear_panels(0.0, 10.0, 32, quadr::GaussLegendre(16));
    double acc = 0.0;
    for (std::size_t i = 0; i < rule.size(); ++i)
        acc += rule.weights[i] * std::exp(-rule.nodes[i] * rule.nodes[i]);
    CHECK(acc == doctest::Approx(0.5 * std::sqrt(M_PI)).epsilon(1e-13));
}

TEST_CASE("log panels capture a slow power-law tail") {
    quadr::Rule rule;
    rule.add_log_panels(1.0, 1e8, 64, quadr::GaussLegendre(16));
    double acc = 0.0;
    for (std::size_t i = 0; i < rule.size(); ++i)
        acc += rule.weights[i] / (rule.nodes[i] * rule.nodes[i]);
    CHECK(acc == doctest::Approx(1.0 - 1e-8).epsilon(1e-12));
}

TEST_SUITE_END();
