// quadrature.hpp — Gauss-Legendre rules and composite panel grids.
//
// All frequency- and imaginary-time integrals in the bath layer run over
// composite Gauss-Legendre panels: equally spaced panels near the origin
// where kernels have structure, log-spaced panels for slowly decaying tails.

#pragma once

#include <cstddef>
#include <vector>

namespace qme::quadr {

// Nodes and weights of an n-point Gauss-Legendre rule on [-1, 1].
struct GaussLegendre {
    std::vector<double> nodes;
    std::vector<double> weights;
    explicit GaussLegendre(int n);
};

// A fully materialized rule: sum_i weights[i] * f(nodes[i]) approximates
// the integral over the covered interval.
struct Rule {
    std::vector<double> nodes;
    std::vector<double> weights;

    std::size_t size() const { return nodes.size(); }

    // Append an np-panel composite rule on [a, b], panels equally spaced.
    void add_linear_panels(double a, double b, int np, const GaussLegendre& gl);
    // Append panels whose boundaries are log-spaced between a and b (0 < a < b).
    void add_log_panels(double a, double b, int np, const GaussLegendre& gl);
    // Append one panel on [a, b].
    void add_panel(double a, double b, const GaussLegendre& gl);
};

// n-node Gauss-Legendre rule mapped onto [a, b].
Rule gauss_on_interval(double a, double b, int n);

}  // namespace qme::quadr
