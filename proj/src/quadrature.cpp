#include "qme/quadrature.hpp"

#include <cmath>
#include <stdexcept>

namespace qme::quadr {

GaussLegendre::GaussLegendre(int n) {
    if (n < 1) throw std::invalid_argument("GaussLegendre: need at least one node");
    nodes.resize(static_cast<std::size_t>(n));
    weights.resize(static_cast<std::size_t>(n));
    // Newton iteration on P_n, one root per half thanks to symmetry.
    const int m = (n + 1) / 2;
    for (int i = 0; i < m; ++i) {
        double x = std::cos(M_PI * (i + 0.75) / (n + 0.5));
        double pp = 0.0;
        for (int iter = 0; iter < 100; ++iter) {
            double p0 = 1.0, p1 = 0.0;
            for (int j = 0; j < n; ++j) {
                double p2 = p1;
                p1 = p0;
                p0 = ((2.0 * j + 1.0) * x * p1 - j * p2) / (j + 1.0);
            }
            pp = n * (x * p0 - p1) / (x * x - 1.0);
            double dx = p0 / pp;
            x -= dx;
            if (std::abs(dx) < 1e-15) break;
        }
        const double w = 2.0 / ((1.0 - x * x) * pp * pp);
        nodes[static_cast<std::size_t>(i)] = -x;
        nodes[static_cast<std::size_t>(n - 1 - i)] = x;
        weights[static_cast<std::size_t>(i)] = w;
        weights[static_cast<std::size_t>(n - 1 - i)] = w;
    }
}

void Rule::add_panel(double a, double b, const GaussLegendre& gl) {
    const double half = 0.5 * (b - a);
    const double mid = 0.5 * (a + b);
    for (std::size_t i = 0; i < gl.nodes.size(); ++i) {
        nodes.push_back(mid + half * gl.nodes[i]);
        weights.push_back(half * gl.weights[i]);
    }
}

void Rule::add_linear_panels(double a, double b, int np, const GaussLegendre& gl) {
    if (np < 1 || !(b > a)) throw std::invalid_argument("add_linear_panels: bad interval");
    const double h = (b - a) / np;
    for (int p = 0; p < np; ++p) add_panel(a + p * h, a + (p + 1) * h, gl);
}

void Rule::add_log_panels(double a, double b, int np, const GaussLegendre& gl) {
    if (!(a > 0.0) || !(b > a) || np < 1)
        throw std::invalid_argument("add_log_panels: need 0 < a < b");
    const double la = std::log(a), lb = std::log(b);
    const double h = (lb - la) / np;
    for (int p = 0; p < np; ++p)
        add_panel(std::exp(la + p * h), std::exp(la + (p + 1) * h), gl);
}

Rule gauss_on_interval(double a, double b, int n) {
    Rule r;
    r.add_panel(a, b, GaussLegendre(n));
    return r;
}

}  // namespace qme::quadr
