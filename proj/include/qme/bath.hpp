// bath.hpp — Thermal bath correlation kernels and their transforms.
//
// A BathModel owns one spectral density per coupling channel (independent
// baths, so cross-channel kernels vanish) and evaluates everything derived
// from the correlation function C(t):
//
//   gamma(w)          full Fourier transform of C(t); Hermitian PSD, obeys
//                     the KMS condition gamma(-w) = exp(-beta w) gamma(w)
//   lamb_shift S(w)   -PV int dv gamma(v+w) / (2 pi v)
//   g(w)              PSD square root of gamma(w)
//   f(w, w')          -PV sum_mu int dv g(v-w) g(v+w') / (2 pi v)
//   half_fourier      Gamma(w) = gamma(w)/2 + i S(w)  (half-line transform)
//   imag_time_corr    C(-ix) = int dv gamma(v) exp(-v x) / (2 pi), 0 <= x <= beta
//   corr_time         C(t)   = int dv gamma(v) exp(-i v t) / (2 pi)
//
// Principal values use the odd split PV int f(v)/v dv =
// int_0^inf [f(u) - f(-u)]/u du on a hybrid grid: Gauss-Legendre panels,
// equally spaced up to the kernel structure scale, log-spaced into the tail.
// Every PV evaluation is repeated on a panel-halved grid; disagreement beyond
// the configured tolerance raises ConvergenceError.

#pragma once

#include <Eigen/Dense>

#include <memory>
#include <utility>
#include <vector>

#include "qme/errors.hpp"
#include "qme/quadrature.hpp"

namespace qme::bath {

enum class SpectralKind { OhmicDebye, OhmicGaussian, Tabulated };

// One coupling channel's spectral data.
//
// OhmicDebye holds the zero-temperature density J(w) = j0 wd w / (w^2 + wd^2)
// and dresses it thermally: gamma(w) = (pi/2) J(w) (nbar(w) + 1), valid for
// all w because J is odd. OhmicGaussian is ingested as the full thermal
// gamma(w) = (2 pi / w0) w exp(-w^2 / 2 L^2) / (1 - exp(-beta w)) directly;
// its formula already satisfies the KMS condition. Tabulated kernels are
// interpolated linearly and vanish outside their samples.
struct SpectralDensity {
    SpectralKind kind = SpectralKind::OhmicDebye;
    double j0 = 1.0;
    double omega_d = 1.0;
    double omega0_scale = 1.0;
    double cutoff = 1.0;
    std::vector<std::pair<double, double>> samples;  // sorted by frequency

    static SpectralDensity ohmic_debye(double j0, double omega_d);
    static SpectralDensity ohmic_gaussian(double omega0_scale, double cutoff);
    static SpectralDensity tabulated(std::vector<std::pair<double, double>> samples);

    double gamma_thermal(double w, double beta) const;
    double zero_temperature_j(double w) const;  // OhmicDebye only
    double structure_scale() const;
    // True when gamma(-w) = exp(-beta w) gamma(w) holds exactly by formula.
    bool kms_exact() const { return kind != SpectralKind::Tabulated; }
};

struct QuadSettings {
    int pv_linear_nodes = 4096;     // nodes on [0, L], L = pv_split * structure scale
    int pv_log_nodes = 512;         // nodes on the log tail [L, tail_factor * L]
    double pv_split = 10.0;
    double tail_factor = 1e4;
    double pv_refine_tol = 1e-3;    // fine/coarse disagreement that raises an error
    int corr_linear_nodes = 768;    // C(t), C(-ix) frequency grids
    int corr_log_nodes = 256;
    double corr_tail_factor = 1e4;
    int imag_time_nodes = 64;       // Gauss-Legendre nodes per imaginary-time axis
    int panel_order = 16;           // Gauss-Legendre order inside each panel
};

class BathModel {
public:
    // bohr_hint: largest |Bohr frequency| the caller intends to evaluate at;
    // widens the evaluation window and the linear PV region when needed.
    BathModel(double beta, std::vector<SpectralDensity> channels, QuadSettings quad = {},
              double bohr_hint = 0.0);

    double beta() const { return beta_; }
    int channels() const { return static_cast<int>(channels_.size()); }
    const SpectralDensity& channel(int a) const { return channels_.at(static_cast<std::size_t>(a)); }
    const QuadSettings& settings() const { return quad_; }
    double omega_window() const { return window_; }

    // Window-checked public surface; all return channels x channels matrices
    // (diagonal for independent baths).
    Eigen::MatrixXcd gamma(double w) const;
    Eigen::MatrixXcd lamb_shift(double w) const;
    // Central difference with one Richardson refinement; h <= 0 selects the
    // default 1e-4 * max(|w|, 1).
    Eigen::MatrixXcd lamb_shift_derivative(double w, double h = 0.0) const;
    Eigen::MatrixXcd g_kernel(double w) const;
    Eigen::MatrixXcd f_function(double w, double wp) const;
    Eigen::MatrixXcd half_fourier(double w) const;
    Eigen::MatrixXcd imag_time_corr(double x) const;
    Eigen::MatrixXcd corr_time(double t) const;

    // Unchecked scalar kernels (no window test); quadratures run on these.
    double gamma_scalar(int ch, double w) const;
    double g_scalar(int ch, double w) const;

private:
    struct Caches;

    Eigen::VectorXd s_diag(double w) const;
    Eigen::VectorXd f_diag(double w, double wp) const;
    double pv_gamma(int ch, double w, const quadr::Rule& rule) const;
    double pv_gg(int ch, double w, double wp, const Eigen::ArrayXXd& a,
                 const Eigen::ArrayXXd& b, const quadr::Rule& rule) const;
    std::shared_ptr<const Eigen::ArrayXXd> g_on_grid(double shift, bool fine) const;
    Eigen::MatrixXcd diag_to_matrix(const Eigen::VectorXd& d) const;
    void check_window(double w, const char* who) const;

    double beta_ = 1.0;
    std::vector<SpectralDensity> channels_;
    QuadSettings quad_;
    double window_ = 0.0;
    double corr_lin_end_ = 0.0;
    double pv_tail_end_ = 0.0;
    quadr::Rule pv_fine_, pv_coarse_, corr_rule_;
    std::vector<double> gamma_ref_;  // per-channel magnitude scale
    std::shared_ptr<Caches> caches_;
};

}  // namespace qme::bath
