#include "qme/bath.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <mutex>
#include <shared_mutex>
#include <string>
#include <unordered_map>

namespace qme::bath {

namespace {

constexpr double kTwoPi = 2.0 * M_PI;

uint64_t key_of(double x) { return std::bit_cast<uint64_t>(x); }

struct PairKey {
    uint64_t a, b;
    bool operator==(const PairKey&) const = default;
};

struct PairKeyHash {
    std::size_t operator()(const PairKey& k) const {
        uint64_t h = k.a * 0x9e3779b97f4a7c15ULL;
        h ^= (k.b + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2));
        return static_cast<std::size_t>(h);
    }
};

}  // namespace

struct BathModel::Caches {
    std::shared_mutex mx;
    std::unordered_map<uint64_t, Eigen::VectorXd> s_values;
    std::unordered_map<PairKey, Eigen::VectorXd, PairKeyHash> f_values;
    std::unordered_map<uint64_t, std::shared_ptr<const Eigen::ArrayXXd>> g_fine;
    std::unordered_map<uint64_t, std::shared_ptr<const Eigen::ArrayXXd>> g_coarse;
};

SpectralDensity SpectralDensity::ohmic_debye(double j0, double omega_d) {
    if (!(omega_d > 0.0)) throw ValidationError("ohmic_debye: omega_d must be positive");
    SpectralDensity s;
    s.kind = SpectralKind::OhmicDebye;
    s.j0 = j0;
    s.omega_d = omega_d;
    return s;
}

SpectralDensity SpectralDensity::ohmic_gaussian(double omega0_scale, double cutoff) {
    if (!(omega0_scale > 0.0) || !(cutoff > 0.0))
        throw ValidationError("ohmic_gaussian: scale and cutoff must be positive");
    SpectralDensity s;
    s.kind = SpectralKind::OhmicGaussian;
    s.omega0_scale = omega0_scale;
    s.cutoff = cutoff;
    return s;
}

SpectralDensity SpectralDensity::tabulated(std::vector<std::pair<double, double>> samples) {
    if (samples.size() < 2) throw ValidationError("tabulated: need at least two samples");
    std::sort(samples.begin(), samples.end());
    SpectralDensity s;
    s.kind = SpectralKind::Tabulated;
    s.samples = std::move(samples);
    return s;
}

double SpectralDensity::zero_temperature_j(double w) const {
    if (kind != SpectralKind::OhmicDebye)
        throw ValidationError("zero_temperature_j: only defined for ohmic_debye");
    return j0 * omega_d * w / (w * w + omega_d * omega_d);
}

double SpectralDensity::gamma_thermal(double w, double beta) const {
    switch (kind) {
        case SpectralKind::OhmicDebye: {
            const double lor = j0 * omega_d / (w * w + omega_d * omega_d);
            // w / (1 - exp(-beta w)), analytic limit 1/beta at w = 0.
            const double occ = (w == 0.0) ? 1.0 / beta : w / (-std::expm1(-beta * w));
            return 0.5 * M_PI * lor * occ;
        }
        case SpectralKind::OhmicGaussian: {
            const double gauss = std::exp(-0.5 * w * w / (cutoff * cutoff));
            const double occ = (w == 0.0) ? 1.0 / beta : w / (-std::expm1(-beta * w));
            return kTwoPi / omega0_scale * gauss * occ;
        }
        case SpectralKind::Tabulated: {
            if (w <= samples.front().first || w >= samples.back().first) {
                if (w == samples.front().first) return samples.front().second;
                if (w == samples.back().first) return samples.back().second;
                return 0.0;
            }
            auto hi = std::upper_bound(samples.begin(), samples.end(), w,
                                       [](double x, const auto& s) { return x < s.first; });
            auto lo = hi - 1;
            const double f = (w - lo->first) / (hi->first - lo->first);
            return lo->second + f * (hi->second - lo->second);
        }
    }
    return 0.0;
}

double SpectralDensity::structure_scale() const {
    switch (kind) {
        case SpectralKind::OhmicDebye:
            return omega_d;
        case SpectralKind::OhmicGaussian:
            return cutoff;
        case SpectralKind::Tabulated:
            return std::max(std::abs(samples.front().first), std::abs(samples.back().first));
    }
    return 1.0;
}

BathModel::BathModel(double beta, std::vector<SpectralDensity> channels, QuadSettings quad,
                     double bohr_hint)
    : beta_(beta), channels_(std::move(channels)), quad_(quad),
      caches_(std::make_shared<Caches>()) {
    if (!(beta_ > 0.0)) throw ValidationError("BathModel: beta must be positive");
    if (channels_.empty()) throw ValidationError("BathModel: need at least one channel");
    if (bohr_hint < 0.0) throw ValidationError("BathModel: bohr_hint must be non-negative");

    double scale = 1.0 / beta_;
    for (const auto& ch : channels_) scale = std::max(scale, ch.structure_scale());

    window_ = std::max({20.0 / beta_, 10.0 * scale, 1.5 * bohr_hint});

    const double lin_end = std::max(quad_.pv_split * scale, 1.2 * std::max(bohr_hint, 1e-300));
    const quadr::GaussLegendre gl(quad_.panel_order);
    const quadr::GaussLegendre gl_corr(quad_.panel_order);

    const int lin_panels = std::max(quad_.pv_linear_nodes / quad_.panel_order, 4);
    const int log_panels = std::max(quad_.pv_log_nodes / quad_.panel_order, 2);
    pv_fine_.add_linear_panels(0.0, lin_end, lin_panels, gl);
    pv_fine_.add_log_panels(lin_end, quad_.tail_factor * lin_end, log_panels, gl);
    pv_coarse_.add_linear_panels(0.0, lin_end, std::max(lin_panels / 2, 2), gl);
    pv_coarse_.add_log_panels(lin_end, quad_.tail_factor * lin_end, std::max(log_panels / 2, 1),
                              gl);
    pv_tail_end_ = quad_.tail_factor * lin_end;

    corr_lin_end_ = quad_.pv_split * scale;
    corr_rule_.add_linear_panels(0.0, corr_lin_end_,
                                 std::max(quad_.corr_linear_nodes / quad_.panel_order, 4),
                                 gl_corr);
    corr_rule_.add_log_panels(corr_lin_end_, quad_.corr_tail_factor * corr_lin_end_,
                              std::max(quad_.corr_log_nodes / quad_.panel_order, 2), gl_corr);

    gamma_ref_.resize(channels_.size());
    for (std::size_t ch = 0; ch < channels_.size(); ++ch) {
        double ref = 0.0;
        for (double probe : {0.0, 1.0 / beta_, -1.0 / beta_, scale, -scale, 2.0 * scale})
            ref = std::max(ref, std::abs(channels_[ch].gamma_thermal(probe, beta_)));
        gamma_ref_[static_cast<std::size_t>(ch)] = std::max(ref, 1e-300);
    }
}

void BathModel::check_window(double w, const char* who) const {
    if (std::abs(w) > window_)
        throw ValidationError(std::string(who) + ": frequency " + std::to_string(w) +
                              " outside the evaluation window +-" + std::to_string(window_));
}

double BathModel::gamma_scalar(int ch, double w) const {
    return channels_[static_cast<std::size_t>(ch)].gamma_thermal(w, beta_);
}

double BathModel::g_scalar(int ch, double w) const {
    const double v = gamma_scalar(ch, w);
    const double clamp = 1e-12 * gamma_ref_[static_cast<std::size_t>(ch)];
    if (v < -clamp)
        throw NotPsdError("g_kernel: gamma(" + std::to_string(w) + ") = " + std::to_string(v) +
                              " is negative",
                          v);
    return std::sqrt(std::max(v, 0.0));
}

Eigen::MatrixXcd BathModel::diag_to_matrix(const Eigen::VectorXd& d) const {
    Eigen::MatrixXcd m = Eigen::MatrixXcd::Zero(channels(), channels());
    m.diagonal() = d.cast<std::complex<double>>();
    return m;
}

Eigen::MatrixXcd BathModel::gamma(double w) const {
    check_window(w, "gamma");
    Eigen::VectorXd d(channels());
    for (int ch = 0; ch < channels(); ++ch) d[ch] = gamma_scalar(ch, w);
    return diag_to_matrix(d);
}

double BathModel::pv_gamma(int ch, double w, const quadr::Rule& rule) const {
    double acc = 0.0;
    for (std::size_t i = 0; i < rule.size(); ++i) {
        const double u = rule.nodes[i];
        acc += rule.weights[i] * (gamma_scalar(ch, w + u) - gamma_scalar(ch, w - u)) / u;
    }
    // Analytic 1/u tail beyond the grid: for gamma ~ c/u the remainder of
    // int_E^inf gamma(w+u)/u du is gamma(w+E) (E+w)/E; kernels that decay
    // faster contribute nothing. The mirrored gamma(w-u) tail is KMS
    // suppressed.
    const double e = pv_tail_end_;
    acc += gamma_scalar(ch, w + e) * (e + w) / e;
    return -acc / kTwoPi;
}

Eigen::VectorXd BathModel::s_diag(double w) const {
    const uint64_t key = key_of(w);
    {
        std::shared_lock lk(caches_->mx);
        auto it = caches_->s_values.find(key);
        if (it != caches_->s_values.end()) return it->second;
    }
    Eigen::VectorXd fine(channels()), coarse(channels());
    for (int ch = 0; ch < channels(); ++ch) {
        fine[ch] = pv_gamma(ch, w, pv_fine_);
        coarse[ch] = pv_gamma(ch, w, pv_coarse_);
        const double err = std::abs(fine[ch] - coarse[ch]);
        const double ref = std::max(std::abs(fine[ch]),
                                    1e-8 * gamma_ref_[static_cast<std::size_t>(ch)]);
        if (err > quad_.pv_refine_tol * ref)
            throw ConvergenceError("lamb_shift: PV quadrature did not settle at w = " +
                                   std::to_string(w) + " (channel " + std::to_string(ch) +
                                   ", refinement change " + std::to_string(err) + ", value " +
                                   std::to_string(fine[ch]) + ")");
    }
    std::unique_lock lk(caches_->mx);
    caches_->s_values.emplace(key, fine);
    return fine;
}

Eigen::MatrixXcd BathModel::lamb_shift(double w) const {
    check_window(w, "lamb_shift");
    return diag_to_matrix(s_diag(w));
}

Eigen::MatrixXcd BathModel::lamb_shift_derivative(double w, double h) const {
    check_window(w, "lamb_shift_derivative");
    if (h <= 0.0) h = 1e-4 * std::max(std::abs(w), 1.0);
    auto central = [&](double step) -> Eigen::VectorXd {
        return (s_diag(w + step) - s_diag(w - step)) / (2.0 * step);
    };
    const Eigen::VectorXd d1 = central(h);
    const Eigen::VectorXd d2 = central(0.5 * h);
    return diag_to_matrix(((4.0 * d2 - d1) / 3.0).eval());
}

Eigen::MatrixXcd BathModel::g_kernel(double w) const {
    check_window(w, "g_kernel");
    Eigen::VectorXd d(channels());
    for (int ch = 0; ch < channels(); ++ch) d[ch] = g_scalar(ch, w);
    return diag_to_matrix(d);
}

std::shared_ptr<const Eigen::ArrayXXd> BathModel::g_on_grid(double shift, bool fine) const {
    auto& cache = fine ? caches_->g_fine : caches_->g_coarse;
    const uint64_t key = key_of(shift);
    {
        std::shared_lock lk(caches_->mx);
        auto it = cache.find(key);
        if (it != cache.end()) return it->second;
    }
    const quadr::Rule& rule = fine ? pv_fine_ : pv_coarse_;
    const auto n = static_cast<Eigen::Index>(rule.size());
    auto arr = std::make_shared<Eigen::ArrayXXd>(2 * n, channels());
    for (int ch = 0; ch < channels(); ++ch) {
        for (Eigen::Index i = 0; i < n; ++i) {
            const double u = rule.nodes[static_cast<std::size_t>(i)];
            (*arr)(i, ch) = g_scalar(ch, u + shift);
            (*arr)(n + i, ch) = g_scalar(ch, -u + shift);
        }
    }
    std::unique_lock lk(caches_->mx);
    auto [it, inserted] = cache.emplace(key, arr);
    return it->second;
}

double BathModel::pv_gg(int ch, double w, double wp, const Eigen::ArrayXXd& a,
                        const Eigen::ArrayXXd& b, const quadr::Rule& rule) const {
    const auto n = static_cast<Eigen::Index>(rule.size());
    double acc = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        const double u = rule.nodes[static_cast<std::size_t>(i)];
        const double plus = a(i, ch) * b(i, ch);
        const double minus = a(n + i, ch) * b(n + i, ch);
        acc += rule.weights[static_cast<std::size_t>(i)] * (plus - minus) / u;
    }
    // Same 1/u tail estimate as the gamma transform, with the product kernel
    // evaluated at the grid end.
    const double e = pv_tail_end_;
    acc += g_scalar(ch, e - w) * g_scalar(ch, e + wp);
    return -acc / kTwoPi;
}

Eigen::VectorXd BathModel::f_diag(double w, double wp) const {
    const PairKey key{key_of(w), key_of(wp)};
    {
        std::shared_lock lk(caches_->mx);
        auto it = caches_->f_values.find(key);
        if (it != caches_->f_values.end()) return it->second;
    }
    // Integrand g(v - w) g(v + wp): the first factor is the fine-grid vector
    // shifted by -w, the second shifted by +wp.
    const auto a_fine = g_on_grid(-w, true);
    const auto b_fine = g_on_grid(wp, true);
    const auto a_coarse = g_on_grid(-w, false);
    const auto b_coarse = g_on_grid(wp, false);

    Eigen::VectorXd fine(channels());
    for (int ch = 0; ch < channels(); ++ch) {
        fine[ch] = pv_gg(ch, w, wp, *a_fine, *b_fine, pv_fine_);
        const double coarse = pv_gg(ch, w, wp, *a_coarse, *b_coarse, pv_coarse_);
        const double err = std::abs(fine[ch] - coarse);
        const double ref = std::max(std::abs(fine[ch]),
                                    1e-8 * gamma_ref_[static_cast<std::size_t>(ch)]);
        if (err > quad_.pv_refine_tol * ref)
            throw ConvergenceError("f_function: PV quadrature did not settle at (" +
                                   std::to_string(w) + ", " + std::to_string(wp) +
                                   "), refinement change " + std::to_string(err));
    }
    std::unique_lock lk(caches_->mx);
    caches_->f_values.emplace(key, fine);
    return fine;
}

Eigen::MatrixXcd BathModel::f_function(double w, double wp) const {
    check_window(w, "f_function");
    check_window(wp, "f_function");
    return diag_to_matrix(f_diag(w, wp));
}

Eigen::MatrixXcd BathModel::half_fourier(double w) const {
    check_window(w, "half_fourier");
    Eigen::MatrixXcd out = 0.5 * gamma(w);
    out += std::complex<double>(0.0, 1.0) * diag_to_matrix(s_diag(w));
    return out;
}

Eigen::MatrixXcd BathModel::imag_time_corr(double x) const {
    if (x < 0.0 || x > beta_)
        throw ValidationError("imag_time_corr: x = " + std::to_string(x) +
                              " outside [0, beta]; integrand diverges");
    Eigen::VectorXd d = Eigen::VectorXd::Zero(channels());
    for (int ch = 0; ch < channels(); ++ch) {
        const bool folded = channels_[static_cast<std::size_t>(ch)].kms_exact();
        double acc = 0.0;
        for (std::size_t i = 0; i < corr_rule_.size(); ++i) {
            const double u = corr_rule_.nodes[i];
            const double wgt = corr_rule_.weights[i];
            if (folded) {
                // gamma(-u) exp(u x) = gamma(u) exp(-u (beta - x)) by KMS;
                // this form never overflows for 0 <= x <= beta.
                acc += wgt * gamma_scalar(ch, u) *
                       (std::exp(-u * x) + std::exp(-u * (beta_ - x)));
            } else {
                acc += wgt * gamma_scalar(ch, u) * std::exp(-u * x);
                // Tabulated kernels vanish outside their samples; skip the
                // exponentially weighted branch there so 0 * inf never forms.
                const double neg = gamma_scalar(ch, -u);
                if (neg != 0.0) acc += wgt * neg * std::exp(u * x);
            }
        }
        d[ch] = acc / kTwoPi;
    }
    return diag_to_matrix(d);
}

Eigen::MatrixXcd BathModel::corr_time(double t) const {
    Eigen::MatrixXcd out = Eigen::MatrixXcd::Zero(channels(), channels());
    const double tau = std::abs(t);
    const double l0 = corr_lin_end_;
    const double full_end = quad_.corr_tail_factor * l0;

    // Oscillation-aware frequency grid: panels never span more than a few
    // radians of exp(-i u t), and the slowly decaying positive tail beyond
    // the truncation point is added analytically by integration by parts.
    // When the full static window accumulates negligible phase, reuse it.
    const double osc_end = tau > 0.0 ? std::max(2.0 * l0, 60.0 / tau)
                                     : std::numeric_limits<double>::infinity();
    // Static panels alias once the phase across the full window exceeds a
    // couple of radians; switch to the adaptive grid well before that.
    const bool truncated = tau * full_end > 2.0;
    quadr::Rule adapted;
    if (truncated) {
        const quadr::GaussLegendre gl(quad_.panel_order);
        const int lin_panels =
            std::max(quad_.corr_linear_nodes / quad_.panel_order,
                     static_cast<int>(std::ceil(tau * l0 / 4.0)));
        adapted.add_linear_panels(0.0, l0, lin_panels, gl);
        double a = l0;
        while (a < osc_end) {
            const double b = std::min({osc_end, 1.5 * a, a + 4.0 / tau});
            adapted.add_panel(a, b, gl);
            a = b;
        }
    }
    const quadr::Rule& rule = truncated ? adapted : corr_rule_;
    const double tail_start = osc_end;

    for (int ch = 0; ch < channels(); ++ch) {
        std::complex<double> acc = 0.0;
        for (std::size_t i = 0; i < rule.size(); ++i) {
            const double u = rule.nodes[i];
            const double wgt = rule.weights[i];
            const std::complex<double> phase(std::cos(u * t), -std::sin(u * t));
            acc += wgt * (gamma_scalar(ch, u) * phase + gamma_scalar(ch, -u) * std::conj(phase));
        }
        if (truncated) {
            // int_W^inf gamma(u) exp(-iut) du
            //   = exp(-iWt) [gamma(W)/(it) + gamma'(W)/(it)^2 + O((W t)^-2)];
            // the mirrored negative-frequency tail is exponentially small.
            const std::complex<double> it(0.0, t);
            const double h = 1e-4 * tail_start;
            const double g0 = gamma_scalar(ch, tail_start);
            const double g1 =
                (gamma_scalar(ch, tail_start + h) - gamma_scalar(ch, tail_start - h)) /
                (2.0 * h);
            const std::complex<double> phase(std::cos(tail_start * t),
                                             -std::sin(tail_start * t));
            acc += phase * (g0 / it + g1 / (it * it));
        }
        out(ch, ch) = acc / kTwoPi;
    }
    return out;
}

}  // namespace qme::bath
