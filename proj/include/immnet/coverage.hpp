#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <random>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "immnet/errors.hpp"
#include "immnet/fixed_point.hpp"
#include "immnet/geometry.hpp"
#include "immnet/metrics.hpp"
#include "immnet/parallel.hpp"
#include "immnet/random.hpp"

namespace immnet {

using std::numbers::pi;

enum class NoiseModel { Constant, GaussianAmplitude };

/// Receiver noise. Constant: `value` is the power in watts.
/// GaussianAmplitude: `value` is the standard deviation of a zero-mean
/// Gaussian amplitude whose square is the noise power.
struct Noise {
    NoiseModel model = NoiseModel::Constant;
    double value = 1e-13;

    double sample_power(Rng& rng) const {
        if (model == NoiseModel::Constant) return value;
        const double a = value * std::normal_distribution<double>{}(rng);
        return a * a;
    }

    /// E[exp(-k * power)] for k >= 0.
    double laplace(double k) const {
        if (model == NoiseModel::Constant) return std::exp(-k * value);
        return 1.0 / std::sqrt(1.0 + 2.0 * k * value * value);
    }

    /// E[exp(-i u k * power)].
    std::complex<double> char_fn(double u, double k) const {
        using namespace std::complex_literals;
        if (model == NoiseModel::Constant) return std::exp(-1i * (u * k * value));
        return std::pow(1.0 + 2i * (u * k * value * value), -0.5);
    }
};

struct ChannelParams {
    double p_t = 0.1;       // W
    double lambda_h = 1.0;  // fading power ~ Exp(rate lambda_h)
    double alpha = 4.0;
    double gamma0 = 1.0;    // linear
    Noise noise;

    void validate() const {
        if (!(p_t > 0.0)) throw DomainError("ChannelParams: p_t must be positive");
        if (!(lambda_h > 0.0)) throw DomainError("ChannelParams: lambda_h must be positive");
        if (!(alpha > 2.0)) throw DomainError("ChannelParams: alpha must exceed 2");
        if (!(gamma0 > 0.0)) throw DomainError("ChannelParams: gamma0 must be positive");
        if (!(noise.value >= 0.0)) throw DomainError("ChannelParams: noise must be nonnegative");
    }
};

inline double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }

/// Base-station densities per m^2.
class Deployment {
public:
    Deployment(double lambda_c_bs, double lambda_s_bs, double lambda_m_bs)
        : lambda_c_(lambda_c_bs), lambda_s_(lambda_s_bs), lambda_m_(lambda_m_bs) {
        if (!(lambda_c_ >= 0.0 && lambda_s_ >= 0.0 && lambda_m_ > 0.0))
            throw DomainError("Deployment: densities must be nonnegative (macro positive)");
        if (!(lambda_c_ > lambda_s_))
            throw DomainError("Deployment: lambda_c_bs must exceed lambda_s_bs");
    }

    double lambda_c() const { return lambda_c_; }
    double lambda_s() const { return lambda_s_; }
    double lambda_m() const { return lambda_m_; }
    double density(RegionTag r) const { return r == RegionTag::Inside ? lambda_c_ : lambda_s_; }

    /// Expected BS load lambda * S of the region (real valued).
    double load(RegionTag r, const Layout& layout) const {
        return density(r) * (r == RegionTag::Inside ? layout.community_area() : layout.outside_area());
    }

    /// floor(lambda * S); the small guard absorbs products like 19.999999999999996.
    std::size_t count(RegionTag r, const Layout& layout) const {
        return static_cast<std::size_t>(std::floor(load(r, layout) + 1e-9));
    }

private:
    double lambda_c_, lambda_s_, lambda_m_;
};

/// floor(load - n_cover), clamped at zero.
inline std::size_t interferer_count(double load, double n_cover) {
    return static_cast<std::size_t>(std::max(0.0, std::floor(load - n_cover + 1e-9)));
}

struct CoverageResult {
    double probability = 0.0;
    double std_error = 0.0;    // Monte Carlo standard error (0 for quadrature)
    std::size_t samples = 0;   // Monte Carlo sample count (0 for quadrature)
    double error_bound = 0.0;  // quadrature error bound (0 for Monte Carlo)
};

inline CoverageResult binomial_result(std::size_t hits, std::size_t n) {
    const double p = double(hits) / double(n);
    return {p, std::sqrt(p * (1.0 - p) / double(n)), n, 0.0};
}

struct MacroMobility {
    double speed = 5.0;     // m/s
    double delta_t = 10.0;  // s

    double delta_r() const { return speed * delta_t; }

    void validate() const {
        if (!(speed >= 0.0 && delta_t >= 0.0)) throw DomainError("MacroMobility: speed and delta_t must be >= 0");
    }
};

/// Binomial(M, p) pmf over {0..M}, evaluated in log space.
inline std::vector<double> associated_count_pmf(std::size_t m, double p) {
    if (!(p >= 0.0 && p <= 1.0)) throw DomainError("associated_count_pmf: p must lie in [0, 1]");
    std::vector<double> pmf(m + 1, 0.0);
    if (p == 0.0) {
        pmf[0] = 1.0;
        return pmf;
    }
    if (p == 1.0) {
        pmf[m] = 1.0;
        return pmf;
    }
    const double lp = std::log(p), lq = std::log1p(-p);
    const double lm = std::lgamma(double(m) + 1.0);
    for (std::size_t k = 0; k <= m; ++k) {
        const double lc = lm - std::lgamma(double(k) + 1.0) - std::lgamma(double(m - k) + 1.0);
        pmf[k] = std::exp(lc + double(k) * lp + double(m - k) * lq);
    }
    return pmf;
}

// ---------------------------------------------------------------------------
// Small-cell coverage by Monte Carlo

/// Sorted per-sample SINR for every interferer count K in [k_lo, k_hi].
/// All counts share the same draws: each sample draws the full set of M
/// interferers and K uses the first K of them.
struct SinrTable {
    std::size_t k_lo = 0;
    std::size_t k_hi = 0;
    std::size_t samples = 0;
    std::vector<std::vector<double>> sorted;

    /// P[SINR > gamma0] with K interferers.
    CoverageResult coverage(double gamma0, std::size_t k) const {
        if (k < k_lo || k > k_hi) throw DomainError("SinrTable: interferer count outside table");
        const auto& col = sorted[k - k_lo];
        const std::size_t hits = col.end() - std::upper_bound(col.begin(), col.end(), gamma0);
        return binomial_result(hits, samples);
    }
};

inline constexpr std::size_t kBatchSize = 4096;

/// SINR table for a link whose serving and interfering distances are
/// i.i.d. draws of `law(rng)`. Sample i runs on stream (seed, i), so tables
/// built for different m share their first draws sample by sample.
template <class DistanceLaw>
SinrTable sinr_table(const ChannelParams& chan, std::size_t m, std::size_t k_lo, std::size_t k_hi,
                     DistanceLaw&& law, std::size_t n_mc, std::uint64_t seed, unsigned workers = 1) {
    if (n_mc == 0) throw DomainError("sinr_table: n_mc must be positive");
    if (k_lo > k_hi || k_hi > m) throw DomainError("sinr_table: need k_lo <= k_hi <= m");
    SinrTable t;
    t.k_lo = k_lo;
    t.k_hi = k_hi;
    t.samples = n_mc;
    t.sorted.assign(k_hi - k_lo + 1, std::vector<double>(n_mc));

    const std::size_t batches = (n_mc + kBatchSize - 1) / kBatchSize;
    parallel_for(batches, workers, [&](std::size_t b) {
        std::exponential_distribution<double> fade(chan.lambda_h);
        const std::size_t end = std::min(n_mc, (b + 1) * kBatchSize);
        for (std::size_t i = b * kBatchSize; i < end; ++i) {
            Rng rng = make_stream(seed, {i});
            fade.reset();
            const double noise = chan.noise.sample_power(rng);
            const double signal = chan.p_t * fade(rng) * std::pow(law(rng), -chan.alpha);
            double interference = 0.0;
            for (std::size_t k = 0; k <= m; ++k) {
                if (k >= k_lo && k <= k_hi) t.sorted[k - k_lo][i] = signal / (noise + interference);
                if (k == m) break;
                interference += chan.p_t * fade(rng) * std::pow(law(rng), -chan.alpha);
            }
        }
    });
    for (auto& col : t.sorted) std::sort(col.begin(), col.end());
    return t;
}

/// P[P_t h_s d_s^-a > gamma0 (noise + sum_k P_t h_k d_k^-a)] with
/// `n_interferers` terms and distances drawn from `law`.
template <class DistanceLaw>
CoverageResult sinr_coverage_mc(const ChannelParams& chan, std::size_t n_interferers, DistanceLaw&& law,
                                std::size_t n_mc, std::uint64_t seed, unsigned workers = 1) {
    chan.validate();
    return sinr_table(chan, n_interferers, n_interferers, n_interferers, law, n_mc, seed, workers)
        .coverage(chan.gamma0, n_interferers);
}

inline RegionPair region_pair(RegionTag r) { return r == RegionTag::Inside ? RegionPair::InIn : RegionPair::OutOut; }

/// Static user in `region` served by a small cell of the same region, with
/// floor(lambda S - n_cover) co-region interferers.
inline CoverageResult small_cell_coverage(RegionTag region, const ChannelParams& chan, const Deployment& dep,
                                          const Layout& layout, double n_cover, std::size_t n_mc,
                                          std::uint64_t seed, unsigned workers = 1) {
    chan.validate();
    const std::size_t m = dep.count(region, layout);
    const std::size_t k = std::min(m, interferer_count(dep.load(region, layout), n_cover));
    const RegionPair pair = region_pair(region);
    auto law = [&](Rng& rng) { return sample_pair_distance(pair, layout, rng); };
    return sinr_table(chan, m, k, k, law, n_mc, stream_seed(seed, {std::uint64_t(region)}), workers)
        .coverage(chan.gamma0, k);
}

/// Tables for both regions covering every interferer count an N_cover
/// iteration bounded by `max_n_cover` can reach. Independent of gamma0.
struct SmallCellTables {
    SinrTable inside;
    SinrTable outside;
    std::size_t m_c = 0;
    std::size_t m_s = 0;
    double load_c = 0.0;
    double load_s = 0.0;
};

inline SmallCellTables small_cell_tables(const ChannelParams& chan, const Deployment& dep, const Layout& layout,
                                         double max_n_cover, std::size_t n_mc, std::uint64_t seed,
                                         unsigned workers = 1) {
    SmallCellTables t;
    t.m_c = dep.count(RegionTag::Inside, layout);
    t.m_s = dep.count(RegionTag::Outside, layout);
    t.load_c = dep.load(RegionTag::Inside, layout);
    t.load_s = dep.load(RegionTag::Outside, layout);
    auto build = [&](RegionTag r, std::size_t m, double load) {
        const std::size_t lo = std::min(m, interferer_count(load, max_n_cover));
        const RegionPair pair = region_pair(r);
        auto law = [&](Rng& rng) { return sample_pair_distance(pair, layout, rng); };
        return sinr_table(chan, m, lo, m, law, n_mc, stream_seed(seed, {std::uint64_t(r)}), workers);
    };
    t.inside = build(RegionTag::Inside, t.m_c, t.load_c);
    t.outside = build(RegionTag::Outside, t.m_s, t.load_s);
    return t;
}

struct NCoverResult {
    double n_cover = 0.0;
    double std_error = 0.0;  // propagated from the coverage estimates at the solution
    std::vector<double> trace;
    int iterations = 0;
    CoverageResult p_c;  // inside coverage at the solution
    CoverageResult p_s;  // outside coverage at the solution
    std::size_t k_c = 0;
    std::size_t k_s = 0;
};

/// Upper bound of the N_cover update (every coverage probability = 1).
inline double n_cover_bound(std::size_t m_c, std::size_t m_s, const TimeFractions& f) {
    return (f.pi_c_in * double(m_c) + (1.0 - f.pi_c_in) * double(m_s)) * f.pi_pause;
}

/// Damped iteration N <- (pi_in M_c P_c(N) + (1 - pi_in) M_s P_s(N)) pi_pause
/// from N = 0 at threshold gamma0, using precomputed tables.
inline NCoverResult n_cover_fixed_point(const SmallCellTables& t, double gamma0, const TimeFractions& f,
                                        const FixedPointOptions& opt = {}) {
    auto cover = [&](double n) {
        const std::size_t kc = std::min(t.m_c, interferer_count(t.load_c, n));
        const std::size_t ks = std::min(t.m_s, interferer_count(t.load_s, n));
        return std::pair{t.inside.coverage(gamma0, kc), t.outside.coverage(gamma0, ks)};
    };
    auto update = [&](double n) {
        const auto [pc, ps] = cover(n);
        return (f.pi_c_in * double(t.m_c) * pc.probability +
                (1.0 - f.pi_c_in) * double(t.m_s) * ps.probability) * f.pi_pause;
    };
    const FixedPointResult fp = damped_fixed_point(update, opt);
    NCoverResult r;
    r.n_cover = fp.value;
    r.trace = fp.trace;
    r.iterations = fp.iterations;
    const auto [pc, ps] = cover(fp.value);
    r.p_c = pc;
    r.p_s = ps;
    r.k_c = std::min(t.m_c, interferer_count(t.load_c, fp.value));
    r.k_s = std::min(t.m_s, interferer_count(t.load_s, fp.value));
    const double a = f.pi_c_in * double(t.m_c) * pc.std_error;
    const double b = (1.0 - f.pi_c_in) * double(t.m_s) * ps.std_error;
    r.std_error = f.pi_pause * std::hypot(a, b);
    return r;
}

inline NCoverResult n_cover_fixed_point(const ChannelParams& chan, const Deployment& dep, const Layout& layout,
                                        const TimeFractions& f, std::size_t n_mc, std::uint64_t seed,
                                        unsigned workers = 1, const FixedPointOptions& opt = {}) {
    chan.validate();
    const double bound = n_cover_bound(dep.count(RegionTag::Inside, layout), dep.count(RegionTag::Outside, layout), f);
    const SmallCellTables t = small_cell_tables(chan, dep, layout, bound, n_mc, seed, workers);
    return n_cover_fixed_point(t, chan.gamma0, f, opt);
}

// ---------------------------------------------------------------------------
// Macro-cell coverage of a moving user

/// Distance from a uniform point to the nearest PPP(lambda) point.
inline double nearest_bs_pdf(double x, double lambda) {
    if (!(x >= 0.0) || !(lambda > 0.0)) throw DomainError("nearest_bs_pdf: need x >= 0 and lambda > 0");
    return 2.0 * pi * lambda * x * std::exp(-pi * lambda * x * x);
}

namespace detail {

using GK15 = boost::math::quadrature::gauss_kronrod<double, 15>;
using GK31 = boost::math::quadrature::gauss_kronrod<double, 31>;

}  // namespace detail

/// Density of the distance from the displaced user to the originally
/// nearest BS. For each heading theta both roots r_p = Dr cos(theta) +- sqrt(D),
/// D = x^2 - Dr^2 sin^2(theta), that are nonnegative contribute, each with
/// Jacobian x / sqrt(D). The "-" root exists only for x < Dr.
inline double moved_distance_pdf(double x, const MacroMobility& mob, double lambda) {
    mob.validate();
    const double dr = mob.delta_r();
    if (dr == 0.0) return nearest_bs_pdf(x, lambda);
    if (!(x >= 0.0) || !(lambda > 0.0)) throw DomainError("moved_distance_pdf: need x >= 0 and lambda > 0");
    if (x == 0.0) return 0.0;

    const double c = 2.0 * pi * lambda * x;
    auto branch = [&](double w, double root) { return w > 0.0 ? c * (w / root) * std::exp(-pi * lambda * w * w) : 0.0; };

    double integral = 0.0;
    if (x >= dr) {
        auto g = [&](double th) {
            const double s = std::sin(th), co = std::cos(th);
            const double root = std::sqrt(std::max(0.0, x * x - dr * dr * s * s));
            if (root == 0.0) return 0.0;
            return branch(dr * co + root, root);
        };
        integral = detail::GK31::integrate(g, 0.0, pi / 2, 12, 1e-11) + detail::GK31::integrate(g, pi / 2, pi, 12, 1e-11);
    } else {
        // theta in [0, theta*], theta* = asin(x / Dr); theta = theta* (1 - s^2) removes the 1/sqrt(D) endpoint.
        const double ts = std::asin(x / dr);
        auto g = [&](double s) {
            const double th = ts * (1.0 - s * s);
            const double sn = std::sin(th), co = std::cos(th);
            const double root = std::sqrt(std::max(0.0, x * x - dr * dr * sn * sn));
            if (root == 0.0) return 0.0;
            const double v = branch(dr * co + root, root) + branch(dr * co - root, root);
            return v * 2.0 * ts * s;
        };
        integral = detail::GK31::integrate(g, 0.0, 1.0, 12, 1e-11);
    }
    return integral / pi;
}

/// Interference shape J(z) = integral_1^inf z w / (w^alpha + z) dw for
/// Re z >= 0. Closed form at alpha = 4, quadrature otherwise.
inline std::complex<double> interference_shape(std::complex<double> z, double alpha) {
    if (z == 0.0) return 0.0;
    if (alpha == 4.0) {
        const std::complex<double> r = std::sqrt(z);
        return 0.5 * r * (pi / 2 - std::atan(1.0 / r));
    }
    if (std::abs(z) <= 1.0) {
        // w = s^(-1/(alpha-2)) maps [1, inf) to (0, 1] with a smooth integrand.
        const double p = alpha / (alpha - 2.0);
        auto f = [&](double s) { return 1.0 / (1.0 + z * std::pow(s, p)); };
        return z / (alpha - 2.0) * detail::GK15::integrate(f, 0.0, 1.0, 12, 1e-13);
    }
    // Whole half-line in closed form minus the [0, 1] piece.
    const double whole = (pi / alpha) / std::sin(2.0 * pi / alpha);
    auto f = [&](double w) { return z * w / (std::pow(w, alpha) + z); };
    return std::pow(z, 2.0 / alpha) * whole - detail::GK15::integrate(f, 0.0, 1.0, 12, 1e-13);
}

inline double interference_shape(double z, double alpha) { return interference_shape(std::complex<double>(z), alpha).real(); }

enum class ConditionalMethod { Inversion, ClosedForm };

struct ConditionalCoverage {
    double value = 0.0;
    double error = 0.0;
};

/// Coverage at serving distance x when the interferers form a PPP(lambda)
/// beyond x, with Rayleigh fading: e^{-noise term} * exp(-2 pi lambda x^2 J(gamma0)).
inline double conditional_coverage_closed(double x, const ChannelParams& ch, double lambda) {
    const double k = ch.lambda_h * ch.gamma0 * std::pow(x, ch.alpha) / ch.p_t;
    return ch.noise.laplace(k) * std::exp(-2.0 * pi * lambda * x * x * interference_shape(ch.gamma0, ch.alpha));
}

/// Same probability by inverting the characteristic function of
/// W = lambda_h (noise + I) / (P_t x^-alpha / gamma0):
///   C = (1/pi) int_0^inf Re[ E e^{-iuW} / (1 - iu) ] du,
/// where E e^{-iuW} is the noise characteristic function times the
/// interference Laplace transform exp(-2 pi lambda x^2 J(i gamma0 u)).
/// The integral is cut at U where the tail bound
///   (1/pi) e^K (1/delta) E1(K c_a (gamma0 U)^delta),  K = pi lambda x^2,
///   delta = 2/alpha, c_a = (pi/alpha)/sin(pi/alpha)
/// falls below tail_tol.
inline ConditionalCoverage conditional_coverage_inversion(double x, const ChannelParams& ch, double lambda,
                                                          double tail_tol = 1e-6) {
    using namespace std::complex_literals;
    const double K = pi * lambda * x * x;
    const double delta = 2.0 / ch.alpha;
    const double ca = (pi / ch.alpha) / std::sin(pi / ch.alpha);
    const double knoise = ch.lambda_h * ch.gamma0 * std::pow(x, ch.alpha) / ch.p_t;

    auto tail = [&](double u_max) {
        const double arg = K * ca * std::pow(ch.gamma0 * u_max, delta);
        const double e1 = -std::expint(-arg);
        return std::exp(K) * e1 / (delta * pi);
    };
    double u_max = 1.0;
    while (tail(u_max) >= tail_tol) {
        u_max *= 4.0;
        if (u_max > 1e250)
            throw ConvergenceError("conditional coverage: tail bound unattainable", conditional_coverage_closed(x, ch, lambda),
                                   tail(u_max));
    }
    // Pin U to the bound within the last factor of 4 so the cut moves
    // smoothly with x; a jumpy cut makes the outer integrand noisy.
    if (u_max > 1.0) {
        double lo = std::log(u_max / 4.0), hi = std::log(u_max);
        for (int i = 0; i < 30; ++i) {
            const double mid = 0.5 * (lo + hi);
            (tail(std::exp(mid)) >= tail_tol ? lo : hi) = mid;
        }
        u_max = std::exp(hi);
    }

    auto integrand = [&](double u) {
        const std::complex<double> li = std::exp(-2.0 * K * interference_shape(1i * (ch.gamma0 * u), ch.alpha));
        return (ch.noise.char_fn(u, knoise) * li / (1.0 - 1i * u)).real();
    };
    double e1 = 0.0, e2 = 0.0;
    const double head = detail::GK31::integrate(integrand, 0.0, 1.0, 15, 1e-10, &e1);
    auto logged = [&](double t) {
        const double u = std::exp(t);
        return integrand(u) * u;
    };
    const double body = detail::GK31::integrate(logged, 0.0, std::log(u_max), 15, 1e-10, &e2);
    return {(head + body) / pi, (e1 + e2) / pi + tail(u_max)};
}

struct MacroNumericOptions {
    ConditionalMethod method = ConditionalMethod::Inversion;
    double tail_tol = 1e-6;  // per conditional evaluation; must stay below 1e-4
    double tol = 1e-6;
    // The inversion carries ~1e-7 noise, so deep bisection only chases it.
    std::size_t max_depth = 4;
};

/// Coverage of the moving user: the moved-distance density weighted by the
/// conditional coverage, interferers beyond the serving distance.
inline CoverageResult macro_coverage_numeric(const ChannelParams& ch, double lambda, const MacroMobility& mob,
                                             const MacroNumericOptions& opt = {}) {
    ch.validate();
    mob.validate();
    if (!(lambda > 0.0)) throw DomainError("macro_coverage_numeric: lambda must be positive");
    const double dr = mob.delta_r();
    const double scale = 1.0 / std::sqrt(lambda);
    // Mass below x_lo is at most pi lambda x_lo^2; mass above x_hi is below e^-40.
    const double x_lo = std::sqrt(1e-10 / (pi * lambda));
    const double x_hi = dr + std::sqrt(40.0 / (pi * lambda));

    double cond_err = 0.0;
    auto f = [&](double x) {
        const double w = moved_distance_pdf(x, mob, lambda);
        if (w == 0.0) return 0.0;
        if (opt.method == ConditionalMethod::ClosedForm) return w * conditional_coverage_closed(x, ch, lambda);
        const ConditionalCoverage c = conditional_coverage_inversion(x, ch, lambda, opt.tail_tol);
        cond_err = std::max(cond_err, c.error);
        return w * c.value;
    };

    std::vector<double> cuts = {x_lo};
    for (double b : {dr - scale, dr, dr + scale, dr + 2.0 * scale})
        if (b > cuts.back() && b < x_hi) cuts.push_back(b);
    cuts.push_back(x_hi);

    double value = 0.0, quad_err = 0.0;
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
        double e = 0.0;
        value += detail::GK31::integrate(f, cuts[i], cuts[i + 1], opt.max_depth, opt.tol, &e);
        quad_err += e;
    }
    return {value, 0.0, 0, quad_err + cond_err + 1e-10};
}

/// Diagnostic: coverage of the moving user with the exact interferer
/// geometry. Given the original serving distance r_p, no BS lies in the
/// disc of radius r_p around the start point; every BS outside it
/// interferes at the new position, including ones now nearer than the
/// serving BS.
inline CoverageResult macro_coverage_displaced_numeric(const ChannelParams& ch, double lambda,
                                                       const MacroMobility& mob, double tol = 1e-7) {
    ch.validate();
    mob.validate();
    if (!(lambda > 0.0)) throw DomainError("macro_coverage_displaced_numeric: lambda must be positive");
    const double dr = mob.delta_r();
    const double a = ch.alpha;

    // Laplace exponent lambda * A, A = integral over the plane minus the disc.
    auto exponent = [&](double rp, double rm) {
        const double z0 = ch.gamma0 * std::pow(rm, a);
        const double g_inf = std::pow(z0, 2.0 / a) * (pi / a) / std::sin(2.0 * pi / a);
        // G(t) = integral_0^t g(s) s ds = g_inf - t^2 J(z0 / t^a)
        auto G = [&](double t) { return t <= 0.0 ? 0.0 : g_inf - t * t * interference_shape(z0 / std::pow(t, a), a); };
        auto chord = [&](double phi) {
            const double b = dr * std::cos(phi);
            const double disc = b * b - dr * dr + rp * rp;
            if (disc <= 0.0) return 0.0;
            const double s = std::sqrt(disc);
            const double t2 = b + s;
            if (t2 <= 0.0) return 0.0;
            return G(t2) - G(std::max(0.0, b - s));
        };
        double excluded;
        if (dr <= rp) {
            excluded = detail::GK31::integrate(chord, 0.0, pi, 10, tol);
        } else {
            const double pc = std::asin(rp / dr);
            auto h = [&](double s) { return chord(pc * (1.0 - s * s)) * 2.0 * pc * s; };
            excluded = detail::GK31::integrate(h, 0.0, 1.0, 10, tol);
        }
        return lambda * (2.0 * pi * g_inf - 2.0 * excluded);
    };

    auto given_rp = [&](double rp) {
        auto over_theta = [&](double th) {
            const double rm = std::sqrt(std::max(0.0, rp * rp + dr * dr - 2.0 * rp * dr * std::cos(th)));
            if (rm == 0.0) return 1.0;
            const double k = ch.lambda_h * ch.gamma0 * std::pow(rm, a) / ch.p_t;
            return ch.noise.laplace(k) * std::exp(-exponent(rp, rm));
        };
        if (dr == 0.0) return over_theta(0.0);
        return detail::GK15::integrate(over_theta, 0.0, pi, 8, tol) / pi;
    };

    const double r_hi = std::sqrt(40.0 / (pi * lambda));
    auto outer = [&](double rp) { return rp <= 0.0 ? 0.0 : nearest_bs_pdf(rp, lambda) * given_rp(rp); };
    double err = 0.0, value = 0.0;
    const std::vector<double> cuts = {0.0, 0.5 / std::sqrt(lambda), 1.5 / std::sqrt(lambda), r_hi};
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
        double e = 0.0;
        value += detail::GK15::integrate(outer, cuts[i], cuts[i + 1], 8, tol, &e);
        err += e;
    }
    return {value, 0.0, 0, err};
}

/// SINR of the moving user towards its original serving BS, per sample.
/// Each sample draws a PPP(lambda) on a disc of radius radius_factor /
/// sqrt(lambda) around the start point, serves from the nearest BS, moves
/// the user by Dr at a uniform heading and draws Exp fading on every link.
inline std::vector<double> macro_sinr_samples(const ChannelParams& ch, double lambda, const MacroMobility& mob,
                                              std::size_t n_mc, std::uint64_t seed, unsigned workers = 1,
                                              double radius_factor = 10.0) {
    ch.validate();
    mob.validate();
    if (n_mc == 0) throw DomainError("macro_coverage_mc: n_mc must be positive");
    if (!(lambda > 0.0)) throw DomainError("macro_coverage_mc: lambda must be positive");
    const double radius = radius_factor / std::sqrt(lambda);
    const double mean_points = lambda * pi * radius * radius;
    const double dr = mob.delta_r();

    std::vector<double> sinr(n_mc, 0.0);
    const std::size_t batches = (n_mc + kBatchSize - 1) / kBatchSize;
    parallel_for(batches, workers, [&](std::size_t b) {
        Rng rng = make_stream(seed, {b});
        std::poisson_distribution<std::size_t> count(mean_points);
        std::exponential_distribution<double> fade(ch.lambda_h);
        std::vector<Point> pts;
        const std::size_t end = std::min(n_mc, (b + 1) * kBatchSize);
        for (std::size_t i = b * kBatchSize; i < end; ++i) {
            const std::size_t n = count(rng);
            pts.resize(n);
            std::size_t nearest = 0;
            double best = INFINITY;
            for (std::size_t j = 0; j < n; ++j) {
                const double r = radius * std::sqrt(uniform01(rng));
                const double th = uniform(rng, 0.0, 2.0 * pi);
                pts[j] = {r * std::cos(th), r * std::sin(th)};
                if (r < best) {
                    best = r;
                    nearest = j;
                }
            }
            const double heading = uniform(rng, 0.0, 2.0 * pi);
            const Point user{dr * std::cos(heading), dr * std::sin(heading)};
            const double noise = ch.noise.sample_power(rng);
            if (n == 0) {
                sinr[i] = 0.0;
                continue;
            }
            double signal = 0.0, interference = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
                const double p = ch.p_t * fade(rng) * std::pow(distance(pts[j], user), -ch.alpha);
                (j == nearest ? signal : interference) += p;
            }
            sinr[i] = signal / (noise + interference);
        }
    });
    return sinr;
}

/// P[SINR >= gamma0] for each threshold, all from the same samples.
inline std::vector<CoverageResult> macro_coverage_mc_sweep(const ChannelParams& ch, double lambda,
                                                           const MacroMobility& mob,
                                                           const std::vector<double>& gamma0s, std::size_t n_mc,
                                                           std::uint64_t seed, unsigned workers = 1,
                                                           double radius_factor = 10.0) {
    std::vector<double> s = macro_sinr_samples(ch, lambda, mob, n_mc, seed, workers, radius_factor);
    std::sort(s.begin(), s.end());
    std::vector<CoverageResult> out;
    for (double g : gamma0s) {
        const std::size_t hits = s.end() - std::lower_bound(s.begin(), s.end(), g);
        out.push_back(binomial_result(hits, n_mc));
    }
    return out;
}

inline CoverageResult macro_coverage_mc(const ChannelParams& ch, double lambda, const MacroMobility& mob,
                                        std::size_t n_mc, std::uint64_t seed, unsigned workers = 1,
                                        double radius_factor = 10.0) {
    return macro_coverage_mc_sweep(ch, lambda, mob, {ch.gamma0}, n_mc, seed, workers, radius_factor).front();
}

}  // namespace immnet
