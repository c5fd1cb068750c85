#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "immnet/errors.hpp"
#include "immnet/geometry.hpp"
#include "immnet/mobility.hpp"
#include "immnet/parallel.hpp"

namespace immnet {

struct TimeFractions {
    double pi_c_in = 0.0;
    double pi_c_out = 1.0;
    double pi_pause = 0.0;
    double total_time_s = 0.0;
    double community_time_s = 0.0;
    double pause_time_s = 0.0;
};

/// How travel time is charged to the community.
///  JumpAttributed: the whole travel of a jump ending inside counts, as do
///    pauses at inside locations. Matches the closed form's accounting.
///  SegmentClipped: travel counts by the fraction of the segment that lies
///    geometrically inside the community.
enum class Attribution { JumpAttributed, SegmentClipped };

/// Fraction of segment a-b inside rect r (Liang-Barsky clipping).
inline double segment_fraction_inside(Point a, Point b, const Rect& r) {
    const double dx = b.x - a.x, dy = b.y - a.y;
    if (dx == 0.0 && dy == 0.0) return r.contains(a) ? 1.0 : 0.0;
    double t0 = 0.0, t1 = 1.0;
    const double p[4] = {-dx, dx, -dy, dy};
    const double q[4] = {a.x - r.x_min(), r.x_max() - a.x, a.y - r.y_min(), r.y_max() - a.y};
    for (int i = 0; i < 4; ++i) {
        if (p[i] == 0.0) {
            if (q[i] < 0.0) return 0.0;
            continue;
        }
        const double t = q[i] / p[i];
        if (p[i] < 0.0) {
            if (t > t1) return 0.0;
            if (t > t0) t0 = t;
        } else {
            if (t < t0) return 0.0;
            if (t < t1) t1 = t;
        }
    }
    return t1 - t0;
}

/// Running time totals for one trajectory.
struct TimeTotals {
    double total = 0.0;
    double community = 0.0;
    double pause = 0.0;

    void add(const Jump& j, const Layout& layout, Attribution mode) {
        const bool in = j.to_region == RegionTag::Inside;
        total += j.travel_s + j.pause_s;
        pause += j.pause_s;
        if (in) community += j.pause_s;
        if (mode == Attribution::JumpAttributed) {
            if (in) community += j.travel_s;
        } else {
            community += j.travel_s * segment_fraction_inside(j.from, j.to, layout.community());
        }
    }

    TimeFractions fractions() const {
        if (!(total > 0.0)) throw DomainError("empirical_fractions: total time is zero");
        TimeFractions f;
        f.total_time_s = total;
        f.community_time_s = community;
        f.pause_time_s = pause;
        f.pi_c_in = community / total;
        f.pi_c_out = 1.0 - f.pi_c_in;
        f.pi_pause = pause / total;
        return f;
    }
};

/// Time fractions over the first `prefix` jumps (all jumps by default).
inline TimeFractions empirical_fractions(const Trajectory& traj, const Layout& layout, Attribution mode,
                                         std::size_t prefix = static_cast<std::size_t>(-1)) {
    if (traj.size() == 0) throw DomainError("empirical_fractions: empty trajectory");
    TimeTotals acc;
    const std::size_t n = std::min(prefix, traj.size());
    for (std::size_t i = 0; i < n; ++i) acc.add(traj.jumps()[i], layout, mode);
    return acc.fractions();
}

/// Arguments of the closed-form time fractions. Lengths in meters, times in
/// seconds, speed in m/s.
struct MobilityInputs {
    double ratio = 0.1;  // S_c / S_t
    double d_ii = 0.0;
    double d_oi = 0.0;
    double d_oo = 0.0;
    double wait_in = 0.0;
    double wait_out = 0.0;
    double speed = 5.0;

    void validate() const {
        if (!(ratio > 0.0 && ratio < 1.0)) throw DomainError("MobilityInputs: ratio must lie in (0, 1)");
        if (!(d_ii > 0.0 && d_oi > 0.0 && d_oo > 0.0)) throw DomainError("MobilityInputs: distances must be positive");
        if (!(wait_in >= 0.0 && wait_out >= 0.0)) throw DomainError("MobilityInputs: waits must be nonnegative");
        if (!(speed > 0.0)) throw DomainError("MobilityInputs: speed must be positive");
    }
};

namespace detail {

struct FractionTerms {
    double num_in;
    double num_pause;
    double den;
};

inline FractionTerms fraction_terms(const MobilityInputs& in) {
    in.validate();
    const double r = in.ratio, q = 1.0 - r;
    const double move_in = (r * r * in.d_ii + q * r * in.d_oi) / in.speed;
    const double move_all = (r * r * in.d_ii + 2.0 * r * q * in.d_oi + q * q * in.d_oo) / in.speed;
    const double pause_in = r * in.wait_in;
    const double pause_all = r * in.wait_in + q * in.wait_out;
    return {move_in + pause_in, pause_all, move_all + pause_all};
}

}  // namespace detail

/// Long-run fraction of time inside the community.
inline double analytic_pi_c_in(const MobilityInputs& in) {
    const auto t = detail::fraction_terms(in);
    return t.num_in / t.den;
}

inline double analytic_pi_c_out(const MobilityInputs& in) { return 1.0 - analytic_pi_c_in(in); }

/// Long-run fraction of time spent pausing.
inline double analytic_pi_pause(const MobilityInputs& in) {
    const auto t = detail::fraction_terms(in);
    return t.num_pause / t.den;
}

/// Inputs for a layout and parameter set: quadrature distance means and
/// closed-form wait means.
inline MobilityInputs make_mobility_inputs(const Layout& layout, const ImmParams& params,
                                           const QuadratureSpec& quad = {}) {
    MobilityInputs in;
    in.ratio = layout.area_ratio();
    in.d_ii = mean_pair_distance(RegionPair::InIn, layout, quad);
    in.d_oi = mean_pair_distance(RegionPair::OutIn, layout, quad);
    in.d_oo = mean_pair_distance(RegionPair::OutOut, layout, quad);
    in.wait_in = wait_mean(params.wait_in);
    in.wait_out = wait_mean(params.wait_out);
    in.speed = params.speed;
    return in;
}

struct EnsembleSpec {
    std::size_t n_users = 200;
    std::size_t n_jumps = 1000;
    std::uint64_t seed = 1;
    unsigned workers = 1;
    Attribution attribution = Attribution::JumpAttributed;
};

/// Pooled time fractions over independent users. pi_c_in and pi_pause are
/// ratio estimators (sum of per-user numerators over sum of per-user totals)
/// with delta-method standard errors across users.
struct EnsembleFractions {
    TimeFractions pooled;
    double se_pi_c_in = 0.0;
    double se_pi_pause = 0.0;
    double hit_fraction = 0.0;  // jumps ending inside / all jumps
    double se_hit_fraction = 0.0;
    std::size_t users = 0;
    std::size_t jumps = 0;
};

namespace detail {

struct UserTotals {
    TimeTotals times;
    std::size_t hits = 0;
};

inline EnsembleFractions combine_users(const std::vector<UserTotals>& users, std::size_t n_jumps) {
    const std::size_t n = users.size();
    if (n == 0) throw DomainError("ensemble: need at least one user");
    TimeTotals sum;
    std::size_t hits = 0;
    for (const UserTotals& u : users) {
        sum.total += u.times.total;
        sum.community += u.times.community;
        sum.pause += u.times.pause;
        hits += u.hits;
    }
    EnsembleFractions out;
    out.pooled = sum.fractions();
    out.users = n;
    out.jumps = n * n_jumps;
    out.hit_fraction = double(hits) / double(out.jumps);
    if (n > 1) {
        const double mean_total = sum.total / n;
        double vc = 0.0, vp = 0.0, vh = 0.0;
        for (const UserTotals& u : users) {
            const double rc = u.times.community - out.pooled.pi_c_in * u.times.total;
            const double rp = u.times.pause - out.pooled.pi_pause * u.times.total;
            const double rh = double(u.hits) / n_jumps - out.hit_fraction;
            vc += rc * rc;
            vp += rp * rp;
            vh += rh * rh;
        }
        const double scale = 1.0 / (double(n) * double(n - 1));
        out.se_pi_c_in = std::sqrt(vc * scale) / mean_total;
        out.se_pi_pause = std::sqrt(vp * scale) / mean_total;
        out.se_hit_fraction = std::sqrt(vh * scale);
    }
    return out;
}

template <class Simulate>
EnsembleFractions run_ensemble(const Layout& layout, const EnsembleSpec& spec, Simulate&& simulate) {
    if (spec.n_users == 0 || spec.n_jumps == 0) throw DomainError("ensemble: need users and jumps");
    std::vector<UserTotals> users(spec.n_users);
    parallel_for(spec.n_users, spec.workers, [&](std::size_t u) {
        const Trajectory t = simulate(stream_seed(spec.seed, {u}));
        UserTotals& out = users[u];
        for (const Jump& j : t.jumps()) {
            out.times.add(j, layout, spec.attribution);
            out.hits += j.to_region == RegionTag::Inside;
        }
    });
    return combine_users(users, spec.n_jumps);
}

}  // namespace detail

/// User u runs on stream (seed, u), so the result does not depend on the
/// worker count.
inline EnsembleFractions imm_ensemble(const ImmParams& params, const Layout& layout, const EnsembleSpec& spec) {
    params.validate();
    return detail::run_ensemble(layout, spec, [&](std::uint64_t s) {
        return simulate_imm(params, layout, spec.n_jumps, s);
    });
}

inline EnsembleFractions rwp_ensemble(double speed, const WaitModel& wait, const Layout& layout,
                                      const EnsembleSpec& spec) {
    return detail::run_ensemble(layout, spec, [&](std::uint64_t s) {
        return simulate_rwp(speed, wait, layout, spec.n_jumps, s);
    });
}

}  // namespace immnet
