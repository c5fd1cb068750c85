#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <ostream>
#include <string_view>
#include <vector>

#include "immnet/errors.hpp"
#include "immnet/geometry.hpp"
#include "immnet/random.hpp"

namespace immnet {

/// Truncated power-law pause: density proportional to t^(-1-beta) on
/// [t_min, t_max] seconds.
struct WaitModel {
    double beta = 1.0;
    double t_min = 10.0;
    double t_max = 1e4;

    void validate() const {
        if (!(beta > 0.0)) throw DomainError("WaitModel: beta must be positive");
        if (!(t_min > 0.0) || !(t_min <= t_max)) throw DomainError("WaitModel: need 0 < t_min <= t_max");
    }
};

/// Inverse-transform draw; always within [t_min, t_max].
inline double sample_wait(const WaitModel& m, Rng& rng) {
    if (m.t_min == m.t_max) return m.t_min;
    const double a = std::pow(m.t_min, -m.beta);
    const double b = std::pow(m.t_max, -m.beta);
    const double u = uniform01(rng);
    const double t = std::pow(a - u * (a - b), -1.0 / m.beta);
    return std::min(std::max(t, m.t_min), m.t_max);
}

/// Closed-form mean. With L = ln(t_max / t_min) it is
///   beta * t_min * [expm1((1 - beta) L) / (1 - beta)] / (1 - exp(-beta L)),
/// where the bracket becomes L at beta = 1.
inline double wait_mean(const WaitModel& m) {
    m.validate();
    if (m.t_min == m.t_max) return m.t_min;
    const double L = std::log(m.t_max / m.t_min);
    const double x = (1.0 - m.beta) * L;
    const double growth = x == 0.0 ? L : std::expm1(x) / (1.0 - m.beta);
    return m.beta * m.t_min * growth / -std::expm1(-m.beta * L);
}

struct ImmParams {
    double rho = 1.0;
    double gamma = 0.21;
    double speed = 5.0;  // m/s
    WaitModel wait_in{0.5, 10.0, 1e4};
    WaitModel wait_out{1.5, 10.0, 1e4};

    void validate() const {
        if (!(rho > 0.0 && rho <= 1.0)) throw DomainError("ImmParams: rho must lie in (0, 1]");
        if (!(gamma >= 0.0)) throw DomainError("ImmParams: gamma must be nonnegative");
        if (!(speed > 0.0)) throw DomainError("ImmParams: speed must be positive");
        wait_in.validate();
        wait_out.validate();
    }

    /// Exploration probability given `distinct` visited locations.
    double p_new(std::size_t distinct) const { return rho * std::pow(double(distinct), -gamma); }
};

enum class JumpKind { Explore, Return };

inline std::string_view to_string(JumpKind k) { return k == JumpKind::Explore ? "explore" : "return"; }

struct Jump {
    std::size_t n = 0;  // 1-based jump index
    Point from;
    Point to;
    RegionTag from_region = RegionTag::Outside;
    RegionTag to_region = RegionTag::Outside;
    JumpKind kind = JumpKind::Explore;
    std::size_t location = 0;  // index of the destination in Trajectory::locations()
    double travel_s = 0.0;
    double pause_s = 0.0;
};

/// Jump counts by (origin, destination) region.
struct JumpCounts {
    std::size_t ii = 0, io = 0, oi = 0, oo = 0;

    std::size_t total() const { return ii + io + oi + oo; }
    std::size_t into_community() const { return ii + oi; }

    void add(RegionTag from, RegionTag to) {
        const bool fi = from == RegionTag::Inside;
        const bool ti = to == RegionTag::Inside;
        (fi ? (ti ? ii : io) : (ti ? oi : oo)) += 1;
    }
};

/// A walk over the layout. The start point is location 0 with one visit.
/// visit_log holds one location index per visit, so a uniform pick from it
/// is a pick proportional to visit counts.
class Trajectory {
public:
    Trajectory(Point start, RegionTag start_region) : start_(start) {
        locations_.push_back(start);
        regions_.push_back(start_region);
        visits_.push_back(1);
        visit_log_.push_back(0);
    }

    Point start() const { return start_; }
    const std::vector<Point>& locations() const { return locations_; }
    const std::vector<RegionTag>& location_regions() const { return regions_; }
    const std::vector<std::size_t>& visits() const { return visits_; }
    const std::vector<std::uint32_t>& visit_log() const { return visit_log_; }
    const std::vector<Jump>& jumps() const { return jumps_; }
    const JumpCounts& counts() const { return counts_; }
    std::size_t distinct() const { return locations_.size(); }
    std::size_t current() const { return current_; }
    std::size_t size() const { return jumps_.size(); }

    void reserve(std::size_t n_jumps) {
        jumps_.reserve(n_jumps);
        visit_log_.reserve(n_jumps + 1);
    }

    /// Appends a jump to `dest` (an existing index, or locations().size() to
    /// add `fresh` as a new location).
    const Jump& append(std::size_t dest, Point fresh, RegionTag fresh_region, JumpKind kind, double speed,
                       double pause_s) {
        if (dest == locations_.size()) {
            locations_.push_back(fresh);
            regions_.push_back(fresh_region);
            visits_.push_back(0);
        }
        Jump j;
        j.n = jumps_.size() + 1;
        j.from = locations_[current_];
        j.to = locations_[dest];
        j.from_region = regions_[current_];
        j.to_region = regions_[dest];
        j.kind = kind;
        j.location = dest;
        j.travel_s = distance(j.from, j.to) / speed;
        j.pause_s = pause_s;

        ++visits_[dest];
        visit_log_.push_back(static_cast<std::uint32_t>(dest));
        counts_.add(j.from_region, j.to_region);
        current_ = dest;
        jumps_.push_back(j);
        return jumps_.back();
    }

private:
    Point start_;
    std::vector<Point> locations_;
    std::vector<RegionTag> regions_;
    std::vector<std::size_t> visits_;
    std::vector<std::uint32_t> visit_log_;
    std::vector<Jump> jumps_;
    JumpCounts counts_;
    std::size_t current_ = 0;
};

inline Trajectory start_trajectory(const Layout& layout, Rng& rng) {
    const Point p = sample_total(layout, rng);
    return {p, point_in_region(p, layout)};
}

/// One IMM step: explore a fresh uniform point with probability
/// rho * S^-gamma, otherwise return to an old location picked in proportion
/// to its visit count. The pause comes from the destination's wait model.
inline const Jump& next_jump(Trajectory& traj, const ImmParams& params, const Layout& layout, Rng& rng) {
    const bool explore = uniform01(rng) < params.p_new(traj.distinct());
    std::size_t dest = traj.distinct();
    Point fresh{};
    RegionTag region;
    if (explore) {
        fresh = sample_total(layout, rng);
        region = point_in_region(fresh, layout);
    } else {
        const auto& log = traj.visit_log();
        const std::size_t pick = std::uniform_int_distribution<std::size_t>{0, log.size() - 1}(rng);
        dest = log[pick];
        region = traj.location_regions()[dest];
    }
    const WaitModel& wait = region == RegionTag::Inside ? params.wait_in : params.wait_out;
    const double pause = sample_wait(wait, rng);
    return traj.append(dest, fresh, region, explore ? JumpKind::Explore : JumpKind::Return, params.speed, pause);
}

inline Trajectory simulate_imm(const ImmParams& params, const Layout& layout, std::size_t n_jumps,
                               std::uint64_t seed) {
    params.validate();
    if (n_jumps < 1) throw DomainError("simulate_imm: need at least one jump");
    Rng rng = make_stream(seed);
    Trajectory traj = start_trajectory(layout, rng);
    traj.reserve(n_jumps);
    for (std::size_t i = 0; i < n_jumps; ++i) next_jump(traj, params, layout, rng);
    return traj;
}

/// Random waypoint: every destination is fresh and uniform on the plane,
/// one wait model everywhere.
inline Trajectory simulate_rwp(double speed, const WaitModel& wait, const Layout& layout, std::size_t n_jumps,
                               std::uint64_t seed) {
    wait.validate();
    if (!(speed > 0.0)) throw DomainError("simulate_rwp: speed must be positive");
    if (n_jumps < 1) throw DomainError("simulate_rwp: need at least one jump");
    Rng rng = make_stream(seed);
    Trajectory traj = start_trajectory(layout, rng);
    traj.reserve(n_jumps);
    for (std::size_t i = 0; i < n_jumps; ++i) {
        const Point p = sample_total(layout, rng);
        const RegionTag region = point_in_region(p, layout);
        traj.append(traj.distinct(), p, region, JumpKind::Explore, speed, sample_wait(wait, rng));
    }
    return traj;
}

/// One row per jump: n,x_from,y_from,x_to,y_to,region,kind,travel_s,pause_s
inline void write_trajectory_csv(std::ostream& os, const Trajectory& traj) {
    os << "n,x_from,y_from,x_to,y_to,region,kind,travel_s,pause_s\n";
    char buf[256];
    for (const Jump& j : traj.jumps()) {
        std::snprintf(buf, sizeof buf, "%zu,%.3f,%.3f,%.3f,%.3f,%s,%s,%.6f,%.6f\n", j.n, j.from.x, j.from.y, j.to.x,
                      j.to.y, to_string(j.to_region).data(), to_string(j.kind).data(), j.travel_s, j.pause_s);
        os << buf;
    }
}

}  // namespace immnet
