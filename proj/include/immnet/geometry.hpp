#pragma once

#include <array>
#include <cmath>
#include <string>
#include <string_view>

#include "immnet/cubature.hpp"
#include "immnet/errors.hpp"
#include "immnet/random.hpp"

namespace immnet {

struct Point {
    double x = 0.0;
    double y = 0.0;
};

inline double distance(Point a, Point b) { return std::hypot(a.x - b.x, a.y - b.y); }

/// Axis-aligned rectangle in meters with positive area.
class Rect {
public:
    Rect(double x_min, double x_max, double y_min, double y_max)
        : x_min_(x_min), x_max_(x_max), y_min_(y_min), y_max_(y_max) {
        if (!(x_min < x_max) || !(y_min < y_max))
            throw DomainError("Rect: need x_min < x_max and y_min < y_max");
    }

    /// Rectangle of the given area and length/width ratio centered on `center`.
    static Rect centered(double area, double aspect = 1.0, Point center = {}) {
        if (!(area > 0.0) || !(aspect > 0.0)) throw DomainError("Rect: area and aspect must be positive");
        const double half_l = 0.5 * std::sqrt(area * aspect);
        const double half_w = 0.5 * std::sqrt(area / aspect);
        return {center.x - half_l, center.x + half_l, center.y - half_w, center.y + half_w};
    }

    double x_min() const { return x_min_; }
    double x_max() const { return x_max_; }
    double y_min() const { return y_min_; }
    double y_max() const { return y_max_; }
    double length() const { return x_max_ - x_min_; }
    double width() const { return y_max_ - y_min_; }
    double area() const { return length() * width(); }
    double diagonal() const { return std::hypot(length(), width()); }

    bool contains(Point p) const {
        return p.x >= x_min_ && p.x <= x_max_ && p.y >= y_min_ && p.y <= y_max_;
    }

    bool strictly_contains(const Rect& r) const {
        return r.x_min_ > x_min_ && r.x_max_ < x_max_ && r.y_min_ > y_min_ && r.y_max_ < y_max_;
    }

    Rect translated(double dx, double dy) const {
        return {x_min_ + dx, x_max_ + dx, y_min_ + dy, y_max_ + dy};
    }

    Point sample(Rng& rng) const { return {uniform(rng, x_min_, x_max_), uniform(rng, y_min_, y_max_)}; }

private:
    double x_min_, x_max_, y_min_, y_max_;
};

enum class RegionTag { Inside, Outside };

/// Which pair-distance statistic: both points in the community, one outside
/// and one inside, or both outside.
enum class RegionPair { InIn, OutIn, OutOut };

inline std::string_view to_string(RegionTag tag) { return tag == RegionTag::Inside ? "inside" : "outside"; }

inline std::string_view to_string(RegionPair pair) {
    switch (pair) {
        case RegionPair::InIn: return "in-in";
        case RegionPair::OutIn: return "out-in";
        case RegionPair::OutOut: return "out-out";
    }
    return "?";
}

/// The plane R_t (total) with the community rectangle R_c strictly inside it.
/// The outside region R_s = R_t \ R_c is the annular frame, handled as four
/// disjoint bands: top and bottom span the full plane width, left and right
/// span the community height.
class Layout {
public:
    Layout(Rect total, Rect community) : total_(total), community_(community) {
        if (!total_.strictly_contains(community_))
            throw DomainError("Layout: community must lie strictly inside the plane");
    }

    /// Both rectangles centered at the origin; areas in m^2.
    static Layout centered(double total_area, double community_area, double total_aspect = 1.0,
                           double community_aspect = 1.0) {
        if (!(community_area < total_area)) throw DomainError("Layout: community area must be below plane area");
        return {Rect::centered(total_area, total_aspect), Rect::centered(community_area, community_aspect)};
    }

    const Rect& total() const { return total_; }
    const Rect& community() const { return community_; }
    double total_area() const { return total_.area(); }
    double community_area() const { return community_.area(); }
    double outside_area() const { return total_.area() - community_.area(); }
    double area_ratio() const { return community_.area() / total_.area(); }
    double diagonal() const { return total_.diagonal(); }

    std::array<Rect, 4> outside_bands() const {
        const Rect& t = total_;
        const Rect& c = community_;
        return {Rect{t.x_min(), t.x_max(), c.y_max(), t.y_max()},
                Rect{t.x_min(), t.x_max(), t.y_min(), c.y_min()},
                Rect{t.x_min(), c.x_min(), c.y_min(), c.y_max()},
                Rect{c.x_max(), t.x_max(), c.y_min(), c.y_max()}};
    }

    Layout scaled(double c) const {
        auto scale = [c](const Rect& r) { return Rect{c * r.x_min(), c * r.x_max(), c * r.y_min(), c * r.y_max()}; };
        return {scale(total_), scale(community_)};
    }

    Layout translated(double dx, double dy) const {
        return {total_.translated(dx, dy), community_.translated(dx, dy)};
    }

private:
    Rect total_;
    Rect community_;
};

/// Inside iff p lies in the closed community rectangle.
inline RegionTag point_in_region(Point p, const Layout& layout) {
    if (!layout.total().contains(p)) throw DomainError("point_in_region: point outside the plane");
    return layout.community().contains(p) ? RegionTag::Inside : RegionTag::Outside;
}

inline Point sample_total(const Layout& layout, Rng& rng) { return layout.total().sample(rng); }

/// Uniform point over the chosen region. Outside is drawn by rejection from
/// the plane (acceptance probability S_s / S_t).
inline Point sample_uniform(RegionTag region, const Layout& layout, Rng& rng) {
    if (region == RegionTag::Inside) return layout.community().sample(rng);
    for (;;) {
        const Point p = layout.total().sample(rng);
        if (!layout.community().contains(p)) return p;
    }
}

/// One draw of |u - v| with u, v independent and uniform on the pair's regions.
inline double sample_pair_distance(RegionPair pair, const Layout& layout, Rng& rng) {
    switch (pair) {
        case RegionPair::InIn:
            return distance(sample_uniform(RegionTag::Inside, layout, rng),
                            sample_uniform(RegionTag::Inside, layout, rng));
        case RegionPair::OutIn:
            return distance(sample_uniform(RegionTag::Outside, layout, rng),
                            sample_uniform(RegionTag::Inside, layout, rng));
        case RegionPair::OutOut:
            return distance(sample_uniform(RegionTag::Outside, layout, rng),
                            sample_uniform(RegionTag::Outside, layout, rng));
    }
    return 0.0;
}

struct QuadratureSpec {
    /// Absolute tolerance on the mean distance in meters; <= 0 selects
    /// 1e-3 times the plane diagonal.
    double abs_tol = 0.0;
    std::size_t max_cells = 400000;
};

struct PairIntegral {
    double mean = 0.0;   // E|u - v| in meters
    double error = 0.0;  // bound on |mean - exact| from the cell estimates
    bool converged = false;
};

/// E|u - v| for u uniform on `a` and v uniform on `b` by adaptive 4-D
/// cubature of the Euclidean distance over a x b.
inline PairIntegral rect_pair_mean_distance(const Rect& a, const Rect& b, double abs_tol, std::size_t max_cells) {
    const double norm = a.area() * b.area();
    const Box<4> box{{a.x_min(), a.y_min(), b.x_min(), b.y_min()}, {a.x_max(), a.y_max(), b.x_max(), b.y_max()}};
    auto dist = [](const std::array<double, 4>& p) { return std::hypot(p[0] - p[2], p[1] - p[3]); };
    const CubatureResult r = adaptive_gauss(dist, box, abs_tol * norm, max_cells);
    return {r.value / norm, r.error / norm, r.converged};
}

/// Mean pair distance with its error bound. OutIn and OutOut are
/// area-weighted sums over the outside bands; since the weights sum to one,
/// running every band pair at the same tolerance bounds the total.
inline PairIntegral mean_pair_distance_estimate(RegionPair pair, const Layout& layout, QuadratureSpec spec = {}) {
    const double tol = spec.abs_tol > 0.0 ? spec.abs_tol : 1e-3 * layout.diagonal();
    const Rect& c = layout.community();
    const auto bands = layout.outside_bands();
    const double s_out = layout.outside_area();

    PairIntegral total{0.0, 0.0, true};
    auto add = [&](const Rect& a, const Rect& b, double weight) {
        const PairIntegral p = rect_pair_mean_distance(a, b, tol, spec.max_cells);
        total.mean += weight * p.mean;
        total.error += weight * p.error;
        total.converged = total.converged && p.converged;
    };

    switch (pair) {
        case RegionPair::InIn:
            add(c, c, 1.0);
            break;
        case RegionPair::OutIn:
            for (const Rect& band : bands) add(band, c, band.area() / s_out);
            break;
        case RegionPair::OutOut:
            for (std::size_t i = 0; i < bands.size(); ++i) {
                for (std::size_t j = i; j < bands.size(); ++j) {
                    const double w = bands[i].area() * bands[j].area() / (s_out * s_out);
                    add(bands[i], bands[j], i == j ? w : 2.0 * w);
                }
            }
            break;
    }
    return total;
}

/// E[d] for the chosen region pair in meters. Throws ConvergenceError
/// (carrying the best estimate and its bound) if the tolerance cannot be
/// met within the cell budget.
inline double mean_pair_distance(RegionPair pair, const Layout& layout, QuadratureSpec spec = {}) {
    const PairIntegral r = mean_pair_distance_estimate(pair, layout, spec);
    if (!r.converged)
        throw ConvergenceError("mean_pair_distance: tolerance not reached within cell budget", r.mean, r.error);
    return r.mean;
}

}  // namespace immnet
