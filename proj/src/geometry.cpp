#include "pilesim/geometry.hpp"

#include "pilesim/error.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

namespace pilesim {

namespace {

constexpr double kPi = std::numbers::pi;

// Loop piles are a single up-over-down arc; each cut half is half of that arc.
constexpr int kLoopPoints = 9;
constexpr int kCutPoints = 5;

// Both legs of a pile pass through one needle hole: leg centerlines sit
// this many yarn diameters apart at the base.
constexpr double kLegSeparationDiameters = 0.9;
// Rest loop half-width at its widest point, as a fraction of row pitch.
constexpr double kLoopHalfWidthPitch = 0.14;
// Extra half-width per unit fractional height loss, as a fraction of row pitch.
constexpr double kBulgeGainPitch = 1.0;
// Loops lean sideways by a uniform angle in [-max, max].
constexpr double kMaxLoopLeanDeg = 4.0;
// Released from the loop, cut halves spring apart in the loop plane (along
// the row); out-of-plane scatter of the splay azimuth is +-this.
constexpr double kCutAzimuthSpreadDeg = 10.0;

constexpr double deg_to_rad(double deg) { return deg * kPi / 180.0; }

/// Uniform draws from mt19937_64 with a fixed 53-bit mapping, so streams are
/// identical across standard library implementations.
class Uniform {
public:
    explicit Uniform(std::uint64_t seed) : engine_(seed) {}

    double operator()(double lo, double hi) {
        const double unit = static_cast<double>(engine_() >> 11) * 0x1.0p-53;
        return lo + (hi - lo) * unit;
    }

private:
    std::mt19937_64 engine_;
};

struct ArcTable {
    std::array<double, kLoopPoints> sin_t{};
    std::array<double, kLoopPoints> cos_t{};
};

// t runs from pi (left base) to 0 (right base); endpoints are exact so base
// points land on z = 0.
const ArcTable& arc_table() {
    static const ArcTable table = [] {
        ArcTable t;
        for (int k = 0; k < kLoopPoints; ++k) {
            const double angle = kPi * (1.0 - static_cast<double>(k) / (kLoopPoints - 1));
            t.sin_t[k] = std::sin(angle);
            t.cos_t[k] = std::cos(angle);
        }
        t.sin_t.front() = 0.0;
        t.sin_t.back() = 0.0;
        t.cos_t.front() = -1.0;
        t.cos_t.back() = 1.0;
        t.cos_t[kLoopPoints / 2] = 0.0;
        t.sin_t[kLoopPoints / 2] = 1.0;
        return t;
    }();
    return table;
}

struct ShapeLoad {
    double height_ratio = 1.0;  // h'/h
};

double leg_offset_cm(const SensorSpec& spec) {
    return 0.5 * kLegSeparationDiameters * spec.yarn.diameter_mm / 10.0;
}

std::vector<Vec3> loop_points(const Pile& pile, const SensorSpec& spec, const GridShape& grid,
                              ShapeLoad load) {
    const ArcTable& arc = arc_table();
    const double h = spec.pile_height_cm * load.height_ratio;
    const double a = leg_offset_cm(spec);
    const double b = 2.0 * grid.pitch_y_cm *
                     (kLoopHalfWidthPitch + kBulgeGainPitch * (1.0 - load.height_ratio));
    const double apex_shift = spec.pile_height_cm * std::tan(pile.lean_rad);

    std::vector<Vec3> pts(kLoopPoints);
    for (int k = 0; k < kLoopPoints; ++k) {
        const double s = arc.sin_t[k];
        const double c = arc.cos_t[k];
        pts[k] = {pile.anchor_x + s * apex_shift, pile.anchor_y + c * (a + b * s), h * s};
    }
    return pts;
}

// Rotates `p` about the vertical through `base`, tipping +z toward azimuth by `tilt`.
Vec3 tip_over(const Vec3& p, const Vec3& base, double tilt, double azimuth) {
    const Vec3 axis{-std::sin(azimuth), std::cos(azimuth), 0.0};
    const Vec3 v = p - base;
    const double ct = std::cos(tilt);
    const double st = std::sin(tilt);
    const Vec3 cross{axis.y * v.z - axis.z * v.y, axis.z * v.x - axis.x * v.z,
                     axis.x * v.y - axis.y * v.x};
    const double ad = dot(axis, v);
    return base + (ct * v + st * cross + (ad * (1.0 - ct)) * axis);
}

std::vector<Vec3> cut_half_points(const Pile& pile, int half, const SensorSpec& spec,
                                  const GridShape& grid, ShapeLoad load) {
    Pile upright = pile;
    upright.lean_rad = 0.0;
    const std::vector<Vec3> arc = loop_points(upright, spec, grid, ShapeLoad{});

    // Cut halves do not fold in place: they keep their shape and tip further
    // over so that tip height scales by the compaction ratio.
    double tilt = pile.tilt_rad[half];
    if (load.height_ratio < 1.0) {
        tilt = std::acos(std::clamp(std::cos(tilt) * load.height_ratio, 0.0, 1.0));
    }

    std::vector<Vec3> pts(kCutPoints);
    for (int k = 0; k < kCutPoints; ++k) {
        const int src = half == 0 ? k : kLoopPoints - 1 - k;
        pts[k] = arc[src];
    }
    const Vec3 base = pts.front();
    for (int k = 1; k < kCutPoints; ++k) {
        pts[k] = tip_over(pts[k], base, tilt, pile.azimuth_rad[half]);
    }
    return pts;
}

std::vector<double> segment_lengths(const std::vector<Vec3>& pts) {
    std::vector<double> out(pts.size() - 1);
    for (std::size_t i = 0; i + 1 < pts.size(); ++i) out[i] = distance(pts[i], pts[i + 1]);
    return out;
}

void require_built_from(const PileModel& model, const SensorSpec& spec) {
    if (model.shape != spec.pile_shape) {
        throw InvalidArgument("deform: model pile shape does not match spec");
    }
    const std::size_t per_pile = spec.pile_shape == PileShape::Loop ? 1 : 2;
    if (model.strands.size() != model.piles.size() * per_pile) {
        throw InvalidArgument("deform: model strand count does not match spec");
    }
}

PileModel compress(const PileModel& model, const SensorSpec& spec, const Compression& load) {
    const double cx = 0.5 * spec.base_width_cm;
    const double cy = 0.5 * spec.base_depth_cm;
    const double radius = 0.5 * load.indenter_diameter_cm;

    std::vector<std::size_t> covered;
    for (std::size_t i = 0; i < model.piles.size(); ++i) {
        const double dx = model.piles[i].anchor_x - cx;
        const double dy = model.piles[i].anchor_y - cy;
        if (dx * dx + dy * dy <= radius * radius) covered.push_back(i);
    }

    PileModel out = model;
    if (covered.empty()) return out;

    const double per_pile = load.mass_g / static_cast<double>(covered.size());
    const ShapeLoad shape_load{compaction_ratio(spec, per_pile)};
    for (std::size_t i : covered) {
        const Pile& pile = model.piles[i];
        if (model.shape == PileShape::Loop) {
            out.strands[i].points = loop_points(pile, spec, model.grid, shape_load);
        } else {
            for (int half = 0; half < 2; ++half) {
                out.strands[2 * i + half].points =
                    cut_half_points(pile, half, spec, model.grid, shape_load);
            }
        }
    }
    return out;
}

PileModel bend(const PileModel& model, const SensorSpec& spec, const Bending& b) {
    const bool concave = b.direction == BendDirection::Concave;
    const double rod_radius = 0.5 * b.rod_diameter_cm;
    // Concave: the pile is cushioned between rod and base, so the base bends
    // at rod radius + pile height and the tips meet the rod surface.
    const double radius = concave ? rod_radius + spec.pile_height_cm : rod_radius;

    double top = 0.0;
    for (const Strand& s : model.strands)
        for (const Vec3& p : s.points) top = std::max(top, p.z);
    if (concave && radius - top <= 0.0) {
        throw GeometryUnderflow("concave bend radius " + std::to_string(radius) +
                                " cm does not clear pile height " + std::to_string(top) + " cm");
    }

    const double mid_y = 0.5 * spec.base_depth_cm;
    const double side = concave ? -1.0 : 1.0;

    // Base point at arc position s, with unit normal pointing toward the pile.
    auto map = [&](const Vec3& p) {
        const double phi = (p.y - mid_y) / radius;
        const double sp = std::sin(phi);
        const double cp = std::cos(phi);
        // Convex: centre below the base; concave: centre above it.
        const Vec3 base{p.x, mid_y + radius * sp, side * (radius * cp - radius)};
        const Vec3 normal{0.0, side * sp, cp};
        return base + p.z * normal;
    };

    PileModel out = model;
    for (Strand& s : out.strands)
        for (Vec3& p : s.points) p = map(p);
    return out;
}

PileModel stretch(const PileModel& model, const SensorSpec& spec, const Strain& st) {
    const double e = st.strain_percent / 100.0;
    const double lateral = -spec.poisson_ratio * e;
    double exx = 0.0, eyy = 0.0, exy = 0.0;
    switch (st.axis) {
        case StrainAxis::X:
            exx = e;
            eyy = lateral;
            break;
        case StrainAxis::Y:
            exx = lateral;
            eyy = e;
            break;
        case StrainAxis::Bias45:
            // e along (1,1)/sqrt2, lateral along (1,-1)/sqrt2.
            exx = 0.5 * (e + lateral);
            eyy = 0.5 * (e + lateral);
            exy = 0.5 * (e - lateral);
            break;
    }
    const double cx = 0.5 * spec.base_width_cm;
    const double cy = 0.5 * spec.base_depth_cm;
    const std::size_t per_pile = model.shape == PileShape::Loop ? 1 : 2;

    PileModel out = model;
    for (std::size_t s = 0; s < out.strands.size(); ++s) {
        const Pile& pile = model.piles[s / per_pile];
        const double rx = pile.anchor_x - cx;
        const double ry = pile.anchor_y - cy;
        const Vec3 shift{exx * rx + exy * ry, exy * rx + eyy * ry, 0.0};
        for (Vec3& p : out.strands[s].points) p = p + shift;
    }
    return out;
}

}  // namespace

double dot(const Vec3& a, const Vec3& b) { return a.x * b.x + a.y * b.y + a.z * b.z; }
double norm(const Vec3& a) { return std::sqrt(dot(a, a)); }
double distance(const Vec3& a, const Vec3& b) { return norm(a - b); }

std::string to_string(PileShape shape) { return shape == PileShape::Loop ? "loop" : "cut"; }

std::string to_string(BendDirection direction) {
    return direction == BendDirection::Convex ? "convex" : "concave";
}

std::string to_string(StrainAxis axis) {
    switch (axis) {
        case StrainAxis::X: return "x";
        case StrainAxis::Y: return "y";
        case StrainAxis::Bias45: return "bias45";
    }
    return "?";
}

std::vector<SpecViolation> validate(const SensorSpec& spec) {
    std::vector<SpecViolation> out;
    auto check = [&](bool ok, const char* field, const char* message) {
        if (!ok) out.push_back({field, message});
    };
    // Written as !(x > 0) so NaN fails too.
    check(spec.base_width_cm > 0.0, "base_width_cm", "must be > 0");
    check(spec.base_depth_cm > 0.0, "base_depth_cm", "must be > 0");
    check(spec.pile_height_cm > 0.0, "pile_height_cm", "must be > 0");
    check(spec.stitch_density_per_cm > 0.0, "stitch_density_per_cm", "must be > 0");
    check(spec.yarn.diameter_mm > 0.0, "yarn.diameter_mm", "must be > 0");
    check(spec.yarn.linear_resistance_ohm_per_cm > 0.0, "yarn.linear_resistance_ohm_per_cm",
          "must be > 0");
    check(spec.yarn.dry_relative_permittivity >= 1.0, "yarn.dry_relative_permittivity",
          "must be >= 1");
    check(spec.yarn.water_retention >= 0.0 && spec.yarn.water_retention <= 1.0,
          "yarn.water_retention", "must be in [0, 1]");
    check(spec.contact_resistance_ohm > 0.0, "contact_resistance_ohm", "must be > 0");
    check(spec.stiffness_scale > 0.0, "stiffness_scale", "must be > 0");
    check(std::isfinite(spec.stiffness_exponent), "stiffness_exponent", "must be finite");
    check(spec.poisson_ratio >= 0.0 && spec.poisson_ratio < 0.5, "poisson_ratio",
          "must be in [0, 0.5)");
    check(spec.position_jitter_cm >= 0.0 && std::isfinite(spec.position_jitter_cm),
          "position_jitter_cm", "must be >= 0");
    check(spec.cut_splay_deg >= 0.0 && spec.cut_splay_deg < 90.0, "cut_splay_deg",
          "must be in [0, 90)");
    return out;
}

void require_valid(const SensorSpec& spec) {
    const auto violations = validate(spec);
    if (!violations.empty()) {
        throw SchemaError(violations.front().field, violations.front().message);
    }
}

GridShape grid_shape(const SensorSpec& spec) {
    GridShape g;
    g.columns = static_cast<int>(std::lround(spec.base_width_cm * spec.stitch_density_per_cm));
    g.rows_per_column =
        static_cast<int>(std::lround(spec.base_depth_cm * spec.stitch_density_per_cm));
    if (g.columns <= 0 || g.rows_per_column <= 0) {
        std::ostringstream msg;
        msg << "base " << spec.base_width_cm << " x " << spec.base_depth_cm << " cm at "
            << spec.stitch_density_per_cm << " piles/cm rounds to zero piles";
        throw ZeroArea(msg.str());
    }
    g.pitch_x_cm = spec.base_width_cm / g.columns;
    g.pitch_y_cm = spec.base_depth_cm / g.rows_per_column;
    return g;
}

std::size_t PileModel::point_count() const {
    std::size_t n = 0;
    for (const Strand& s : strands) n += s.points.size();
    return n;
}

std::string describe(const DeformationState& state) {
    std::ostringstream os;
    std::visit(
        [&](const auto& s) {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, Rest>) {
                os << "rest";
            } else if constexpr (std::is_same_v<T, Compression>) {
                os << s.mass_g << "g";
            } else if constexpr (std::is_same_v<T, Bending>) {
                os << to_string(s.direction) << "_" << s.rod_diameter_cm << "cm";
            } else {
                os << to_string(s.axis) << "_" << s.strain_percent << "pct";
            }
        },
        state);
    return os.str();
}

void require_valid(const DeformationState& state) {
    std::visit(
        [](const auto& s) {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, Compression>) {
                if (!(s.mass_g >= 0.0)) throw InvalidArgument("compression mass_g must be >= 0");
                if (!(s.indenter_diameter_cm > 0.0))
                    throw InvalidArgument("indenter_diameter_cm must be > 0");
            } else if constexpr (std::is_same_v<T, Bending>) {
                if (!(s.rod_diameter_cm > 0.0))
                    throw InvalidArgument("rod_diameter_cm must be > 0");
            } else if constexpr (std::is_same_v<T, Strain>) {
                if (!(s.strain_percent >= 0.0 && s.strain_percent <= 20.0))
                    throw InvalidArgument("strain_percent must be in [0, 20]");
            }
        },
        state);
}

double compaction_ratio(const SensorSpec& spec, double per_pile_load_g) {
    const double k = spec.stiffness_scale * std::pow(spec.pile_height_cm, spec.stiffness_exponent);
    return k / (k + per_pile_load_g);
}

double bend_spacing_scale(const SensorSpec& spec, const Bending& bend) {
    const double h = spec.pile_height_cm;
    const double rod = 0.5 * bend.rod_diameter_cm;
    if (bend.direction == BendDirection::Convex) return (rod + h) / rod;
    const double r = rod + h;
    return (r - h) / r;
}

PileModel build_pile_model(const SensorSpec& spec, std::uint64_t seed) {
    require_valid(spec);
    const GridShape grid = grid_shape(spec);

    PileModel model;
    model.shape = spec.pile_shape;
    model.grid = grid;
    model.rng_seed = seed;

    Uniform uniform(seed);
    const double jitter = spec.position_jitter_cm;
    const double max_lean = deg_to_rad(kMaxLoopLeanDeg);
    const double max_tilt = deg_to_rad(spec.cut_splay_deg);
    const double max_azimuth = deg_to_rad(kCutAzimuthSpreadDeg);

    model.piles.reserve(static_cast<std::size_t>(grid.pile_count()));
    for (int c = 0; c < grid.columns; ++c) {
        for (int r = 0; r < grid.rows_per_column; ++r) {
            Pile p;
            p.column = c;
            p.row_position = r;
            p.anchor_x = (c + 0.5) * grid.pitch_x_cm + uniform(-jitter, jitter);
            p.anchor_y = (r + 0.5) * grid.pitch_y_cm + uniform(-jitter, jitter);
            if (spec.pile_shape == PileShape::Loop) {
                p.lean_rad = uniform(-max_lean, max_lean);
            } else {
                for (int half = 0; half < 2; ++half) {
                    p.tilt_rad[half] = uniform(0.0, max_tilt);
                    // Released from the loop, each half springs outward along the row.
                    const double outward = half == 0 ? -0.5 * kPi : 0.5 * kPi;
                    p.azimuth_rad[half] = outward + uniform(-max_azimuth, max_azimuth);
                }
            }
            model.piles.push_back(p);
        }
    }

    const double radius = spec.yarn.radius_cm();
    for (std::size_t i = 0; i < model.piles.size(); ++i) {
        const Pile& pile = model.piles[i];
        auto add = [&](std::vector<Vec3> pts) {
            Strand s;
            s.segment_yarn_cm = segment_lengths(pts);
            s.points = std::move(pts);
            s.radius_cm = radius;
            s.pile_index = static_cast<int>(i);
            model.strands.push_back(std::move(s));
        };
        if (spec.pile_shape == PileShape::Loop) {
            add(loop_points(pile, spec, grid, ShapeLoad{}));
        } else {
            add(cut_half_points(pile, 0, spec, grid, ShapeLoad{}));
            add(cut_half_points(pile, 1, spec, grid, ShapeLoad{}));
        }
    }

    for (int s = 0; s < static_cast<int>(model.strands.size()); ++s) {
        const Strand& strand = model.strands[s];
        for (int k = 0; k < static_cast<int>(strand.points.size()); ++k) {
            const Vec3& p = strand.points[k];
            if (p.z != 0.0) continue;
            if (p.y <= kTerminalStripCm) model.terminal_a.push_back({s, k});
            if (p.y >= spec.base_depth_cm - kTerminalStripCm) model.terminal_b.push_back({s, k});
        }
    }

    if (spec.pile_shape == PileShape::Loop) {
        const int last = kLoopPoints - 1;
        for (int c = 0; c < grid.columns; ++c) {
            for (int r = 0; r + 1 < grid.rows_per_column; ++r) {
                const int a = c * grid.rows_per_column + r;
                const int b = a + 1;
                RowLink link{{a, last}, {b, 0}, 0.0};
                link.yarn_cm = distance(model.strands[a].points[last], model.strands[b].points[0]);
                model.row_links.push_back(link);
            }
        }
    }
    return model;
}

PileModel deform(const PileModel& model, const SensorSpec& spec, const DeformationState& state) {
    require_valid(state);
    require_built_from(model, spec);
    return std::visit(
        [&](const auto& s) -> PileModel {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, Rest>) {
                return model;
            } else if constexpr (std::is_same_v<T, Compression>) {
                return compress(model, spec, s);
            } else if constexpr (std::is_same_v<T, Bending>) {
                return bend(model, spec, s);
            } else {
                return stretch(model, spec, s);
            }
        },
        state);
}

}  // namespace pilesim
