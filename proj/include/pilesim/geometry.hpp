#pragma once

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

namespace pilesim {

struct Vec3 {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;

    friend Vec3 operator+(const Vec3& a, const Vec3& b) { return {a.x + b.x, a.y + b.y, a.z + b.z}; }
    friend Vec3 operator-(const Vec3& a, const Vec3& b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }
    friend Vec3 operator*(double s, const Vec3& a) { return {s * a.x, s * a.y, s * a.z}; }
    friend bool operator==(const Vec3&, const Vec3&) = default;
};

double dot(const Vec3& a, const Vec3& b);
double norm(const Vec3& a);
double distance(const Vec3& a, const Vec3& b);

enum class PileShape { Loop, Cut };

std::string to_string(PileShape shape);

struct YarnSpec {
    double diameter_mm = 0.4;
    double linear_resistance_ohm_per_cm = 5300.0;
    double dry_relative_permittivity = 2.0;
    /// Fraction of incident water a unit pile volume can hold, in [0, 1].
    double water_retention = 0.6;

    double radius_cm() const { return diameter_mm / 20.0; }
    friend bool operator==(const YarnSpec&, const YarnSpec&) = default;
};

/// Full tufting parameterization of one sample. Defaults describe the
/// reference loop sample (0.4 mm yarn, 0.6 cm loops, 6 piles/cm on 5x5 cm).
struct SensorSpec {
    double base_width_cm = 5.0;
    double base_depth_cm = 5.0;
    double pile_height_cm = 0.6;
    /// Piles per cm along each grid axis.
    double stitch_density_per_cm = 6.0;
    PileShape pile_shape = PileShape::Loop;
    YarnSpec yarn;
    double contact_resistance_ohm = 50.0;
    /// Per-pile load (g) at which a 1 cm pile halves its height.
    double stiffness_scale = 10.0;
    double stiffness_exponent = 2.0;
    double poisson_ratio = 0.30;
    double position_jitter_cm = 0.03;
    double cut_splay_deg = 25.0;

    friend bool operator==(const SensorSpec&, const SensorSpec&) = default;
};

/// One violated invariant, addressed by its field path (e.g. "yarn.diameter_mm").
struct SpecViolation {
    std::string field;
    std::string message;
};

std::vector<SpecViolation> validate(const SensorSpec& spec);

/// Throws SchemaError on the first violation.
void require_valid(const SensorSpec& spec);

/// Rows run along y; columns are indexed along x.
struct GridShape {
    int columns = 0;
    int rows_per_column = 0;
    double pitch_x_cm = 0.0;
    double pitch_y_cm = 0.0;

    int pile_count() const { return columns * rows_per_column; }
    friend bool operator==(const GridShape&, const GridShape&) = default;
};

/// Throws ZeroArea when either axis rounds to zero piles.
GridShape grid_shape(const SensorSpec& spec);

/// Random shape parameters drawn once per pile at build time.
struct Pile {
    double anchor_x = 0.0;
    double anchor_y = 0.0;
    int column = 0;
    int row_position = 0;
    /// Loops: sideways lean of the loop plane (rad).
    double lean_rad = 0.0;
    /// Cut piles: splay tilt and azimuth (rad) of the two half-strands.
    double tilt_rad[2] = {0.0, 0.0};
    double azimuth_rad[2] = {0.0, 0.0};

    friend bool operator==(const Pile&, const Pile&) = default;
};

struct Strand {
    std::vector<Vec3> points;
    /// Yarn length of each segment at build time. Yarn is inextensible, so
    /// deformation moves points but never changes these.
    std::vector<double> segment_yarn_cm;
    double radius_cm = 0.0;
    int pile_index = 0;

    friend bool operator==(const Strand&, const Strand&) = default;
};

struct PointRef {
    int strand = 0;
    int point = 0;
    friend bool operator==(const PointRef&, const PointRef&) = default;
    friend auto operator<=>(const PointRef&, const PointRef&) = default;
};

/// Back-side yarn run joining consecutive loop piles of one tufted row.
struct RowLink {
    PointRef from;
    PointRef to;
    double yarn_cm = 0.0;
    friend bool operator==(const RowLink&, const RowLink&) = default;
};

struct PileModel {
    std::vector<Pile> piles;
    std::vector<Strand> strands;
    std::vector<RowLink> row_links;
    /// Base points wired to each terminal (edge strips).
    std::vector<PointRef> terminal_a;
    std::vector<PointRef> terminal_b;
    PileShape shape = PileShape::Loop;
    GridShape grid;
    std::uint64_t rng_seed = 0;

    std::size_t point_count() const;
    friend bool operator==(const PileModel&, const PileModel&) = default;
};

/// Depth of the terminal strips along the two base edges at y = 0 and y = depth.
inline constexpr double kTerminalStripCm = 0.25;

// Deformation states -------------------------------------------------------

struct Rest {};

struct Compression {
    double mass_g = 0.0;
    double indenter_diameter_cm = 5.0;
};

enum class BendDirection { Convex, Concave };

struct Bending {
    double rod_diameter_cm = 1.0;
    BendDirection direction = BendDirection::Convex;
};

enum class StrainAxis { X, Y, Bias45 };

struct Strain {
    StrainAxis axis = StrainAxis::X;
    double strain_percent = 0.0;
};

using DeformationState = std::variant<Rest, Compression, Bending, Strain>;

std::string to_string(BendDirection direction);
std::string to_string(StrainAxis axis);
std::string describe(const DeformationState& state);

/// Throws InvalidArgument on out-of-range state fields.
void require_valid(const DeformationState& state);

PileModel build_pile_model(const SensorSpec& spec, std::uint64_t seed);

PileModel deform(const PileModel& model, const SensorSpec& spec, const DeformationState& state);

/// Compacted height ratio h'/h = K / (K + P) for a per-pile load P (g).
double compaction_ratio(const SensorSpec& spec, double per_pile_load_g);

/// Tip spacing scale at height h for a bend, > 1 convex and < 1 concave.
double bend_spacing_scale(const SensorSpec& spec, const Bending& bend);

}  // namespace pilesim
