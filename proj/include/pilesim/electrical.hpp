#pragma once

#include "pilesim/geometry.hpp"

#include <cstdint>
#include <limits>
#include <optional>
#include <span>

namespace pilesim {

/// Voltage divider readout: V_out = V_in * R2 / (R1 + R2), R1 being the sample.
struct ReadoutConfig {
    double v_in = 3.3;
    double r2_ohm = 10'000.0;
    /// Optional ADC quantization, 8..16 bits.
    std::optional<int> adc_bits;
};

void require_valid(const ReadoutConfig& cfg);

/// R1 value standing for an open circuit.
inline constexpr double kOpenCircuit = std::numeric_limits<double>::infinity();

inline constexpr double kWaterRelativePermittivity = 78.0;
inline constexpr double kVacuumPermittivityFPerM = 8.8541878128e-12;

struct DielectricState {
    double plate_area_cm2 = 25.0;
    double plate_gap_cm = 0.6;
    double effective_rel_permittivity = 2.0;
    double water_volume_fraction = 0.0;
};

struct MeasurementRecord {
    double r_eq_ohm = 0.0;
    double v_out = 0.0;
    /// NaN when no finite baseline exists.
    double delta_v_over_v0 = std::numeric_limits<double>::quiet_NaN();
    std::optional<double> capacitance_pf;
    std::uint64_t trial_seed = 0;
};

double divider_voltage(double r1_ohm, const ReadoutConfig& cfg);

/// (v - v0) / v0. Throws ZeroBaseline when v0 == 0.
double normalized_delta(double v, double v0);

/// 20 log10(mean|signal| / stddev(baseline)), sample standard deviation.
/// Throws DegenerateBaseline when the baseline has < 2 values or zero spread.
double snr_db(std::span<const double> signal_deltas, std::span<const double> baseline_deltas);

/// Linear volumetric mixing of water into the dry yarn permittivity.
double effective_permittivity(const SensorSpec& spec, double absorbed_fraction);

/// Fraction of the pile volume taken up by sprayed water, in [0, 1].
double absorbed_fraction(const SensorSpec& spec, double sprayed_ml);

/// Parallel-plate capacitance in pF.
double sensor_capacitance(const DielectricState& state);

/// Parallel-plate proxy for a realized model: plate area is the footprint
/// of the placed piles, gap is the mean strand top height.
DielectricState dielectric_state(const PileModel& model, const SensorSpec& spec,
                                 double absorbed_fraction);

}  // namespace pilesim
