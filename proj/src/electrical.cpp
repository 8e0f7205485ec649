#include "pilesim/electrical.hpp"

#include "pilesim/error.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace pilesim {

namespace {

// Water uptake constants, tuned only to keep the wetting order of the
// reference samples (thin loop > thin cut > very thin loop > thick loop).
constexpr double kPenetrationLimitMm = 0.6;
constexpr double kLowRetentionBelowMm = 0.3;
constexpr double kLowRetentionFactor = 0.4;
constexpr double kCutConnectivity = 0.7;

double penetration(double diameter_mm) {
    return diameter_mm >= kPenetrationLimitMm ? std::min(1.0, kPenetrationLimitMm / diameter_mm)
                                              : 1.0;
}

double retention_factor(double diameter_mm) {
    return diameter_mm < kLowRetentionBelowMm ? kLowRetentionFactor : 1.0;
}

}  // namespace

void require_valid(const ReadoutConfig& cfg) {
    if (!(cfg.v_in > 0.0)) throw InvalidArgument("readout: v_in must be > 0");
    if (!(cfg.r2_ohm > 0.0)) throw InvalidArgument("readout: r2_ohm must be > 0");
    if (cfg.adc_bits && (*cfg.adc_bits < 8 || *cfg.adc_bits > 16))
        throw InvalidArgument("readout: adc_bits must be in 8..16");
}

double divider_voltage(double r1_ohm, const ReadoutConfig& cfg) {
    if (std::isnan(r1_ohm) || r1_ohm < 0.0)
        throw InvalidArgument("divider_voltage: r1 must be >= 0 or open circuit");
    double v = std::isinf(r1_ohm) ? 0.0 : cfg.v_in * cfg.r2_ohm / (r1_ohm + cfg.r2_ohm);
    if (cfg.adc_bits) {
        const double levels = std::ldexp(1.0, *cfg.adc_bits) - 1.0;
        const double step = cfg.v_in / levels;
        v = std::round(v / step) * step;
    }
    return v;
}

double normalized_delta(double v, double v0) {
    if (v0 == 0.0) throw ZeroBaseline("normalized_delta: baseline voltage is zero");
    return (v - v0) / v0;
}

double snr_db(std::span<const double> signal_deltas, std::span<const double> baseline_deltas) {
    if (signal_deltas.empty()) throw InvalidArgument("snr_db: empty signal");
    if (baseline_deltas.size() < 2)
        throw DegenerateBaseline("snr_db: baseline needs at least two values");

    double signal = 0.0;
    for (double s : signal_deltas) signal += std::abs(s);
    signal /= static_cast<double>(signal_deltas.size());

    const auto [lo, hi] = std::minmax_element(baseline_deltas.begin(), baseline_deltas.end());
    if (*lo == *hi) throw DegenerateBaseline("snr_db: baseline standard deviation is zero");

    double mean = 0.0;
    for (double b : baseline_deltas) mean += b;
    mean /= static_cast<double>(baseline_deltas.size());
    double ss = 0.0;
    for (double b : baseline_deltas) ss += (b - mean) * (b - mean);
    const double sd = std::sqrt(ss / static_cast<double>(baseline_deltas.size() - 1));
    if (!(sd > 0.0)) throw DegenerateBaseline("snr_db: baseline standard deviation is zero");

    return 20.0 * std::log10(signal / sd);
}

double effective_permittivity(const SensorSpec& spec, double absorbed_fraction) {
    if (!(absorbed_fraction >= 0.0 && absorbed_fraction <= 1.0))
        throw InvalidArgument("effective_permittivity: absorbed fraction must be in [0, 1]");
    return absorbed_fraction * kWaterRelativePermittivity +
           (1.0 - absorbed_fraction) * spec.yarn.dry_relative_permittivity;
}

double absorbed_fraction(const SensorSpec& spec, double sprayed_ml) {
    if (!(sprayed_ml >= 0.0)) throw InvalidArgument("absorbed_fraction: sprayed volume must be >= 0");
    const double d = spec.yarn.diameter_mm;
    const double connectivity = spec.pile_shape == PileShape::Loop ? 1.0 : kCutConnectivity;
    // 1 cm^3 == 1 mL.
    const double pile_volume_ml = spec.base_width_cm * spec.base_depth_cm * spec.pile_height_cm;
    const double held =
        sprayed_ml * spec.yarn.water_retention * retention_factor(d) * penetration(d) * connectivity;
    return std::clamp(held / pile_volume_ml, 0.0, 1.0);
}

double sensor_capacitance(const DielectricState& state) {
    if (!(state.plate_area_cm2 > 0.0) || !(state.plate_gap_cm > 0.0) ||
        !(state.effective_rel_permittivity >= 1.0))
        throw InvalidArgument("sensor_capacitance: invalid dielectric state");
    const double area_m2 = state.plate_area_cm2 * 1e-4;
    const double gap_m = state.plate_gap_cm * 1e-2;
    return kVacuumPermittivityFPerM * state.effective_rel_permittivity * area_m2 / gap_m * 1e12;
}

DielectricState dielectric_state(const PileModel& model, const SensorSpec& spec,
                                 double absorbed) {
    if (model.piles.empty() || model.strands.empty())
        throw InvalidArgument("dielectric_state: empty model");
    double x_lo = model.piles.front().anchor_x, x_hi = x_lo;
    double y_lo = model.piles.front().anchor_y, y_hi = y_lo;
    for (const Pile& p : model.piles) {
        x_lo = std::min(x_lo, p.anchor_x);
        x_hi = std::max(x_hi, p.anchor_x);
        y_lo = std::min(y_lo, p.anchor_y);
        y_hi = std::max(y_hi, p.anchor_y);
    }
    double top = 0.0;
    for (const Strand& s : model.strands) {
        double strand_top = 0.0;
        for (const Vec3& p : s.points) strand_top = std::max(strand_top, p.z);
        top += strand_top;
    }

    DielectricState st;
    st.plate_area_cm2 =
        (x_hi - x_lo + model.grid.pitch_x_cm) * (y_hi - y_lo + model.grid.pitch_y_cm);
    st.plate_gap_cm = top / static_cast<double>(model.strands.size());
    st.effective_rel_permittivity = effective_permittivity(spec, absorbed);
    st.water_volume_fraction = absorbed;
    return st;
}

}  // namespace pilesim
