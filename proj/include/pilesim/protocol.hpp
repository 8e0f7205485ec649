#pragma once

#include "pilesim/electrical.hpp"
#include "pilesim/geometry.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace pilesim {

struct CompressionSweep {
    std::vector<double> weights_g;
    double indenter_cm = 5.0;
};

struct BendingSweep {
    std::vector<double> diameters_cm;
    std::vector<BendDirection> directions;
};

struct TensileSweep {
    std::vector<StrainAxis> axes;
    double strain_percent = 13.3;
};

struct HumidityTest {
    double sprayed_ml = 5.0;
};

using ProtocolKind = std::variant<CompressionSweep, BendingSweep, TensileSweep, HumidityTest>;

struct Protocol {
    ProtocolKind kind;
    int trials = 50;
    std::uint64_t master_seed = 0;
};

/// Throws InvalidArgument on empty sweeps, negative or unsorted weights, trials < 1.
void require_valid(const Protocol& p);

std::string protocol_name(const ProtocolKind& kind);

/// Conditions in sweep order. Bending lists every diameter for the first
/// direction, then every diameter for the next.
std::vector<DeformationState> conditions(const ProtocolKind& kind);

/// Built-in protocols replaying the characterization sweeps:
/// "compression", "bending", "tensile", "humidity".
std::optional<ProtocolKind> builtin_protocol(const std::string& name);

struct ResultRow {
    std::string label;
    /// Mean normalized voltage change, or mean capacitance change (pF) for humidity.
    double mean_response = 0.0;
    double std_error = 0.0;
    double snr_db = 0.0;
    int n = 0;
    /// Trials dropped because the sample was an open circuit.
    int excluded = 0;
};

struct TrialRecord {
    int trial = 0;
    int condition = 0;
    MeasurementRecord measurement;
    /// Delta V / V0, or delta C in pF for humidity; NaN when excluded.
    double response = 0.0;
    bool open_circuit = false;
};

struct ProtocolResult {
    std::string sample;
    std::string protocol;
    std::vector<ResultRow> rows;
    /// Trial-major, condition-minor.
    std::vector<TrialRecord> records;
};

/// Counter-based seed for one (trial, condition) pair; stable across versions.
std::uint64_t split_seed(std::uint64_t master_seed, std::uint64_t trial, std::uint64_t condition);

/// Seeded Monte Carlo replay of a protocol. Results are identical for any
/// `threads` value.
ProtocolResult run_protocol(const SensorSpec& spec, const ReadoutConfig& cfg, const Protocol& p,
                            int threads = 1);

enum class SampleId { S1, S2, S3, S4, S5, S6, S7 };

inline constexpr SampleId kAllSamples[] = {SampleId::S1, SampleId::S2, SampleId::S3, SampleId::S4,
                                           SampleId::S5, SampleId::S6, SampleId::S7};

std::string to_string(SampleId id);
std::optional<SampleId> parse_sample_id(const std::string& text);

YarnSpec yarn_preset(int yarn_number);

SensorSpec preset(SampleId id);

/// The characterization assignment: S1-S7 compression, S5 bending, S2
/// tensile, S2/S5/S6/S7 humidity. `piles_per_cm` overrides every preset's density.
std::vector<ProtocolResult> paper_suite(int trials, std::uint64_t master_seed, int threads = 1,
                                        std::optional<double> piles_per_cm = std::nullopt);

}  // namespace pilesim
