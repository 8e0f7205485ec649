#include "pilesim/protocol.hpp"

#include "pilesim/error.hpp"
#include "pilesim/network.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <sstream>
#include <thread>

namespace pilesim {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

std::string format_number(double v) {
    std::ostringstream os;
    os.imbue(std::locale::classic());
    os << v;
    return os.str();
}

std::string condition_label(const DeformationState& state) {
    return std::visit(
        [](const auto& s) -> std::string {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, Compression>) {
                return format_number(s.mass_g) + "g";
            } else if constexpr (std::is_same_v<T, Bending>) {
                return to_string(s.direction) + "_" + format_number(s.rod_diameter_cm) + "cm";
            } else if constexpr (std::is_same_v<T, Strain>) {
                return to_string(s.axis) + "_" + format_number(s.strain_percent) + "pct";
            } else {
                return "rest";
            }
        },
        state);
}

/// R_eq of a model, or +inf for an open circuit.
double solve_model(const PileModel& model, const SensorSpec& spec) {
    const ContactSet contacts = detect_contacts(model);
    const ResistorNetwork net = assemble_network(model, contacts, spec);
    try {
        return equivalent_resistance(net);
    } catch (const OpenCircuit&) {
        return kOpenCircuit;
    }
}

std::vector<TrialRecord> run_trial(const SensorSpec& spec, const ReadoutConfig& cfg,
                                   const Protocol& p, int trial) {
    const std::uint64_t seed = split_seed(p.master_seed, static_cast<std::uint64_t>(trial), 0);
    const PileModel model = build_pile_model(spec, seed);
    std::vector<TrialRecord> out;

    if (const auto* humidity = std::get_if<HumidityTest>(&p.kind)) {
        const double c0 = sensor_capacitance(dielectric_state(model, spec, 0.0));
        const double fraction = absorbed_fraction(spec, humidity->sprayed_ml);
        const double c = sensor_capacitance(dielectric_state(model, spec, fraction));
        TrialRecord rec;
        rec.trial = trial;
        rec.measurement.capacitance_pf = c;
        rec.measurement.r_eq_ohm = kNaN;
        rec.measurement.v_out = kNaN;
        rec.measurement.trial_seed = seed;
        rec.response = c - c0;
        out.push_back(rec);
        return out;
    }

    const double r0 = solve_model(model, spec);
    const double v0 = divider_voltage(r0, cfg);
    const std::vector<DeformationState> states = conditions(p.kind);
    for (int c = 0; c < static_cast<int>(states.size()); ++c) {
        TrialRecord rec;
        rec.trial = trial;
        rec.condition = c;
        rec.measurement.trial_seed = seed;
        const double r = std::isinf(r0) ? kOpenCircuit : solve_model(deform(model, spec, states[c]), spec);
        rec.measurement.r_eq_ohm = r;
        rec.measurement.v_out = divider_voltage(r, cfg);
        if (std::isinf(r0) || std::isinf(r)) {
            rec.open_circuit = true;
            rec.response = kNaN;
        } else {
            rec.measurement.delta_v_over_v0 = normalized_delta(rec.measurement.v_out, v0);
            rec.response = rec.measurement.delta_v_over_v0;
        }
        out.push_back(rec);
    }
    return out;
}

ResultRow summarize(std::string label, const std::vector<double>& values, int excluded) {
    ResultRow row;
    row.label = std::move(label);
    row.n = static_cast<int>(values.size());
    row.excluded = excluded;
    if (values.empty()) {
        row.mean_response = kNaN;
        row.std_error = kNaN;
        row.snr_db = kNaN;
        return row;
    }
    double mean = 0.0;
    for (double v : values) mean += v;
    mean /= static_cast<double>(values.size());
    row.mean_response = mean;
    if (values.size() < 2) {
        row.std_error = kNaN;
        row.snr_db = kNaN;
        return row;
    }
    double ss = 0.0;
    for (double v : values) ss += (v - mean) * (v - mean);
    const double sd = std::sqrt(ss / static_cast<double>(values.size() - 1));
    row.std_error = sd / std::sqrt(static_cast<double>(values.size()));
    // Noise is the trial-to-trial spread of the same condition.
    try {
        row.snr_db = snr_db(values, values);
    } catch (const DegenerateBaseline&) {
        row.snr_db = kNaN;
    }
    return row;
}

}  // namespace

void require_valid(const Protocol& p) {
    if (p.trials < 1) throw InvalidArgument("protocol: trials must be >= 1");
    std::visit(
        [](const auto& k) {
            using T = std::decay_t<decltype(k)>;
            if constexpr (std::is_same_v<T, CompressionSweep>) {
                if (k.weights_g.empty()) throw InvalidArgument("protocol: weights_g is empty");
                for (std::size_t i = 0; i < k.weights_g.size(); ++i) {
                    if (!(k.weights_g[i] >= 0.0))
                        throw InvalidArgument("protocol: weights_g must be non-negative");
                    if (i > 0 && k.weights_g[i] < k.weights_g[i - 1])
                        throw InvalidArgument("protocol: weights_g must be ascending");
                }
                if (!(k.indenter_cm > 0.0)) throw InvalidArgument("protocol: indenter_cm must be > 0");
            } else if constexpr (std::is_same_v<T, BendingSweep>) {
                if (k.diameters_cm.empty()) throw InvalidArgument("protocol: diameters_cm is empty");
                if (k.directions.empty()) throw InvalidArgument("protocol: directions is empty");
                for (double d : k.diameters_cm)
                    if (!(d > 0.0)) throw InvalidArgument("protocol: diameters must be > 0");
            } else if constexpr (std::is_same_v<T, TensileSweep>) {
                if (k.axes.empty()) throw InvalidArgument("protocol: axes is empty");
                if (!(k.strain_percent >= 0.0 && k.strain_percent <= 20.0))
                    throw InvalidArgument("protocol: strain_percent must be in [0, 20]");
            } else {
                if (!(k.sprayed_ml >= 0.0)) throw InvalidArgument("protocol: sprayed_ml must be >= 0");
            }
        },
        p.kind);
}

std::string protocol_name(const ProtocolKind& kind) {
    switch (kind.index()) {
        case 0: return "compression";
        case 1: return "bending";
        case 2: return "tensile";
        default: return "humidity";
    }
}

std::vector<DeformationState> conditions(const ProtocolKind& kind) {
    std::vector<DeformationState> out;
    std::visit(
        [&](const auto& k) {
            using T = std::decay_t<decltype(k)>;
            if constexpr (std::is_same_v<T, CompressionSweep>) {
                for (double w : k.weights_g) out.push_back(Compression{w, k.indenter_cm});
            } else if constexpr (std::is_same_v<T, BendingSweep>) {
                for (BendDirection dir : k.directions)
                    for (double d : k.diameters_cm) out.push_back(Bending{d, dir});
            } else if constexpr (std::is_same_v<T, TensileSweep>) {
                for (StrainAxis axis : k.axes) out.push_back(Strain{axis, k.strain_percent});
            }
        },
        kind);
    return out;
}

std::optional<ProtocolKind> builtin_protocol(const std::string& name) {
    if (name == "compression") {
        CompressionSweep c;
        for (int w = 100; w <= 1000; w += 100) c.weights_g.push_back(w);
        return c;
    }
    if (name == "bending") {
        return BendingSweep{{1.0, 3.0, 5.0}, {BendDirection::Convex, BendDirection::Concave}};
    }
    if (name == "tensile") {
        // 10 mm over a 75 mm gauge length.
        return TensileSweep{{StrainAxis::X, StrainAxis::Y, StrainAxis::Bias45}, 13.3};
    }
    if (name == "humidity") return HumidityTest{5.0};
    return std::nullopt;
}

std::uint64_t split_seed(std::uint64_t master_seed, std::uint64_t trial, std::uint64_t condition) {
    std::uint64_t h = mix64(master_seed + 0x9E3779B97F4A7C15ULL);
    h = mix64(h ^ (trial + 0x632BE59BD9B4E019ULL));
    return mix64(h ^ (condition + 0x85157AF5ULL));
}

ProtocolResult run_protocol(const SensorSpec& spec, const ReadoutConfig& cfg, const Protocol& p,
                            int threads) {
    require_valid(spec);
    require_valid(cfg);
    require_valid(p);

    std::vector<std::vector<TrialRecord>> per_trial(static_cast<std::size_t>(p.trials));
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(p.trials));
    std::atomic<int> next{0};
    auto worker = [&] {
        for (int t = next++; t < p.trials; t = next++) {
            try {
                per_trial[t] = run_trial(spec, cfg, p, t);
            } catch (...) {
                errors[t] = std::current_exception();
            }
        }
    };
    const int workers = std::clamp(threads, 1, p.trials);
    if (workers == 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (int i = 0; i < workers; ++i) pool.emplace_back(worker);
    }
    for (const auto& e : errors)
        if (e) std::rethrow_exception(e);

    ProtocolResult result;
    result.protocol = protocol_name(p.kind);
    for (auto& trial : per_trial)
        for (auto& rec : trial) result.records.push_back(rec);

    std::vector<std::string> labels;
    if (const auto* h = std::get_if<HumidityTest>(&p.kind)) {
        labels.push_back(format_number(h->sprayed_ml) + "mL");
    } else {
        for (const auto& s : conditions(p.kind)) labels.push_back(condition_label(s));
    }
    for (int c = 0; c < static_cast<int>(labels.size()); ++c) {
        std::vector<double> values;
        int excluded = 0;
        for (const TrialRecord& rec : result.records) {
            if (rec.condition != c) continue;
            if (rec.open_circuit) {
                ++excluded;
            } else {
                values.push_back(rec.response);
            }
        }
        result.rows.push_back(summarize(labels[c], values, excluded));
    }
    return result;
}

std::string to_string(SampleId id) { return "S" + std::to_string(static_cast<int>(id) + 1); }

std::optional<SampleId> parse_sample_id(const std::string& text) {
    for (SampleId id : kAllSamples)
        if (to_string(id) == text) return id;
    return std::nullopt;
}

YarnSpec yarn_preset(int yarn_number) {
    YarnSpec y;
    switch (yarn_number) {
        case 1:
            y.diameter_mm = 0.4;
            y.linear_resistance_ohm_per_cm = 5300.0;
            y.water_retention = 0.6;
            break;
        case 2:
            y.diameter_mm = 0.9;
            y.linear_resistance_ohm_per_cm = 10.5;
            y.water_retention = 0.3;
            break;
        case 3:
            y.diameter_mm = 0.2;
            y.linear_resistance_ohm_per_cm = 582'000.0;
            y.water_retention = 0.6;
            break;
        default:
            throw InvalidArgument("yarn_preset: yarn number must be 1, 2 or 3");
    }
    return y;
}

SensorSpec preset(SampleId id) {
    SensorSpec s;
    s.pile_shape = PileShape::Loop;
    s.yarn = yarn_preset(1);
    switch (id) {
        case SampleId::S1: s.pile_height_cm = 0.3; break;
        case SampleId::S2: s.pile_height_cm = 0.6; break;
        case SampleId::S3: s.pile_height_cm = 0.9; break;
        case SampleId::S4: s.pile_height_cm = 1.3; break;
        case SampleId::S5:
            s.yarn = yarn_preset(2);
            break;
        case SampleId::S6:
            s.yarn = yarn_preset(3);
            break;
        case SampleId::S7:
            s.pile_shape = PileShape::Cut;
            break;
    }
    return s;
}

std::vector<ProtocolResult> paper_suite(int trials, std::uint64_t master_seed, int threads,
                                        std::optional<double> piles_per_cm) {
    if (trials < 1) throw InvalidArgument("paper_suite: trials must be >= 1");
    const ReadoutConfig cfg;
    std::vector<ProtocolResult> out;
    auto run = [&](SampleId id, const std::string& protocol) {
        SensorSpec spec = preset(id);
        if (piles_per_cm) spec.stitch_density_per_cm = *piles_per_cm;
        Protocol p{*builtin_protocol(protocol), trials, master_seed};
        ProtocolResult r = run_protocol(spec, cfg, p, threads);
        r.sample = to_string(id);
        out.push_back(std::move(r));
    };
    for (SampleId id : kAllSamples) run(id, "compression");
    run(SampleId::S5, "bending");
    run(SampleId::S2, "tensile");
    for (SampleId id : {SampleId::S2, SampleId::S5, SampleId::S6, SampleId::S7}) run(id, "humidity");
    return out;
}

}  // namespace pilesim
