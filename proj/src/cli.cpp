#include "pilesim/cli.hpp"

#include "pilesim/error.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <system_error>

namespace pilesim::cli {

namespace {

using nlohmann::json;

std::string read_text(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("", "cannot open " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

json parse_object(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ParseError("", std::string("malformed JSON: ") + e.what());
    }
    if (!doc.is_object()) throw ParseError("", "top level must be a JSON object");
    return doc;
}

double number_field(const json& v, const std::string& path) {
    if (!v.is_number()) throw SchemaError(path, "expected a number");
    return v.get<double>();
}

std::string string_field(const json& v, const std::string& path) {
    if (!v.is_string()) throw SchemaError(path, "expected a string");
    return v.get<std::string>();
}

std::vector<double> number_list(const json& v, const std::string& path) {
    if (!v.is_array()) throw SchemaError(path, "expected an array of numbers");
    std::vector<double> out;
    for (std::size_t i = 0; i < v.size(); ++i)
        out.push_back(number_field(v[i], path + "[" + std::to_string(i) + "]"));
    return out;
}

std::vector<std::string> string_list(const json& v, const std::string& path) {
    if (!v.is_array()) throw SchemaError(path, "expected an array of strings");
    std::vector<std::string> out;
    for (std::size_t i = 0; i < v.size(); ++i)
        out.push_back(string_field(v[i], path + "[" + std::to_string(i) + "]"));
    return out;
}

std::int64_t integer_field(const json& v, const std::string& path) {
    if (!v.is_number_integer()) throw SchemaError(path, "expected an integer");
    return v.get<std::int64_t>();
}

bool set_yarn_field(YarnSpec& yarn, const std::string& key, const json& v,
                    const std::string& path) {
    if (key == "diameter_mm") {
        yarn.diameter_mm = number_field(v, path);
    } else if (key == "linear_resistance_ohm_per_cm") {
        yarn.linear_resistance_ohm_per_cm = number_field(v, path);
    } else if (key == "dry_relative_permittivity") {
        yarn.dry_relative_permittivity = number_field(v, path);
    } else if (key == "water_retention") {
        yarn.water_retention = number_field(v, path);
    } else {
        return false;
    }
    return true;
}

PileShape parse_shape(const json& v, const std::string& path) {
    const std::string s = string_field(v, path);
    if (s == "loop") return PileShape::Loop;
    if (s == "cut") return PileShape::Cut;
    throw SchemaError(path, "expected \"loop\" or \"cut\", got \"" + s + "\"");
}

const std::pair<const char*, double SensorSpec::*> kNumericSpecFields[] = {
    {"base_width_cm", &SensorSpec::base_width_cm},
    {"base_depth_cm", &SensorSpec::base_depth_cm},
    {"pile_height_cm", &SensorSpec::pile_height_cm},
    {"stitch_density_per_cm", &SensorSpec::stitch_density_per_cm},
    {"contact_resistance_ohm", &SensorSpec::contact_resistance_ohm},
    {"stiffness_scale", &SensorSpec::stiffness_scale},
    {"stiffness_exponent", &SensorSpec::stiffness_exponent},
    {"poisson_ratio", &SensorSpec::poisson_ratio},
    {"position_jitter_cm", &SensorSpec::position_jitter_cm},
    {"cut_splay_deg", &SensorSpec::cut_splay_deg},
};

BendDirection parse_direction(const std::string& s, const std::string& path) {
    if (s == "convex") return BendDirection::Convex;
    if (s == "concave") return BendDirection::Concave;
    throw SchemaError(path, "expected \"convex\" or \"concave\", got \"" + s + "\"");
}

StrainAxis parse_axis(const std::string& s, const std::string& path) {
    if (s == "x") return StrainAxis::X;
    if (s == "y") return StrainAxis::Y;
    if (s == "bias45") return StrainAxis::Bias45;
    throw SchemaError(path, "expected \"x\", \"y\" or \"bias45\", got \"" + s + "\"");
}

json number_json(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

json result_header(const ProtocolResult& r) {
    return json{{"sample", r.sample}, {"protocol", r.protocol}};
}

struct RunOptions {
    std::string spec_source = "S2";
    std::string protocol_source = "compression";
    std::optional<int> trials;
    std::optional<std::uint64_t> seed;
    std::string output_dir = ".";
    std::string format = "csv";
    std::optional<double> piles_per_cm;
    int threads = 1;
    std::optional<int> adc_bits;
};

std::optional<std::uint64_t> env_seed() {
    const char* env = std::getenv("PILESIM_SEED");
    if (env == nullptr || *env == '\0') return std::nullopt;
    std::uint64_t seed = 0;
    const char* end = env + std::char_traits<char>::length(env);
    const auto [ptr, ec] = std::from_chars(env, end, seed);
    if (ec != std::errc() || ptr != end)
        throw CLI::ValidationError("PILESIM_SEED", "must be a non-negative integer");
    return seed;
}

/// Preset id, or a path to a JSON spec file.
std::pair<SensorSpec, std::string> resolve_spec(const std::string& source) {
    if (const auto id = parse_sample_id(source)) return {preset(*id), source};
    const std::filesystem::path path(source);
    return {parse_spec_file(path), path.stem().string()};
}

Protocol resolve_protocol(const std::string& source) {
    if (const auto kind = builtin_protocol(source)) return Protocol{*kind, 50, 0};
    return parse_protocol_file(source);
}

void emit(const ProtocolResult& result, const RunOptions& opt, std::ostream& out) {
    const std::filesystem::path dir(opt.output_dir);
    const std::string stem = result.sample + "_" + result.protocol;
    if (opt.format == "json") {
        write_file_atomic(dir / (stem + "_detail.json"), detail_json(result));
        write_file_atomic(dir / (stem + "_summary.json"), summary_json(result));
    } else {
        write_file_atomic(dir / (stem + "_detail.csv"), detail_csv(result));
        write_file_atomic(dir / (stem + "_summary.csv"), summary_csv(result));
    }
    out << "# " << result.sample << ' ' << result.protocol << '\n' << summary_csv(result);
}

ReadoutConfig readout(const RunOptions& opt) {
    ReadoutConfig cfg;
    cfg.adc_bits = opt.adc_bits;
    return cfg;
}

int simulate(const RunOptions& opt, std::ostream& out) {
    auto [spec, sample] = resolve_spec(opt.spec_source);
    if (opt.piles_per_cm) spec.stitch_density_per_cm = *opt.piles_per_cm;
    Protocol protocol = resolve_protocol(opt.protocol_source);
    if (opt.trials) protocol.trials = *opt.trials;
    // --seed, then $PILESIM_SEED, then the protocol file's own seed.
    if (opt.seed) {
        protocol.master_seed = *opt.seed;
    } else if (const auto seed = env_seed()) {
        protocol.master_seed = *seed;
    }

    ProtocolResult result = run_protocol(spec, readout(opt), protocol, opt.threads);
    result.sample = sample;
    emit(result, opt, out);
    return kExitOk;
}

int suite(const RunOptions& opt, std::ostream& out) {
    const int trials = opt.trials.value_or(50);
    if (trials < 1) throw CLI::ValidationError("--trials", "must be >= 1");
    const std::uint64_t seed = opt.seed ? *opt.seed : env_seed().value_or(0);
    const auto results = paper_suite(trials, seed, opt.threads, opt.piles_per_cm);
    for (const auto& r : results) emit(r, opt, out);
    return kExitOk;
}

int list_presets(const std::string& format, std::ostream& out) {
    if (format == "json") {
        json all = json::object();
        for (SampleId id : kAllSamples) all[to_string(id)] = json::parse(serialize_spec(preset(id)));
        out << all.dump(2) << '\n';
        return kExitOk;
    }
    out << "sample,pile_shape,pile_height_cm,stitch_density_per_cm,yarn_diameter_mm,"
           "yarn_linear_resistance_ohm_per_cm\n";
    for (SampleId id : kAllSamples) {
        const SensorSpec s = preset(id);
        out << to_string(id) << ',' << to_string(s.pile_shape) << ',' << format_number(s.pile_height_cm)
            << ',' << format_number(s.stitch_density_per_cm) << ','
            << format_number(s.yarn.diameter_mm) << ','
            << format_number(s.yarn.linear_resistance_ohm_per_cm) << '\n';
    }
    return kExitOk;
}

int validate_files(const std::string& spec_path, const std::string& protocol_path,
                   std::ostream& out) {
    if (!spec_path.empty()) {
        require_valid(parse_spec_file(spec_path));
        out << spec_path << ": ok\n";
    }
    if (!protocol_path.empty()) {
        require_valid(parse_protocol_file(protocol_path));
        out << protocol_path << ": ok\n";
    }
    return kExitOk;
}

}  // namespace

SensorSpec parse_spec_json(const std::string& text) {
    const json doc = parse_object(text);
    SensorSpec spec;
    for (const auto& [key, value] : doc.items()) {
        bool known = false;
        for (const auto& [name, member] : kNumericSpecFields) {
            if (key == name) {
                spec.*member = number_field(value, key);
                known = true;
                break;
            }
        }
        if (known) continue;
        if (key == "pile_shape") {
            spec.pile_shape = parse_shape(value, key);
        } else if (key == "yarn") {
            if (!value.is_object()) throw SchemaError(key, "expected an object");
            for (const auto& [yk, yv] : value.items()) {
                const std::string path = "yarn." + yk;
                if (!set_yarn_field(spec.yarn, yk, yv, path))
                    throw SchemaError(path, "unknown field");
            }
        } else if (key.rfind("yarn.", 0) == 0) {
            if (!set_yarn_field(spec.yarn, key.substr(5), value, key))
                throw SchemaError(key, "unknown field");
        } else {
            throw SchemaError(key, "unknown field");
        }
    }
    const auto violations = validate(spec);
    if (!violations.empty()) throw SchemaError(violations.front().field, violations.front().message);
    return spec;
}

SensorSpec parse_spec_file(const std::filesystem::path& path) {
    return parse_spec_json(read_text(path));
}

std::string serialize_spec(const SensorSpec& spec) {
    json doc = json::object();
    for (const auto& [name, member] : kNumericSpecFields) doc[name] = spec.*member;
    doc["pile_shape"] = to_string(spec.pile_shape);
    doc["yarn"] = {
        {"diameter_mm", spec.yarn.diameter_mm},
        {"linear_resistance_ohm_per_cm", spec.yarn.linear_resistance_ohm_per_cm},
        {"dry_relative_permittivity", spec.yarn.dry_relative_permittivity},
        {"water_retention", spec.yarn.water_retention},
    };
    return doc.dump(2) + "\n";
}

Protocol parse_protocol_json(const std::string& text) {
    const json doc = parse_object(text);
    if (!doc.contains("kind")) throw SchemaError("kind", "missing required field");
    const std::string kind = string_field(doc.at("kind"), "kind");
    const auto base = builtin_protocol(kind);
    if (!base) throw SchemaError("kind", "unknown protocol kind \"" + kind + "\"");

    Protocol p{*base, 50, 0};
    for (const auto& [key, value] : doc.items()) {
        if (key == "kind") continue;
        if (key == "trials") {
            const std::int64_t t = integer_field(value, key);
            if (t < 1 || t > 1'000'000) throw SchemaError(key, "must be in 1..1000000");
            p.trials = static_cast<int>(t);
            continue;
        }
        if (key == "master_seed") {
            if (!value.is_number_unsigned()) throw SchemaError(key, "expected a non-negative integer");
            p.master_seed = value.get<std::uint64_t>();
            continue;
        }
        bool known = true;
        std::visit(
            [&](auto& k) {
                using T = std::decay_t<decltype(k)>;
                if constexpr (std::is_same_v<T, CompressionSweep>) {
                    if (key == "weights_g") k.weights_g = number_list(value, key);
                    else if (key == "indenter_cm") k.indenter_cm = number_field(value, key);
                    else known = false;
                } else if constexpr (std::is_same_v<T, BendingSweep>) {
                    if (key == "diameters_cm") {
                        k.diameters_cm = number_list(value, key);
                    } else if (key == "directions") {
                        const auto names = string_list(value, key);
                        k.directions.clear();
                        for (std::size_t i = 0; i < names.size(); ++i)
                            k.directions.push_back(
                                parse_direction(names[i], key + "[" + std::to_string(i) + "]"));
                    } else {
                        known = false;
                    }
                } else if constexpr (std::is_same_v<T, TensileSweep>) {
                    if (key == "axes") {
                        const auto names = string_list(value, key);
                        k.axes.clear();
                        for (std::size_t i = 0; i < names.size(); ++i)
                            k.axes.push_back(parse_axis(names[i], key + "[" + std::to_string(i) + "]"));
                    } else if (key == "strain_percent") {
                        k.strain_percent = number_field(value, key);
                    } else {
                        known = false;
                    }
                } else {
                    if (key == "sprayed_ml") k.sprayed_ml = number_field(value, key);
                    else known = false;
                }
            },
            p.kind);
        if (!known) throw SchemaError(key, "unknown field for protocol kind \"" + kind + "\"");
    }
    try {
        require_valid(p);
    } catch (const InvalidArgument& e) {
        throw SchemaError("", e.what());
    }
    return p;
}

Protocol parse_protocol_file(const std::filesystem::path& path) {
    return parse_protocol_json(read_text(path));
}

std::string format_number(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[32];
    const auto r = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 9);
    return std::string(buf, r.ptr);
}

std::string summary_csv(const ProtocolResult& result) {
    std::string out = "condition,label,mean_response,std_error,snr_db,n\n";
    for (std::size_t i = 0; i < result.rows.size(); ++i) {
        const ResultRow& row = result.rows[i];
        out += std::to_string(i) + ',' + row.label + ',' + format_number(row.mean_response) + ',' +
               format_number(row.std_error) + ',' + format_number(row.snr_db) + ',' +
               std::to_string(row.n) + '\n';
    }
    return out;
}

std::string detail_csv(const ProtocolResult& result) {
    std::string out =
        "trial,condition,label,trial_seed,r_eq_ohm,v_out,delta_v_over_v0,capacitance_pf,response,"
        "open_circuit\n";
    for (const TrialRecord& rec : result.records) {
        const MeasurementRecord& m = rec.measurement;
        const std::string label =
            rec.condition < static_cast<int>(result.rows.size()) ? result.rows[rec.condition].label : "";
        out += std::to_string(rec.trial) + ',' + std::to_string(rec.condition) + ',' + label + ',' +
               std::to_string(m.trial_seed) + ',' + format_number(m.r_eq_ohm) + ',' +
               format_number(m.v_out) + ',' + format_number(m.delta_v_over_v0) + ',' +
               (m.capacitance_pf ? format_number(*m.capacitance_pf) : std::string()) + ',' +
               format_number(rec.response) + ',' + (rec.open_circuit ? "1" : "0") + '\n';
    }
    return out;
}

std::string summary_json(const ProtocolResult& result) {
    json doc = result_header(result);
    json rows = json::array();
    for (std::size_t i = 0; i < result.rows.size(); ++i) {
        const ResultRow& row = result.rows[i];
        rows.push_back({{"condition", i},
                        {"label", row.label},
                        {"mean_response", number_json(row.mean_response)},
                        {"std_error", number_json(row.std_error)},
                        {"snr_db", number_json(row.snr_db)},
                        {"n", row.n},
                        {"excluded", row.excluded}});
    }
    doc["rows"] = std::move(rows);
    return doc.dump(2) + "\n";
}

std::string detail_json(const ProtocolResult& result) {
    json doc = result_header(result);
    json records = json::array();
    for (const TrialRecord& rec : result.records) {
        const MeasurementRecord& m = rec.measurement;
        records.push_back({{"trial", rec.trial},
                           {"condition", rec.condition},
                           {"trial_seed", m.trial_seed},
                           {"r_eq_ohm", number_json(m.r_eq_ohm)},
                           {"v_out", number_json(m.v_out)},
                           {"delta_v_over_v0", number_json(m.delta_v_over_v0)},
                           {"capacitance_pf",
                            m.capacitance_pf ? number_json(*m.capacitance_pf) : json(nullptr)},
                           {"response", number_json(rec.response)},
                           {"open_circuit", rec.open_circuit}});
    }
    doc["records"] = std::move(records);
    return doc.dump(2) + "\n";
}

void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
    std::filesystem::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
        if (!f) throw std::filesystem::filesystem_error("cannot create", tmp,
                                                        std::make_error_code(std::errc::io_error));
        f << content;
        f.flush();
        if (!f) {
            f.close();
            std::filesystem::remove(tmp);
            throw std::filesystem::filesystem_error("write failed", tmp,
                                                    std::make_error_code(std::errc::io_error));
        }
    }
    std::filesystem::rename(tmp, path);
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Tufted conductive-pile sensor simulator"};
    app.require_subcommand(1);

    RunOptions opt;
    std::string validate_spec, validate_protocol;
    std::string presets_format = "csv";

    auto add_run_flags = [&](CLI::App* cmd) {
        cmd->add_option("--trials", opt.trials, "Monte Carlo trials")->check(CLI::PositiveNumber);
        cmd->add_option("--seed", opt.seed, "Master seed (default: $PILESIM_SEED or 0)");
        cmd->add_option("--output-dir", opt.output_dir, "Directory for result files")
            ->check(CLI::ExistingDirectory);
        cmd->add_option("--format", opt.format, "Result file format")
            ->check(CLI::IsMember({"csv", "json"}));
        cmd->add_option("--piles-per-cm", opt.piles_per_cm, "Override stitch density")
            ->check(CLI::PositiveNumber);
        cmd->add_option("--threads", opt.threads, "Worker threads")->check(CLI::Range(1, 256));
        cmd->add_option("--adc-bits", opt.adc_bits, "Quantize readings to an N-bit ADC")
            ->check(CLI::Range(8, 16));
    };

    CLI::App* sim = app.add_subcommand("simulate", "Run one spec against one protocol");
    sim->add_option("--spec", opt.spec_source, "Preset id (S1-S7) or JSON spec file");
    sim->add_option("--protocol", opt.protocol_source,
                    "compression | bending | tensile | humidity, or a JSON protocol file");
    add_run_flags(sim);

    CLI::App* suite_cmd = app.add_subcommand("paper-suite", "Run every sample/protocol pairing");
    add_run_flags(suite_cmd);

    CLI::App* presets = app.add_subcommand("presets", "List the S1-S7 sample presets");
    presets->add_option("--format", presets_format)->check(CLI::IsMember({"csv", "json"}));

    CLI::App* check = app.add_subcommand("validate", "Check a spec and/or protocol file");
    check->add_option("--spec", validate_spec, "JSON spec file");
    check->add_option("--protocol", validate_protocol, "JSON protocol file");

    try {
        app.parse(argc, argv);
        if (check->parsed() && validate_spec.empty() && validate_protocol.empty())
            throw CLI::RequiredError("validate needs --spec and/or --protocol");
    } catch (const CLI::CallForHelp& e) {
        app.exit(e, out, err);
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        app.exit(e, out, err);
        return kExitUsage;
    }

    try {
        if (sim->parsed()) return simulate(opt, out);
        if (suite_cmd->parsed()) return suite(opt, out);
        if (presets->parsed()) return list_presets(presets_format, out);
        return validate_files(validate_spec, validate_protocol, out);
    } catch (const CLI::Error& e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const NumericalFailure& e) {
        err << "numerical failure: " << e.what() << '\n';
        return kExitNumerical;
    } catch (const Error& e) {
        err << "invalid input: " << e.what() << '\n';
        return kExitInvalidInput;
    } catch (const std::filesystem::filesystem_error& e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    }
}

}  // namespace pilesim::cli
