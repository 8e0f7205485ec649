#pragma once

#include "pilesim/electrical.hpp"
#include "pilesim/geometry.hpp"
#include "pilesim/protocol.hpp"

#include <filesystem>
#include <iosfwd>
#include <string>

namespace pilesim::cli {

enum ExitCode : int {
    kExitOk = 0,
    kExitUsage = 1,
    kExitInvalidInput = 2,
    kExitNumerical = 3,
};

/// Parses a JSON spec document. Keys are SensorSpec field names; yarn fields
/// go either in a nested "yarn" object or as flat "yarn.<field>" keys.
/// Missing keys keep their defaults. Throws ParseError or SchemaError, both
/// carrying the offending field path.
SensorSpec parse_spec_json(const std::string& text);
SensorSpec parse_spec_file(const std::filesystem::path& path);

/// JSON document accepted by parse_spec_json; numbers round-trip exactly.
std::string serialize_spec(const SensorSpec& spec);

/// Parses a JSON protocol document, e.g.
/// {"kind": "compression", "weights_g": [100, 200], "trials": 10}.
/// Optional "trials" and "master_seed" keys fill the Protocol fields.
Protocol parse_protocol_json(const std::string& text);
Protocol parse_protocol_file(const std::filesystem::path& path);

/// Shortest round-trip text up to 9 significant digits, '.' decimal point,
/// "nan" / "inf" / "-inf" for non-finite values.
std::string format_number(double v);

/// Columns: condition,label,mean_response,std_error,snr_db,n
std::string summary_csv(const ProtocolResult& result);
/// One line per (trial, condition) measurement.
std::string detail_csv(const ProtocolResult& result);
std::string summary_json(const ProtocolResult& result);
std::string detail_json(const ProtocolResult& result);

/// Writes through a temporary file in the same directory, then renames it
/// into place, so readers never see a partial file.
void write_file_atomic(const std::filesystem::path& path, const std::string& content);

/// Entry point for the `pilesim` tool; returns the process exit code.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace pilesim::cli
