#pragma once

// File formats: CSV matrices, band-sequential cubes with a JSON sidecar,
// binary PGM abundance maps, solver traces, Monte Carlo reports and
// experiment specifications.

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "unmix/experiments.hpp"
#include "unmix/model.hpp"
#include "unmix/solvers.hpp"

namespace unmix {

// CSV matrices -----------------------------------------------------------

struct CsvMatrix {
    Matrix values;
    std::vector<std::string> header;  // empty unless the first data line is non-numeric
};

/// Comma- or whitespace-delimited decimal numbers, '#' comment lines and
/// blank lines skipped, optional header line. Rejects NaN, Inf, ragged rows
/// and anything strtod would only partially consume.
CsvMatrix parse_csv_matrix(std::string_view text, const std::string& source);
CsvMatrix read_csv_matrix(const std::filesystem::path& path);

/// Shortest decimal that round-trips each double.
std::string format_csv_matrix(const Matrix& values, const std::vector<std::string>& header = {});

/// L rows by R columns.
EndmemberMatrix read_endmember_csv(const std::filesystem::path& path);

/// Pixels stored one per column (L rows); a single row of L values is also accepted.
std::vector<Pixel> read_pixel_csv(const std::filesystem::path& path, Index bands);

// Cubes ------------------------------------------------------------------

enum class SampleType { f32, f64 };

std::string_view to_string(SampleType type);

struct CubeHeader {
    Index width = 0;
    Index height = 0;
    Index bands = 0;
    SampleType dtype = SampleType::f64;
};

struct CubeFile {
    CubeHeader header;
    Cube cube;
};

/// Sidecar path for a payload: "<payload>.json".
std::filesystem::path cube_sidecar_path(const std::filesystem::path& payload);

/// Accepts the payload or its sidecar.
CubeFile read_cube(const std::filesystem::path& path);

/// Writes the payload (little-endian) and its sidecar.
void write_cube(const std::filesystem::path& payload, const Cube& cube, SampleType dtype);

bool looks_like_cube(const std::filesystem::path& path);

// Abundance outputs ------------------------------------------------------

/// round(255 a) clamped to [0, 255]; NaN maps to 0.
std::uint8_t quantize_abundance(double value);

/// Binary P5 image of endmember `r`, maxval 255, rows top to bottom.
std::string encode_pgm(const AbundanceMaps& maps, Index r);
void write_pgm(const std::filesystem::path& path, const AbundanceMaps& maps, Index r);

struct PgmImage {
    Index width = 0;
    Index height = 0;
    std::vector<std::uint8_t> pixels;
};
PgmImage read_pgm(const std::filesystem::path& path);

/// One row per pixel (pixel index, then one column per endmember), 9 significant digits.
std::string format_abundance_csv(const std::vector<Vector>& pixels,
                                 const std::vector<std::string>& names);

/// One row per cube pixel (x, y, then endmembers); failed pixels print "nan".
std::string format_map_csv(const AbundanceMaps& maps, const std::vector<std::string>& names);

/// iteration, cost, step, gamma_max, max_complementarity, component_sum, a_1..a_R.
std::string format_trace_csv(const SolverTrace& trace);

// Reports ----------------------------------------------------------------

/// solver, snr_db, component, mean, variance, mean_sum_violation, mean_iters, failures.
std::string format_report_csv(const MonteCarloReport& report);
std::string format_report_json(const MonteCarloReport& report);

// Experiment specifications ----------------------------------------------

struct ExperimentDocument {
    ExperimentSpec spec;
    /// Normalized JSON echo of the document, for manifests.
    std::string canonical_json;
    /// Files the document refers to (endmember CSV), resolved against its directory.
    std::vector<std::filesystem::path> inputs;
};

/// JSON document mirroring ExperimentSpec. Unknown keys and ill-typed values
/// raise ParseError naming the field.
ExperimentDocument parse_experiment_spec(std::string_view text, const std::string& source,
                                         const std::filesystem::path& base_dir);
ExperimentDocument read_experiment_spec(const std::filesystem::path& path);

/// JSON object echoing every SolverConfig field.
std::string solver_config_json(const SolverConfig& config);

// Helpers ----------------------------------------------------------------

std::string read_file(const std::filesystem::path& path);
/// Writes via a temporary file in the same directory, then renames.
void write_file(const std::filesystem::path& path, std::string_view contents);

/// "%.9g", with "nan", "inf" and "-inf" for non-finite values.
std::string format_significant(double value);

}  // namespace unmix
