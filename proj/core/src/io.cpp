#include "unmix/io.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <system_error>

#include "json.hpp"

namespace unmix {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r\n");
    return s.substr(first, last - first + 1);
}

struct Token {
    std::string_view text;
    std::size_t column;  // 1-based character offset within the line
};

std::vector<Token> tokenize(std::string_view line, const std::string& source, std::size_t line_no) {
    std::vector<Token> tokens;
    if (line.find(',') != std::string_view::npos) {
        std::size_t start = 0;
        while (true) {
            const std::size_t comma = line.find(',', start);
            const std::string_view raw = line.substr(start, comma == std::string_view::npos
                                                                ? std::string_view::npos
                                                                : comma - start);
            const std::string_view field = trim(raw);
            if (field.empty())
                throw ParseError(source, line_no, start + 1,
                                 "empty field " + std::to_string(tokens.size() + 1));
            tokens.push_back({field, start + 1 + static_cast<std::size_t>(field.data() - raw.data())});
            if (comma == std::string_view::npos) break;
            start = comma + 1;
        }
        return tokens;
    }
    std::size_t i = 0;
    while (i < line.size()) {
        while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
        if (i >= line.size()) break;
        const std::size_t start = i;
        while (i < line.size() && line[i] != ' ' && line[i] != '\t' && line[i] != '\r') ++i;
        tokens.push_back({line.substr(start, i - start), start + 1});
    }
    return tokens;
}

enum class NumberKind { finite, non_finite, not_a_number };

NumberKind parse_number(std::string_view text, double& value) {
    std::string_view body = text;
    if (!body.empty() && body.front() == '+') body.remove_prefix(1);
    const char* end = body.data() + body.size();
    const auto result = std::from_chars(body.data(), end, value, std::chars_format::general);
    if (result.ec == std::errc::result_out_of_range) return NumberKind::non_finite;
    if (result.ec != std::errc() || result.ptr != end || body.empty()) return NumberKind::not_a_number;
    if (!std::isfinite(value)) return NumberKind::non_finite;
    return NumberKind::finite;
}

std::string shortest(double value) {
    char buf[64];
    const auto result = std::to_chars(buf, buf + sizeof buf, value);
    return std::string(buf, result.ptr);
}

template <typename T>
T from_little_endian(const unsigned char* bytes) {
    using Bits = std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>;
    Bits bits = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) bits |= static_cast<Bits>(bytes[i]) << (8 * i);
    return std::bit_cast<T>(bits);
}

template <typename T>
void to_little_endian(T value, unsigned char* bytes) {
    using Bits = std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>;
    const auto bits = std::bit_cast<Bits>(value);
    for (std::size_t i = 0; i < sizeof(T); ++i) bytes[i] = static_cast<unsigned char>(bits >> (8 * i));
}

std::size_t sample_size(SampleType type) { return type == SampleType::f32 ? 4 : 8; }

json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

// Experiment spec field access with diagnostics that name the field.
class Fields {
public:
    Fields(const json& object, std::string path, const std::string& source)
        : object_(object), path_(std::move(path)), source_(source) {
        if (!object_.is_object()) fail("", "must be an object");
    }

    [[noreturn]] void fail(const std::string& key, const std::string& message) const {
        std::string name = path_;
        if (!key.empty()) name += name.empty() ? key : "." + key;
        throw ParseError(source_, 0, 0, "field '" + (name.empty() ? "<root>" : name) + "': " + message);
    }

    bool has(const std::string& key) const { return object_.contains(key); }
    const json& at(const std::string& key) const {
        if (!has(key)) fail(key, "is required");
        return object_.at(key);
    }
    std::string child(const std::string& key) const {
        return path_.empty() ? key : path_ + "." + key;
    }

    void only(std::initializer_list<const char*> allowed) const {
        for (const auto& item : object_.items()) {
            const bool known = std::any_of(allowed.begin(), allowed.end(),
                                           [&](const char* k) { return item.key() == k; });
            if (!known) fail(item.key(), "unknown field");
        }
    }

    double number(const std::string& key) const {
        const json& v = at(key);
        if (!v.is_number()) fail(key, "must be a number");
        const double d = v.get<double>();
        if (!std::isfinite(d)) fail(key, "must be finite");
        return d;
    }
    double positive(const std::string& key) const {
        const double d = number(key);
        if (!(d > 0.0)) fail(key, "must be > 0");
        return d;
    }
    std::int64_t integer(const std::string& key, std::int64_t min_value) const {
        const json& v = at(key);
        if (!v.is_number_integer()) fail(key, "must be an integer");
        const auto i = v.get<std::int64_t>();
        if (i < min_value) fail(key, "must be >= " + std::to_string(min_value));
        return i;
    }
    std::uint64_t unsigned_integer(const std::string& key) const {
        const json& v = at(key);
        if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0))
            fail(key, "must be a non-negative integer");
        return v.get<std::uint64_t>();
    }
    std::string string(const std::string& key) const {
        const json& v = at(key);
        if (!v.is_string()) fail(key, "must be a string");
        return v.get<std::string>();
    }

private:
    const json& object_;
    std::string path_;
    const std::string& source_;
};

SolverConfig parse_solver(const Fields& f, std::string& name) {
    f.only({"name", "algorithm", "epsilon", "delta", "exponent_n", "tol_kkt", "tol_step",
            "max_iters", "armijo_beta", "armijo_sigma", "max_backtracks", "lipschitz"});
    SolverConfig c;
    try {
        c.algorithm = parse_algorithm(f.string("algorithm"));
    } catch (const DomainError& e) {
        f.fail("algorithm", e.what());
    }
    name = f.has("name") ? f.string("name") : std::string(to_string(c.algorithm));
    if (name.empty()) f.fail("name", "must not be empty");
    if (f.has("epsilon")) c.epsilon = f.positive("epsilon");
    if (f.has("delta")) c.delta = f.positive("delta");
    if (f.has("exponent_n")) c.exponent_n = f.positive("exponent_n");
    if (f.has("tol_kkt")) c.tol_kkt = f.positive("tol_kkt");
    if (f.has("tol_step")) c.tol_step = f.positive("tol_step");
    if (f.has("max_iters")) c.max_iters = static_cast<int>(f.integer("max_iters", 1));
    if (f.has("armijo_beta")) c.armijo.beta = f.number("armijo_beta");
    if (f.has("armijo_sigma")) c.armijo.sigma = f.number("armijo_sigma");
    if (f.has("max_backtracks")) c.armijo.max_backtracks = static_cast<int>(f.integer("max_backtracks", 1));
    if (f.has("lipschitz")) c.lipschitz_override = f.positive("lipschitz");
    try {
        c.validate();
    } catch (const DomainError& e) {
        f.fail("", e.what());
    }
    return c;
}

json solver_json(const std::string& name, const SolverConfig& c) {
    json j;
    if (!name.empty()) j["name"] = name;
    j["algorithm"] = std::string(to_string(c.algorithm));
    j["epsilon"] = c.epsilon ? json(*c.epsilon) : json("auto");
    j["delta"] = c.delta;
    j["exponent_n"] = c.exponent_n;
    j["tol_kkt"] = c.tol_kkt;
    j["tol_step"] = c.tol_step;
    j["max_iters"] = c.max_iters;
    j["armijo_beta"] = c.armijo.beta;
    j["armijo_sigma"] = c.armijo.sigma;
    j["max_backtracks"] = c.armijo.max_backtracks;
    j["lipschitz"] = c.lipschitz_override ? json(*c.lipschitz_override) : json("auto");
    return j;
}

}  // namespace

// Helpers ----------------------------------------------------------------

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError(path.string(), 0, 0, "cannot open file");
    std::ostringstream buffer;
    buffer << in.rdbuf();
    if (in.bad()) throw ParseError(path.string(), 0, 0, "read error");
    return std::move(buffer).str();
}

void write_file(const fs::path& path, std::string_view contents) {
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error("cannot open '" + tmp.string() + "' for writing");
        out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
        if (!out) throw Error("write to '" + tmp.string() + "' failed");
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) throw Error("cannot rename '" + tmp.string() + "': " + ec.message());
}

std::string format_significant(double value) {
    if (std::isnan(value)) return "nan";
    if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.9g", value);
    return buf;
}

// CSV matrices -----------------------------------------------------------

CsvMatrix parse_csv_matrix(std::string_view text, const std::string& source) {
    CsvMatrix out;
    std::vector<std::vector<double>> rows;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const std::size_t nl = text.find('\n', pos);
        const std::string_view raw =
            text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
        pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
        ++line_no;
        std::string_view line = raw;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        const std::string_view content = trim(line);
        if (content.empty() || content.front() == '#') continue;

        const std::vector<Token> tokens = tokenize(line, source, line_no);
        std::vector<double> values(tokens.size());
        std::size_t numeric = 0;
        for (std::size_t i = 0; i < tokens.size(); ++i) {
            const NumberKind kind = parse_number(tokens[i].text, values[i]);
            if (kind == NumberKind::non_finite)
                throw ParseError(source, line_no, tokens[i].column,
                                 "row " + std::to_string(line_no) + ", column " + std::to_string(i + 1) +
                                     ": non-finite value '" + std::string(tokens[i].text) + "'");
            if (kind == NumberKind::finite) ++numeric;
        }
        if (numeric != tokens.size()) {
            if (rows.empty() && out.header.empty() && numeric == 0) {
                for (const Token& t : tokens) out.header.emplace_back(t.text);
                continue;
            }
            for (std::size_t i = 0; i < tokens.size(); ++i) {
                double ignored;
                if (parse_number(tokens[i].text, ignored) != NumberKind::finite)
                    throw ParseError(source, line_no, tokens[i].column,
                                     "row " + std::to_string(line_no) + ", column " + std::to_string(i + 1) +
                                         ": not a decimal number '" + std::string(tokens[i].text) + "'");
            }
        }
        if (!rows.empty() && values.size() != rows.front().size())
            throw ParseError(source, line_no, 0,
                             "expected " + std::to_string(rows.front().size()) + " columns, found " +
                                 std::to_string(values.size()));
        if (rows.empty() && !out.header.empty() && values.size() != out.header.size())
            throw ParseError(source, line_no, 0,
                             "header has " + std::to_string(out.header.size()) + " columns, row has " +
                                 std::to_string(values.size()));
        rows.push_back(std::move(values));
    }
    if (rows.empty()) throw ParseError(source, 0, 0, "no numeric rows");
    out.values.resize(static_cast<Index>(rows.size()), static_cast<Index>(rows.front().size()));
    for (std::size_t r = 0; r < rows.size(); ++r)
        for (std::size_t c = 0; c < rows[r].size(); ++c)
            out.values(static_cast<Index>(r), static_cast<Index>(c)) = rows[r][c];
    return out;
}

CsvMatrix read_csv_matrix(const fs::path& path) {
    return parse_csv_matrix(read_file(path), path.string());
}

std::string format_csv_matrix(const Matrix& values, const std::vector<std::string>& header) {
    if (!header.empty() && static_cast<Index>(header.size()) != values.cols())
        throw DimensionError("CSV header", values.cols(), static_cast<std::ptrdiff_t>(header.size()));
    std::string out;
    for (std::size_t c = 0; c < header.size(); ++c) out += (c ? "," : "") + header[c];
    if (!header.empty()) out += '\n';
    for (Index r = 0; r < values.rows(); ++r) {
        for (Index c = 0; c < values.cols(); ++c) {
            if (c) out += ',';
            out += shortest(values(r, c));
        }
        out += '\n';
    }
    return out;
}

EndmemberMatrix read_endmember_csv(const fs::path& path) {
    CsvMatrix csv = read_csv_matrix(path);
    try {
        return EndmemberMatrix(std::move(csv.values));
    } catch (const Error& e) {
        throw ParseError(path.string(), 0, 0, e.what());
    }
}

std::vector<Pixel> read_pixel_csv(const fs::path& path, Index bands) {
    const CsvMatrix csv = read_csv_matrix(path);
    Matrix values = csv.values;
    if (values.rows() == 1 && values.cols() == bands && bands != 1) values.transposeInPlace();
    if (values.rows() != bands)
        throw ParseError(path.string(), 0, 0,
                         "expected " + std::to_string(bands) + " rows (one per band), found " +
                             std::to_string(values.rows()));
    std::vector<Pixel> pixels;
    for (Index c = 0; c < values.cols(); ++c) pixels.emplace_back(values.col(c));
    return pixels;
}

// Cubes ------------------------------------------------------------------

std::string_view to_string(SampleType type) { return type == SampleType::f32 ? "f32" : "f64"; }

fs::path cube_sidecar_path(const fs::path& payload) {
    fs::path sidecar = payload;
    sidecar += ".json";
    return sidecar;
}

bool looks_like_cube(const fs::path& path) {
    if (path.extension() == ".json") return true;
    return fs::exists(cube_sidecar_path(path));
}

CubeFile read_cube(const fs::path& path) {
    fs::path payload = path;
    fs::path sidecar = cube_sidecar_path(path);
    if (path.extension() == ".json") {
        sidecar = path;
        payload = path;
        payload.replace_extension();
    }
    const std::string sidecar_name = sidecar.string();
    json header;
    try {
        header = json::parse(read_file(sidecar));
    } catch (const json::parse_error& e) {
        throw ParseError(sidecar_name, 0, e.byte, "invalid JSON header");
    }
    const Fields f(header, "", sidecar_name);
    f.only({"width", "height", "bands", "dtype", "interleave", "byte_order"});

    CubeFile out;
    out.header.width = f.integer("width", 1);
    out.header.height = f.integer("height", 1);
    out.header.bands = f.integer("bands", 1);
    const std::string dtype = f.string("dtype");
    if (dtype == "f32") out.header.dtype = SampleType::f32;
    else if (dtype == "f64") out.header.dtype = SampleType::f64;
    else f.fail("dtype", "must be \"f32\" or \"f64\"");
    if (f.has("interleave") && f.string("interleave") != "bsq")
        f.fail("interleave", "only \"bsq\" is supported");
    if (f.has("byte_order") && f.string("byte_order") != "little")
        f.fail("byte_order", "only \"little\" is supported");

    const std::string bytes = read_file(payload);
    const std::size_t count =
        static_cast<std::size_t>(out.header.width * out.header.height * out.header.bands);
    const std::size_t size = sample_size(out.header.dtype);
    if (bytes.size() != count * size)
        throw ParseError(payload.string(), 0, 0,
                         "payload is " + std::to_string(bytes.size()) + " bytes, header implies " +
                             std::to_string(count * size));

    Cube& cube = out.cube;
    cube.width = out.header.width;
    cube.height = out.header.height;
    cube.bands = out.header.bands;
    cube.data.resize(count);
    const auto* raw = reinterpret_cast<const unsigned char*>(bytes.data());
    for (std::size_t i = 0; i < count; ++i) {
        const double v = out.header.dtype == SampleType::f32
                             ? static_cast<double>(from_little_endian<float>(raw + i * size))
                             : from_little_endian<double>(raw + i * size);
        if (!std::isfinite(v))
            throw ParseError(payload.string(), 0, i * size + 1,
                             "non-finite sample at byte offset " + std::to_string(i * size));
        cube.data[i] = v;
    }
    return out;
}

void write_cube(const fs::path& payload, const Cube& cube, SampleType dtype) {
    cube.validate();
    const std::size_t size = sample_size(dtype);
    std::string bytes(cube.data.size() * size, '\0');
    auto* raw = reinterpret_cast<unsigned char*>(bytes.data());
    for (std::size_t i = 0; i < cube.data.size(); ++i) {
        if (dtype == SampleType::f32) to_little_endian(static_cast<float>(cube.data[i]), raw + i * size);
        else to_little_endian(cube.data[i], raw + i * size);
    }
    json header = {{"width", cube.width},
                   {"height", cube.height},
                   {"bands", cube.bands},
                   {"dtype", std::string(to_string(dtype))},
                   {"interleave", "bsq"},
                   {"byte_order", "little"}};
    write_file(payload, bytes);
    write_file(cube_sidecar_path(payload), header.dump(2) + "\n");
}

// Abundance outputs ------------------------------------------------------

std::uint8_t quantize_abundance(double value) {
    if (std::isnan(value)) return 0;
    const double scaled = std::round(255.0 * std::clamp(value, 0.0, 1.0));
    return static_cast<std::uint8_t>(scaled);
}

std::string encode_pgm(const AbundanceMaps& maps, Index r) {
    if (r < 0 || r >= maps.endmembers) throw DomainError("endmember index out of range");
    std::string out = "P5\n" + std::to_string(maps.width) + " " + std::to_string(maps.height) + "\n255\n";
    for (Index y = 0; y < maps.height; ++y)
        for (Index x = 0; x < maps.width; ++x)
            out += static_cast<char>(quantize_abundance(maps.at(r, x, y)));
    return out;
}

void write_pgm(const fs::path& path, const AbundanceMaps& maps, Index r) {
    write_file(path, encode_pgm(maps, r));
}

PgmImage read_pgm(const fs::path& path) {
    const std::string bytes = read_file(path);
    std::istringstream in(bytes);
    std::string magic;
    long width = 0, height = 0, maxval = 0;
    in >> magic >> width >> height >> maxval;
    if (!in || magic != "P5" || width < 1 || height < 1 || maxval != 255)
        throw ParseError(path.string(), 0, 0, "not a binary 8-bit PGM");
    in.get();  // single whitespace after maxval
    const auto offset = static_cast<std::size_t>(in.tellg());
    PgmImage image{width, height, {}};
    if (bytes.size() - offset != static_cast<std::size_t>(width * height))
        throw ParseError(path.string(), 0, offset, "pixel data has the wrong length");
    image.pixels.assign(bytes.begin() + static_cast<std::ptrdiff_t>(offset), bytes.end());
    return image;
}

std::string format_abundance_csv(const std::vector<Vector>& pixels,
                                 const std::vector<std::string>& names) {
    std::string out = "pixel";
    for (const std::string& n : names) out += "," + n;
    out += '\n';
    for (std::size_t p = 0; p < pixels.size(); ++p) {
        if (static_cast<std::size_t>(pixels[p].size()) != names.size())
            throw DimensionError("abundance row", static_cast<std::ptrdiff_t>(names.size()), pixels[p].size());
        out += std::to_string(p);
        for (Index r = 0; r < pixels[p].size(); ++r) out += "," + format_significant(pixels[p][r]);
        out += '\n';
    }
    return out;
}

std::string format_map_csv(const AbundanceMaps& maps, const std::vector<std::string>& names) {
    if (static_cast<Index>(names.size()) != maps.endmembers)
        throw DimensionError("endmember names", maps.endmembers, static_cast<std::ptrdiff_t>(names.size()));
    std::string out = "x,y";
    for (const std::string& n : names) out += "," + n;
    out += '\n';
    for (Index y = 0; y < maps.height; ++y) {
        for (Index x = 0; x < maps.width; ++x) {
            out += std::to_string(x) + "," + std::to_string(y);
            for (Index r = 0; r < maps.endmembers; ++r) out += "," + format_significant(maps.at(r, x, y));
            out += '\n';
        }
    }
    return out;
}

std::string format_trace_csv(const SolverTrace& trace) {
    std::string out = "iteration,cost,step,gamma_max,max_complementarity,component_sum";
    const Index components = trace.records.empty() ? 0 : trace.records.front().iterate.size();
    for (Index r = 0; r < components; ++r) out += ",alpha_" + std::to_string(r + 1);
    out += '\n';
    for (std::size_t k = 0; k < trace.records.size(); ++k) {
        const IterationRecord& rec = trace.records[k];
        out += std::to_string(k) + "," + shortest(rec.cost) + "," + shortest(rec.step) + "," +
               shortest(rec.gamma_max) + "," + shortest(rec.max_complementarity) + "," +
               shortest(rec.component_sum);
        for (Index r = 0; r < rec.iterate.size(); ++r) out += "," + shortest(rec.iterate[r]);
        out += '\n';
    }
    return out;
}

// Reports ----------------------------------------------------------------

std::string format_report_csv(const MonteCarloReport& report) {
    std::string out = "solver,snr_db,component,mean,variance,mean_sum_violation,mean_iters,failures\n";
    for (std::size_t s = 0; s < report.solvers.size(); ++s) {
        for (std::size_t k = 0; k < report.snr_db.size(); ++k) {
            const CellStats& cell = report.cell(s, k);
            for (Index r = 0; r < report.components; ++r) {
                out += report.solvers[s] + "," + format_significant(report.snr_db[k]) + "," +
                       std::to_string(r + 1) + "," + format_significant(cell.mean[r]) + "," +
                       format_significant(cell.variance[r]) + "," +
                       format_significant(cell.mean_sum_violation) + "," +
                       format_significant(cell.mean_iterations) + "," + std::to_string(cell.failures) +
                       "\n";
            }
        }
    }
    return out;
}

std::string format_report_json(const MonteCarloReport& report) {
    json cells = json::array();
    for (std::size_t s = 0; s < report.solvers.size(); ++s) {
        for (std::size_t k = 0; k < report.snr_db.size(); ++k) {
            const CellStats& cell = report.cell(s, k);
            json mean = json::array(), variance = json::array();
            for (Index r = 0; r < report.components; ++r) {
                mean.push_back(finite_or_null(cell.mean[r]));
                variance.push_back(finite_or_null(cell.variance[r]));
            }
            const double snr = report.snr_db[k];
            cells.push_back({{"solver", report.solvers[s]},
                             {"snr_db", std::isinf(snr) ? json("inf") : json(snr)},
                             {"mean", mean},
                             {"variance", variance},
                             {"mean_cost", finite_or_null(cell.mean_cost)},
                             {"mean_sum_violation", finite_or_null(cell.mean_sum_violation)},
                             {"mean_iters", finite_or_null(cell.mean_iterations)},
                             {"successes", cell.successes},
                             {"failures", cell.failures},
                             {"max_iter_runs", cell.max_iter_runs}});
        }
    }
    json doc = {{"runs", report.runs},
                {"components", report.components},
                {"solvers", report.solvers},
                {"cells", cells}};
    return doc.dump(2) + "\n";
}

// Experiment specifications ----------------------------------------------

std::string solver_config_json(const SolverConfig& config) {
    return solver_json("", config).dump();
}

ExperimentDocument parse_experiment_spec(std::string_view text, const std::string& source,
                                         const fs::path& base_dir) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ParseError(source, 0, e.byte, std::string("invalid JSON: ") + e.what());
    }
    const Fields root(doc, "", source);
    root.only({"endmembers", "alpha_true", "snr_db", "runs", "solvers", "seed", "init"});

    json canonical;
    std::vector<fs::path> inputs;

    // Endmembers.
    const Fields em(root.at("endmembers"), "endmembers", source);
    const std::string kind = em.string("source");
    std::optional<EndmemberMatrix> endmembers;
    if (kind == "substitute") {
        em.only({"source", "bands"});
        const auto bands = em.has("bands") ? em.integer("bands", 3) : 224;
        endmembers = substitute_library_spectra(bands);
        canonical["endmembers"] = {{"source", kind}, {"bands", bands}};
    } else if (kind == "csv") {
        em.only({"source", "path"});
        fs::path path = em.string("path");
        if (path.is_relative()) path = base_dir / path;
        try {
            endmembers = read_endmember_csv(path);
        } catch (const ParseError& e) {
            em.fail("path", e.what());
        }
        inputs.push_back(path);
        canonical["endmembers"] = {{"source", kind}, {"path", em.string("path")}};
    } else if (kind == "smooth_random") {
        em.only({"source", "bands", "count", "seed"});
        const auto bands = em.integer("bands", 1);
        const auto count = em.integer("count", 1);
        if (count > bands) em.fail("count", "must not exceed bands");
        const auto seed = em.unsigned_integer("seed");
        endmembers = smooth_random_spectra(bands, count, seed);
        canonical["endmembers"] = {{"source", kind}, {"bands", bands}, {"count", count}, {"seed", seed}};
    } else {
        em.fail("source", "must be \"substitute\", \"csv\" or \"smooth_random\"");
    }

    // True abundances.
    const json& alpha_json = root.at("alpha_true");
    if (!alpha_json.is_array() || alpha_json.empty()) root.fail("alpha_true", "must be a non-empty array");
    Vector alpha(static_cast<Index>(alpha_json.size()));
    for (std::size_t i = 0; i < alpha_json.size(); ++i) {
        if (!alpha_json[i].is_number()) root.fail("alpha_true", "entries must be numbers");
        alpha[static_cast<Index>(i)] = alpha_json[i].get<double>();
    }
    if (alpha.size() != endmembers->endmembers())
        root.fail("alpha_true", "has " + std::to_string(alpha.size()) + " entries but there are " +
                                    std::to_string(endmembers->endmembers()) + " endmembers");
    std::optional<AbundanceVector> alpha_true;
    try {
        alpha_true.emplace(alpha);
    } catch (const Error& e) {
        root.fail("alpha_true", e.what());
    }
    canonical["alpha_true"] = alpha_json;

    // SNR grid.
    const json& snr_json = root.at("snr_db");
    if (!snr_json.is_array() || snr_json.empty()) root.fail("snr_db", "must be a non-empty array");
    std::vector<double> snr;
    for (const json& v : snr_json) {
        if (v.is_number()) snr.push_back(v.get<double>());
        else if (v.is_string() && (v == "inf" || v == "+inf")) snr.push_back(kNoiseFree);
        else root.fail("snr_db", "entries must be numbers or \"inf\"");
    }
    canonical["snr_db"] = snr_json;

    const int runs = static_cast<int>(root.integer("runs", 1));
    const std::uint64_t seed = root.has("seed") ? root.unsigned_integer("seed") : 0;
    InitPolicy init = InitPolicy::random_simplex;
    if (root.has("init")) {
        const std::string policy = root.string("init");
        if (policy == "uniform") init = InitPolicy::uniform;
        else if (policy != "random_simplex") root.fail("init", "must be \"uniform\" or \"random_simplex\"");
    }
    canonical["runs"] = runs;
    canonical["seed"] = seed;
    canonical["init"] = init == InitPolicy::uniform ? "uniform" : "random_simplex";

    // Solvers.
    const json& solvers_json = root.at("solvers");
    if (!solvers_json.is_array() || solvers_json.empty()) root.fail("solvers", "must be a non-empty array");
    std::vector<SolverEntry> solvers;
    canonical["solvers"] = json::array();
    for (std::size_t i = 0; i < solvers_json.size(); ++i) {
        const Fields sf(solvers_json[i], "solvers[" + std::to_string(i) + "]", source);
        SolverEntry entry;
        entry.config = parse_solver(sf, entry.name);
        for (const SolverEntry& prior : solvers)
            if (prior.name == entry.name) sf.fail("name", "duplicate solver name '" + entry.name + "'");
        canonical["solvers"].push_back(solver_json(entry.name, entry.config));
        solvers.push_back(std::move(entry));
    }

    ExperimentDocument out{ExperimentSpec{std::move(*endmembers), std::move(*alpha_true), std::move(snr),
                                          runs, std::move(solvers), seed, init},
                           canonical.dump(), std::move(inputs)};
    try {
        out.spec.validate();
    } catch (const Error& e) {
        root.fail("", e.what());
    }
    return out;
}

ExperimentDocument read_experiment_spec(const fs::path& path) {
    return parse_experiment_spec(read_file(path), path.string(), path.parent_path());
}

}  // namespace unmix
