#include "naxray/io.hpp"

#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

#include "naxray/errors.hpp"

namespace naxray::io
{
namespace
{
void put_le(std::string& out, double x)
{
    std::uint64_t u;
    std::memcpy(&u, &x, sizeof u);
    if constexpr (std::endian::native == std::endian::big)
        u = __builtin_bswap64(u);
    char b[8];
    std::memcpy(b, &u, 8);
    out.append(b, 8);
}

double get_le(char const* p)
{
    std::uint64_t u;
    std::memcpy(&u, p, 8);
    if constexpr (std::endian::native == std::endian::big)
        u = __builtin_bswap64(u);
    double x;
    std::memcpy(&x, &u, sizeof x);
    return x;
}

void dump_rec(nlohmann::json const& j, int indent, int depth, std::string& out)
{
    auto nl = [&](int d) {
        if (indent < 0)
            return;
        out += '\n';
        out.append(static_cast<std::size_t>(indent * d), ' ');
    };
    switch (j.type())
    {
        case nlohmann::json::value_t::object:
        {
            if (j.empty())
            {
                out += "{}";
                return;
            }
            out += '{';
            bool first = true;
            for (auto it = j.begin(); it != j.end(); ++it)
            {
                if (!first)
                    out += ',';
                first = false;
                nl(depth + 1);
                out += nlohmann::json(it.key()).dump();
                out += indent < 0 ? ":" : ": ";
                dump_rec(it.value(), indent, depth + 1, out);
            }
            nl(depth);
            out += '}';
            return;
        }
        case nlohmann::json::value_t::array:
        {
            if (j.empty())
            {
                out += "[]";
                return;
            }
            // numeric arrays stay on one line
            bool flat = std::all_of(j.begin(), j.end(), [](auto const& e) { return e.is_primitive(); });
            out += '[';
            bool first = true;
            for (auto const& e : j)
            {
                if (!first)
                    out += flat && indent >= 0 ? ", " : ",";
                first = false;
                if (!flat)
                    nl(depth + 1);
                dump_rec(e, indent, depth + 1, out);
            }
            if (!flat)
                nl(depth);
            out += ']';
            return;
        }
        case nlohmann::json::value_t::number_float: out += fmt(j.get<double>()); return;
        default: out += j.dump(); return;
    }
}

void check_stream(std::ios const& s, fs::path const& p, char const* what)
{
    if (!s)
        throw IoError(std::string(what) + " '" + p.string() + "'");
}

nlohmann::json parse_json(std::string const& text, fs::path const& origin)
{
    try
    {
        return nlohmann::json::parse(text);
    }
    catch (nlohmann::json::exception const& e)
    {
        throw IoError("malformed JSON in '" + origin.string() + "': " + e.what());
    }
}

template<class T>
T require(nlohmann::json const& j, char const* key, fs::path const& origin)
{
    if (!j.contains(key))
        throw IoError("'" + origin.string() + "' lacks key '" + key + "'");
    try
    {
        return j.at(key).get<T>();
    }
    catch (nlohmann::json::exception const&)
    {
        throw IoError("'" + origin.string() + "': bad value for '" + key + "'");
    }
}

nlohmann::json matrix_pairs(CMat const& a)
{
    nlohmann::json out = nlohmann::json::array();
    for (Eigen::Index i = 0; i < a.rows(); ++i)
        for (Eigen::Index j = 0; j < a.cols(); ++j)
            out.push_back({a(i, j).real(), a(i, j).imag()});
    return out;
}

CMat matrix_from_pairs(nlohmann::json const& j)
{
    auto n = static_cast<Eigen::Index>(j.size());
    auto m = static_cast<Eigen::Index>(std::llround(std::sqrt(static_cast<double>(n))));
    if (m * m != n || m == 0)
        throw IoError("matrix value is not square");
    CMat a(m, m);
    for (Eigen::Index q = 0; q < n; ++q)
    {
        auto const& p = j.at(q);
        if (!p.is_array() || p.size() != 2)
            throw IoError("matrix entries must be [re, im] pairs");
        a(q / m, q % m) = cplx(p.at(0).get<double>(), p.at(1).get<double>());
    }
    return a;
}
}  // namespace

std::string fmt(double x)
{
    if (std::isnan(x))
        return "NaN";
    if (std::isinf(x))
        return x > 0 ? "Infinity" : "-Infinity";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    std::string s(buf);
    // keep floats recognisable as floats
    if (s.find_first_of(".eEn") == std::string::npos)
        s += ".0";
    return s;
}

std::string dump(nlohmann::json const& j, int indent)
{
    std::string out;
    dump_rec(j, indent, 0, out);
    return out;
}

void atomic_write(fs::path const& path, std::string const& contents)
{
    if (path.has_parent_path())
        fs::create_directories(path.parent_path());
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
        check_stream(os, tmp, "cannot open for writing");
        os.write(contents.data(), static_cast<std::streamsize>(contents.size()));
        check_stream(os, tmp, "write failed for");
    }
    fs::rename(tmp, path);
}

std::string read_text(fs::path const& path)
{
    std::ifstream is(path, std::ios::binary);
    check_stream(is, path, "cannot open");
    std::ostringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

fs::path sidecar_of(fs::path const& bin)
{
    fs::path p = bin;
    p.replace_extension(".json");
    return p;
}

//---------------------------------------------------------------------------//

nlohmann::json field_sidecar(PotentialField const& f, std::string const& data_file)
{
    auto const& c = f.cutoff();
    return {{"d", f.dim()},
            {"m", f.matrix_size()},
            {"L", f.half_width()},
            {"modes", f.modes()},
            {"structure", to_string(f.structure())},
            {"delta", c.delta},
            {"cutoff", {{"center", vec_to_json(c.center)}, {"radius", c.radius}}},
            {"layout", "row-major"},
            {"encoding", "float64-le, re/im interleaved"},
            {"data", data_file}};
}

void write_field(fs::path const& bin, PotentialField const& f)
{
    std::string raw;
    raw.reserve(f.coeffs().size() * 16);
    for (cplx z : f.coeffs())
    {
        put_le(raw, z.real());
        put_le(raw, z.imag());
    }
    atomic_write(bin, raw);
    atomic_write(sidecar_of(bin), dump(field_sidecar(f, bin.filename().string())) + "\n");
}

PotentialField read_field(fs::path const& path)
{
    fs::path side = path.extension() == ".json" ? path : sidecar_of(path);
    auto meta = parse_json(read_text(side), side);
    int d = require<int>(meta, "d", side);
    int m = require<int>(meta, "m", side);
    double L = require<double>(meta, "L", side);
    int modes = require<int>(meta, "modes", side);
    auto structure = require<std::string>(meta, "structure", side);
    double delta = require<double>(meta, "delta", side);
    if (meta.contains("layout") && meta["layout"] != "row-major")
        throw IoError("'" + side.string() + "': unsupported layout");
    fs::path bin = path.extension() == ".json" ? side.parent_path() / require<std::string>(meta, "data", side)
                                               : path;
    PotentialField f;
    try
    {
        f = PotentialField(d, m, modes, L, structure_from_string(structure));
        if (delta > 0)
        {
            Cutoff c;
            c.delta = delta;
            c.center = Vec::Zero(d);
            if (meta.contains("cutoff"))
            {
                c.center = vec_from_json(meta["cutoff"].at("center"));
                c.radius = meta["cutoff"].at("radius").get<double>();
            }
            f.set_cutoff(c);
        }
    }
    catch (DomainError const& e)
    {
        throw IoError("'" + side.string() + "': " + e.what());
    }
    std::string raw = read_text(bin);
    if (raw.size() != f.coeffs().size() * 16)
        throw IoError("'" + bin.string() + "' has " + std::to_string(raw.size()) + " bytes, expected " +
                      std::to_string(f.coeffs().size() * 16));
    auto co = f.coeffs();
    for (std::size_t i = 0; i < co.size(); ++i)
        co[i] = cplx(get_le(raw.data() + 16 * i), get_le(raw.data() + 16 * i + 8));
    return f;
}

//---------------------------------------------------------------------------//

std::string scattering_jsonl(std::span<ScatteringRecord const> records)
{
    std::string out;
    for (auto const& r : records)
    {
        nlohmann::json j = {{"x", vec_to_json(r.bd.x)}, {"v", vec_to_json(r.bd.v)}, {"value", matrix_pairs(r.value)}};
        out += dump(j, -1);
        out += '\n';
    }
    return out;
}

std::vector<ScatteringRecord> parse_scattering_jsonl(std::string const& text)
{
    std::vector<ScatteringRecord> out;
    std::istringstream is(text);
    std::string line;
    while (std::getline(is, line))
    {
        if (line.empty())
            continue;
        fs::path const origin = "<scattering jsonl>";
        auto j = parse_json(line, origin);
        ScatteringRecord r;
        r.bd = {vec_from_json(require<nlohmann::json>(j, "x", origin)),
                vec_from_json(require<nlohmann::json>(j, "v", origin))};
        r.value = matrix_from_pairs(require<nlohmann::json>(j, "value", origin));
        out.push_back(std::move(r));
    }
    return out;
}

void write_scattering_bin(fs::path const& bin, std::span<ScatteringRecord const> records)
{
    int d = records.empty() ? 0 : records.front().bd.dim();
    int m = records.empty() ? 0 : static_cast<int>(records.front().value.rows());
    std::string raw;
    for (auto const& r : records)
    {
        for (int a = 0; a < d; ++a)
            put_le(raw, r.bd.x[a]);
        for (int a = 0; a < d; ++a)
            put_le(raw, r.bd.v[a]);
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < m; ++j)
            {
                put_le(raw, r.value(i, j).real());
                put_le(raw, r.value(i, j).imag());
            }
    }
    atomic_write(bin, raw);
    nlohmann::json meta = {{"n", records.size()},
                           {"d", d},
                           {"m", m},
                           {"layout", "row-major"},
                           {"record", "x[d], v[d], value[m*m](re, im)"},
                           {"encoding", "float64-le"},
                           {"data", bin.filename().string()}};
    atomic_write(sidecar_of(bin), dump(meta) + "\n");
}

std::vector<ScatteringRecord> read_scattering_bin(fs::path const& bin)
{
    fs::path side = sidecar_of(bin);
    auto meta = parse_json(read_text(side), side);
    auto n = require<std::size_t>(meta, "n", side);
    int d = require<int>(meta, "d", side);
    int m = require<int>(meta, "m", side);
    std::string raw = read_text(bin);
    std::size_t per = static_cast<std::size_t>(2 * d + 2 * m * m) * 8;
    if (raw.size() != n * per)
        throw IoError("'" + bin.string() + "' size does not match its sidecar");
    std::vector<ScatteringRecord> out(n);
    for (std::size_t r = 0; r < n; ++r)
    {
        char const* p = raw.data() + r * per;
        Vec x(d), v(d);
        for (int a = 0; a < d; ++a)
            x[a] = get_le(p + 8 * a);
        for (int a = 0; a < d; ++a)
            v[a] = get_le(p + 8 * (d + a));
        CMat val(m, m);
        for (int q = 0; q < m * m; ++q)
            val(q / m, q % m) = cplx(get_le(p + 8 * (2 * d + 2 * q)), get_le(p + 8 * (2 * d + 2 * q + 1)));
        out[r] = {{x, v}, val};
    }
    return out;
}

//---------------------------------------------------------------------------//

void write_dataset(fs::path const& jsonl, Dataset const& ds)
{
    std::string out;
    for (auto const& r : ds.records)
    {
        nlohmann::json j = {{"x", vec_to_json(r.bd.x)}, {"v", vec_to_json(r.bd.v)}, {"y", vec_to_json(r.y)}};
        out += dump(j, -1);
        out += '\n';
    }
    atomic_write(jsonl, out);
    nlohmann::json meta = {{"n", ds.n()},
                           {"m", ds.m},
                           {"structure", to_string(ds.structure)},
                           {"noise_sigma", ds.noise_sigma},
                           {"truth_id", ds.truth_id},
                           {"y_coordinates", ds.structure == Structure::skew_symmetric
                                                 ? "so(m): (E_ij - E_ji)/sqrt(2), i < j, row-major order"
                                                 : "gl_m(R): E_ij, row-major order"},
                           {"data", jsonl.filename().string()}};
    atomic_write(sidecar_of(jsonl), dump(meta) + "\n");
}

Dataset read_dataset(fs::path const& jsonl)
{
    Dataset ds;
    fs::path side = sidecar_of(jsonl);
    if (fs::exists(side))
    {
        auto meta = parse_json(read_text(side), side);
        ds.m = require<int>(meta, "m", side);
        ds.structure = structure_from_string(require<std::string>(meta, "structure", side));
        ds.noise_sigma = meta.value("noise_sigma", 1.0);
        ds.truth_id = meta.value("truth_id", std::string());
    }
    std::istringstream is(read_text(jsonl));
    std::string line;
    while (std::getline(is, line))
    {
        if (line.empty())
            continue;
        auto j = parse_json(line, jsonl);
        ds.records.push_back({{vec_from_json(require<nlohmann::json>(j, "x", jsonl)),
                               vec_from_json(require<nlohmann::json>(j, "v", jsonl))},
                              vec_from_json(require<nlohmann::json>(j, "y", jsonl))});
    }
    return ds;
}

//---------------------------------------------------------------------------//

void CsvTable::add(std::vector<std::string> row)
{
    if (row.size() != columns.size())
        throw IoError("CSV row width does not match the header");
    rows.push_back(std::move(row));
}

std::string CsvTable::str() const
{
    std::string out;
    for (std::size_t i = 0; i < columns.size(); ++i)
        out += (i ? "," : "") + columns[i];
    out += '\n';
    for (auto const& r : rows)
    {
        for (std::size_t i = 0; i < r.size(); ++i)
            out += (i ? "," : "") + r[i];
        out += '\n';
    }
    return out;
}

nlohmann::json vec_to_json(Vec const& v)
{
    nlohmann::json out = nlohmann::json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i)
        out.push_back(v[i]);
    return out;
}

Vec vec_from_json(nlohmann::json const& j)
{
    if (!j.is_array())
        throw IoError("expected a numeric array");
    Vec v(static_cast<Eigen::Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i)
        v[static_cast<Eigen::Index>(i)] = j.at(i).get<double>();
    return v;
}
}  // namespace naxray::io
