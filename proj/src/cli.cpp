#include "naxray/cli.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "naxray/bayes.hpp"
#include "naxray/errors.hpp"
#include "naxray/estimates.hpp"
#include "naxray/io.hpp"
#include "naxray/normalop.hpp"
#include "naxray/parallel.hpp"
#include "naxray/stats.hpp"

namespace naxray::cli
{
namespace fs = std::filesystem;
using nlohmann::json;

//---------------------------------------------------------------------------//
// Config
//---------------------------------------------------------------------------//

namespace
{
Config from_ptree(boost::property_tree::ptree const& pt, fs::path base)
{
    Config c;
    for (auto const& [section, body] : pt)
    {
        if (body.empty())
        {
            c.set(section, body.data());
            continue;
        }
        for (auto const& [key, value] : body)
            c.set(section + "." + key, value.data());
    }
    (void)base;
    return c;
}

std::string trim(std::string s)
{
    auto ws = [](unsigned char ch) { return std::isspace(ch); };
    s.erase(s.begin(), std::find_if_not(s.begin(), s.end(), ws));
    s.erase(std::find_if_not(s.rbegin(), s.rend(), ws).base(), s.end());
    return s;
}

[[noreturn]] void bad_value(std::string const& key, std::string const& v)
{
    throw DomainError("config key '" + key + "': cannot parse '" + v + "'");
}
}  // namespace

Config Config::from_file(fs::path const& path)
{
    boost::property_tree::ptree pt;
    try
    {
        boost::property_tree::ini_parser::read_ini(path.string(), pt);
    }
    catch (boost::property_tree::ini_parser_error const& e)
    {
        throw IoError(std::string("config: ") + e.what());
    }
    Config c = from_ptree(pt, path.parent_path());
    c.base_ = path.parent_path();
    return c;
}

Config Config::from_string(std::string const& text)
{
    boost::property_tree::ptree pt;
    std::istringstream is(text);
    try
    {
        boost::property_tree::ini_parser::read_ini(is, pt);
    }
    catch (boost::property_tree::ini_parser_error const& e)
    {
        throw IoError(std::string("config: ") + e.what());
    }
    Config c = from_ptree(pt, {});
    c.base_ = fs::current_path();
    return c;
}

bool Config::has(std::string const& key) const
{
    return values_.count(key) > 0;
}

std::string Config::str(std::string const& key, std::string const& fallback) const
{
    auto it = values_.find(key);
    return it == values_.end() ? fallback : trim(it->second);
}

std::string Config::str(std::string const& key) const
{
    auto it = values_.find(key);
    if (it == values_.end())
        throw DomainError("config key '" + key + "' is required");
    return trim(it->second);
}

double Config::num(std::string const& key, double fallback) const
{
    if (!has(key))
        return fallback;
    std::string v = str(key);
    try
    {
        std::size_t pos = 0;
        double x = std::stod(v, &pos);
        if (pos != v.size())
            bad_value(key, v);
        return x;
    }
    catch (std::logic_error const&)
    {
        bad_value(key, v);
    }
}

long long Config::integer(std::string const& key, long long fallback) const
{
    if (!has(key))
        return fallback;
    std::string v = str(key);
    try
    {
        std::size_t pos = 0;
        long long x = std::stoll(v, &pos);
        if (pos != v.size())
            bad_value(key, v);
        return x;
    }
    catch (std::logic_error const&)
    {
        bad_value(key, v);
    }
}

bool Config::flag(std::string const& key, bool fallback) const
{
    if (!has(key))
        return fallback;
    std::string v = str(key);
    std::transform(v.begin(), v.end(), v.begin(), [](unsigned char c) { return std::tolower(c); });
    if (v == "true" || v == "1" || v == "yes" || v == "on")
        return true;
    if (v == "false" || v == "0" || v == "no" || v == "off")
        return false;
    bad_value(key, v);
}

std::vector<std::string> Config::list(std::string const& key) const
{
    std::vector<std::string> out;
    if (!has(key))
        return out;
    std::stringstream ss(str(key));
    std::string item;
    while (std::getline(ss, item, ','))
    {
        item = trim(item);
        if (!item.empty())
            out.push_back(item);
    }
    return out;
}

std::vector<std::string> Config::sections() const
{
    std::vector<std::string> out;
    for (auto const& [k, v] : values_)
    {
        auto dot = k.rfind('.');
        std::string s = dot == std::string::npos ? std::string() : k.substr(0, dot);
        if (!s.empty() && std::find(out.begin(), out.end(), s) == out.end())
            out.push_back(s);
    }
    return out;
}

fs::path Config::resolve(std::string const& value) const
{
    fs::path p(value);
    if (p.is_absolute() || base_.empty())
        return p;
    return base_ / p;
}

//---------------------------------------------------------------------------//
// Shared helpers
//---------------------------------------------------------------------------//

namespace
{
struct Context
{
    Config const& cfg;
    std::uint64_t seed;
    fs::path out;
    SolverConfig solver;
    std::ostream& log;
};

std::string num(double x)
{
    return io::fmt(x);
}

std::vector<double> parse_numbers(std::vector<std::string> const& items, std::string const& key)
{
    std::vector<double> out;
    for (auto const& s : items)
    {
        try
        {
            out.push_back(std::stod(s));
        }
        catch (std::logic_error const&)
        {
            throw DomainError("config key '" + key + "': bad number '" + s + "'");
        }
    }
    return out;
}

/*
 * A field reference is a file path (anything ending in .bin or .json), or
 * the name of a [field.NAME] section describing a generated random field:
 * d, m, modes, L, structure, amplitude, decay, seed, linf (rescale to this
 * grid sup), one_form_amplitude (adds a direction-dependent part).
 */
Attenuation load_attenuation(Context const& ctx, std::string const& ref)
{
    fs::path p(ref);
    if (p.extension() == ".bin" || p.extension() == ".json")
        return Attenuation(io::read_field(ctx.cfg.resolve(ref)));
    std::string sec = "field." + ref;
    bool any = false;
    for (auto const& s : ctx.cfg.sections())
        any = any || s == sec;
    if (!any)
        throw DomainError("field '" + ref + "' is neither a file nor a [" + sec + "] section");
    auto const& c = ctx.cfg;
    int d = static_cast<int>(c.integer(sec + ".d", 3));
    int m = static_cast<int>(c.integer(sec + ".m", 1));
    int modes = static_cast<int>(c.integer(sec + ".modes", 5));
    double L = c.num(sec + ".L", 2.0);
    Structure s = structure_from_string(c.str(sec + ".structure", "general-real"));
    double amp = c.num(sec + ".amplitude", 1.0);
    double decay = c.num(sec + ".decay", 2.0);
    auto fseed = static_cast<std::uint64_t>(c.integer(sec + ".seed", 0));
    Rng rng(Rng::seed_for(ctx.seed ^ fseed, stream::fields));
    PotentialField phi = random_field(d, m, modes, L, s, amp, decay, rng);
    if (c.has(sec + ".linf"))
    {
        double target = c.num(sec + ".linf", 1.0);
        double cur = linf_norm(phi, 17);
        if (cur > 0)
            phi *= cplx(target / cur, 0);
    }
    Attenuation att(phi);
    double famp = c.num(sec + ".one_form_amplitude", 0.0);
    if (famp > 0)
    {
        for (int j = 0; j < d; ++j)
            att.one_form.push_back(random_field(d, m, modes, L, s, famp, decay, rng));
    }
    return att;
}

std::vector<Attenuation> load_list(Context const& ctx, std::string const& key)
{
    auto refs = ctx.cfg.list(key);
    if (refs.empty())
        throw DomainError("'" + key + "' lists no fields");
    std::vector<Attenuation> out;
    for (auto const& r : refs)
        out.push_back(load_attenuation(ctx, r));
    return out;
}

void write_text(Context const& ctx, std::string const& name, std::string const& text)
{
    io::atomic_write(ctx.out / name, text);
    ctx.log << "wrote " << (ctx.out / name).string() << "\n";
}

void write_json(Context const& ctx, std::string const& name, json const& j)
{
    write_text(ctx, name, io::dump(j) + "\n");
}

PriorSpec prior_from(Config const& c)
{
    PriorSpec p;
    p.d = static_cast<int>(c.integer("prior.d", p.d));
    p.m = static_cast<int>(c.integer("prior.m", p.m));
    p.alpha = c.num("prior.alpha", p.alpha);
    p.modes = static_cast<int>(c.integer("prior.modes", p.modes));
    p.L = c.num("prior.L", p.L);
    p.amplitude = c.num("prior.amplitude", p.amplitude);
    p.structure = structure_from_string(c.str("prior.structure", to_string(p.structure)));
    p.validate();
    return p;
}

ChainConfig chain_from(Config const& c, std::uint64_t seed)
{
    ChainConfig ch;
    ch.beta = c.num("chain.beta", ch.beta);
    ch.n_iter = static_cast<int>(c.integer("chain.n_iter", ch.n_iter));
    ch.burn_in = static_cast<int>(c.integer("chain.burn_in", ch.burn_in));
    ch.thin = static_cast<int>(c.integer("chain.thin", ch.thin));
    ch.adapt = c.flag("chain.adapt", ch.adapt);
    ch.target_accept = c.num("chain.target_accept", ch.target_accept);
    ch.start_at_zero = c.flag("chain.start_at_zero", ch.start_at_zero);
    ch.seed = Rng::seed_for(seed, stream::chain);
    ch.validate();
    return ch;
}

json prior_json(PriorSpec const& p)
{
    return {{"d", p.d},   {"m", p.m}, {"alpha", p.alpha}, {"modes", p.modes}, {"L", p.L},
            {"amplitude", p.amplitude}, {"structure", to_string(p.structure)}};
}

json solver_json(SolverConfig const& s)
{
    return {{"steps_per_unit", s.steps_per_unit}, {"richardson", s.richardson}};
}

//---------------------------------------------------------------------------//
// Commands
//---------------------------------------------------------------------------//

int cmd_forward(Context const& ctx)
{
    auto const& c = ctx.cfg;
    Attenuation att = load_attenuation(ctx, c.str("forward.field"));
    std::vector<BoundaryDirection> bds;
    if (c.has("forward.directions_file"))
    {
        std::istringstream is(io::read_text(c.resolve(c.str("forward.directions_file"))));
        std::string line;
        while (std::getline(is, line))
        {
            if (line.empty())
                continue;
            json j;
            try
            {
                j = json::parse(line);
            }
            catch (json::exception const& e)
            {
                throw IoError(std::string("directions file: ") + e.what());
            }
            bds.push_back(BoundaryDirection::make(io::vec_from_json(j.at("x")), io::vec_from_json(j.at("v"))));
        }
    }
    else
    {
        auto n = c.integer("forward.directions", 10);
        if (n < 1)
            throw DomainError("forward.directions must be >= 1");
        Rng rng(Rng::seed_for(ctx.seed, stream::directions));
        bds = sample_boundary_uniform(att.dim(), static_cast<std::size_t>(n), rng);
    }
    auto records = scattering_data(att, bds, ctx.solver);
    std::string format = c.str("forward.format", "jsonl");
    if (format != "jsonl" && format != "bin" && format != "both")
        throw DomainError("forward.format must be jsonl, bin or both");

    bool abelian = att.matrix_size() == 1;
    double max_dev = 0;
    std::string text;
    for (auto const& r : records)
    {
        json j = {{"x", io::vec_to_json(r.bd.x)}, {"v", io::vec_to_json(r.bd.v)}};
        json val = json::array();
        for (Eigen::Index i = 0; i < r.value.rows(); ++i)
            for (Eigen::Index k = 0; k < r.value.cols(); ++k)
                val.push_back({r.value(i, k).real(), r.value(i, k).imag()});
        j["value"] = val;
        if (abelian)
        {
            // companion check: log C against the Simpson integral of Phi on the solver grid
            cplx lg = std::log(r.value(0, 0));
            CMat ix = -weighted_integral(Weight::identity(), att.phi,
                                         GeodesicSegment::chord(r.bd.x, r.bd.v, ctx.solver.steps_per_unit));
            for (std::size_t a = 0; a < att.one_form.size(); ++a)
                ix -= r.bd.v[static_cast<Eigen::Index>(a)] *
                      weighted_integral(Weight::identity(), att.one_form[a],
                                        GeodesicSegment::chord(r.bd.x, r.bd.v, ctx.solver.steps_per_unit));
            // U' = -Phi U from U(tau) = 1 gives log U(0) = +int Phi
            cplx integral = -ix(0, 0);
            j["log_value"] = {lg.real(), lg.imag()};
            j["xray"] = {integral.real(), integral.imag()};
            max_dev = std::max(max_dev, std::abs(lg.real() - integral.real()));
        }
        text += io::dump(j, -1) + "\n";
    }
    if (format == "jsonl" || format == "both")
        write_text(ctx, "scattering.jsonl", text);
    if (format == "bin" || format == "both")
    {
        io::write_scattering_bin(ctx.out / "scattering.bin", records);
        ctx.log << "wrote " << (ctx.out / "scattering.bin").string() << "\n";
    }
    json summary = {{"command", "forward"},
                    {"n", records.size()},
                    {"d", att.dim()},
                    {"m", att.matrix_size()},
                    {"seed", ctx.seed},
                    {"solver", solver_json(ctx.solver)}};
    if (abelian)
        summary["abelian_max_log_deviation"] = max_dev;
    write_json(ctx, "forward.json", summary);
    return kPass;
}

int cmd_pseudolin(Context const& ctx)
{
    auto const& c = ctx.cfg;
    auto fields = load_list(ctx, "pseudolin.fields");
    if (fields.size() < 2)
        throw DomainError("pseudolin.fields needs at least two fields");
    auto n_dirs = c.integer("pseudolin.directions", 20);
    double delta = c.num("pseudolin.delta", 0.25);
    double tol = c.num("pseudolin.tolerance", 1e-5);
    bool refine = c.flag("pseudolin.refine", true);
    Rng rng(Rng::seed_for(ctx.seed, stream::directions));
    auto bds = sample_boundary_uniform(fields.front().dim(), static_cast<std::size_t>(n_dirs), rng);
    SolverConfig fine = ctx.solver;
    fine.steps_per_unit *= 2;

    io::CsvTable table;
    table.columns = {"pair_id", "phi", "psi", "direction", "residual", "residual_fine"};
    double worst = 0;
    std::vector<double> coarse_all, fine_all;
    int pair = 0;
    for (std::size_t i = 0; i < fields.size(); ++i)
        for (std::size_t j = i + 1; j < fields.size(); ++j, ++pair)
            for (std::size_t k = 0; k < bds.size(); ++k)
            {
                double r = pseudolin_residual(fields[i], fields[j], bds[k], delta, ctx.solver);
                double rf = refine ? pseudolin_residual(fields[i], fields[j], bds[k], delta, fine) : 0.0;
                worst = std::max(worst, r);
                coarse_all.push_back(r);
                fine_all.push_back(rf);
                table.add({std::to_string(pair), std::to_string(i), std::to_string(j), std::to_string(k), num(r),
                           num(rf)});
            }
    write_text(ctx, "pseudolin.csv", table.str());
    json summary = {{"command", "pseudolin-check"}, {"max_residual", worst},     {"tolerance", tol},
                    {"n_pairs", pair},              {"n_directions", bds.size()}, {"delta", delta},
                    {"solver", solver_json(ctx.solver)}};
    if (refine)
    {
        double sc = 0, sf = 0;
        for (std::size_t q = 0; q < coarse_all.size(); ++q)
        {
            sc += coarse_all[q] * coarse_all[q];
            sf += fine_all[q] * fine_all[q];
        }
        summary["rms_residual"] = std::sqrt(sc / coarse_all.size());
        summary["rms_residual_fine"] = std::sqrt(sf / fine_all.size());
        summary["measured_order"] = sf > 0 ? std::log2(std::sqrt(sc / sf)) : 0.0;
    }
    bool pass = worst < tol;
    summary["pass"] = pass;
    write_json(ctx, "pseudolin.json", summary);
    return pass ? kPass : kFail;
}

int cmd_bounds(Context const& ctx)
{
    auto const& c = ctx.cfg;
    auto fields = load_list(ctx, "bounds.fields");
    auto n_dirs = c.integer("bounds.directions", 50);
    double tol = c.num("bounds.tolerance", 1e-8);
    double utol = c.num("bounds.unitary_tolerance", 1e-9);
    io::CsvTable table;
    table.columns = {"field", "skew", "linf", "bound", "max_norm", "margin", "max_defect"};
    bool pass = true;
    double min_margin = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < fields.size(); ++i)
    {
        auto r = check_linf_bound(fields[i], static_cast<std::size_t>(n_dirs), ctx.solver,
                                  Rng::seed_for(ctx.seed, i));
        bool skew = fields[i].is_skew();
        pass = pass && std::max(0.0, -r.margin) < tol;
        if (skew)
            pass = pass && r.max_defect < utol;
        min_margin = std::min(min_margin, r.margin);
        table.add({std::to_string(i), skew ? "1" : "0", num(r.linf), num(r.bound), num(r.max_norm), num(r.margin),
                   num(r.max_defect)});
    }
    write_text(ctx, "bounds.csv", table.str());
    write_json(ctx, "bounds.json",
               {{"command", "bounds-check"},
                {"min_margin", min_margin},
                {"tolerance", tol},
                {"unitary_tolerance", utol},
                {"n_fields", fields.size()},
                {"pass", pass},
                {"solver", solver_json(ctx.solver)}});
    return pass ? kPass : kFail;
}

int cmd_layer(Context const& ctx)
{
    auto const& c = ctx.cfg;
    auto fields = load_list(ctx, "layer.fields");
    auto triples = c.integer("layer.triples", 10);
    auto levels = parse_numbers(c.list("layer.levels"), "layer.levels");
    if (levels.empty())
        levels = {64, 128, 256};
    if (levels.size() < 2)
        throw DomainError("layer.levels needs at least two resolutions");
    double c_lo = c.num("layer.c_min", 0.2);
    double c_hi = c.num("layer.c_max", 0.8);
    double tol = c.num("layer.tolerance", 1e-2);
    double min_order = c.num("layer.min_order", 1.0);
    for (auto const& f : fields)
        if (f.matrix_size() != 1 || !f.one_form.empty())
            throw DomainError("layer-check uses scalar potentials (m = 1)");
    int d = fields.front().dim();
    QuadraticRho rho = QuadraticRho::isotropic(d);
    Rng rng(Rng::seed_for(ctx.seed, stream::directions));

    io::CsvTable table;
    table.columns = {"triple", "c", "steps_per_unit", "step", "residual"};
    std::vector<double> lx, ly;
    std::vector<int> group;
    double finest_max = 0;
    json orders = json::array();
    for (long long t = 0; t < triples; ++t)
    {
        auto const& f = fields[static_cast<std::size_t>(t) % fields.size()].phi;
        double lev = c_lo + (c_hi - c_lo) * rng.uniform();
        auto bd = sample_boundary_uniform(d, 1, rng).front();
        BoundaryDirection bdc{std::sqrt(lev) * bd.x, bd.v};
        std::vector<double> hs, rs;
        for (double spu : levels)
        {
            SolverConfig s = ctx.solver;
            s.steps_per_unit = static_cast<int>(spu);
            double r = layer_identity_residual(Weight::identity(), f, lev, rho, bdc, s);
            table.add({std::to_string(t), num(lev), std::to_string(s.steps_per_unit), num(1.0 / spu), num(r)});
            hs.push_back(1.0 / spu);
            rs.push_back(std::max(r, 1e-300));
        }
        finest_max = std::max(finest_max, rs.back());
        auto fit = log_log_fit(hs, rs);
        orders.push_back(fit.slope);
        for (std::size_t q = 0; q < hs.size(); ++q)
        {
            lx.push_back(std::log(hs[q]));
            ly.push_back(std::log(rs[q]));
            group.push_back(static_cast<int>(t));
        }
    }
    // pooled slope with one intercept per triple
    double sxx = 0, sxy = 0;
    for (long long t = 0; t < triples; ++t)
    {
        double mx = 0, my = 0;
        int cnt = 0;
        for (std::size_t q = 0; q < lx.size(); ++q)
            if (group[q] == t)
            {
                mx += lx[q];
                my += ly[q];
                ++cnt;
            }
        mx /= cnt;
        my /= cnt;
        for (std::size_t q = 0; q < lx.size(); ++q)
            if (group[q] == t)
            {
                sxx += (lx[q] - mx) * (lx[q] - mx);
                sxy += (lx[q] - mx) * (ly[q] - my);
            }
    }
    double pooled = sxx > 0 ? sxy / sxx : 0.0;
    bool pass = pooled >= min_order && finest_max < tol;
    write_text(ctx, "layer.csv", table.str());
    write_json(ctx, "layer.json",
               {{"command", "layer-check"},
                {"pooled_order", pooled},
                {"orders", orders},
                {"min_order", min_order},
                {"max_finest_residual", finest_max},
                {"tolerance", tol},
                {"levels", levels},
                {"pass", pass}});
    return pass ? kPass : kFail;
}

int cmd_stability(Context const& ctx)
{
    auto const& c = ctx.cfg;
    std::vector<DistancePair> pairs;
    io::CsvTable table;
    table.columns = {"pair_id", "ck_norm_phi", "ck_norm_psi", "data_dist", "pot_dist"};
    if (c.has("stability.pairs_file"))
    {
        std::istringstream is(io::read_text(c.resolve(c.str("stability.pairs_file"))));
        std::string line;
        std::getline(is, line);
        std::vector<std::string> header;
        {
            std::stringstream hs(line);
            std::string col;
            while (std::getline(hs, col, ','))
                header.push_back(trim(col));
        }
        auto col_of = [&](std::string const& name) {
            auto it = std::find(header.begin(), header.end(), name);
            if (it == header.end())
                throw IoError("pairs file lacks column '" + name + "'");
            return static_cast<std::size_t>(it - header.begin());
        };
        std::size_t cd = col_of("data_dist"), cp = col_of("pot_dist");
        while (std::getline(is, line))
        {
            if (trim(line).empty())
                continue;
            std::vector<std::string> cells;
            std::stringstream ls(line);
            std::string cell;
            while (std::getline(ls, cell, ','))
                cells.push_back(trim(cell));
            if (cells.size() != header.size())
                throw IoError("pairs file row width mismatch");
            try
            {
                pairs.push_back({std::stod(cells[cd]), std::stod(cells[cp])});
            }
            catch (std::logic_error const&)
            {
                throw IoError("pairs file: bad number");
            }
            table.add({std::to_string(pairs.size() - 1), "", "", num(pairs.back().data_dist),
                       num(pairs.back().pot_dist)});
        }
    }
    else
    {
        int d = static_cast<int>(c.integer("stability.d", 3));
        int m = static_cast<int>(c.integer("stability.m", 3));
        int modes = static_cast<int>(c.integer("stability.modes", 4));
        auto n_pairs = c.integer("stability.pairs", 50);
        double radius = c.num("stability.c2_radius", 2.0);
        auto n_dirs = c.integer("stability.directions", 200);
        double t_min = c.num("stability.t_min", 1.0 / 32);
        Rng rng(Rng::seed_for(ctx.seed, stream::fields));
        Rng drng(Rng::seed_for(ctx.seed, stream::directions));
        auto bds = sample_boundary_uniform(d, static_cast<std::size_t>(n_dirs), drng);
        for (long long p = 0; p < n_pairs; ++p)
        {
            PotentialField phi = random_field(d, m, modes, 2.0, Structure::skew_symmetric, 1.0, 3.0, rng);
            PotentialField dir = random_field(d, m, modes, 2.0, Structure::skew_symmetric, 1.0, 3.0, rng);
            // both ends inside the C^2 ball of the given radius
            phi *= cplx(0.5 * radius * rng.uniform() / ck_seminorm(phi, 2, 17), 0);
            double t = std::exp(std::log(t_min) * rng.uniform());
            dir *= cplx(0.5 * radius * t / ck_seminorm(dir, 2, 17), 0);
            PotentialField psi = phi + dir;
            double dd = data_distance(phi, psi, bds, ctx.solver);
            double pd = l2_norm_on_ball(dir);
            pairs.push_back({dd, pd});
            table.add({std::to_string(p), num(ck_seminorm(phi, 2, 17)), num(ck_seminorm(psi, 2, 17)), num(dd),
                       num(pd)});
        }
    }
    auto fit = hoelder_fit(pairs);
    std::vector<double> xd, yd;
    for (auto const& p : pairs)
    {
        xd.push_back(p.data_dist);
        yd.push_back(p.pot_dist);
    }
    double rs = stats::spearman(xd, yd);
    double mu_max = c.num("stability.mu_max", 1.05);
    double r2_min = c.num("stability.r2_min", 0.8);
    double rho_min = c.num("stability.spearman_min", 0.9);
    bool pass = fit.mu_hat > 0 && fit.mu_hat <= mu_max && fit.r2 >= r2_min && rs >= rho_min;
    json j = to_json(fit);
    j["spearman"] = rs;
    j["pass"] = pass;
    j["command"] = "stability-fit";
    write_text(ctx, "sweep.csv", table.str());
    write_json(ctx, "fit.json", j);
    return pass ? kPass : kFail;
}

int cmd_symbol(Context const& ctx)
{
    auto const& c = ctx.cfg;
    int d = static_cast<int>(c.integer("symbol.d", 3));
    int m = static_cast<int>(c.integer("symbol.m", 1));
    int n_quad = static_cast<int>(c.integer("symbol.n_quad", 4096));
    double alpha = c.num("symbol.alpha_curv", 1.0);
    auto grid = reduced_grid(d, static_cast<int>(c.integer("symbol.n_xi", 10)),
                             static_cast<int>(c.integer("symbol.n_zeta", 25)),
                             static_cast<int>(c.integer("symbol.n_angles", 40)), c.num("symbol.xi_max", 1e3),
                             c.num("symbol.zeta_max", 100.0));
    std::string weight = c.str("symbol.weight", "identity");
    std::vector<WeightBoundaryData> family;
    if (weight == "identity")
        family.push_back(weight_data(d, n_quad, [m](Vec const&) { return CMat::Identity(m, m); }));
    else if (weight == "unitary-diagonal")
    {
        auto size = c.integer("symbol.family_size", 20);
        Rng rng(Rng::seed_for(ctx.seed, stream::fields));
        for (long long k = 0; k < size; ++k)
        {
            CMat g(m, m);
            for (int i = 0; i < m; ++i)
                for (int j = 0; j < m; ++j)
                    g(i, j) = cplx(rng.normal(), rng.normal());
            CMat u = Eigen::HouseholderQR<CMat>(g).householderQ();
            Eigen::VectorXcd diag(m);
            for (int i = 0; i < m; ++i)
                diag[i] = 0.5 + 1.5 * rng.uniform();
            CMat w = u * diag.asDiagonal() * u.adjoint();
            family.push_back(weight_data(d, n_quad, [w](Vec const&) { return w; }));
        }
    }
    else
        throw DomainError("symbol.weight must be identity or unitary-diagonal");
    double lambda0 = calibrate_lambda0(family, grid, alpha);
    double probe = c.has("symbol.lambda0_probe") ? c.num("symbol.lambda0_probe", 0.0) : lambda0;
    double worst_margin = std::numeric_limits<double>::infinity();
    json members = json::array();
    MarginReport worst;
    for (auto const& w : family)
    {
        auto r = ellipticity_margin(w, grid, probe, alpha);
        members.push_back(to_json(r));
        if (r.margin < worst_margin)
        {
            worst_margin = r.margin;
            worst = r;
        }
    }
    bool pass = worst.min_eig > 0 && worst_margin >= 0;
    write_json(ctx, "margin.json",
               {{"command", "symbol-check"},
                {"grid",
                 {{"d", d},
                  {"points", grid.xi.size()},
                  {"n_xi", c.integer("symbol.n_xi", 10)},
                  {"n_zeta", c.integer("symbol.n_zeta", 25)},
                  {"n_angles", c.integer("symbol.n_angles", 40)},
                  {"xi_max", c.num("symbol.xi_max", 1e3)},
                  {"zeta_max", c.num("symbol.zeta_max", 100.0)},
                  {"n_quad", n_quad}}},
                {"weight", weight},
                {"alpha_curv", alpha},
                {"min_eig", worst.min_eig},
                {"margin", worst_margin},
                {"argmin", to_json(worst)["argmin"]},
                {"calibrated_lambda0", lambda0},
                {"lambda0_probe", probe},
                {"members", members},
                {"pass", pass}});
    return pass ? kPass : kFail;
}

PotentialField truth_field(Context const& ctx, std::string const& key, PriorSpec const& prior)
{
    std::string ref = ctx.cfg.str(key, "prior");
    if (ref == "prior")
    {
        Rng rng(Rng::seed_for(ctx.seed, stream::prior));
        return sample_prior(prior, rng);
    }
    Attenuation a = load_attenuation(ctx, ref);
    if (!a.one_form.empty())
        throw DomainError("truth must be a potential without one-form part");
    return a.phi;
}

int cmd_simulate(Context const& ctx)
{
    auto const& c = ctx.cfg;
    PriorSpec prior = prior_from(c);
    PotentialField truth = truth_field(ctx, "simulate.truth", prior);
    auto n = c.integer("simulate.n", 500);
    if (n < 1)
        throw DomainError("simulate.n must be >= 1");
    Rng rng(Rng::seed_for(ctx.seed, stream::noise));
    std::string id = c.str("simulate.truth", "prior") + "#seed=" + std::to_string(ctx.seed);
    Dataset ds = simulate_dataset(truth, static_cast<std::size_t>(n), rng, ctx.solver, id);
    io::write_dataset(ctx.out / "dataset.jsonl", ds);
    io::write_field(ctx.out / "truth.bin", truth);
    ctx.log << "wrote " << (ctx.out / "dataset.jsonl").string() << " and truth.bin\n";
    write_json(ctx, "simulate.json",
               {{"command", "simulate"},
                {"n", ds.n()},
                {"seed", ctx.seed},
                {"truth_id", id},
                {"truth_l2", l2_norm_on_ball(truth)},
                {"solver", solver_json(ctx.solver)}});
    return kPass;
}

int cmd_reconstruct(Context const& ctx)
{
    auto const& c = ctx.cfg;
    PriorSpec prior = prior_from(c);
    Dataset ds = io::read_dataset(c.resolve(c.str("reconstruct.dataset")));
    if (ds.records.empty())
        throw DomainError("dataset is empty");
    PriorModel model(prior);
    ChainConfig chain = chain_from(c, ctx.seed);
    double scale = scale_for_n(prior, static_cast<double>(ds.n()));
    auto res = pcn_chain(chain, model, scale, ds, ctx.solver);
    std::optional<PotentialField> truth;
    if (c.has("reconstruct.truth"))
        truth = io::read_field(c.resolve(c.str("reconstruct.truth")));
    auto summary = summarize(res, model, truth ? &*truth : nullptr);
    io::write_field(ctx.out / "posterior_mean.bin", summary.mean_field);
    json j = {{"command", "reconstruct"},
              {"n", ds.n()},
              {"scale", scale},
              {"acceptance_rate", summary.acceptance_rate},
              {"ess_proxy", summary.ess_proxy},
              {"beta", res.beta},
              {"samples", res.samples.size()},
              {"prior", prior_json(prior)},
              {"solver", solver_json(ctx.solver)}};
    bool pass = true;
    if (truth)
    {
        double null_err = l2_norm_on_ball(*truth);
        j["l2_error"] = summary.l2_error_vs_truth;
        j["null_error"] = null_err;
        j["beats_null"] = summary.l2_error_vs_truth < null_err;
        if (c.flag("reconstruct.require_beats_null", false))
            pass = summary.l2_error_vs_truth < null_err;
    }
    j["pass"] = pass;
    write_json(ctx, "summary.json", j);
    json state = {{"seed", chain.seed},
                  {"n_iter", chain.n_iter},
                  {"burn_in", chain.burn_in},
                  {"thin", chain.thin},
                  {"beta", res.beta},
                  {"theta", res.samples.back()}};
    write_json(ctx, "chain.json", state);
    return pass ? kPass : kFail;
}

int cmd_sweep(Context const& ctx)
{
    auto const& c = ctx.cfg;
    PriorSpec prior = prior_from(c);
    PotentialField truth = truth_field(ctx, "sweep.truth", prior);
    auto nlist = parse_numbers(c.list("sweep.n_grid"), "sweep.n_grid");
    auto slist = parse_numbers(c.list("sweep.seeds"), "sweep.seeds");
    if (nlist.empty() || slist.empty())
        throw DomainError("sweep needs n_grid and seeds");
    std::vector<std::size_t> ns;
    for (double x : nlist)
        ns.push_back(static_cast<std::size_t>(x));
    std::vector<std::uint64_t> seeds;
    for (double x : slist)
        seeds.push_back(Rng::seed_for(ctx.seed, static_cast<std::uint64_t>(x)));
    ChainConfig chain = chain_from(c, ctx.seed);
    auto rows = consistency_sweep(truth, ns, seeds, prior, chain, ctx.solver);
    io::CsvTable table;
    table.columns = {"n", "seed", "alpha", "beta", "accept_rate", "l2_error"};
    for (std::size_t i = 0; i < rows.size(); ++i)
    {
        auto const& r = rows[i];
        table.add({std::to_string(r.n), io::fmt(slist[i % slist.size()]).substr(0, std::string::npos), num(r.alpha),
                   num(r.beta), num(r.accept_rate), num(r.l2_error)});
    }
    // seeds column carries the configured seed labels
    for (std::size_t i = 0; i < rows.size(); ++i)
        table.rows[i][1] = std::to_string(static_cast<long long>(slist[i % slist.size()]));
    write_text(ctx, "sweep.csv", table.str());
    return kPass;
}

using Handler = int (*)(Context const&);

std::vector<std::pair<std::string, Handler>> const& handlers()
{
    static std::vector<std::pair<std::string, Handler>> const h = {
        {"forward", cmd_forward},           {"pseudolin-check", cmd_pseudolin}, {"bounds-check", cmd_bounds},
        {"layer-check", cmd_layer},         {"stability-fit", cmd_stability},   {"symbol-check", cmd_symbol},
        {"simulate", cmd_simulate},         {"reconstruct", cmd_reconstruct},   {"sweep", cmd_sweep}};
    return h;
}
}  // namespace

std::vector<std::string> commands()
{
    std::vector<std::string> out;
    for (auto const& [name, fn] : handlers())
        out.push_back(name);
    return out;
}

int run_command(Options const& opts, Config const& cfg, std::ostream& out)
{
    if (opts.threads)
        set_thread_count(*opts.threads);
    std::uint64_t seed = opts.seed ? *opts.seed : static_cast<std::uint64_t>(cfg.integer("run.seed", 0));
    SolverConfig solver;
    solver.steps_per_unit = static_cast<int>(cfg.integer("solver.steps_per_unit", solver.steps_per_unit));
    solver.richardson = cfg.flag("solver.richardson", false);
    solver.validate();
    Context ctx{cfg, seed, opts.out, solver, out};
    for (auto const& [name, fn] : handlers())
        if (name == opts.command)
        {
            fs::create_directories(opts.out);
            return fn(ctx);
        }
    throw DomainError("unknown command '" + opts.command + "'");
}

int run(int argc, char const* const* argv, std::ostream& out, std::ostream& err)
{
    CLI::App app{"naxray: non-abelian X-ray transform laboratory on the unit ball"};
    app.require_subcommand(1);
    Options opts;
    std::string config_path;
    std::uint64_t seed = 0;
    std::string out_dir = "naxray-out";
    int threads = 0;
    for (auto const& name : commands())
    {
        auto* sub = app.add_subcommand(name, "run " + name);
        sub->add_option("--config", config_path, "INI configuration file");
        sub->add_option("--seed", seed, "global seed (overrides [run] seed)");
        sub->add_option("--out", out_dir, "output directory");
        sub->add_option("--threads", threads, "worker threads (fallback: NAXRAY_THREADS)")->check(CLI::PositiveNumber);
    }
    try
    {
        app.parse(argc, argv);
    }
    catch (CLI::CallForHelp const& e)
    {
        out << app.help();
        return kPass;
    }
    catch (CLI::ParseError const& e)
    {
        err << "usage error: " << e.what() << "\n" << app.help();
        return kInputError;
    }
    auto* sub = app.get_subcommands().front();
    opts.command = sub->get_name();
    if (!config_path.empty())
        opts.config = config_path;
    if (sub->count("--seed"))
        opts.seed = seed;
    opts.out = out_dir;
    if (sub->count("--threads"))
        opts.threads = threads;
    try
    {
        Config cfg = opts.config ? Config::from_file(*opts.config) : Config::from_string("");
        int code = run_command(opts, cfg, out);
        out << opts.command << ": " << (code == kPass ? "pass" : "fail") << "\n";
        return code;
    }
    catch (IoError const& e)
    {
        err << "input error: " << e.what() << "\n";
    }
    catch (DomainError const& e)
    {
        err << "input error: " << e.what() << "\n";
    }
    catch (DegenerateInputError const& e)
    {
        err << "input error: " << e.what() << "\n";
    }
    catch (NumericError const& e)
    {
        err << "numeric error: " << e.what() << "\n";
    }
    catch (std::exception const& e)
    {
        err << "error: " << e.what() << "\n";
    }
    return kInputError;
}
}  // namespace naxray::cli
