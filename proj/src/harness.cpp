#include "cflow/harness.hpp"

#include <openssl/evp.h>

#include <CLI11.hpp>
#include <algorithm>
#include <boost/algorithm/string.hpp>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <numbers>
#include <set>
#include <sstream>

#include "cflow/initial_data.hpp"
#include "cflow/inverse_map.hpp"

namespace cflow {

#ifndef CFLOW_VERSION
#define CFLOW_VERSION "0.0.0"
#endif
const char* const kCodeVersion = CFLOW_VERSION;

namespace {

const char* kMod = "harness";
using json = nlohmann::ordered_json;

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string join(const std::vector<double>& v) {
    std::string s;
    for (size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + num(v[i]);
    return s;
}

[[noreturn]] void bad(const std::string& what) { throw Error(ErrorKind::config, kMod, what); }

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> parts, out;
    boost::split(parts, s, boost::is_any_of(","));
    for (auto& p : parts) {
        boost::trim(p);
        if (!p.empty()) out.push_back(p);
    }
    return out;
}

double to_double(const std::string& key, const std::string& v) {
    try {
        size_t used = 0;
        double d = std::stod(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return d;
    } catch (const std::exception&) {
        bad("'" + key + "' expects a number, got '" + v + "'");
    }
}

const char* geometry_name(GeometryKind k) { return k == GeometryKind::circle ? "circle" : "line_approx"; }

GeometryKind geometry_kind(const std::string& s) {
    if (s == "circle") return GeometryKind::circle;
    if (s == "line_approx" || s == "line-approx") return GeometryKind::line_approx;
    bad("unknown geometry '" + s + "'");
}

FlowKind flow_kind(const std::string& s) {
    for (FlowKind k : {FlowKind::mkdv, FlowKind::renorm_mkdv, FlowKind::mass, FlowKind::h_kappa, FlowKind::difference})
        if (s == to_string(k)) return k;
    bad("unknown hamiltonian '" + s + "'");
}

Mu mu_of(double m) {
    if (m == 1.0) return Mu::defocusing;
    if (m == -1.0) return Mu::focusing;
    bad("mu must be +1 or -1");
}

std::string sha256_hex(const std::string& data) {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr);
    std::string out;
    char buf[3];
    for (unsigned i = 0; i < len; ++i) {
        std::snprintf(buf, sizeof buf, "%02x", md[i]);
        out += buf;
    }
    return out;
}

void ensure_dir(const std::string& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw Error(ErrorKind::io, kMod, "cannot create output directory '" + dir + "': " + ec.message());
}

std::ofstream open_out(const ExperimentConfig& cfg, const std::string& name) {
    ensure_dir(cfg.out_dir);
    std::string path = (std::filesystem::path(cfg.out_dir) / name).string();
    std::ofstream f(path);
    if (!f) throw Error(ErrorKind::io, kMod, "cannot write '" + path + "'");
    return f;
}

json provenance_json(const ExperimentConfig& cfg) {
    json p;
    p["code_version"] = kCodeVersion;
    p["config_hash"] = cfg.hash();
    json r = json::object();
    for (auto& [k, v] : cfg.resolved()) r[k] = v;
    p["config"] = r;
    return p;
}

void write_json(const ExperimentConfig& cfg, const std::string& name, json body) {
    json doc;
    doc["provenance"] = provenance_json(cfg);
    for (auto& [k, v] : body.items()) doc[k] = v;
    auto f = open_out(cfg, name);
    f << doc.dump(2) << "\n";
}

ResultRow check_le(const std::string& exp, const std::string& params, const std::string& metric, double value,
                   double tol) {
    return ResultRow{exp, params, metric, value, tol, std::isfinite(value) && value <= tol};
}

double rel_drift(double a, double b) { return a == 0.0 ? std::abs(b) : std::abs(b - a) / std::abs(a); }

struct CorpusPoint {
    Geometry g;
    double kappa;
    Mu mu;
    int sample;
    Field q;
    std::string params() const {
        return std::string("geometry=") + geometry_name(g.kind) + ";kappa=" + num(kappa) +
               ";mu=" + num(sgn(mu)) + ";sample=" + std::to_string(sample);
    }
};

std::vector<Geometry> corpus_geometries(const ExperimentConfig& cfg) {
    if (cfg.geometries.empty()) return {cfg.geometry};
    std::vector<Geometry> out;
    for (auto& name : cfg.geometries) {
        GeometryKind k = geometry_kind(name);
        double period = k == GeometryKind::circle ? 1.0 : cfg.line_period;
        out.push_back(make_grid(k, period, cfg.geometry.n));
    }
    return out;
}

// geometry x kappa x mu x sample; the corpus for a given kappa is shared by both signs of mu
std::vector<CorpusPoint> corpus(const ExperimentConfig& cfg) {
    std::vector<CorpusPoint> pts;
    for (const Geometry& g : corpus_geometries(cfg))
        for (double k : cfg.kappas) {
            auto qs = random_corpus(g, cfg.initial.seed, cfg.samples, cfg.delta, k, cfg.initial.decay);
            for (Mu mu : {Mu::defocusing, Mu::focusing})
                for (int i = 0; i < cfg.samples; ++i) pts.push_back({g, k, mu, i, qs[i]});
        }
    return pts;
}

std::vector<ResultRow> verify_identities(const ExperimentConfig& cfg) {
    auto pts = corpus(cfg);
    const double tol_id = cfg.tol("identity"), tol_x = cfg.tol("series_direct");
    auto rows = parallel_map<std::vector<ResultRow>>(int(pts.size()), cfg.jobs, [&](int i) {
        const auto& pt = pts[i];
        auto d = greens_diagnostics(pt.q, pt.kappa, pt.mu, GreensMethod::direct);
        auto s = greens_diagnostics(pt.q, pt.kappa, pt.mu, GreensMethod::series);
        auto res = identity_residuals(pt.q, d, pt.mu);
        SobolevIndex h1{1.0, pt.kappa};
        double x = sobolev_norm(d.gamma - s.gamma, h1) + sobolev_norm(d.p - s.p, h1) +
                   sobolev_norm(d.r - s.r, h1);
        std::string p = pt.params();
        return std::vector<ResultRow>{check_le("identities", p, "gamma_prime", res.gamma_prime, tol_id),
                                      check_le("identities", p, "p_prime", res.p_prime, tol_id),
                                      check_le("identities", p, "r_prime", res.r_prime, tol_id),
                                      check_le("identities", p, "r_consistency", res.r_consistency, tol_id),
                                      check_le("identities", p, "series_vs_direct_h1", x, tol_x)};
    });
    std::vector<ResultRow> out;
    for (auto& r : rows) out.insert(out.end(), r.begin(), r.end());
    return out;
}

std::vector<ResultRow> verify_bracket(const ExperimentConfig& cfg) {
    std::vector<std::pair<CorpusPoint, std::pair<double, double>>> pts;
    for (const Geometry& g : corpus_geometries(cfg)) {
        double kmin = 1e300;
        for (auto& [a, b] : cfg.pairs) kmin = std::min({kmin, a, b});
        auto qs = random_corpus(g, cfg.initial.seed, cfg.samples, cfg.delta, kmin, cfg.initial.decay);
        for (auto& pr : cfg.pairs)
            for (Mu mu : {Mu::defocusing, Mu::focusing})
                for (int i = 0; i < cfg.samples; ++i) pts.push_back({{g, pr.first, mu, i, qs[i]}, pr});
    }
    const double tol = cfg.tol("bracket");
    return parallel_map<ResultRow>(int(pts.size()), cfg.jobs, [&](int i) {
        auto& [pt, pr] = pts[i];
        auto ra = greens_diagnostics(pt.q, pr.first, pt.mu).r;
        auto rb = greens_diagnostics(pt.q, pr.second, pt.mu).r;
        double scale = ra.l2() * rb.l2();
        double v = scale == 0.0 ? 0.0 : std::abs(poisson_bracket_r(pt.q, pr.first, pr.second, pt.mu)) / scale;
        return check_le("bracket", pt.params() + ";varkappa=" + num(pr.second), "bracket_relative", v, tol);
    });
}

std::vector<ResultRow> drift_rows(const std::string& exp, const Trajectory& tr, double tol) {
    std::vector<ResultRow> rows;
    const auto& first = tr.conserved_log.front();
    double dm = 0, dh = 0;
    std::vector<double> da(tr.probe_kappas.size(), 0.0);
    for (auto& rec : tr.conserved_log) {
        dm = std::max(dm, rel_drift(first.mass, rec.mass));
        dh = std::max(dh, rel_drift(first.h_mkdv, rec.h_mkdv));
        for (size_t j = 0; j < da.size(); ++j) da[j] = std::max(da[j], rel_drift(first.alpha[j], rec.alpha[j]));
    }
    rows.push_back(check_le(exp, "", "drift_mass", dm, tol));
    rows.push_back(check_le(exp, "", "drift_h_mkdv", dh, tol));
    for (size_t j = 0; j < da.size(); ++j)
        rows.push_back(check_le(exp, "kappa*=" + num(tr.probe_kappas[j]), "drift_alpha", da[j], tol));
    return rows;
}

void write_conserved(const ExperimentConfig& cfg, const Trajectory& tr) {
    auto f = open_out(cfg, "conserved.csv");
    f << provenance_header(cfg);
    f << "time,mass,h_mkdv";
    for (double k : tr.probe_kappas) f << ",alpha_" << num(k);
    f << "\n";
    for (size_t i = 0; i < tr.times.size(); ++i) {
        const auto& c = tr.conserved_log[i];
        f << num(tr.times[i]) << "," << num(c.mass) << "," << num(c.h_mkdv);
        for (double a : c.alpha) f << "," << num(a);
        f << "\n";
    }
}

void write_snapshots(const ExperimentConfig& cfg, const Trajectory& tr) {
    auto f = open_out(cfg, "trajectory.dat");
    f << provenance_header(cfg);
    for (size_t i = 0; i < tr.states.size(); ++i) {
        const Field& q = tr.states[i];
        f << "# t = " << num(tr.times[i]) << "\n";
        for (int j = 0; j < q.size(); ++j) f << num(q.geometry().x(j)) << " " << num(q.samples()[j]) << "\n";
        f << "\n\n";  // gnuplot index separator
    }
}

}  // namespace

std::map<std::string, double> default_tolerances() {
    return {{"identity", 1e-8},      {"series_direct", 1e-8}, {"bracket", 1e-10},  {"conservation", 1e-6},
            {"soliton", 1e-4},       {"gauge", 1e-6},         {"expansion_slope", -4.5},
            {"gamma_ge4_slope", -2.5}, {"p_ge5_slope", -1.5}, {"gamma_h1_slope", -0.4},
            {"composition", 1e-5},   {"round_trip", 1e-9},    {"equivariance", 1e-10}, {"rho2w", 1e-10},
            {"w_forms", 1e-14},      {"sandwich_spread", 0.5}, {"invert", 1e-13}};
}

double ExperimentConfig::tol(const std::string& name) const {
    auto it = tolerances.find(name);
    if (it == tolerances.end()) bad("no tolerance named '" + name + "'");
    // slopes are thresholds, not error budgets; scaling them would change their meaning
    if (name.size() > 6 && name.compare(name.size() - 6, 6, "_slope") == 0) return it->second;
    if (name == "sandwich_spread") return it->second;
    return it->second * tol_scale;
}

std::vector<std::pair<std::string, std::string>> ExperimentConfig::resolved() const {
    std::vector<std::pair<std::string, std::string>> kv{
        {"geometry.kind", geometry_name(geometry.kind)},
        {"geometry.period", num(geometry.period)},
        {"geometry.n_modes", std::to_string(geometry.n)},
        {"flow.hamiltonian", to_string(flow.kind)},
        {"flow.mu", num(sgn(flow.mu))},
        {"flow.kappa", num(flow.kappa)},
        {"flow.dt", num(flow.dt)},
        {"flow.t_final", num(flow.t_final)},
        {"flow.integrator", flow.integrator == Integrator::etd_rk4 ? "etd_rk4" : "if_rk4"},
        {"flow.save_every", std::to_string(flow.save_every)},
        {"flow.cutoff", std::to_string(flow.cutoff)},
        {"flow.enforce_stability", flow.enforce_stability ? "true" : "false"},
        {"probe.kappas", join(kappas)},
        {"probe.varkappa", num(varkappa)},
        {"probe.s", num(s)},
        {"initial.family", initial.family},
        {"initial.value", num(initial.value)},
        {"initial.a", num(initial.a)},
        {"initial.k", std::to_string(initial.k)},
        {"initial.c", num(initial.c)},
        {"initial.x0", num(initial.x0)},
        {"initial.radius", num(initial.radius)},
        {"initial.decay", num(initial.decay)},
        {"initial.seed", std::to_string(initial.seed)},
        {"run.suite", suite},
        {"run.sweep", sweep},
        {"run.samples", std::to_string(samples)},
        {"run.delta", num(delta)},
        {"run.geometries", boost::join(geometries, ",")},
        {"run.line_period", num(line_period)},
        {"output.dir", out_dir},
        {"tolerance.scale", num(tol_scale)},
    };
    std::string pr;
    for (size_t i = 0; i < pairs.size(); ++i) pr += (i ? "," : "") + num(pairs[i].first) + ":" + num(pairs[i].second);
    kv.emplace_back("run.pairs", pr);
    for (auto& [k, v] : tolerances) kv.emplace_back("tolerance." + k, num(v));
    std::sort(kv.begin(), kv.end());
    return kv;
}

std::string ExperimentConfig::hash() const {
    // the output directory does not change any number, so it stays out of the hash
    std::string canon;
    for (auto& [k, v] : resolved())
        if (k != "output.dir") canon += k + "=" + v + "\n";
    return sha256_hex(canon);
}

ExperimentConfig parse_config(const std::string& text) {
    namespace pt = boost::property_tree;
    pt::ptree tree;
    try {
        std::istringstream in(text);
        pt::read_ini(in, tree);
    } catch (const pt::ini_parser_error& e) {
        bad(std::string("malformed config: ") + e.what());
    }

    static const std::map<std::string, std::set<std::string>> known{
        {"geometry", {"kind", "period", "n_modes"}},
        {"flow", {"hamiltonian", "mu", "kappa", "dt", "t_final", "integrator", "save_every", "cutoff",
                  "enforce_stability"}},
        {"probe", {"kappas", "varkappa", "s"}},
        {"initial", {"family", "value", "a", "k", "c", "x0", "radius", "decay", "seed"}},
        {"run", {"suite", "sweep", "samples", "delta", "geometries", "line_period", "pairs"}},
        {"output", {"dir"}},
        {"tolerance", {}},
    };
    ExperimentConfig cfg;
    cfg.tolerances = default_tolerances();
    cfg.source_text = text;
    for (auto& [section, body] : tree) {
        auto it = known.find(section);
        if (it == known.end()) bad("unknown section [" + section + "]");
        if (body.empty() && !body.data().empty()) bad("key '" + section + "' outside any section");
        for (auto& [key, leaf] : body) {
            std::string v = boost::trim_copy(leaf.data());
            std::string full = section + "." + key;
            if (section == "tolerance") {
                if (key == "scale") {
                    cfg.tol_scale = to_double(full, v);
                } else if (!cfg.tolerances.count(key)) {
                    bad("unknown tolerance '" + key + "'");
                } else {
                    cfg.tolerances[key] = to_double(full, v);
                }
                continue;
            }
            if (!it->second.count(key)) bad("unknown key '" + full + "'");
            auto d = [&] { return to_double(full, v); };
            auto i = [&] {
                double x = d();
                if (x != std::floor(x)) bad("'" + full + "' expects an integer");
                return static_cast<long long>(x);
            };
            if (full == "geometry.kind") cfg.geometry.kind = geometry_kind(v);
            else if (full == "geometry.period") cfg.geometry.period = d();
            else if (full == "geometry.n_modes") cfg.geometry.n = int(i());
            else if (full == "flow.hamiltonian") cfg.flow.kind = flow_kind(v);
            else if (full == "flow.mu") cfg.flow.mu = mu_of(d());
            else if (full == "flow.kappa") cfg.flow.kappa = d();
            else if (full == "flow.dt") cfg.flow.dt = d();
            else if (full == "flow.t_final") cfg.flow.t_final = d();
            else if (full == "flow.integrator") {
                if (v == "etd_rk4") cfg.flow.integrator = Integrator::etd_rk4;
                else if (v == "if_rk4") cfg.flow.integrator = Integrator::if_rk4;
                else bad("unknown integrator '" + v + "'");
            } else if (full == "flow.save_every") cfg.flow.save_every = int(i());
            else if (full == "flow.cutoff") cfg.flow.cutoff = int(i());
            else if (full == "flow.enforce_stability") cfg.flow.enforce_stability = (v == "true" || v == "1");
            else if (full == "probe.kappas") {
                cfg.kappas.clear();
                for (auto& s : split_list(v)) cfg.kappas.push_back(to_double(full, s));
            } else if (full == "probe.varkappa") cfg.varkappa = d();
            else if (full == "probe.s") cfg.s = d();
            else if (full == "initial.family") cfg.initial.family = v;
            else if (full == "initial.value") cfg.initial.value = d();
            else if (full == "initial.a") cfg.initial.a = d();
            else if (full == "initial.k") cfg.initial.k = int(i());
            else if (full == "initial.c") cfg.initial.c = d();
            else if (full == "initial.x0") cfg.initial.x0 = d();
            else if (full == "initial.radius") cfg.initial.radius = d();
            else if (full == "initial.decay") cfg.initial.decay = d();
            else if (full == "initial.seed") cfg.initial.seed = std::stoull(v);
            else if (full == "run.suite") cfg.suite = v;
            else if (full == "run.sweep") cfg.sweep = v;
            else if (full == "run.samples") cfg.samples = int(i());
            else if (full == "run.delta") cfg.delta = d();
            else if (full == "run.geometries") cfg.geometries = split_list(v);
            else if (full == "run.line_period") cfg.line_period = d();
            else if (full == "run.pairs") {
                cfg.pairs.clear();
                for (auto& s : split_list(v)) {
                    auto c = s.find(':');
                    if (c == std::string::npos) bad("pairs are written kappa:varkappa");
                    cfg.pairs.emplace_back(to_double(full, s.substr(0, c)), to_double(full, s.substr(c + 1)));
                }
            } else if (full == "output.dir") cfg.out_dir = v;
        }
    }
    try {
        cfg.geometry = make_grid(cfg.geometry.kind, cfg.geometry.period, cfg.geometry.n);
    } catch (const Error& e) {
        bad(std::string("invalid geometry: ") + e.what());
    }
    static const std::set<std::string> families{"zero", "constant", "cosine", "sine", "soliton", "random-smooth"};
    if (!families.count(cfg.initial.family)) bad("unknown initial family '" + cfg.initial.family + "'");
    if (cfg.samples < 1) bad("run.samples must be positive");
    if (cfg.kappas.empty()) bad("probe.kappas is empty");
    return cfg;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw Error(ErrorKind::config, kMod, "cannot read config '" + path + "'");
    std::stringstream ss;
    ss << f.rdbuf();
    return parse_config(ss.str());
}

Field make_initial(const Geometry& g, const InitialData& d, double kappa) {
    if (d.family == "zero") return Field::zero(g);
    if (d.family == "constant") return Field::constant(g, d.value);
    if (d.family == "cosine") return cosine(g, d.a, d.k);
    if (d.family == "sine") return sine(g, d.a, d.k);
    if (d.family == "soliton") return soliton(g, d.c, d.x0);
    if (d.family == "random-smooth") return random_smooth(g, d.seed, d.radius, kappa, d.decay);
    throw Error(ErrorKind::config, kMod, "unknown initial family '" + d.family + "'");
}

Field make_initial(const ExperimentConfig& cfg) {
    return make_initial(cfg.geometry, cfg.initial, cfg.kappas.front());
}

std::string provenance_header(const ExperimentConfig& cfg, const std::string& prefix) {
    std::string h = prefix + "cflow " + kCodeVersion + "\n";
    h += prefix + "config_hash " + cfg.hash() + "\n";
    for (auto& [k, v] : cfg.resolved()) h += prefix + k + " = " + v + "\n";
    return h;
}

void write_results_csv(const std::string& path, const ExperimentConfig& cfg, const std::vector<ResultRow>& rows) {
    std::ofstream f(path);
    if (!f) throw Error(ErrorKind::io, kMod, "cannot write '" + path + "'");
    f << provenance_header(cfg);
    f << "experiment,params,metric,value,tolerance,pass,code_version,config_hash\n";
    const std::string h = cfg.hash();
    for (auto& r : rows)
        f << r.experiment << "," << r.params << "," << r.metric << "," << num(r.value) << "," << num(r.tolerance)
          << "," << (r.pass ? "pass" : "fail") << "," << kCodeVersion << "," << h << "\n";
}

std::vector<ResultRow> run_evolve(const ExperimentConfig& cfg) {
    Field q0 = make_initial(cfg);
    FlowSpec spec = cfg.flow;
    if (spec.probe_kappas.empty()) spec.probe_kappas = cfg.kappas;
    Trajectory tr = evolve(q0, spec);
    write_snapshots(cfg, tr);
    write_conserved(cfg, tr);
    // every flow here Poisson commutes with M, H_mKdV and A(kappa*)
    std::vector<ResultRow> rows = drift_rows("evolve", tr, cfg.tol("conservation"));
    if (cfg.initial.family == "soliton" && spec.kind == FlowKind::mkdv && spec.mu == Mu::focusing) {
        double t = tr.times.back();
        Field exact = soliton(cfg.geometry, cfg.initial.c, cfg.initial.x0 + cfg.initial.c * t);
        rows.push_back(check_le("evolve", "t=" + num(t), "soliton_l2_error", (tr.states.back() - exact).l2(),
                                cfg.tol("soliton")));
    }
    return rows;
}

std::vector<ResultRow> run_verify(const ExperimentConfig& cfg) {
    if (cfg.suite == "identities") return verify_identities(cfg);
    if (cfg.suite == "bracket") return verify_bracket(cfg);
    if (cfg.suite == "conservation") {
        FlowSpec spec = cfg.flow;
        spec.probe_kappas = cfg.kappas;
        Trajectory tr = evolve(make_initial(cfg), spec);
        write_conserved(cfg, tr);
        return drift_rows("conservation", tr, cfg.tol("conservation"));
    }
    throw Error(ErrorKind::config, kMod, "unknown verify suite '" + cfg.suite + "'");
}

std::vector<ResultRow> run_sweep_kappa(const ExperimentConfig& cfg) {
    Field q = make_initial(cfg);
    const Mu mu = cfg.flow.mu;
    const int n = int(cfg.kappas.size());
    std::vector<ResultRow> rows;
    json body;
    body["sweep"] = cfg.sweep;
    body["kappas"] = cfg.kappas;
    auto table = open_out(cfg, "sweep.csv");
    table << provenance_header(cfg);

    if (cfg.sweep == "expansion") {
        auto res = parallel_map<double>(n, cfg.jobs, [&](int i) { return alpha_expansion_residual(q, cfg.kappas[i], mu); });
        double slope = fit_loglog_slope(cfg.kappas, res);
        table << "kappa,residual\n";
        for (int i = 0; i < n; ++i) table << num(cfg.kappas[i]) << "," << num(res[i]) << "\n";
        body["residual"] = res;
        body["fitted_slope"] = slope;
        rows.push_back(check_le("sweep-expansion", "kappas=" + join(cfg.kappas), "slope", slope,
                                cfg.tol("expansion_slope")));
    } else if (cfg.sweep == "remainders") {
        struct Out {
            double g4, p5, gh1;
        };
        auto res = parallel_map<Out>(n, cfg.jobs, [&](int i) {
            double k = cfg.kappas[i];
            auto d = greens_diagnostics(q, k, mu);
            auto rem = remainders(q, d, mu);
            return Out{l1_norm(rem.gamma_ge4), sobolev_norm(rem.p_ge5, {1.0, k}), sobolev_norm(d.gamma, {1.0, k})};
        });
        std::vector<double> g4, p5, gh1;
        table << "kappa,gamma_ge4_l1,p_ge5_h1k,gamma_h1k\n";
        for (int i = 0; i < n; ++i) {
            g4.push_back(res[i].g4);
            p5.push_back(res[i].p5);
            gh1.push_back(res[i].gh1);
            table << num(cfg.kappas[i]) << "," << num(res[i].g4) << "," << num(res[i].p5) << "," << num(res[i].gh1)
                  << "\n";
        }
        std::string p = "kappas=" + join(cfg.kappas);
        double s1 = fit_loglog_slope(cfg.kappas, g4), s2 = fit_loglog_slope(cfg.kappas, p5),
               s3 = fit_loglog_slope(cfg.kappas, gh1);
        body["gamma_ge4_l1"] = g4;
        body["p_ge5_h1k"] = p5;
        body["gamma_h1k"] = gh1;
        body["slopes"] = {{"gamma_ge4", s1}, {"p_ge5", s2}, {"gamma_h1k", s3}};
        rows.push_back(check_le("sweep-remainders", p, "gamma_ge4_slope", s1, cfg.tol("gamma_ge4_slope")));
        rows.push_back(check_le("sweep-remainders", p, "p_ge5_slope", s2, cfg.tol("p_ge5_slope")));
        rows.push_back(check_le("sweep-remainders", p, "gamma_h1_slope", s3, cfg.tol("gamma_h1_slope")));
    } else if (cfg.sweep == "approximation") {
        auto sw = kappa_approximation_sweep(q, cfg.varkappa, mu, cfg.flow.t_final, cfg.kappas, cfg.flow.dt, 20,
                                            cfg.flow.cutoff);
        table << "kappa,sup_distance\n";
        for (int i = 0; i < n; ++i) table << num(sw.kappas[i]) << "," << num(sw.sup_dist[i]) << "\n";
        double comp = commuting_composition_check(q, cfg.kappas.back(), mu, cfg.flow.t_final,
                                                  std::min(cfg.flow.dt, 1e-5), cfg.flow.cutoff);
        body["sup_distance"] = sw.sup_dist;
        body["fitted_slope"] = sw.fitted_exponent;
        body["strictly_decreasing"] = sw.strictly_decreasing;
        body["composition_residual"] = comp;
        std::string p = "varkappa=" + num(cfg.varkappa) + ";T=" + num(cfg.flow.t_final);
        rows.push_back(ResultRow{"sweep-approximation", p, "strictly_decreasing", sw.strictly_decreasing ? 1.0 : 0.0,
                                 1.0, sw.strictly_decreasing});
        rows.push_back(check_le("sweep-approximation", p + ";kappa=" + num(cfg.kappas.back()), "composition", comp,
                                cfg.tol("composition")));
    } else {
        throw Error(ErrorKind::config, kMod, "unknown sweep '" + cfg.sweep + "'");
    }
    write_json(cfg, "sweep.json", body);
    return rows;
}

std::vector<ResultRow> run_invert_r(const ExperimentConfig& cfg) {
    auto pts = corpus(cfg);
    const double tol_rt = cfg.tol("round_trip"), tol_eq = cfg.tol("equivariance"), tol_inv = cfg.tol("invert");
    auto rows = parallel_map<std::vector<ResultRow>>(int(pts.size()), cfg.jobs, [&](int i) {
        const auto& pt = pts[i];
        const double k = pt.kappa;
        const Geometry& g = pt.g;
        // q -> r -> q
        Field t1 = forward_r(pt.q, k, pt.mu);
        auto inv1 = invert_r(t1, k, pt.mu, tol_inv);
        double e1 = (inv1.q_recovered - pt.q).l2() / pt.q.l2();
        // r -> q -> r, with a target that is not built from the forward map
        Field raw = random_smooth(g, cfg.initial.seed + 7919 * (i + 1), pt.q.l2() / std::sqrt(k), k, cfg.initial.decay);
        Field t2 = apply_multiplier(raw, mult::helmholtz_inv(k));
        auto inv2 = invert_r(t2, k, pt.mu, tol_inv);
        double e2 = sobolev_norm(forward_r(inv2.q_recovered, k, pt.mu) - t2, {2.0, k}) / sobolev_norm(t2, {2.0, k});
        // invert(shift t) = shift invert(t)
        double h = 0.137 * g.period;
        auto inv3 = invert_r(shift(t1, h), k, pt.mu, tol_inv);
        double e3 = (inv3.q_recovered - shift(inv1.q_recovered, h)).l2() / pt.q.l2();
        std::string p = pt.params();
        return std::vector<ResultRow>{check_le("invert-r", p, "round_trip_q", e1, tol_rt),
                                      check_le("invert-r", p, "round_trip_r", e2, tol_rt),
                                      check_le("invert-r", p, "equivariance", e3, tol_eq)};
    });
    std::vector<ResultRow> out;
    for (auto& r : rows) out.insert(out.end(), r.begin(), r.end());
    return out;
}

std::vector<ResultRow> run_equicontinuity(const ExperimentConfig& cfg) {
    std::vector<ResultRow> rows;
    json body;
    Field q = make_initial(cfg);
    const Mu mu = cfg.flow.mu;

    // profile of the configured datum, one plot file per kappa
    json profiles = json::array();
    for (double k : cfg.kappas) {
        if (k < 1.0) continue;
        auto prof = equicontinuity_profile(q, cfg.s, k);
        auto f = open_out(cfg, "profile_kappa_" + num(k) + ".dat");
        f << provenance_header(cfg) << "# N term\n";
        std::vector<double> ns, vs;
        for (auto& [nn, v] : prof.terms) {
            f << nn << " " << num(v) << "\n";
            ns.push_back(double(nn));
            vs.push_back(v);
        }
        profiles.push_back({{"kappa", k}, {"N", ns}, {"terms", vs}, {"total", prof.total}});
    }
    body["profiles"] = profiles;

    // rho2w and the two forms of w on the datum
    double worst_rho = 0.0, worst_w = 0.0;
    for (double k : cfg.kappas) {
        double lhs = alpha2_closed(q, k, mu) - 0.5 * alpha2_closed(q, k / 2, mu);
        double rhs = 2 * sgn(mu) / k * w_pairing(q, k);
        double scale = std::max({std::abs(lhs), std::abs(rhs), 1e-300});
        worst_rho = std::max(worst_rho, std::abs(lhs - rhs) / scale);
        for (int i = 0; i < cfg.geometry.n; ++i) {
            double xi = cfg.geometry.xi(i);
            double a = w_symbol(xi, k), b = w_symbol_difference(xi, k);
            worst_w = std::max(worst_w, std::abs(a - b));  // absolute: w is at most 1/12
        }
    }
    rows.push_back(check_le("equicontinuity", "kappas=" + join(cfg.kappas), "rho2w", worst_rho, cfg.tol("rho2w")));
    rows.push_back(check_le("equicontinuity", "kappas=" + join(cfg.kappas), "w_forms", worst_w, cfg.tol("w_forms")));

    // sandwich constants over a corpus, one parameter point per kappa
    auto corpus_q = random_corpus(cfg.geometry, cfg.initial.seed, cfg.samples, cfg.delta, 1.0, cfg.initial.decay);
    auto consts = parallel_map<SandwichConstants>(int(cfg.kappas.size()), cfg.jobs, [&](int i) {
        return sandwich_constants(corpus_q, cfg.s, cfg.kappas[i]);
    });
    std::vector<double> c1, c2;
    for (auto& c : consts) {
        c1.push_back(c.c1);
        c2.push_back(c.c2);
    }
    auto spread = [](const std::vector<double>& v) {
        // every value within the stated band of the smallest-kappa value
        double worst = 0.0;
        for (double x : v) worst = std::max(worst, std::abs(x / v.front() - 1.0));
        return worst;
    };
    body["sandwich"] = {{"kappas", cfg.kappas}, {"c1", c1}, {"c2", c2}};
    rows.push_back(check_le("equicontinuity", "kappas=" + join(cfg.kappas), "sandwich_c1_spread", spread(c1),
                            cfg.tol("sandwich_spread")));
    rows.push_back(check_le("equicontinuity", "kappas=" + join(cfg.kappas), "sandwich_c2_spread", spread(c2),
                            cfg.tol("sandwich_spread")));
    write_json(cfg, "equicontinuity.json", body);
    return rows;
}

std::vector<ResultRow> run_gauge_check(const ExperimentConfig& cfg) {
    if (cfg.geometry.kind != GeometryKind::circle)
        throw Error(ErrorKind::config, kMod, "gauge-check runs on circle data");
    Field q0 = make_initial(cfg);
    FlowSpec sr = cfg.flow;
    sr.kind = FlowKind::renorm_mkdv;
    sr.probe_kappas.clear();
    FlowSpec sm = sr;
    sm.kind = FlowKind::mkdv;
    auto ta = gauge_transform(evolve(q0, sr), sr.mu);
    auto tb = evolve(q0, sm);
    double worst = 0.0;
    auto f = open_out(cfg, "gauge.csv");
    f << provenance_header(cfg) << "time,l2_difference\n";
    for (size_t i = 0; i < ta.states.size(); ++i) {
        double d = (ta.states[i] - tb.states[i]).l2();
        worst = std::max(worst, d);
        f << num(ta.times[i]) << "," << num(d) << "\n";
    }
    return {check_le("gauge-check", "T=" + num(cfg.flow.t_final), "max_l2_difference", worst, cfg.tol("gauge"))};
}

int cli_main(int argc, char** argv) {
    CLI::App app{"cflow: spectral diagnostics and flows for mKdV-type equations"};
    app.require_subcommand(1);
    std::string config_path, out_dir;
    std::uint64_t seed = 0;
    int jobs = 1;
    double tol_scale = 1.0;
    auto add_flags = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "experiment config (INI)")->required();
        sub->add_option("--out", out_dir, "output directory (overrides [output] dir)");
        sub->add_option("--seed", seed, "seed for random initial data and corpora");
        sub->add_option("--jobs", jobs, "worker threads for independent parameter points")->check(CLI::PositiveNumber);
        sub->add_option("--tol-scale", tol_scale, "multiply every error tolerance")->check(CLI::PositiveNumber);
    };
    std::map<std::string, std::function<std::vector<ResultRow>(const ExperimentConfig&)>> runners{
        {"evolve", run_evolve},           {"verify", run_verify},
        {"sweep-kappa", run_sweep_kappa}, {"invert-r", run_invert_r},
        {"equicontinuity", run_equicontinuity}, {"gauge-check", run_gauge_check}};
    std::map<std::string, CLI::App*> subs;
    for (auto& [name, fn] : runners) add_flags(subs[name] = app.add_subcommand(name));

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    std::string name;
    for (auto& [n, s] : subs)
        if (s->parsed()) name = n;

    ExperimentConfig cfg;
    try {
        cfg = load_config(config_path);
        if (subs[name]->count("--seed")) cfg.initial.seed = seed;
        if (!out_dir.empty()) cfg.out_dir = out_dir;
        cfg.tol_scale *= tol_scale;
        cfg.jobs = jobs;
    } catch (const Error& e) {
        std::cerr << "error [" << e.module() << "/" << to_string(e.kind()) << "]: " << e.what() << "\n";
        return 2;
    }

    try {
        auto rows = runners[name](cfg);
        ensure_dir(cfg.out_dir);
        write_results_csv((std::filesystem::path(cfg.out_dir) / "results.csv").string(), cfg, rows);
        int failed = 0;
        for (auto& r : rows) {
            if (!r.pass) {
                ++failed;
                std::cout << "FAIL " << r.experiment << " " << r.params << " " << r.metric << " = " << num(r.value)
                          << " (tol " << num(r.tolerance) << ")\n";
            }
        }
        std::cout << name << ": " << rows.size() - failed << "/" << rows.size() << " checks passed\n";
        return failed ? 1 : 0;
    } catch (const Error& e) {
        std::cerr << "error [" << e.module() << "/" << to_string(e.kind()) << "]: " << e.what() << "\n";
        return e.kind() == ErrorKind::config ? 2 : 1;
    }
}

}  // namespace cflow
