#include "commands.hpp"

#include "fobs/error.hpp"
#include "fobs/sim.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <future>
#include <ostream>
#include <sstream>

namespace fobs::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// ---------------------------------------------------------------------------
// Formatting and small parsers

std::string num(double v, int digits = 6) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.*g", digits, v);
    return buf;
}

std::string matrix_text(const Eigen::MatrixXd& m) {
    std::string out = "[";
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        out += i ? "; " : "";
        for (Eigen::Index j = 0; j < m.cols(); ++j) out += (j ? " " : "") + num(m(i, j));
    }
    return out + "]";
}

std::vector<std::string> split(std::string_view s, char sep) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const auto at = s.find(sep, start);
        out.emplace_back(s.substr(start, at == std::string_view::npos ? std::string_view::npos : at - start));
        if (at == std::string_view::npos) break;
        start = at + 1;
    }
    return out;
}

double parse_double(const std::string& text, const std::string& what) {
    std::string t = text;
    t.erase(std::remove(t.begin(), t.end(), ' '), t.end());
    char* end = nullptr;
    const double v = std::strtod(t.c_str(), &end);
    if (t.empty() || end != t.c_str() + t.size() || !std::isfinite(v)) {
        throw ValidationError("malformed number '" + text + "' in " + what);
    }
    return v;
}

std::vector<double> parse_list(const std::string& text, const std::string& what) {
    std::vector<double> out;
    for (const auto& item : split(text, ',')) out.push_back(parse_double(item, what));
    return out;
}

json config_json(const RunConfig& cfg) {
    json j;
    j["command"] = cfg.command;
    j["samples"] = cfg.samples;
    j["seed"] = cfg.seed;
    j["m_max"] = cfg.m_max;
    j["v_max"] = cfg.v_max;
    j["dt"] = cfg.dt;
    j["t_final"] = cfg.t_final;
    j["init"] = cfg.init;
    j["allow_unstable"] = cfg.allow_unstable;
    if (cfg.builtin) j["builtin"] = *cfg.builtin;
    if (cfg.system_path) j["system"] = *cfg.system_path;
    if (cfg.linear_path) j["linear"] = *cfg.linear_path;
    if (cfg.psi_path) j["psi"] = *cfg.psi_path;
    if (cfg.observer_path) j["observer"] = *cfg.observer_path;
    if (!cfg.poles.empty()) j["poles"] = cfg.poles;
    if (!cfg.x0.empty()) j["x0"] = cfg.x0;
    if (!cfg.param_overrides.empty()) j["params"] = cfg.param_overrides;
    if (!cfg.box_overrides.empty()) j["box"] = cfg.box_overrides;
    return j;
}

void write_header(const RunConfig& cfg, std::ostream& os) {
    os << "# fobs " << cfg.command << " | samples=" << cfg.samples << " seed=" << cfg.seed << " m_max=" << cfg.m_max
       << " v_max=" << cfg.v_max << " dt=" << num(cfg.dt) << " t_final=" << num(cfg.t_final) << " init=" << cfg.init
       << '\n';
}

std::optional<fs::path> out_dir(const RunConfig& cfg) {
    if (!cfg.out) return std::nullopt;
    fs::path dir(*cfg.out);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw ValidationError("cannot create output directory '" + dir.string() + "': " + ec.message());
    return dir;
}

void write_file(const fs::path& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw ValidationError("cannot write '" + path.string() + "'");
    f << text;
}

// ---------------------------------------------------------------------------
// Inputs

struct Inputs {
    std::string label;
    std::optional<SystemDef> sys;
    std::optional<LinearSystemDef> lsys;
    std::optional<PsiRepresentation> default_psi;
};

LinearSystemDef builtin_double_integrator() {
    LinearSystemDef l;
    l.F = Eigen::MatrixXd{{0, 1}, {0, 0}};
    l.H = Eigen::MatrixXd{{1, 0}};
    l.q = Eigen::RowVectorXd{{0, 1}};
    return l;
}

void apply_overrides(const RunConfig& cfg, SystemDef& sys) {
    for (const auto& item : cfg.param_overrides) {
        const auto eq = item.find('=');
        if (eq == std::string::npos) throw ValidationError("--param expects name=value, got '" + item + "'");
        const std::string name = item.substr(0, eq);
        const auto it = sys.params.find(name);
        if (it == sys.params.end()) throw ValidationError("--param: unknown parameter '" + name + "'");
        it->second = parse_double(item.substr(eq + 1), "--param " + name);
    }
    for (const auto& item : cfg.box_overrides) {
        const auto eq = item.find('=');
        const auto colon = item.find(':', eq == std::string::npos ? 0 : eq);
        if (eq == std::string::npos || colon == std::string::npos) {
            throw ValidationError("--box expects name=lo:hi, got '" + item + "'");
        }
        const std::string name = item.substr(0, eq);
        if (std::find(sys.states.begin(), sys.states.end(), name) == sys.states.end()) {
            throw ValidationError("--box: unknown state '" + name + "'");
        }
        sys.box[name] = {parse_double(item.substr(eq + 1, colon - eq - 1), "--box " + name),
                         parse_double(item.substr(colon + 1), "--box " + name)};
    }
    validate(sys);
}

Inputs load_inputs(const RunConfig& cfg) {
    const int given = int(cfg.builtin.has_value()) + int(cfg.system_path.has_value()) + int(cfg.linear_path.has_value());
    if (given != 1) throw ValidationError("give exactly one of a system file, --builtin or --linear");
    Inputs in;
    if (cfg.builtin) {
        const std::string& b = *cfg.builtin;
        in.label = "builtin:" + b;
        if (b == "batch-reactor" || b == "batch") {
            in.sys = builtin_batch_reactor(1.0, 0.5, 0.3);
            in.default_psi = builtin_batch_reactor_psi();
        } else if (b == "cstr") {
            in.sys = builtin_cstr();
            in.default_psi = builtin_cstr_psi();
        } else if (b == "double-integrator" || b == "linear") {
            in.lsys = builtin_double_integrator();
        } else {
            throw ValidationError("unknown builtin '" + b + "' (batch-reactor, cstr, double-integrator)");
        }
    } else if (cfg.system_path) {
        in.label = *cfg.system_path;
        in.sys = load_system(*cfg.system_path);
    } else {
        in.label = *cfg.linear_path;
        in.lsys = load_linear_system(*cfg.linear_path);
    }
    if (in.sys) {
        apply_overrides(cfg, *in.sys);
    } else if (!cfg.param_overrides.empty() || !cfg.box_overrides.empty()) {
        throw ValidationError("--param and --box apply to nonlinear systems only");
    }
    return in;
}

PsiRepresentation resolve_psi(const RunConfig& cfg, const Inputs& in) {
    if (cfg.psi_path) return load_psi(*cfg.psi_path);
    if (in.default_psi) return *in.default_psi;
    throw ValidationError("--psi is required for this system");
}

std::vector<std::complex<double>> resolve_poles(const std::string& text) {
    if (text.empty()) throw ValidationError("--poles is required");
    return parse_poles(text);
}

std::vector<double> resolve_x0(const RunConfig& cfg, const Inputs& in) {
    if (!cfg.x0.empty()) {
        auto x0 = parse_list(cfg.x0, "--x0");
        const std::size_t n = in.sys ? in.sys->n() : static_cast<std::size_t>(in.lsys->n());
        if (x0.size() != n) throw ValidationError("--x0 needs " + std::to_string(n) + " entries");
        return x0;
    }
    if (in.sys) {
        std::vector<double> mid;
        for (const auto& s : in.sys->states) mid.push_back(0.5 * (in.sys->box.at(s).lo + in.sys->box.at(s).hi));
        return mid;
    }
    return std::vector<double>(static_cast<std::size_t>(in.lsys->n()), 1.0);
}

struct InitMode {
    enum Kind { Exact, Offset, Explicit } kind = Exact;
    double offset = 0.0;
    std::vector<double> values;
};

InitMode parse_init(const std::string& text) {
    InitMode m;
    if (text == "exact") return m;
    if (text.rfind("offset=", 0) == 0) {
        m.kind = InitMode::Offset;
        m.offset = parse_double(text.substr(7), "--init");
        return m;
    }
    if (text.rfind("explicit=", 0) == 0) {
        m.kind = InitMode::Explicit;
        m.values = parse_list(text.substr(9), "--init");
        return m;
    }
    throw ValidationError("--init must be exact, offset=<r> or explicit=<list>, got '" + text + "'");
}

// ---------------------------------------------------------------------------
// Observers

struct AnyObserver {
    std::optional<ObserverIO> io;
    std::optional<LinearObserver> lin;

    [[nodiscard]] const AlphaCoeffs& alphas() const { return io ? io->alphas : lin->alphas; }
    [[nodiscard]] int v() const { return io ? io->v : lin->v; }
};

json observer_summary(const AnyObserver& obs) {
    json j;
    j["kind"] = obs.io ? "nonlinear" : "linear";
    j["v"] = obs.v();
    j["alphas"] = obs.alphas().alpha;
    j["hurwitz"] = obs.alphas().hurwitz;
    double slowest = -INFINITY;
    for (const auto& r : polynomial_roots(obs.alphas().alpha)) slowest = std::max(slowest, r.real());
    j["slowest_pole_real_part"] = slowest;
    return j;
}

struct Synthesis {
    AnyObserver obs;
    json report;
    bool psi_ok = true;
};

Synthesis synthesize(const RunConfig& cfg, const Inputs& in, const std::string& poles_text) {
    Synthesis s;
    const auto poles = resolve_poles(poles_text);
    if (in.lsys) {
        const auto& l = *in.lsys;
        s.obs.lin = synthesize_linear(l, poles, cfg.v_max, cfg.allow_unstable);
        s.report["linear_functional_index"] = *linear_functional_index(l, cfg.v_max);
        s.report["stacked_residual"] = compute_M(l, s.obs.lin->v).residual;
        s.report["identity_residual"] = linear_identity_residual(l, *s.obs.lin);
        return s;
    }
    const SystemDef& sys = *in.sys;
    const PsiRepresentation rep = resolve_psi(cfg, in);
    validate(rep, sys);
    const auto pv = verify_psi(sys, rep, cfg.samples, cfg.seed, 1e-8);
    json per_k = json::array();
    for (const auto& r : pv.per_k) {
        per_k.push_back({{"k", r.k}, {"max_residual", r.report.max_residual}, {"pass", r.report.equivalent}});
    }
    s.report["psi_verification"] = {{"pass", pv.pass}, {"max_residual", pv.max_residual}, {"per_k", per_k}};
    s.psi_ok = pv.pass;
    if (!pv.pass) return s;
    s.obs.io = synthesize_nonlinear(rep, poles_to_alphas(poles), cfg.allow_unstable);
    const auto inv = verify_invariance(sys, *s.obs.io, cfg.samples, cfg.seed, 1e-8);
    s.report["invariance"] = {{"pass", inv.pass}, {"max_residual", inv.report.max_residual}};
    return s;
}

AnyObserver load_observer(const std::string& path, const Inputs& in) {
    const std::string text = read_text_file(path);
    AnyObserver obs;
    if (is_linear_observer_json(text)) {
        if (!in.lsys) throw ValidationError("a linear observer needs a linear system (--linear)");
        obs.lin = parse_linear_observer_json(text);
        if (obs.lin->B.cols() != in.lsys->p()) throw ValidationError("observer and system output counts differ");
    } else {
        if (!in.sys) throw ValidationError("a nonlinear observer needs a nonlinear system");
        obs.io = parse_observer_io_json(text);
    }
    return obs;
}

// ---------------------------------------------------------------------------
// Simulation

struct SimResult {
    SimTrace trace;
    std::vector<double> e_init;
    json summary;
};

SimResult run_simulation(const RunConfig& cfg, const Inputs& in, const AnyObserver& obs) {
    const auto x0 = resolve_x0(cfg, in);
    const InitMode init = parse_init(cfg.init);
    const int v = obs.v();
    SimResult r;
    if (obs.io) {
        ChainState chain0 = exact_chain_init(*in.sys, v, x0);
        if (init.kind == InitMode::Offset) chain0[0] += init.offset;
        if (init.kind == InitMode::Explicit) {
            if (init.values.size() != static_cast<std::size_t>(v)) {
                throw ValidationError("--init explicit needs " + std::to_string(v) + " chain values");
            }
            chain0 = init.values;
        }
        r.e_init = initial_error_derivatives(*in.sys, x0, chain0);
        r.trace = simulate_coupled(*in.sys, *obs.io, x0, chain0, cfg.t_final, cfg.dt);
    } else {
        Eigen::VectorXd xi0 = exact_linear_init(*in.lsys, *obs.lin, x0);
        if (init.kind == InitMode::Offset) xi0(v - 1) += init.offset;
        if (init.kind == InitMode::Explicit) {
            if (init.values.size() != static_cast<std::size_t>(v)) {
                throw ValidationError("--init explicit needs " + std::to_string(v) + " observer states");
            }
            xi0 = Eigen::Map<const Eigen::VectorXd>(init.values.data(), v);
        }
        const std::span<const double> xi{xi0.data(), static_cast<std::size_t>(v)};
        r.e_init = linear_initial_error_derivatives(*in.lsys, *obs.lin, x0, xi);
        r.trace = simulate_linear_observer(*in.lsys, *obs.lin, x0, xi, cfg.t_final, cfg.dt);
    }

    const SimTrace& tr = r.trace;
    double deviation = 0.0;
    double last_resolved = -1.0;
    for (std::size_t k = 0; k < tr.size(); ++k) {
        deviation = std::max(deviation, std::abs(tr.err[k] - exact_error_solution(obs.alphas(), r.e_init, tr.t[k])));
        if (std::abs(tr.err[k]) > 1e-9) last_resolved = tr.t[k];
    }
    json& s = r.summary;
    s["command"] = "simulate";
    s["config"] = config_json(cfg);
    s["observer"] = observer_summary(obs);
    s["x0"] = x0;
    s["initial_error"] = r.e_init;
    s["steps"] = tr.size();
    s["t_end"] = tr.t.empty() ? 0.0 : tr.t.back();
    s["event"] = tr.event ? json(tr.event_message) : json(nullptr);
    s["max_abs_error"] = tr.max_abs_error();
    s["max_deviation_from_exact_error"] = deviation;

    // Fit from 10% of the run to the last sample the error is still resolved.
    const double t_lo = 0.1 * s["t_end"].get<double>();
    s["fitted_decay_rate"] = nullptr;
    s["fit_window"] = nullptr;
    s["fit_note"] = nullptr;
    if (last_resolved - t_lo < 10 * cfg.dt) {
        s["fit_note"] = "error below 1e-9 over the fit window (estimate on the invariant manifold)";
    } else {
        try {
            s["fitted_decay_rate"] = error_decay_fit(tr, t_lo, last_resolved);
            s["fit_window"] = {t_lo, last_resolved};
        } catch (const ValidationError& e) {
            s["fit_note"] = e.what();
        }
    }
    return r;
}

void print_sim_summary(const json& s, std::ostream& os) {
    os << "simulated " << s["steps"].get<std::size_t>() << " steps to t=" << num(s["t_end"].get<double>()) << '\n';
    os << "initial error derivatives:";
    for (double e : s["initial_error"]) os << ' ' << num(e);
    os << '\n';
    os << "max |e|: " << num(s["max_abs_error"].get<double>()) << '\n';
    os << "max |e_sim - e_exact| (homogeneous error equation): "
       << num(s["max_deviation_from_exact_error"].get<double>()) << '\n';
    if (s["fitted_decay_rate"].is_number()) {
        char buf[64];
        std::snprintf(buf, sizeof buf, "%.4f", s["fitted_decay_rate"].get<double>());
        os << "fitted decay rate: " << buf << " (slowest assigned pole "
           << num(s["observer"]["slowest_pole_real_part"].get<double>()) << ")\n";
    } else {
        os << "fitted decay rate: n/a (" << s["fit_note"].get<std::string>() << ")\n";
    }
    if (s["event"].is_string()) os << "EVENT: " << s["event"].get<std::string>() << '\n';
}

// ---------------------------------------------------------------------------
// Analysis

json analyze_json(const RunConfig& cfg, const Inputs& in, std::ostream& os) {
    json j;
    j["command"] = "analyze";
    j["config"] = config_json(cfg);
    j["system"] = in.label;
    if (in.lsys) {
        const auto& l = *in.lsys;
        const int rank = numerical_rank(measurement_stack(l, static_cast<int>(l.n()) - 1));
        const auto v = linear_functional_index(l, cfg.v_max);
        j["linear"] = {{"n", l.n()}, {"p", l.p()}, {"observability_rank", rank},
                       {"functional_index", v ? json(*v) : json(nullptr)}};
        os << "linear system: n=" << l.n() << " p=" << l.p() << '\n';
        os << "observability matrix rank: " << rank << '/' << l.n() << '\n';
        os << "functional index (span of qF^k in the measurement stack): "
           << (v ? "v=" + std::to_string(*v) : "NOT FOUND up to v=" + std::to_string(cfg.v_max)) << '\n';
        j["summary"] = "state rank " + std::to_string(rank) + "/" + std::to_string(l.n()) + "; functional index " +
                       (v ? "v=" + std::to_string(*v) : "NOT FOUND");
        return j;
    }

    const SystemDef& sys = *in.sys;
    os << "states: ";
    for (std::size_t i = 0; i < sys.n(); ++i) os << (i ? ", " : "") << sys.states[i];
    os << " | outputs: ";
    for (std::size_t j2 = 0; j2 < sys.p(); ++j2) os << (j2 ? ", " : "") << sys.h[j2].to_string();
    os << " | functional: " << sys.q.to_string() << '\n';

    const auto idx = observability_index(sys, cfg.m_max, cfg.samples, cfg.seed);
    os << "state observability (Jacobian of the observability set has rank n):\n";
    os << "   m  max_rank  at_max  failed\n";
    json table = json::array();
    for (const auto& r : idx.table) {
        char line[96];
        std::snprintf(line, sizeof line, "  %2d  %4d/%-3zu  %6.2f  %6d\n", r.m, r.max_rank, sys.n(), r.fraction_at_max,
                      r.failed_samples);
        os << line;
        table.push_back({{"m", r.m}, {"max_rank", r.max_rank}, {"fraction_at_max", r.fraction_at_max},
                         {"failed_samples", r.failed_samples}, {"condition_met", r.condition_met}});
    }
    j["state_rank"] = table;
    j["observability_index"] = idx.index ? json(*idx.index) : json(nullptr);
    os << "observability index: "
       << (idx.index ? "m=" + std::to_string(*idx.index) : "NOT FOUND up to m=" + std::to_string(cfg.m_max)) << '\n';

    const auto cand = functional_index_candidate(sys, cfg.v_max, cfg.samples, cfg.seed);
    const int m_check = cand.candidate ? *cand.candidate + 1 : cfg.m_max;
    const auto frc = functional_rank_check(sys, m_check, cfg.samples, cfg.seed);
    os << "functional rank check at m=" << m_check << " (gradient of q adds no rank to the Jacobian): "
       << (frc.holds ? "holds" : "fails") << " at " << frc.agreeing_samples << '/' << cfg.samples << " samples\n";
    j["functional_rank_check"] = {{"m", m_check}, {"holds", frc.holds}, {"fraction_agreeing", frc.fraction_agreeing}};

    json levels = json::array();
    for (const auto& lvl : cand.levels) {
        json ks = json::array();
        for (const auto& k : lvl.per_k) ks.push_back({{"k", k.k}, {"fraction_in_span", k.fraction_in_span}, {"holds", k.holds}});
        levels.push_back({{"v", lvl.v}, {"holds", lvl.holds}, {"per_k", ks}});
    }
    j["functional_index_candidate"] = cand.candidate ? json(*cand.candidate) : json(nullptr);
    j["functional_index_levels"] = levels;
    os << "functional index candidate (necessary gradient-span screen; certify with a psi file): "
       << (cand.candidate ? "v=" + std::to_string(*cand.candidate) : "NOT FOUND up to v=" + std::to_string(cfg.v_max))
       << '\n';

    if (cfg.psi_path || in.default_psi) {
        const auto rep = resolve_psi(cfg, in);
        validate(rep, sys);
        const auto pv = verify_psi(sys, rep, cfg.samples, cfg.seed, 1e-8);
        os << "psi representation (v=" << rep.v << "): " << (pv.pass ? "verified" : "FAILED")
           << ", max residual " << num(pv.max_residual) << '\n';
        j["psi_verification"] = {{"v", rep.v}, {"pass", pv.pass}, {"max_residual", pv.max_residual}};
    }

    const int top = idx.table.empty() ? 0 : idx.table.back().max_rank;
    std::string summary = idx.index ? "locally state-observable with index m=" + std::to_string(*idx.index)
                                    : "state rank saturates at " + std::to_string(top) + "/" + std::to_string(sys.n());
    summary += cand.candidate ? "; functional index candidate v=" + std::to_string(*cand.candidate)
                              : "; functional index candidate NOT FOUND";
    j["summary"] = summary;
    return j;
}

} // namespace

void validate(const RunConfig& cfg) {
    if (cfg.samples < 1) throw ValidationError("--samples must be positive");
    if (cfg.m_max < 1) throw ValidationError("--m-max must be positive");
    if (cfg.v_max < 1) throw ValidationError("--v-max must be positive");
    if (!(cfg.dt > 0.0)) throw ValidationError("--dt must be positive");
    if (!(cfg.t_final >= cfg.dt)) throw ValidationError("--t-final must be at least dt");
    (void)parse_init(cfg.init);
}

int cmd_analyze(const RunConfig& cfg, std::ostream& os) {
    validate(cfg);
    const Inputs in = load_inputs(cfg);
    write_header(cfg, os);
    os << "system: " << in.label << '\n';
    const json j = analyze_json(cfg, in, os);
    os << "summary: " << j["summary"].get<std::string>() << '\n';
    if (const auto dir = out_dir(cfg)) write_file(*dir / "analysis.json", j.dump(2) + "\n");
    return kOk;
}

int cmd_synthesize(const RunConfig& cfg, std::ostream& os) {
    validate(cfg);
    const Inputs in = load_inputs(cfg);
    write_header(cfg, os);
    os << "system: " << in.label << " | poles: " << cfg.poles << '\n';
    Synthesis s = synthesize(cfg, in, cfg.poles);
    json report;
    report["command"] = "synthesize";
    report["config"] = config_json(cfg);
    report["checks"] = s.report;
    if (!s.psi_ok) {
        os << "psi verification FAILED:\n";
        for (const auto& k : s.report["psi_verification"]["per_k"]) {
            os << "  k=" << k["k"].get<int>() << " max residual " << num(k["max_residual"].get<double>()) << '\n';
        }
        if (const auto dir = out_dir(cfg)) write_file(*dir / "synthesis.json", report.dump(2) + "\n");
        return kInputError;
    }
    const std::string observer = s.obs.io ? observer_to_json(*s.obs.io) : observer_to_json(*s.obs.lin);
    report["observer"] = observer_summary(s.obs);
    if (s.obs.io) {
        os << "psi verified, max residual " << num(s.report["psi_verification"]["max_residual"].get<double>()) << '\n';
        os << "T = " << s.obs.io->T.to_string() << '\n';
        os << "invariance residual: " << num(s.report["invariance"]["max_residual"].get<double>()) << '\n';
    } else {
        const auto& l = *s.obs.lin;
        os << "functional index v=" << s.report["linear_functional_index"].get<int>() << ", observer order "
           << l.v << '\n';
        os << "stacked residual " << num(s.report["stacked_residual"].get<double>()) << ", identity residual "
           << num(s.report["identity_residual"].get<double>()) << '\n';
        os << "A = " << matrix_text(l.A) << "  B = " << matrix_text(l.B) << "  C = " << matrix_text(l.C)
           << "  D = " << matrix_text(l.D) << '\n';
    }
    if (!s.obs.alphas().hurwitz) os << "WARNING: error polynomial is not Hurwitz; the error will not converge\n";
    if (const auto dir = out_dir(cfg)) {
        write_file(*dir / "observer.json", observer + "\n");
        write_file(*dir / "synthesis.json", report.dump(2) + "\n");
        os << "wrote " << (*dir / "observer.json").string() << '\n';
    } else {
        os << observer << '\n';
    }
    return kOk;
}

int cmd_simulate(const RunConfig& cfg, std::ostream& os) {
    validate(cfg);
    const Inputs in = load_inputs(cfg);
    write_header(cfg, os);
    os << "system: " << in.label << '\n';
    AnyObserver obs;
    if (cfg.observer_path) {
        obs = load_observer(*cfg.observer_path, in);
        if (!obs.alphas().hurwitz && !cfg.allow_unstable) {
            throw UnstableError("observer error polynomial is not Hurwitz; pass --allow-unstable to simulate it");
        }
    } else {
        Synthesis s = synthesize(cfg, in, cfg.poles);
        if (!s.psi_ok) {
            os << "psi verification FAILED, max residual "
               << num(s.report["psi_verification"]["max_residual"].get<double>()) << '\n';
            return kInputError;
        }
        obs = std::move(s.obs);
    }
    const SimResult r = run_simulation(cfg, in, obs);
    print_sim_summary(r.summary, os);
    if (const auto dir = out_dir(cfg)) {
        std::ostringstream csv;
        write_csv(csv, r.trace);
        write_file(*dir / "trace.csv", csv.str());
        write_file(*dir / "summary.json", r.summary.dump(2) + "\n");
        os << "wrote " << (*dir / "trace.csv").string() << '\n';
    }
    return r.trace.event ? kDiverged : kOk;
}

int cmd_demo(const RunConfig& cfg, std::ostream& os) {
    RunConfig base = cfg;
    std::string x0;
    if (cfg.demo == "batch") {
        base.builtin = "batch-reactor";
        base.poles = "-2";
        x0 = "1,0.2,0";
    } else if (cfg.demo == "cstr") {
        base.builtin = "cstr";
        base.poles = "-1";
        x0 = "0.5,1.0,0.8";
    } else if (cfg.demo == "linear") {
        base.builtin = "double-integrator";
        base.poles = "-3";
        x0 = "0,1";
    } else {
        throw ValidationError("unknown demo '" + cfg.demo + "' (batch, cstr, linear)");
    }
    if (base.x0.empty()) base.x0 = x0;
    const std::string root = cfg.out.value_or("demo-" + cfg.demo);

    RunConfig step = base;
    step.command = "analyze";
    step.out = root;
    int rc = cmd_analyze(step, os);
    step.command = "synthesize";
    if (rc == kOk) rc = cmd_synthesize(step, os);

    // Estimate started at zero, then on the invariant manifold.
    for (const auto& [sub, init] : {std::pair{"estimate", "explicit=0"}, std::pair{"exact", "exact"}}) {
        if (rc != kOk) break;
        step.command = "simulate";
        step.init = cfg.init == "exact" || std::string(sub) == "exact" ? init : cfg.init;
        step.out = (fs::path(root) / sub).string();
        os << "\n";
        rc = cmd_simulate(step, os);
    }
    return rc;
}

int cmd_sweep(const RunConfig& cfg, std::ostream& os) {
    validate(cfg);
    const Inputs in = load_inputs(cfg);
    if (cfg.poles.empty()) throw ValidationError("--poles is required (pole sets separated by ';')");
    write_header(cfg, os);
    os << "system: " << in.label << '\n';
    const auto groups = split(cfg.poles, ';');

    struct Row {
        std::string poles;
        json summary;
        std::string error;
        int code = kOk;
    };
    std::vector<std::future<Row>> jobs;
    for (const auto& g : groups) {
        jobs.push_back(std::async(std::launch::async, [&cfg, &in, g] {
            Row row;
            row.poles = g;
            try {
                Synthesis s = synthesize(cfg, in, g);
                if (!s.psi_ok) throw ValidationError("psi verification failed");
                SimResult r = run_simulation(cfg, in, s.obs);
                row.summary = std::move(r.summary);
                if (r.trace.event) row.code = kDiverged;
            } catch (const UnstableError& e) {
                row.error = e.what();
                row.code = kRefusedUnstable;
            } catch (const Error& e) {
                row.error = e.what();
                row.code = kInputError;
            }
            return row;
        }));
    }
    json out = json::array();
    int rc = kOk;
    os << "  poles                 fitted_rate  slowest_pole  max|e_sim-e_exact|\n";
    for (auto& job : jobs) {
        Row row = job.get();
        rc = std::max(rc, row.code);
        char line[160];
        if (!row.error.empty()) {
            std::snprintf(line, sizeof line, "  %-20s  error: %s\n", row.poles.c_str(), row.error.c_str());
            out.push_back({{"poles", row.poles}, {"error", row.error}});
        } else {
            const json& s = row.summary;
            const std::string rate = s["fitted_decay_rate"].is_number() ? num(s["fitted_decay_rate"].get<double>()) : "n/a";
            std::snprintf(line, sizeof line, "  %-20s  %11s  %12s  %s\n", row.poles.c_str(), rate.c_str(),
                          num(s["observer"]["slowest_pole_real_part"].get<double>()).c_str(),
                          num(s["max_deviation_from_exact_error"].get<double>()).c_str());
            out.push_back({{"poles", row.poles}, {"summary", s}});
        }
        os << line;
    }
    if (const auto dir = out_dir(cfg)) {
        write_file(*dir / "sweep.json", json{{"command", "sweep"}, {"config", config_json(cfg)}, {"runs", out}}.dump(2) + "\n");
    }
    return rc;
}

} // namespace fobs::cli
