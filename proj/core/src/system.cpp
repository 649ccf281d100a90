#include "fobs/system.hpp"

#include "fobs/error.hpp"

#include <json.hpp>

#include <cctype>
#include <cmath>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

namespace fobs {

using nlohmann::json;

namespace {

bool is_identifier(const std::string& s) {
    if (s.empty() || !(std::isalpha(static_cast<unsigned char>(s[0])) || s[0] == '_')) return false;
    for (char c : s) {
        if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_')) return false;
    }
    return true;
}

bool is_reserved(const std::string& s) { return s == "exp" || s == "ln" || s == "sin" || s == "cos"; }

void check_expr(const Expr& e, const std::string& where, const std::set<std::string>& known) {
    if (!e.w_variables().empty()) {
        throw ValidationError(where + ": measurement-derivative variable " + e.w_variables().begin()->name() +
                              " is not allowed in a system definition");
    }
    for (const auto& s : e.free_symbols()) {
        if (!known.contains(s)) throw ValidationError(where + ": unknown symbol '" + s + "'");
    }
}

Expr parse_field(const std::string& text, const std::string& where) {
    try {
        return parse(text);
    } catch (const ParseError& e) {
        throw ValidationError(where + ": " + e.what());
    }
}

} // namespace

Bindings SystemDef::bindings_at(std::span<const double> x) const {
    Bindings b = params;
    for (std::size_t i = 0; i < states.size() && i < x.size(); ++i) b[states[i]] = x[i];
    return b;
}

SlotLayout SystemDef::layout() const {
    SlotLayout layout;
    for (const auto& s : states) layout.add(s);
    for (const auto& [name, value] : params) layout.add(name);
    return layout;
}

void validate(const SystemDef& sys) {
    if (sys.states.empty()) throw ValidationError("system must have at least one state");
    if (sys.h.empty()) throw ValidationError("system must have at least one measured output");
    if (sys.f.size() != sys.states.size()) {
        throw ValidationError("f has " + std::to_string(sys.f.size()) + " entries, expected " +
                              std::to_string(sys.states.size()));
    }
    std::set<std::string> known;
    for (const auto& s : sys.states) {
        if (!is_identifier(s) || is_reserved(s) || parse_w_name(s)) throw ValidationError("invalid state name '" + s + "'");
        if (!known.insert(s).second) throw ValidationError("duplicate state name '" + s + "'");
    }
    for (const auto& [name, value] : sys.params) {
        if (!is_identifier(name) || is_reserved(name) || parse_w_name(name)) {
            throw ValidationError("invalid parameter name '" + name + "'");
        }
        if (!known.insert(name).second) throw ValidationError("parameter '" + name + "' clashes with a state name");
        if (!std::isfinite(value)) throw ValidationError("parameter '" + name + "' is not finite");
    }
    for (std::size_t i = 0; i < sys.f.size(); ++i) check_expr(sys.f[i], "f[" + std::to_string(i) + "]", known);
    for (std::size_t j = 0; j < sys.h.size(); ++j) check_expr(sys.h[j], "h[" + std::to_string(j) + "]", known);
    check_expr(sys.q, "q", known);
    for (const auto& s : sys.states) {
        auto it = sys.box.find(s);
        if (it == sys.box.end()) throw ValidationError("box is missing state '" + s + "'");
        const auto [lo, hi] = it->second;
        if (!std::isfinite(lo) || !std::isfinite(hi) || !(lo < hi)) {
            throw ValidationError("box interval for '" + s + "' must satisfy lo < hi");
        }
    }
    for (const auto& [name, iv] : sys.box) {
        if (std::find(sys.states.begin(), sys.states.end(), name) == sys.states.end()) {
            throw ValidationError("box names unknown state '" + name + "'");
        }
    }
}

SystemDef parse_system_json(std::string_view text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ValidationError(std::string("system file is not valid JSON: ") + e.what());
    }
    if (!doc.is_object()) throw ValidationError("system file must be a JSON object");
    for (const char* key : {"states", "params", "f", "h", "q", "box"}) {
        if (!doc.contains(key)) throw ValidationError(std::string("system file is missing key '") + key + "'");
    }
    for (const auto& [key, value] : doc.items()) {
        static const std::set<std::string> allowed{"states", "params", "f", "h", "q", "box"};
        if (!allowed.contains(key)) throw ValidationError("system file has unknown key '" + key + "'");
    }

    SystemDef sys;
    try {
        for (const auto& s : doc.at("states")) sys.states.push_back(s.get<std::string>());
        for (const auto& [name, value] : doc.at("params").items()) sys.params[name] = value.get<double>();
        std::size_t i = 0;
        for (const auto& s : doc.at("f")) sys.f.push_back(parse_field(s.get<std::string>(), "f[" + std::to_string(i++) + "]"));
        i = 0;
        for (const auto& s : doc.at("h")) sys.h.push_back(parse_field(s.get<std::string>(), "h[" + std::to_string(i++) + "]"));
        sys.q = parse_field(doc.at("q").get<std::string>(), "q");
        for (const auto& [name, value] : doc.at("box").items()) {
            if (!value.is_array() || value.size() != 2) throw ValidationError("box entry '" + name + "' must be [lo, hi]");
            sys.box[name] = Interval{value[0].get<double>(), value[1].get<double>()};
        }
    } catch (const json::exception& e) {
        throw ValidationError(std::string("system file schema violation: ") + e.what());
    }
    validate(sys);
    return sys;
}

std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

SystemDef load_system(const std::filesystem::path& path) { return parse_system_json(read_text_file(path)); }

std::string system_to_json(const SystemDef& sys) {
    json doc;
    doc["states"] = sys.states;
    doc["params"] = json::object();
    for (const auto& [name, value] : sys.params) doc["params"][name] = value;
    doc["f"] = json::array();
    for (const auto& e : sys.f) doc["f"].push_back(e.to_string());
    doc["h"] = json::array();
    for (const auto& e : sys.h) doc["h"].push_back(e.to_string());
    doc["q"] = sys.q.to_string();
    doc["box"] = json::object();
    for (const auto& [name, iv] : sys.box) doc["box"][name] = {iv.lo, iv.hi};
    return doc.dump(2);
}

SystemDef builtin_batch_reactor(double k1, double k2, double k3) {
    if (!(k1 > 0.0) || !(k2 > 0.0) || !(k3 > 0.0)) throw ValidationError("rate constants must be positive");
    SystemDef sys;
    sys.states = {"cA", "cB", "cC"};
    sys.params = {{"k1", k1}, {"k2", k2}, {"k3", k3}};
    sys.f = {parse("-k1*cA"), parse("k1*cA - k2*cB^2"), parse("k2*cB^2 - k3*cC")};
    sys.h = {parse("cB")};
    sys.q = parse("cA");
    sys.box = {{"cA", {0.05, 2.0}}, {"cB", {0.05, 2.0}}, {"cC", {0.05, 2.0}}};
    validate(sys);
    return sys;
}

SystemDef builtin_cstr(const CstrParams& c) {
    const double positive[] = {c.flow_over_volume,        c.feed_concentration, c.feed_temperature,
                               c.heat_of_reaction,        c.reactor_transfer,   c.jacket_flow_over_volume,
                               c.jacket_feed_temperature, c.jacket_transfer,    c.k0};
    for (double v : positive) {
        if (!(v > 0.0) || !std::isfinite(v)) throw ValidationError("CSTR constants must be positive");
    }
    if (!(c.activation >= 0.0) || !std::isfinite(c.activation)) {
        throw ValidationError("CSTR activation constant E/R must be nonnegative");
    }
    SystemDef sys;
    sys.states = {"cA", "theta", "thetaj"};
    sys.params = {{"FV", c.flow_over_volume},       {"cAin", c.feed_concentration},
                  {"thetain", c.feed_temperature},  {"J", c.heat_of_reaction},
                  {"UAV", c.reactor_transfer},      {"FjVj", c.jacket_flow_over_volume},
                  {"thetajin", c.jacket_feed_temperature}, {"UAj", c.jacket_transfer},
                  {"k0", c.k0},                     {"ER", c.activation}};
    sys.f = {
        parse("FV*(cAin - cA) - k0*exp(-ER/theta)*cA"),
        parse("FV*(thetain - theta) + J*k0*exp(-ER/theta)*cA - UAV*(theta - thetaj)"),
        parse("FjVj*(thetajin - thetaj) + UAj*(theta - thetaj)"),
    };
    sys.h = {parse("theta"), parse("thetaj")};
    sys.q = parse("cA");
    sys.box = c.box;
    validate(sys);
    return sys;
}

std::vector<std::vector<double>> sample_states(const SystemDef& sys, int n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::vector<std::vector<double>> points;
    points.reserve(static_cast<std::size_t>(std::max(n, 0)));
    for (int s = 0; s < n; ++s) {
        std::vector<double> x(sys.n());
        for (std::size_t i = 0; i < sys.n(); ++i) {
            const Interval iv = sys.box.at(sys.states[i]);
            std::uniform_real_distribution<double> dist(iv.lo, iv.hi);
            x[i] = dist(rng);
        }
        points.push_back(std::move(x));
    }
    return points;
}

PointEvaluator::PointEvaluator(const SystemDef& sys, std::span<const Expr> exprs) : n_states_(sys.n()) {
    const SlotLayout layout = sys.layout();
    compiled_.reserve(exprs.size());
    for (const auto& e : exprs) compiled_.emplace_back(e, layout);
    slots_.assign(layout.size(), 0.0);
    std::size_t k = n_states_;
    for (const auto& [name, value] : sys.params) slots_[k++] = value;
}

void PointEvaluator::evaluate(std::span<const double> x, std::span<double> out) const {
    std::vector<double> slots = slots_;
    std::copy(x.begin(), x.begin() + static_cast<std::ptrdiff_t>(n_states_), slots.begin());
    for (std::size_t i = 0; i < compiled_.size(); ++i) out[i] = compiled_[i](slots);
}

std::vector<double> PointEvaluator::operator()(std::span<const double> x) const {
    std::vector<double> out(compiled_.size());
    evaluate(x, out);
    return out;
}

// ---------------------------------------------------------------------------

void validate(const LinearSystemDef& lsys) {
    const auto n = lsys.F.rows();
    if (n < 1 || lsys.F.cols() != n) throw ValidationError("F must be a nonempty square matrix");
    if (lsys.H.rows() < 1 || lsys.H.cols() != n) throw ValidationError("H must be p x n with p >= 1");
    if (lsys.q.cols() != n) throw ValidationError("q must be 1 x n");
    if (!lsys.F.allFinite() || !lsys.H.allFinite() || !lsys.q.allFinite()) {
        throw ValidationError("linear system entries must be finite");
    }
}

namespace {

Eigen::MatrixXd read_matrix(const json& j, const char* key) {
    if (!j.is_array() || j.empty()) throw ValidationError(std::string("'") + key + "' must be a nonempty array");
    if (!j[0].is_array()) {
        Eigen::MatrixXd m(1, static_cast<Eigen::Index>(j.size()));
        for (std::size_t c = 0; c < j.size(); ++c) m(0, static_cast<Eigen::Index>(c)) = j[c].get<double>();
        return m;
    }
    const auto rows = j.size();
    const auto cols = j[0].size();
    Eigen::MatrixXd m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (std::size_t r = 0; r < rows; ++r) {
        if (!j[r].is_array() || j[r].size() != cols) throw ValidationError(std::string("'") + key + "' rows differ in length");
        for (std::size_t c = 0; c < cols; ++c) {
            m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = j[r][c].get<double>();
        }
    }
    return m;
}

json write_matrix(const Eigen::MatrixXd& m) {
    json rows = json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        json row = json::array();
        for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
        rows.push_back(row);
    }
    return rows;
}

} // namespace

LinearSystemDef parse_linear_system_json(std::string_view text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ValidationError(std::string("linear system file is not valid JSON: ") + e.what());
    }
    if (!doc.is_object()) throw ValidationError("linear system file must be a JSON object");
    LinearSystemDef lsys;
    try {
        for (const char* key : {"F", "H", "q"}) {
            if (!doc.contains(key)) throw ValidationError(std::string("linear system file is missing key '") + key + "'");
        }
        lsys.F = read_matrix(doc.at("F"), "F");
        lsys.H = read_matrix(doc.at("H"), "H");
        const Eigen::MatrixXd q = read_matrix(doc.at("q"), "q");
        if (q.rows() != 1) throw ValidationError("q must be a single row");
        lsys.q = q.row(0);
    } catch (const json::exception& e) {
        throw ValidationError(std::string("linear system schema violation: ") + e.what());
    }
    validate(lsys);
    return lsys;
}

LinearSystemDef load_linear_system(const std::filesystem::path& path) {
    return parse_linear_system_json(read_text_file(path));
}

std::string linear_system_to_json(const LinearSystemDef& lsys) {
    json doc;
    doc["F"] = write_matrix(lsys.F);
    doc["H"] = write_matrix(lsys.H);
    doc["q"] = write_matrix(lsys.q);
    return doc.dump(2);
}

} // namespace fobs

namespace fobs {

namespace {

Expr linear_form(const Eigen::RowVectorXd& row) {
    std::vector<Expr> terms;
    for (Eigen::Index i = 0; i < row.size(); ++i) {
        if (row(i) == 0.0) continue;
        terms.push_back(Expr::constant(Number::from_double(row(i))) * Expr::symbol("x" + std::to_string(i + 1)));
    }
    return simplify(Expr::sum(std::move(terms)));
}

} // namespace

SystemDef as_system(const LinearSystemDef& lsys, double box_half_width) {
    validate(lsys);
    if (!(box_half_width > 0.0)) throw ValidationError("box half-width must be positive");
    SystemDef sys;
    for (Eigen::Index i = 0; i < lsys.n(); ++i) {
        sys.states.push_back("x" + std::to_string(i + 1));
        sys.f.push_back(linear_form(lsys.F.row(i)));
        sys.box[sys.states.back()] = {-box_half_width, box_half_width};
    }
    for (Eigen::Index j = 0; j < lsys.p(); ++j) sys.h.push_back(linear_form(lsys.H.row(j)));
    sys.q = linear_form(lsys.q);
    return sys;
}

} // namespace fobs
