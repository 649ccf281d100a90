#include "fobs/synthesis.hpp"

#include "fobs/error.hpp"

#include <Eigen/Eigenvalues>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdlib>

namespace fobs {

using nlohmann::json;

Eigen::MatrixXd companion_matrix(const std::vector<double>& alpha) {
    const auto v = static_cast<Eigen::Index>(alpha.size());
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(v, v);
    for (Eigen::Index i = 0; i + 1 < v; ++i) A(i, i + 1) = 1.0;
    for (Eigen::Index k = 0; k < v; ++k) A(v - 1, k) = -alpha[static_cast<std::size_t>(v - 1 - k)];
    return A;
}

std::vector<std::complex<double>> polynomial_roots(const std::vector<double>& alpha) {
    if (alpha.empty()) return {};
    const Eigen::EigenSolver<Eigen::MatrixXd> es(companion_matrix(alpha), false);
    const auto& ev = es.eigenvalues();
    return {ev.data(), ev.data() + ev.size()};
}

AlphaCoeffs alphas_from_coefficients(std::vector<double> alpha) {
    if (alpha.empty()) throw ValidationError("error polynomial must have order >= 1");
    for (double a : alpha) {
        if (!std::isfinite(a)) throw ValidationError("error polynomial coefficients must be finite");
    }
    AlphaCoeffs out;
    out.alpha = std::move(alpha);
    const auto roots = polynomial_roots(out.alpha);
    out.hurwitz = std::all_of(roots.begin(), roots.end(), [](const std::complex<double>& r) { return r.real() < 0.0; });
    return out;
}

AlphaCoeffs poles_to_alphas(const std::vector<std::complex<double>>& poles) {
    if (poles.empty()) throw ValidationError("at least one pole is required");
    std::vector<bool> used(poles.size(), false);
    for (std::size_t i = 0; i < poles.size(); ++i) {
        if (used[i]) continue;
        const auto& p = poles[i];
        const double tol = 1e-9 * (1.0 + std::abs(p));
        if (std::abs(p.imag()) <= tol) {
            used[i] = true;
            continue;
        }
        bool matched = false;
        for (std::size_t j = i + 1; j < poles.size(); ++j) {
            if (!used[j] && std::abs(poles[j] - std::conj(p)) <= tol) {
                used[i] = used[j] = true;
                matched = true;
                break;
            }
        }
        if (!matched) throw ValidationError("pole set is not closed under complex conjugation");
    }

    std::vector<std::complex<double>> c{1.0};
    for (const auto& p : poles) {
        std::vector<std::complex<double>> next(c.size() + 1, 0.0);
        for (std::size_t k = 0; k < c.size(); ++k) {
            next[k] += c[k];
            next[k + 1] -= p * c[k];
        }
        c = std::move(next);
    }
    std::vector<double> alpha;
    for (std::size_t k = 1; k < c.size(); ++k) alpha.push_back(c[k].real());
    return alphas_from_coefficients(std::move(alpha));
}

namespace {

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t");
    return std::string(s.substr(b, e - b + 1));
}

double parse_real(const std::string& s, const std::string& token) {
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (s.empty() || end != s.c_str() + s.size()) throw ValidationError("malformed pole '" + token + "'");
    return v;
}

std::complex<double> parse_pole(const std::string& token) {
    std::string s;
    for (char c : token) {
        if (c != ' ') s += c;
    }
    if (s.empty()) throw ValidationError("empty pole");
    if (s.back() != 'i' && s.back() != 'j') return {parse_real(s, token), 0.0};
    s.pop_back();
    std::size_t split = std::string::npos;
    for (std::size_t k = s.size(); k-- > 1;) {
        if ((s[k] == '+' || s[k] == '-') && s[k - 1] != 'e' && s[k - 1] != 'E') {
            split = k;
            break;
        }
    }
    const std::string re = split == std::string::npos ? "" : s.substr(0, split);
    std::string im = split == std::string::npos ? s : s.substr(split);
    if (im.empty() || im == "+") im = "1";
    if (im == "-") im = "-1";
    return {re.empty() ? 0.0 : parse_real(re, token), parse_real(im, token)};
}

} // namespace

std::vector<std::complex<double>> parse_poles(std::string_view text) {
    std::vector<std::complex<double>> poles;
    std::size_t start = 0;
    while (start <= text.size()) {
        const auto comma = text.find(',', start);
        const auto token = trim(text.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
        poles.push_back(parse_pole(token));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return poles;
}

ObserverIO synthesize_nonlinear(const PsiRepresentation& rep, const AlphaCoeffs& alphas, bool allow_unstable) {
    if (rep.v < 1 || rep.psi.size() != static_cast<std::size_t>(rep.v) + 1) {
        throw ValidationError("psi representation must hold v+1 functions with v >= 1");
    }
    if (alphas.order() != rep.v) {
        throw ValidationError("error polynomial order " + std::to_string(alphas.order()) +
                              " does not match psi order v=" + std::to_string(rep.v));
    }
    if (!alphas.hurwitz && !allow_unstable) {
        throw UnstableError("error polynomial is not Hurwitz; the estimation error would not converge");
    }
    std::vector<Expr> terms;
    for (int k = 0; k <= rep.v; ++k) {
        const double a = alphas.at(k);
        if (a == 0.0) continue;
        terms.push_back(Expr::constant(Number::from_double(a)) * rep.psi[static_cast<std::size_t>(rep.v - k)]);
    }
    ObserverIO obs;
    obs.v = rep.v;
    obs.alphas = alphas;
    obs.T = simplify(Expr::sum(std::move(terms)));
    obs.psi = rep;
    return obs;
}

InvarianceReport verify_invariance(const SystemDef& sys, const ObserverIO& obs, int n_samples, std::uint64_t seed,
                                   double rtol) {
    if (obs.T.max_w_order() > obs.v) throw ValidationError("observer right-hand side uses derivatives beyond v");
    for (const auto& w : obs.T.w_variables()) {
        if (static_cast<std::size_t>(w.output) > sys.p()) throw ValidationError(w.name() + " refers to a missing output");
    }
    const QDerivatives qd = q_derivatives(sys, obs.v);
    std::vector<Expr> terms;
    for (int k = 0; k <= obs.v; ++k) {
        terms.push_back(Expr::constant(Number::from_double(obs.alphas.at(k))) * qd.q[static_cast<std::size_t>(obs.v - k)]);
    }
    const Expr lhs = simplify(Expr::sum(std::move(terms)));
    const Expr rhs = substitute_measurements(sys, obs.T);
    InvarianceReport r;
    r.report = equivalent_numeric(lhs, rhs, sys.box, n_samples, seed, rtol, sys.params);
    r.pass = r.report.equivalent;
    return r;
}

// ---------------------------------------------------------------------------
// JSON

namespace {

json matrix_json(const Eigen::MatrixXd& m) {
    json rows = json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        json row = json::array();
        for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
        rows.push_back(std::move(row));
    }
    return rows;
}

Eigen::MatrixXd matrix_from(const json& j) {
    if (!j.is_array()) throw ValidationError("expected a matrix");
    if (j.empty()) return Eigen::MatrixXd(0, 0);
    const auto cols = j[0].size();
    Eigen::MatrixXd m(static_cast<Eigen::Index>(j.size()), static_cast<Eigen::Index>(cols));
    for (std::size_t r = 0; r < j.size(); ++r) {
        if (j[r].size() != cols) throw ValidationError("matrix rows differ in length");
        for (std::size_t c = 0; c < cols; ++c) m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = j[r][c].get<double>();
    }
    return m;
}

json parse_doc(std::string_view text) {
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        throw ValidationError(std::string("observer file is not valid JSON: ") + e.what());
    }
}

} // namespace

std::string observer_to_json(const ObserverIO& obs) {
    json doc;
    doc["kind"] = "nonlinear";
    doc["v"] = obs.v;
    doc["alphas"] = obs.alphas.alpha;
    doc["hurwitz"] = obs.alphas.hurwitz;
    doc["T"] = obs.T.to_string();
    doc["psi"] = json::array();
    for (const auto& e : obs.psi.psi) doc["psi"].push_back(e.to_string());
    return doc.dump(2);
}

std::string observer_to_json(const LinearObserver& obs) {
    json doc;
    doc["kind"] = "linear";
    doc["v"] = obs.v;
    doc["alphas"] = obs.alphas.alpha;
    doc["hurwitz"] = obs.alphas.hurwitz;
    json betas = json::array();
    for (const auto& b : obs.betas) betas.push_back(matrix_json(b)[0]);
    doc["betas"] = betas;
    doc["M"] = matrix_json(obs.M);
    doc["A"] = matrix_json(obs.A);
    doc["B"] = matrix_json(obs.B);
    doc["C"] = matrix_json(obs.C)[0];
    doc["D"] = matrix_json(obs.D)[0];
    return doc.dump(2);
}

bool is_linear_observer_json(std::string_view text) {
    const json doc = parse_doc(text);
    return doc.is_object() && doc.contains("A");
}

ObserverIO parse_observer_io_json(std::string_view text) {
    const json doc = parse_doc(text);
    ObserverIO obs;
    try {
        obs.v = doc.at("v").get<int>();
        obs.alphas = alphas_from_coefficients(doc.at("alphas").get<std::vector<double>>());
        obs.T = parse(doc.at("T").get<std::string>());
        if (doc.contains("psi")) {
            obs.psi.v = obs.v;
            for (const auto& s : doc.at("psi")) obs.psi.psi.push_back(parse(s.get<std::string>()));
        }
    } catch (const json::exception& e) {
        throw ValidationError(std::string("observer file schema violation: ") + e.what());
    } catch (const ParseError& e) {
        throw ValidationError(std::string("observer file expression: ") + e.what());
    }
    if (obs.alphas.order() != obs.v) throw ValidationError("observer file: alphas length differs from v");
    return obs;
}

LinearObserver parse_linear_observer_json(std::string_view text) {
    const json doc = parse_doc(text);
    LinearObserver obs;
    try {
        obs.v = doc.at("v").get<int>();
        obs.alphas = alphas_from_coefficients(doc.at("alphas").get<std::vector<double>>());
        for (const auto& b : doc.at("betas")) {
            const auto row = b.get<std::vector<double>>();
            obs.betas.push_back(Eigen::Map<const Eigen::RowVectorXd>(row.data(), static_cast<Eigen::Index>(row.size())));
        }
        if (doc.contains("M")) obs.M = matrix_from(doc.at("M"));
        obs.A = matrix_from(doc.at("A"));
        obs.B = matrix_from(doc.at("B"));
        const auto c = doc.at("C").get<std::vector<double>>();
        const auto d = doc.at("D").get<std::vector<double>>();
        obs.C = Eigen::Map<const Eigen::RowVectorXd>(c.data(), static_cast<Eigen::Index>(c.size()));
        obs.D = Eigen::Map<const Eigen::RowVectorXd>(d.data(), static_cast<Eigen::Index>(d.size()));
    } catch (const json::exception& e) {
        throw ValidationError(std::string("observer file schema violation: ") + e.what());
    }
    const auto v = static_cast<Eigen::Index>(obs.v);
    if (obs.A.rows() != v || obs.A.cols() != v || obs.B.rows() != v || obs.C.size() != v ||
        obs.B.cols() != obs.D.size()) {
        throw ValidationError("observer file: inconsistent A, B, C, D dimensions");
    }
    return obs;
}

} // namespace fobs
