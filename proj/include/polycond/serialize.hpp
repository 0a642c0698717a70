#pragma once

// One JSON object per system:
//   {"n": 1, "degrees": [2], "polys": [[[[1,1],1.0]]]}
// polys[i] is a list of [exponents, coefficient] pairs; monomials that are
// not listed are zero. Doubles are written in shortest round-trip form, so
// write -> read is bit-exact. Collections are JSONL, one system per line.

#include <cmath>
#include <istream>
#include <ostream>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "poly_core.hpp"

namespace polycond {

class FormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline nlohmann::json to_json(const PolySystem& f) {
    nlohmann::json polys = nlohmann::json::array();
    for (int i = 0; i < f.n(); ++i) {
        const auto& p = f[static_cast<std::size_t>(i)];
        nlohmann::json terms = nlohmann::json::array();
        for (std::size_t t = 0; t < p.size(); ++t) {
            if (p.coeff(t) == 0.0 && !std::signbit(p.coeff(t))) continue;
            if (!std::isfinite(p.coeff(t))) throw FormatError("to_json: non-finite coefficient");
            terms.push_back(nlohmann::json::array({p.monomial(t).exponents, p.coeff(t)}));
        }
        polys.push_back(std::move(terms));
    }
    return nlohmann::json{{"n", f.n()}, {"degrees", f.degrees()}, {"polys", std::move(polys)}};
}

inline PolySystem system_from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw FormatError("system: expected a JSON object");
    for (const char* key : {"n", "degrees", "polys"})
        if (!j.contains(key)) throw FormatError(std::string("system: missing field '") + key + "'");
    if (!j["n"].is_number_integer()) throw FormatError("system: 'n' must be an integer");
    const int n = j["n"].get<int>();
    if (n < 1) throw FormatError("system: 'n' must be >= 1");
    if (!j["degrees"].is_array() || static_cast<int>(j["degrees"].size()) != n)
        throw FormatError("system: 'degrees' must list n integers");
    if (!j["polys"].is_array() || static_cast<int>(j["polys"].size()) != n)
        throw FormatError("system: 'polys' must list n polynomials");

    std::vector<HomogeneousPoly> polys;
    for (int i = 0; i < n; ++i) {
        const auto& dj = j["degrees"][static_cast<std::size_t>(i)];
        if (!dj.is_number_integer() || dj.get<int>() < 1) throw FormatError("system: degrees must be integers >= 1");
        const int d = dj.get<int>();
        HomogeneousPoly p(n + 1, d);
        std::set<std::size_t> seen;
        for (const auto& term : j["polys"][static_cast<std::size_t>(i)]) {
            if (!term.is_array() || term.size() != 2 || !term[0].is_array())
                throw FormatError("system: each term must be [exponents, coefficient]");
            if (!term[1].is_number()) throw FormatError("system: coefficient must be a finite number");
            MultiIndex mi;
            for (const auto& e : term[0]) {
                if (!e.is_number_integer() || e.get<int>() < 0) throw FormatError("system: exponents must be integers >= 0");
                mi.exponents.push_back(e.get<int>());
            }
            if (static_cast<int>(mi.size()) != n + 1) throw FormatError("system: exponent vector must have n+1 entries");
            if (mi.degree() != d)
                throw FormatError("system: exponent sum " + std::to_string(mi.degree()) + " does not match degree " +
                                  std::to_string(d));
            const double c = term[1].get<double>();
            if (!std::isfinite(c)) throw FormatError("system: coefficient must be a finite number");
            const auto t = p.index_of(mi);
            if (!seen.insert(t).second) throw FormatError("system: duplicate exponent vector");
            p.set_coeff(t, c);
        }
        polys.push_back(std::move(p));
    }
    return PolySystem(std::move(polys));
}

inline void write_jsonl(std::ostream& os, const PolySystem& f) { os << to_json(f).dump() << '\n'; }

/// Reads every non-blank line as one system. Line numbers are 1-based in errors.
inline std::vector<PolySystem> read_jsonl(std::istream& is) {
    std::vector<PolySystem> out;
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            out.push_back(system_from_json(nlohmann::json::parse(line)));
        } catch (const nlohmann::json::exception& e) {
            throw FormatError("line " + std::to_string(lineno) + ": " + e.what());
        } catch (const FormatError& e) {
            throw FormatError("line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    return out;
}

}  // namespace polycond
