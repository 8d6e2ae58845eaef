#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "abelfn/integrable.hpp"
#include "abelfn/linalg.hpp"
#include "abelfn/restriction.hpp"

namespace abelfn {

using json = nlohmann::json;

// complex matrices: {"rows": r, "cols": c, "data": [[re, im], ...]} row-major;
// integer matrices use a plain integer array; rationals are [num, den] pairs.

inline json to_json(const ComplexMatrix& m) {
    json data = json::array();
    for (const cplx& z : m.data) data.push_back({z.real(), z.imag()});
    return {{"rows", m.rows}, {"cols", m.cols}, {"data", data}};
}

inline ComplexMatrix complex_matrix_from_json(const json& j) {
    ComplexMatrix m(j.at("rows").get<std::size_t>(), j.at("cols").get<std::size_t>());
    const json& data = j.at("data");
    if (data.size() != m.rows * m.cols) throw Error(errc::bad_input, "matrix data length");
    for (std::size_t i = 0; i < m.data.size(); ++i)
        m.data[i] = cplx(data[i].at(0).get<double>(), data[i].at(1).get<double>());
    return m;
}

inline json to_json(const IntMatrix& m) {
    json data = json::array();
    for (std::int64_t v : m.data) data.push_back(v);
    return {{"rows", m.rows}, {"cols", m.cols}, {"data", data}};
}

inline IntMatrix int_matrix_from_json(const json& j) {
    IntMatrix m(j.at("rows").get<std::size_t>(), j.at("cols").get<std::size_t>());
    const json& data = j.at("data");
    if (data.size() != m.rows * m.cols) throw Error(errc::bad_input, "matrix data length");
    for (std::size_t i = 0; i < m.data.size(); ++i) m.data[i] = data[i].get<std::int64_t>();
    return m;
}

inline json to_json(const RationalMatrix& m) {
    json data = json::array();
    for (const Rational& r : m.data) data.push_back({r.num, r.den});
    return {{"rows", m.rows}, {"cols", m.cols}, {"data", data}};
}

inline RationalMatrix rational_matrix_from_json(const json& j) {
    RationalMatrix m(j.at("rows").get<std::size_t>(), j.at("cols").get<std::size_t>());
    const json& data = j.at("data");
    if (data.size() != m.rows * m.cols) throw Error(errc::bad_input, "matrix data length");
    for (std::size_t i = 0; i < m.data.size(); ++i)
        m.data[i] = Rational(data[i].at(0).get<std::int64_t>(), data[i].at(1).get<std::int64_t>());
    return m;
}

inline json to_json(const std::vector<cplx>& v) {
    json a = json::array();
    for (const cplx& z : v) a.push_back({z.real(), z.imag()});
    return a;
}

inline std::vector<cplx> complex_vector_from_json(const json& j) {
    std::vector<cplx> v(j.size());
    for (std::size_t i = 0; i < v.size(); ++i)
        v[i] = cplx(j[i].at(0).get<double>(), j[i].at(1).get<double>());
    return v;
}

// ---------------------------------------------------------------------------
// instance files

inline json to_json(const GeneratedInstance& inst) {
    json j;
    j["kind"] = inst.kind == InstanceKind::prym ? "prym" : "generic";
    j["seed"] = inst.seed;
    j["g"] = inst.g;
    j["n"] = inst.n;
    j["big_omega"] = to_json(inst.emb.big_omega.omega);
    j["phi"] = to_json(inst.emb.phi);
    j["p"] = to_json(inst.emb.p);
    j["delta"] = to_json(inst.emb.delta);
    return j;
}

struct LoadedInstance {
    GeneratedInstance inst;
    std::vector<std::string> violations;  // audit-mode findings
};

inline LoadedInstance instance_from_json(const json& j, bool strict) {
    LoadedInstance out;
    std::string kind = j.at("kind").get<std::string>();
    out.inst.kind = kind == "prym" ? InstanceKind::prym : InstanceKind::generic;
    out.inst.seed = j.value("seed", std::uint64_t{0});
    out.inst.g = j.value("g", std::size_t{0});
    out.inst.n = j.value("n", std::size_t{0});
    ComplexMatrix big = complex_matrix_from_json(j.at("big_omega"));
    RationalMatrix phi = rational_matrix_from_json(j.at("phi"));
    IntMatrix p = int_matrix_from_json(j.at("p"));
    IntMatrix delta = int_matrix_from_json(j.at("delta"));
    if (strict) {
        out.inst.emb = build_embedding(big, phi, p, delta);
    } else {
        EmbeddingAudit audit = build_embedding_audit(big, phi, p, delta);
        out.inst.emb = std::move(audit.data);
        out.violations = std::move(audit.violations);
    }
    return out;
}

inline json to_json(const CoeffVector& cv) {
    json coeffs = json::array();
    for (const CoeffEntry& e : cv.coeffs) {
        json eps = json::array();
        for (std::int64_t v : e.eps) eps.push_back(v);
        coeffs.push_back({eps, {e.value.real(), e.value.imag(), e.tail_bound}});
    }
    return {{"delta", to_json(cv.delta)},
            {"gamma", to_json(cv.gamma)},
            {"small_gamma", to_json(cv.small_gamma)},
            {"tol", cv.tol},
            {"coeffs", coeffs}};
}

// ---------------------------------------------------------------------------
// flow data

inline json to_json(const FlowData& fd) {
    json us = json::array();
    for (const auto& u : fd.u_vecs) us.push_back(to_json(u));
    json j;
    j["g"] = fd.prym.g;
    j["n"] = fd.prym.n;
    j["big_omega"] = to_json(fd.prym.emb.big_omega.omega);
    j["u_vecs"] = us;
    j["gamma"] = to_json(fd.gamma);
    j["times"] = fd.times;
    return j;
}

inline FlowData flow_data_from_json(const json& j) {
    FlowData fd;
    std::size_t g = j.at("g").get<std::size_t>();
    std::size_t n = j.at("n").get<std::size_t>();
    fd.prym = make_prym_spec(g, n, complex_matrix_from_json(j.at("big_omega")));
    for (const json& u : j.at("u_vecs")) fd.u_vecs.push_back(complex_vector_from_json(u));
    fd.gamma = complex_vector_from_json(j.at("gamma"));
    fd.times = j.at("times").get<std::vector<double>>();
    fd.validate();
    return fd;
}

}  // namespace abelfn
