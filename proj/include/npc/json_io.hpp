#pragma once

// JSON forms of points, representations, boundary data and weighted clouds.
//
// point     {"space": "spd:2", "payload": [...]}
//           euc:D [x1..xD]; hyp [x, y]; spd:N row-major entries, [re, im] pairs when complex; pod:K [ray, radius]
// rep       {"space": "...", "generators": {"A": {...}}, "relations": ["A*B*A^-1*B^-1"]}
//           generator objects: {"matrix": rows} (spd), {"mobius": rows} (hyp),
//           {"orthogonal": rows, "translation": [...]} (euc), {"permutation": [...]} (pod)
// boundary  {"space": "...", "values": {"0": payload, ...}}
// cloud     {"space": "...", "points": [payload, ...], "weights": [...]}

#include <cctype>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "npc/barycenter.hpp"
#include "npc/domain.hpp"
#include "npc/errors.hpp"
#include "npc/target_spaces.hpp"

namespace npc {

using Json = nlohmann::ordered_json;

inline constexpr const char* kReportSchema = "report_v1";

namespace detail {

inline double json_real(const Json& j, const char* what)
{
    if (!j.is_number())
        throw UsageError(std::string("expected a number in ") + what);
    return j.get<double>();
}

inline cplx json_complex(const Json& j, const char* what)
{
    if (j.is_array() && j.size() == 2)
        return {json_real(j[0], what), json_real(j[1], what)};
    return json_real(j, what);
}

inline CMat json_matrix(const Json& rows, const char* what)
{
    if (!rows.is_array() || rows.empty() || !rows[0].is_array())
        throw UsageError(std::string("expected a nested row array in ") + what);
    const auto r = static_cast<int>(rows.size()), c = static_cast<int>(rows[0].size());
    CMat m(r, c);
    for (int i = 0; i < r; ++i) {
        if (!rows[i].is_array() || static_cast<int>(rows[i].size()) != c)
            throw UsageError(std::string("ragged matrix in ") + what);
        for (int j = 0; j < c; ++j)
            m(i, j) = json_complex(rows[i][j], what);
    }
    return m;
}

inline Json complex_json(cplx z, bool complex)
{
    if (!complex)
        return z.real();
    return Json::array({z.real(), z.imag()});
}

inline Json matrix_json(const CMat& m, bool complex)
{
    Json rows = Json::array();
    for (int i = 0; i < m.rows(); ++i) {
        Json row = Json::array();
        for (int j = 0; j < m.cols(); ++j)
            row.push_back(complex_json(m(i, j), complex));
        rows.push_back(row);
    }
    return rows;
}

inline Json read_json_file(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw UsageError("cannot open " + path);
    try {
        return Json::parse(in);
    } catch (const Json::parse_error& e) {
        throw UsageError(path + ": " + e.what());
    }
}

inline NpcSpace json_space(const Json& j)
{
    if (!j.is_object() || !j.contains("space") || !j["space"].is_string())
        throw UsageError("JSON document needs a \"space\" string");
    return NpcSpace::parse(j["space"].get<std::string>());
}

} // namespace detail

inline Json payload_json(const NpcSpace& s, const PointRep& p)
{
    validate_point(s, p);
    switch (s.kind) {
    case SpaceKind::euclidean: {
        Json a = Json::array();
        for (double x : std::get<Vec>(p))
            a.push_back(x);
        return a;
    }
    case SpaceKind::hyperbolic_plane: {
        const auto& h = std::get<HalfPlanePoint>(p);
        return Json::array({h.x, h.y});
    }
    case SpaceKind::spd: {
        const auto& m = std::get<CMat>(p);
        Json a = Json::array();
        for (int i = 0; i < m.rows(); ++i)
            for (int j = 0; j < m.cols(); ++j)
                a.push_back(detail::complex_json(m(i, j), s.complex));
        return a;
    }
    case SpaceKind::pod: {
        const auto& q = std::get<PodPoint>(p);
        return Json::array({q.ray, q.radius});
    }
    }
    return {};
}

inline Json point_json(const NpcSpace& s, const PointRep& p)
{
    Json j;
    j["space"] = s.spec();
    j["payload"] = payload_json(s, p);
    return j;
}

inline PointRep point_from_payload(const NpcSpace& s, const Json& a)
{
    if (!a.is_array())
        throw UsageError("point payload must be an array");
    auto want = [&](std::size_t n) {
        if (a.size() != n)
            throw UsageError("point payload for " + s.spec() + " needs " + std::to_string(n) + " entries");
    };
    PointRep p;
    switch (s.kind) {
    case SpaceKind::euclidean: {
        want(static_cast<std::size_t>(s.dim));
        Vec v(s.dim);
        for (int i = 0; i < s.dim; ++i)
            v(i) = detail::json_real(a[i], "point payload");
        p = v;
        break;
    }
    case SpaceKind::hyperbolic_plane:
        want(2);
        p = HalfPlanePoint{detail::json_real(a[0], "point payload"), detail::json_real(a[1], "point payload")};
        break;
    case SpaceKind::spd: {
        want(static_cast<std::size_t>(s.n * s.n));
        CMat m(s.n, s.n);
        for (int i = 0; i < s.n; ++i)
            for (int j = 0; j < s.n; ++j)
                m(i, j) = detail::json_complex(a[i * s.n + j], "point payload");
        p = make_spd_point(m);
        break;
    }
    case SpaceKind::pod:
        want(2);
        if (!a[0].is_number_integer())
            throw UsageError("pod ray index must be an integer");
        p = make_pod_point(a[0].get<int>(), detail::json_real(a[1], "point payload"));
        break;
    }
    validate_point(s, p);
    return p;
}

/// Accepts a full point object (whose space must match) or a bare payload.
inline PointRep point_from_json(const NpcSpace& s, const Json& j)
{
    if (j.is_object()) {
        if (!(detail::json_space(j) == s))
            throw UsageError("point space " + j["space"].get<std::string>() + " does not match " + s.spec());
        if (!j.contains("payload"))
            throw UsageError("point object needs a payload");
        return point_from_payload(s, j["payload"]);
    }
    return point_from_payload(s, j);
}

inline IsometryRep isometry_from_json(const NpcSpace& s, const Json& g)
{
    if (!g.is_object())
        throw UsageError("generator must be a JSON object");
    switch (s.kind) {
    case SpaceKind::spd:
        if (!g.contains("matrix"))
            throw UsageError("spd generators need a \"matrix\"");
        return LinearAction{detail::json_matrix(g["matrix"], "generator matrix")};
    case SpaceKind::hyperbolic_plane: {
        if (!g.contains("mobius"))
            throw UsageError("hyperbolic generators need a \"mobius\" matrix");
        CMat m = detail::json_matrix(g["mobius"], "mobius matrix");
        if (m.rows() != 2 || m.cols() != 2 || m.imag().norm() != 0.0)
            throw UsageError("mobius matrix must be real 2x2");
        return Mobius{m.real()};
    }
    case SpaceKind::euclidean: {
        if (!g.contains("orthogonal") || !g.contains("translation"))
            throw UsageError("euclidean generators need \"orthogonal\" and \"translation\"");
        CMat q = detail::json_matrix(g["orthogonal"], "orthogonal matrix");
        if (q.imag().norm() != 0.0)
            throw UsageError("orthogonal matrix must be real");
        Vec t = std::get<Vec>(point_from_payload(s, g["translation"]));
        return RigidMotion{q.real(), t};
    }
    case SpaceKind::pod: {
        if (!g.contains("permutation") || !g["permutation"].is_array())
            throw UsageError("pod generators need a \"permutation\" array");
        return RayPermutation{g["permutation"].get<std::vector<int>>()};
    }
    }
    return {};
}

inline Representation representation_from_json(const Json& j)
{
    NpcSpace s = detail::json_space(j);
    if (!j.contains("generators") || !j["generators"].is_object() || j["generators"].empty())
        throw UsageError("representation needs a nonempty \"generators\" object");
    std::map<std::string, IsometryRep> gens;
    for (const auto& [name, g] : j["generators"].items())
        gens.emplace(name, isometry_from_json(s, g));
    std::vector<Word> rels;
    if (j.contains("relations"))
        for (const auto& r : j["relations"])
            rels.push_back(Word::parse(r.get<std::string>()));
    return Representation(s, std::move(gens), std::move(rels));
}

namespace detail {

inline std::vector<double> parse_number_list(std::string_view text)
{
    std::vector<double> out;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        std::size_t end = text.find(',', pos);
        std::string_view tok = text.substr(pos, end == std::string_view::npos ? std::string_view::npos : end - pos);
        while (!tok.empty() && std::isspace(static_cast<unsigned char>(tok.front())))
            tok.remove_prefix(1);
        while (!tok.empty() && std::isspace(static_cast<unsigned char>(tok.back())))
            tok.remove_suffix(1);
        out.push_back(parse_double(tok));
        if (end == std::string_view::npos)
            break;
        pos = end + 1;
    }
    return out;
}

/// "diag(a,b,...)" or "mat(a,b;c,d)".
inline CMat parse_inline_matrix(std::string_view text)
{
    auto body = [&](std::string_view head) {
        if (!text.starts_with(head) || !text.ends_with(")"))
            throw UsageError("bad inline matrix: " + std::string(text));
        return text.substr(head.size(), text.size() - head.size() - 1);
    };
    if (text.starts_with("diag(")) {
        auto d = parse_number_list(body("diag("));
        CMat m = CMat::Zero(static_cast<int>(d.size()), static_cast<int>(d.size()));
        for (std::size_t i = 0; i < d.size(); ++i)
            m(static_cast<int>(i), static_cast<int>(i)) = d[i];
        return m;
    }
    if (text.starts_with("mat(")) {
        std::string_view b = body("mat(");
        std::vector<std::vector<double>> rows;
        std::size_t pos = 0;
        while (true) {
            std::size_t end = b.find(';', pos);
            rows.push_back(parse_number_list(b.substr(pos, end == std::string_view::npos ? std::string_view::npos : end - pos)));
            if (end == std::string_view::npos)
                break;
            pos = end + 1;
        }
        const auto n = rows.size();
        CMat m(static_cast<int>(n), static_cast<int>(n));
        for (std::size_t i = 0; i < n; ++i) {
            if (rows[i].size() != n)
                throw UsageError("inline matrix must be square: " + std::string(text));
            for (std::size_t j = 0; j < n; ++j)
                m(static_cast<int>(i), static_cast<int>(j)) = rows[i][j];
        }
        return m;
    }
    throw UsageError("inline matrix must be diag(...) or mat(...): " + std::string(text));
}

} // namespace detail

/// Whitespace-separated "NAME=diag(...)" / "NAME=mat(...)" generators acting on real spd(n).
inline Representation parse_inline_representation(std::string_view text, int n)
{
    std::map<std::string, IsometryRep> gens;
    std::istringstream ss{std::string(text)};
    for (std::string tok; ss >> tok;) {
        auto eq = tok.find('=');
        if (eq == std::string::npos || eq == 0)
            throw UsageError("inline generator must look like NAME=diag(...): " + tok);
        CMat g = detail::parse_inline_matrix(std::string_view(tok).substr(eq + 1));
        if (g.rows() != n)
            throw UsageError("generator " + tok.substr(0, eq) + " is not " + std::to_string(n) + "x" + std::to_string(n));
        gens.emplace(tok.substr(0, eq), LinearAction{g});
    }
    if (gens.empty())
        throw UsageError("empty inline representation");
    return Representation(NpcSpace::spd(n), std::move(gens));
}

/// A path to a JSON file, or an inline spec when the argument contains '=' and is not a readable file.
inline Representation load_representation(const std::string& arg, int n)
{
    std::ifstream probe(arg);
    if (!probe && arg.find('=') != std::string::npos)
        return parse_inline_representation(arg, n);
    return representation_from_json(detail::read_json_file(arg));
}

struct BoundaryData {
    NpcSpace space;
    std::map<int, PointRep> values;
};

inline BoundaryData boundary_from_json(const Json& j)
{
    BoundaryData b{detail::json_space(j), {}};
    if (!j.contains("values") || !j["values"].is_object())
        throw UsageError("boundary JSON needs a \"values\" object");
    for (const auto& [key, payload] : j["values"].items())
        b.values.emplace(detail::parse_int(key), point_from_json(b.space, payload));
    return b;
}

struct CloudData {
    NpcSpace space;
    WeightedCloud cloud;
};

inline CloudData cloud_from_json(const Json& j)
{
    NpcSpace s = detail::json_space(j);
    if (!j.contains("points") || !j["points"].is_array())
        throw UsageError("cloud JSON needs a \"points\" array");
    std::vector<PointRep> pts;
    for (const auto& p : j["points"])
        pts.push_back(point_from_json(s, p));
    std::vector<double> w(pts.size(), 1.0);
    if (j.contains("weights")) {
        if (!j["weights"].is_array())
            throw UsageError("cloud weights must be an array");
        w.clear();
        for (const auto& x : j["weights"])
            w.push_back(detail::json_real(x, "cloud weights"));
    }
    return {s, WeightedCloud::normalized(std::move(pts), std::move(w))};
}

inline Json new_report(const std::string& command)
{
    Json j;
    j["schema"] = kReportSchema;
    j["command"] = command;
    return j;
}

} // namespace npc
