#pragma once

// Weighted-graph domains, generator words, representations into isometry groups, and
// the "npcgraph v1" text format.

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <cmath>
#include <functional>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <queue>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "npc/errors.hpp"
#include "npc/target_spaces.hpp"

namespace npc {

// ---------------------------------------------------------------------------
// Generator words: "A", "A^-1", "A*B^-1*A".

struct Letter {
    std::string generator;
    int exponent = 1; // +1 or -1

    friend bool operator==(const Letter&, const Letter&) = default;
};

struct Word {
    std::vector<Letter> letters;

    bool empty() const { return letters.empty(); }

    Word inverse() const
    {
        Word w;
        for (auto it = letters.rbegin(); it != letters.rend(); ++it)
            w.letters.push_back({it->generator, -it->exponent});
        return w;
    }

    std::string str() const
    {
        std::string out;
        for (std::size_t i = 0; i < letters.size(); ++i) {
            if (i)
                out += '*';
            out += letters[i].generator;
            if (letters[i].exponent < 0)
                out += "^-1";
        }
        return out;
    }

    static Word parse(std::string_view text)
    {
        Word w;
        std::size_t pos = 0;
        while (pos < text.size()) {
            std::size_t end = text.find('*', pos);
            std::string_view tok = text.substr(pos, end == std::string_view::npos ? std::string_view::npos : end - pos);
            Letter l;
            if (tok.ends_with("^-1")) {
                l.exponent = -1;
                tok.remove_suffix(3);
            }
            if (tok.empty() || !std::all_of(tok.begin(), tok.end(), [](char c) {
                    return std::isalnum(static_cast<unsigned char>(c)) || c == '_';
                }))
                throw UsageError("bad generator word: " + std::string(text));
            l.generator = std::string(tok);
            w.letters.push_back(l);
            if (end == std::string_view::npos)
                break;
            pos = end + 1;
            if (pos == text.size())
                throw UsageError("bad generator word: " + std::string(text));
        }
        return w;
    }

    friend bool operator==(const Word&, const Word&) = default;
};

// ---------------------------------------------------------------------------

/// Representation of a finitely generated group into the isometries of a target.
class Representation {
public:
    static constexpr double kRelationTol = 1e-8;

    Representation(NpcSpace space, std::map<std::string, IsometryRep> generators, std::vector<Word> relations = {})
        : space_(space), generators_(std::move(generators)), relations_(std::move(relations))
    {
        for (const auto& [name, iso] : generators_)
            validate_isometry(space_, iso);
        for (const auto& rel : relations_) {
            double defect = identity_defect(word_isometry(rel));
            if (!(defect <= kRelationTol))
                throw InvariantError("relation " + rel.str() + " does not act as the identity (defect " +
                                     std::to_string(defect) + ")");
        }
    }

    /// Trivial representation: every generator acts as the identity.
    static Representation trivial(NpcSpace space, const std::vector<std::string>& names)
    {
        std::map<std::string, IsometryRep> g;
        for (const auto& n : names)
            g.emplace(n, identity_isometry(space));
        return Representation(space, std::move(g));
    }

    const NpcSpace& space() const { return space_; }
    const std::map<std::string, IsometryRep>& generators() const { return generators_; }
    const std::vector<Word>& relations() const { return relations_; }
    bool has_generator(const std::string& name) const { return generators_.count(name) > 0; }

    const IsometryRep& generator(const std::string& name) const
    {
        auto it = generators_.find(name);
        if (it == generators_.end())
            throw UsageError("generator '" + name + "' is not part of the representation");
        return it->second;
    }

    /// rho(w) for w = l1 l2 ... lk, acting as rho(l1) o rho(l2) o ... o rho(lk).
    IsometryRep word_isometry(const Word& w) const
    {
        IsometryRep acc = identity_isometry(space_);
        for (const auto& l : w.letters) {
            IsometryRep g = generator(l.generator);
            acc = compose(space_, acc, l.exponent > 0 ? g : inverse(space_, g));
        }
        return acc;
    }

    /// Largest displacement of a fixed set of probe points; 0 for the identity isometry.
    double identity_defect(const IsometryRep& iso) const
    {
        double worst = 0.0;
        for (const auto& p : probes())
            worst = std::max(worst, distance(space_, p, isometry_apply(space_, iso, p)));
        return worst;
    }

private:
    std::vector<PointRep> probes() const
    {
        std::vector<PointRep> out{basepoint(space_)};
        switch (space_.kind) {
        case SpaceKind::euclidean:
            for (int i = 0; i < space_.dim; ++i)
                out.push_back(Vec(Vec::Unit(space_.dim, i)));
            break;
        case SpaceKind::hyperbolic_plane:
            out.push_back(HalfPlanePoint{1.0, 1.0});
            out.push_back(HalfPlanePoint{0.0, 2.0});
            break;
        case SpaceKind::spd:
            for (int i = 0; i < space_.n; ++i)
                for (int j = i; j < space_.n; ++j) {
                    CMat x = CMat::Zero(space_.n, space_.n);
                    x(i, j) = x(j, i) = 0.5;
                    if (i == j)
                        x -= (0.5 / space_.n) * CMat::Identity(space_.n, space_.n);
                    out.push_back(make_spd_point(linalg::sa_exp(x)));
                    if (space_.complex && i != j) {
                        CMat y = CMat::Zero(space_.n, space_.n);
                        y(i, j) = cplx(0.0, 0.5);
                        y(j, i) = cplx(0.0, -0.5);
                        out.push_back(make_spd_point(linalg::sa_exp(y)));
                    }
                }
            break;
        case SpaceKind::pod:
            for (int r = 0; r < space_.arms; ++r)
                out.push_back(PodPoint{r, 1.0});
            break;
        }
        return out;
    }

    NpcSpace space_;
    std::map<std::string, IsometryRep> generators_;
    std::vector<Word> relations_;
};

// ---------------------------------------------------------------------------

struct Vertex {
    double measure = 1.0;
    std::optional<std::array<double, 2>> position;
};

struct Edge {
    int u = 0;
    int v = 0;
    double weight = 1.0;
    std::optional<Word> twist; // traversal u->v sees rho(twist) f(v); v->u sees rho(twist)^-1 f(u)
};

struct DomainGraph {
    std::vector<Vertex> vertices;
    std::vector<Edge> edges;
    std::vector<bool> boundary;

    int vertex_count() const { return static_cast<int>(vertices.size()); }
    bool is_boundary(int v) const { return boundary.at(v); }
    bool has_boundary() const { return std::find(boundary.begin(), boundary.end(), true) != boundary.end(); }
    bool has_twists() const
    {
        return std::any_of(edges.begin(), edges.end(), [](const Edge& e) { return e.twist && !e.twist->empty(); });
    }

    /// Sets each vertex measure to half the sum of its incident edge weights.
    void assign_default_measures()
    {
        for (auto& v : vertices)
            v.measure = 0.0;
        for (const auto& e : edges) {
            vertices.at(e.u).measure += 0.5 * e.weight;
            vertices.at(e.v).measure += 0.5 * e.weight;
        }
    }
};

/// One side of an edge as seen from a vertex.
struct Incidence {
    int neighbor = 0;
    int edge = 0;
    double weight = 1.0;
    std::optional<Word> twist; // word to apply to the neighbor's value
};

inline std::vector<std::vector<Incidence>> incidence_lists(const DomainGraph& d)
{
    std::vector<std::vector<Incidence>> adj(d.vertices.size());
    for (int i = 0; i < static_cast<int>(d.edges.size()); ++i) {
        const Edge& e = d.edges[i];
        std::optional<Word> fwd, back;
        if (e.twist && !e.twist->empty()) {
            fwd = *e.twist;
            back = e.twist->inverse();
        }
        adj.at(e.u).push_back({e.v, i, e.weight, fwd});
        adj.at(e.v).push_back({e.u, i, e.weight, back});
    }
    return adj;
}

struct DiscreteMap {
    NpcSpace target;
    std::vector<PointRep> values;

    static DiscreteMap constant(const NpcSpace& target, int vertex_count, const PointRep& value)
    {
        return {target, std::vector<PointRep>(static_cast<std::size_t>(vertex_count), value)};
    }
};

// ---------------------------------------------------------------------------
// Construction

enum class GridShape { interval, rectangle, disk, circle, torus };

inline GridShape parse_grid_shape(std::string_view s)
{
    if (s == "interval")
        return GridShape::interval;
    if (s == "rectangle")
        return GridShape::rectangle;
    if (s == "disk")
        return GridShape::disk;
    if (s == "circle")
        return GridShape::circle;
    if (s == "torus")
        return GridShape::torus;
    throw UsageError("unknown grid shape: " + std::string(s));
}

/// Edge weight from the two endpoint positions; the default is the unit-lattice weight 1
/// (transverse length / edge length with unit spacing).
using WeightFn = std::function<double(const std::array<double, 2>&, const std::array<double, 2>&)>;

inline DomainGraph build_grid_domain(GridShape shape, int resolution, const WeightFn& metric_weights = {})
{
    if (resolution < 2)
        throw UsageError("grid resolution must be >= 2");
    DomainGraph d;
    auto add_vertex = [&](double x, double y) {
        d.vertices.push_back({1.0, std::array<double, 2>{x, y}});
        d.boundary.push_back(false);
        return d.vertex_count() - 1;
    };
    auto add_edge = [&](int u, int v) {
        double w = metric_weights ? metric_weights(*d.vertices[u].position, *d.vertices[v].position) : 1.0;
        d.edges.push_back({u, v, w, std::nullopt});
    };
    const int n = resolution;
    switch (shape) {
    case GridShape::interval:
    case GridShape::circle:
        for (int i = 0; i < n; ++i)
            add_vertex(i, 0.0);
        for (int i = 0; i + 1 < n; ++i)
            add_edge(i, i + 1);
        if (shape == GridShape::circle) {
            if (n < 3)
                throw UsageError("circle needs at least 3 vertices");
            add_edge(n - 1, 0);
        } else {
            d.boundary[0] = d.boundary[n - 1] = true;
        }
        break;
    case GridShape::rectangle:
    case GridShape::torus: {
        auto id = [n](int i, int j) { return j * n + i; };
        for (int j = 0; j < n; ++j)
            for (int i = 0; i < n; ++i)
                add_vertex(i, j);
        for (int j = 0; j < n; ++j)
            for (int i = 0; i < n; ++i) {
                if (i + 1 < n)
                    add_edge(id(i, j), id(i + 1, j));
                if (j + 1 < n)
                    add_edge(id(i, j), id(i, j + 1));
            }
        if (shape == GridShape::torus) {
            if (n < 3)
                throw UsageError("torus needs resolution >= 3");
            for (int j = 0; j < n; ++j)
                add_edge(id(n - 1, j), id(0, j));
            for (int i = 0; i < n; ++i)
                add_edge(id(i, n - 1), id(i, 0));
        } else {
            for (int j = 0; j < n; ++j)
                for (int i = 0; i < n; ++i)
                    if (i == 0 || j == 0 || i == n - 1 || j == n - 1)
                        d.boundary[id(i, j)] = true;
        }
        break;
    }
    case GridShape::disk: {
        double c = 0.5 * (n - 1);
        std::map<std::pair<int, int>, int> ids;
        for (int j = 0; j < n; ++j)
            for (int i = 0; i < n; ++i)
                if ((i - c) * (i - c) + (j - c) * (j - c) <= c * c + 1e-9)
                    ids[{i, j}] = add_vertex(i, j);
        for (const auto& [ij, v] : ids) {
            auto [i, j] = ij;
            int neighbors = 0;
            for (auto [di, dj] : {std::pair{1, 0}, std::pair{-1, 0}, std::pair{0, 1}, std::pair{0, -1}}) {
                auto it = ids.find({i + di, j + dj});
                if (it == ids.end())
                    continue;
                ++neighbors;
                if (di + dj > 0)
                    add_edge(v, it->second);
            }
            d.boundary[v] = neighbors < 4;
        }
        break;
    }
    }
    d.assign_default_measures();
    return d;
}

/// Edges of a circle/torus grid that cross the fundamental-domain boundary, with the axis they wrap.
inline std::vector<std::pair<int, int>> wrap_edges(const DomainGraph& d)
{
    std::vector<std::pair<int, int>> out;
    for (int i = 0; i < static_cast<int>(d.edges.size()); ++i) {
        const auto& e = d.edges[i];
        const auto& pu = d.vertices[e.u].position;
        const auto& pv = d.vertices[e.v].position;
        if (!pu || !pv)
            continue;
        for (int axis = 0; axis < 2; ++axis)
            if (std::abs((*pu)[axis] - (*pv)[axis]) > 1.5)
                out.emplace_back(i, axis);
    }
    return out;
}

/// Attaches generator words to the given edges. Words must only use generators known to rep.
inline DomainGraph build_twisted_domain(const DomainGraph& base, const Representation& rep,
                                        const std::map<int, Word>& gluing)
{
    DomainGraph d = base;
    for (const auto& [edge, word] : gluing) {
        if (edge < 0 || edge >= static_cast<int>(d.edges.size()))
            throw UsageError("gluing refers to a missing edge");
        for (const auto& l : word.letters)
            if (!rep.has_generator(l.generator))
                throw UsageError("generator '" + l.generator + "' is unknown to the representation");
        d.edges[edge].twist = word;
    }
    return d;
}

/// Twists every wrap-around edge of a circle (axis 0) or torus (axes 0 and 1) grid by one generator per axis.
inline DomainGraph build_twisted_domain(const DomainGraph& base, const Representation& rep,
                                        const std::vector<std::string>& axis_generators)
{
    std::map<int, Word> gluing;
    for (auto [edge, axis] : wrap_edges(base)) {
        if (axis >= static_cast<int>(axis_generators.size()))
            throw UsageError("no generator assigned to wrap axis " + std::to_string(axis));
        // Wrap edges are stored (last, first): the far copy of `first` is reached through the generator.
        gluing[edge] = Word{{{axis_generators[axis], 1}}};
    }
    return build_twisted_domain(base, rep, gluing);
}

inline DomainGraph twisted_cycle(int n, const Representation& rep, const std::string& generator)
{
    return build_twisted_domain(build_grid_domain(GridShape::circle, n), rep, std::vector<std::string>{generator});
}

// ---------------------------------------------------------------------------
// Validation

struct DomainDiagnostics {
    bool ok = true;
    bool connected = true;
    std::vector<std::string> problems;

    void flag(std::string msg)
    {
        ok = false;
        problems.push_back(std::move(msg));
    }
};

inline DomainDiagnostics validate_domain(const DomainGraph& d, const Representation* rep = nullptr)
{
    DomainDiagnostics diag;
    const int nv = d.vertex_count();
    if (nv == 0) {
        diag.flag("graph has no vertices");
        return diag;
    }
    if (static_cast<int>(d.boundary.size()) != nv)
        diag.flag("boundary flags do not match vertex count");
    for (int v = 0; v < nv; ++v)
        if (!(d.vertices[v].measure > 0.0))
            diag.flag("vertex " + std::to_string(v) + " has non-positive measure");
    std::vector<double> total(nv, 0.0);
    for (std::size_t i = 0; i < d.edges.size(); ++i) {
        const auto& e = d.edges[i];
        if (e.u < 0 || e.u >= nv || e.v < 0 || e.v >= nv) {
            diag.flag("edge " + std::to_string(i) + " refers to a missing vertex");
            continue;
        }
        if (!(e.weight > 0.0) || !std::isfinite(e.weight))
            diag.flag("edge " + std::to_string(i) + " has non-positive weight");
        if (e.u == e.v && !(e.twist && !e.twist->empty()))
            diag.flag("edge " + std::to_string(i) + " is an untwisted self-loop");
        if (e.twist && rep)
            for (const auto& l : e.twist->letters)
                if (!rep->has_generator(l.generator))
                    diag.flag("edge " + std::to_string(i) + " uses unknown generator " + l.generator);
        total[e.u] += std::max(0.0, e.weight);
        total[e.v] += std::max(0.0, e.weight);
    }
    for (int v = 0; v < nv; ++v)
        if (total[v] <= 0.0)
            diag.flag("vertex " + std::to_string(v) + " has zero total edge weight");

    std::vector<char> seen(nv, 0);
    std::vector<int> stack{0};
    seen[0] = 1;
    auto adj = incidence_lists(d);
    while (!stack.empty()) {
        int v = stack.back();
        stack.pop_back();
        for (const auto& inc : adj[v])
            if (inc.neighbor >= 0 && inc.neighbor < nv && !seen[inc.neighbor]) {
                seen[inc.neighbor] = 1;
                stack.push_back(inc.neighbor);
            }
    }
    if (std::count(seen.begin(), seen.end(), 1) != nv) {
        diag.connected = false;
        diag.flag("graph is disconnected");
    }
    return diag;
}

// ---------------------------------------------------------------------------
// npcgraph v1 text format

namespace detail {

inline std::string format_double(double x)
{
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, ptr);
}

inline double parse_double(std::string_view tok)
{
    double x = 0.0;
    auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), x);
    if (ec != std::errc() || ptr != tok.data() + tok.size())
        throw UsageError("bad number in graph file: " + std::string(tok));
    return x;
}

inline int parse_int(std::string_view tok)
{
    int x = 0;
    auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), x);
    if (ec != std::errc() || ptr != tok.data() + tok.size())
        throw UsageError("bad integer in graph file: " + std::string(tok));
    return x;
}

} // namespace detail

inline void write_graph(std::ostream& out, const DomainGraph& d)
{
    out << "npcgraph v1\n";
    for (int v = 0; v < d.vertex_count(); ++v) {
        out << "V " << v << ' ' << detail::format_double(d.vertices[v].measure);
        if (d.vertices[v].position)
            out << ' ' << detail::format_double((*d.vertices[v].position)[0]) << ' '
                << detail::format_double((*d.vertices[v].position)[1]);
        out << '\n';
    }
    for (const auto& e : d.edges) {
        out << "E " << e.u << ' ' << e.v << ' ' << detail::format_double(e.weight);
        if (e.twist && !e.twist->empty())
            out << " twist=" << e.twist->str();
        out << '\n';
    }
    for (int v = 0; v < d.vertex_count(); ++v)
        if (d.boundary[v])
            out << "B " << v << '\n';
}

inline DomainGraph read_graph(std::istream& in)
{
    std::string line;
    if (!std::getline(in, line) || line != "npcgraph v1")
        throw UsageError("graph file must start with 'npcgraph v1'");
    std::map<int, Vertex> verts;
    std::vector<Edge> edges;
    std::vector<int> bnd;
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r')
            line.pop_back();
        if (line.empty() || line[0] == '#')
            continue;
        std::istringstream ss(line);
        std::vector<std::string> tok;
        for (std::string t; ss >> t;)
            tok.push_back(t);
        auto where = [&] { return " (line " + std::to_string(lineno) + ")"; };
        if (tok[0] == "V") {
            if (tok.size() != 3 && tok.size() != 5)
                throw UsageError("V line needs: V id mu [x y]" + where());
            Vertex v;
            v.measure = detail::parse_double(tok[2]);
            if (tok.size() == 5)
                v.position = std::array<double, 2>{detail::parse_double(tok[3]), detail::parse_double(tok[4])};
            if (!verts.emplace(detail::parse_int(tok[1]), v).second)
                throw UsageError("duplicate vertex id" + where());
        } else if (tok[0] == "E") {
            if (tok.size() != 4 && tok.size() != 5)
                throw UsageError("E line needs: E u v w [twist=word]" + where());
            Edge e{detail::parse_int(tok[1]), detail::parse_int(tok[2]), detail::parse_double(tok[3]), std::nullopt};
            if (tok.size() == 5) {
                if (!tok[4].starts_with("twist="))
                    throw UsageError("unknown edge attribute" + where());
                e.twist = Word::parse(std::string_view(tok[4]).substr(6));
            }
            edges.push_back(std::move(e));
        } else if (tok[0] == "B") {
            if (tok.size() != 2)
                throw UsageError("B line needs: B id" + where());
            bnd.push_back(detail::parse_int(tok[1]));
        } else {
            throw UsageError("unknown record '" + tok[0] + "'" + where());
        }
    }
    DomainGraph d;
    int expect = 0;
    for (auto& [id, v] : verts) {
        if (id != expect++)
            throw UsageError("vertex ids must be 0..V-1");
        d.vertices.push_back(v);
    }
    d.boundary.assign(d.vertices.size(), false);
    for (int b : bnd) {
        if (b < 0 || b >= d.vertex_count())
            throw UsageError("boundary vertex out of range");
        d.boundary[b] = true;
    }
    for (const auto& e : edges)
        if (e.u < 0 || e.u >= d.vertex_count() || e.v < 0 || e.v >= d.vertex_count())
            throw UsageError("edge refers to a missing vertex");
    d.edges = std::move(edges);
    return d;
}

} // namespace npc
