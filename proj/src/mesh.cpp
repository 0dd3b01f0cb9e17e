#include "prandtl/mesh.hpp"

#include <Eigen/LU>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

namespace prandtl {

namespace {

using EdgeKey = std::pair<int, int>;

EdgeKey key(int a, int b) { return {std::min(a, b), std::max(a, b)}; }

struct EdgeUse {
    int count = 0;
    int first_element = -1;
    int second_element = -1;
};

std::map<EdgeKey, EdgeUse> edge_usage(const std::vector<std::array<int, 3>>& elements)
{
    std::map<EdgeKey, EdgeUse> usage;
    for (int el = 0; el < static_cast<int>(elements.size()); ++el) {
        const auto& t = elements[el];
        for (int k = 0; k < 3; ++k) {
            EdgeUse& u = usage[key(t[k], t[(k + 1) % 3])];
            (u.count == 0 ? u.first_element : u.second_element) = el;
            ++u.count;
        }
    }
    return usage;
}

} // namespace

std::string to_string(EdgeLabel label)
{
    switch (label) {
    case EdgeLabel::Gamma0:
        return "gamma0";
    case EdgeLabel::Gamma1:
        return "gamma1";
    case EdgeLabel::CollarOuter:
        return "collar_outer";
    }
    return "?";
}

EdgeLabel edge_label_from_string(const std::string& name)
{
    if (name == "gamma0")
        return EdgeLabel::Gamma0;
    if (name == "gamma1")
        return EdgeLabel::Gamma1;
    if (name == "collar_outer")
        return EdgeLabel::CollarOuter;
    throw std::invalid_argument("unknown edge label '" + name + "'");
}

Mesh::Mesh(std::vector<Eigen::Vector2d> nodes, std::vector<std::array<int, 3>> elements, std::vector<int> region,
           std::vector<char> collar, std::vector<BoundaryEdge> edges)
    : nodes_(std::move(nodes)), elements_(std::move(elements)), region_(std::move(region)), collar_(std::move(collar)),
      edges_(std::move(edges))
{
    validate_and_precompute();
}

void Mesh::validate_and_precompute()
{
    if (nodes_.empty() || elements_.empty())
        throw std::invalid_argument("mesh needs at least one node and one element");
    if (region_.size() != elements_.size() || collar_.size() != elements_.size())
        throw std::invalid_argument("mesh: region/collar arrays must match the element count");
    for (const auto& x : nodes_)
        if (!x.allFinite())
            throw std::invalid_argument("mesh: non-finite node coordinate");

    const int n = num_nodes();
    area_.resize(elements_.size());
    grad_.resize(elements_.size());
    for (std::size_t el = 0; el < elements_.size(); ++el) {
        const auto& t = elements_[el];
        for (int k : t)
            if (k < 0 || k >= n)
                throw std::invalid_argument("mesh: element " + std::to_string(el) + " references a missing node");
        if (region_[el] < 0)
            throw std::invalid_argument("mesh: negative region id");
        const Eigen::Vector2d d1 = nodes_[t[1]] - nodes_[t[0]], d2 = nodes_[t[2]] - nodes_[t[0]];
        const double det = d1.x() * d2.y() - d1.y() * d2.x();
        if (!(det > 0.0))
            throw std::invalid_argument("mesh: element " + std::to_string(el) +
                                        " has non-positive area (nodes must be counter-clockwise)");
        area_[el] = 0.5 * det;
        // Gradients of the barycentric coordinates: rows of inv([d1 d2])^T with phi0 = 1 - phi1 - phi2.
        Eigen::Matrix2d J;
        J << d1, d2;
        const Eigen::Matrix2d Jinv = J.inverse();
        grad_[el].row(1) = Jinv.row(0);
        grad_[el].row(2) = Jinv.row(1);
        grad_[el].row(0) = -Jinv.row(0) - Jinv.row(1);
    }

    const auto usage = edge_usage(elements_);
    std::map<EdgeKey, int> labeled;
    bool has_gamma0 = false;
    for (std::size_t i = 0; i < edges_.size(); ++i) {
        const auto& e = edges_[i];
        const auto it = usage.find(key(e.a, e.b));
        if (it == usage.end())
            throw std::invalid_argument("mesh: labeled edge " + std::to_string(i) + " is not an element edge");
        if (!labeled.emplace(key(e.a, e.b), static_cast<int>(i)).second)
            throw std::invalid_argument("mesh: edge " + std::to_string(i) + " is labeled twice");
        if (it->second.count == 2) {
            const bool interface = e.label == EdgeLabel::Gamma0 &&
                                   collar_[it->second.first_element] != collar_[it->second.second_element];
            if (!interface)
                throw std::invalid_argument("mesh: only body/collar interface edges may be interior labeled edges");
        }
        has_gamma0 = has_gamma0 || e.label == EdgeLabel::Gamma0;
    }
    for (const auto& [k, use] : usage) {
        if (use.count > 2)
            throw std::invalid_argument("mesh: non-conforming connectivity (edge shared by more than two elements)");
        if (use.count == 1 && !labeled.count(k))
            throw std::invalid_argument("mesh: boundary edge (" + std::to_string(k.first) + ", " +
                                        std::to_string(k.second) + ") is not labeled");
    }
    if (!has_gamma0)
        throw std::invalid_argument("mesh: the Dirichlet part gamma0 must be nonempty");
}

Eigen::Vector2d Mesh::centroid(int el) const
{
    const auto& t = elements_[el];
    return (nodes_[t[0]] + nodes_[t[1]] + nodes_[t[2]]) / 3.0;
}

double Mesh::total_area(bool include_collar) const
{
    double a = 0.0;
    for (int el = 0; el < num_elements(); ++el)
        if (include_collar || !collar_[el])
            a += area_[el];
    return a;
}

bool Mesh::has_collar() const { return std::any_of(collar_.begin(), collar_.end(), [](char c) { return c != 0; }); }

double Mesh::min_diameter() const
{
    double d = INFINITY;
    for (const auto& t : elements_) {
        double longest = 0.0;
        for (int k = 0; k < 3; ++k)
            longest = std::max(longest, (nodes_[t[k]] - nodes_[t[(k + 1) % 3]]).norm());
        d = std::min(d, longest);
    }
    return d;
}

std::vector<int> Mesh::nodes_with_label(EdgeLabel label) const
{
    std::vector<int> out;
    for (const auto& e : edges_)
        if (e.label == label) {
            out.push_back(e.a);
            out.push_back(e.b);
        }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

Mesh make_rectangle(const RectangleSpec& spec)
{
    if (!(spec.lx > 0.0) || !(spec.ly > 0.0) || spec.nx < 1 || spec.ny < 1 || spec.collar_width < 0.0)
        throw std::invalid_argument("rectangle: lengths and collar width must be positive, nx, ny >= 1");
    const double w = spec.collar_width;
    const bool collar = w > 0.0;
    std::array<bool, 4> wrap{};
    for (int s = 0; s < 4; ++s)
        wrap[s] = collar && spec.sides[s] == EdgeLabel::Gamma0;

    std::vector<double> xs, ys;
    if (wrap[0])
        xs.push_back(-w);
    for (int i = 0; i <= spec.nx; ++i)
        xs.push_back(spec.lx * i / spec.nx);
    if (wrap[1])
        xs.push_back(spec.lx + w);
    if (wrap[2])
        ys.push_back(-w);
    for (int j = 0; j <= spec.ny; ++j)
        ys.push_back(spec.ly * j / spec.ny);
    if (wrap[3])
        ys.push_back(spec.ly + w);

    const int cx = static_cast<int>(xs.size()) - 1, cy = static_cast<int>(ys.size()) - 1;
    // Cell status per axis: -1 = collar on the low side, +1 = high side, 0 = body.
    auto x_status = [&](int i) { return (wrap[0] && i == 0) ? -1 : (wrap[1] && i == cx - 1) ? 1 : 0; };
    auto y_status = [&](int j) { return (wrap[2] && j == 0) ? -1 : (wrap[3] && j == cy - 1) ? 1 : 0; };

    std::vector<int> node_id((cx + 1) * (cy + 1), -1);
    std::vector<Eigen::Vector2d> nodes;
    auto node = [&](int i, int j) {
        int& id = node_id[j * (cx + 1) + i];
        if (id < 0) {
            id = static_cast<int>(nodes.size());
            nodes.emplace_back(xs[i], ys[j]);
        }
        return id;
    };

    std::vector<std::array<int, 3>> elements;
    std::vector<int> region;
    std::vector<char> in_collar;
    for (int j = 0; j < cy; ++j) {
        for (int i = 0; i < cx; ++i) {
            const bool c = x_status(i) != 0 || y_status(j) != 0;
            const int n00 = node(i, j), n10 = node(i + 1, j), n01 = node(i, j + 1), n11 = node(i + 1, j + 1);
            for (const auto& tri : {std::array<int, 3>{n00, n10, n11}, std::array<int, 3>{n00, n11, n01}}) {
                elements.push_back(tri);
                in_collar.push_back(c ? 1 : 0);
                int reg = 0;
                if (!c) {
                    const double yc = (nodes[tri[0]].y() + nodes[tri[1]].y() + nodes[tri[2]].y()) / 3.0;
                    for (const auto& band : spec.bands)
                        if (yc >= band.y_min && yc <= band.y_max)
                            reg = band.region;
                }
                region.push_back(reg);
            }
        }
    }

    auto side_of = [&](const Eigen::Vector2d& a, const Eigen::Vector2d& b) {
        if (a.x() == b.x() && a.x() == 0.0)
            return 0;
        if (a.x() == b.x() && a.x() == spec.lx)
            return 1;
        if (a.y() == b.y() && a.y() == 0.0)
            return 2;
        if (a.y() == b.y() && a.y() == spec.ly)
            return 3;
        return -1;
    };
    auto outer_side_of = [&](const Eigen::Vector2d& a, const Eigen::Vector2d& b) {
        if (wrap[0] && a.x() == b.x() && a.x() == -w)
            return 0;
        if (wrap[1] && a.x() == b.x() && a.x() == spec.lx + w)
            return 1;
        if (wrap[2] && a.y() == b.y() && a.y() == -w)
            return 2;
        if (wrap[3] && a.y() == b.y() && a.y() == spec.ly + w)
            return 3;
        return -1;
    };

    std::vector<BoundaryEdge> edges;
    const auto usage = edge_usage(elements);
    for (const auto& [k, use] : usage) {
        const Eigen::Vector2d &a = nodes[k.first], &b = nodes[k.second];
        if (use.count == 1) {
            if (in_collar[use.first_element]) {
                const int outer = outer_side_of(a, b);
                edges.push_back(outer >= 0 ? BoundaryEdge{k.first, k.second, EdgeLabel::CollarOuter, outer}
                                           : BoundaryEdge{k.first, k.second, EdgeLabel::Gamma1, -1});
            } else {
                const int s = side_of(a, b);
                edges.push_back({k.first, k.second, spec.sides[s], s});
            }
        } else if (in_collar[use.first_element] != in_collar[use.second_element]) {
            edges.push_back({k.first, k.second, EdgeLabel::Gamma0, side_of(a, b)});
        }
    }

    return Mesh(std::move(nodes), std::move(elements), std::move(region), std::move(in_collar), std::move(edges));
}

namespace {

/// Reads the next non-comment token stream line by line.
class Tokens {
public:
    explicit Tokens(std::istream& in) : in_(in) {}

    std::string next()
    {
        std::string tok;
        while (!(line_ >> tok)) {
            std::string raw;
            if (!std::getline(in_, raw))
                throw std::invalid_argument("mesh file: unexpected end of input");
            ++lineno_;
            if (const auto hash = raw.find('#'); hash != std::string::npos)
                raw.erase(hash);
            line_.clear();
            line_.str(raw);
        }
        return tok;
    }

    template <typename T>
    T number()
    {
        const std::string tok = next();
        std::istringstream s(tok);
        T v;
        if (!(s >> v) || !s.eof())
            throw std::invalid_argument("mesh file line " + std::to_string(lineno_) + ": bad number '" + tok + "'");
        return v;
    }

    void expect(const std::string& word)
    {
        const std::string tok = next();
        if (tok != word)
            throw std::invalid_argument("mesh file line " + std::to_string(lineno_) + ": expected '" + word +
                                        "', found '" + tok + "'");
    }

private:
    std::istream& in_;
    std::istringstream line_;
    int lineno_ = 0;
};

} // namespace

Mesh read_mesh(std::istream& in)
{
    Tokens tok(in);
    tok.expect("dim");
    if (tok.number<int>() != 2)
        throw std::invalid_argument("mesh file: only dim 2 is supported");
    tok.expect("nodes");
    const int n = tok.number<int>();
    if (n < 3)
        throw std::invalid_argument("mesh file: need at least three nodes");
    std::vector<Eigen::Vector2d> nodes(n);
    for (auto& x : nodes) {
        x.x() = tok.number<double>();
        x.y() = tok.number<double>();
    }
    tok.expect("elements");
    const int m = tok.number<int>();
    if (m < 1)
        throw std::invalid_argument("mesh file: need at least one element");
    std::vector<std::array<int, 3>> elements(m);
    std::vector<int> region(m);
    std::vector<char> collar(m);
    for (int el = 0; el < m; ++el) {
        for (int k = 0; k < 3; ++k)
            elements[el][k] = tok.number<int>();
        region[el] = tok.number<int>();
        const int c = tok.number<int>();
        if (c != 0 && c != 1)
            throw std::invalid_argument("mesh file: collar flag must be 0 or 1");
        collar[el] = static_cast<char>(c);
    }
    tok.expect("edges");
    const int ne = tok.number<int>();
    if (ne < 0)
        throw std::invalid_argument("mesh file: negative edge count");
    std::vector<BoundaryEdge> edges(ne);
    for (auto& e : edges) {
        e.a = tok.number<int>();
        e.b = tok.number<int>();
        e.label = edge_label_from_string(tok.next());
        e.tag = tok.number<int>();
    }
    return Mesh(std::move(nodes), std::move(elements), std::move(region), std::move(collar), std::move(edges));
}

Mesh read_mesh_file(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw std::invalid_argument("cannot open mesh file '" + path + "'");
    return read_mesh(in);
}

void write_mesh(std::ostream& out, const Mesh& mesh)
{
    char buf[64];
    out << "dim 2\nnodes " << mesh.num_nodes() << "\n";
    for (const auto& x : mesh.nodes()) {
        std::snprintf(buf, sizeof buf, "%.17g %.17g\n", x.x(), x.y());
        out << buf;
    }
    out << "elements " << mesh.num_elements() << "\n";
    for (int el = 0; el < mesh.num_elements(); ++el) {
        const auto& t = mesh.elements()[el];
        out << t[0] << ' ' << t[1] << ' ' << t[2] << ' ' << mesh.region()[el] << ' ' << int(mesh.collar()[el]) << "\n";
    }
    out << "edges " << mesh.edges().size() << "\n";
    for (const auto& e : mesh.edges())
        out << e.a << ' ' << e.b << ' ' << to_string(e.label) << ' ' << e.tag << "\n";
}

} // namespace prandtl
