#include "penaltyflow/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <utility>

namespace pflow {

namespace {

double triangle_signed_area(const Point& a, const Point& b, const Point& c) {
    return 0.5 * ((b.x - a.x) * (c.y - a.y) - (c.x - a.x) * (b.y - a.y));
}

double distance(const Point& a, const Point& b) { return std::hypot(b.x - a.x, b.y - a.y); }

} // namespace

Mesh::Mesh(std::vector<Point> nodes, std::vector<Triangle> triangles, std::vector<int> boundary_flags)
    : nodes_(std::move(nodes)), triangles_(std::move(triangles)), flags_(std::move(boundary_flags)) {
    if (nodes_.empty() || triangles_.empty()) {
        throw MeshError("mesh must contain at least one node and one triangle");
    }
    if (flags_.size() != nodes_.size()) {
        throw MeshError("boundary flag count does not match node count");
    }
    const int n = static_cast<int>(nodes_.size());
    for (std::size_t t = 0; t < triangles_.size(); ++t) {
        for (int v : triangles_[t]) {
            if (v < 0 || v >= n) {
                throw MeshError("triangle " + std::to_string(t) + " references node " + std::to_string(v) +
                                " out of range [0," + std::to_string(n) + ")");
            }
        }
        const auto& tri = triangles_[t];
        if (tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2]) {
            throw MeshError("triangle " + std::to_string(t) + " has repeated vertices");
        }
        if (!(signed_area(t) > 0.0)) {
            throw MeshError("triangle " + std::to_string(t) + " has nonpositive signed area (clockwise or degenerate)");
        }
    }

    std::map<std::pair<int, int>, int> edge_index;
    std::vector<int> edge_uses;
    triangle_edges_.resize(triangles_.size());
    for (std::size_t t = 0; t < triangles_.size(); ++t) {
        const auto& tri = triangles_[t];
        for (int le = 0; le < 3; ++le) {
            const int a = tri[le];
            const int b = tri[(le + 1) % 3];
            const auto key = std::minmax(a, b);
            auto [it, inserted] = edge_index.try_emplace({key.first, key.second}, static_cast<int>(edges_.size()));
            if (inserted) {
                edges_.push_back({key.first, key.second});
                edge_uses.push_back(0);
            }
            triangle_edges_[t][le] = it->second;
            if (++edge_uses[it->second] > 2) {
                throw MeshError("edge (" + std::to_string(key.first) + "," + std::to_string(key.second) +
                                ") is shared by more than two triangles");
            }
        }
    }

    edge_on_boundary_.resize(edges_.size());
    std::vector<bool> on_boundary(nodes_.size(), false);
    for (std::size_t e = 0; e < edges_.size(); ++e) {
        edge_on_boundary_[e] = edge_uses[e] == 1;
        if (edge_on_boundary_[e]) {
            on_boundary[edges_[e].first] = true;
            on_boundary[edges_[e].second] = true;
        }
        h_max_ = std::max(h_max_, distance(nodes_[edges_[e].first], nodes_[edges_[e].second]));
    }
    for (int i = 0; i < n; ++i) {
        if (flags_[i] != 0 && !on_boundary[i]) {
            throw MeshError("node " + std::to_string(i) + " is flagged as boundary but lies on no boundary edge");
        }
        if (flags_[i] == 0 && on_boundary[i]) {
            throw MeshError("node " + std::to_string(i) + " lies on a boundary edge but has boundary flag 0");
        }
    }
}

std::vector<int> Mesh::boundary_nodes() const {
    std::vector<int> out;
    for (std::size_t i = 0; i < flags_.size(); ++i) {
        if (flags_[i] != 0) {
            out.push_back(static_cast<int>(i));
        }
    }
    return out;
}

double Mesh::signed_area(std::size_t t) const {
    const auto& tri = triangles_[t];
    return triangle_signed_area(nodes_[tri[0]], nodes_[tri[1]], nodes_[tri[2]]);
}

double Mesh::total_area() const {
    double sum = 0.0;
    for (std::size_t t = 0; t < triangles_.size(); ++t) {
        sum += signed_area(t);
    }
    return sum;
}

Mesh build_rect_mesh(int nx, int ny, double x0, double y0, double x1, double y1, RectPattern pattern) {
    if (nx < 1 || ny < 1) {
        throw MeshError("build_rect_mesh: cell counts must be >= 1 (got nx=" + std::to_string(nx) +
                        ", ny=" + std::to_string(ny) + ")");
    }
    if (!(x1 > x0) || !(y1 > y0)) {
        throw MeshError("build_rect_mesh: corners must satisfy x1 > x0 and y1 > y0");
    }
    std::vector<Point> nodes;
    std::vector<int> flags;
    nodes.reserve(static_cast<std::size_t>(nx + 1) * (ny + 1));
    for (int j = 0; j <= ny; ++j) {
        // Hit the far edge exactly rather than accumulating roundoff.
        const double y = j == ny ? y1 : y0 + (y1 - y0) * j / ny;
        for (int i = 0; i <= nx; ++i) {
            const double x = i == nx ? x1 : x0 + (x1 - x0) * i / nx;
            nodes.push_back({x, y});
            flags.push_back((i == 0 || i == nx || j == 0 || j == ny) ? 1 : 0);
        }
    }
    auto id = [nx](int i, int j) { return j * (nx + 1) + i; };
    std::vector<Mesh::Triangle> tris;
    const bool cross = pattern == RectPattern::CrissCross;
    tris.reserve((cross ? 4 : 2) * static_cast<std::size_t>(nx) * ny);
    for (int j = 0; j < ny; ++j) {
        for (int i = 0; i < nx; ++i) {
            const int ll = id(i, j);
            const int lr = id(i + 1, j);
            const int ul = id(i, j + 1);
            const int ur = id(i + 1, j + 1);
            if (!cross) {
                tris.push_back({ll, lr, ur});
                tris.push_back({ll, ur, ul});
                continue;
            }
            const Point a = nodes[static_cast<std::size_t>(ll)];
            const Point b = nodes[static_cast<std::size_t>(ur)];
            const int c = static_cast<int>(nodes.size());
            nodes.push_back({0.5 * (a.x + b.x), 0.5 * (a.y + b.y)});
            flags.push_back(0);
            tris.push_back({ll, lr, c});
            tris.push_back({lr, ur, c});
            tris.push_back({ur, ul, c});
            tris.push_back({ul, ll, c});
        }
    }
    return Mesh(std::move(nodes), std::move(tris), std::move(flags));
}

namespace {

// Yields non-blank, non-comment lines with their 1-based line numbers.
class LineReader {
public:
    explicit LineReader(std::istream& in) : in_(in) {}

    bool next(std::istringstream& fields) {
        std::string line;
        while (std::getline(in_, line)) {
            ++line_no_;
            const auto first = line.find_first_not_of(" \t\r");
            if (first == std::string::npos || line[first] == '#') {
                continue;
            }
            fields.clear();
            fields.str(line);
            return true;
        }
        return false;
    }

    [[nodiscard]] int line_no() const { return line_no_; }

    [[noreturn]] void fail(const std::string& what) const {
        throw MeshError("mesh file line " + std::to_string(line_no_) + ": " + what);
    }

private:
    std::istream& in_;
    int line_no_ = 0;
};

void expect_end(std::istringstream& fields, const LineReader& reader) {
    std::string extra;
    if (fields >> extra) {
        reader.fail("unexpected trailing token '" + extra + "'");
    }
}

} // namespace

Mesh read_mesh(std::istream& in) {
    LineReader reader(in);
    std::istringstream fields;
    if (!reader.next(fields)) {
        throw MeshError("mesh file is empty");
    }
    long long num_nodes = 0;
    long long num_tris = 0;
    if (!(fields >> num_nodes >> num_tris) || num_nodes <= 0 || num_tris <= 0) {
        reader.fail("expected '<num_nodes> <num_triangles>' with positive counts");
    }
    expect_end(fields, reader);

    std::vector<Point> nodes(static_cast<std::size_t>(num_nodes));
    std::vector<int> flags(static_cast<std::size_t>(num_nodes));
    for (auto i = 0LL; i < num_nodes; ++i) {
        if (!reader.next(fields)) {
            throw MeshError("mesh file ended after " + std::to_string(i) + " of " + std::to_string(num_nodes) +
                            " node lines");
        }
        auto& p = nodes[static_cast<std::size_t>(i)];
        if (!(fields >> p.x >> p.y >> flags[static_cast<std::size_t>(i)])) {
            reader.fail("expected '<x> <y> <boundary_flag>'");
        }
        if (!std::isfinite(p.x) || !std::isfinite(p.y)) {
            reader.fail("non-finite node coordinate");
        }
        expect_end(fields, reader);
    }

    std::vector<Mesh::Triangle> tris(static_cast<std::size_t>(num_tris));
    for (auto t = 0LL; t < num_tris; ++t) {
        if (!reader.next(fields)) {
            throw MeshError("mesh file ended after " + std::to_string(t) + " of " + std::to_string(num_tris) +
                            " triangle lines");
        }
        auto& tri = tris[static_cast<std::size_t>(t)];
        if (!(fields >> tri[0] >> tri[1] >> tri[2])) {
            reader.fail("expected '<i> <j> <k>'");
        }
        expect_end(fields, reader);
        for (int v : tri) {
            if (v < 0 || v >= num_nodes) {
                reader.fail("triangle " + std::to_string(t) + " node index " + std::to_string(v) + " out of range");
            }
        }
        const double area = triangle_signed_area(nodes[tri[0]], nodes[tri[1]], nodes[tri[2]]);
        if (!(area > 0.0)) {
            reader.fail("triangle " + std::to_string(t) + " has nonpositive signed area " + std::to_string(area) +
                        " (clockwise or degenerate)");
        }
    }
    if (reader.next(fields)) {
        reader.fail("unexpected content after the last triangle");
    }
    return Mesh(std::move(nodes), std::move(tris), std::move(flags));
}

Mesh load_mesh(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw MeshError("cannot open mesh file '" + path.string() + "'");
    }
    return read_mesh(in);
}

void write_mesh(std::ostream& out, const Mesh& mesh) {
    out << mesh.num_nodes() << ' ' << mesh.num_triangles() << '\n';
    out << std::setprecision(17);
    const auto flags = mesh.boundary_flags();
    const auto nodes = mesh.nodes();
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        out << nodes[i].x << ' ' << nodes[i].y << ' ' << flags[i] << '\n';
    }
    for (const auto& tri : mesh.triangles()) {
        out << tri[0] << ' ' << tri[1] << ' ' << tri[2] << '\n';
    }
}

} // namespace pflow
