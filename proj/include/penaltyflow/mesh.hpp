#pragma once

#include <array>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace pflow {

struct Point {
    double x = 0.0;
    double y = 0.0;
};

/// Raised for malformed mesh input or invalid mesh construction arguments.
class MeshError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// An undirected mesh edge, stored with first < second.
struct Edge {
    int first = 0;
    int second = 0;
};

/// Immutable conforming triangulation of a 2D domain.
///
/// Triangles are stored counterclockwise. Each triangle also records its three
/// edges in the local order (v0,v1), (v1,v2), (v2,v0); edges are numbered in
/// first-visit order over triangles, which makes the numbering deterministic.
/// Nodes carry an integer boundary flag (0 = interior); every flagged node must
/// sit on a boundary edge and every boundary-edge node must be flagged.
class Mesh {
public:
    using Triangle = std::array<int, 3>;

    Mesh(std::vector<Point> nodes, std::vector<Triangle> triangles,
         std::vector<int> boundary_flags);

    [[nodiscard]] std::span<const Point> nodes() const { return nodes_; }
    [[nodiscard]] std::span<const Triangle> triangles() const { return triangles_; }
    [[nodiscard]] std::span<const Edge> edges() const { return edges_; }
    [[nodiscard]] std::span<const int> boundary_flags() const { return flags_; }

    [[nodiscard]] std::size_t num_nodes() const { return nodes_.size(); }
    [[nodiscard]] std::size_t num_triangles() const { return triangles_.size(); }
    [[nodiscard]] std::size_t num_edges() const { return edges_.size(); }

    /// Edge indices of triangle t in local order (v0v1, v1v2, v2v0).
    [[nodiscard]] const std::array<int, 3>& triangle_edges(std::size_t t) const {
        return triangle_edges_[t];
    }
    [[nodiscard]] bool is_boundary_edge(std::size_t e) const { return edge_on_boundary_[e]; }
    [[nodiscard]] bool is_boundary_node(std::size_t n) const { return flags_[n] != 0; }

    /// Sorted indices of all nodes with a nonzero boundary flag.
    [[nodiscard]] std::vector<int> boundary_nodes() const;

    [[nodiscard]] double signed_area(std::size_t t) const;
    [[nodiscard]] double total_area() const;
    [[nodiscard]] double h_max() const { return h_max_; }

private:
    std::vector<Point> nodes_;
    std::vector<Triangle> triangles_;
    std::vector<int> flags_;
    std::vector<Edge> edges_;
    std::vector<std::array<int, 3>> triangle_edges_;
    std::vector<bool> edge_on_boundary_;
    double h_max_ = 0.0;
};

enum class RectPattern {
    Diagonal,  ///< each cell split along its lower-left to upper-right diagonal
    CrissCross ///< each cell split into four by both diagonals, with a centre node
};

/// Structured triangulation of [x0,x1]x[y0,y1] with nx*ny cells.
/// P2 velocity with the penalty term locks on Diagonal meshes; CrissCross does not.
Mesh build_rect_mesh(int nx, int ny, double x0, double y0, double x1, double y1,
                     RectPattern pattern = RectPattern::Diagonal);

/// Parses the plain-text mesh format. Errors carry the offending line number.
Mesh read_mesh(std::istream& in);
Mesh load_mesh(const std::filesystem::path& path);

void write_mesh(std::ostream& out, const Mesh& mesh);

} // namespace pflow
