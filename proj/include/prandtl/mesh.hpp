// Triangle meshes with labeled boundary edges and an optional boundary collar.
#ifndef PRANDTL_MESH_HPP
#define PRANDTL_MESH_HPP

#include <Eigen/Core>

#include <array>
#include <iosfwd>
#include <string>
#include <vector>

namespace prandtl {

enum class EdgeLabel { Gamma0, Gamma1, CollarOuter };

std::string to_string(EdgeLabel label);
EdgeLabel edge_label_from_string(const std::string& name);

/// A labeled edge. Gamma1 and CollarOuter edges lie on the mesh boundary;
/// Gamma0 edges do too, except in a collar mesh where they mark the
/// interface between the body and the collar.
struct BoundaryEdge {
    int a = 0;
    int b = 0;
    EdgeLabel label = EdgeLabel::Gamma1;
    int tag = -1;
};

/// Mesh file syntax (ASCII, whitespace separated, '#' starts a comment):
///
///     dim 2
///     nodes N
///     x y                      (N rows)
///     elements M
///     n0 n1 n2 region collar   (M rows, counter-clockwise, collar is 0 or 1)
///     edges E
///     n0 n1 label tag          (E rows, label is gamma0, gamma1 or collar_outer)
class Mesh {
public:
    Mesh() = default;
    Mesh(std::vector<Eigen::Vector2d> nodes, std::vector<std::array<int, 3>> elements, std::vector<int> region,
         std::vector<char> collar, std::vector<BoundaryEdge> edges);

    int dim() const { return 2; }
    int num_nodes() const { return static_cast<int>(nodes_.size()); }
    int num_elements() const { return static_cast<int>(elements_.size()); }
    int num_dofs() const { return 2 * num_nodes(); }

    const std::vector<Eigen::Vector2d>& nodes() const { return nodes_; }
    const std::vector<std::array<int, 3>>& elements() const { return elements_; }
    const std::vector<int>& region() const { return region_; }
    const std::vector<char>& collar() const { return collar_; }
    const std::vector<BoundaryEdge>& edges() const { return edges_; }

    double area(int el) const { return area_[el]; }
    const std::vector<double>& areas() const { return area_; }
    /// Rows are the constant gradients of the three barycentric shape functions.
    const Eigen::Matrix<double, 3, 2>& gradients(int el) const { return grad_[el]; }
    Eigen::Vector2d centroid(int el) const;
    double total_area(bool include_collar = true) const;
    bool has_collar() const;
    /// Smallest element diameter (longest edge of the element).
    double min_diameter() const;

    /// Sorted nodes of all edges carrying `label`.
    std::vector<int> nodes_with_label(EdgeLabel label) const;

private:
    void validate_and_precompute();

    std::vector<Eigen::Vector2d> nodes_;
    std::vector<std::array<int, 3>> elements_;
    std::vector<int> region_;
    std::vector<char> collar_;
    std::vector<BoundaryEdge> edges_;
    std::vector<double> area_;
    std::vector<Eigen::Matrix<double, 3, 2>> grad_;
};

/// Structured rectangle [0, lx] x [0, ly] cut into nx x ny cells, two triangles each.
/// Side order: left, right, bottom, top; the side index is stored as the edge tag.
/// With collar_width > 0 a layer of that width is appended outside every Gamma0 side.
struct RectangleSpec {
    double lx = 1.0;
    double ly = 1.0;
    int nx = 4;
    int ny = 4;
    std::array<EdgeLabel, 4> sides{EdgeLabel::Gamma0, EdgeLabel::Gamma0, EdgeLabel::Gamma0, EdgeLabel::Gamma0};
    double collar_width = 0.0;
    /// Elements with centroid y in [y_min, y_max] get the given region id.
    struct Band {
        double y_min = 0.0;
        double y_max = 0.0;
        int region = 1;
    };
    std::vector<Band> bands;
};

Mesh make_rectangle(const RectangleSpec& spec);

Mesh read_mesh(std::istream& in);
Mesh read_mesh_file(const std::string& path);
void write_mesh(std::ostream& out, const Mesh& mesh);

} // namespace prandtl

#endif // PRANDTL_MESH_HPP
