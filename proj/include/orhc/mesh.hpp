#pragma once

#include "orhc/types.hpp"

#include <iosfwd>
#include <vector>

namespace orhc {

/// Axis-aligned rectangle [x0, x1] x [y0, y1].
struct Rect {
    double x0 = 0.0;
    double x1 = 0.0;
    double y0 = 0.0;
    double y1 = 0.0;

    double area() const { return (x1 - x0) * (y1 - y0); }
    Point2 center() const { return {0.5 * (x0 + x1), 0.5 * (y0 + y1)}; }
    bool contains(Point2 p) const { return p.x > x0 && p.x < x1 && p.y > y0 && p.y < y1; }
    bool contains_closed(Point2 p, double eps) const {
        return p.x >= x0 - eps && p.x <= x1 + eps && p.y >= y0 - eps && p.y <= y1 + eps;
    }
};

/// Structured P1 triangulation of the unit square.
///
/// Every grid square is split along its lower-left to upper-right diagonal.
/// Vertices are numbered row by row from the lower-left corner, so vertex
/// (i, j) has index j * (n_div + 1) + i.
struct Mesh {
    int base_n_div = 0;        ///< squares per side of the reference mesh
    int refinement_level = 0;  ///< 0 = reference mesh, r = r regular quadrisections
    int n_div = 0;             ///< effective squares per side, base_n_div * 2^r
    std::vector<Point2> vertices;
    std::vector<std::array<int, 3>> triangles;  ///< counter-clockwise vertex triples
    std::vector<bool> boundary;                 ///< per vertex

    std::size_t num_vertices() const { return vertices.size(); }
    std::size_t num_triangles() const { return triangles.size(); }
    double h() const { return 1.0 / n_div; }

    double signed_area(std::size_t t) const;
    Point2 centroid(std::size_t t) const;

    /// Throws GeometryError unless every rectangle edge lies on a mesh line.
    void check_aligned(const Rect& r) const;
};

/// Builds the reference mesh with n_div squares per side and applies
/// refinement_level regular quadrisections. n_div must be a positive multiple of 8.
Mesh build_mesh(int n_div, int refinement_level = 0);

/// Splits every triangle into four through its edge midpoints.
Mesh refine_regular(const Mesh& mesh);

/// Plain-text dump: a "vertices N" block of "x y" lines, then a
/// "triangles T" block of "i j k" lines.
void write_mesh_text(const Mesh& mesh, std::ostream& os);

/// Coordinate format, one "row col value" line per stored entry.
void write_matrix_coo(const SparseMatrix& m, std::ostream& os);

}  // namespace orhc
