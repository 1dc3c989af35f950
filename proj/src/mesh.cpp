#include "orhc/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <map>
#include <numeric>
#include <ostream>
#include <tuple>
#include <utility>

namespace orhc {

double Mesh::signed_area(std::size_t t) const {
    const auto& tri = triangles[t];
    const Point2 a = vertices[tri[0]];
    const Point2 b = vertices[tri[1]];
    const Point2 c = vertices[tri[2]];
    return 0.5 * ((b.x - a.x) * (c.y - a.y) - (c.x - a.x) * (b.y - a.y));
}

Point2 Mesh::centroid(std::size_t t) const {
    const auto& tri = triangles[t];
    const Point2 s = vertices[tri[0]] + vertices[tri[1]] + vertices[tri[2]];
    return (1.0 / 3.0) * s;
}

void Mesh::check_aligned(const Rect& r) const {
    auto on_line = [&](double c) {
        const double scaled = c * n_div;
        return std::abs(scaled - std::round(scaled)) <= 1e-9 * std::max(1.0, std::abs(scaled));
    };
    if (!(r.x0 < r.x1 && r.y0 < r.y1)) {
        throw GeometryError("degenerate rectangle");
    }
    if (r.x0 < -1e-12 || r.y0 < -1e-12 || r.x1 > 1.0 + 1e-12 || r.y1 > 1.0 + 1e-12) {
        throw GeometryError("rectangle leaves the unit square");
    }
    if (!on_line(r.x0) || !on_line(r.x1) || !on_line(r.y0) || !on_line(r.y1)) {
        throw GeometryError("rectangle edges are not aligned with mesh lines (n_div = " +
                            std::to_string(n_div) + ")");
    }
}

namespace {

Mesh structured_mesh(int n) {
    Mesh m;
    m.base_n_div = n;
    m.n_div = n;
    const double h = 1.0 / n;
    m.vertices.reserve(static_cast<std::size_t>((n + 1) * (n + 1)));
    for (int j = 0; j <= n; ++j) {
        for (int i = 0; i <= n; ++i) {
            // i * h instead of accumulated sums keeps grid lines exact multiples
            m.vertices.push_back({i == n ? 1.0 : i * h, j == n ? 1.0 : j * h});
            m.boundary.push_back(i == 0 || j == 0 || i == n || j == n);
        }
    }
    auto id = [n](int i, int j) { return j * (n + 1) + i; };
    m.triangles.reserve(static_cast<std::size_t>(2 * n * n));
    for (int j = 0; j < n; ++j) {
        for (int i = 0; i < n; ++i) {
            const int a = id(i, j), b = id(i + 1, j), c = id(i + 1, j + 1), d = id(i, j + 1);
            m.triangles.push_back({a, b, c});
            m.triangles.push_back({a, c, d});
        }
    }
    return m;
}

}  // namespace

Mesh refine_regular(const Mesh& mesh) {
    Mesh fine;
    fine.base_n_div = mesh.base_n_div;
    fine.refinement_level = mesh.refinement_level + 1;
    fine.n_div = 2 * mesh.n_div;
    fine.vertices = mesh.vertices;

    std::map<std::pair<int, int>, int> midpoint;
    auto mid = [&](int a, int b) {
        const auto key = std::minmax(a, b);
        auto it = midpoint.find(key);
        if (it != midpoint.end()) {
            return it->second;
        }
        const int idx = static_cast<int>(fine.vertices.size());
        fine.vertices.push_back(0.5 * (mesh.vertices[a] + mesh.vertices[b]));
        midpoint.emplace(key, idx);
        return idx;
    };

    std::vector<std::array<int, 3>> tris;
    tris.reserve(4 * mesh.triangles.size());
    for (const auto& t : mesh.triangles) {
        const int ab = mid(t[0], t[1]);
        const int bc = mid(t[1], t[2]);
        const int ca = mid(t[2], t[0]);
        tris.push_back({t[0], ab, ca});
        tris.push_back({ab, t[1], bc});
        tris.push_back({ca, bc, t[2]});
        tris.push_back({ab, bc, ca});
    }

    // Renumber row by row so the refined mesh has the same vertex order as a
    // structured mesh of the refined size.
    const int n = fine.n_div;
    std::vector<int> new_index(fine.vertices.size());
    std::vector<Point2> ordered(fine.vertices.size());
    for (std::size_t v = 0; v < fine.vertices.size(); ++v) {
        const int i = static_cast<int>(std::lround(fine.vertices[v].x * n));
        const int j = static_cast<int>(std::lround(fine.vertices[v].y * n));
        const int idx = j * (n + 1) + i;
        new_index[v] = idx;
        ordered[static_cast<std::size_t>(idx)] = {i == n ? 1.0 : static_cast<double>(i) / n,
                                                  j == n ? 1.0 : static_cast<double>(j) / n};
    }
    fine.vertices = std::move(ordered);
    fine.boundary.assign(fine.vertices.size(), false);
    for (std::size_t v = 0; v < fine.vertices.size(); ++v) {
        const Point2 p = fine.vertices[v];
        fine.boundary[v] = p.x == 0.0 || p.y == 0.0 || p.x == 1.0 || p.y == 1.0;
    }
    for (auto& t : tris) {
        for (auto& v : t) {
            v = new_index[static_cast<std::size_t>(v)];
        }
    }
    // Deterministic triangle order: by lower-left grid square, lower triangle first.
    auto key = [&](const std::array<int, 3>& t) {
        const Point2 c = (1.0 / 3.0) * (fine.vertices[t[0]] + fine.vertices[t[1]] + fine.vertices[t[2]]);
        const int i = static_cast<int>(std::floor(c.x * n));
        const int j = static_cast<int>(std::floor(c.y * n));
        const bool upper = (c.y * n - j) > (c.x * n - i);
        return std::tuple<int, int, int>(j, i, upper ? 1 : 0);
    };
    std::sort(tris.begin(), tris.end(), [&](const auto& a, const auto& b) { return key(a) < key(b); });
    fine.triangles = std::move(tris);
    return fine;
}

Mesh build_mesh(int n_div, int refinement_level) {
    if (n_div < 8 || n_div % 8 != 0) {
        throw GeometryError("n_div must be a positive multiple of 8 so the actuator/sensor grid "
                            "aligns with mesh lines, got " + std::to_string(n_div));
    }
    if (refinement_level < 0) {
        throw GeometryError("refinement level must be non-negative");
    }
    Mesh m = structured_mesh(n_div);
    for (int r = 0; r < refinement_level; ++r) {
        m = refine_regular(m);
    }
    return m;
}

void write_mesh_text(const Mesh& mesh, std::ostream& os) {
    os << std::setprecision(17);
    os << "vertices " << mesh.vertices.size() << '\n';
    for (const auto& v : mesh.vertices) {
        os << v.x << ' ' << v.y << '\n';
    }
    os << "triangles " << mesh.triangles.size() << '\n';
    for (const auto& t : mesh.triangles) {
        os << t[0] << ' ' << t[1] << ' ' << t[2] << '\n';
    }
}

void write_matrix_coo(const SparseMatrix& m, std::ostream& os) {
    os << std::setprecision(17);
    for (int r = 0; r < m.outerSize(); ++r) {
        for (SparseMatrix::InnerIterator it(m, r); it; ++it) {
            os << it.row() << ' ' << it.col() << ' ' << it.value() << '\n';
        }
    }
}

}  // namespace orhc
