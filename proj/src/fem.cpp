#include "orhc/fem.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace orhc {

std::string to_string(BoundaryCondition bc) {
    return bc == BoundaryCondition::neumann ? "neumann" : "dirichlet";
}

BoundaryCondition boundary_condition_from_string(const std::string& s) {
    if (s == "neumann") return BoundaryCondition::neumann;
    if (s == "dirichlet") return BoundaryCondition::dirichlet;
    throw ConfigError("unknown boundary condition '" + s + "'");
}

double OperatorSet::mass_norm(const Vector& v) const {
    return std::sqrt(std::max(0.0, mass_inner(v, v)));
}

double OperatorSet::mass_inner(const Vector& a, const Vector& b) const {
    require_size(a.size(), size(), "mass_inner");
    require_size(b.size(), size(), "mass_inner");
    return a.dot(mass * b);
}

Vector OperatorSet::interpolate(const Mesh& mesh, const std::function<double(Point2)>& f) const {
    Vector v(size());
    for (Eigen::Index d = 0; d < size(); ++d) {
        v[d] = f(mesh.vertices[static_cast<std::size_t>(dof_to_vertex[static_cast<std::size_t>(d)])]);
    }
    return v;
}

int value_slot(const SparseMatrix& m, int row, int col) {
    const int* outer = m.outerIndexPtr();
    const int* inner = m.innerIndexPtr();
    const int* begin = inner + outer[row];
    const int* end = inner + outer[row + 1];
    const int* it = std::lower_bound(begin, end, col);
    if (it == end || *it != col) {
        return -1;
    }
    return static_cast<int>(it - inner);
}

namespace {

struct ElementGeometry {
    double area;
    std::array<Point2, 3> grad;
};

ElementGeometry element_geometry(const Mesh& mesh, std::size_t t) {
    const auto& tri = mesh.triangles[t];
    const Point2 a = mesh.vertices[tri[0]];
    const Point2 b = mesh.vertices[tri[1]];
    const Point2 c = mesh.vertices[tri[2]];
    const double det = (b.x - a.x) * (c.y - a.y) - (c.x - a.x) * (b.y - a.y);
    if (!(det > 0.0)) {
        throw GeometryError("triangle " + std::to_string(t) + " has non-positive area");
    }
    ElementGeometry g;
    g.area = 0.5 * det;
    // grad phi_k = rot90(opposite edge) / (2 area)
    g.grad[0] = {(b.y - c.y) / det, (c.x - b.x) / det};
    g.grad[1] = {(c.y - a.y) / det, (a.x - c.x) / det};
    g.grad[2] = {(a.y - b.y) / det, (b.x - a.x) / det};
    return g;
}

SparseMatrix build_pattern(const Mesh& mesh, const std::vector<int>& vertex_to_dof, Eigen::Index n) {
    std::vector<Eigen::Triplet<double, int>> trip;
    trip.reserve(9 * mesh.triangles.size());
    for (const auto& tri : mesh.triangles) {
        for (int p = 0; p < 3; ++p) {
            for (int q = 0; q < 3; ++q) {
                const int i = vertex_to_dof[static_cast<std::size_t>(tri[p])];
                const int j = vertex_to_dof[static_cast<std::size_t>(tri[q])];
                if (i >= 0 && j >= 0) {
                    trip.emplace_back(i, j, 0.0);
                }
            }
        }
    }
    SparseMatrix pattern(n, n);
    pattern.setFromTriplets(trip.begin(), trip.end());
    pattern.makeCompressed();
    return pattern;
}

}  // namespace

OperatorSet assemble_static(const Mesh& mesh, double nu, BoundaryCondition bc) {
    if (!(nu > 0.0)) {
        throw ConfigError("diffusion coefficient nu must be positive");
    }
    OperatorSet ops;
    ops.nu = nu;
    ops.bc = bc;
    ops.vertex_to_dof.assign(mesh.num_vertices(), -1);
    for (std::size_t v = 0; v < mesh.num_vertices(); ++v) {
        if (bc == BoundaryCondition::dirichlet && mesh.boundary[v]) {
            continue;
        }
        ops.vertex_to_dof[v] = static_cast<int>(ops.dof_to_vertex.size());
        ops.dof_to_vertex.push_back(static_cast<int>(v));
    }
    const auto n = static_cast<Eigen::Index>(ops.dof_to_vertex.size());

    ops.mass = build_pattern(mesh, ops.vertex_to_dof, n);
    ops.laplacian = ops.mass;
    double* mv = ops.mass.valuePtr();
    double* kv = ops.laplacian.valuePtr();
    for (std::size_t t = 0; t < mesh.num_triangles(); ++t) {
        const auto g = element_geometry(mesh, t);
        const auto& tri = mesh.triangles[t];
        for (int p = 0; p < 3; ++p) {
            const int i = ops.vertex_to_dof[static_cast<std::size_t>(tri[p])];
            if (i < 0) continue;
            for (int q = 0; q < 3; ++q) {
                const int j = ops.vertex_to_dof[static_cast<std::size_t>(tri[q])];
                if (j < 0) continue;
                const int slot = value_slot(ops.mass, i, j);
                mv[slot] += g.area / 12.0 * (p == q ? 2.0 : 1.0);
                kv[slot] += g.area * dot(g.grad[p], g.grad[q]);
            }
        }
    }
    ops.stiffness = ops.laplacian;
    Eigen::Map<Vector>(ops.stiffness.valuePtr(), ops.stiffness.nonZeros()) =
        nu * Eigen::Map<const Vector>(ops.laplacian.valuePtr(), ops.laplacian.nonZeros()) +
        Eigen::Map<const Vector>(ops.mass.valuePtr(), ops.mass.nonZeros());
    return ops;
}

Vector indicator_load(const Mesh& mesh, const OperatorSet& ops, const Rect& rect) {
    mesh.check_aligned(rect);
    Vector load = Vector::Zero(ops.size());
    for (std::size_t t = 0; t < mesh.num_triangles(); ++t) {
        if (!rect.contains(mesh.centroid(t))) continue;
        const double third = mesh.signed_area(t) / 3.0;
        for (int v : mesh.triangles[t]) {
            const int d = ops.vertex_to_dof[static_cast<std::size_t>(v)];
            if (d >= 0) load[d] += third;
        }
    }
    return load;
}

CoefficientField::BatchEvaluator CoefficientField::bind(std::vector<Point2> points) const {
    return [this, pts = std::move(points)](double t, std::span<double> a, std::span<Point2> b) {
        for (std::size_t k = 0; k < pts.size(); ++k) {
            a[k] = reaction(pts[k], t);
            b[k] = convection(pts[k], t);
        }
    };
}

double OscillatingCoefficients::reaction(Point2 x, double t) const {
    return -0.5 + x.x - std::abs(std::sin(6.0 * t + x.x));
}

Point2 OscillatingCoefficients::convection(Point2 x, double t) const {
    return {x.x + x.y, std::abs(std::cos(6.0 * t) * x.x * x.y)};
}

CoefficientField::BatchEvaluator OscillatingCoefficients::bind(std::vector<Point2> points) const {
    // sin(6t + x1) = sin(6t) cos(x1) + cos(6t) sin(x1) with the x1 factors cached
    const std::size_t n = points.size();
    std::vector<double> cos_x(n), sin_x(n), x1(n), b1(n), x1x2(n);
    for (std::size_t k = 0; k < n; ++k) {
        x1[k] = points[k].x;
        cos_x[k] = std::cos(points[k].x);
        sin_x[k] = std::sin(points[k].x);
        b1[k] = points[k].x + points[k].y;
        x1x2[k] = points[k].x * points[k].y;
    }
    return [=](double t, std::span<double> a, std::span<Point2> b) {
        const double s6 = std::sin(6.0 * t);
        const double c6 = std::cos(6.0 * t);
        for (std::size_t k = 0; k < n; ++k) {
            a[k] = -0.5 + x1[k] - std::abs(s6 * cos_x[k] + c6 * sin_x[k]);
            b[k] = {b1[k], std::abs(c6 * x1x2[k])};
        }
    };
}

CoefficientField::BatchEvaluator TimeShiftedCoefficients::bind(std::vector<Point2> points) const {
    auto inner = base_->bind(std::move(points));
    return [inner, shift = shift_](double t, std::span<double> a, std::span<Point2> b) {
        inner(t + shift, a, b);
    };
}

std::shared_ptr<const CoefficientField> make_coefficient_preset(const std::string& name) {
    if (name == "oscillating") return std::make_shared<OscillatingCoefficients>();
    if (name == "heat") return std::make_shared<ConstantCoefficients>(1.0, Point2{0.0, 0.0});
    throw ConfigError("unknown coefficient preset '" + name + "'");
}

ReactionConvectionAssembler::ReactionConvectionAssembler(
    const Mesh& mesh, const OperatorSet& ops, std::shared_ptr<const CoefficientField> coeffs)
    : pattern_(ops.mass), coeffs_(std::move(coeffs)) {
    std::fill_n(pattern_.valuePtr(), pattern_.nonZeros(), 0.0);
    std::vector<Point2> centroids;
    centroids.reserve(mesh.num_triangles());
    elements_.reserve(mesh.num_triangles());
    for (std::size_t t = 0; t < mesh.num_triangles(); ++t) {
        const auto g = element_geometry(mesh, t);
        Element e{g.area, g.grad, {}};
        const auto& tri = mesh.triangles[t];
        for (int p = 0; p < 3; ++p) {
            for (int q = 0; q < 3; ++q) {
                const int i = ops.vertex_to_dof[static_cast<std::size_t>(tri[p])];
                const int j = ops.vertex_to_dof[static_cast<std::size_t>(tri[q])];
                e.slot[static_cast<std::size_t>(3 * p + q)] = (i >= 0 && j >= 0) ? value_slot(pattern_, i, j) : -1;
            }
        }
        elements_.push_back(e);
        centroids.push_back(mesh.centroid(t));
    }
    evaluate_ = coeffs_->bind(std::move(centroids));
}

void ReactionConvectionAssembler::assemble_values(double t, std::span<double> out) const {
    require_size(static_cast<Eigen::Index>(out.size()), pattern_.nonZeros(), "assemble_values");
    const std::size_t ne = elements_.size();
    thread_local std::vector<double> a;
    thread_local std::vector<Point2> b;
    a.resize(ne);
    b.resize(ne);
    evaluate_(t, a, b);
    std::fill(out.begin(), out.end(), 0.0);
    for (std::size_t k = 0; k < ne; ++k) {
        const Element& e = elements_[k];
        const double react = (a[k] - 1.0) * e.area / 12.0;
        const double third = e.area / 3.0;
        std::array<double, 3> adv;
        for (int q = 0; q < 3; ++q) {
            adv[static_cast<std::size_t>(q)] = third * dot(b[k], e.grad[static_cast<std::size_t>(q)]);
        }
        for (int p = 0; p < 3; ++p) {
            for (int q = 0; q < 3; ++q) {
                const int slot = e.slot[static_cast<std::size_t>(3 * p + q)];
                if (slot < 0) continue;
                out[static_cast<std::size_t>(slot)] += react * (p == q ? 2.0 : 1.0) + adv[static_cast<std::size_t>(q)];
            }
        }
    }
}

ReactionConvectionAssembly ReactionConvectionAssembler::assemble(double t) const {
    ReactionConvectionAssembly out{t, pattern_};
    assemble_values(t, std::span<double>(out.matrix.valuePtr(), static_cast<std::size_t>(out.matrix.nonZeros())));
    return out;
}

}  // namespace orhc
