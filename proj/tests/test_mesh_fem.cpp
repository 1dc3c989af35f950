#include "support.hpp"

#include "orhc/fem.hpp"
#include "orhc/mesh.hpp"

#include <doctest.h>

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>
#include <sstream>

using namespace orhc;

namespace {

std::set<std::array<int, 3>> sorted_triangles(const Mesh& m) {
    std::set<std::array<int, 3>> out;
    for (auto t : m.triangles) {
        std::sort(t.begin(), t.end());
        out.insert(t);
    }
    return out;
}

// Seven-point degree-5 rule on the reference triangle, barycentric points.
struct QuadPoint {
    double l0, l1, l2, w;
};

std::vector<QuadPoint> degree5_rule() {
    const double a1 = 0.059715871789770, b1 = 0.470142064105115, w1 = 0.132394152788506;
    const double a2 = 0.797426985353087, b2 = 0.101286507323456, w2 = 0.125939180544827;
    return {{1.0 / 3, 1.0 / 3, 1.0 / 3, 0.225}, {a1, b1, b1, w1}, {b1, a1, b1, w1}, {b1, b1, a1, w1},
            {a2, b2, b2, w2},                   {b2, a2, b2, w2}, {b2, b2, a2, w2}};
}

// Integral of (a(x, t) - 1) phi_i by the degree-5 rule on every triangle.
Vector reaction_load_oracle(const Mesh& mesh, const CoefficientField& c, double t) {
    Vector out = Vector::Zero(static_cast<Eigen::Index>(mesh.num_vertices()));
    const auto rule = degree5_rule();
    for (std::size_t e = 0; e < mesh.num_triangles(); ++e) {
        const auto& tri = mesh.triangles[e];
        const double area = mesh.signed_area(e);
        for (const auto& q : rule) {
            const Point2 x = q.l0 * mesh.vertices[tri[0]] + q.l1 * mesh.vertices[tri[1]] +
                             q.l2 * mesh.vertices[tri[2]];
            const double f = (c.reaction(x, t) - 1.0) * q.w * area;
            out[tri[0]] += f * q.l0;
            out[tri[1]] += f * q.l1;
            out[tri[2]] += f * q.l2;
        }
    }
    return out;
}

double interior_relative_error(int n_div) {
    const Mesh mesh = build_mesh(n_div);
    const OperatorSet ops = assemble_static(mesh, 0.1, BoundaryCondition::neumann);
    auto coeffs = make_coefficient_preset("oscillating");
    const ReactionConvectionAssembler rc(mesh, ops, coeffs);
    const Vector row_sums = rc.assemble(0.0).matrix * Vector::Ones(ops.size());
    const Vector oracle = reaction_load_oracle(mesh, *coeffs, 0.0);
    double err = 0.0, scale = 0.0;
    for (std::size_t v = 0; v < mesh.num_vertices(); ++v) {
        if (mesh.boundary[v]) continue;
        const auto i = static_cast<Eigen::Index>(v);
        err = std::max(err, std::abs(row_sums[i] - oracle[i]));
        scale = std::max(scale, std::abs(oracle[i]));
    }
    return err / scale;
}

}  // namespace

TEST_CASE("structured mesh counts, orientation and numbering") {
    const Mesh m = build_mesh(16);
    CHECK(m.n_div == 16);
    CHECK(m.num_vertices() == 17u * 17u);
    CHECK(m.num_triangles() == 2u * 16u * 16u);
    double total = 0.0;
    for (std::size_t t = 0; t < m.num_triangles(); ++t) {
        CHECK(m.signed_area(t) > 0.0);
        total += m.signed_area(t);
    }
    CHECK(total == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(std::count(m.boundary.begin(), m.boundary.end(), true) == 64);
    const Point2 v = m.vertices[3 * 17 + 5];
    CHECK(v.x == doctest::Approx(5.0 / 16));
    CHECK(v.y == doctest::Approx(3.0 / 16));
}

TEST_CASE("regular refinement reproduces the structured mesh of twice the size") {
    const Mesh fine = build_mesh(8, 1);
    const Mesh direct = build_mesh(16);
    CHECK(fine.n_div == 16);
    CHECK(fine.base_n_div == 8);
    CHECK(fine.refinement_level == 1);
    REQUIRE(fine.num_vertices() == direct.num_vertices());
    for (std::size_t v = 0; v < fine.num_vertices(); ++v) {
        CHECK(fine.vertices[v].x == direct.vertices[v].x);
        CHECK(fine.vertices[v].y == direct.vertices[v].y);
    }
    CHECK(sorted_triangles(fine) == sorted_triangles(direct));
}

TEST_CASE("mesh size and rectangle alignment are validated") {
    CHECK_THROWS_AS(build_mesh(12), GeometryError);
    CHECK_THROWS_AS(build_mesh(0), GeometryError);
    CHECK_THROWS_AS(build_mesh(8, -1), GeometryError);
    const Mesh m = build_mesh(16);
    CHECK_NOTHROW(m.check_aligned({0.125, 0.25, 0.5, 0.5625}));
    CHECK_THROWS_AS(m.check_aligned({0.1, 0.25, 0.5, 0.75}), GeometryError);
    CHECK_THROWS_AS(m.check_aligned({0.25, 0.25, 0.5, 0.75}), GeometryError);
    CHECK_THROWS_AS(m.check_aligned({0.5, 1.5, 0.0, 0.5}), GeometryError);
}

TEST_CASE("text exports list every vertex, triangle and stored entry") {
    const Mesh m = build_mesh(8);
    std::ostringstream mesh_text;
    write_mesh_text(m, mesh_text);
    std::istringstream in(mesh_text.str());
    std::string word;
    std::size_t count = 0;
    in >> word >> count;
    CHECK(word == "vertices");
    CHECK(count == m.num_vertices());
    const OperatorSet ops = assemble_static(m, 0.1, BoundaryCondition::neumann);
    std::ostringstream coo;
    write_matrix_coo(ops.mass, coo);
    const std::string text = coo.str();
    const auto lines = std::count(text.begin(), text.end(), '\n');
    CHECK(lines == ops.mass.nonZeros());
}

TEST_CASE("mass matrix: partition of unity and symmetry") {
    const Mesh m = build_mesh(16);
    const OperatorSet ops = assemble_static(m, 0.1, BoundaryCondition::neumann);
    CHECK(ops.mass.sum() == doctest::Approx(1.0).epsilon(1e-12));
    const SparseMatrix mt = ops.mass.transpose();
    CHECK(test::max_abs(ops.mass - mt) <= 1e-14);
    const SparseMatrix kt = ops.stiffness.transpose();
    CHECK(test::max_abs(ops.stiffness - kt) <= 1e-14);
    CHECK((ops.laplacian * Vector::Ones(ops.size())).cwiseAbs().maxCoeff() <= 1e-12);
    const SparseMatrix shifted = SparseMatrix(0.1 * ops.laplacian) + ops.mass;
    CHECK(test::max_abs(ops.stiffness - shifted) <= 1e-14);
    CHECK(ops.mass_norm(Vector::Ones(ops.size())) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("dirichlet elimination drops boundary vertices") {
    const Mesh m = build_mesh(16);
    const OperatorSet ops = assemble_static(m, 0.1, BoundaryCondition::dirichlet);
    CHECK(ops.size() == 15 * 15);
    CHECK(ops.vertex_to_dof[0] == -1);
    CHECK(ops.dof_to_vertex.size() == 225u);
    CHECK_THROWS_AS(assemble_static(m, 0.0, BoundaryCondition::neumann), ConfigError);
    CHECK(boundary_condition_from_string(to_string(BoundaryCondition::dirichlet)) == BoundaryCondition::dirichlet);
    CHECK_THROWS_AS(boundary_condition_from_string("robin"), ConfigError);
}

TEST_CASE("reaction-convection matrix for trivial coefficients") {
    const Mesh m = build_mesh(16);
    const OperatorSet ops = assemble_static(m, 0.1, BoundaryCondition::neumann);
    SUBCASE("a = 1, b = 0 gives the zero matrix") {
        const ReactionConvectionAssembler rc(m, ops, std::make_shared<ConstantCoefficients>(1.0, Point2{0, 0}));
        CHECK(test::max_abs(rc.assemble(0.3).matrix) == 0.0);
    }
    SUBCASE("a = 2, b = 0 gives the mass matrix") {
        const ReactionConvectionAssembler rc(m, ops, std::make_shared<ConstantCoefficients>(2.0, Point2{0, 0}));
        CHECK(test::max_abs(rc.assemble(0.0).matrix - ops.mass) <= 1e-12);
    }
}

TEST_CASE("assembly is deterministic and batch evaluation matches the pointwise one") {
    const Mesh m = build_mesh(16);
    const OperatorSet ops = assemble_static(m, 0.1, BoundaryCondition::neumann);
    const ReactionConvectionAssembler fast(m, ops, make_coefficient_preset("oscillating"));
    auto ref = std::make_shared<OscillatingCoefficients>();
    const ReactionConvectionAssembler slow(
        m, ops,
        std::make_shared<FunctionCoefficients>([ref](Point2 x, double t) { return ref->reaction(x, t); },
                                               [ref](Point2 x, double t) { return ref->convection(x, t); }));
    for (double t : {0.0, 0.37, 2.5}) {
        const SparseMatrix a = fast.assemble(t).matrix;
        const SparseMatrix b = fast.assemble(t).matrix;
        CHECK(test::max_abs(a - b) == 0.0);
        CHECK(test::max_abs(a - slow.assemble(t).matrix) <= 1e-15);
    }
    const ReactionConvectionAssembler shifted(
        m, ops, std::make_shared<TimeShiftedCoefficients>(make_coefficient_preset("oscillating"), 1.5));
    CHECK(test::max_abs(shifted.assemble(0.25).matrix - fast.assemble(1.75).matrix) <= 1e-15);
}

TEST_CASE("oscillating coefficients: row sums converge to the exact reaction load at second order") {
    const double e16 = interior_relative_error(16);
    const double e32 = interior_relative_error(32);
    CHECK(e16 < 1e-2);
    const double ratio = e16 / e32;
    CHECK(ratio >= 3.0);
    CHECK(ratio <= 5.0);
}

TEST_CASE("constant convection: x^T C x equals the boundary flux term") {
    const Mesh m = build_mesh(16);
    const OperatorSet ops = assemble_static(m, 0.1, BoundaryCondition::neumann);
    const Point2 b{0.3, -0.7};
    const ReactionConvectionAssembler rc(m, ops, std::make_shared<ConstantCoefficients>(1.0, b));
    const SparseMatrix c = rc.assemble(0.0).matrix;
    std::mt19937_64 rng(7);
    const Vector x = test::random_vector(ops.size(), rng);
    const int n = m.n_div;
    const double h = m.h();
    auto id = [n](int i, int j) { return j * (n + 1) + i; };
    auto edge = [&](int v0, int v1) { return h / 3.0 * (x[v0] * x[v0] + x[v0] * x[v1] + x[v1] * x[v1]); };
    double flux = 0.0;
    for (int i = 0; i < n; ++i) {
        flux += -b.y * edge(id(i, 0), id(i + 1, 0));
        flux += b.y * edge(id(i, n), id(i + 1, n));
        flux += -b.x * edge(id(0, i), id(0, i + 1));
        flux += b.x * edge(id(n, i), id(n, i + 1));
    }
    CHECK(x.dot(c * x) == doctest::Approx(0.5 * flux).epsilon(1e-12));
}

TEST_CASE("generalized eigenvalues of (stiffness, mass) converge at second order") {
    auto eigenvalues = [](int n_div) {
        const Mesh m = build_mesh(n_div);
        const OperatorSet ops = assemble_static(m, 0.1, BoundaryCondition::neumann);
        Eigen::GeneralizedSelfAdjointEigenSolver<Matrix> es(Matrix(ops.stiffness), Matrix(ops.mass),
                                                            Eigen::EigenvaluesOnly);
        return Vector(es.eigenvalues().head(6));
    };
    const double pi2 = std::numbers::pi * std::numbers::pi;
    const Vector exact = (Vector(6) << 1.0, 1.0 + 0.1 * pi2, 1.0 + 0.1 * pi2, 1.0 + 0.2 * pi2, 1.0 + 0.4 * pi2,
                          1.0 + 0.4 * pi2)
                             .finished();
    const Vector l8 = eigenvalues(8), l16 = eigenvalues(16);
    CHECK(l16[0] == doctest::Approx(1.0).epsilon(1e-10));
    for (int k = 1; k < 6; ++k) {
        const double ratio = (l8[k] - exact[k]) / (l16[k] - exact[k]);
        CHECK(ratio >= 3.0);
        CHECK(ratio <= 5.0);
    }
}

TEST_CASE("indicator loads") {
    const Mesh m = build_mesh(16);
    const OperatorSet ops = assemble_static(m, 0.1, BoundaryCondition::neumann);
    const Vector whole = indicator_load(m, ops, {0.0, 1.0, 0.0, 1.0});
    CHECK((whole - ops.mass * Vector::Ones(ops.size())).cwiseAbs().maxCoeff() <= 1e-15);
    const Rect r{0.25, 0.5, 0.125, 0.6875};
    CHECK(indicator_load(m, ops, r).sum() == doctest::Approx(r.area()).epsilon(1e-14));
    const Vector small = indicator_load(m, ops, {0.0625, 0.1875, 0.0625, 0.1875});
    CHECK(std::abs(small.sum() - 0.015625) <= 1e-14);
    CHECK_THROWS_AS(indicator_load(m, ops, {0.1, 0.2, 0.1, 0.2}), GeometryError);
}
