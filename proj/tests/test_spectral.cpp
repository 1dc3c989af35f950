#include "support.hpp"

#include "orhc/checks.hpp"
#include "orhc/spectral.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>

using namespace orhc;

namespace {

struct Fixture {
    explicit Fixture(int n_div = 16, int count = 30)
        : mesh(build_mesh(n_div)),
          ops(assemble_static(mesh, 0.1, BoundaryCondition::neumann)),
          layout(build_layout(2, 0.5, mesh, ops)),
          basis(std::make_shared<EigenBasis>(compute_neumann_eigenbasis(ops, count))) {}
    Mesh mesh;
    OperatorSet ops;
    ActuatorSensorLayout layout;
    std::shared_ptr<const EigenBasis> basis;
};

const Fixture& shared() {
    static const Fixture f;
    return f;
}

}  // namespace

TEST_CASE("analytic Neumann spectrum with multiplicity") {
    const double pi2 = std::numbers::pi * std::numbers::pi;
    const auto s = analytic_neumann_spectrum(10);
    const double expected[] = {0, 1, 1, 2, 4, 4, 5, 5, 8, 9};
    for (int i = 0; i < 10; ++i) CHECK(s[static_cast<std::size_t>(i)] == doctest::Approx(expected[i] * pi2));
}

TEST_CASE("eigenbasis invariants") {
    const auto& f = shared();
    const EigenBasis& b = *f.basis;
    REQUIRE(b.count() == 30);
    CHECK(std::abs(b.values[0]) <= 1e-8);
    const Vector e0 = b.vectors.col(0);
    CHECK((e0.array() - e0.mean()).abs().maxCoeff() <= 1e-6 * std::abs(e0.mean()));
    const Matrix gram = b.vectors.transpose() * f.ops.mass * b.vectors;
    CHECK((gram - Matrix::Identity(30, 30)).cwiseAbs().maxCoeff() <= 1e-10);
    for (int i = 1; i < 30; ++i) CHECK(b.values[i] >= b.values[i - 1]);
    CHECK(std::abs(b.values[1] - b.values[2]) <= 1e-6 * b.values[1]);
    // the diagonal mesh lacks the full square symmetry, so (2,1)/(1,2) splits at O(h^2)
    CHECK(std::abs(b.values[6] - b.values[7]) <= 1e-2 * b.values[6]);
    for (int j = 0; j < 30; ++j) {
        const Vector v = b.vectors.col(j);
        const double tiny = 1e-8 * v.cwiseAbs().maxCoeff();
        Eigen::Index first = 0;
        while (std::abs(v[first]) <= tiny) ++first;
        CHECK(v[first] > 0.0);
    }
}

TEST_CASE("eigensolver is deterministic and rejects bad sizes") {
    const auto& f = shared();
    const EigenBasis again = compute_neumann_eigenbasis(f.ops, 30);
    CHECK((again.values - f.basis->values).cwiseAbs().maxCoeff() == 0.0);
    CHECK((again.vectors - f.basis->vectors).cwiseAbs().maxCoeff() == 0.0);
    CHECK_THROWS_AS(compute_neumann_eigenbasis(f.ops, 0), DimensionError);
    EigenSolverOptions tight;
    tight.max_iterations = 1;
    tight.residual_tol = 1e-300;
    CHECK_THROWS_AS(compute_neumann_eigenbasis(f.ops, 5, tight), SolverError);
}

TEST_CASE("eigenvalue error drops by about four per refinement") {
    const auto& coarse = shared();
    const Fixture fine(32, 12);
    const auto exact = analytic_neumann_spectrum(12);
    for (int i = 1; i < 12; ++i) {
        const double e = exact[static_cast<std::size_t>(i)];
        const double ratio = (coarse.basis->values[i] - e) / (fine.basis->values[i] - e);
        CHECK(ratio >= 3.0);
        CHECK(ratio <= 5.0);
    }
}

TEST_CASE("eigen-projection penalty") {
    const auto& f = shared();
    const double scale = std::sqrt(800.0);
    const auto q = PenaltyOperator::eig_projection(f.ops, f.basis, scale);
    CHECK(q.coordinate_size() == 30);
    std::mt19937_64 rng(1);

    SUBCASE("eigenvectors map to scaled unit coordinates") {
        for (int k : {0, 5, 29}) {
            const Vector c = apply_penalty(q, f.basis->vectors.col(k));
            CHECK((c - scale * Vector::Unit(30, k)).cwiseAbs().maxCoeff() <= 1e-9);
        }
    }
    SUBCASE("states orthogonal to the basis give zero") {
        Vector y = test::random_vector(f.ops.size(), rng);
        y -= f.basis->vectors * (f.basis->vectors.transpose() * (f.ops.mass * y));
        CHECK(apply_penalty(q, y).norm() <= 1e-10 * f.ops.mass_norm(y));
        CHECK(penalty_adjoint_source(q, y).norm() <= 1e-10 * f.ops.mass_norm(y));
    }
    SUBCASE("squared norm two ways and duality") {
        for (int trial = 0; trial < 10; ++trial) {
            const Vector y = test::random_vector(f.ops.size(), rng);
            const Vector z = test::random_vector(f.ops.size(), rng);
            const Vector qy = apply_penalty(q, y);
            const double direct = q.norm_sq(qy);
            const Vector emy = f.basis->vectors.transpose() * (f.ops.mass * y);
            CHECK(direct == doctest::Approx(800.0 * emy.squaredNorm()).epsilon(1e-10));
            CHECK(-penalty_adjoint_source(q, y).dot(y) == doctest::Approx(direct).epsilon(1e-10));
            CHECK(-penalty_adjoint_source(q, y).dot(z) == doctest::Approx(qy.dot(apply_penalty(q, z))).epsilon(1e-10));
        }
    }
    SUBCASE("more eigenvectors never decrease the projected norm") {
        auto sub = std::make_shared<EigenBasis>();
        sub->values = f.basis->values.head(10);
        sub->vectors = f.basis->vectors.leftCols(10);
        const auto q10 = PenaltyOperator::eig_projection(f.ops, sub, 1.0);
        const auto q30 = PenaltyOperator::eig_projection(f.ops, f.basis, 1.0);
        for (int trial = 0; trial < 10; ++trial) {
            const Vector y = test::random_vector(f.ops.size(), rng);
            CHECK(q10.norm_sq(q10.apply(y)) <= q30.norm_sq(q30.apply(y)) * (1 + 1e-14));
        }
    }
    SUBCASE("zero scale") {
        const auto q0 = PenaltyOperator::eig_projection(f.ops, f.basis, 0.0);
        CHECK(penalty_adjoint_source(q0, test::random_vector(f.ops.size(), rng)).cwiseAbs().maxCoeff() == 0.0);
    }
}

TEST_CASE("other penalty kinds") {
    const auto& f = shared();
    std::mt19937_64 rng(2);
    const Vector y = test::random_vector(f.ops.size(), rng);
    const auto id = PenaltyOperator::identity(f.ops, 2.0);
    CHECK(id.norm_sq(id.apply(y)) == doctest::Approx(4.0 * f.ops.mass_norm(y) * f.ops.mass_norm(y)));
    const auto sa = PenaltyOperator::sqrt_A(f.ops, 3.0);
    CHECK(sa.norm_sq(sa.apply(y)) == doctest::Approx(9.0 * y.dot(f.ops.stiffness * y)));
    const auto se = PenaltyOperator::sensors(f.layout, 0.5);
    CHECK(se.norm_sq(se.apply(y)) == doctest::Approx(0.25 * measure_output(f.layout, y).squaredNorm()));
    for (const auto* q : {&id, &sa, &se}) {
        const Vector z = test::random_vector(f.ops.size(), rng);
        CHECK(-penalty_adjoint_source(*q, y).dot(z) ==
              doctest::Approx(q->norm_sq(q->apply(y) + q->apply(z)) / 2 - q->norm_sq(q->apply(y)) / 2 -
                              q->norm_sq(q->apply(z)) / 2));
    }
    CHECK_THROWS_AS(PenaltyOperator::identity(f.ops, -1.0), ConfigError);
    CHECK_THROWS_AS(PenaltyOperator::eig_projection(f.ops, nullptr, 1.0), ConfigError);
    CHECK_THROWS_AS(id.apply(Vector::Zero(3)), DimensionError);
    for (auto k : {PenaltyKind::eig_projection, PenaltyKind::identity, PenaltyKind::sensors, PenaltyKind::sqrt_A}) {
        CHECK(penalty_kind_from_string(to_string(k)) == k);
    }
    CHECK_THROWS_AS(penalty_kind_from_string("riccati"), ConfigError);
}
