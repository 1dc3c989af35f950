#include "support.hpp"

#include "orhc/layout.hpp"
#include "orhc/linear_solver.hpp"

#include <doctest.h>

#include <Eigen/LU>
#include <Eigen/SparseLU>

#include <vector>

using namespace orhc;

namespace {

using ColMatrix = Eigen::SparseMatrix<double, Eigen::ColMajor, int>;

struct Fixture {
    Fixture()
        : mesh(build_mesh(16)),
          ops(assemble_static(mesh, 0.1, BoundaryCondition::neumann)),
          layout(build_layout(2, 0.5, mesh, ops)),
          rc(mesh, ops, make_coefficient_preset("oscillating")) {
        const double h = 2e-4;
        a = SparseMatrix(ops.mass + h * (ops.stiffness + rc.assemble(0.3).matrix));
        a.makeCompressed();
        csr.assign(a.valuePtr(), a.valuePtr() + a.nonZeros());
        const Matrix w = Matrix::Identity(8, 8) * 3.0 + Matrix::Constant(8, 8, 0.5);
        low_rank = LowRankTerm(layout.sensor_loads, w);
        dense_low_rank = layout.sensor_loads * w * layout.sensor_loads.transpose();
    }
    std::vector<double> storage(const StepSolver& s) const {
        std::vector<double> out(s.storage_size());
        s.to_storage(csr, out);
        return out;
    }
    Mesh mesh;
    OperatorSet ops;
    ActuatorSensorLayout layout;
    ReactionConvectionAssembler rc;
    SparseMatrix a;
    std::vector<double> csr;
    LowRankTerm low_rank;
    Matrix dense_low_rank;
};

Vector reference_solve(const SparseMatrix& a, const Vector& b) {
    Eigen::SparseLU<ColMatrix> lu(ColMatrix(a.transpose()).transpose());
    return lu.solve(b);
}

const LinearSolverOptions kBanded{LinearSolverKind::bicgstab, 1e-13, 1000, true};
const LinearSolverOptions kCsr{LinearSolverKind::bicgstab, 1e-13, 1000, false};
const LinearSolverOptions kDirect{LinearSolverKind::direct, 1e-13, 1000, true};

}  // namespace

TEST_CASE("storage layout selection") {
    Fixture f;
    const StepSolver banded(f.a, kBanded);
    CHECK(banded.banded());
    CHECK(banded.storage_size() == 7u * static_cast<std::size_t>(f.a.rows()));
    const StepSolver csr(f.a, kCsr);
    CHECK_FALSE(csr.banded());
    CHECK(csr.storage_size() == f.csr.size());
    CHECK_FALSE(StepSolver(f.a, kDirect).banded());
    const auto& pos = banded.slot_positions();
    std::vector<int> sorted(pos.begin(), pos.end());
    std::sort(sorted.begin(), sorted.end());
    CHECK(std::adjacent_find(sorted.begin(), sorted.end()) == sorted.end());
}

TEST_CASE("banded, compressed-row and direct backends agree with a reference LU") {
    Fixture f;
    std::mt19937_64 rng(17);
    const Vector b = test::random_vector(f.a.rows(), rng);
    const Vector ref = reference_solve(f.a, b);
    const SparseMatrix at = f.a.transpose();
    const Vector ref_t = reference_solve(at, b);
    for (const auto& opt : {kBanded, kCsr, kDirect}) {
        StepSolver s(f.a, opt);
        const auto vals = f.storage(s);
        Vector x = Vector::Zero(b.size());
        s.solve(vals, nullptr, b, x, 0);
        CHECK((x - ref).norm() <= 1e-10 * ref.norm());
        Vector xt = Vector::Zero(b.size());
        s.solve(vals, nullptr, b, xt, 0, true);
        CHECK((xt - ref_t).norm() <= 1e-10 * ref_t.norm());
        Vector y;
        s.multiply(vals, nullptr, ref, y);
        CHECK((y - b).norm() <= 1e-12 * b.norm());
        s.multiply(vals, nullptr, ref_t, y, true);
        CHECK((y - b).norm() <= 1e-12 * b.norm());
    }
}

TEST_CASE("low-rank term is added to the system matrix") {
    Fixture f;
    std::mt19937_64 rng(19);
    const Vector b = test::random_vector(f.a.rows(), rng);
    const Matrix dense = Matrix(f.a) + f.dense_low_rank;
    const Vector ref = dense.partialPivLu().solve(b);
    const Vector ref_t = dense.transpose().partialPivLu().solve(b);
    for (const auto& opt : {kBanded, kCsr, kDirect}) {
        StepSolver s(f.a, opt);
        const auto vals = f.storage(s);
        Vector x = Vector::Zero(b.size());
        s.solve(vals, &f.low_rank, b, x, 0);
        CHECK((x - ref).norm() <= 1e-10 * ref.norm());
        Vector xt = Vector::Zero(b.size());
        s.solve(vals, &f.low_rank, b, xt, 0, true);
        CHECK((xt - ref_t).norm() <= 1e-10 * ref_t.norm());
        Vector y;
        s.multiply(vals, &f.low_rank, ref, y);
        CHECK((y - b).norm() <= 1e-12 * b.norm());
    }
    const Vector x = test::random_vector(f.a.rows(), rng);
    Vector out = Vector::Zero(x.size());
    f.low_rank.apply_add(x, 2.0, out);
    CHECK((out - 2.0 * f.dense_low_rank * x).norm() <= 1e-13 * out.norm());
    CHECK((f.low_rank.diagonal - f.dense_low_rank.diagonal()).cwiseAbs().maxCoeff() <= 1e-15);
}

TEST_CASE("linear combinations of stored matrices") {
    Fixture f;
    std::mt19937_64 rng(23);
    std::vector<double> mass_csr(f.ops.mass.valuePtr(), f.ops.mass.valuePtr() + f.ops.mass.nonZeros());
    REQUIRE(mass_csr.size() == f.csr.size());
    const Vector x = test::random_vector(f.a.rows(), rng);
    const Vector ref = 2.0 * (f.ops.mass * x) - f.a * x;
    const Vector ref_t = 2.0 * (f.ops.mass * x) - f.a.transpose() * x;
    for (const auto& opt : {kBanded, kCsr}) {
        const StepSolver s(f.a, opt);
        std::vector<double> m(s.storage_size()), a(s.storage_size());
        s.to_storage(mass_csr, m);
        s.to_storage(f.csr, a);
        Vector y;
        s.multiply_combination(m, 2.0, a, -1.0, x, y);
        CHECK((y - ref).norm() <= 1e-13 * ref.norm());
        s.multiply_combination(m, 2.0, a, -1.0, x, y, true);
        CHECK((y - ref_t).norm() <= 1e-13 * ref_t.norm());
    }
}

TEST_CASE("warm start and iteration bookkeeping") {
    Fixture f;
    std::mt19937_64 rng(29);
    const Vector b = test::random_vector(f.a.rows(), rng);
    StepSolver s(f.a, kBanded);
    const auto vals = f.storage(s);
    Vector x = Vector::Zero(b.size());
    s.solve(vals, nullptr, b, x, 0);
    const int cold = s.last_iterations();
    CHECK(cold > 0);
    s.solve(vals, nullptr, b, x, 1);
    CHECK(s.last_iterations() <= 1);
    CHECK(s.total_iterations() == cold + s.last_iterations());
}

TEST_CASE("solver failures carry the step index") {
    Fixture f;
    StepSolver s(f.a, kBanded);
    const auto vals = f.storage(s);
    Vector b = Vector::Ones(f.a.rows());
    b[3] = std::numeric_limits<double>::quiet_NaN();
    Vector x = Vector::Zero(b.size());
    try {
        s.solve(vals, nullptr, b, x, 42);
        FAIL("expected a solver error");
    } catch (const SolverError& e) {
        CHECK(e.step() == 42);
    }
    LinearSolverOptions starved = kBanded;
    starved.max_iterations = 1;
    StepSolver t(f.a, starved);
    x.setZero();
    CHECK_THROWS_AS(t.solve(f.storage(t), nullptr, Vector::Ones(f.a.rows()), x, 0), SolverError);
    CHECK(linear_solver_kind_from_string(to_string(LinearSolverKind::direct)) == LinearSolverKind::direct);
    CHECK_THROWS_AS(linear_solver_kind_from_string("cg"), ConfigError);
}

TEST_CASE("transpose permutation") {
    Fixture f;
    const auto perm = transpose_permutation(f.a);
    std::vector<double> out(f.csr.size());
    for (std::size_t k = 0; k < f.csr.size(); ++k) out[static_cast<std::size_t>(perm[k])] = f.csr[k];
    SparseMatrix t = f.a.transpose();
    t.makeCompressed();
    REQUIRE(t.nonZeros() == f.a.nonZeros());
    for (std::size_t k = 0; k < out.size(); ++k) CHECK(out[k] == t.valuePtr()[k]);
}
