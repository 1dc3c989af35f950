#include "orhc/spectral.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace orhc {

namespace {

void canonicalize_sign(Eigen::Ref<Vector> v) {
    const double tiny = 1e-8 * v.cwiseAbs().maxCoeff();
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        if (std::abs(v[i]) > tiny) {
            if (v[i] < 0.0) v = -v;
            return;
        }
    }
}

Eigen::Index argmax_abs(const Vector& v) {
    Eigen::Index idx = 0;
    v.cwiseAbs().maxCoeff(&idx);
    return idx;
}

}  // namespace

EigenBasis compute_neumann_eigenbasis(const OperatorSet& ops, int count, const EigenSolverOptions& opt) {
    const Eigen::Index n = ops.size();
    if (count < 1 || count > n) {
        throw DimensionError("eigenbasis size must lie in [1, " + std::to_string(n) + "]");
    }
    const Eigen::Index p = std::min<Eigen::Index>(n, count + std::max(opt.extra_vectors, 1));

    using ColMatrix = Eigen::SparseMatrix<double, Eigen::ColMajor, int>;
    const ColMatrix shifted = ColMatrix(ops.laplacian) + ColMatrix(ops.mass);
    Eigen::SimplicialLDLT<ColMatrix> factor(shifted);
    if (factor.info() != Eigen::Success) {
        throw SolverError("factorization of the shifted Laplacian failed");
    }

    std::mt19937_64 rng(opt.seed);
    std::uniform_real_distribution<double> unif(-1.0, 1.0);
    Matrix y(n, p);
    for (Eigen::Index j = 0; j < p; ++j) {
        for (Eigen::Index i = 0; i < n; ++i) y(i, j) = unif(rng);
    }

    EigenBasis out;
    Vector values;
    for (int it = 1; it <= opt.max_iterations; ++it) {
        const Matrix z = factor.solve(Matrix(ops.mass * y));
        const Matrix kz = ops.laplacian * z;
        const Matrix mz = ops.mass * z;
        Matrix kr = z.transpose() * kz;
        Matrix mr = z.transpose() * mz;
        kr = 0.5 * (kr + kr.transpose()).eval();
        mr = 0.5 * (mr + mr.transpose()).eval();
        Eigen::GeneralizedSelfAdjointEigenSolver<Matrix> ritz(kr, mr);
        if (ritz.info() != Eigen::Success) {
            throw SolverError("Rayleigh-Ritz step failed in the eigensolver");
        }
        values = ritz.eigenvalues();
        y = z * ritz.eigenvectors();

        const Matrix ky = kz * ritz.eigenvectors();
        const Matrix my = mz * ritz.eigenvectors();
        double worst = 0.0;
        for (int j = 0; j < count; ++j) {
            const double r = (ky.col(j) - values[j] * my.col(j)).norm();
            const double ref = (std::abs(values[j]) + 1.0) * my.col(j).norm();
            worst = std::max(worst, r / ref);
        }
        if (worst <= opt.residual_tol) {
            out.iterations = it;
            break;
        }
    }
    if (out.iterations == 0) {
        throw SolverError("eigensolver did not converge within " + std::to_string(opt.max_iterations) +
                          " iterations");
    }

    out.values = values.head(count);
    out.values[0] = std::max(out.values[0], 0.0);
    out.vectors = y.leftCols(count);
    for (int j = 0; j < count; ++j) canonicalize_sign(out.vectors.col(j));

    // Reorder each cluster of (numerically) equal eigenvalues by the position
    // of the largest coefficient.
    int start = 0;
    while (start < count) {
        int end = start + 1;
        while (end < count &&
               std::abs(out.values[end] - out.values[start]) <= 1e-8 * std::max(1.0, std::abs(out.values[start]))) {
            ++end;
        }
        if (end - start > 1) {
            std::vector<int> order(static_cast<std::size_t>(end - start));
            std::iota(order.begin(), order.end(), start);
            std::vector<Eigen::Index> key(static_cast<std::size_t>(count));
            for (int j = start; j < end; ++j) key[static_cast<std::size_t>(j)] = argmax_abs(out.vectors.col(j));
            std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
                return key[static_cast<std::size_t>(a)] < key[static_cast<std::size_t>(b)];
            });
            const Matrix block = out.vectors.middleCols(start, end - start);
            const Vector vals = out.values.segment(start, end - start);
            for (int j = 0; j < end - start; ++j) {
                out.vectors.col(start + j) = block.col(order[static_cast<std::size_t>(j)] - start);
                out.values[start + j] = vals[order[static_cast<std::size_t>(j)] - start];
            }
        }
        start = end;
    }
    return out;
}

std::string to_string(PenaltyKind k) {
    switch (k) {
        case PenaltyKind::eig_projection: return "eig_projection";
        case PenaltyKind::identity: return "identity";
        case PenaltyKind::sensors: return "sensors";
        case PenaltyKind::sqrt_A: return "sqrt_A";
    }
    return "unknown";
}

PenaltyKind penalty_kind_from_string(const std::string& s) {
    if (s == "eig_projection") return PenaltyKind::eig_projection;
    if (s == "identity") return PenaltyKind::identity;
    if (s == "sensors") return PenaltyKind::sensors;
    if (s == "sqrt_A") return PenaltyKind::sqrt_A;
    throw ConfigError("unknown penalty kind '" + s + "'");
}

namespace {

void check_scale(double scale) {
    if (!(scale >= 0.0) || !std::isfinite(scale)) {
        throw ConfigError("penalty scale must be a non-negative number");
    }
}

}  // namespace

PenaltyOperator PenaltyOperator::eig_projection(const OperatorSet& ops, std::shared_ptr<const EigenBasis> basis,
                                                double scale) {
    check_scale(scale);
    if (!basis) throw ConfigError("eig_projection penalty needs an eigenbasis");
    require_size(basis->vectors.rows(), ops.size(), "eig_projection basis");
    PenaltyOperator q;
    q.kind_ = PenaltyKind::eig_projection;
    q.scale_ = scale;
    q.n_ = ops.size();
    q.dense_ = ops.mass * basis->vectors;
    q.basis_ = std::move(basis);
    return q;
}

PenaltyOperator PenaltyOperator::identity(const OperatorSet& ops, double scale) {
    check_scale(scale);
    PenaltyOperator q;
    q.kind_ = PenaltyKind::identity;
    q.scale_ = scale;
    q.n_ = ops.size();
    q.gram_ = ops.mass;
    return q;
}

PenaltyOperator PenaltyOperator::sensors(const ActuatorSensorLayout& layout, double scale) {
    check_scale(scale);
    PenaltyOperator q;
    q.kind_ = PenaltyKind::sensors;
    q.scale_ = scale;
    q.n_ = layout.state_size();
    q.dense_ = layout.sensor_loads;
    return q;
}

PenaltyOperator PenaltyOperator::sqrt_A(const OperatorSet& ops, double scale) {
    check_scale(scale);
    PenaltyOperator q;
    q.kind_ = PenaltyKind::sqrt_A;
    q.scale_ = scale;
    q.n_ = ops.size();
    q.gram_ = ops.stiffness;
    return q;
}

Eigen::Index PenaltyOperator::coordinate_size() const {
    return dense_.size() > 0 ? dense_.cols() : n_;
}

Vector PenaltyOperator::apply(const Vector& y) const {
    require_size(y.size(), n_, "apply_penalty");
    if (dense_.size() > 0) return scale_ * (dense_.transpose() * y);
    return scale_ * y;
}

double PenaltyOperator::norm_sq(const Vector& coords) const {
    require_size(coords.size(), coordinate_size(), "penalty norm");
    if (dense_.size() > 0) return coords.squaredNorm();
    return coords.dot(gram_ * coords);
}

Vector PenaltyOperator::load_from(const Vector& coords) const {
    require_size(coords.size(), coordinate_size(), "penalty load");
    if (dense_.size() > 0) return scale_ * (dense_ * coords);
    return scale_ * (gram_ * coords);
}

Vector apply_penalty(const PenaltyOperator& q, const Vector& y) { return q.apply(y); }

Vector penalty_adjoint_source(const PenaltyOperator& q, const Vector& y) {
    return -q.load_from(q.apply(y));
}

}  // namespace orhc
