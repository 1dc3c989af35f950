#pragma once

#include "orhc/fem.hpp"
#include "orhc/layout.hpp"
#include "orhc/types.hpp"

#include <cstdint>
#include <memory>
#include <string>

namespace orhc {

/// Leading generalized eigenpairs of (laplacian, mass), ascending.
struct EigenBasis {
    Vector values;   ///< eigenvalues of -Lap in weak form
    Matrix vectors;  ///< N x count, mass-orthonormal columns
    int iterations = 0;

    int count() const { return static_cast<int>(values.size()); }
};

struct EigenSolverOptions {
    int extra_vectors = 20;  ///< block size is count + extra_vectors
    int max_iterations = 1000;
    double residual_tol = 1e-10;
    std::uint64_t seed = 20240613;
};

/// Shift-invert subspace iteration on (laplacian + mass) with a dense
/// Rayleigh-Ritz step per sweep. Throws SolverError when the residuals do not
/// drop below the tolerance within the iteration budget.
EigenBasis compute_neumann_eigenbasis(const OperatorSet& ops, int count,
                                      const EigenSolverOptions& opt = {});

enum class PenaltyKind { eig_projection, identity, sensors, sqrt_A };

std::string to_string(PenaltyKind k);
PenaltyKind penalty_kind_from_string(const std::string& s);

/// State penalization Q. A state y is mapped to coordinates c = scale * R y
/// in H_Q, with ||Qy||^2 = c^T G c:
///   eig_projection  R = E^T M, G = I
///   identity        R = I,     G = M
///   sensors         R = Z,     G = I
///   sqrt_A          R = I,     G = stiffness
class PenaltyOperator {
public:
    static PenaltyOperator eig_projection(const OperatorSet& ops, std::shared_ptr<const EigenBasis> basis,
                                          double scale);
    static PenaltyOperator identity(const OperatorSet& ops, double scale);
    static PenaltyOperator sensors(const ActuatorSensorLayout& layout, double scale);
    static PenaltyOperator sqrt_A(const OperatorSet& ops, double scale);

    PenaltyKind kind() const { return kind_; }
    double scale() const { return scale_; }
    const EigenBasis* basis() const { return basis_.get(); }
    Eigen::Index state_size() const { return n_; }
    Eigen::Index coordinate_size() const;

    /// Q y as coordinates in H_Q.
    Vector apply(const Vector& y) const;
    /// Squared H_Q norm of a coordinate vector returned by apply().
    double norm_sq(const Vector& coords) const;
    /// Load of Q^* applied to coordinates; load_from(apply(y)) is the load of Q^*Q y.
    Vector load_from(const Vector& coords) const;

private:
    PenaltyKind kind_ = PenaltyKind::identity;
    double scale_ = 0.0;
    Eigen::Index n_ = 0;
    std::shared_ptr<const EigenBasis> basis_;
    Matrix dense_;        ///< M E (eig_projection) or sensor loads (sensors)
    SparseMatrix gram_;   ///< mass (identity) or stiffness (sqrt_A)
};

Vector apply_penalty(const PenaltyOperator& q, const Vector& y);

/// Load of -Q^*Q y, the adjoint source.
Vector penalty_adjoint_source(const PenaltyOperator& q, const Vector& y);

}  // namespace orhc
