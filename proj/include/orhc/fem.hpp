#pragma once

#include "orhc/mesh.hpp"
#include "orhc/types.hpp"

#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace orhc {

enum class BoundaryCondition { neumann, dirichlet };

std::string to_string(BoundaryCondition bc);
BoundaryCondition boundary_condition_from_string(const std::string& s);

/// Static P1 operators on the free degrees of freedom.
///
/// All matrices share one sparsity pattern (every vertex pair that meets in a
/// triangle), so value arrays can be combined entry by entry.
struct OperatorSet {
    double nu = 0.0;
    BoundaryCondition bc = BoundaryCondition::neumann;
    std::vector<int> dof_to_vertex;
    std::vector<int> vertex_to_dof;  ///< -1 for eliminated vertices
    SparseMatrix mass;               ///< (phi_j, phi_i)
    SparseMatrix laplacian;          ///< (grad phi_j, grad phi_i)
    SparseMatrix stiffness;          ///< nu * laplacian + mass, weak form of -nu Lap + 1

    Eigen::Index size() const { return mass.rows(); }
    double mass_norm(const Vector& v) const;
    double mass_inner(const Vector& a, const Vector& b) const;

    /// Nodal interpolant of a function on the free degrees of freedom.
    Vector interpolate(const Mesh& mesh, const std::function<double(Point2)>& f) const;
};

OperatorSet assemble_static(const Mesh& mesh, double nu, BoundaryCondition bc);

/// Component i is the integral of phi_i over the rectangle. The rectangle is a
/// union of whole triangles, so each inner triangle contributes area/3 per vertex.
Vector indicator_load(const Mesh& mesh, const OperatorSet& ops, const Rect& rect);

/// Reaction coefficient a(x, t) and convection field b(x, t) of
/// y' - nu Lap y + a y + b . grad y = f (written as A + A_rc with A_rc = (a-1) + b . grad).
class CoefficientField {
public:
    virtual ~CoefficientField() = default;
    virtual double reaction(Point2 x, double t) const = 0;
    virtual Point2 convection(Point2 x, double t) const = 0;
    virtual std::string name() const = 0;

    using BatchEvaluator = std::function<void(double t, std::span<double> a, std::span<Point2> b)>;
    /// Evaluator for a fixed set of points. The default loops over reaction()
    /// and convection(); presets may precompute point-only factors.
    virtual BatchEvaluator bind(std::vector<Point2> points) const;
};

/// a(x,t) = -1/2 + x1 - |sin(6t + x1)|,  b(x,t) = (x1 + x2, |cos(6t) x1 x2|).
class OscillatingCoefficients final : public CoefficientField {
public:
    double reaction(Point2 x, double t) const override;
    Point2 convection(Point2 x, double t) const override;
    std::string name() const override { return "oscillating"; }
    BatchEvaluator bind(std::vector<Point2> points) const override;
};

class ConstantCoefficients final : public CoefficientField {
public:
    ConstantCoefficients(double a, Point2 b) : a_(a), b_(b) {}
    double reaction(Point2, double) const override { return a_; }
    Point2 convection(Point2, double) const override { return b_; }
    std::string name() const override { return "constant"; }

private:
    double a_;
    Point2 b_;
};

class FunctionCoefficients final : public CoefficientField {
public:
    FunctionCoefficients(std::function<double(Point2, double)> a,
                         std::function<Point2(Point2, double)> b, std::string name = "function")
        : a_(std::move(a)), b_(std::move(b)), name_(std::move(name)) {}
    double reaction(Point2 x, double t) const override { return a_(x, t); }
    Point2 convection(Point2 x, double t) const override { return b_(x, t); }
    std::string name() const override { return name_; }

private:
    std::function<double(Point2, double)> a_;
    std::function<Point2(Point2, double)> b_;
    std::string name_;
};

/// Evaluates a base field at t + shift.
class TimeShiftedCoefficients final : public CoefficientField {
public:
    TimeShiftedCoefficients(std::shared_ptr<const CoefficientField> base, double shift)
        : base_(std::move(base)), shift_(shift) {}
    double reaction(Point2 x, double t) const override { return base_->reaction(x, t + shift_); }
    Point2 convection(Point2 x, double t) const override { return base_->convection(x, t + shift_); }
    std::string name() const override { return base_->name() + "+shift"; }
    BatchEvaluator bind(std::vector<Point2> points) const override;

private:
    std::shared_ptr<const CoefficientField> base_;
    double shift_;
};

std::shared_ptr<const CoefficientField> make_coefficient_preset(const std::string& name);

struct ReactionConvectionAssembly {
    double assembled_at = 0.0;
    SparseMatrix matrix;  ///< (a-1) phi_j phi_i + (b . grad phi_j) phi_i, generally nonsymmetric
};

/// Assembles the time-dependent reaction-convection matrix with the one-point
/// centroid rule. Holds only immutable data after construction; assemble_values
/// may be called concurrently as long as each caller owns its output buffer.
class ReactionConvectionAssembler {
public:
    ReactionConvectionAssembler(const Mesh& mesh, const OperatorSet& ops,
                                std::shared_ptr<const CoefficientField> coeffs);

    /// Writes the matrix values, in the shared pattern's storage order, into out.
    void assemble_values(double t, std::span<double> out) const;
    ReactionConvectionAssembly assemble(double t) const;

    const SparseMatrix& pattern() const { return pattern_; }
    const CoefficientField& coefficients() const { return *coeffs_; }
    std::shared_ptr<const CoefficientField> coefficients_ptr() const { return coeffs_; }

private:
    struct Element {
        double area;
        std::array<Point2, 3> grad;
        std::array<int, 9> slot;  ///< value index for (p, q); -1 when eliminated
    };
    SparseMatrix pattern_;
    std::vector<Element> elements_;
    std::shared_ptr<const CoefficientField> coeffs_;
    CoefficientField::BatchEvaluator evaluate_;
};

/// Storage index of entry (row, col) in a compressed row-major matrix, or -1.
int value_slot(const SparseMatrix& m, int row, int col);

}  // namespace orhc
