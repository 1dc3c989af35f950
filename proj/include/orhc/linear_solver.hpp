#pragma once

#include "orhc/types.hpp"

#include <memory>
#include <span>
#include <string>
#include <vector>

namespace orhc {

enum class LinearSolverKind { bicgstab, direct };

std::string to_string(LinearSolverKind k);
LinearSolverKind linear_solver_kind_from_string(const std::string& s);

struct LinearSolverOptions {
    LinearSolverKind kind = LinearSolverKind::bicgstab;
    double rel_tol = 1e-13;  ///< on ||b - Ax|| / ||b||
    int max_iterations = 1000;
    bool allow_banded = true;  ///< diagonal-wise storage for patterns with few diagonals
};

/// Symmetric low-rank term U W U^T added to a system matrix.
struct LowRankTerm {
    Eigen::SparseMatrix<double, Eigen::ColMajor, int> u;
    Matrix w;
    Vector diagonal;                                       ///< diag(U W U^T)
    Eigen::SparseMatrix<double, Eigen::ColMajor, int> explicit_form;

    LowRankTerm() = default;
    LowRankTerm(const Matrix& u_dense, Matrix w_);

    /// out += alpha * U W U^T x
    void apply_add(const Vector& x, double alpha, Vector& out) const;
    /// out += alpha * U W c, for c = U^T x already known.
    void apply_add_reduced(const Vector& c, double alpha, Vector& out) const;
};

/// Solves A x = b for matrices sharing one fixed sparsity pattern, optionally
/// plus a LowRankTerm. Matrices are passed as value arrays in the solver's
/// storage layout (see to_storage): compressed rows, or diagonal-wise storage
/// when the pattern has few distinct diagonals and the backend is iterative.
/// Not thread safe; use one instance per integration.
class StepSolver {
public:
    StepSolver(const SparseMatrix& pattern, LinearSolverOptions opt);
    ~StepSolver();
    StepSolver(StepSolver&&) noexcept;
    StepSolver& operator=(StepSolver&&) noexcept;

    bool banded() const { return !offsets_.empty(); }
    std::size_t storage_size() const;
    /// Storage index of each compressed-row slot of the pattern.
    const std::vector<int>& slot_positions() const { return position_; }
    /// Writes matrix values given in compressed-row order into storage layout.
    void to_storage(std::span<const double> csr, std::span<double> out) const;

    /// Solves A x = b, or A^T x = b when transpose is set. On entry x holds the
    /// initial guess (ignored by the direct backend).
    void solve(std::span<const double> values, const LowRankTerm* low_rank, const Vector& b, Vector& x,
               long step, bool transpose = false);

    /// y = A x (or A^T x).
    void multiply(std::span<const double> values, const LowRankTerm* low_rank, const Vector& x, Vector& y,
                  bool transpose = false) const;

    /// y = (alpha P + beta Q) x for two matrices in storage layout.
    void multiply_combination(std::span<const double> p, double alpha, std::span<const double> q, double beta,
                              const Vector& x, Vector& y, bool transpose = false) const;

    int last_iterations() const { return last_iterations_; }
    long total_iterations() const { return total_iterations_; }
    const LinearSolverOptions& options() const { return opt_; }

private:
    void solve_krylov(std::span<const double> values, const LowRankTerm* low_rank, const Vector& b, Vector& x,
                      long step, bool transpose);
    void solve_direct(std::span<const double> values, const LowRankTerm* low_rank, const Vector& b, Vector& x,
                      long step, bool transpose);
    void apply(const double* p, double alpha, const double* q, double beta, const double* x, double* y,
               bool transpose) const;

    LinearSolverOptions opt_;
    Eigen::Index n_ = 0;
    std::vector<int> outer_;
    std::vector<int> inner_;
    std::vector<int> offsets_;   ///< column minus row per stored diagonal; empty for compressed rows
    std::vector<int> position_;  ///< storage index per pattern slot
    std::vector<int> diag_pos_;  ///< storage index of each diagonal entry
    Vector inv_diag_, r_, rhat_, p_, v_, s_, t_, phat_, shat_;
    int last_iterations_ = 0;
    long total_iterations_ = 0;

    struct Direct;
    std::unique_ptr<Direct> direct_;
};

/// Position map such that transposed values are out[perm[k]] = in[k]. The
/// pattern must be structurally symmetric.
std::vector<int> transpose_permutation(const SparseMatrix& pattern);

}  // namespace orhc
