#pragma once

#include "ddn/types.hpp"

#include <iosfwd>
#include <limits>
#include <map>
#include <optional>

namespace ddn::lmi {

/// Affine matrix-valued expression in the scalar decision variables of one
/// SdpProblem: constant + sum_i y_i * coeff_i.
class LinExpr {
  public:
    LinExpr() = default;
    explicit LinExpr(Mat constant_part) : constant(std::move(constant_part)) {}
    static LinExpr zero(Eigen::Index r, Eigen::Index c) { return LinExpr(Mat::Zero(r, c)); }

    Eigen::Index rows() const { return constant.rows(); }
    Eigen::Index cols() const { return constant.cols(); }

    LinExpr transpose() const;
    LinExpr operator-() const;
    LinExpr& operator+=(const LinExpr& other);
    LinExpr& operator-=(const LinExpr& other);

    Mat eval(const Vec& y) const;

    Mat constant;
    std::map<int, Mat> coeffs;  // scalar variable index -> coefficient matrix
};

LinExpr operator+(LinExpr a, const LinExpr& b);
LinExpr operator-(LinExpr a, const LinExpr& b);
LinExpr operator*(const Mat& left, const LinExpr& e);
LinExpr operator*(const LinExpr& e, const Mat& right);
LinExpr operator*(double scale, LinExpr e);

/// Two-sided symmetrization Sym{E} = E + E^T.
LinExpr sym_sum(const LinExpr& e);
/// Kronecker product with a constant factor on the left.
LinExpr kron_const(const Mat& a, const LinExpr& e);
/// Dense block assembly; all rows/columns must be dimension-consistent.
LinExpr block_matrix(const std::vector<std::vector<LinExpr>>& blocks);
/// Trace as a 1x1 expression.
LinExpr trace_of(const LinExpr& e);
/// Scalar expression times a constant matrix.
LinExpr scale_by(const LinExpr& scalar_1x1, const Mat& m);

struct VarId {
    int first = -1;  // first scalar index
    int count = 0;
    Eigen::Index rows = 0, cols = 0;
    bool symmetric = false;
};

enum class SdpStatus { Feasible, Infeasible, NumericalFailure };

struct SdpSolution {
    SdpStatus status = SdpStatus::NumericalFailure;
    Vec y;                        // all scalar variables
    double worst_residual = 0.0;  // max over blocks of max(0, -lambda_min)
    double objective = std::numeric_limits<double>::quiet_NaN();
    double margin = 0.0;          // best phase-1 slack reached
    std::string message;

    bool feasible() const { return status == SdpStatus::Feasible; }
};

struct SdpOptions {
    double strict_margin = 1e-6;   // delta_def for strict inequalities
    double var_bound = 1e4;        // |y_i| box keeping homogeneous problems bounded
    double feas_eig_tol = 1e-7;    // certification threshold on min eigenvalues
    double gap_tol = 1e-9;         // barrier duality-gap target
    int max_newton = 400;
    bool verbose = false;
};

/// Semidefinite feasibility / linear-objective problems over scalar, symmetric
/// and rectangular matrix variables, with affine PSD constraints and linear
/// equality rows. Small and dense by design.
class SdpProblem {
  public:
    VarId scalar(const std::string& name);
    VarId symmetric(Eigen::Index n, const std::string& name);
    VarId rect(Eigen::Index r, Eigen::Index c, const std::string& name);

    LinExpr expr(const VarId& v) const;

    /// expr >= margin * I (PSD with margin).
    void require_psd(const LinExpr& e, double margin = 0.0, const std::string& label = "");
    /// expr <= -margin * I (NSD with margin).
    void require_nsd(const LinExpr& e, double margin = 0.0, const std::string& label = "");
    /// Every entry of expr pinned to zero (linear equalities).
    void require_zero(const LinExpr& e);
    /// Scalar inequality lhs >= rhs as a 1x1 PSD block.
    void require_ge(const LinExpr& lhs_1x1, double rhs);

    void minimize(const LinExpr& objective_1x1);

    int num_scalars() const { return next_index_; }
    std::size_t num_blocks() const { return blocks_.size(); }

    Mat value(const SdpSolution& sol, const VarId& v) const;
    double scalar_value(const SdpSolution& sol, const VarId& v) const;

    /// Plain-text sparse block dump for cross-checking with external solvers.
    void dump(std::ostream& os) const;

    SdpSolution solve_feasibility(const SdpOptions& opts = {}) const;
    SdpSolution solve_min(const SdpOptions& opts = {}) const;

  private:
    struct Block {
        LinExpr expr;
        std::string label;
    };
    struct NameRec {
        std::string name;
        VarId id;
    };

    SdpSolution solve_impl(const SdpOptions& opts, bool with_objective) const;

    int next_index_ = 0;
    std::vector<NameRec> vars_;
    std::vector<Block> blocks_;
    std::vector<LinExpr> equalities_;
    std::optional<LinExpr> objective_;
};

/// Symmetric eigenvalue test at tolerance.
bool psd_check(const Mat& m, double tol = 1e-9);

/// Modulus of the dominant eigenvalue; power iteration with a full-eigensolve
/// fallback for n <= 64.
double spectral_radius(const Mat& a);

}  // namespace ddn::lmi
