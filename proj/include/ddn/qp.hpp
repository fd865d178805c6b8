#pragma once

#include "ddn/types.hpp"

#include <limits>
#include <optional>

namespace ddn::qp {

/// Convex quadratic program
///   min 1/2 z^T H z + f^T z + c0
///   s.t. A_eq z = b_eq,  lb <= z <= ub  (+-inf entries drop a bound),
///        optionally ||S z - c||_W^2 <= r^2.
/// H is positive semidefinite; ties are broken towards the minimum-norm z.
struct QpProblem {
    Mat H;
    Vec f;
    double c0 = 0.0;
    Mat Aeq;  // may have zero rows
    Vec beq;
    Vec lb, ub;  // size() == 0 means unbounded

    struct Ball {
        Mat S;
        Vec c;
        Mat W;  // SPD weight
        double r = 0.0;
    };
    std::optional<Ball> ball;

    Eigen::Index size() const { return f.size(); }
};

enum class QpStatus { Optimal, Infeasible, NumericalFailure };

struct QpResult {
    QpStatus status = QpStatus::NumericalFailure;
    Vec z;
    double objective = std::numeric_limits<double>::quiet_NaN();
    double ball_multiplier = 0.0;
    std::string message;

    bool ok() const { return status == QpStatus::Optimal; }
};

/// KKT factorisation for the equality part, primal-dual active set for the
/// box, one-dimensional dual search for the ball.
QpResult solve(const QpProblem& problem);

}  // namespace ddn::qp
