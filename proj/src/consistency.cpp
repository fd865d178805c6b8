#include "ddn/consistency.hpp"

#include <Eigen/QR>

namespace ddn::data {

QmiConsistencySet::QmiConsistencySet(Eigen::Index state_dim, Eigen::Index input_dim, Mat theta)
    : n_(state_dim), m_(input_dim), theta_(std::move(theta)) {
    const Eigen::Index sz = 2 * n_ + m_;
    if (theta_.rows() != sz || theta_.cols() != sz)
        throw std::invalid_argument("consistency: Theta has wrong size");
    if ((theta_ - theta_.transpose()).norm() > 1e-9 * (1.0 + theta_.norm()))
        throw std::invalid_argument("consistency: Theta must be symmetric");
    theta_ = sym(theta_);
}

bool QmiConsistencySet::contains(const Mat& candidate_ab, double tol) const {
    if (candidate_ab.rows() != n_ || candidate_ab.cols() != n_ + m_)
        throw std::invalid_argument("consistency: candidate must be n x (n+m)");
    Mat Z = candidate_ab.transpose();
    Mat form = Z.transpose() * A_blk() * Z + Z.transpose() * B_blk() +
               B_blk().transpose() * Z + C_blk();
    return min_eigenvalue(form) >= -tol;
}

Mat QmiConsistencySet::center() const {
    Mat Zc = -A_blk().ldlt().solve(B_blk());
    return Zc.transpose();
}

std::vector<Mat> QmiConsistencySet::sample_members(int count, std::uint64_t seed) const {
    const Eigen::Index rows = n_ + m_;
    Mat M = -A_blk();
    Eigen::SelfAdjointEigenSolver<Mat> esM(M);
    if (esM.eigenvalues().minCoeff() <= 0.0)
        throw std::invalid_argument("consistency: set is unbounded, cannot sample");
    Mat M_inv_half = esM.operatorInverseSqrt();

    Mat Zc = -A_blk().ldlt().solve(B_blk());
    Mat delta = sym(C_blk() + B_blk().transpose() * Zc);
    Eigen::SelfAdjointEigenSolver<Mat> esD(delta);
    // Clamp noise directions that are zero up to round-off so that
    // noise-free sets sample exactly their centre.
    double clamp = 1e-12 * std::max(1.0, theta_.cwiseAbs().maxCoeff());
    Vec dvals = esD.eigenvalues();
    for (Eigen::Index i = 0; i < dvals.size(); ++i)
        if (dvals(i) < clamp) dvals(i) = 0.0;
    Mat delta_half = esD.eigenvectors() * dvals.cwiseSqrt().asDiagonal() *
                     esD.eigenvectors().transpose();

    std::vector<Mat> out;
    out.reserve(static_cast<std::size_t>(count) + 1);
    out.push_back(Zc.transpose());

    auto push = [&](const Mat& Y) {
        Mat Z = Zc + M_inv_half * Y * delta_half;
        out.push_back(Z.transpose());
    };

    // Axis extremes first, then random boundary orthonormal frames.
    for (Eigen::Index i = 0; i < rows && static_cast<int>(out.size()) < count; ++i) {
        for (Eigen::Index j = 0; j < n_ && static_cast<int>(out.size()) < count; ++j) {
            Mat Y = Mat::Zero(rows, n_);
            Y(i, j) = 1.0;
            push(Y);
            Y(i, j) = -1.0;
            push(Y);
        }
    }
    Rng rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    while (static_cast<int>(out.size()) < count) {
        Mat G(rows, n_);
        for (Eigen::Index i = 0; i < rows; ++i)
            for (Eigen::Index j = 0; j < n_; ++j) G(i, j) = normal(rng);
        Eigen::HouseholderQR<Mat> qr(G);
        Mat Q = qr.householderQ() * Mat::Identity(rows, n_);
        push(Q);
    }
    return out;
}

QmiConsistencySet qmi_consistency_set(const DataBatch& batch, const QuadraticNoiseModel& noise,
                                      const Mat& B_w) {
    const Eigen::Index n = batch.n();
    const Eigen::Index m = batch.m();
    const Eigen::Index T = batch.T();
    if (noise.horizon() != T) throw std::invalid_argument("consistency: noise horizon != T");
    if (B_w.rows() != n) throw std::invalid_argument("consistency: B_w must have n rows");
    if (B_w.cols() != noise.noise_dim())
        throw std::invalid_argument("consistency: B_w columns != noise dimension");
    if (!has_full_column_rank(B_w))
        throw std::invalid_argument("consistency: B_w must have full column rank");

    Mat UX(m + n, T);
    UX.topRows(m) = batch.U;
    UX.bottomRows(n) = batch.X;
    if (!has_full_row_rank(UX))
        throw std::runtime_error("consistency: [U; X] is row-rank deficient (insufficient excitation)");

    const Eigen::Index nw = noise.noise_dim();
    Mat F(2 * n + m, T + nw);
    F.setZero();
    F.block(0, 0, n, T) = -batch.X;
    F.block(n, 0, m, T) = -batch.U;
    F.block(n + m, 0, n, T) = batch.Xp;
    F.block(n + m, T, n, nw) = B_w;
    Mat theta = F * noise.multiplier() * F.transpose();
    return QmiConsistencySet(n, m, std::move(theta));
}

bool qmi_membership(const QmiConsistencySet& set, const Mat& candidate_ab, double tol) {
    return set.contains(candidate_ab, tol);
}

MatrixPolytope::MatrixPolytope(std::vector<Mat> verts) : vertices(std::move(verts)) {
    if (vertices.empty()) throw std::invalid_argument("polytope: needs at least one vertex");
    for (const auto& v : vertices)
        if (v.rows() != vertices.front().rows() || v.cols() != vertices.front().cols())
            throw std::invalid_argument("polytope: vertex shapes differ");
}

namespace {

// Per-slot concatenation of instant polytopes across the horizon. The slot
// vertex carries a factor T so that convex combinations with total weight one
// reach every matrix whose columns each lie in the instant polytope.
std::vector<Mat> concatenated_noise_vertices(const std::vector<Vec>& vertices, Eigen::Index T) {
    const Eigen::Index dim = vertices.front().size();
    std::vector<Mat> out;
    out.reserve(vertices.size() * static_cast<std::size_t>(T));
    for (const auto& v : vertices) {
        for (Eigen::Index slot = 0; slot < T; ++slot) {
            Mat W = Mat::Zero(dim, T);
            W.col(slot) = static_cast<double>(T) * v;
            out.push_back(std::move(W));
        }
    }
    return out;
}

}  // namespace

PolytopicSets polytopic_consistency_set(const DataBatch& batch, const PolytopicNoiseModel& noise) {
    const Eigen::Index n = batch.n();
    const Eigen::Index m = batch.m();
    const Eigen::Index T = batch.T();
    if (T < 1) throw std::invalid_argument("consistency: empty batch");
    if (noise.w_dim() != n)
        throw std::invalid_argument("consistency: process vertices must have state dimension");

    Mat UX(m + n, T);
    UX.topRows(m) = batch.U;
    UX.bottomRows(n) = batch.X;
    if (!has_full_row_rank(UX))
        throw std::runtime_error("consistency: [U; X] is row-rank deficient (insufficient excitation)");
    Mat UX_pinv = pinv(UX);

    std::vector<Mat> z_verts;
    for (const auto& W : concatenated_noise_vertices(noise.w_vertices, T))
        z_verts.push_back((batch.Xp - W) * UX_pinv);

    std::vector<Mat> c_verts;
    if (batch.Y) {
        if (noise.v_vertices.empty())
            throw std::invalid_argument("consistency: output data present but no measurement vertices");
        if (noise.v_dim() != batch.Y->rows())
            throw std::invalid_argument("consistency: measurement vertex dimension != p");
        if (!has_full_row_rank(batch.X))
            throw std::runtime_error("consistency: X is row-rank deficient (insufficient excitation)");
        Mat X_pinv = pinv(batch.X);
        for (const auto& V : concatenated_noise_vertices(noise.v_vertices, T))
            c_verts.push_back((*batch.Y - V) * X_pinv);
    } else {
        c_verts.push_back(Mat::Zero(0, n));
    }
    return PolytopicSets{MatrixPolytope(std::move(z_verts)), MatrixPolytope(std::move(c_verts))};
}

Vec nnls(const Mat& A, const Vec& b, double tol, int max_iter) {
    const Eigen::Index ncol = A.cols();
    if (max_iter <= 0) max_iter = static_cast<int>(3 * ncol + 30);
    Vec x = Vec::Zero(ncol);
    std::vector<bool> passive(static_cast<std::size_t>(ncol), false);

    auto solve_passive = [&](const std::vector<bool>& pset) -> Vec {
        std::vector<Eigen::Index> idx;
        for (Eigen::Index i = 0; i < ncol; ++i)
            if (pset[static_cast<std::size_t>(i)]) idx.push_back(i);
        Vec z = Vec::Zero(ncol);
        if (idx.empty()) return z;
        Mat Ap(A.rows(), static_cast<Eigen::Index>(idx.size()));
        for (std::size_t k = 0; k < idx.size(); ++k) Ap.col(static_cast<Eigen::Index>(k)) = A.col(idx[k]);
        Vec zp = Ap.completeOrthogonalDecomposition().solve(b);
        for (std::size_t k = 0; k < idx.size(); ++k) z(idx[k]) = zp(static_cast<Eigen::Index>(k));
        return z;
    };

    double scale = std::max(1.0, b.cwiseAbs().maxCoeff());
    for (int iter = 0; iter < max_iter; ++iter) {
        Vec w = A.transpose() * (b - A * x);
        Eigen::Index best = -1;
        double best_w = tol * scale;
        for (Eigen::Index i = 0; i < ncol; ++i)
            if (!passive[static_cast<std::size_t>(i)] && w(i) > best_w) {
                best_w = w(i);
                best = i;
            }
        if (best < 0) break;
        passive[static_cast<std::size_t>(best)] = true;

        Vec z = solve_passive(passive);
        int guard = 0;
        while (guard++ < max_iter) {
            bool all_pos = true;
            for (Eigen::Index i = 0; i < ncol; ++i)
                if (passive[static_cast<std::size_t>(i)] && z(i) <= 0.0) all_pos = false;
            if (all_pos) break;
            double alpha = 1.0;
            for (Eigen::Index i = 0; i < ncol; ++i) {
                if (!passive[static_cast<std::size_t>(i)] || z(i) > 0.0) continue;
                double a = x(i) / (x(i) - z(i));
                alpha = std::min(alpha, a);
            }
            x += alpha * (z - x);
            for (Eigen::Index i = 0; i < ncol; ++i)
                if (passive[static_cast<std::size_t>(i)] && x(i) <= tol * scale) {
                    passive[static_cast<std::size_t>(i)] = false;
                    x(i) = 0.0;
                }
            z = solve_passive(passive);
        }
        x = z;
    }
    return x.cwiseMax(0.0);
}

bool polytope_membership(const MatrixPolytope& poly, const Mat& candidate, double tol) {
    if (candidate.rows() != poly.rows() || candidate.cols() != poly.cols())
        throw std::invalid_argument("polytope: candidate shape mismatch");
    const auto k = static_cast<Eigen::Index>(poly.vertices.size());
    const auto dim = candidate.size();

    // Equality system [vec(V_1) ... vec(V_k); 1 ... 1] beta = [vec(C); 1],
    // beta >= 0, solved as NNLS; membership iff the residual vanishes.
    Mat A(dim + 1, k);
    for (Eigen::Index j = 0; j < k; ++j) {
        A.col(j).head(dim) = vectorize(poly.vertices[static_cast<std::size_t>(j)]);
        A(dim, j) = 1.0;
    }
    Vec b(dim + 1);
    b.head(dim) = vectorize(candidate);
    b(dim) = 1.0;

    // The simplex row is scaled up so the unit-sum constraint is enforced
    // tightly even when the matrix entries are large.
    double entry_scale = std::max(1.0, A.cwiseAbs().maxCoeff());
    A.row(dim) *= entry_scale;
    b(dim) *= entry_scale;

    Vec beta = nnls(A, b);
    double resid = (A * beta - b).cwiseAbs().maxCoeff();
    return resid <= tol * entry_scale;
}

}  // namespace ddn::data
