#include "ddn/output_sync.hpp"

#include <sstream>

#include <Eigen/Eigenvalues>

namespace ddn::dist {

LeaderModel::LeaderModel(Mat S_, Mat H_) : S(std::move(S_)), H(std::move(H_)) {
    if (S.rows() != S.cols()) throw std::invalid_argument("leader: S must be square");
    if (H.cols() != S.rows()) throw std::invalid_argument("leader: H column mismatch");
    Eigen::EigenSolver<Mat> es(S, false);
    auto ev = es.eigenvalues();
    for (Eigen::Index i = 0; i < ev.size(); ++i) {
        if (std::abs(std::abs(ev(i)) - 1.0) > 1e-8)
            throw std::invalid_argument("leader: poles must lie on the unit circle");
        for (Eigen::Index j = i + 1; j < ev.size(); ++j)
            if (std::abs(ev(i) - ev(j)) < 1e-6)
                throw std::invalid_argument("leader: poles must be non-repeated");
    }
}

LeaderModel LeaderModel::planar_rotation(double angle, Mat H) {
    Mat S(2, 2);
    S << std::cos(angle), -std::sin(angle), std::sin(angle), std::cos(angle);
    return LeaderModel(std::move(S), std::move(H));
}

namespace {

// Worst-vertex aggregation: min t over (Pi, Gamma) with every squared
// residual below t, via Schur-complement epigraph blocks.
OreSolution ore_minimax(const data::MatrixPolytope& Mz, const data::MatrixPolytope& Mc,
                        const Mat& S, const Mat& H) {
    const Eigen::Index n0 = S.rows();
    const Eigen::Index n_state = Mc.cols();
    const Eigen::Index m = Mz.cols() - n_state;

    lmi::SdpProblem prob;
    auto Pi = prob.rect(n_state, n0, "Pi");
    auto Ga = prob.rect(m, n0, "Gamma");
    auto t = prob.scalar("t");
    prob.require_ge(prob.expr(t), 0.0);

    auto add_resid_block = [&](const lmi::LinExpr& resid) {
        // [t, vec(resid)'; vec(resid), I] >= 0  <=>  ||resid||_F^2 <= t.
        const Eigen::Index d = resid.rows() * resid.cols();
        lmi::LinExpr v = lmi::LinExpr::zero(d, 1);
        v.constant = vectorize(resid.constant);
        for (const auto& [idx, c] : resid.coeffs) v.coeffs[idx] = vectorize(c);
        prob.require_psd(lmi::block_matrix({{prob.expr(t), v.transpose()},
                                            {v, lmi::LinExpr(Mat::Identity(d, d))}}));
    };
    for (const auto& vx : Mz.vertices) {
        lmi::LinExpr gp = lmi::block_matrix({{prob.expr(Ga)}, {prob.expr(Pi)}});
        add_resid_block(vx * gp - prob.expr(Pi) * S);
    }
    for (const auto& cx : Mc.vertices)
        add_resid_block(cx * prob.expr(Pi) - lmi::LinExpr(Mat(H)));
    prob.minimize(prob.expr(t));
    auto sol = prob.solve_min();
    OreSolution out;
    if (!sol.feasible()) throw std::runtime_error("ore: minimax aggregation failed to solve");
    out.Pi = prob.value(sol, Pi);
    out.Gamma = prob.value(sol, Ga);
    out.residual = sol.objective;  // worst squared vertex residual
    return out;
}

}  // namespace

OreSolution ore_relax_solve(const data::MatrixPolytope& Mz, const data::MatrixPolytope& Mc,
                            const Mat& S, const Mat& H, bool max_aggregation) {
    if (max_aggregation) return ore_minimax(Mz, Mc, S, H);
    const Eigen::Index n0 = S.rows();
    // Vertices of Mz are [B A]; recover m from the width.
    const Eigen::Index n_state = Mc.cols();
    const Eigen::Index m = Mz.cols() - n_state;
    const Eigen::Index p = Mc.rows();
    if (m < 0) throw std::invalid_argument("ore: vertex widths inconsistent");
    if (H.rows() != p || H.cols() != n0) throw std::invalid_argument("ore: H shape mismatch");
    if (Mz.rows() != n_state) throw std::invalid_argument("ore: vertex row mismatch");

    const Eigen::Index n_pi = n_state * n0, n_ga = m * n0;
    const auto kz = static_cast<Eigen::Index>(Mz.vertices.size());
    const auto kc = static_cast<Eigen::Index>(Mc.vertices.size());
    Mat Abig = Mat::Zero(kz * n_state * n0 + kc * p * n0, n_pi + n_ga);
    Vec bbig = Vec::Zero(Abig.rows());

    Mat In0 = Mat::Identity(n0, n0);
    Mat In = Mat::Identity(n_state, n_state);
    Eigen::Index row = 0;
    for (Eigen::Index k = 0; k < kz; ++k) {
        const Mat& v = Mz.vertices[static_cast<std::size_t>(k)];
        Mat Bv = v.leftCols(m);
        Mat Av = v.rightCols(n_state);
        // vec(Av Pi - Pi S) = (I (x) Av - S' (x) I) vec(Pi), vec(Bv Gamma) = (I (x) Bv) vec(Gamma)
        Abig.block(row, 0, n_state * n0, n_pi) = kron(In0, Av) - kron(S.transpose(), In);
        Abig.block(row, n_pi, n_state * n0, n_ga) = kron(In0, Bv);
        row += n_state * n0;
    }
    for (Eigen::Index k = 0; k < kc; ++k) {
        const Mat& c = Mc.vertices[static_cast<std::size_t>(k)];
        Abig.block(row, 0, p * n0, n_pi) = kron(In0, c);
        bbig.segment(row, p * n0) = vectorize(H);
        row += p * n0;
    }

    Eigen::CompleteOrthogonalDecomposition<Mat> cod(Abig);
    cod.setThreshold(1e-12);
    Vec sol = cod.solve(bbig);

    OreSolution out;
    out.Pi = unvectorize(sol.head(n_pi), n_state, n0);
    out.Gamma = unvectorize(sol.tail(n_ga), m, n0);
    out.residual = (Abig * sol - bbig).squaredNorm();
    out.rank_deficient = cod.rank() < Abig.cols();
    return out;
}

std::pair<double, double> ore_error_bound(const data::MatrixPolytope& Mz,
                                          const data::MatrixPolytope& Mc, const Mat& Pi,
                                          const Mat& Gamma, const Mat& S, const Mat& H) {
    const Eigen::Index m = Gamma.rows();
    Mat GP(Gamma.rows() + Pi.rows(), Pi.cols());
    GP.topRows(m) = Gamma;
    GP.bottomRows(Pi.rows()) = Pi;
    auto spec_norm = [](const Mat& mat) {
        Eigen::JacobiSVD<Mat> svd(mat);
        return svd.singularValues().size() ? svd.singularValues()(0) : 0.0;
    };
    double b1 = 0.0, b2 = 0.0;
    for (const auto& v : Mz.vertices) b1 = std::max(b1, spec_norm(v * GP - Pi * S));
    for (const auto& c : Mc.vertices) b2 = std::max(b2, spec_norm(c * Pi - H));
    return {b1, b2};
}

std::vector<Mat> concatenated_process_vertices(const data::PolytopicNoiseModel& noise,
                                               Eigen::Index T) {
    std::vector<Mat> out;
    out.reserve(noise.w_vertices.size() * static_cast<std::size_t>(T));
    for (const auto& v : noise.w_vertices)
        for (Eigen::Index slot = 0; slot < T; ++slot) {
            Mat W = Mat::Zero(v.size(), T);
            W.col(slot) = static_cast<double>(T) * v;
            out.push_back(std::move(W));
        }
    return out;
}

SyncGainResult sync_gain_design(const data::DataBatch& batch,
                                const std::vector<Mat>& noise_vertex_mats,
                                const data::MatrixPolytope& Mz) {
    SyncGainResult out;
    const Eigen::Index n = batch.n();
    const Eigen::Index T = batch.T();

    lmi::SdpProblem prob;
    auto M = prob.rect(T, n, "M");
    lmi::LinExpr XM = batch.X * prob.expr(M);
    prob.require_zero(XM - XM.transpose());
    const double delta = 1e-6;
    prob.require_psd(XM, delta);
    for (const auto& W : noise_vertex_mats) {
        Mat Om = batch.Xp - W;
        lmi::LinExpr OmM = Om * prob.expr(M);
        prob.require_psd(lmi::block_matrix({{XM, OmM}, {OmM.transpose(), XM}}), delta);
    }

    auto sol = prob.solve_feasibility();
    out.status = sol.status;
    out.message = sol.message;
    if (!sol.feasible()) return out;
    out.M = prob.value(sol, M);
    Mat XMv = batch.X * out.M;
    out.K = batch.U * out.M * XMv.inverse();

    // The certificate must translate into Schur closed loops at every vertex.
    for (const auto& v : Mz.vertices) {
        Mat Bv = v.leftCols(batch.m());
        Mat Av = v.rightCols(n);
        if (lmi::spectral_radius(Av + Bv * out.K) >= 1.0) {
            out.status = lmi::SdpStatus::NumericalFailure;
            out.message = "vertex closed loop not Schur";
            return out;
        }
    }
    return out;
}

Mat observer_gain_design(const Mat& S, const CommGraph& graph) {
    if (!graph.spanning_tree)
        throw std::invalid_argument("observer: graph needs a spanning tree");
    const Eigen::Index N = graph.followers();
    const Eigen::Index n0 = S.rows();
    Mat scaling = (Mat::Identity(N, N) + graph.degree + graph.pin_matrix).inverse() * graph.lambda;

    Eigen::EigenSolver<Mat> esM(scaling, false);
    auto mu = esM.eigenvalues();
    Eigen::EigenSolver<Mat> esS(S, false);
    auto lam = esS.eigenvalues();

    auto verify = [&](const Mat& F) {
        Mat big = kron(Mat::Identity(N, N), S) - kron(scaling, F);
        return lmi::spectral_radius(big) < 1.0 - 1e-9;
    };

    // F = alpha S: closed-loop modes are (1 - alpha mu_i) lambda_j with
    // |lambda_j| = 1, so only |1 - alpha mu_i| matters. Keep the best alpha
    // on the grid, not the first workable one.
    {
        double best_alpha = 0.0, best_worst = 1.0;
        for (double alpha = 0.05; alpha <= 2.0 + 1e-12; alpha += 0.05) {
            double worst = 0.0;
            for (Eigen::Index i = 0; i < mu.size(); ++i)
                worst = std::max(worst, std::abs(1.0 - alpha * mu(i)));
            if (worst < best_worst - 1e-12) {
                best_worst = worst;
                best_alpha = alpha;
            }
        }
        if (best_worst < 1.0 - 1e-9) {
            Mat F = best_alpha * S;
            if (verify(F)) return F;
        }
    }
    // Dense fallback F = alpha S + beta I with the separable spectrum
    // (1 - alpha mu) lambda - beta mu.
    for (double alpha = -2.0; alpha <= 2.0 + 1e-12; alpha += 0.05) {
        for (double beta = -1.0; beta <= 1.0 + 1e-12; beta += 0.05) {
            double worst = 0.0;
            for (Eigen::Index i = 0; i < mu.size(); ++i)
                for (Eigen::Index j = 0; j < lam.size(); ++j)
                    worst = std::max(worst,
                                     std::abs((1.0 - alpha * mu(i)) * lam(j) - beta * mu(i)));
            if (worst < 1.0 - 1e-9) {
                Mat F = alpha * S + beta * Mat::Identity(n0, n0);
                if (verify(F)) return F;
            }
        }
    }
    std::ostringstream os;
    os << "observer: no stabilizing F found; spectrum of (I+D+P)^{-1}Lambda:";
    for (Eigen::Index i = 0; i < mu.size(); ++i)
        os << " (" << mu(i).real() << (mu(i).imag() >= 0 ? "+" : "") << mu(i).imag() << "j)";
    throw std::runtime_error(os.str());
}

Vec observer_step(const std::vector<Vec>& eta, const Vec& leader_state, const CommGraph& graph,
                  Eigen::Index i, const Mat& S, const Mat& F) {
    const Eigen::Index N = graph.followers();
    if (static_cast<Eigen::Index>(eta.size()) != N)
        throw std::invalid_argument("observer: state count mismatch");
    const Vec& ei = eta[static_cast<std::size_t>(i)];
    Vec innov = Vec::Zero(ei.size());
    for (Eigen::Index j = 0; j < N; ++j)
        if (graph.adjacency(i, j) > 0.0)
            innov += graph.adjacency(i, j) * (eta[static_cast<std::size_t>(j)] - ei);
    innov += graph.pinning(i) * (leader_state - ei);
    double scale = 1.0 + graph.degree(i, i) + graph.pinning(i);
    return S * ei + (1.0 / scale) * (F * innov);
}

Vec sync_controller_step(const Vec& x_i, const Vec& eta_i, const Mat& K_i, const Mat& Pi_i,
                         const Mat& Gamma_i) {
    return K_i * (x_i - Pi_i * eta_i) + Gamma_i * eta_i;
}

}  // namespace ddn::dist
