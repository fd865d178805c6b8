#include "ddn/lmi.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <ostream>

namespace ddn::lmi {

// ---------------------------------------------------------------------------
// LinExpr
// ---------------------------------------------------------------------------

LinExpr LinExpr::transpose() const {
    LinExpr out(Mat(constant.transpose()));
    for (const auto& [i, c] : coeffs) out.coeffs[i] = c.transpose();
    return out;
}

LinExpr LinExpr::operator-() const {
    LinExpr out(Mat(-constant));
    for (const auto& [i, c] : coeffs) out.coeffs[i] = -c;
    return out;
}

LinExpr& LinExpr::operator+=(const LinExpr& other) {
    if (rows() != other.rows() || cols() != other.cols())
        throw std::invalid_argument("LinExpr: shape mismatch in +");
    constant += other.constant;
    for (const auto& [i, c] : other.coeffs) {
        auto it = coeffs.find(i);
        if (it == coeffs.end())
            coeffs[i] = c;
        else
            it->second += c;
    }
    return *this;
}

LinExpr& LinExpr::operator-=(const LinExpr& other) { return *this += -other; }

Mat LinExpr::eval(const Vec& y) const {
    Mat out = constant;
    for (const auto& [i, c] : coeffs) out += y(i) * c;
    return out;
}

LinExpr operator+(LinExpr a, const LinExpr& b) { return a += b; }
LinExpr operator-(LinExpr a, const LinExpr& b) { return a -= b; }

LinExpr operator*(const Mat& left, const LinExpr& e) {
    if (left.cols() != e.rows()) throw std::invalid_argument("LinExpr: shape mismatch in L*");
    LinExpr out(Mat(left * e.constant));
    for (const auto& [i, c] : e.coeffs) out.coeffs[i] = left * c;
    return out;
}

LinExpr operator*(const LinExpr& e, const Mat& right) {
    if (e.cols() != right.rows()) throw std::invalid_argument("LinExpr: shape mismatch in *R");
    LinExpr out(Mat(e.constant * right));
    for (const auto& [i, c] : e.coeffs) out.coeffs[i] = c * right;
    return out;
}

LinExpr operator*(double scale, LinExpr e) {
    e.constant *= scale;
    for (auto& [i, c] : e.coeffs) c *= scale;
    return e;
}

LinExpr sym_sum(const LinExpr& e) { return e + e.transpose(); }

LinExpr kron_const(const Mat& a, const LinExpr& e) {
    LinExpr out(kron(a, e.constant));
    for (const auto& [i, c] : e.coeffs) out.coeffs[i] = kron(a, c);
    return out;
}

LinExpr block_matrix(const std::vector<std::vector<LinExpr>>& blocks) {
    if (blocks.empty()) return LinExpr(Mat(0, 0));
    std::vector<Eigen::Index> row_h(blocks.size(), 0), col_w(blocks.front().size(), 0);
    for (std::size_t r = 0; r < blocks.size(); ++r) {
        if (blocks[r].size() != blocks.front().size())
            throw std::invalid_argument("block_matrix: ragged rows");
        for (std::size_t c = 0; c < blocks[r].size(); ++c) {
            row_h[r] = std::max(row_h[r], blocks[r][c].rows());
            col_w[c] = std::max(col_w[c], blocks[r][c].cols());
        }
    }
    Eigen::Index total_r = 0, total_c = 0;
    for (auto h : row_h) total_r += h;
    for (auto w : col_w) total_c += w;

    LinExpr out = LinExpr::zero(total_r, total_c);
    Eigen::Index roff = 0;
    for (std::size_t r = 0; r < blocks.size(); ++r) {
        Eigen::Index coff = 0;
        for (std::size_t c = 0; c < blocks[r].size(); ++c) {
            const LinExpr& e = blocks[r][c];
            if (e.rows() != row_h[r] || e.cols() != col_w[c])
                throw std::invalid_argument("block_matrix: inconsistent block shapes");
            out.constant.block(roff, coff, e.rows(), e.cols()) = e.constant;
            for (const auto& [i, cf] : e.coeffs) {
                auto it = out.coeffs.find(i);
                if (it == out.coeffs.end())
                    it = out.coeffs.emplace(i, Mat::Zero(total_r, total_c)).first;
                it->second.block(roff, coff, e.rows(), e.cols()) += cf;
            }
            coff += col_w[c];
        }
        roff += row_h[r];
    }
    return out;
}

LinExpr trace_of(const LinExpr& e) {
    if (e.rows() != e.cols()) throw std::invalid_argument("trace_of: square expression required");
    LinExpr out(Mat::Constant(1, 1, e.constant.trace()));
    for (const auto& [i, c] : e.coeffs) out.coeffs[i] = Mat::Constant(1, 1, c.trace());
    return out;
}

LinExpr scale_by(const LinExpr& scalar_1x1, const Mat& m) {
    if (scalar_1x1.rows() != 1 || scalar_1x1.cols() != 1)
        throw std::invalid_argument("scale_by: 1x1 expression required");
    LinExpr out(Mat(scalar_1x1.constant(0, 0) * m));
    for (const auto& [i, c] : scalar_1x1.coeffs) out.coeffs[i] = c(0, 0) * m;
    return out;
}

// ---------------------------------------------------------------------------
// SdpProblem: variables and constraints
// ---------------------------------------------------------------------------

VarId SdpProblem::scalar(const std::string& name) {
    VarId v{next_index_, 1, 1, 1, false};
    next_index_ += 1;
    vars_.push_back({name, v});
    return v;
}

VarId SdpProblem::symmetric(Eigen::Index n, const std::string& name) {
    VarId v{next_index_, static_cast<int>(n * (n + 1) / 2), n, n, true};
    next_index_ += v.count;
    vars_.push_back({name, v});
    return v;
}

VarId SdpProblem::rect(Eigen::Index r, Eigen::Index c, const std::string& name) {
    VarId v{next_index_, static_cast<int>(r * c), r, c, false};
    next_index_ += v.count;
    vars_.push_back({name, v});
    return v;
}

LinExpr SdpProblem::expr(const VarId& v) const {
    LinExpr out = LinExpr::zero(v.rows, v.cols);
    if (v.symmetric) {
        int k = v.first;
        for (Eigen::Index i = 0; i < v.rows; ++i)
            for (Eigen::Index j = 0; j <= i; ++j, ++k) {
                Mat c = Mat::Zero(v.rows, v.cols);
                c(i, j) = 1.0;
                if (i != j) c(j, i) = 1.0;
                out.coeffs[k] = std::move(c);
            }
    } else {
        int k = v.first;
        for (Eigen::Index j = 0; j < v.cols; ++j)
            for (Eigen::Index i = 0; i < v.rows; ++i, ++k) {
                Mat c = Mat::Zero(v.rows, v.cols);
                c(i, j) = 1.0;
                out.coeffs[k] = std::move(c);
            }
    }
    return out;
}

void SdpProblem::require_psd(const LinExpr& e, double margin, const std::string& label) {
    if (e.rows() != e.cols()) throw std::invalid_argument("require_psd: square expression required");
    LinExpr shifted = e;
    if (margin != 0.0) shifted.constant -= margin * Mat::Identity(e.rows(), e.cols());
    blocks_.push_back({std::move(shifted), label});
}

void SdpProblem::require_nsd(const LinExpr& e, double margin, const std::string& label) {
    require_psd(-e, margin, label);
}

void SdpProblem::require_zero(const LinExpr& e) { equalities_.push_back(e); }

void SdpProblem::require_ge(const LinExpr& lhs_1x1, double rhs) {
    if (lhs_1x1.rows() != 1 || lhs_1x1.cols() != 1)
        throw std::invalid_argument("require_ge: 1x1 expression required");
    LinExpr e = lhs_1x1;
    e.constant(0, 0) -= rhs;
    blocks_.push_back({std::move(e), ""});
}

void SdpProblem::minimize(const LinExpr& objective_1x1) {
    if (objective_1x1.rows() != 1 || objective_1x1.cols() != 1)
        throw std::invalid_argument("minimize: 1x1 expression required");
    objective_ = objective_1x1;
}

Mat SdpProblem::value(const SdpSolution& sol, const VarId& v) const {
    Mat out(v.rows, v.cols);
    if (v.symmetric) {
        int k = v.first;
        for (Eigen::Index i = 0; i < v.rows; ++i)
            for (Eigen::Index j = 0; j <= i; ++j, ++k) {
                out(i, j) = sol.y(k);
                out(j, i) = sol.y(k);
            }
    } else {
        int k = v.first;
        for (Eigen::Index j = 0; j < v.cols; ++j)
            for (Eigen::Index i = 0; i < v.rows; ++i, ++k) out(i, j) = sol.y(k);
    }
    return out;
}

double SdpProblem::scalar_value(const SdpSolution& sol, const VarId& v) const {
    return sol.y(v.first);
}

void SdpProblem::dump(std::ostream& os) const {
    os << "sdp " << next_index_ << " scalars, " << blocks_.size() << " psd blocks, "
       << equalities_.size() << " equality groups\n";
    for (const auto& rec : vars_)
        os << "var " << rec.name << " first=" << rec.id.first << " count=" << rec.id.count
           << " shape=" << rec.id.rows << "x" << rec.id.cols
           << (rec.id.symmetric ? " symmetric" : "") << "\n";
    auto dump_mat = [&os](const Mat& m) {
        for (Eigen::Index i = 0; i < m.rows(); ++i)
            for (Eigen::Index j = 0; j < m.cols(); ++j)
                if (m(i, j) != 0.0) os << "  " << i << " " << j << " " << m(i, j) << "\n";
    };
    for (std::size_t b = 0; b < blocks_.size(); ++b) {
        os << "block " << b << " size=" << blocks_[b].expr.rows();
        if (!blocks_[b].label.empty()) os << " label=" << blocks_[b].label;
        os << "\nconst\n";
        dump_mat(blocks_[b].expr.constant);
        for (const auto& [i, c] : blocks_[b].expr.coeffs) {
            os << "coef " << i << "\n";
            dump_mat(c);
        }
    }
    if (objective_) {
        os << "objective const=" << objective_->constant(0, 0) << "\n";
        for (const auto& [i, c] : objective_->coeffs) os << "  " << i << " " << c(0, 0) << "\n";
    }
}

// ---------------------------------------------------------------------------
// Barrier interior-point backend
// ---------------------------------------------------------------------------

namespace {

struct ReducedBlock {
    std::vector<Mat> C;  // C[0] constant, C[1..q] coefficients of z
    Eigen::Index size() const { return C[0].rows(); }
};

struct BarrierState {
    // Evaluate all blocks at z appended with phase-1 slack t (t shifts every
    // matrix block by -t I). Returns false if any block is not PD.
    static bool factor(const std::vector<ReducedBlock>& blocks, const Vec& z, double t,
                       std::vector<Eigen::LLT<Mat>>& llts) {
        llts.clear();
        llts.reserve(blocks.size());
        for (const auto& b : blocks) {
            Mat F = b.C[0];
            for (int j = 0; j < z.size(); ++j)
                if (z(j) != 0.0) F += z(j) * b.C[static_cast<std::size_t>(j) + 1];
            if (t != 0.0) F -= t * Mat::Identity(F.rows(), F.cols());
            Eigen::LLT<Mat> llt(sym(F));
            if (llt.info() != Eigen::Success) return false;
            llts.push_back(std::move(llt));
        }
        return true;
    }
};

}  // namespace

SdpSolution SdpProblem::solve_feasibility(const SdpOptions& opts) const {
    return solve_impl(opts, false);
}

SdpSolution SdpProblem::solve_min(const SdpOptions& opts) const {
    if (!objective_) throw std::invalid_argument("solve_min: no objective set");
    return solve_impl(opts, true);
}

SdpSolution SdpProblem::solve_impl(const SdpOptions& opts, bool with_objective) const {
    SdpSolution sol;
    const int nv = next_index_;

    // Equality elimination: y = y0 + N z.
    Vec y0 = Vec::Zero(nv);
    Mat N = Mat::Identity(nv, nv);
    {
        Eigen::Index rows = 0;
        for (const auto& e : equalities_) rows += e.constant.size();
        if (rows > 0) {
            Mat E = Mat::Zero(rows, nv);
            Vec d = Vec::Zero(rows);
            Eigen::Index r = 0;
            for (const auto& e : equalities_) {
                for (Eigen::Index jj = 0; jj < e.cols(); ++jj)
                    for (Eigen::Index ii = 0; ii < e.rows(); ++ii, ++r) {
                        d(r) = -e.constant(ii, jj);
                        for (const auto& [i, c] : e.coeffs) E(r, i) = c(ii, jj);
                    }
            }
            Eigen::JacobiSVD<Mat> svd(E, Eigen::ComputeFullV | Eigen::ComputeThinU);
            const auto& s = svd.singularValues();
            double smax = s.size() ? s(0) : 0.0;
            Eigen::Index rank = 0;
            for (Eigen::Index i = 0; i < s.size(); ++i)
                if (s(i) > 1e-12 * std::max(1.0, smax)) ++rank;
            Vec ud = svd.matrixU().transpose() * d;
            Vec si = Vec::Zero(s.size());
            for (Eigen::Index i = 0; i < rank; ++i) si(i) = ud(i) / s(i);
            y0 = svd.matrixV().leftCols(s.size()) * si;
            if ((E * y0 - d).cwiseAbs().maxCoeff() > 1e-8 * std::max(1.0, d.cwiseAbs().maxCoeff())) {
                sol.status = SdpStatus::Infeasible;
                sol.message = "inconsistent equality constraints";
                sol.y = y0;
                return sol;
            }
            N = svd.matrixV().rightCols(nv - rank);
        }
    }
    const int q = static_cast<int>(N.cols());

    // Reduce blocks to z-space and normalise each by its own scale.
    std::vector<ReducedBlock> blocks;
    blocks.reserve(blocks_.size());
    for (const auto& blk : blocks_) {
        ReducedBlock rb;
        rb.C.assign(static_cast<std::size_t>(q) + 1, Mat());
        rb.C[0] = sym(blk.expr.eval(y0));
        for (int j = 0; j < q; ++j) rb.C[static_cast<std::size_t>(j) + 1] = Mat::Zero(blk.expr.rows(), blk.expr.cols());
        for (const auto& [i, c] : blk.expr.coeffs) {
            Mat cs = sym(c);
            for (int j = 0; j < q; ++j)
                if (N(i, j) != 0.0) rb.C[static_cast<std::size_t>(j) + 1] += N(i, j) * cs;
        }
        double scale = std::max(1.0, rb.C[0].cwiseAbs().maxCoeff());
        for (int j = 0; j < q; ++j)
            scale = std::max(scale, rb.C[static_cast<std::size_t>(j) + 1].cwiseAbs().maxCoeff());
        for (auto& c : rb.C) c /= scale;
        blocks.push_back(std::move(rb));
    }

    Vec c_red = Vec::Zero(q);
    double c_const = 0.0;
    if (with_objective) {
        Vec c_full = Vec::Zero(nv);
        for (const auto& [i, c] : objective_->coeffs) c_full(i) = c(0, 0);
        c_const = objective_->constant(0, 0) + c_full.dot(y0);
        c_red = N.transpose() * c_full;
    }

    const double R = opts.var_bound;
    const double t_cap = 10.0;
    double barrier_degree = 2.0 * q + 1.0;
    for (const auto& b : blocks) barrier_degree += static_cast<double>(b.size());

    Vec z = Vec::Zero(q);
    double t = 0.0;
    std::vector<Eigen::LLT<Mat>> llts;

    // Slack start: strictly below the smallest eigenvalue over all blocks.
    {
        double min_eig = t_cap * 0.5;
        for (const auto& b : blocks) min_eig = std::min(min_eig, min_eigenvalue(b.C[0]));
        t = min_eig - std::max(1.0, 0.1 * std::abs(min_eig));
    }

    // Newton centering for phi(z, t) = f/mu + barrier. Phase 1 treats t as an
    // extra coordinate with coefficient -I in every matrix block.
    auto center = [&](double mu, bool phase1, const Vec& cvec, int max_iters,
                      std::string& err) -> bool {
        const int dim = phase1 ? q + 1 : q;
        for (int it = 0; it < max_iters; ++it) {
            if (!BarrierState::factor(blocks, z, phase1 ? t : 0.0, llts)) {
                err = "iterate left the cone";
                return false;
            }
            Vec g = Vec::Zero(dim);
            Mat H = Mat::Zero(dim, dim);
            for (int j = 0; j < q; ++j) {
                g(j) += 1.0 / (R - z(j)) - 1.0 / (R + z(j));
                H(j, j) += 1.0 / ((R - z(j)) * (R - z(j))) + 1.0 / ((R + z(j)) * (R + z(j)));
            }
            if (phase1) {
                g(q) += 1.0 / (t_cap - t);
                H(q, q) += 1.0 / ((t_cap - t) * (t_cap - t));
                g(q) += -1.0 / mu;  // objective -t
            } else {
                for (int j = 0; j < q; ++j) g(j) += cvec(j) / mu;
            }
            for (std::size_t b = 0; b < blocks.size(); ++b) {
                const auto& llt = llts[b];
                const Eigen::Index sz = blocks[b].size();
                std::vector<Mat> M(static_cast<std::size_t>(dim));
                for (int j = 0; j < q; ++j)
                    M[static_cast<std::size_t>(j)] = llt.solve(blocks[b].C[static_cast<std::size_t>(j) + 1]);
                if (phase1) M[static_cast<std::size_t>(q)] = -llt.solve(Mat::Identity(sz, sz));
                for (int j = 0; j < dim; ++j) {
                    g(j) -= M[static_cast<std::size_t>(j)].trace();
                    for (int k = j; k < dim; ++k) {
                        double h = (M[static_cast<std::size_t>(j)].array() *
                                    M[static_cast<std::size_t>(k)].transpose().array())
                                       .sum();
                        H(j, k) += h;
                        if (k != j) H(k, j) += h;
                    }
                }
            }
            // Damped Newton step.
            Eigen::LDLT<Mat> hess(H + 1e-12 * Mat::Identity(dim, dim));
            Vec step = hess.solve(-g);
            double decrement = -g.dot(step);
            if (!(decrement > 0)) {
                Eigen::LDLT<Mat> hess2(H + 1e-6 * Mat::Identity(dim, dim));
                step = hess2.solve(-g);
                decrement = -g.dot(step);
                if (!(decrement > 0)) return true;  // stationary
            }
            if (decrement * 0.5 < 1e-11) return true;

            auto phi_at = [&](const Vec& zz, double tt) -> double {
                double val = 0.0;
                for (int j = 0; j < q; ++j) {
                    if (R - zz(j) <= 0.0 || R + zz(j) <= 0.0) return std::numeric_limits<double>::infinity();
                    val -= std::log(R - zz(j)) + std::log(R + zz(j));
                }
                if (phase1) {
                    if (t_cap - tt <= 0.0) return std::numeric_limits<double>::infinity();
                    val -= std::log(t_cap - tt);
                    val += -tt / mu;
                } else {
                    val += cvec.dot(zz) / mu;
                }
                std::vector<Eigen::LLT<Mat>> f;
                if (!BarrierState::factor(blocks, zz, phase1 ? tt : 0.0, f))
                    return std::numeric_limits<double>::infinity();
                for (const auto& llt : f) {
                    const Mat& L = llt.matrixLLT();
                    for (Eigen::Index i = 0; i < L.rows(); ++i) val -= 2.0 * std::log(L(i, i));
                }
                return val;
            };

            double phi0 = phi_at(z, t);
            double alpha = 1.0;
            bool moved = false;
            for (int ls = 0; ls < 60; ++ls) {
                Vec z_try = z + alpha * step.head(q);
                double t_try = phase1 ? t + alpha * step(q) : t;
                double phi1 = phi_at(z_try, t_try);
                if (phi1 <= phi0 - 1e-4 * alpha * decrement) {
                    z = z_try;
                    t = t_try;
                    moved = true;
                    break;
                }
                alpha *= 0.6;
            }
            if (!moved) return true;  // line search stalled at the optimum
        }
        return true;
    };

    std::string err;
    bool ok = true;
    if (!blocks.empty()) {
        // Phase 1: drive the uniform slack positive.
        for (double mu = 1.0; mu > 1e-9; mu *= 0.2) {
            ok = center(mu, true, c_red, opts.max_newton, err);
            if (!ok) break;
            if (!with_objective && t > 1e-3) break;  // comfortably interior
            if (t > 0.2 * t_cap) break;
        }
        if (!ok) {
            sol.status = SdpStatus::NumericalFailure;
            sol.message = "phase-1 failure: " + err;
            sol.y = y0 + N * z;
            return sol;
        }
        sol.margin = t;
        if (t <= 0.0) {
            sol.status = SdpStatus::Infeasible;
            sol.message = "no strictly feasible point found (best slack " + std::to_string(t) + ")";
            sol.y = y0 + N * z;
            return sol;
        }
    } else {
        sol.margin = t_cap;
    }

    if (with_objective && q > 0) {
        t = 0.0;
        double mu = std::max(0.01, std::abs(c_red.dot(z) + c_const) / barrier_degree);
        double gap_target = opts.gap_tol;
        for (int outer = 0; outer < 60; ++outer) {
            ok = center(mu, false, c_red, opts.max_newton, err);
            if (!ok) break;
            double obj_now = c_red.dot(z) + c_const;
            if (mu * barrier_degree <= std::max(gap_target, 1e-9 * std::abs(obj_now))) break;
            mu *= 0.15;
        }
        if (!ok) {
            sol.status = SdpStatus::NumericalFailure;
            sol.message = "path following failure: " + err;
            sol.y = y0 + N * z;
            return sol;
        }
        if (z.cwiseAbs().maxCoeff() >= 0.98 * R)
            throw std::runtime_error("sdp: objective appears unbounded (variable bound reached)");
    }

    sol.y = y0 + N * z;
    sol.objective = with_objective ? c_red.dot(z) + c_const : std::numeric_limits<double>::quiet_NaN();

    // Certify on the original, unnormalised constraints.
    double worst = 0.0;
    for (const auto& blk : blocks_) {
        double lo = min_eigenvalue(blk.expr.eval(sol.y));
        worst = std::max(worst, std::max(0.0, -lo));
    }
    sol.worst_residual = worst;
    sol.status = worst <= opts.feas_eig_tol ? SdpStatus::Feasible : SdpStatus::Infeasible;
    if (sol.status == SdpStatus::Infeasible && sol.message.empty())
        sol.message = "certification failed with residual " + std::to_string(worst);
    return sol;
}

// ---------------------------------------------------------------------------
// Small spectral utilities
// ---------------------------------------------------------------------------

bool psd_check(const Mat& m, double tol) {
    if (m.rows() != m.cols()) return false;
    if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-8 * (1.0 + m.cwiseAbs().maxCoeff()))
        return false;
    return min_eigenvalue(m) >= -tol;
}

double spectral_radius(const Mat& a) {
    if (a.rows() != a.cols()) throw std::invalid_argument("spectral_radius: square matrix required");
    const Eigen::Index n = a.rows();
    if (n == 0) return 0.0;

    // Power iteration on a deterministic start vector; complex or tied
    // dominant pairs make the growth ratio oscillate, in which case fall
    // back to a full eigensolve (always available at these sizes).
    Vec v = Vec::Ones(n).normalized();
    double ratio = 0.0;
    bool converged = false;
    for (int it = 0; it < 300; ++it) {
        Vec w = a * v;
        double norm = w.norm();
        if (norm < 1e-300) return 0.0;
        double prev = ratio;
        ratio = norm;
        v = w / norm;
        if (it > 5 && std::abs(ratio - prev) <= 1e-12 * std::max(1.0, ratio)) {
            converged = true;
            break;
        }
    }
    if (converged) return ratio;
    if (n <= 64) {
        Eigen::EigenSolver<Mat> es(a, false);
        return es.eigenvalues().cwiseAbs().maxCoeff();
    }
    return ratio;
}

}  // namespace ddn::lmi
