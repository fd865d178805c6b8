#include "ddn/trajectory.hpp"

#include <charconv>
#include <fstream>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>

namespace ddn::data {

namespace {

[[noreturn]] void csv_error(std::size_t line, std::size_t col, const std::string& what) {
    std::ostringstream os;
    os << "csv: line " << line << ", column " << col << ": " << what;
    throw std::runtime_error(os.str());
}

std::vector<std::string> split_row(const std::string& row) {
    std::vector<std::string> cells;
    std::string cur;
    for (char c : row) {
        if (c == ',') {
            cells.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur.push_back(c);
        }
    }
    cells.push_back(cur);
    return cells;
}

}  // namespace

void Trajectory::validate() const {
    if (u.empty()) throw std::invalid_argument("trajectory: empty input sequence");
    const auto T = horizon();
    const auto m = input_dim();
    for (const auto& ut : u)
        if (ut.size() != m) throw std::invalid_argument("trajectory: input dimension varies");
    if (has_states()) {
        if (static_cast<Eigen::Index>(x.size()) != T + 1)
            throw std::invalid_argument("trajectory: states must have length T+1");
        const auto n = state_dim();
        for (const auto& xt : x)
            if (xt.size() != n) throw std::invalid_argument("trajectory: state dimension varies");
    }
    if (has_outputs()) {
        if (static_cast<Eigen::Index>(y.size()) != T)
            throw std::invalid_argument("trajectory: outputs must have length T");
        const auto p = output_dim();
        for (const auto& yt : y)
            if (yt.size() != p) throw std::invalid_argument("trajectory: output dimension varies");
    }
}

DataBatch collect_data_matrices(const Trajectory& traj) {
    traj.validate();
    if (!traj.has_states()) throw std::invalid_argument("collect_data_matrices: trajectory has no states");
    const auto T = traj.horizon();
    const auto n = traj.state_dim();
    const auto m = traj.input_dim();

    DataBatch batch;
    batch.U.resize(m, T);
    batch.X.resize(n, T);
    batch.Xp.resize(n, T);
    for (Eigen::Index t = 0; t < T; ++t) {
        batch.U.col(t) = traj.u[static_cast<std::size_t>(t)];
        batch.X.col(t) = traj.x[static_cast<std::size_t>(t)];
        batch.Xp.col(t) = traj.x[static_cast<std::size_t>(t + 1)];
    }
    if (traj.has_outputs()) {
        Mat Y(traj.output_dim(), T);
        for (Eigen::Index t = 0; t < T; ++t) Y.col(t) = traj.y[static_cast<std::size_t>(t)];
        batch.Y = Y;
    }
    return batch;
}

Trajectory trajectory_from_csv(std::istream& in) {
    std::string row;
    if (!std::getline(in, row)) throw std::runtime_error("csv: empty file");
    auto header = split_row(row);
    if (header.empty() || header[0] != "t") csv_error(1, 1, "expected header starting with 't'");

    Eigen::Index m = 0, n = 0, p = 0;
    for (std::size_t i = 1; i < header.size(); ++i) {
        const std::string& h = header[i];
        if (h.rfind("u_", 0) == 0) ++m;
        else if (h.rfind("x_", 0) == 0) ++n;
        else if (h.rfind("y_", 0) == 0) ++p;
        else csv_error(1, i + 1, "unknown column '" + h + "'");
    }
    if (m == 0) csv_error(1, 1, "no input columns u_*");

    std::vector<Vec> us, xs, ys;
    std::size_t line = 1;
    long expected_t = 0;
    while (std::getline(in, row)) {
        ++line;
        if (row.empty()) continue;
        auto cells = split_row(row);
        if (cells.size() != header.size())
            csv_error(line, cells.size(), "expected " + std::to_string(header.size()) + " cells");

        long t = 0;
        auto [ptr, ec] = std::from_chars(cells[0].data(), cells[0].data() + cells[0].size(), t);
        if (ec != std::errc() || ptr != cells[0].data() + cells[0].size())
            csv_error(line, 1, "bad time index '" + cells[0] + "'");
        if (t != expected_t) csv_error(line, 1, "time index must increase by 1 from 0");
        ++expected_t;

        auto parse_block = [&](Eigen::Index dim, std::size_t offset) -> std::optional<Vec> {
            bool any_empty = false, any_filled = false;
            Vec v(dim);
            for (Eigen::Index k = 0; k < dim; ++k) {
                const std::string& cell = cells[offset + static_cast<std::size_t>(k)];
                if (cell.empty()) {
                    any_empty = true;
                    continue;
                }
                any_filled = true;
                try {
                    std::size_t used = 0;
                    v(k) = std::stod(cell, &used);
                    if (used != cell.size()) throw std::invalid_argument(cell);
                } catch (const std::exception&) {
                    csv_error(line, offset + static_cast<std::size_t>(k) + 1, "bad number '" + cell + "'");
                }
            }
            if (any_empty && any_filled)
                csv_error(line, offset + 1, "partially filled block");
            if (!any_filled) return std::nullopt;
            return v;
        };

        auto uv = parse_block(m, 1);
        auto xv = n > 0 ? parse_block(n, 1 + static_cast<std::size_t>(m)) : std::nullopt;
        auto yv = p > 0 ? parse_block(p, 1 + static_cast<std::size_t>(m + n)) : std::nullopt;
        if (uv) us.push_back(*uv);
        if (xv) xs.push_back(*xv);
        if (yv) ys.push_back(*yv);
        // Only the final row (the terminal state) may omit u.
        if (!uv && static_cast<Eigen::Index>(xs.size()) != static_cast<Eigen::Index>(us.size()) + 1)
            csv_error(line, 2, "missing input sample");
    }

    Trajectory traj{std::move(us), std::move(xs), std::move(ys)};
    traj.validate();
    return traj;
}

Trajectory trajectory_from_csv_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open '" + path + "'");
    return trajectory_from_csv(in);
}

void trajectory_to_csv(const Trajectory& traj, std::ostream& out) {
    traj.validate();
    const auto m = traj.input_dim();
    const auto n = traj.state_dim();
    const auto p = traj.output_dim();
    out << "t";
    for (Eigen::Index i = 0; i < m; ++i) out << ",u_" << i;
    for (Eigen::Index i = 0; i < n; ++i) out << ",x_" << i;
    for (Eigen::Index i = 0; i < p; ++i) out << ",y_" << i;
    out << "\n";
    out << std::setprecision(17);
    const auto T = traj.horizon();
    const auto rows = traj.has_states() ? T + 1 : T;
    for (Eigen::Index t = 0; t < rows; ++t) {
        out << t;
        for (Eigen::Index i = 0; i < m; ++i) {
            out << ",";
            if (t < T) out << traj.u[static_cast<std::size_t>(t)](i);
        }
        for (Eigen::Index i = 0; i < n; ++i) out << "," << traj.x[static_cast<std::size_t>(t)](i);
        for (Eigen::Index i = 0; i < p; ++i) {
            out << ",";
            if (t < T) out << traj.y[static_cast<std::size_t>(t)](i);
        }
        out << "\n";
    }
}

}  // namespace ddn::data
