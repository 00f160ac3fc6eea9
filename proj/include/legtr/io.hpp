#pragma once

// CSV and MatrixMarket readers/writers. Doubles are written with %.17g and
// parsed with from_chars, so a write/read cycle reproduces every bit.

#include <array>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "legtr/error.hpp"
#include "legtr/forward_solver.hpp"
#include "legtr/grid.hpp"
#include "legtr/time_basis.hpp"

namespace legtr::io {

inline std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline double parse_double(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    if (!s.empty() && s.front() == '+') s.remove_prefix(1);
    double v = 0.0;
    const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size()) throw IoError("io", "not a number: '" + std::string(s) + "'");
    return v;
}

inline long parse_int(std::string_view s) {
    while (!s.empty() && (s.back() == '\r' || s.back() == ' ')) s.remove_suffix(1);
    long v = 0;
    const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size()) throw IoError("io", "not an integer: '" + std::string(s) + "'");
    return v;
}

inline std::vector<std::string_view> split(std::string_view line, char sep = ',') {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    for (;;) {
        const std::size_t pos = line.find(sep, start);
        out.push_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

inline std::ofstream open_out(const std::filesystem::path& path) {
    if (path.has_parent_path()) {
        std::error_code ec;
        std::filesystem::create_directories(path.parent_path(), ec);
        if (ec) throw IoError("io", "cannot create directory " + path.parent_path().string() + ": " + ec.message());
    }
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("io", "cannot open " + path.string() + " for writing");
    return f;
}

inline void close_out(std::ofstream& f, const std::filesystem::path& path) {
    f.close();
    if (!f) throw IoError("io", "write to " + path.string() + " failed");
}

inline std::vector<std::string> read_lines(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("io", "cannot open " + path.string());
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(f, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (!line.empty()) lines.push_back(line);
    }
    return lines;
}

inline void expect_header(const std::vector<std::string>& lines, const std::string& header, const std::filesystem::path& path) {
    if (lines.empty() || lines.front() != header)
        throw IoError("io", path.string() + ": expected header '" + header + "'");
}

// --- Fields ------------------------------------------------------------------

/// Columns x,y,u1,u2; one row per node, x fastest.
inline void write_field_csv(const std::filesystem::path& path, const VectorField2D& u) {
    std::ofstream f = open_out(path);
    const Grid2D& g = u.grid();
    f << "x,y,u1,u2\n";
    for (int j = 0; j < g.ny(); ++j)
        for (int i = 0; i < g.nx(); ++i)
            f << fmt(g.x(i)) << ',' << fmt(g.y(j)) << ',' << fmt(u(0, i, j)) << ',' << fmt(u(1, i, j)) << '\n';
    close_out(f, path);
}

/// Reads a field written by write_field_csv. The grid is recovered from the
/// coordinate columns and must be uniform.
inline VectorField2D read_field_csv(const std::filesystem::path& path) {
    const auto lines = read_lines(path);
    expect_header(lines, "x,y,u1,u2", path);
    std::vector<std::array<double, 4>> rows;
    rows.reserve(lines.size() - 1);
    for (std::size_t r = 1; r < lines.size(); ++r) {
        const auto cols = split(lines[r]);
        if (cols.size() != 4) throw IoError("io", path.string() + ": row " + std::to_string(r) + " does not have 4 columns");
        rows.push_back({parse_double(cols[0]), parse_double(cols[1]), parse_double(cols[2]), parse_double(cols[3])});
    }
    if (rows.size() < 4) throw IoError("io", path.string() + ": too few rows for a grid");
    int nx = 1;
    while (nx < static_cast<int>(rows.size()) && rows[nx][1] == rows[0][1]) ++nx;
    if (rows.size() % nx != 0) throw IoError("io", path.string() + ": row count is not a multiple of the row length");
    const int ny = static_cast<int>(rows.size() / nx);
    const Grid2D g(nx, ny, rows.front()[0], rows[nx - 1][0], rows.front()[1], rows.back()[1]);
    VectorField2D u(g);
    for (int j = 0; j < ny; ++j)
        for (int i = 0; i < nx; ++i) {
            const auto& row = rows[static_cast<std::size_t>(j) * nx + i];
            if (std::abs(row[0] - g.x(i)) > 1e-12 * (1.0 + std::abs(g.x(i))) ||
                std::abs(row[1] - g.y(j)) > 1e-12 * (1.0 + std::abs(g.y(j))))
                throw IoError("io", path.string() + ": coordinates are not a uniform row-major grid");
            u(0, i, j) = row[2];
            u(1, i, j) = row[3];
        }
    return u;
}

// --- Boundary traces -----------------------------------------------------------

inline constexpr const char* kTraceHeader = "step,time,boundary_node_id,x,y,nu_x,nu_y,f1,f2";

inline void write_trace_csv(const std::filesystem::path& path, const BoundaryTimeSeries& ts, const Grid2D& g) {
    const int nb = g.n_boundary();
    if (ts.n_boundary() != nb) throw ShapeError("io", "trace does not match the grid boundary");
    std::ofstream f = open_out(path);
    f << kTraceHeader << '\n';
    for (std::size_t s = 0; s < ts.times.size(); ++s)
        for (int b = 0; b < nb; ++b) {
            const BoundaryNode& n = g.boundary()[b];
            f << s << ',' << fmt(ts.times[s]) << ',' << b << ',' << fmt(g.x(n.i)) << ',' << fmt(g.y(n.j)) << ',' << n.nu_x
              << ',' << n.nu_y << ',' << fmt(ts.values(static_cast<Eigen::Index>(s), b)) << ','
              << fmt(ts.values(static_cast<Eigen::Index>(s), nb + b)) << '\n';
        }
    close_out(f, path);
}

/// Reads a trace for grid `g`; node ids, positions and normals must match.
inline BoundaryTimeSeries read_trace_csv(const std::filesystem::path& path, const Grid2D& g) {
    const auto lines = read_lines(path);
    expect_header(lines, kTraceHeader, path);
    const int nb = g.n_boundary();
    if ((lines.size() - 1) % nb != 0)
        throw ShapeError("io", path.string() + ": row count is not a multiple of the boundary size " + std::to_string(nb));
    const std::size_t n_steps = (lines.size() - 1) / nb;
    BoundaryTimeSeries ts;
    ts.times.resize(n_steps);
    ts.values.resize(static_cast<Eigen::Index>(n_steps), 2 * nb);
    for (std::size_t r = 1; r < lines.size(); ++r) {
        const auto c = split(lines[r]);
        if (c.size() != 9) throw IoError("io", path.string() + ": row " + std::to_string(r) + " does not have 9 columns");
        const std::size_t s = (r - 1) / nb;
        const int b = static_cast<int>((r - 1) % nb);
        if (parse_int(c[0]) != static_cast<long>(s) || parse_int(c[2]) != b)
            throw ShapeError("io", path.string() + ": unexpected step/node order at row " + std::to_string(r));
        const BoundaryNode& n = g.boundary()[b];
        if (parse_int(c[5]) != n.nu_x || parse_int(c[6]) != n.nu_y ||
            std::abs(parse_double(c[3]) - g.x(n.i)) > 1e-12 || std::abs(parse_double(c[4]) - g.y(n.j)) > 1e-12)
            throw ShapeError("io", path.string() + ": boundary node " + std::to_string(b) + " does not match the grid");
        const double t = parse_double(c[1]);
        if (b == 0) ts.times[s] = t;
        else if (t != ts.times[s]) throw ShapeError("io", path.string() + ": inconsistent time within step " + std::to_string(s));
        ts.values(static_cast<Eigen::Index>(s), b) = parse_double(c[7]);
        ts.values(static_cast<Eigen::Index>(s), nb + b) = parse_double(c[8]);
    }
    return ts;
}

// --- Coefficient tables ----------------------------------------------------------

inline void write_s_csv(const std::filesystem::path& path, const Eigen::MatrixXd& S) {
    std::ofstream f = open_out(path);
    f << "m,n,value\n";
    for (Eigen::Index m = 0; m < S.rows(); ++m)
        for (Eigen::Index n = 0; n < S.cols(); ++n) f << m << ',' << n << ',' << fmt(S(m, n)) << '\n';
    close_out(f, path);
}

inline void write_a_csv(const std::filesystem::path& path, const CouplingTensor& A) {
    std::ofstream f = open_out(path);
    f << "m,n,l,value\n";
    for (int m = 0; m < A.size(); ++m)
        for (int n = 0; n < A.size(); ++n)
            for (int l = 0; l < A.size(); ++l) f << m << ',' << n << ',' << l << ',' << fmt(A(m, n, l)) << '\n';
    close_out(f, path);
}

/// Basis values at the quadrature nodes: t, weight, psi_0..psi_N.
inline void write_basis_csv(const std::filesystem::path& path, const BasisTable& basis) {
    std::ofstream f = open_out(path);
    f << "t,weight";
    for (int n = 0; n < basis.modes(); ++n) f << ",psi_" << n;
    f << '\n';
    for (int q = 0; q < basis.n_nodes(); ++q) {
        f << fmt(basis.quadrature().nodes[q]) << ',' << fmt(basis.quadrature().weights[q]);
        for (int n = 0; n < basis.modes(); ++n) f << ',' << fmt(basis.psi()(n, q));
        f << '\n';
    }
    close_out(f, path);
}

// --- MatrixMarket ------------------------------------------------------------------

template <class Sparse>
void write_matrix_market(const std::filesystem::path& path, const Sparse& A) {
    std::ofstream f = open_out(path);
    f << "%%MatrixMarket matrix coordinate real general\n";
    f << A.rows() << ' ' << A.cols() << ' ' << A.nonZeros() << '\n';
    for (Eigen::Index o = 0; o < A.outerSize(); ++o)
        for (typename Sparse::InnerIterator it(A, o); it; ++it)
            f << it.row() + 1 << ' ' << it.col() + 1 << ' ' << fmt(it.value()) << '\n';
    close_out(f, path);
}

inline void write_matrix_market(const std::filesystem::path& path, const Eigen::VectorXd& v) {
    std::ofstream f = open_out(path);
    f << "%%MatrixMarket matrix array real general\n";
    f << v.size() << " 1\n";
    for (Eigen::Index k = 0; k < v.size(); ++k) f << fmt(v[k]) << '\n';
    close_out(f, path);
}

inline Eigen::SparseMatrix<double> read_matrix_market(const std::filesystem::path& path) {
    const auto lines = read_lines(path);
    if (lines.empty() || lines.front().rfind("%%MatrixMarket matrix coordinate real general", 0) != 0)
        throw IoError("io", path.string() + ": not a coordinate real general MatrixMarket file");
    std::size_t r = 1;
    while (r < lines.size() && lines[r][0] == '%') ++r;
    if (r >= lines.size()) throw IoError("io", path.string() + ": missing size line");
    std::istringstream head(lines[r]);
    long rows = 0, cols = 0, nnz = 0;
    head >> rows >> cols >> nnz;
    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(nnz);
    for (++r; r < lines.size(); ++r) {
        const auto c = split(lines[r], ' ');
        if (c.size() != 3) throw IoError("io", path.string() + ": malformed entry line");
        trips.emplace_back(parse_int(c[0]) - 1, parse_int(c[1]) - 1, parse_double(c[2]));
    }
    if (static_cast<long>(trips.size()) != nnz) throw IoError("io", path.string() + ": entry count mismatch");
    Eigen::SparseMatrix<double> A(rows, cols);
    A.setFromTriplets(trips.begin(), trips.end());
    return A;
}

inline Eigen::VectorXd read_matrix_market_vector(const std::filesystem::path& path) {
    const auto lines = read_lines(path);
    if (lines.empty() || lines.front().rfind("%%MatrixMarket matrix array real general", 0) != 0)
        throw IoError("io", path.string() + ": not an array real general MatrixMarket file");
    std::size_t r = 1;
    while (r < lines.size() && lines[r][0] == '%') ++r;
    if (r >= lines.size()) throw IoError("io", path.string() + ": missing size line");
    const auto head = split(lines[r], ' ');
    if (head.size() != 2 || parse_int(head[1]) != 1) throw IoError("io", path.string() + ": expected a single column");
    const long n = parse_int(head[0]);
    if (static_cast<long>(lines.size() - r - 1) != n) throw IoError("io", path.string() + ": entry count mismatch");
    Eigen::VectorXd v(n);
    for (long k = 0; k < n; ++k) v[k] = parse_double(lines[r + 1 + k]);
    return v;
}

} // namespace legtr::io
