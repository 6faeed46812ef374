#pragma once

// Dense complex Hermitian linear algebra on labeled tensor-product spaces.
// Everything here is pure and reentrant; values are freely shareable across
// threads once constructed.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"

namespace qcycle {

using cplx = std::complex<double>;
using Eigen::MatrixXcd;
using Eigen::VectorXcd;
using Eigen::VectorXd;

// Default tolerances: well above double-precision noise for d <= 64, far
// below any physical population handled here.
inline constexpr double kTolHerm = 1e-10;
inline constexpr double kTolTrace = 1e-10;
inline constexpr double kTolPsd = 1e-10;
inline constexpr double kDefaultLogFloor = 1e-18;

struct SpaceFactor {
    std::string label;
    int dim = 0;

    bool operator==(const SpaceFactor&) const = default;
};

/// Ordered list of labeled tensor factors. The canonical experiment layout is
/// atom(2) x cavity(4); basis ordering is first-factor major (|e0>, |e1>, ...,
/// |g0>, ...).
class SpaceLayout {
  public:
    SpaceLayout() = default;

    explicit SpaceLayout(std::vector<SpaceFactor> factors) : factors_(std::move(factors)) {
        for (std::size_t i = 0; i < factors_.size(); ++i) {
            if (factors_[i].dim < 1)
                throw std::invalid_argument("SpaceLayout: factor dim must be >= 1");
            for (std::size_t j = i + 1; j < factors_.size(); ++j)
                if (factors_[i].label == factors_[j].label)
                    throw std::invalid_argument("SpaceLayout: duplicate label '" +
                                                factors_[i].label + "'");
        }
    }

    const std::vector<SpaceFactor>& factors() const { return factors_; }
    std::size_t num_factors() const { return factors_.size(); }

    int total_dim() const {
        int d = 1;
        for (const auto& f : factors_) d *= f.dim;
        return d;
    }

    bool has_label(const std::string& label) const {
        for (const auto& f : factors_)
            if (f.label == label) return true;
        return false;
    }

    std::size_t factor_index(const std::string& label) const {
        for (std::size_t i = 0; i < factors_.size(); ++i)
            if (factors_[i].label == label) return i;
        throw std::invalid_argument("SpaceLayout: unknown label '" + label + "'");
    }

    int dim_of(const std::string& label) const { return factors_[factor_index(label)].dim; }

    // Row-major ravel: the first factor is the most significant index.
    int ravel(const std::vector<int>& idx) const {
        int flat = 0;
        for (std::size_t f = 0; f < factors_.size(); ++f) flat = flat * factors_[f].dim + idx[f];
        return flat;
    }

    std::vector<int> unravel(int flat) const {
        std::vector<int> idx(factors_.size());
        for (std::size_t f = factors_.size(); f-- > 0;) {
            idx[f] = flat % factors_[f].dim;
            flat /= factors_[f].dim;
        }
        return idx;
    }

    bool operator==(const SpaceLayout&) const = default;

  private:
    std::vector<SpaceFactor> factors_;
};

inline SpaceLayout atom_cavity_layout(int cavity_dim = 4) {
    return SpaceLayout({{"atom", 2}, {"cavity", cavity_dim}});
}

/// Positive semidefinite, unit-trace Hermitian matrix on a labeled space.
/// Channel and stage functions construct instances directly (they preserve
/// validity); use make() or validate_density() when the source is untrusted.
struct DensityOperator {
    SpaceLayout layout;
    MatrixXcd matrix;

    static DensityOperator make(SpaceLayout layout, MatrixXcd m);
};

struct UnitaryOperator {
    SpaceLayout layout;
    MatrixXcd matrix;
};

// ---------------------------------------------------------------------------
// Basic constructions

inline MatrixXcd kron(const MatrixXcd& a, const MatrixXcd& b) {
    MatrixXcd out(a.rows() * b.rows(), a.cols() * b.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i)
        for (Eigen::Index j = 0; j < a.cols(); ++j)
            out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    return out;
}

inline SpaceLayout concat_layouts(const SpaceLayout& a, const SpaceLayout& b) {
    std::vector<SpaceFactor> factors = a.factors();
    for (const auto& f : b.factors()) {
        if (a.has_label(f.label))
            throw std::invalid_argument("tensor_product: label collision '" + f.label + "'");
        factors.push_back(f);
    }
    return SpaceLayout(std::move(factors));
}

inline DensityOperator tensor_product(const DensityOperator& a, const DensityOperator& b) {
    return {concat_layouts(a.layout, b.layout), kron(a.matrix, b.matrix)};
}

inline UnitaryOperator tensor_product(const UnitaryOperator& a, const UnitaryOperator& b) {
    return {concat_layouts(a.layout, b.layout), kron(a.matrix, b.matrix)};
}

inline VectorXcd basis_ket(const SpaceLayout& layout, const std::vector<int>& idx) {
    VectorXcd v = VectorXcd::Zero(layout.total_dim());
    v(layout.ravel(idx)) = 1.0;
    return v;
}

inline DensityOperator pure_density(const SpaceLayout& layout, const VectorXcd& ket) {
    VectorXcd n = ket / ket.norm();
    return {layout, n * n.adjoint()};
}

inline DensityOperator basis_projector(const SpaceLayout& layout, const std::vector<int>& idx) {
    return pure_density(layout, basis_ket(layout, idx));
}

inline DensityOperator maximally_mixed(const SpaceLayout& layout) {
    int d = layout.total_dim();
    return {layout, MatrixXcd::Identity(d, d) / double(d)};
}

// ---------------------------------------------------------------------------
// Partial trace

/// Reduced operator on the kept factors (original factor order preserved).
/// Trace is preserved: Tr(partial_trace(rho, keep)) = Tr(rho).
inline DensityOperator partial_trace(const DensityOperator& rho,
                                     const std::vector<std::string>& keep) {
    if (keep.empty()) throw std::invalid_argument("partial_trace: keep set must be nonempty");
    for (const auto& l : keep) (void)rho.layout.factor_index(l);

    const auto& factors = rho.layout.factors();
    std::vector<bool> kept(factors.size(), false);
    for (const auto& l : keep) kept[rho.layout.factor_index(l)] = true;

    std::vector<SpaceFactor> kept_factors;
    int keep_dim = 1, trace_dim = 1;
    for (std::size_t f = 0; f < factors.size(); ++f) {
        if (kept[f]) {
            kept_factors.push_back(factors[f]);
            keep_dim *= factors[f].dim;
        } else {
            trace_dim *= factors[f].dim;
        }
    }
    SpaceLayout out_layout(kept_factors);

    // Map (kept multi-index, traced multi-index) back to a flat index.
    const int n = int(factors.size());
    std::vector<int> idx(n);
    auto flat_of = [&](int k, int t) {
        for (int f = n - 1; f >= 0; --f) {
            int d = factors[f].dim;
            if (kept[f]) {
                idx[f] = k % d;
                k /= d;
            } else {
                idx[f] = t % d;
                t /= d;
            }
        }
        return rho.layout.ravel(idx);
    };
    // flat_of consumes the least-significant component first, so precompute
    // the flat index for every (kept, traced) pair.
    std::vector<int> flat(std::size_t(keep_dim) * trace_dim);
    for (int k = 0; k < keep_dim; ++k)
        for (int t = 0; t < trace_dim; ++t) flat[std::size_t(k) * trace_dim + t] = flat_of(k, t);

    MatrixXcd out = MatrixXcd::Zero(keep_dim, keep_dim);
    for (int i = 0; i < keep_dim; ++i)
        for (int j = 0; j < keep_dim; ++j) {
            cplx s = 0.0;
            for (int t = 0; t < trace_dim; ++t)
                s += rho.matrix(flat[std::size_t(i) * trace_dim + t],
                                flat[std::size_t(j) * trace_dim + t]);
            out(i, j) = s;
        }
    return {std::move(out_layout), std::move(out)};
}

// ---------------------------------------------------------------------------
// Hermitian eigendecomposition with deterministic ordering

struct EigResult {
    VectorXd eigenvalues;   // ascending
    MatrixXcd eigenvectors; // columns, orthonormal
};

namespace detail {

// Canonical global phase: largest-magnitude entry made real positive.
inline void canonicalize_phase(Eigen::Ref<VectorXcd> v) {
    Eigen::Index k = 0;
    double best = 0.0;
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        double a = std::abs(v(i));
        if (a > best) {
            best = a;
            k = i;
        }
    }
    if (best > 0.0) v *= std::conj(v(k)) / best;
}

inline long long round9(double x) { return llround(x * 1e9); }

// Lexicographic order on rounded entries; the vector whose first differing
// rounded component (real part, then imaginary part) is larger comes first,
// so standard-basis vectors keep their natural order.
inline bool lex_before(const VectorXcd& a, const VectorXcd& b) {
    for (Eigen::Index i = 0; i < a.size(); ++i) {
        long long ar = round9(a(i).real()), br = round9(b(i).real());
        if (ar != br) return ar > br;
        long long ai = round9(a(i).imag()), bi = round9(b(i).imag());
        if (ai != bi) return ai > bi;
    }
    return false;
}

} // namespace detail

inline double hermiticity_defect(const MatrixXcd& m) {
    return (m - m.adjoint()).cwiseAbs().maxCoeff();
}

/// Eigendecomposition of a Hermitian matrix. Eigenvalues ascending; within a
/// degenerate cluster the (phase-canonicalized) eigenvectors are ordered
/// lexicographically on their rounded entries, so dephasing bases and Gibbs
/// ground spaces are reproducible run to run.
inline EigResult hermitian_eig(const MatrixXcd& m, double tol_herm = kTolHerm) {
    if (m.rows() != m.cols()) throw std::invalid_argument("hermitian_eig: matrix not square");
    if (hermiticity_defect(m) > tol_herm)
        throw std::invalid_argument("hermitian_eig: matrix not Hermitian within tolerance");

    MatrixXcd h = 0.5 * (m + m.adjoint());
    Eigen::SelfAdjointEigenSolver<MatrixXcd> solver(h);
    if (solver.info() != Eigen::Success)
        throw std::runtime_error("hermitian_eig: eigensolver failed");

    EigResult r{solver.eigenvalues(), solver.eigenvectors()};
    for (Eigen::Index c = 0; c < r.eigenvectors.cols(); ++c)
        detail::canonicalize_phase(r.eigenvectors.col(c));

    // Reorder inside clusters of (near-)equal eigenvalues.
    const double scale = std::max(1.0, r.eigenvalues.cwiseAbs().maxCoeff());
    const double tie_tol = 1e-9 * scale;
    Eigen::Index n = r.eigenvalues.size();
    for (Eigen::Index lo = 0; lo < n;) {
        Eigen::Index hi = lo + 1;
        while (hi < n && r.eigenvalues(hi) - r.eigenvalues(lo) <= tie_tol) ++hi;
        if (hi - lo > 1) {
            std::vector<Eigen::Index> order(hi - lo);
            std::iota(order.begin(), order.end(), lo);
            std::sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
                return detail::lex_before(r.eigenvectors.col(a), r.eigenvectors.col(b));
            });
            MatrixXcd cols(r.eigenvectors.rows(), hi - lo);
            VectorXd vals(hi - lo);
            for (Eigen::Index k = 0; k < hi - lo; ++k) {
                cols.col(k) = r.eigenvectors.col(order[k]);
                vals(k) = r.eigenvalues(order[k]);
            }
            r.eigenvectors.middleCols(lo, hi - lo) = cols;
            r.eigenvalues.segment(lo, hi - lo) = vals;
        }
        lo = hi;
    }
    return r;
}

// ---------------------------------------------------------------------------
// Matrix functions of Hermitian operators

/// V ln(clamp(Lambda, floor)) V^dagger. Exact for full-rank input with minimum
/// eigenvalue >= floor; rank-deficient directions land at ln(floor).
inline MatrixXcd matrix_log_clamped(const MatrixXcd& rho, double floor = kDefaultLogFloor,
                                    double tol_psd = kTolPsd) {
    if (!(floor > 0.0)) throw std::invalid_argument("matrix_log_clamped: floor must be > 0");
    EigResult eig = hermitian_eig(rho);
    if (eig.eigenvalues.minCoeff() < -tol_psd)
        throw std::invalid_argument("matrix_log_clamped: input not PSD within tolerance");
    VectorXd logs(eig.eigenvalues.size());
    for (Eigen::Index i = 0; i < logs.size(); ++i)
        logs(i) = std::log(std::max(eig.eigenvalues(i), floor));
    return eig.eigenvectors * logs.asDiagonal() * eig.eigenvectors.adjoint();
}

// ---------------------------------------------------------------------------
// Diagnostics

struct DensityDiagnostics {
    double herm_defect = 0.0;
    double trace_defect = 0.0;
    double min_eigenvalue = 0.0;
    bool herm_ok = false;
    bool trace_ok = false;
    bool psd_ok = false;

    bool ok() const { return herm_ok && trace_ok && psd_ok; }
};

inline DensityDiagnostics validate_density(const MatrixXcd& m, double tol_herm = kTolHerm,
                                           double tol_trace = kTolTrace,
                                           double tol_psd = kTolPsd) {
    if (m.rows() != m.cols()) throw std::invalid_argument("validate_density: matrix not square");
    DensityDiagnostics d;
    d.herm_defect = hermiticity_defect(m);
    d.trace_defect = std::abs(m.trace() - cplx(1.0, 0.0));
    MatrixXcd h = 0.5 * (m + m.adjoint());
    Eigen::SelfAdjointEigenSolver<MatrixXcd> solver(h, Eigen::EigenvaluesOnly);
    d.min_eigenvalue = solver.eigenvalues().minCoeff();
    d.herm_ok = d.herm_defect <= tol_herm;
    d.trace_ok = d.trace_defect <= tol_trace;
    d.psd_ok = d.min_eigenvalue >= -tol_psd;
    return d;
}

inline DensityOperator DensityOperator::make(SpaceLayout layout, MatrixXcd m) {
    if (m.rows() != layout.total_dim() || m.cols() != layout.total_dim())
        throw std::invalid_argument("DensityOperator: matrix size does not match layout");
    DensityDiagnostics d = validate_density(m);
    if (!d.ok()) throw std::invalid_argument("DensityOperator: matrix is not a valid state");
    return {std::move(layout), std::move(m)};
}

// ---------------------------------------------------------------------------
// Distances

inline double trace_norm(const MatrixXcd& m) {
    EigResult eig = hermitian_eig(m);
    return eig.eigenvalues.cwiseAbs().sum();
}

inline double trace_distance(const DensityOperator& a, const DensityOperator& b) {
    return 0.5 * trace_norm(a.matrix - b.matrix);
}

/// Uhlmann fidelity (Tr sqrt(sqrt(rho) sigma sqrt(rho)))^2.
inline double fidelity(const DensityOperator& rho, const DensityOperator& sigma) {
    EigResult eig = hermitian_eig(rho.matrix);
    VectorXd sq = eig.eigenvalues.cwiseMax(0.0).cwiseSqrt();
    MatrixXcd root = eig.eigenvectors * sq.asDiagonal() * eig.eigenvectors.adjoint();
    EigResult inner = hermitian_eig(root * sigma.matrix * root);
    double f = inner.eigenvalues.cwiseMax(0.0).cwiseSqrt().sum();
    return f * f;
}

inline double purity(const DensityOperator& rho) {
    return (rho.matrix * rho.matrix).trace().real();
}

// ---------------------------------------------------------------------------
// JSON serialization: {layout, real, imag} with row-major nested arrays.
// Doubles survive the round trip exactly (shortest round-trip formatting).

inline void to_json(nlohmann::json& j, const SpaceFactor& f) {
    j = nlohmann::json{{"label", f.label}, {"dim", f.dim}};
}

inline void from_json(const nlohmann::json& j, SpaceFactor& f) {
    j.at("label").get_to(f.label);
    j.at("dim").get_to(f.dim);
}

inline void to_json(nlohmann::json& j, const SpaceLayout& layout) {
    j = nlohmann::json{{"factors", layout.factors()}};
}

inline void from_json(const nlohmann::json& j, SpaceLayout& layout) {
    layout = SpaceLayout(j.at("factors").get<std::vector<SpaceFactor>>());
}

namespace detail {

inline nlohmann::json matrix_part_to_json(const MatrixXcd& m, bool imag) {
    nlohmann::json rows = nlohmann::json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        nlohmann::json row = nlohmann::json::array();
        for (Eigen::Index j = 0; j < m.cols(); ++j)
            row.push_back(imag ? m(i, j).imag() : m(i, j).real());
        rows.push_back(std::move(row));
    }
    return rows;
}

inline MatrixXcd matrix_from_json(const nlohmann::json& j) {
    const auto& re = j.at("real");
    const auto& im = j.at("imag");
    auto rows = re.size();
    if (rows == 0 || im.size() != rows)
        throw std::invalid_argument("matrix_from_json: inconsistent parts");
    auto cols = re.at(0).size();
    MatrixXcd m(rows, cols);
    for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t c = 0; c < cols; ++c)
            m(i, c) = cplx(re.at(i).at(c).get<double>(), im.at(i).at(c).get<double>());
    return m;
}

} // namespace detail

inline void to_json(nlohmann::json& j, const DensityOperator& rho) {
    j = nlohmann::json{{"layout", rho.layout},
                       {"real", detail::matrix_part_to_json(rho.matrix, false)},
                       {"imag", detail::matrix_part_to_json(rho.matrix, true)}};
}

inline void from_json(const nlohmann::json& j, DensityOperator& rho) {
    j.at("layout").get_to(rho.layout);
    rho.matrix = detail::matrix_from_json(j);
}

inline void to_json(nlohmann::json& j, const UnitaryOperator& u) {
    j = nlohmann::json{{"layout", u.layout},
                       {"real", detail::matrix_part_to_json(u.matrix, false)},
                       {"imag", detail::matrix_part_to_json(u.matrix, true)}};
}

inline void from_json(const nlohmann::json& j, UnitaryOperator& u) {
    j.at("layout").get_to(u.layout);
    u.matrix = detail::matrix_from_json(j);
}

} // namespace qcycle
