#pragma once

// Dense kernels for the small matrices this library works with (a few dozen
// rows at most). Everything is unblocked and allocation-light on purpose; the
// results are bit-reproducible across runs.

#include <algorithm>
#include <cassert>
#include <cmath>
#include <complex>
#include <cstddef>
#include <initializer_list>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "pbelab/error.hpp"

namespace pbelab {

using Vector = std::vector<double>;

/// Row-major dense real matrix.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
    Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
        : rows_(rows), cols_(cols), data_(std::move(data)) {
        if (data_.size() != rows_ * cols_)
            throw Error(ErrorKind::InvalidArgument, "matrix data length does not match shape");
    }
    Matrix(std::initializer_list<std::initializer_list<double>> rows) {
        rows_ = rows.size();
        cols_ = rows_ == 0 ? 0 : rows.begin()->size();
        data_.reserve(rows_ * cols_);
        for (const auto& r : rows) {
            if (r.size() != cols_)
                throw Error(ErrorKind::InvalidArgument, "ragged matrix literal");
            data_.insert(data_.end(), r.begin(), r.end());
        }
    }

    static Matrix identity(std::size_t n) {
        Matrix m(n, n);
        for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
        return m;
    }
    static Matrix diagonal(std::span<const double> d) {
        Matrix m(d.size(), d.size());
        for (std::size_t i = 0; i < d.size(); ++i) m(i, i) = d[i];
        return m;
    }

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    bool square() const noexcept { return rows_ == cols_; }

    double& operator()(std::size_t i, std::size_t j) {
        assert(i < rows_ && j < cols_);
        return data_[i * cols_ + j];
    }
    double operator()(std::size_t i, std::size_t j) const {
        assert(i < rows_ && j < cols_);
        return data_[i * cols_ + j];
    }

    std::span<double> row(std::size_t i) { return {data_.data() + i * cols_, cols_}; }
    std::span<const double> row(std::size_t i) const { return {data_.data() + i * cols_, cols_}; }

    const std::vector<double>& data() const noexcept { return data_; }

    Matrix transpose() const {
        Matrix t(cols_, rows_);
        for (std::size_t i = 0; i < rows_; ++i)
            for (std::size_t j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
        return t;
    }

    bool all_finite() const {
        return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
    }

    friend bool operator==(const Matrix&, const Matrix&) = default;

    Matrix& operator+=(const Matrix& o) {
        check_same_shape(o);
        for (std::size_t k = 0; k < data_.size(); ++k) data_[k] += o.data_[k];
        return *this;
    }
    Matrix& operator-=(const Matrix& o) {
        check_same_shape(o);
        for (std::size_t k = 0; k < data_.size(); ++k) data_[k] -= o.data_[k];
        return *this;
    }
    Matrix& operator*=(double s) {
        for (double& v : data_) v *= s;
        return *this;
    }

private:
    void check_same_shape(const Matrix& o) const {
        if (rows_ != o.rows_ || cols_ != o.cols_)
            throw Error(ErrorKind::InvalidArgument, "matrix shape mismatch");
    }

    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

inline Matrix operator+(Matrix a, const Matrix& b) { return a += b; }
inline Matrix operator-(Matrix a, const Matrix& b) { return a -= b; }
inline Matrix operator*(double s, Matrix a) { return a *= s; }

inline Matrix operator*(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows()) throw Error(ErrorKind::InvalidArgument, "matrix product shape mismatch");
    Matrix c(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t k = 0; k < a.cols(); ++k) {
            const double aik = a(i, k);
            if (aik == 0.0) continue;
            for (std::size_t j = 0; j < b.cols(); ++j) c(i, j) += aik * b(k, j);
        }
    return c;
}

inline Vector operator*(const Matrix& a, std::span<const double> x) {
    if (a.cols() != x.size()) throw Error(ErrorKind::InvalidArgument, "matrix-vector shape mismatch");
    Vector y(a.rows(), 0.0);
    for (std::size_t i = 0; i < a.rows(); ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < a.cols(); ++j) acc += a(i, j) * x[j];
        y[i] = acc;
    }
    return y;
}
inline Vector operator*(const Matrix& a, const Vector& x) { return a * std::span<const double>(x); }

/// xᵀA, i.e. the row vector times a matrix.
inline Vector left_multiply(std::span<const double> x, const Matrix& a) {
    if (a.rows() != x.size()) throw Error(ErrorKind::InvalidArgument, "vector-matrix shape mismatch");
    Vector y(a.cols(), 0.0);
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) y[j] += x[i] * a(i, j);
    return y;
}

inline double dot(std::span<const double> a, std::span<const double> b) {
    assert(a.size() == b.size());
    return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

inline double max_abs(std::span<const double> v) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
}

inline double distance_inf(std::span<const double> a, std::span<const double> b) {
    assert(a.size() == b.size());
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

inline double norm2(std::span<const double> v) { return std::sqrt(dot(v, v)); }

/// Max over rows of the absolute row sum.
inline double infinity_norm(const Matrix& a) {
    double best = 0.0;
    for (std::size_t i = 0; i < a.rows(); ++i) {
        double s = 0.0;
        for (double v : a.row(i)) s += std::abs(v);
        best = std::max(best, s);
    }
    return best;
}

/// LU factorization with partial pivoting. A pivot is treated as zero when it
/// falls below Tolerances::pivot relative to the largest entry of the input, or
/// relative to `scale_hint` when the input was formed by cancelling larger terms.
class LuFactorization {
public:
    explicit LuFactorization(Matrix a, double scale_hint = 0.0) : lu_(std::move(a)), perm_(lu_.rows()) {
        if (!lu_.square()) throw Error(ErrorKind::InvalidArgument, "LU needs a square matrix");
        const std::size_t n = lu_.rows();
        std::iota(perm_.begin(), perm_.end(), std::size_t{0});
        const double scale = std::max(max_abs(lu_.data()), scale_hint);
        if (!(scale > 0.0) || !std::isfinite(scale))
            throw Error(ErrorKind::SingularSystem, "matrix is zero or non-finite");
        for (std::size_t k = 0; k < n; ++k) {
            std::size_t p = k;
            for (std::size_t i = k + 1; i < n; ++i)
                if (std::abs(lu_(i, k)) > std::abs(lu_(p, k))) p = i;
            if (std::abs(lu_(p, k)) < Tolerances::pivot * scale)
                throw Error(ErrorKind::SingularSystem,
                            "pivot " + std::to_string(k) + " vanishes (|pivot| = " +
                                std::to_string(std::abs(lu_(p, k))) + ")");
            if (p != k) {
                std::swap_ranges(lu_.row(p).begin(), lu_.row(p).end(), lu_.row(k).begin());
                std::swap(perm_[p], perm_[k]);
            }
            const double pivot = lu_(k, k);
            for (std::size_t i = k + 1; i < n; ++i) {
                const double f = lu_(i, k) / pivot;
                lu_(i, k) = f;
                if (f == 0.0) continue;
                for (std::size_t j = k + 1; j < n; ++j) lu_(i, j) -= f * lu_(k, j);
            }
        }
    }

    std::size_t size() const noexcept { return lu_.rows(); }

    Vector solve(std::span<const double> b) const {
        const std::size_t n = size();
        if (b.size() != n) throw Error(ErrorKind::InvalidArgument, "right-hand side length mismatch");
        Vector x(n);
        for (std::size_t i = 0; i < n; ++i) x[i] = b[perm_[i]];
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < i; ++j) x[i] -= lu_(i, j) * x[j];
        for (std::size_t i = n; i-- > 0;) {
            for (std::size_t j = i + 1; j < n; ++j) x[i] -= lu_(i, j) * x[j];
            x[i] /= lu_(i, i);
        }
        return x;
    }

    Matrix solve(const Matrix& b) const {
        if (b.rows() != size()) throw Error(ErrorKind::InvalidArgument, "right-hand side shape mismatch");
        Matrix x(b.rows(), b.cols());
        Vector col(b.rows());
        for (std::size_t j = 0; j < b.cols(); ++j) {
            for (std::size_t i = 0; i < b.rows(); ++i) col[i] = b(i, j);
            const Vector sol = solve(col);
            for (std::size_t i = 0; i < b.rows(); ++i) x(i, j) = sol[i];
        }
        return x;
    }

private:
    Matrix lu_;
    std::vector<std::size_t> perm_;
};

/// Solves a·x = b by Gaussian elimination with partial pivoting.
inline Vector solve_linear(const Matrix& a, std::span<const double> b) {
    return LuFactorization(a).solve(b);
}
inline Vector solve_linear(const Matrix& a, const Vector& b) {
    return solve_linear(a, std::span<const double>(b));
}
inline Matrix solve_linear(const Matrix& a, const Matrix& b) { return LuFactorization(a).solve(b); }

struct EigenSpectrum {
    std::vector<std::complex<double>> values;
    bool converged = true;

    double spectral_radius() const {
        double r = 0.0;
        for (const auto& v : values) r = std::max(r, std::abs(v));
        return r;
    }
    double max_real_part() const {
        double r = -std::numeric_limits<double>::infinity();
        for (const auto& v : values) r = std::max(r, v.real());
        return r;
    }
};

namespace detail {

// Diagonal similarity scaling by powers of the radix; improves QR accuracy on
// badly scaled inputs without changing the spectrum.
inline void balance(Matrix& a) {
    const double radix = std::numeric_limits<double>::radix;
    const double sqrdx = radix * radix;
    const std::size_t n = a.rows();
    bool done = false;
    while (!done) {
        done = true;
        for (std::size_t i = 0; i < n; ++i) {
            double r = 0.0, c = 0.0;
            for (std::size_t j = 0; j < n; ++j)
                if (j != i) {
                    c += std::abs(a(j, i));
                    r += std::abs(a(i, j));
                }
            if (c == 0.0 || r == 0.0) continue;
            double g = r / radix;
            double f = 1.0;
            const double s = c + r;
            while (c < g) {
                f *= radix;
                c *= sqrdx;
            }
            g = r * radix;
            while (c > g) {
                f /= radix;
                c /= sqrdx;
            }
            if ((c + r) / f < 0.95 * s) {
                done = false;
                g = 1.0 / f;
                for (std::size_t j = 0; j < n; ++j) a(i, j) *= g;
                for (std::size_t j = 0; j < n; ++j) a(j, i) *= f;
            }
        }
    }
}

// Householder reduction to upper Hessenberg form.
inline void to_hessenberg(Matrix& a) {
    const std::size_t n = a.rows();
    if (n < 3) return;
    Vector v(n);
    for (std::size_t k = 0; k + 2 < n; ++k) {
        double norm = 0.0;
        for (std::size_t i = k + 1; i < n; ++i) norm += a(i, k) * a(i, k);
        norm = std::sqrt(norm);
        if (norm == 0.0) continue;
        const double alpha = a(k + 1, k) > 0 ? -norm : norm;
        std::fill(v.begin(), v.end(), 0.0);
        for (std::size_t i = k + 1; i < n; ++i) v[i] = a(i, k);
        v[k + 1] -= alpha;
        double vnorm2 = 0.0;
        for (std::size_t i = k + 1; i < n; ++i) vnorm2 += v[i] * v[i];
        if (vnorm2 == 0.0) continue;
        // A <- H A with H = I - 2 v vᵀ / (vᵀv)
        for (std::size_t j = 0; j < n; ++j) {
            double s = 0.0;
            for (std::size_t i = k + 1; i < n; ++i) s += v[i] * a(i, j);
            s = 2.0 * s / vnorm2;
            for (std::size_t i = k + 1; i < n; ++i) a(i, j) -= s * v[i];
        }
        // A <- A H
        for (std::size_t i = 0; i < n; ++i) {
            double s = 0.0;
            for (std::size_t j = k + 1; j < n; ++j) s += a(i, j) * v[j];
            s = 2.0 * s / vnorm2;
            for (std::size_t j = k + 1; j < n; ++j) a(i, j) -= s * v[j];
        }
        for (std::size_t i = k + 2; i < n; ++i) a(i, k) = 0.0;
    }
}

inline double copy_sign(double magnitude, double sign) {
    return sign >= 0.0 ? std::abs(magnitude) : -std::abs(magnitude);
}

// Francis double-shift QR on an upper Hessenberg matrix (EISPACK hqr layout).
// Returns false when the sweep budget is exhausted.
inline bool hessenberg_qr(Matrix& a, std::vector<std::complex<double>>& w, std::size_t max_sweeps) {
    const int n = static_cast<int>(a.rows());
    const double eps = std::numeric_limits<double>::epsilon();
    double anorm = 0.0;
    for (int i = 0; i < n; ++i)
        for (int j = std::max(i - 1, 0); j < n; ++j) anorm += std::abs(a(i, j));

    w.assign(static_cast<std::size_t>(n), {0.0, 0.0});
    std::size_t sweeps = 0;
    int nn = n - 1;
    double t = 0.0;
    double p = 0, q = 0, r = 0, s = 0, x = 0, y = 0, z = 0, u = 0, v = 0, ww = 0;
    while (nn >= 0) {
        int its = 0;
        int l = 0;
        do {
            for (l = nn; l > 0; --l) {
                s = std::abs(a(l - 1, l - 1)) + std::abs(a(l, l));
                if (s == 0.0) s = anorm;
                if (std::abs(a(l, l - 1)) <= eps * s) {
                    a(l, l - 1) = 0.0;
                    break;
                }
            }
            x = a(nn, nn);
            if (l == nn) {
                w[nn--] = {x + t, 0.0};
            } else {
                y = a(nn - 1, nn - 1);
                ww = a(nn, nn - 1) * a(nn - 1, nn);
                if (l == nn - 1) {
                    p = 0.5 * (y - x);
                    q = p * p + ww;
                    z = std::sqrt(std::abs(q));
                    x += t;
                    if (q >= 0.0) {
                        z = p + copy_sign(z, p);
                        w[nn - 1] = w[nn] = {x + z, 0.0};
                        if (z != 0.0) w[nn] = {x - ww / z, 0.0};
                    } else {
                        w[nn] = {x + p, -z};
                        w[nn - 1] = std::conj(w[nn]);
                    }
                    nn -= 2;
                } else {
                    if (++sweeps > max_sweeps) return false;
                    if (its > 0 && its % 10 == 0) {
                        // exceptional shift
                        t += x;
                        for (int i = 0; i <= nn; ++i) a(i, i) -= x;
                        s = std::abs(a(nn, nn - 1)) + std::abs(a(nn - 1, nn - 2));
                        y = x = 0.75 * s;
                        ww = -0.4375 * s * s;
                    }
                    ++its;
                    int m = nn - 2;
                    for (; m >= l; --m) {
                        z = a(m, m);
                        r = x - z;
                        s = y - z;
                        p = (r * s - ww) / a(m + 1, m) + a(m, m + 1);
                        q = a(m + 1, m + 1) - z - r - s;
                        r = a(m + 2, m + 1);
                        s = std::abs(p) + std::abs(q) + std::abs(r);
                        p /= s;
                        q /= s;
                        r /= s;
                        if (m == l) break;
                        u = std::abs(a(m, m - 1)) * (std::abs(q) + std::abs(r));
                        v = std::abs(p) * (std::abs(a(m - 1, m - 1)) + std::abs(z) + std::abs(a(m + 1, m + 1)));
                        if (u <= eps * v) break;
                    }
                    for (int i = m; i < nn - 1; ++i) {
                        a(i + 2, i) = 0.0;
                        if (i != m) a(i + 2, i - 1) = 0.0;
                    }
                    for (int k = m; k < nn; ++k) {
                        if (k != m) {
                            p = a(k, k - 1);
                            q = a(k + 1, k - 1);
                            r = 0.0;
                            if (k + 1 != nn) r = a(k + 2, k - 1);
                            if ((x = std::abs(p) + std::abs(q) + std::abs(r)) != 0.0) {
                                p /= x;
                                q /= x;
                                r /= x;
                            }
                        }
                        if ((s = copy_sign(std::sqrt(p * p + q * q + r * r), p)) != 0.0) {
                            if (k == m) {
                                if (l != m) a(k, k - 1) = -a(k, k - 1);
                            } else {
                                a(k, k - 1) = -s * x;
                            }
                            p += s;
                            x = p / s;
                            y = q / s;
                            z = r / s;
                            q /= p;
                            r /= p;
                            for (int j = k; j <= nn; ++j) {
                                p = a(k, j) + q * a(k + 1, j);
                                if (k + 1 != nn) {
                                    p += r * a(k + 2, j);
                                    a(k + 2, j) -= p * z;
                                }
                                a(k + 1, j) -= p * y;
                                a(k, j) -= p * x;
                            }
                            const int mmin = nn < k + 3 ? nn : k + 3;
                            for (int i = l; i <= mmin; ++i) {
                                p = x * a(i, k) + y * a(i, k + 1);
                                if (k + 1 != nn) {
                                    p += z * a(i, k + 2);
                                    a(i, k + 2) -= p * r;
                                }
                                a(i, k + 1) -= p * q;
                                a(i, k) -= p;
                            }
                        }
                    }
                }
            }
        } while (l < nn - 1);
    }
    return true;
}

// Replace each near-conjugate pair by its exact average so the reported
// spectrum is closed under conjugation.
inline void symmetrize_conjugates(std::vector<std::complex<double>>& w) {
    std::vector<bool> used(w.size(), false);
    for (std::size_t i = 0; i < w.size(); ++i) {
        if (used[i] || w[i].imag() == 0.0) continue;
        std::size_t best = w.size();
        double best_d = std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < w.size(); ++j) {
            if (j == i || used[j]) continue;
            const double d = std::abs(w[j] - std::conj(w[i]));
            if (d < best_d) {
                best_d = d;
                best = j;
            }
        }
        if (best == w.size()) continue;
        const double re = 0.5 * (w[i].real() + w[best].real());
        const double im = 0.5 * (std::abs(w[i].imag()) + std::abs(w[best].imag()));
        w[i] = {re, w[i].imag() > 0 ? im : -im};
        w[best] = std::conj(w[i]);
        used[i] = used[best] = true;
    }
}

}  // namespace detail

/// All eigenvalues via balancing, Hessenberg reduction and shifted QR.
/// converged is false when 100·n² QR sweeps were not enough.
inline EigenSpectrum eigenvalues(const Matrix& a) {
    if (!a.square()) throw Error(ErrorKind::InvalidArgument, "eigenvalues need a square matrix");
    if (a.rows() > 64) throw Error(ErrorKind::InvalidArgument, "eigenvalues supports dimension <= 64");
    if (!a.all_finite()) throw Error(ErrorKind::InvalidArgument, "matrix has non-finite entries");
    EigenSpectrum out;
    const std::size_t n = a.rows();
    if (n == 0) return out;
    Matrix h = a;
    detail::balance(h);
    detail::to_hessenberg(h);
    out.converged = detail::hessenberg_qr(h, out.values, 100 * n * n);
    if (out.converged) detail::symmetrize_conjugates(out.values);
    std::sort(out.values.begin(), out.values.end(), [](const auto& l, const auto& r) {
        return l.real() != r.real() ? l.real() > r.real() : l.imag() > r.imag();
    });
    return out;
}

/// Smallest eigenvalue of a symmetric matrix (symmetrized before use).
inline double min_symmetric_eigenvalue(const Matrix& a) {
    Matrix s = a;
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) s(i, j) = 0.5 * (a(i, j) + a(j, i));
    const EigenSpectrum spec = eigenvalues(s);
    if (!spec.converged) throw Error(ErrorKind::NoConvergence, "symmetric eigenvalue iteration");
    double m = std::numeric_limits<double>::infinity();
    for (const auto& v : spec.values) m = std::min(m, v.real());
    return m;
}

/// True when some power chainᵏ, k ≤ (n−1)²+1, is entrywise positive.
inline bool is_primitive(const Matrix& chain) {
    const std::size_t n = chain.rows();
    if (n == 0) return false;
    using Pattern = std::vector<char>;
    auto multiply = [n](const Pattern& x, const Pattern& y) {
        Pattern z(n * n, 0);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t k = 0; k < n; ++k) {
                if (!x[i * n + k]) continue;
                for (std::size_t j = 0; j < n; ++j) z[i * n + j] |= y[k * n + j];
            }
        return z;
    };
    Pattern base(n * n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) base[i * n + j] = chain(i, j) > 0.0;
    // Wielandt: primitive iff the power at the bound is positive.
    std::size_t e = (n - 1) * (n - 1) + 1;
    Pattern result;
    bool have = false;
    while (e > 0) {
        if (e & 1u) {
            result = have ? multiply(result, base) : base;
            have = true;
        }
        e >>= 1u;
        if (e > 0) base = multiply(base, base);
    }
    return std::all_of(result.begin(), result.end(), [](char c) { return c != 0; });
}

/// Invariant distribution μ of a primitive row-stochastic matrix.
inline Vector stationary_distribution(const Matrix& chain) {
    if (!chain.square()) throw Error(ErrorKind::InvalidArgument, "chain must be square");
    const std::size_t n = chain.rows();
    for (std::size_t i = 0; i < n; ++i) {
        double s = 0.0;
        for (double v : chain.row(i)) {
            if (v < 0.0) throw Error(ErrorKind::NegativeProbability, "chain has a negative entry");
            s += v;
        }
        if (std::abs(s - 1.0) > 1e-9) throw Error(ErrorKind::NonStochasticRow, "chain row " + std::to_string(i));
    }
    if (!is_primitive(chain))
        throw Error(ErrorKind::NotPrimitive, "chain is not irreducible and aperiodic");
    // (I − Pᵀ)μ = 0 with the last equation replaced by Σμ = 1.
    Matrix a = Matrix::identity(n) - chain.transpose();
    for (std::size_t j = 0; j < n; ++j) a(n - 1, j) = 1.0;
    Vector b(n, 0.0);
    b[n - 1] = 1.0;
    Vector mu = solve_linear(a, b);
    for (double& m : mu)
        if (m < 0.0 && m > -1e-14) m = 0.0;
    const double total = std::accumulate(mu.begin(), mu.end(), 0.0);
    for (double& m : mu) m /= total;
    return mu;
}

}  // namespace pbelab
