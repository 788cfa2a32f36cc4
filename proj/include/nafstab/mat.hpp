#pragma once

#include <cassert>
#include <cmath>
#include <span>
#include <vector>

namespace nafstab {

// Small dense row-major matrix. Sized for the n_a x n_a and n_x x n_x blocks
// this project works with; not a general linear algebra library.
class Mat {
public:
    Mat() = default;
    Mat(int rows, int cols) : rows_(rows), cols_(cols), d_(static_cast<std::size_t>(rows) * cols, 0.0) {}

    static Mat identity(int n) {
        Mat m(n, n);
        for (int i = 0; i < n; ++i) m(i, i) = 1.0;
        return m;
    }

    int rows() const { return rows_; }
    int cols() const { return cols_; }

    double& operator()(int i, int j) { return d_[static_cast<std::size_t>(i) * cols_ + j]; }
    double operator()(int i, int j) const { return d_[static_cast<std::size_t>(i) * cols_ + j]; }

    std::span<const double> data() const { return d_; }
    std::span<double> data() { return d_; }

    void set_zero() { std::fill(d_.begin(), d_.end(), 0.0); }

    void resize(int rows, int cols) {
        rows_ = rows;
        cols_ = cols;
        d_.assign(static_cast<std::size_t>(rows) * cols, 0.0);
    }

    friend bool operator==(const Mat&, const Mat&) = default;

private:
    int rows_ = 0;
    int cols_ = 0;
    std::vector<double> d_;
};

// v' A v for square A
inline double quad_form(const Mat& a, std::span<const double> v) {
    assert(a.rows() == a.cols() && a.rows() == static_cast<int>(v.size()));
    double s = 0.0;
    for (int i = 0; i < a.rows(); ++i) {
        double row = 0.0;
        for (int j = 0; j < a.cols(); ++j) row += a(i, j) * v[j];
        s += v[i] * row;
    }
    return s;
}

inline std::vector<double> mat_vec(const Mat& a, std::span<const double> v) {
    assert(a.cols() == static_cast<int>(v.size()));
    std::vector<double> out(a.rows(), 0.0);
    for (int i = 0; i < a.rows(); ++i) {
        double s = 0.0;
        for (int j = 0; j < a.cols(); ++j) s += a(i, j) * v[j];
        out[i] = s;
    }
    return out;
}

inline bool is_symmetric(const Mat& a, double tol = 0.0) {
    if (a.rows() != a.cols()) return false;
    for (int i = 0; i < a.rows(); ++i)
        for (int j = i + 1; j < a.cols(); ++j)
            if (std::abs(a(i, j) - a(j, i)) > tol) return false;
    return true;
}

// Cholesky factorization a = l l'. Returns false if a is not (numerically)
// symmetric positive definite. l is lower-triangular.
inline bool cholesky(const Mat& a, Mat& l) {
    const int n = a.rows();
    if (a.cols() != n) return false;
    l.resize(n, n);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j <= i; ++j) {
            double s = a(i, j);
            for (int k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
            if (i == j) {
                if (!(s > 0.0)) return false;
                l(i, i) = std::sqrt(s);
            } else {
                l(i, j) = s / l(j, j);
            }
        }
    }
    return true;
}

// Solves (l l') x = b given the Cholesky factor l.
inline std::vector<double> cholesky_solve(const Mat& l, std::span<const double> b) {
    const int n = l.rows();
    assert(static_cast<int>(b.size()) == n);
    std::vector<double> y(b.begin(), b.end());
    for (int i = 0; i < n; ++i) {
        for (int k = 0; k < i; ++k) y[i] -= l(i, k) * y[k];
        y[i] /= l(i, i);
    }
    for (int i = n - 1; i >= 0; --i) {
        for (int k = i + 1; k < n; ++k) y[i] -= l(k, i) * y[k];
        y[i] /= l(i, i);
    }
    return y;
}

inline bool is_positive_definite(const Mat& a) {
    Mat l;
    return is_symmetric(a, 0.0) && cholesky(a, l);
}

}  // namespace nafstab
