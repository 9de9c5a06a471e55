#pragma once

// Small dense exact matrices over Z and Q, plus the Hermite normal form used
// for deterministic lattice bases.

#include <optional>
#include <string>
#include <vector>

#include "arithdyn/exact.hpp"

namespace arithdyn {

template <class T>
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, const T& fill = T(0))
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Matrix(std::initializer_list<std::initializer_list<T>> init) {
    rows_ = init.size();
    cols_ = rows_ ? init.begin()->size() : 0;
    for (const auto& r : init) {
      if (r.size() != cols_) fail(ErrorKind::InvalidInput, "ragged matrix literal");
      data_.insert(data_.end(), r.begin(), r.end());
    }
  }
  static Matrix from_rows(const std::vector<std::vector<T>>& rows) {
    Matrix m(rows.size(), rows.empty() ? 0 : rows[0].size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (rows[i].size() != m.cols_) fail(ErrorKind::InvalidInput, "ragged matrix");
      for (std::size_t j = 0; j < m.cols_; ++j) m(i, j) = rows[i][j];
    }
    return m;
  }
  static Matrix identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = T(1);
    return m;
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  bool square() const { return rows_ == cols_; }
  T& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  const T& operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

  std::vector<T> row(std::size_t i) const {
    return std::vector<T>(data_.begin() + i * cols_, data_.begin() + (i + 1) * cols_);
  }
  std::vector<T> col(std::size_t j) const {
    std::vector<T> c(rows_);
    for (std::size_t i = 0; i < rows_; ++i) c[i] = (*this)(i, j);
    return c;
  }

  Matrix transpose() const {
    Matrix t(cols_, rows_);
    for (std::size_t i = 0; i < rows_; ++i)
      for (std::size_t j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
    return t;
  }

  friend Matrix operator*(const Matrix& a, const Matrix& b) {
    if (a.cols_ != b.rows_) fail(ErrorKind::InvalidInput, "matrix shape mismatch");
    Matrix c(a.rows_, b.cols_);
    for (std::size_t i = 0; i < a.rows_; ++i)
      for (std::size_t k = 0; k < a.cols_; ++k) {
        const T& aik = a(i, k);
        if (aik == 0) continue;
        for (std::size_t j = 0; j < b.cols_; ++j) c(i, j) += aik * b(k, j);
      }
    return c;
  }

  std::vector<T> apply(const std::vector<T>& v) const {
    if (v.size() != cols_) fail(ErrorKind::InvalidInput, "vector length mismatch");
    std::vector<T> out(rows_, T(0));
    for (std::size_t i = 0; i < rows_; ++i)
      for (std::size_t j = 0; j < cols_; ++j) out[i] += (*this)(i, j) * v[j];
    return out;
  }

  friend bool operator==(const Matrix& a, const Matrix& b) {
    return a.rows_ == b.rows_ && a.cols_ == b.cols_ && a.data_ == b.data_;
  }

  std::string to_string() const {
    std::string s = "[";
    for (std::size_t i = 0; i < rows_; ++i) {
      s += i ? ",[" : "[";
      for (std::size_t j = 0; j < cols_; ++j) {
        if (j) s += ",";
        s += (*this)(i, j).get_str();
      }
      s += "]";
    }
    return s + "]";
  }

 private:
  std::size_t rows_ = 0, cols_ = 0;
  std::vector<T> data_;
};

using IntMatrix = Matrix<Integer>;
using RatMatrix = Matrix<Rat>;

template <class T>
Matrix<T> matrix_power(const Matrix<T>& a, unsigned long n) {
  Matrix<T> result = Matrix<T>::identity(a.rows());
  Matrix<T> base = a;
  while (n) {
    if (n & 1) result = result * base;
    n >>= 1;
    if (n) base = base * base;
  }
  return result;
}

inline RatMatrix to_rat(const IntMatrix& m) {
  RatMatrix r(m.rows(), m.cols());
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j) r(i, j) = Rat(m(i, j));
  return r;
}

/// Integer matrix if every entry is integral.
inline std::optional<IntMatrix> to_integer(const RatMatrix& m) {
  IntMatrix r(m.rows(), m.cols());
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j) {
      if (m(i, j).get_den() != 1) return std::nullopt;
      r(i, j) = m(i, j).get_num();
    }
  return r;
}

/// Reduced row echelon form in place; returns pivot columns.
inline std::vector<std::size_t> rref(RatMatrix& m) {
  std::vector<std::size_t> pivots;
  std::size_t r = 0;
  for (std::size_t c = 0; c < m.cols() && r < m.rows(); ++c) {
    std::size_t p = r;
    while (p < m.rows() && m(p, c) == 0) ++p;
    if (p == m.rows()) continue;
    if (p != r)
      for (std::size_t j = 0; j < m.cols(); ++j) std::swap(m(p, j), m(r, j));
    Rat inv = 1 / m(r, c);
    for (std::size_t j = 0; j < m.cols(); ++j) m(r, j) *= inv;
    for (std::size_t i = 0; i < m.rows(); ++i) {
      if (i == r || m(i, c) == 0) continue;
      Rat f = m(i, c);
      for (std::size_t j = 0; j < m.cols(); ++j) m(i, j) -= f * m(r, j);
    }
    pivots.push_back(c);
    ++r;
  }
  return pivots;
}

inline std::size_t rank(RatMatrix m) { return rref(m).size(); }

/// Some solution of a x = b, or nullopt when inconsistent.
inline std::optional<std::vector<Rat>> solve(const RatMatrix& a, const std::vector<Rat>& b) {
  RatMatrix aug(a.rows(), a.cols() + 1);
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < a.cols(); ++j) aug(i, j) = a(i, j);
    aug(i, a.cols()) = b[i];
  }
  auto piv = rref(aug);
  if (!piv.empty() && piv.back() == a.cols()) return std::nullopt;
  std::vector<Rat> x(a.cols(), Rat(0));
  for (std::size_t i = 0; i < piv.size(); ++i) x[piv[i]] = aug(i, a.cols());
  return x;
}

inline std::optional<RatMatrix> inverse(const RatMatrix& a) {
  const std::size_t n = a.rows();
  RatMatrix aug(n, 2 * n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) aug(i, j) = a(i, j);
    aug(i, n + i) = 1;
  }
  auto piv = rref(aug);
  if (piv.size() < n || piv[n - 1] != n - 1) return std::nullopt;
  RatMatrix inv(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) inv(i, j) = aug(i, n + j);
  return inv;
}

/// Fraction-free (Bareiss) determinant.
inline Integer determinant(IntMatrix m) {
  const std::size_t n = m.rows();
  if (n == 0) return 1;
  Integer prev = 1;
  int sign = 1;
  for (std::size_t k = 0; k + 1 < n; ++k) {
    if (m(k, k) == 0) {
      std::size_t p = k + 1;
      while (p < n && m(p, k) == 0) ++p;
      if (p == n) return 0;
      for (std::size_t j = 0; j < n; ++j) std::swap(m(k, j), m(p, j));
      sign = -sign;
    }
    for (std::size_t i = k + 1; i < n; ++i)
      for (std::size_t j = k + 1; j < n; ++j) {
        Integer t = m(i, j) * m(k, k) - m(i, k) * m(k, j);
        mpz_divexact(t.get_mpz_t(), t.get_mpz_t(), prev.get_mpz_t());
        m(i, j) = t;
      }
    prev = m(k, k);
  }
  return sign * m(n - 1, n - 1);
}

inline Rat determinant(const RatMatrix& a) {
  RatMatrix m = a;
  const std::size_t n = m.rows();
  Rat det = 1;
  for (std::size_t c = 0; c < n; ++c) {
    std::size_t p = c;
    while (p < n && m(p, c) == 0) ++p;
    if (p == n) return 0;
    if (p != c) {
      for (std::size_t j = 0; j < n; ++j) std::swap(m(p, j), m(c, j));
      det = -det;
    }
    det *= m(c, c);
    for (std::size_t i = c + 1; i < n; ++i) {
      if (m(i, c) == 0) continue;
      Rat f = m(i, c) / m(c, c);
      for (std::size_t j = c; j < n; ++j) m(i, j) -= f * m(c, j);
    }
  }
  return det;
}

struct HermiteForm {
  IntMatrix h;          // row-style HNF: pivots positive, entries above pivots reduced
  IntMatrix transform;  // unimodular, transform * input == h
  std::size_t rank = 0;
};

inline HermiteForm hermite_normal_form(const IntMatrix& a) {
  IntMatrix h = a;
  IntMatrix u = IntMatrix::identity(a.rows());
  const std::size_t m = a.rows(), n = a.cols();
  auto row_op = [&](std::size_t i, std::size_t k, const Integer& p, const Integer& q,
                    const Integer& r, const Integer& s) {
    // (row_i, row_k) <- (p row_i + q row_k, r row_i + s row_k)
    for (auto* mat : {&h, &u}) {
      for (std::size_t j = 0; j < mat->cols(); ++j) {
        Integer a1 = (*mat)(i, j), a2 = (*mat)(k, j);
        (*mat)(i, j) = p * a1 + q * a2;
        (*mat)(k, j) = r * a1 + s * a2;
      }
    }
  };
  std::size_t r = 0;
  for (std::size_t c = 0; c < n && r < m; ++c) {
    for (std::size_t i = r + 1; i < m; ++i) {
      if (h(i, c) == 0) continue;
      Integer g, x, y;
      mpz_gcdext(g.get_mpz_t(), x.get_mpz_t(), y.get_mpz_t(), h(r, c).get_mpz_t(), h(i, c).get_mpz_t());
      Integer a1 = h(r, c) / g, a2 = h(i, c) / g;
      row_op(r, i, x, y, Integer(-a2), a1);
    }
    if (h(r, c) == 0) continue;
    if (h(r, c) < 0) row_op(r, r, Integer(-1), Integer(0), Integer(-1), Integer(0));
    for (std::size_t i = 0; i < r; ++i) {
      Integer q;
      mpz_fdiv_q(q.get_mpz_t(), h(i, c).get_mpz_t(), h(r, c).get_mpz_t());
      if (q == 0) continue;
      for (auto* mat : {&h, &u})
        for (std::size_t j = 0; j < mat->cols(); ++j) (*mat)(i, j) -= q * (*mat)(r, j);
    }
    ++r;
  }
  return {h, u, r};
}

/// Saturated Z-basis (rows, in HNF) of {g : g^T a = 0}.
inline IntMatrix integer_left_kernel(const IntMatrix& a) {
  auto hf = hermite_normal_form(a);
  const std::size_t k = a.rows() - hf.rank;
  IntMatrix basis(k, a.rows());
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = 0; j < a.rows(); ++j) basis(i, j) = hf.transform(hf.rank + i, j);
  if (k == 0) return basis;
  auto reduced = hermite_normal_form(basis);
  return reduced.h;
}

/// Z-basis (rows) of the lattice spanned by the given rows.
inline IntMatrix lattice_basis(const IntMatrix& rows) {
  auto hf = hermite_normal_form(rows);
  IntMatrix b(hf.rank, rows.cols());
  for (std::size_t i = 0; i < hf.rank; ++i)
    for (std::size_t j = 0; j < rows.cols(); ++j) b(i, j) = hf.h(i, j);
  return b;
}

}  // namespace arithdyn
