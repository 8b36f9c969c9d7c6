#pragma once

// Sphere geometry and small multilinear-algebra utilities: uniform
// sampling, deterministic tangent bases, vectorized-tensor helpers
// (Kronecker products, symmetrizer, uniform moments), and a symmetric
// eigensolver for the tiny matrices arising in moment estimation.
//
// Tensor convention: an order-r tensor over R^D is stored flat with
// big-endian index order, flat = sum_t i_t D^{r-1-t}; for matrices this
// agrees with vec stacking columns once a (x) b is read as vec(b a').

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <vector>

#include "sphcard/common.hpp"
#include "sphcard/rng.hpp"

namespace sphcard {

// Point on S^d stored as its (d+1)-dimensional ambient coordinates.
// Construction renormalizes inputs within 1e-6 of unit length and
// rejects anything farther off.
class UnitVector {
 public:
  explicit UnitVector(Eigen::VectorXd coords) : coords_(std::move(coords)) {
    if (coords_.size() < 2) {
      throw std::domain_error("UnitVector: ambient dimension must be >= 2");
    }
    const double nrm = coords_.norm();
    if (std::fabs(nrm - 1.0) > 1e-6) {
      throw std::domain_error("UnitVector: input norm deviates from 1 beyond 1e-6");
    }
    // Leave already-unit coordinates untouched so serialization round-trips
    // reproduce them bit for bit.
    if (std::fabs(nrm - 1.0) > 1e-12) coords_ /= nrm;
  }

  // Point on the circle S^1 at the given angle.
  static UnitVector from_angle(double theta) {
    Eigen::VectorXd v(2);
    v << std::cos(theta), std::sin(theta);
    return UnitVector(std::move(v));
  }

  const Eigen::VectorXd& coords() const { return coords_; }
  int ambient_dim() const { return static_cast<int>(coords_.size()); }
  int sphere_dim() const { return static_cast<int>(coords_.size()) - 1; }
  double dot(const UnitVector& other) const { return coords_.dot(other.coords_); }

 private:
  Eigen::VectorXd coords_;
};

// Semi-orthogonal (d+1) x d matrix whose columns span the tangent space
// at the anchor: B'B = I_d, BB' = I - mu mu', mu'B = 0.
struct TangentBasis {
  Eigen::MatrixXd matrix;
  UnitVector anchor;
};

// Order-r tensor over R^dim stored as a flat vector of length dim^r.
struct SymTensorVec {
  int order = 0;
  int dim = 0;
  Eigen::VectorXd data;
};

namespace detail {

inline std::int64_t ipow(std::int64_t base, int exp) {
  std::int64_t r = 1;
  for (int i = 0; i < exp; ++i) r *= base;
  return r;
}

inline void check_tensor(const SymTensorVec& v) {
  if (v.order < 0 || v.dim < 1) throw std::domain_error("SymTensorVec: bad shape");
  if (v.data.size() != ipow(v.dim, v.order)) {
    throw std::domain_error("SymTensorVec: data length does not match dim^order");
  }
}

// Default budget bounding r! * dim^r work in the symmetrizer and moment
// routines; exceeding it raises resource_error.
inline constexpr int kMaxTensorOrder = 6;
inline constexpr int kMaxTensorDim = 5;

inline void check_budget(int order, int dim, int max_order = kMaxTensorOrder,
                         int max_dim = kMaxTensorDim) {
  if (order > max_order || dim > max_dim) {
    throw resource_error("tensor budget exceeded: order " + std::to_string(order) +
                         ", dim " + std::to_string(dim));
  }
}

}  // namespace detail

// Kronecker product of flat vectors: (a (x) b)[i*len(b)+j] = a_i b_j.
inline Eigen::VectorXd kron(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  Eigen::VectorXd out(a.size() * b.size());
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    out.segment(i * b.size(), b.size()) = a(i) * b;
  }
  return out;
}

// r-fold Kronecker power, with the order-0 convention of the scalar 1.
inline Eigen::VectorXd kron_pow(const Eigen::VectorXd& a, int r) {
  Eigen::VectorXd out = Eigen::VectorXd::Ones(1);
  for (int i = 0; i < r; ++i) out = kron(out, a);
  return out;
}

// Uniform draw on S^d: normalized vector of d+1 independent standard
// normals (resampled on the measure-zero near-zero event).
inline UnitVector uniform_sphere(int d, RngStream& rng) {
  if (d < 1) throw std::domain_error("uniform_sphere: dimension must be >= 1");
  Eigen::VectorXd v(d + 1);
  double nrm2 = 0.0;
  do {
    for (int i = 0; i <= d; ++i) v(i) = rng.normal();
    nrm2 = v.squaredNorm();
  } while (nrm2 < 1e-24);
  return UnitVector(v / std::sqrt(nrm2));
}

// Deterministic tangent basis from the Householder reflection sending
// e_{d+1} to mu; the reflector is through (mu - e_{d+1}), and the first
// d columns of the reflection are returned.  At mu = e_{d+1} the
// reflection degenerates and the canonical columns are used.
inline TangentBasis tangent_basis(const UnitVector& mu) {
  const int n = mu.ambient_dim();
  Eigen::VectorXd v = mu.coords();
  v(n - 1) -= 1.0;
  const double vv = v.squaredNorm();
  Eigen::MatrixXd b(n, n - 1);
  if (vv < 1e-30) {
    b.setZero();
    for (int j = 0; j < n - 1; ++j) b(j, j) = 1.0;
  } else {
    for (int j = 0; j < n - 1; ++j) {
      Eigen::VectorXd col = Eigen::VectorXd::Zero(n);
      col(j) = 1.0;
      col -= (2.0 * v(j) / vv) * v;
      b.col(j) = col;
    }
  }
  return TangentBasis{std::move(b), mu};
}

// x = t mu + sqrt(1-t^2) B_mu xi, mapping a projection value t and a
// direction xi on S^{d-1} to a point on S^d with x'mu = t.
inline UnitVector tangent_normal_compose(const UnitVector& mu, double t,
                                         const UnitVector& xi) {
  t = clamp_unit(t);
  if (xi.ambient_dim() != mu.ambient_dim() - 1) {
    throw std::domain_error("tangent_normal_compose: xi must live one dimension down");
  }
  const TangentBasis b = tangent_basis(mu);
  Eigen::VectorXd x = t * mu.coords() + std::sqrt(std::max(0.0, 1.0 - t * t)) *
                                            (b.matrix * xi.coords());
  return UnitVector(std::move(x));
}

// Eigenpairs of a symmetric matrix, sorted by descending eigenvalue;
// vectors.col(i) pairs with values(i).
struct EigenPairs {
  Eigen::VectorXd values;
  Eigen::MatrixXd vectors;
};

// Cyclic Jacobi sweeps; designed for the small matrices used here
// (ambient dimension at most a few dozen).
inline EigenPairs sym_eigen(const Eigen::MatrixXd& s_in) {
  const Eigen::Index n = s_in.rows();
  if (s_in.cols() != n) throw std::domain_error("sym_eigen: matrix must be square");
  if ((s_in - s_in.transpose()).cwiseAbs().maxCoeff() > 1e-8) {
    throw std::domain_error("sym_eigen: matrix is not symmetric");
  }
  Eigen::MatrixXd s = 0.5 * (s_in + s_in.transpose());
  Eigen::MatrixXd vmat = Eigen::MatrixXd::Identity(n, n);
  auto off_norm = [&]() {
    double acc = 0.0;
    for (Eigen::Index p = 0; p < n; ++p) {
      for (Eigen::Index q = 0; q < n; ++q) {
        if (p != q) acc += s(p, q) * s(p, q);
      }
    }
    return std::sqrt(acc);
  };
  bool converged = false;
  for (int sweep = 0; sweep < 100; ++sweep) {
    if (off_norm() <= 1e-12) {
      converged = true;
      break;
    }
    for (Eigen::Index p = 0; p < n - 1; ++p) {
      for (Eigen::Index q = p + 1; q < n; ++q) {
        if (std::fabs(s(p, q)) < 1e-300) continue;
        const double tau = (s(q, q) - s(p, p)) / (2.0 * s(p, q));
        const double t = (tau >= 0.0 ? 1.0 : -1.0) /
                         (std::fabs(tau) + std::sqrt(1.0 + tau * tau));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double sn = t * c;
        for (Eigen::Index i = 0; i < n; ++i) {
          const double sip = s(i, p), siq = s(i, q);
          s(i, p) = c * sip - sn * siq;
          s(i, q) = sn * sip + c * siq;
        }
        for (Eigen::Index i = 0; i < n; ++i) {
          const double spi = s(p, i), sqi = s(q, i);
          s(p, i) = c * spi - sn * sqi;
          s(q, i) = sn * spi + c * sqi;
        }
        for (Eigen::Index i = 0; i < n; ++i) {
          const double vip = vmat(i, p), viq = vmat(i, q);
          vmat(i, p) = c * vip - sn * viq;
          vmat(i, q) = sn * vip + c * viq;
        }
      }
    }
  }
  if (!converged && off_norm() > 1e-12) {
    throw numeric_error("sym_eigen: Jacobi sweeps did not converge");
  }
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(),
            [&](Eigen::Index a, Eigen::Index b) { return s(a, a) > s(b, b); });
  EigenPairs out;
  out.values.resize(n);
  out.vectors.resize(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    out.values(j) = s(idx[j], idx[j]);
    out.vectors.col(j) = vmat.col(idx[j]);
  }
  return out;
}

// Entrywise average over all index permutations of an order-r tensor,
// computed by index remapping (the dim^r x dim^r symmetrizer matrix is
// never materialized).  Idempotent.
inline SymTensorVec symmetrizer_apply(int order, int dim, const SymTensorVec& v) {
  detail::check_tensor(v);
  if (v.order != order || v.dim != dim) {
    throw std::domain_error("symmetrizer_apply: order/dim mismatch with tensor");
  }
  detail::check_budget(order, dim);
  if (order <= 1) return v;
  const std::int64_t len = v.data.size();
  std::vector<int> perm(order);
  std::iota(perm.begin(), perm.end(), 0);
  std::vector<std::vector<int>> perms;
  do {
    perms.push_back(perm);
  } while (std::next_permutation(perm.begin(), perm.end()));
  std::vector<std::int64_t> stride(order);
  stride[order - 1] = 1;
  for (int t = order - 2; t >= 0; --t) stride[t] = stride[t + 1] * dim;
  SymTensorVec out{order, dim, Eigen::VectorXd::Zero(len)};
  std::vector<int> digit(order);
  for (std::int64_t f = 0; f < len; ++f) {
    std::int64_t rem = f;
    for (int t = 0; t < order; ++t) {
      digit[t] = static_cast<int>(rem / stride[t]);
      rem %= stride[t];
    }
    double acc = 0.0;
    for (const auto& sg : perms) {
      std::int64_t fp = 0;
      for (int t = 0; t < order; ++t) fp += digit[sg[t]] * stride[t];
      acc += v.data(fp);
    }
    out.data(f) = acc / static_cast<double>(perms.size());
  }
  return out;
}

// Moment E[U^{(x) m}] of the uniform distribution on S^d, as a flat
// tensor of order m over R^{d+1}: zero for odd m, and for even m
//   [(m-1)!! / prod_{r=0}^{m/2-1}(d+1+2r)] * Sym((vec I)^{(x) m/2}).
inline SymTensorVec uniform_moment(int d, int m) {
  if (d < 1 || m < 1) throw std::domain_error("uniform_moment: need d >= 1, m >= 1");
  const int dim = d + 1;
  detail::check_budget(m, dim);
  SymTensorVec out{m, dim, Eigen::VectorXd::Zero(detail::ipow(dim, m))};
  if (m % 2 == 1) return out;
  const int half = m / 2;
  double coef = 1.0;
  for (int j = 1; j < m; j += 2) coef *= j;                      // (m-1)!!
  for (int r = 0; r < half; ++r) coef /= (dim + 2.0 * r);        // prod (d+1+2r)
  Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(dim, dim);
  Eigen::VectorXd vec_i = Eigen::Map<Eigen::VectorXd>(eye.data(), dim * dim);
  SymTensorVec raw{m, dim, coef * kron_pow(vec_i, half)};
  return symmetrizer_apply(m, dim, raw);
}

}  // namespace sphcard
