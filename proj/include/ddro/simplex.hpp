#pragma once

// Dense bounded-variable simplex over a full tableau.
//
// Standard form handled here:  min c'x  s.t.  A x (<=,=,>=) b,  l <= x <= u
// with every l finite. Each row receives a slack column (in [0,inf) for
// inequalities, fixed at 0 for equalities) and an artificial column used by
// phase 1 only. Nonbasic columns sit at one of their bounds.
//
// The primal method prices by Dantzig's rule and switches to Bland's rule
// after a run of degenerate pivots. The dual method is used to re-optimize
// after bound changes (branch-and-bound children).

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <optional>
#include <vector>

#include "ddro/model.hpp"

namespace ddro::lp {

struct Tolerances {
  double feasibility = 1e-7;
  double optimality = 1e-7;
  double pivot = 1e-9;
  long degenerate_before_bland = 5000;
};

enum class LpStatus { optimal, infeasible, unbounded, iteration_limit, time_limit };

enum class ColStatus : std::uint8_t { basic, at_lower, at_upper };

using Clock = std::chrono::steady_clock;

class DenseSimplex {
 public:
  /// `a` is row-major m x n (structural columns only).
  DenseSimplex(std::size_t m, std::size_t n, std::vector<double> a, std::vector<Sense> senses, std::vector<double> b,
               std::vector<double> c, std::vector<double> lo, std::vector<double> hi, Tolerances tol = {})
      : m_(m), ns_(n), nc_(n + 2 * m), tol_(tol), b_(std::move(b)) {
    auto orig = std::make_shared<std::vector<double>>(m_ * nc_, 0.0);
    for (std::size_t i = 0; i < m_; ++i) {
      for (std::size_t j = 0; j < ns_; ++j) (*orig)[i * nc_ + j] = a[i * ns_ + j];
      (*orig)[i * nc_ + ns_ + i] = senses[i] == Sense::ge ? -1.0 : 1.0;
      (*orig)[i * nc_ + ns_ + m_ + i] = 1.0;
    }
    orig_ = std::move(orig);
    cost_.assign(nc_, 0.0);
    std::copy(c.begin(), c.end(), cost_.begin());
    lo_.assign(nc_, 0.0);
    hi_.assign(nc_, 0.0);
    for (std::size_t j = 0; j < ns_; ++j) {
      lo_[j] = lo[j];
      hi_[j] = hi[j];
    }
    for (std::size_t i = 0; i < m_; ++i) hi_[ns_ + i] = senses[i] == Sense::eq ? 0.0 : kInf;
    // artificials stay fixed at zero outside phase 1
    status_.assign(nc_, ColStatus::at_lower);
    x_.assign(nc_, 0.0);
    basis_.assign(m_, 0);
  }

  std::size_t rows() const { return m_; }
  std::size_t structural_cols() const { return ns_; }

  void set_bounds(std::size_t col, double lo, double hi) {
    lo_[col] = lo;
    hi_[col] = hi;
  }
  double lower(std::size_t col) const { return lo_[col]; }
  double upper(std::size_t col) const { return hi_[col]; }

  void set_deadline(std::optional<Clock::time_point> deadline) { deadline_ = deadline; }

  long iterations() const { return iterations_; }

  LpStatus solve_from_scratch() {
    // phase 1: nonbasic structurals at their lower bound, slacks or artificials basic
    rhs_ = b_;
    for (std::size_t j = 0; j < nc_; ++j) {
      status_[j] = ColStatus::at_lower;
      x_[j] = lo_[j];
    }
    std::vector<double> residual = b_;
    for (std::size_t i = 0; i < m_; ++i)
      for (std::size_t j = 0; j < ns_; ++j) residual[i] -= orig()[i * nc_ + j] * x_[j];

    std::vector<double> phase1(nc_, 0.0);
    for (std::size_t i = 0; i < m_; ++i) {
      const std::size_t s = ns_ + i;
      const std::size_t art = ns_ + m_ + i;
      const double sign = orig()[i * nc_ + s];
      const double sval = residual[i] / sign;
      const double scale = 1.0 + std::abs(b_[i]);
      if (sval >= -tol_.feasibility * scale && sval <= hi_[s] + tol_.feasibility * scale) {
        basis_[i] = s;
        hi_[art] = 0.0;
      } else {
        const double asign = residual[i] >= 0.0 ? 1.0 : -1.0;
        if (orig()[i * nc_ + art] != asign) {
          if (orig_.use_count() > 1) orig_ = std::make_shared<std::vector<double>>(*orig_);
          (*orig_)[i * nc_ + art] = asign;
        }
        basis_[i] = art;
        hi_[art] = kInf;
        phase1[art] = 1.0;
      }
    }
    T_ = orig();
    if (!refactor()) return LpStatus::infeasible;  // cannot happen: unit columns
    recompute_primal();

    const std::vector<double> saved_cost = cost_;
    cost_ = phase1;
    LpStatus st = primal();
    cost_ = saved_cost;
    if (st == LpStatus::iteration_limit || st == LpStatus::time_limit) return st;
    double infeas = 0.0;
    for (std::size_t i = 0; i < m_; ++i) {
      const std::size_t art = ns_ + m_ + i;
      infeas += x_[art];
    }
    double bscale = 1.0;
    for (double v : b_) bscale = std::max(bscale, std::abs(v));
    for (std::size_t i = 0; i < m_; ++i) hi_[ns_ + m_ + i] = 0.0;
    if (infeas > tol_.feasibility * bscale) return LpStatus::infeasible;
    for (std::size_t i = 0; i < m_; ++i) {
      const std::size_t art = ns_ + m_ + i;
      if (status_[art] != ColStatus::basic) x_[art] = 0.0;
    }
    recompute_primal();
    return primal();
  }

  struct Basis {
    std::vector<std::size_t> basic;
    std::vector<ColStatus> status;
  };

  Basis basis() const { return Basis{basis_, status_}; }

  /// Re-optimizes after bound changes, starting from `start`. Falls back to
  /// a cold start when the basis cannot be factorized.
  LpStatus solve_warm(const Basis& start) {
    T_ = orig();
    rhs_ = b_;
    basis_ = start.basic;
    status_ = start.status;
    if (!refactor()) return solve_from_scratch();
    return reoptimize();
  }

  /// Re-optimizes in place (tableau already factorized for the current basis).
  LpStatus reoptimize() {
    for (std::size_t j = 0; j < nc_; ++j) {
      if (status_[j] == ColStatus::basic) continue;
      if (status_[j] == ColStatus::at_upper && hi_[j] == kInf) status_[j] = ColStatus::at_lower;
      x_[j] = status_[j] == ColStatus::at_upper ? hi_[j] : lo_[j];
    }
    recompute_primal();
    recompute_duals();
    if (dual_feasible()) {
      LpStatus st = dual();
      if (st != LpStatus::optimal) return st;
      return primal();
    }
    if (primal_feasible()) return primal();
    return solve_from_scratch();
  }

  double objective() const {
    double s = 0.0;
    for (std::size_t j = 0; j < ns_; ++j) s += cost_[j] * x_[j];
    return s;
  }

  double value(std::size_t col) const { return x_[col]; }
  std::vector<double> structural_values() const { return {x_.begin(), x_.begin() + static_cast<long>(ns_)}; }

 private:
  const std::vector<double>& orig() const { return *orig_; }
  double& at(std::size_t i, std::size_t j) { return T_[i * nc_ + j]; }
  double at(std::size_t i, std::size_t j) const { return T_[i * nc_ + j]; }

  bool fixed(std::size_t j) const { return hi_[j] - lo_[j] <= 0.0; }

  bool out_of_time() const { return deadline_ && Clock::now() > *deadline_; }

  // Gauss-Jordan on the columns listed in basis_, reassigning rows by partial pivoting.
  bool refactor() {
    std::vector<std::size_t> cols = basis_;
    std::vector<char> used(m_, 0);
    for (std::size_t k = 0; k < m_; ++k) {
      const std::size_t col = cols[k];
      std::size_t best = m_;
      double best_abs = 1e-9;
      for (std::size_t i = 0; i < m_; ++i) {
        if (used[i]) continue;
        const double v = std::abs(at(i, col));
        if (v > best_abs) {
          best_abs = v;
          best = i;
        }
      }
      if (best == m_) return false;
      used[best] = 1;
      basis_[best] = col;
      pivot_rows(best, col);
    }
    for (std::size_t j = 0; j < nc_; ++j)
      if (status_[j] == ColStatus::basic) status_[j] = ColStatus::at_lower;
    for (std::size_t i = 0; i < m_; ++i) status_[basis_[i]] = ColStatus::basic;
    return true;
  }

  void pivot_rows(std::size_t r, std::size_t q) {
    double* row = &T_[r * nc_];
    const double inv = 1.0 / row[q];
    nz_.clear();
    for (std::size_t j = 0; j < nc_; ++j) {
      if (row[j] == 0.0) continue;
      row[j] *= inv;
      nz_.push_back(j);
    }
    row[q] = 1.0;
    rhs_[r] *= inv;
    for (std::size_t i = 0; i < m_; ++i) {
      if (i == r) continue;
      double* other = &T_[i * nc_];
      const double f = other[q];
      if (f == 0.0) continue;
      for (std::size_t j : nz_) other[j] -= f * row[j];
      other[q] = 0.0;
      rhs_[i] -= f * rhs_[r];
    }
  }

  void recompute_primal() {
    for (std::size_t i = 0; i < m_; ++i) {
      double v = rhs_[i];
      const double* row = &T_[i * nc_];
      for (std::size_t j = 0; j < nc_; ++j)
        if (status_[j] != ColStatus::basic && x_[j] != 0.0) v -= row[j] * x_[j];
      x_[basis_[i]] = v;
    }
  }

  void recompute_duals() {
    d_ = cost_;
    for (std::size_t i = 0; i < m_; ++i) {
      const double cb = cost_[basis_[i]];
      if (cb == 0.0) continue;
      const double* row = &T_[i * nc_];
      for (std::size_t j = 0; j < nc_; ++j) d_[j] -= cb * row[j];
    }
    for (std::size_t i = 0; i < m_; ++i) d_[basis_[i]] = 0.0;
  }

  double primal_infeasibility(std::size_t col) const {
    const double v = x_[col];
    const double s = 1.0 + std::abs(v);
    if (v < lo_[col] - tol_.feasibility * s) return lo_[col] - v;
    if (v > hi_[col] + tol_.feasibility * s) return v - hi_[col];
    return 0.0;
  }

  bool primal_feasible() const {
    for (std::size_t i = 0; i < m_; ++i)
      if (primal_infeasibility(basis_[i]) > 0.0) return false;
    return true;
  }

  bool dual_feasible() const {
    for (std::size_t j = 0; j < nc_; ++j) {
      if (status_[j] == ColStatus::basic || fixed(j)) continue;
      if (status_[j] == ColStatus::at_lower && d_[j] < -tol_.optimality) return false;
      if (status_[j] == ColStatus::at_upper && d_[j] > tol_.optimality) return false;
    }
    return true;
  }

  long iteration_cap() const { return 200 * static_cast<long>(m_ + nc_) + 20000; }

  // Pivot column q into row r; entering value becomes `enter_value`,
  // leaving column moves to the bound given by `leave_status`.
  void do_pivot(std::size_t r, std::size_t q, ColStatus leave_status) {
    const std::size_t leaving = basis_[r];
    status_[leaving] = leave_status;
    x_[leaving] = leave_status == ColStatus::at_upper ? hi_[leaving] : lo_[leaving];
    pivot_rows(r, q);
    const double dq = d_[q];
    if (dq != 0.0) {
      const double* row = &T_[r * nc_];
      for (std::size_t j : nz_) d_[j] -= dq * row[j];
    }
    d_[q] = 0.0;
    basis_[r] = q;
    status_[q] = ColStatus::basic;
  }

  LpStatus primal() {
    recompute_duals();
    long degenerate_run = 0;
    bool bland = false;
    long local = 0;
    const long cap = iteration_cap();
    for (;;) {
      if (++local > cap) return LpStatus::iteration_limit;
      if ((local & 63) == 0 && out_of_time()) return LpStatus::time_limit;
      if ((local % 200) == 0) {
        recompute_primal();
        recompute_duals();
      }
      // pricing
      std::size_t q = nc_;
      double best = 0.0;
      for (std::size_t j = 0; j < nc_; ++j) {
        if (status_[j] == ColStatus::basic || fixed(j)) continue;
        const double dj = d_[j];
        double score = 0.0;
        if (status_[j] == ColStatus::at_lower && dj < -tol_.optimality) score = -dj;
        if (status_[j] == ColStatus::at_upper && dj > tol_.optimality) score = dj;
        if (score <= 0.0) continue;
        if (bland) {
          q = j;
          break;
        }
        if (score > best) {
          best = score;
          q = j;
        }
      }
      if (q == nc_) {
        // confirm with fresh values before declaring optimality
        recompute_primal();
        recompute_duals();
        if (!dual_feasible()) continue;
        return LpStatus::optimal;
      }
      const double dir = status_[q] == ColStatus::at_lower ? 1.0 : -1.0;
      // ratio test: x_B(i) changes by -dir * t * T(i,q)
      double t_max = hi_[q] - lo_[q];
      std::size_t r = m_;
      ColStatus leave_to = ColStatus::at_lower;
      double r_alpha = 0.0;
      for (std::size_t i = 0; i < m_; ++i) {
        const double alpha = at(i, q);
        if (std::abs(alpha) <= tol_.pivot) continue;
        const double rate = -dir * alpha;
        const std::size_t bcol = basis_[i];
        double limit;
        ColStatus target;
        if (rate < 0.0) {
          limit = (x_[bcol] - lo_[bcol]) / -rate;
          target = ColStatus::at_lower;
        } else {
          if (hi_[bcol] == kInf) continue;
          limit = (hi_[bcol] - x_[bcol]) / rate;
          target = ColStatus::at_upper;
        }
        if (limit < 0.0) limit = 0.0;
        const bool better = limit < t_max - 1e-12 ||
                            (limit <= t_max + 1e-12 && r < m_ &&
                             (bland ? bcol < basis_[r] : std::abs(alpha) > std::abs(r_alpha)));
        if (better) {
          t_max = limit;
          r = i;
          leave_to = target;
          r_alpha = alpha;
        }
      }
      if (t_max == kInf) return LpStatus::unbounded;
      ++iterations_;
      if (t_max <= 1e-12) {
        if (++degenerate_run > tol_.degenerate_before_bland) bland = true;
      } else {
        degenerate_run = 0;
        bland = false;
      }
      const double step = dir * t_max;
      for (std::size_t i = 0; i < m_; ++i) {
        const double alpha = at(i, q);
        if (alpha != 0.0) x_[basis_[i]] -= step * alpha;
      }
      if (r == m_) {
        // bound flip
        status_[q] = status_[q] == ColStatus::at_lower ? ColStatus::at_upper : ColStatus::at_lower;
        x_[q] = status_[q] == ColStatus::at_upper ? hi_[q] : lo_[q];
        continue;
      }
      const double enter_value = x_[q] + step;
      do_pivot(r, q, leave_to);
      x_[q] = enter_value;
    }
  }

  LpStatus dual() {
    long local = 0;
    const long cap = iteration_cap();
    for (;;) {
      if (++local > cap) return LpStatus::iteration_limit;
      if ((local & 63) == 0 && out_of_time()) return LpStatus::time_limit;
      if ((local % 200) == 0) {
        recompute_primal();
        recompute_duals();
      }
      std::size_t r = m_;
      double worst = 0.0;
      for (std::size_t i = 0; i < m_; ++i) {
        const double inf = primal_infeasibility(basis_[i]);
        if (inf > worst) {
          worst = inf;
          r = i;
        }
      }
      if (r == m_) {
        recompute_primal();
        if (!primal_feasible()) continue;
        return LpStatus::optimal;
      }
      const std::size_t leaving = basis_[r];
      const bool below = x_[leaving] < lo_[leaving];
      // x_B(r) = rhs - sum_j T(r,j) x_j; below: need x_B(r) up, i.e. sum T(r,j) dx_j < 0
      std::size_t q = nc_;
      double best_ratio = kInf;
      double best_alpha = 0.0;
      for (std::size_t j = 0; j < nc_; ++j) {
        if (status_[j] == ColStatus::basic || fixed(j)) continue;
        const double alpha = at(r, j);
        if (std::abs(alpha) <= tol_.pivot) continue;
        const bool up = status_[j] == ColStatus::at_lower;  // allowed move direction
        const bool eligible = below ? (up ? alpha < 0.0 : alpha > 0.0) : (up ? alpha > 0.0 : alpha < 0.0);
        if (!eligible) continue;
        double dj = d_[j];
        if (up) dj = std::max(dj, 0.0);
        else dj = std::min(dj, 0.0);
        const double ratio = std::abs(dj / alpha);
        if (ratio < best_ratio - 1e-12 || (ratio <= best_ratio + 1e-12 && std::abs(alpha) > std::abs(best_alpha))) {
          best_ratio = ratio;
          q = j;
          best_alpha = alpha;
        }
      }
      if (q == nc_) return LpStatus::infeasible;
      ++iterations_;
      const double target = below ? lo_[leaving] : hi_[leaving];
      const double delta = (x_[leaving] - target) / best_alpha;  // change of entering column
      for (std::size_t i = 0; i < m_; ++i) {
        const double alpha = at(i, q);
        if (alpha != 0.0) x_[basis_[i]] -= delta * alpha;
      }
      const double enter_value = x_[q] + delta;
      do_pivot(r, q, below ? ColStatus::at_lower : ColStatus::at_upper);
      x_[q] = enter_value;
    }
  }

  std::size_t m_;
  std::size_t ns_;
  std::size_t nc_;
  Tolerances tol_;
  std::vector<double> b_;
  std::shared_ptr<std::vector<double>> orig_;  // shared between copies until artificial signs change
  std::vector<double> T_;
  std::vector<double> rhs_;
  std::vector<double> cost_;
  std::vector<double> d_;
  std::vector<double> lo_;
  std::vector<double> hi_;
  std::vector<double> x_;
  std::vector<ColStatus> status_;
  std::vector<std::size_t> basis_;
  std::vector<std::size_t> nz_;  // nonzero columns of the last pivot row
  std::optional<Clock::time_point> deadline_;
  long iterations_ = 0;
};

}  // namespace ddro::lp
