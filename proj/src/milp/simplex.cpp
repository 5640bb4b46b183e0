#include "lyapnet/milp/simplex.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "lyapnet/errors.hpp"

namespace lyapnet::milp {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

struct LpEngine::State {
  int cols = 0;  // structurals + slacks + artificials
  Eigen::MatrixXd t;
  Eigen::VectorXd x, d, cost, lo, hi;
  std::vector<int> head;   // row -> basic column
  std::vector<int> where;  // column -> row, or -1 when nonbasic
  std::vector<unsigned char> at_upper;
  std::vector<int> art_row;
  std::vector<double> art_sign;
  bool valid = false;
};

struct LpEngine::Snapshot {
  State state;
};

LpEngine::LpEngine(const MilpModel& model, LpOptions options)
    : n_(model.variable_count()), m_(model.row_count()), opt_(options) {
  a_ = Eigen::MatrixXd::Zero(m_, n_);
  b_.resize(m_);
  slack_lo_.resize(m_);
  slack_hi_.resize(m_);
  for (int i = 0; i < m_; ++i) {
    const Row& r = model.row(i);
    for (std::size_t k = 0; k < r.vars.size(); ++k) a_(i, r.vars[k]) += r.coefs[k];
    b_[i] = r.rhs;
    switch (r.sense) {
      case RowSense::LessEqual: slack_lo_[i] = 0.0; slack_hi_[i] = kInf; break;
      case RowSense::GreaterEqual: slack_lo_[i] = -kInf; slack_hi_[i] = 0.0; break;
      case RowSense::Equal: slack_lo_[i] = 0.0; slack_hi_[i] = 0.0; break;
    }
  }
  c_ = Eigen::VectorXd::Zero(n_);
  for (const Term& t : model.objective().terms()) c_[t.var] += t.coef.value;
  c0_ = model.objective().constant().value;
  st_ = std::make_unique<State>();
}

LpEngine::~LpEngine() = default;

std::size_t LpEngine::snapshot_bytes(int rows, int structurals) {
  std::size_t cols = static_cast<std::size_t>(structurals + 2 * rows);
  return sizeof(double) * (static_cast<std::size_t>(rows) * cols + 5 * cols);
}

std::shared_ptr<const LpEngine::Snapshot> LpEngine::snapshot() const {
  if (!st_->valid) return nullptr;
  auto s = std::make_shared<Snapshot>();
  s->state = *st_;
  return s;
}

void LpEngine::set_structural_bounds(std::span<const double> lower,
                                     std::span<const double> upper) {
  State& s = *st_;
  for (int j = 0; j < n_; ++j) {
    s.lo[j] = lower[static_cast<std::size_t>(j)];
    s.hi[j] = upper[static_cast<std::size_t>(j)];
    if (!(s.lo[j] <= s.hi[j])) throw ContractViolation("LP variable has lower > upper");
    if (!std::isfinite(s.lo[j]) || !std::isfinite(s.hi[j])) {
      throw ContractViolation("LP structural variables need finite bounds");
    }
  }
  for (int j = 0; j < s.cols; ++j) {
    if (s.where[static_cast<std::size_t>(j)] >= 0) continue;
    s.x[j] = s.at_upper[static_cast<std::size_t>(j)] ? s.hi[j] : s.lo[j];
  }
}

void LpEngine::pivot(int r, int q) {
  State& s = *st_;
  double piv = s.t(r, q);
  Eigen::RowVectorXd prow = s.t.row(r) / piv;
  Eigen::VectorXd col = s.t.col(q);
  col[r] = 0.0;
  s.t.noalias() -= col * prow;
  s.t.row(r) = prow;
  s.t.col(q).setZero();
  s.t(r, q) = 1.0;
  double dq = s.d[q];
  s.d -= dq * prow.transpose();
  s.d[q] = 0.0;
  int leaving = s.head[static_cast<std::size_t>(r)];
  s.where[static_cast<std::size_t>(leaving)] = -1;
  s.head[static_cast<std::size_t>(r)] = q;
  s.where[static_cast<std::size_t>(q)] = r;
}

void LpEngine::recompute() {
  State& s = *st_;
  Eigen::VectorXd resid = b_;
  for (int j = 0; j < s.cols; ++j) {
    if (s.where[static_cast<std::size_t>(j)] >= 0) continue;
    double v = s.x[j];
    if (v == 0.0) continue;
    if (j < n_) {
      resid -= a_.col(j) * v;
    } else if (j < n_ + m_) {
      resid[j - n_] -= v;
    } else {
      int k = j - n_ - m_;
      resid[s.art_row[static_cast<std::size_t>(k)]] -= s.art_sign[static_cast<std::size_t>(k)] * v;
    }
  }
  auto binv = s.t.middleCols(n_, m_);
  Eigen::VectorXd xb = binv * resid;
  Eigen::VectorXd cb(m_);
  for (int i = 0; i < m_; ++i) {
    int h = s.head[static_cast<std::size_t>(i)];
    s.x[h] = xb[i];
    cb[i] = s.cost[h];
  }
  Eigen::VectorXd y = binv.transpose() * cb;
  s.d.head(n_) = s.cost.head(n_) - a_.transpose() * y;
  s.d.segment(n_, m_) = s.cost.segment(n_, m_) - y;
  for (int k = 0; k < s.cols - n_ - m_; ++k) {
    int j = n_ + m_ + k;
    s.d[j] = s.cost[j] -
             s.art_sign[static_cast<std::size_t>(k)] * y[s.art_row[static_cast<std::size_t>(k)]];
  }
  for (int i = 0; i < m_; ++i) s.d[s.head[static_cast<std::size_t>(i)]] = 0.0;
}

void LpEngine::refactor() {
  State& s = *st_;
  Eigen::MatrixXd full = Eigen::MatrixXd::Zero(m_, s.cols);
  full.leftCols(n_) = a_;
  full.middleCols(n_, m_).setIdentity();
  for (int k = 0; k < s.cols - n_ - m_; ++k) {
    full(s.art_row[static_cast<std::size_t>(k)], n_ + m_ + k) = s.art_sign[static_cast<std::size_t>(k)];
  }
  Eigen::MatrixXd basis(m_, m_);
  for (int i = 0; i < m_; ++i) basis.col(i) = full.col(s.head[static_cast<std::size_t>(i)]);
  Eigen::FullPivLU<Eigen::MatrixXd> lu(basis);
  if (!lu.isInvertible()) throw NumericalFailure("simplex basis became singular");
  s.t = lu.solve(full);
  recompute();
}

LpStatus LpEngine::run_primal(bool phase_one) {
  State& s = *st_;
  int degenerate_run = 0;
  bool bland = false;
  for (int iter = 0; iter < opt_.max_iterations; ++iter) {
    if (iter > 0 && iter % 200 == 0) recompute();
    // Pricing.
    int q = -1;
    int dir = 0;
    double best = 0.0;
    for (int j = 0; j < s.cols; ++j) {
      if (s.where[static_cast<std::size_t>(j)] >= 0) continue;
      if (s.lo[j] == s.hi[j]) continue;
      if (!phase_one && j >= n_ + m_) continue;
      double dj = s.d[j];
      int jdir = 0;
      double score = 0.0;
      if (!s.at_upper[static_cast<std::size_t>(j)] && dj > opt_.optimality_tol) {
        jdir = 1;
        score = dj;
      } else if (s.at_upper[static_cast<std::size_t>(j)] && dj < -opt_.optimality_tol) {
        jdir = -1;
        score = -dj;
      }
      if (jdir == 0) continue;
      if (bland) {
        q = j;
        dir = jdir;
        break;
      }
      if (score > best) {
        best = score;
        q = j;
        dir = jdir;
      }
    }
    if (q < 0) return LpStatus::Optimal;

    // Ratio test (Harris two-pass; textbook min ratio in Bland mode).
    const auto col = s.t.col(q);
    double flip = (std::isfinite(s.lo[q]) && std::isfinite(s.hi[q])) ? s.hi[q] - s.lo[q] : kInf;
    double tmax = kInf;
    for (int i = 0; i < m_; ++i) {
      double rate = -col[i] * dir;
      int h = s.head[static_cast<std::size_t>(i)];
      double tol = bland ? 0.0 : opt_.feasibility_tol;
      if (rate < -opt_.pivot_tol && std::isfinite(s.lo[h])) {
        tmax = std::min(tmax, (s.x[h] - s.lo[h] + tol) / -rate);
      } else if (rate > opt_.pivot_tol && std::isfinite(s.hi[h])) {
        tmax = std::min(tmax, (s.hi[h] - s.x[h] + tol) / rate);
      }
    }
    if (!std::isfinite(tmax) && !std::isfinite(flip)) return LpStatus::Unbounded;

    double step = 0.0;
    int r = -1;
    if (flip <= tmax) {
      step = flip;
    } else {
      double best_rate = -1.0;
      double best_ratio = kInf;
      for (int i = 0; i < m_; ++i) {
        double rate = -col[i] * dir;
        int h = s.head[static_cast<std::size_t>(i)];
        double ratio;
        if (rate < -opt_.pivot_tol && std::isfinite(s.lo[h])) {
          ratio = (s.x[h] - s.lo[h]) / -rate;
        } else if (rate > opt_.pivot_tol && std::isfinite(s.hi[h])) {
          ratio = (s.hi[h] - s.x[h]) / rate;
        } else {
          continue;
        }
        if (bland) {
          if (ratio < best_ratio - 1e-15 ||
              (ratio <= best_ratio + 1e-15 && r >= 0 && h < s.head[static_cast<std::size_t>(r)])) {
            best_ratio = ratio;
            r = i;
          }
        } else if (ratio <= tmax && std::abs(rate) > best_rate) {
          best_rate = std::abs(rate);
          r = i;
          best_ratio = ratio;
        }
      }
      if (r < 0) return LpStatus::Unbounded;
      step = std::max(0.0, best_ratio);
    }

    if (step <= 1e-12) {
      if (++degenerate_run > opt_.degenerate_limit) bland = true;
    } else {
      degenerate_run = 0;
      bland = false;
    }

    // Move.
    double delta = dir * step;
    if (delta != 0.0) {
      for (int i = 0; i < m_; ++i) s.x[s.head[static_cast<std::size_t>(i)]] -= col[i] * delta;
      s.x[q] += delta;
    }
    if (r < 0) {
      s.at_upper[static_cast<std::size_t>(q)] = dir > 0 ? 1 : 0;
      s.x[q] = dir > 0 ? s.hi[q] : s.lo[q];
      continue;
    }
    int leaving = s.head[static_cast<std::size_t>(r)];
    double rate = -col[r] * dir;
    bool to_upper = rate > 0;
    pivot(r, q);
    s.at_upper[static_cast<std::size_t>(leaving)] = to_upper ? 1 : 0;
    s.x[leaving] = to_upper ? s.hi[leaving] : s.lo[leaving];
  }
  throw NumericalFailure("primal simplex hit its iteration limit");
}

LpStatus LpEngine::run_dual() {
  State& s = *st_;
  for (int iter = 0; iter < opt_.max_iterations; ++iter) {
    if (iter > 0 && iter % 200 == 0) recompute();
    int r = -1;
    double worst = opt_.feasibility_tol;
    double target = 0.0;
    for (int i = 0; i < m_; ++i) {
      int h = s.head[static_cast<std::size_t>(i)];
      double below = s.lo[h] - s.x[h];
      double above = s.x[h] - s.hi[h];
      if (below > worst) {
        worst = below;
        r = i;
        target = s.lo[h];
      }
      if (above > worst) {
        worst = above;
        r = i;
        target = s.hi[h];
      }
    }
    if (r < 0) return LpStatus::Optimal;
    int leaving = s.head[static_cast<std::size_t>(r)];
    double delta_basic = s.x[leaving] - target;
    const auto row = s.t.row(r);

    double bound = kInf;
    for (int j = 0; j < s.cols; ++j) {
      if (s.where[static_cast<std::size_t>(j)] >= 0 || s.lo[j] == s.hi[j]) continue;
      double arj = row[j];
      if (std::abs(arj) <= opt_.pivot_tol) continue;
      bool upper = s.at_upper[static_cast<std::size_t>(j)] != 0;
      if ((!upper && delta_basic * arj <= 0) || (upper && delta_basic * arj >= 0)) continue;
      bound = std::min(bound, (std::abs(s.d[j]) + opt_.optimality_tol) / std::abs(arj));
    }
    if (!std::isfinite(bound)) return LpStatus::Infeasible;
    int q = -1;
    double best = -1.0;
    for (int j = 0; j < s.cols; ++j) {
      if (s.where[static_cast<std::size_t>(j)] >= 0 || s.lo[j] == s.hi[j]) continue;
      double arj = row[j];
      if (std::abs(arj) <= opt_.pivot_tol) continue;
      bool upper = s.at_upper[static_cast<std::size_t>(j)] != 0;
      if ((!upper && delta_basic * arj <= 0) || (upper && delta_basic * arj >= 0)) continue;
      if (std::abs(s.d[j]) / std::abs(arj) <= bound && std::abs(arj) > best) {
        best = std::abs(arj);
        q = j;
      }
    }
    if (q < 0) return LpStatus::Infeasible;
    double step = delta_basic / row[q];
    const Eigen::VectorXd col = s.t.col(q);
    for (int i = 0; i < m_; ++i) s.x[s.head[static_cast<std::size_t>(i)]] -= col[i] * step;
    s.x[q] += step;
    bool to_upper = target == s.hi[leaving] && s.hi[leaving] != s.lo[leaving];
    pivot(r, q);
    s.at_upper[static_cast<std::size_t>(leaving)] = to_upper ? 1 : 0;
    s.x[leaving] = target;
  }
  throw NumericalFailure("dual simplex hit its iteration limit");
}

LpSolution LpEngine::extract(LpStatus status) const {
  const State& s = *st_;
  LpSolution sol;
  sol.status = status;
  if (status != LpStatus::Optimal) return sol;
  sol.values.resize(static_cast<std::size_t>(n_));
  double obj = c0_;
  for (int j = 0; j < n_; ++j) {
    double v = std::clamp(s.x[j], s.lo[j], s.hi[j]);
    sol.values[static_cast<std::size_t>(j)] = v;
    obj += c_[j] * v;
  }
  sol.objective = obj;
  sol.basis.at_upper.assign(static_cast<std::size_t>(n_ + m_), 0);
  for (int j = 0; j < n_ + m_; ++j) sol.basis.at_upper[static_cast<std::size_t>(j)] = s.at_upper[static_cast<std::size_t>(j)];
  for (int i = 0; i < m_; ++i) {
    int h = s.head[static_cast<std::size_t>(i)];
    // A basic artificial spans the same column as its row's slack.
    if (h >= n_ + m_) h = n_ + s.art_row[static_cast<std::size_t>(h - n_ - m_)];
    sol.basis.basic.push_back(h);
  }
  return sol;
}

LpSolution LpEngine::finish(LpSolution sol) {
  if (sol.status != LpStatus::Optimal) {
    st_->valid = false;
    return sol;
  }
  State& s = *st_;
  for (int attempt = 0; attempt <= opt_.refactor_retries; ++attempt) {
    recompute();
    double primal_violation = 0.0;
    for (int i = 0; i < m_; ++i) {
      int h = s.head[static_cast<std::size_t>(i)];
      primal_violation = std::max({primal_violation, s.lo[h] - s.x[h], s.x[h] - s.hi[h]});
    }
    double dual_violation = 0.0;
    for (int j = 0; j < n_ + m_; ++j) {
      if (s.where[static_cast<std::size_t>(j)] >= 0 || s.lo[j] == s.hi[j]) continue;
      dual_violation = std::max(dual_violation, s.at_upper[static_cast<std::size_t>(j)] ? -s.d[j] : s.d[j]);
    }
    if (primal_violation <= 1e-7 && dual_violation <= 1e-7) {
      s.valid = true;
      return extract(LpStatus::Optimal);
    }
    if (attempt > 0) refactor();
    LpStatus st = primal_violation > 1e-7 ? run_dual() : LpStatus::Optimal;
    if (st == LpStatus::Optimal) st = run_primal(false);
    if (st != LpStatus::Optimal) {
      s.valid = false;
      return extract(st);
    }
  }
  throw NumericalFailure("LP solution failed its feasibility check after refactorization");
}

LpSolution LpEngine::cold_solve(std::span<const double> lower, std::span<const double> upper) {
  State& s = *st_;
  // Slack basis, structurals at the bound nearest zero; rows whose slack would fall outside
  // its bounds get an artificial column instead.
  Eigen::VectorXd xs(n_);
  for (int j = 0; j < n_; ++j) {
    double lo = lower[static_cast<std::size_t>(j)];
    double hi = upper[static_cast<std::size_t>(j)];
    xs[j] = (std::abs(lo) <= std::abs(hi)) ? lo : hi;
  }
  Eigen::VectorXd resid = b_ - a_ * xs;
  std::vector<int> art_rows;
  std::vector<double> art_signs;
  for (int i = 0; i < m_; ++i) {
    if (resid[i] < slack_lo_[i] - opt_.feasibility_tol || resid[i] > slack_hi_[i] + opt_.feasibility_tol) {
      double bound = resid[i] < slack_lo_[i] ? slack_lo_[i] : slack_hi_[i];
      art_rows.push_back(i);
      art_signs.push_back(resid[i] - bound > 0 ? 1.0 : -1.0);
    }
  }
  int k = static_cast<int>(art_rows.size());
  s = State{};
  s.cols = n_ + m_ + k;
  s.art_row = art_rows;
  s.art_sign = art_signs;
  s.t = Eigen::MatrixXd::Zero(m_, s.cols);
  s.t.leftCols(n_) = a_;
  s.t.middleCols(n_, m_).setIdentity();
  s.x = Eigen::VectorXd::Zero(s.cols);
  s.d = Eigen::VectorXd::Zero(s.cols);
  s.cost = Eigen::VectorXd::Zero(s.cols);
  s.lo.resize(s.cols);
  s.hi.resize(s.cols);
  s.head.assign(static_cast<std::size_t>(m_), -1);
  s.where.assign(static_cast<std::size_t>(s.cols), -1);
  s.at_upper.assign(static_cast<std::size_t>(s.cols), 0);
  for (int j = 0; j < n_; ++j) {
    s.lo[j] = lower[static_cast<std::size_t>(j)];
    s.hi[j] = upper[static_cast<std::size_t>(j)];
    s.x[j] = xs[j];
    s.at_upper[static_cast<std::size_t>(j)] = (xs[j] == s.hi[j] && s.hi[j] != s.lo[j]) ? 1 : 0;
  }
  for (int i = 0; i < m_; ++i) {
    s.lo[n_ + i] = slack_lo_[i];
    s.hi[n_ + i] = slack_hi_[i];
    s.head[static_cast<std::size_t>(i)] = n_ + i;
    s.where[static_cast<std::size_t>(n_ + i)] = i;
    s.x[n_ + i] = resid[i];
  }
  for (int a = 0; a < k; ++a) {
    int i = art_rows[static_cast<std::size_t>(a)];
    int col = n_ + m_ + a;
    double sign = art_signs[static_cast<std::size_t>(a)];
    int slack = n_ + i;
    bool upper_side = !(resid[i] < slack_lo_[i]);
    double bound = upper_side ? slack_hi_[i] : slack_lo_[i];
    s.where[static_cast<std::size_t>(slack)] = -1;
    s.at_upper[static_cast<std::size_t>(slack)] = (upper_side && slack_lo_[i] != slack_hi_[i]) ? 1 : 0;
    s.x[slack] = bound;
    s.head[static_cast<std::size_t>(i)] = col;
    s.where[static_cast<std::size_t>(col)] = i;
    s.t.row(i) *= sign;
    s.t(i, col) = 1.0;
    s.lo[col] = 0.0;
    s.hi[col] = kInf;
    s.x[col] = std::abs(resid[i] - bound);
    s.cost[col] = -1.0;
  }
  int iterations = 0;
  if (k > 0) {
    recompute();
    LpStatus p1 = run_primal(true);
    if (p1 != LpStatus::Optimal) throw NumericalFailure("phase 1 did not terminate optimally");
    recompute();
    double infeasibility = 0.0;
    for (int a = 0; a < k; ++a) infeasibility += s.x[n_ + m_ + a];
    if (infeasibility > 1e-7) {
      s.valid = false;
      return extract(LpStatus::Infeasible);
    }
    for (int a = 0; a < k; ++a) {
      int col = n_ + m_ + a;
      s.hi[col] = 0.0;
      s.cost[col] = 0.0;
      int r = s.where[static_cast<std::size_t>(col)];
      if (r < 0) {
        s.x[col] = 0.0;
        continue;
      }
      // Pivot the artificial out of the basis when the row has a usable entry.
      int best = -1;
      double best_abs = 1e-7;
      for (int j = 0; j < n_ + m_; ++j) {
        if (s.where[static_cast<std::size_t>(j)] >= 0) continue;
        if (std::abs(s.t(r, j)) > best_abs) {
          best_abs = std::abs(s.t(r, j));
          best = j;
        }
      }
      if (best >= 0) {
        pivot(r, best);
        s.at_upper[static_cast<std::size_t>(col)] = 0;
        s.x[col] = 0.0;
      }
    }
  }
  s.cost.head(n_) = c_;
  recompute();
  LpStatus p2 = run_primal(false);
  LpSolution sol;
  sol.status = p2;
  sol = finish(sol);
  sol.iterations = iterations;
  return sol;
}

bool LpEngine::load_basis(const LpBasis& basis) {
  if (static_cast<int>(basis.basic.size()) != m_ ||
      static_cast<int>(basis.at_upper.size()) != n_ + m_) {
    return false;
  }
  State& s = *st_;
  s = State{};
  s.cols = n_ + m_;
  s.head = basis.basic;
  s.where.assign(static_cast<std::size_t>(s.cols), -1);
  for (int i = 0; i < m_; ++i) {
    int h = s.head[static_cast<std::size_t>(i)];
    if (h < 0 || h >= s.cols || s.where[static_cast<std::size_t>(h)] >= 0) return false;
    s.where[static_cast<std::size_t>(h)] = i;
  }
  s.at_upper = basis.at_upper;
  s.lo.resize(s.cols);
  s.hi.resize(s.cols);
  s.lo.segment(n_, m_) = slack_lo_;
  s.hi.segment(n_, m_) = slack_hi_;
  for (int i = 0; i < m_; ++i) {
    // Nonbasic slacks sit on their only finite bound.
    int j = n_ + i;
    if (!std::isfinite(slack_hi_[i])) s.at_upper[static_cast<std::size_t>(j)] = 0;
    if (!std::isfinite(slack_lo_[i])) s.at_upper[static_cast<std::size_t>(j)] = 1;
  }
  s.x = Eigen::VectorXd::Zero(s.cols);
  s.d = Eigen::VectorXd::Zero(s.cols);
  s.cost = Eigen::VectorXd::Zero(s.cols);
  s.cost.head(n_) = c_;
  Eigen::MatrixXd full(m_, s.cols);
  full.leftCols(n_) = a_;
  full.middleCols(n_, m_).setIdentity();
  Eigen::MatrixXd bmat(m_, m_);
  for (int i = 0; i < m_; ++i) bmat.col(i) = full.col(s.head[static_cast<std::size_t>(i)]);
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(bmat);
  double rcond = lu.rcond();
  if (!(rcond > 1e-12)) return false;
  s.t = lu.solve(full);
  return true;
}

LpSolution LpEngine::solve(std::span<const double> lower, std::span<const double> upper) {
  return cold_solve(lower, upper);
}

namespace {

bool dual_feasible(const Eigen::VectorXd& d, const std::vector<int>& where,
                   const std::vector<unsigned char>& at_upper, const Eigen::VectorXd& lo,
                   const Eigen::VectorXd& hi, int limit, double tol) {
  for (int j = 0; j < limit; ++j) {
    if (where[static_cast<std::size_t>(j)] >= 0 || lo[j] == hi[j]) continue;
    double dj = d[j];
    if (at_upper[static_cast<std::size_t>(j)] ? dj < -tol : dj > tol) return false;
  }
  return true;
}

}  // namespace

LpSolution LpEngine::solve_from_basis(std::span<const double> lower, std::span<const double> upper,
                                      const LpBasis& basis) {
  if (!load_basis(basis)) return cold_solve(lower, upper);
  set_structural_bounds(lower, upper);
  recompute();
  State& s = *st_;
  if (!dual_feasible(s.d, s.where, s.at_upper, s.lo, s.hi, s.cols, opt_.optimality_tol)) {
    return cold_solve(lower, upper);
  }
  try {
    LpStatus st = run_dual();
    if (st == LpStatus::Optimal) st = run_primal(false);
    LpSolution sol;
    sol.status = st;
    return finish(sol);
  } catch (const NumericalFailure&) {
    return cold_solve(lower, upper);
  }
}

LpSolution LpEngine::solve_from_snapshot(std::span<const double> lower,
                                         std::span<const double> upper, const Snapshot& snapshot) {
  *st_ = snapshot.state;
  set_structural_bounds(lower, upper);
  recompute();
  State& s = *st_;
  if (!dual_feasible(s.d, s.where, s.at_upper, s.lo, s.hi, s.cols, 1e-7)) {
    return cold_solve(lower, upper);
  }
  try {
    LpStatus st = run_dual();
    if (st == LpStatus::Optimal) st = run_primal(false);
    LpSolution sol;
    sol.status = st;
    return finish(sol);
  } catch (const NumericalFailure&) {
    return cold_solve(lower, upper);
  }
}

LpSolution lp_solve(const MilpModel& model, const LpOptions& options) {
  model.validate();
  LpEngine engine(model, options);
  std::vector<double> lo, hi;
  for (const Variable& v : model.variables()) {
    lo.push_back(v.lower);
    hi.push_back(v.upper);
  }
  return engine.solve(lo, hi);
}

}  // namespace lyapnet::milp
