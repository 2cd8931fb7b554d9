#include <doctest.h>

#include <Eigen/Dense>

#include <algorithm>
#include <vector>

#include "aft/assignment.hpp"
#include "aft/rng.hpp"

using namespace aft;

namespace {

// Exhaustive reference: dynamic program over (row prefix, used-column mask).
// Additions happen in ascending row order, matching how the solver sums its
// total, so agreement on the same matching is bitwise.
double oracle_best_total(const Eigen::MatrixXd& w, double score_floor) {
  const int nr = static_cast<int>(w.rows());
  const int nc = static_cast<int>(w.cols());
  const double floor_eff = std::max(score_floor, 0.0);
  REQUIRE(nc <= 20);
  std::vector<double> dp(std::size_t(1) << nc, 0.0);
  for (int i = 0; i < nr; ++i) {
    std::vector<double> next = dp;
    for (std::size_t mask = 0; mask < dp.size(); ++mask) {
      for (int j = 0; j < nc; ++j) {
        if (mask & (std::size_t(1) << j)) continue;
        const double wij = w(i, j);
        if (!(wij > floor_eff)) continue;
        const double cand = dp[mask] + wij;
        auto& slot = next[mask | (std::size_t(1) << j)];
        if (cand > slot) slot = cand;
      }
    }
    dp = std::move(next);
  }
  return *std::max_element(dp.begin(), dp.end());
}

void check_valid(const Eigen::MatrixXd& w, double floor_eff, const AssignmentResult& r) {
  std::vector<int> col_seen(static_cast<std::size_t>(w.cols()), 0);
  int matched = 0;
  double total = 0.0;
  for (int i = 0; i < w.rows(); ++i) {
    const int j = r.row_to_col[static_cast<std::size_t>(i)];
    if (j < 0) continue;
    CHECK(j < w.cols());
    CHECK(w(i, j) > std::max(floor_eff, 0.0));
    CHECK(r.col_to_row[static_cast<std::size_t>(j)] == i);
    CHECK(col_seen[static_cast<std::size_t>(j)] == 0);
    col_seen[static_cast<std::size_t>(j)] = 1;
    ++matched;
    total += w(i, j);
  }
  for (int j = 0; j < w.cols(); ++j) {
    const int i = r.col_to_row[static_cast<std::size_t>(j)];
    if (i >= 0) CHECK(r.row_to_col[static_cast<std::size_t>(i)] == j);
  }
  CHECK(matched == r.n_matched);
  CHECK(total == r.total_score);
}

}  // namespace

TEST_CASE("greedy-trap matrix is solved globally") {
  // Taking the single largest score first would strand the second row.
  Eigen::MatrixXd w(2, 2);
  w << 5.0, 4.0,  //
      4.0, 0.01;
  const auto r = max_score_assignment(w, 0.05);
  CHECK(r.n_matched == 2);
  CHECK(r.total_score == 8.0);
  CHECK(r.row_to_col[0] == 1);
  CHECK(r.row_to_col[1] == 0);
}

TEST_CASE("scores at or below the floor never match") {
  Eigen::MatrixXd w(2, 3);
  w << 0.05, 0.02, 0.0,  //
      -1.0, 0.05, 0.04;
  const auto r = max_score_assignment(w, 0.05);
  CHECK(r.n_matched == 0);
  CHECK(r.total_score == 0.0);
  CHECK(std::all_of(r.row_to_col.begin(), r.row_to_col.end(), [](int j) { return j == -1; }));
}

TEST_CASE("negative scores are ineligible even with a zero floor") {
  Eigen::MatrixXd w(2, 2);
  w << -0.5, 2.0,  //
      -0.1, -0.2;
  const auto r = max_score_assignment(w, 0.0);
  CHECK(r.n_matched == 1);
  CHECK(r.row_to_col[0] == 1);
  CHECK(r.row_to_col[1] == -1);
  CHECK(r.total_score == 2.0);
}

TEST_CASE("leaving a row unmatched can be optimal") {
  // Matching row 1 to the only eligible column would displace row 0 from it.
  Eigen::MatrixXd w(2, 1);
  w << 3.0,  //
      2.0;
  const auto r = max_score_assignment(w, 0.0);
  CHECK(r.n_matched == 1);
  CHECK(r.row_to_col[0] == 0);
  CHECK(r.row_to_col[1] == -1);
  CHECK(r.total_score == 3.0);
}

TEST_CASE("empty inputs give empty matchings") {
  CHECK(max_score_assignment(Eigen::MatrixXd(0, 5)).n_matched == 0);
  CHECK(max_score_assignment(Eigen::MatrixXd(4, 0)).row_to_col ==
        std::vector<int>({-1, -1, -1, -1}));
}

TEST_CASE("solver agrees with the exhaustive reference on random instances") {
  rng::Stream rs(9001);
  for (int trial = 0; trial < 300; ++trial) {
    const int nr = 1 + int(rs.index(7));
    const int nc = 1 + int(rs.index(12));
    Eigen::MatrixXd w(nr, nc);
    for (int i = 0; i < nr; ++i) {
      for (int j = 0; j < nc; ++j) {
        // Mix of eligible, sub-floor, and negative entries.
        const double roll = rs.uniform01();
        if (roll < 0.15) {
          w(i, j) = -rs.uniform01();
        } else if (roll < 0.3) {
          w(i, j) = rs.uniform(0.0, 0.05);
        } else {
          w(i, j) = rs.uniform(0.05, 1.0);
        }
      }
    }
    const double floor = (trial % 2 == 0) ? 0.05 : 0.0;
    const auto r = max_score_assignment(w, floor);
    check_valid(w, floor, r);
    CHECK(r.total_score == oracle_best_total(w, floor));
  }
}

TEST_CASE("transposing the score matrix transposes the matching value") {
  rng::Stream rs(5);
  for (int trial = 0; trial < 50; ++trial) {
    Eigen::MatrixXd w(3 + int(rs.index(4)), 3 + int(rs.index(8)));
    for (int i = 0; i < w.rows(); ++i)
      for (int j = 0; j < w.cols(); ++j) w(i, j) = rs.uniform01();
    const auto a = max_score_assignment(w, 0.1);
    const auto b = max_score_assignment(w.transpose().eval(), 0.1);
    CHECK(a.total_score == doctest::Approx(b.total_score).epsilon(1e-13));
    CHECK(a.n_matched == b.n_matched);
  }
}

TEST_CASE("near-diagonal instances match along the diagonal") {
  // The tracking pipeline produces strongly diagonal score matrices; the
  // solver must recover that structure exactly.
  const int n = 40;
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(n, n);
  rng::Stream rs(17);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      w(i, j) = (i == j) ? rs.uniform(0.8, 1.0) : rs.uniform(0.0, 0.3);
    }
  }
  const auto r = max_score_assignment(w, 0.05);
  // Any deviation trades >= 1.6 of diagonal score for < 0.6 off-diagonal.
  for (int i = 0; i < n; ++i) CHECK(r.row_to_col[std::size_t(i)] == i);
  CHECK(r.n_matched == n);
}
