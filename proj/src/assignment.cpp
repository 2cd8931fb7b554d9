#include "aft/assignment.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>
#include <utility>
#include <vector>

namespace aft {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

/// Min-cost assignment of every row to a distinct column via shortest
/// augmenting paths over reduced costs; nr <= nc_real, all costs finite.
/// Besides the nc_real real columns each row owns a virtual slack column
/// (id nc_real + row) of cost `slack_cost`, so a row can always terminate a
/// path; slack columns are kept out of the per-step scan and tracked through
/// a small heap instead.  Returns col4row with slack ids left in place.
std::vector<int> solve_rectangular(const std::vector<double>& cost, int nr, int nc_real,
                                   double slack_cost) {
  const int nc = nc_real + nr;
  std::vector<double> u(nr, 0.0), v(nc, 0.0), shortest(nc);
  std::vector<int> path(nc, -1), col4row(nr, -1), row4col(nc, -1);
  std::vector<char> scanned_row(nr), scanned_col(nc);
  std::vector<int> scanned_slacks;

  // Row reduction: start each row's dual at its cheapest real column and
  // greedily take that column while free.  Matched arcs are tight, so the
  // stages below inherit a valid partial solution and only have to resolve
  // the contested rows.
  std::vector<int> free_rows;
  for (int i = 0; i < nr; ++i) {
    const double* row = cost.data() + static_cast<std::ptrdiff_t>(i) * nc_real;
    int arg = 0;
    double lo = row[0];
    for (int j = 1; j < nc_real; ++j) {
      if (row[j] < lo) {
        lo = row[j];
        arg = j;
      }
    }
    u[i] = lo;
    if (lo < slack_cost && row4col[arg] == -1) {
      col4row[i] = arg;
      row4col[arg] = i;
    } else {
      free_rows.push_back(i);
    }
  }

  // Augmenting row reduction: a free row grabs its cheapest reduced column,
  // displacing the previous owner after lowering that column's dual to keep
  // the arc tight (second-cheapest rule).  Duals stay feasible throughout,
  // so any matching this produces certifies itself; rows displaced too
  // often fall through to the shortest-path stage.
  std::vector<int> visits(nr, 0);
  for (std::size_t head = 0; head < free_rows.size(); ++head) {
    const int i = free_rows[head];
    if (++visits[i] > 3) continue;
    const double* row = cost.data() + static_cast<std::ptrdiff_t>(i) * nc_real;
    double min1 = slack_cost - v[nc_real + i];
    int arg1 = nc_real + i;
    double min2 = kInf;
    for (int j = 0; j < nc_real; ++j) {
      const double r = row[j] - v[j];
      if (r < min2) {
        if (r < min1) {
          min2 = min1;
          min1 = r;
          arg1 = j;
        } else {
          min2 = r;
        }
      }
    }
    u[i] = min2;
    if (min1 < min2) v[arg1] -= min2 - min1;
    const int owner = row4col[arg1];
    col4row[i] = arg1;
    row4col[arg1] = i;
    if (owner != -1) {
      col4row[owner] = -1;
      free_rows.push_back(owner);
    }
  }

  using SlackEntry = std::pair<double, int>;  // (distance, slack column id)
  for (int cur_row = 0; cur_row < nr; ++cur_row) {
    if (col4row[cur_row] != -1) continue;
    std::fill(shortest.begin(), shortest.end(), kInf);
    std::fill(scanned_row.begin(), scanned_row.end(), char(0));
    std::fill(scanned_col.begin(), scanned_col.end(), char(0));
    scanned_slacks.clear();
    std::priority_queue<SlackEntry, std::vector<SlackEntry>, std::greater<>> slack_heap;

    double min_val = 0.0;
    int i = cur_row;
    int sink = -1;
    double path_cost = 0.0;
    while (sink == -1) {
      scanned_row[i] = 1;
      const double* row = cost.data() + static_cast<std::ptrdiff_t>(i) * nc_real;
      const double base = min_val - u[i];

      const int own_slack = nc_real + i;
      if (col4row[i] != own_slack) {
        const double r = base + slack_cost - v[own_slack];
        if (r < shortest[own_slack]) {
          shortest[own_slack] = r;
          path[own_slack] = i;
          slack_heap.emplace(r, own_slack);
        }
      }

      int index = -1;
      double lowest = kInf;
      for (int j = 0; j < nc_real; ++j) {
        if (scanned_col[j]) continue;
        const double r = base + row[j] - v[j];
        if (r < shortest[j]) {
          path[j] = i;
          shortest[j] = r;
        }
        // Prefer a free column on ties so the tree terminates sooner.
        if (shortest[j] < lowest || (shortest[j] == lowest && row4col[j] == -1)) {
          lowest = shortest[j];
          index = j;
        }
      }

      while (!slack_heap.empty() && scanned_col[slack_heap.top().second]) slack_heap.pop();
      const bool take_slack =
          !slack_heap.empty() &&
          (slack_heap.top().first < lowest ||
           (slack_heap.top().first == lowest && (index < 0 || row4col[index] != -1)));
      const int j = take_slack ? slack_heap.top().second : index;
      if (take_slack) slack_heap.pop();
      min_val = take_slack ? shortest[j] : lowest;
      if (min_val == kInf) return {};  // unreachable: own slack always open

      if (row4col[j] == -1) {
        sink = j;
      } else {
        i = row4col[j];
      }
      scanned_col[j] = 1;
      if (j >= nc_real) scanned_slacks.push_back(j);
    }
    path_cost = min_val;

    u[cur_row] += path_cost;
    for (int r = 0; r < nr; ++r) {
      if (scanned_row[r] && r != cur_row) u[r] += path_cost - shortest[col4row[r]];
    }
    for (int j = 0; j < nc_real; ++j) {
      if (scanned_col[j]) v[j] -= path_cost - shortest[j];
    }
    for (int j : scanned_slacks) v[j] -= path_cost - shortest[j];

    int j = sink;
    while (true) {
      const int r = path[j];
      row4col[j] = r;
      std::swap(col4row[r], j);
      if (r == cur_row) break;
    }
  }
  return col4row;
}

}  // namespace

AssignmentResult max_score_assignment(const Eigen::MatrixXd& scores, double score_floor) {
  const int n_rows = static_cast<int>(scores.rows());
  const int n_cols = static_cast<int>(scores.cols());
  AssignmentResult result;
  result.row_to_col.assign(static_cast<std::size_t>(n_rows), -1);
  result.col_to_row.assign(static_cast<std::size_t>(n_cols), -1);
  if (n_rows == 0 || n_cols == 0) return result;

  const double floor_eff = std::max(score_floor, 0.0);
  double w_max = 0.0;
  for (int j = 0; j < n_cols; ++j) {
    for (int i = 0; i < n_rows; ++i) {
      const double w = scores(i, j);
      if (w > floor_eff && w > w_max) w_max = w;
    }
  }
  if (w_max == 0.0) return result;  // nothing eligible

  // Solve on the smaller side as rows; sub-floor pairs cost as much as
  // leaving the row unmatched, so they never beat a slack assignment.
  const bool transposed = n_rows > n_cols;
  const int nr = transposed ? n_cols : n_rows;
  const int nc_real = transposed ? n_rows : n_cols;

  std::vector<double> cost(static_cast<std::size_t>(nr) * nc_real, w_max);
  for (int i = 0; i < nr; ++i) {
    double* row = cost.data() + static_cast<std::ptrdiff_t>(i) * nc_real;
    for (int j = 0; j < nc_real; ++j) {
      const double w = transposed ? scores(j, i) : scores(i, j);
      if (w > floor_eff) row[j] = w_max - w;
    }
  }

  const std::vector<int> col4row = solve_rectangular(cost, nr, nc_real, w_max);

  for (int i = 0; i < nr; ++i) {
    const int j = col4row[i];
    if (j >= nc_real) continue;  // slack
    const int row = transposed ? j : i;
    const int col = transposed ? i : j;
    if (scores(row, col) > floor_eff) {
      result.row_to_col[static_cast<std::size_t>(row)] = col;
      result.col_to_row[static_cast<std::size_t>(col)] = row;
    }
  }
  for (int i = 0; i < n_rows; ++i) {
    const int j = result.row_to_col[static_cast<std::size_t>(i)];
    if (j >= 0) {
      result.total_score += scores(i, j);
      ++result.n_matched;
    }
  }
  return result;
}

}  // namespace aft
