#pragma once

#include <Eigen/Dense>

#include <vector>

namespace aft {

struct AssignmentResult {
  std::vector<int> row_to_col;  // -1 for unmatched rows
  std::vector<int> col_to_row;  // -1 for unmatched columns
  double total_score{0.0};      // summed over matched pairs in row order
  int n_matched{0};
};

/// Exact maximum-total-score partial matching.  A pair (i, j) may be matched
/// only when scores(i, j) > max(score_floor, 0); rows and columns left
/// unmatched contribute nothing.  Reduces to a rectangular min-cost
/// assignment with one slack column per row, solved by shortest augmenting
/// paths with dual potentials.
AssignmentResult max_score_assignment(const Eigen::MatrixXd& scores, double score_floor = 0.0);

}  // namespace aft
