#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

namespace ioncalib {

double rmse(const Eigen::VectorXd& prediction, const Eigen::VectorXd& data);

// log-mean-exp of per-draw log densities, numerically stable; -inf (with the
// caller expected to warn) when every draw is -inf
double posterior_predictive_loglik(const std::vector<double>& per_draw_loglik);

// Each row shifted by its own maximum so the best entry is exactly zero.
struct ScoreTable {
    std::vector<std::string> row_labels;
    std::vector<std::string> column_labels;
    Eigen::MatrixXd values;
};

ScoreTable relative_score_table(const ScoreTable& absolute);

// CSV with '#'-prefixed footnote lines; also a plain-text aligned rendering
std::string score_table_csv(const ScoreTable& table, const std::vector<std::string>& footnotes);
std::string score_table_text(const ScoreTable& table);

}  // namespace ioncalib
