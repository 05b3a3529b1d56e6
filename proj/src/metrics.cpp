#include "metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include "errors.hpp"

namespace ioncalib {

double rmse(const Eigen::VectorXd& prediction, const Eigen::VectorXd& data) {
    if (prediction.size() != data.size()) throw ContractError("rmse: length mismatch");
    if (prediction.size() == 0) throw ContractError("rmse: empty vectors");
    return std::sqrt((prediction - data).squaredNorm() / static_cast<double>(prediction.size()));
}

double posterior_predictive_loglik(const std::vector<double>& per_draw_loglik) {
    if (per_draw_loglik.empty()) throw ContractError("posterior predictive loglik: no draws");
    const double max_ll = *std::max_element(per_draw_loglik.begin(), per_draw_loglik.end());
    if (!std::isfinite(max_ll)) return -std::numeric_limits<double>::infinity();
    double acc = 0.0;
    for (double ll : per_draw_loglik) acc += std::exp(ll - max_ll);
    return max_ll + std::log(acc / static_cast<double>(per_draw_loglik.size()));
}

ScoreTable relative_score_table(const ScoreTable& absolute) {
    if (absolute.values.cols() < 1) throw ContractError("score table: needs at least one column");
    ScoreTable out = absolute;
    for (Eigen::Index i = 0; i < out.values.rows(); ++i)
        out.values.row(i).array() -= out.values.row(i).maxCoeff();
    return out;
}

std::string score_table_csv(const ScoreTable& table, const std::vector<std::string>& footnotes) {
    std::ostringstream out;
    for (const auto& note : footnotes) out << "# " << note << "\n";
    out << "row";
    for (const auto& c : table.column_labels) out << "," << c;
    out << "\n";
    char buf[48];
    for (Eigen::Index i = 0; i < table.values.rows(); ++i) {
        out << table.row_labels[static_cast<std::size_t>(i)];
        for (Eigen::Index j = 0; j < table.values.cols(); ++j) {
            std::snprintf(buf, sizeof buf, ",%.17g", table.values(i, j));
            out << buf;
        }
        out << "\n";
    }
    return out.str();
}

std::string score_table_text(const ScoreTable& table) {
    std::size_t label_width = 3;
    for (const auto& r : table.row_labels) label_width = std::max(label_width, r.size());
    std::ostringstream out;
    out << std::string(label_width, ' ');
    char buf[48];
    for (const auto& c : table.column_labels) {
        std::snprintf(buf, sizeof buf, " %14s", c.c_str());
        out << buf;
    }
    out << "\n";
    for (Eigen::Index i = 0; i < table.values.rows(); ++i) {
        const auto& label = table.row_labels[static_cast<std::size_t>(i)];
        out << label << std::string(label_width - label.size(), ' ');
        for (Eigen::Index j = 0; j < table.values.cols(); ++j) {
            std::snprintf(buf, sizeof buf, " %14.4f", table.values(i, j));
            out << buf;
        }
        out << "\n";
    }
    return out.str();
}

}  // namespace ioncalib
