#include <cmath>

#include "doctest.h"
#include "errors.hpp"
#include "metrics.hpp"
#include "rng.hpp"

using namespace ioncalib;

namespace {

Eigen::VectorXd vec(std::vector<double> values) {
    return Eigen::Map<const Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
}

}  // namespace

TEST_CASE("rmse basics") {
    CHECK(rmse(vec({1.0, 2.0, 3.0}), vec({1.0, 2.0, 3.0})) == 0.0);
    CHECK(rmse(vec({1.0, 2.0}), vec({4.0, 5.0})) == doctest::Approx(3.0));  // constant offset
    CHECK(rmse(vec({0.0, 0.0, 0.0}), vec({3.0, 4.0, 0.0})) ==
          doctest::Approx(std::sqrt(25.0 / 3.0)).epsilon(1e-9));
    CHECK(rmse(vec({0.0, 0.0, 0.0}), vec({3.0, 4.0, 0.0})) == doctest::Approx(2.886751).epsilon(1e-6));
    CHECK_THROWS_AS(rmse(vec({1.0}), vec({1.0, 2.0})), ContractError);
}

TEST_CASE("posterior predictive loglik reduces to the single draw") {
    CHECK(posterior_predictive_loglik({-12.5}) == doctest::Approx(-12.5));
}

TEST_CASE("equal per-draw densities pass through log-mean-exp") {
    CHECK(posterior_predictive_loglik({-3.0, -3.0, -3.0}) == doctest::Approx(-3.0).epsilon(1e-12));
}

TEST_CASE("log-mean-exp is stable under huge spreads") {
    CHECK(posterior_predictive_loglik({0.0, -1000.0}) == doctest::Approx(std::log(0.5)).epsilon(1e-9));
    CHECK(posterior_predictive_loglik({0.0, -1000.0}) == doctest::Approx(-0.693147).epsilon(1e-5));
}

TEST_CASE("all -inf draws collapse to -inf") {
    const double neg_inf = -std::numeric_limits<double>::infinity();
    CHECK(posterior_predictive_loglik({neg_inf, neg_inf}) == neg_inf);
}

TEST_CASE("draw order does not change the score") {
    Rng rng(3);
    std::vector<double> lls;
    for (int i = 0; i < 64; ++i) lls.push_back(rng.normal(-100.0, 10.0));
    const double a = posterior_predictive_loglik(lls);
    std::reverse(lls.begin(), lls.end());
    CHECK(posterior_predictive_loglik(lls) == doctest::Approx(a).epsilon(1e-13));
}

TEST_CASE("relative score table zeroes each row at its maximum") {
    ScoreTable t;
    t.row_labels = {"r1", "r2", "r3"};
    t.column_labels = {"a", "b", "c"};
    t.values.resize(3, 3);
    t.values << -5.0, -3.0, -10.0, 1.0, 1.0, 0.0, -7.0, -7.0, -7.0;
    const ScoreTable rel = relative_score_table(t);
    CHECK(rel.values(0, 0) == doctest::Approx(-2.0));
    CHECK(rel.values(0, 1) == 0.0);
    CHECK(rel.values(0, 2) == doctest::Approx(-7.0));
    // ties keep multiple zeros; every row has at least one exact zero
    for (int i = 0; i < 3; ++i) {
        int zeros = 0;
        for (int j = 0; j < 3; ++j)
            if (rel.values(i, j) == 0.0) ++zeros;
        CHECK(zeros >= 1);
    }
    CHECK(rel.values(1, 0) == 0.0);
    CHECK(rel.values(1, 1) == 0.0);
}

TEST_CASE("single-entry rows become zero") {
    ScoreTable t;
    t.row_labels = {"only"};
    t.column_labels = {"x"};
    t.values.resize(1, 1);
    t.values << -42.0;
    CHECK(relative_score_table(t).values(0, 0) == 0.0);
}

TEST_CASE("csv rendering carries footnotes as comment lines") {
    ScoreTable t;
    t.row_labels = {"cal"};
    t.column_labels = {"iid", "gp-t"};
    t.values.resize(1, 2);
    t.values << 1.5, -2.25;
    const std::string csv = score_table_csv(t, {"note one", "note two"});
    CHECK(csv.find("# note one\n") != std::string::npos);
    CHECK(csv.find("# note two\n") != std::string::npos);
    CHECK(csv.find("row,iid,gp-t\n") != std::string::npos);
    CHECK(csv.find("cal,1.5,-2.25") != std::string::npos);

    const std::string text = score_table_text(t);
    CHECK(text.find("iid") != std::string::npos);
}
