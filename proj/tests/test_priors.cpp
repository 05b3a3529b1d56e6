#include <cmath>
#include <limits>

#include "doctest.h"
#include "errors.hpp"
#include "priors.hpp"

using namespace ioncalib;

namespace {
constexpr double kNegInf = -std::numeric_limits<double>::infinity();
}

TEST_CASE("uniform prior is 0 inside and -inf outside") {
    const PriorDist u = UniformPrior{0.0, 1.0};
    CHECK(prior_log_density(u, 0.5) == 0.0);
    CHECK(prior_log_density(u, 0.0) == 0.0);
    CHECK(prior_log_density(u, 1.0) == 0.0);
    CHECK(prior_log_density(u, -0.01) == kNegInf);
    CHECK(prior_log_density(u, 1.01) == kNegInf);
}

TEST_CASE("half-normal density at zero") {
    const PriorDist h = HalfNormalPrior{25.0};
    CHECK(prior_log_density(h, 0.0) ==
          doctest::Approx(std::log(2.0 / (25.0 * std::sqrt(2.0 * M_PI)))).epsilon(1e-12));
    CHECK(prior_log_density(h, -1.0) == kNegInf);
}

TEST_CASE("inverse-gamma mode sits at scale/(shape+1)") {
    const PriorDist ig = InverseGammaPrior{5.0, 5.0};
    const double mode = 5.0 / 6.0;
    const double at_mode = prior_log_density(ig, mode);
    // grid argmax straddles the analytic mode
    double best_x = 0.0, best = kNegInf;
    for (double x = 0.01; x < 5.0; x += 0.001) {
        const double v = prior_log_density(ig, x);
        if (v > best) {
            best = v;
            best_x = x;
        }
    }
    CHECK(std::abs(best_x - mode) < 0.002);
    CHECK(at_mode >= best - 1e-9);
    CHECK(prior_log_density(ig, 0.0) == kNegInf);
}

TEST_CASE("normal prior matches the closed form") {
    const PriorDist n = NormalPrior{2.0, 0.5};
    const double expected = -std::log(0.5) - 0.5 * std::log(2.0 * M_PI) - 0.5 * 4.0;
    CHECK(prior_log_density(n, 1.0) == doctest::Approx(expected).epsilon(1e-12));
}

namespace {

PriorSpec one_dim_halfnormal() {
    PriorSpec p;
    p.names = {"x"};
    p.dists = {HalfNormalPrior{2.0}};
    p.transforms = {Transform::Log};
    return p;
}

}  // namespace

TEST_CASE("log transform round-trips and adds the jacobian") {
    const PriorSpec p = one_dim_halfnormal();
    Eigen::VectorXd natural(1);
    natural << 0.7;
    const Eigen::VectorXd sampling = p.to_sampling(natural);
    CHECK(sampling(0) == doctest::Approx(std::log(0.7)));
    CHECK(p.to_natural(sampling)(0) == doctest::Approx(0.7).epsilon(1e-14));

    const double expected = prior_log_density(p.dists[0], 0.7) + std::log(0.7);
    CHECK(p.log_density_sampling(sampling) == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("prior spec sums per-parameter densities and short-circuits") {
    PriorSpec p;
    p.names = {"a", "b"};
    p.dists = {UniformPrior{0.0, 1.0}, NormalPrior{0.0, 1.0}};
    p.transforms = {Transform::Identity, Transform::Identity};
    Eigen::VectorXd inside(2), outside(2);
    inside << 0.5, 0.3;
    outside << 2.0, 0.3;
    CHECK(p.log_density(inside) == doctest::Approx(prior_log_density(p.dists[1], 0.3)));
    CHECK(p.log_density(outside) == kNegInf);
}

TEST_CASE("sampling bounds are finite and ordered") {
    PriorSpec p;
    p.names = {"u", "h", "ig", "n"};
    p.dists = {UniformPrior{0.5, 2.0}, HalfNormalPrior{25.0}, InverseGammaPrior{5.0, 5.0},
               NormalPrior{1.0, 2.5}};
    p.transforms = {Transform::Log, Transform::Log, Transform::Log, Transform::Identity};
    const auto [lo, hi] = p.sampling_bounds();
    for (Eigen::Index i = 0; i < lo.size(); ++i) {
        CHECK(std::isfinite(lo(i)));
        CHECK(std::isfinite(hi(i)));
        CHECK(lo(i) < hi(i));
    }
    CHECK(lo(0) == doctest::Approx(std::log(0.5)));
    CHECK(hi(0) == doctest::Approx(std::log(2.0)));
}

TEST_CASE("invalid prior configurations are rejected") {
    PriorSpec bad;
    bad.names = {"x"};
    bad.dists = {UniformPrior{2.0, 1.0}};
    bad.transforms = {Transform::Identity};
    CHECK_THROWS_AS(bad.validate(), ContractError);

    PriorSpec neg;
    neg.names = {"x"};
    neg.dists = {NormalPrior{0.0, 1.0}};
    neg.transforms = {Transform::Log};  // support crosses zero
    CHECK_THROWS_AS(neg.validate(), ContractError);
}
