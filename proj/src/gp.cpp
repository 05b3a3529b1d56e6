#include "gp.hpp"

#include <cmath>

#include "errors.hpp"

namespace ioncalib {

namespace {
constexpr double kLog2Pi = 1.8378770664093453;
constexpr int kDenseGuard = 5000;
}  // namespace

KernelFamily kernel_family_from_name(const std::string& name) {
    if (name == "rbf") return KernelFamily::RBF;
    if (name == "ou") return KernelFamily::OU;
    if (name == "matern32") return KernelFamily::Matern32;
    throw ParseError("unknown kernel family '" + name + "' (expected rbf, ou or matern32)");
}

std::string kernel_family_name(KernelFamily family) {
    switch (family) {
        case KernelFamily::RBF: return "rbf";
        case KernelFamily::OU: return "ou";
        case KernelFamily::Matern32: return "matern32";
    }
    return "rbf";
}

void KernelSpec::validate() const {
    if (!(alpha > 0.0)) throw ContractError("kernel: alpha must be > 0");
    if (rho.empty()) throw ContractError("kernel: needs at least one length-scale");
    for (double r : rho)
        if (!(r > 0.0)) throw ContractError("kernel: length-scales must be > 0");
}

double kernel_eval(const KernelSpec& kspec, const Eigen::VectorXd& v, const Eigen::VectorXd& w) {
    const int q = kspec.dims();
    if (v.size() != q || w.size() != q) throw ContractError("kernel_eval: covariate dimension mismatch");
    const double a2 = kspec.alpha * kspec.alpha;
    switch (kspec.family) {
        case KernelFamily::RBF: {
            double s = 0.0;
            for (int j = 0; j < q; ++j) {
                const double d = (v(j) - w(j)) / kspec.rho[static_cast<std::size_t>(j)];
                s += d * d;
            }
            return a2 * std::exp(-0.5 * s);
        }
        case KernelFamily::OU: {
            double s = 0.0;
            for (int j = 0; j < q; ++j)
                s += std::abs(v(j) - w(j)) / kspec.rho[static_cast<std::size_t>(j)];
            return a2 * std::exp(-s);
        }
        case KernelFamily::Matern32: {
            double s = 0.0;
            for (int j = 0; j < q; ++j) {
                const double d = (v(j) - w(j)) / kspec.rho[static_cast<std::size_t>(j)];
                s += d * d;
            }
            const double r = std::sqrt(3.0 * s);
            return a2 * (1.0 + r) * std::exp(-r);
        }
    }
    return 0.0;
}

Standardizer Standardizer::fit(const Eigen::MatrixXd& covariates) {
    Standardizer s;
    s.mean = covariates.colwise().mean();
    s.scale.resize(covariates.cols());
    const double n = static_cast<double>(covariates.rows());
    for (Eigen::Index j = 0; j < covariates.cols(); ++j) {
        const double var = (covariates.col(j).array() - s.mean(j)).square().sum() / std::max(1.0, n - 1.0);
        const double sd = std::sqrt(var);
        s.scale(j) = sd > 1e-12 ? sd : 1.0;
    }
    return s;
}

Eigen::MatrixXd Standardizer::apply(const Eigen::MatrixXd& covariates) const {
    if (covariates.cols() != mean.size()) throw ContractError("standardizer: covariate dimension mismatch");
    Eigen::MatrixXd out = covariates;
    for (Eigen::Index j = 0; j < out.cols(); ++j)
        out.col(j) = (out.col(j).array() - mean(j)) / scale(j);
    return out;
}

Eigen::MatrixXd inducing_grid(const Eigen::MatrixXd& covariates, const std::vector<int>& per_axis_counts) {
    const auto q = covariates.cols();
    if (static_cast<Eigen::Index>(per_axis_counts.size()) != q)
        throw ContractError("inducing grid: one count per covariate required");
    std::size_t total = 1;
    for (int c : per_axis_counts) {
        if (c < 1) throw ContractError("inducing grid: counts must be >= 1");
        total *= static_cast<std::size_t>(c);
    }
    Eigen::VectorXd lo = covariates.colwise().minCoeff();
    Eigen::VectorXd hi = covariates.colwise().maxCoeff();

    Eigen::MatrixXd points(static_cast<Eigen::Index>(total), q);
    std::vector<int> idx(static_cast<std::size_t>(q), 0);
    for (std::size_t row = 0; row < total; ++row) {
        for (Eigen::Index j = 0; j < q; ++j) {
            const int count = per_axis_counts[static_cast<std::size_t>(j)];
            const double frac = count == 1 ? 0.5 : static_cast<double>(idx[static_cast<std::size_t>(j)]) / (count - 1);
            points(static_cast<Eigen::Index>(row), j) = lo(j) + frac * (hi(j) - lo(j));
        }
        for (Eigen::Index j = 0; j < q; ++j) {
            auto& k = idx[static_cast<std::size_t>(j)];
            if (++k < per_axis_counts[static_cast<std::size_t>(j)]) break;
            k = 0;
        }
    }
    return points;
}

Eigen::MatrixXd kernel_matrix(const KernelSpec& kspec, const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    kspec.validate();
    const int q = kspec.dims();
    if (a.cols() != q || b.cols() != q) throw ContractError("kernel_matrix: covariate dimension mismatch");
    const double a2 = kspec.alpha * kspec.alpha;

    Eigen::VectorXd inv_rho(q);
    for (int j = 0; j < q; ++j) inv_rho(j) = 1.0 / kspec.rho[static_cast<std::size_t>(j)];
    const Eigen::MatrixXd as = a * inv_rho.asDiagonal();
    const Eigen::MatrixXd bs = b * inv_rho.asDiagonal();

    if (kspec.family == KernelFamily::OU) {
        Eigen::MatrixXd dist = Eigen::MatrixXd::Zero(a.rows(), b.rows());
        for (int j = 0; j < q; ++j)
            dist += (as.col(j).replicate(1, b.rows()) - bs.col(j).transpose().replicate(a.rows(), 1))
                        .cwiseAbs();
        return a2 * (-dist).array().exp();
    }

    // squared distances via the Gram identity, clamped against rounding
    Eigen::MatrixXd d2 = (-2.0 * as * bs.transpose()).colwise() + as.rowwise().squaredNorm();
    d2.rowwise() += bs.rowwise().squaredNorm().transpose();
    d2 = d2.cwiseMax(0.0);

    if (kspec.family == KernelFamily::RBF) return a2 * (-0.5 * d2).array().exp();

    const Eigen::ArrayXXd r = (3.0 * d2).array().sqrt();
    return a2 * (1.0 + r) * (-r).exp();
}

Eigen::LLT<Eigen::MatrixXd> cholesky_with_jitter(const Eigen::MatrixXd& m, const std::string& what) {
    const double mean_diag = m.diagonal().mean();
    const double ladder[] = {0.0, 1e-10, 1e-8, 1e-6};
    for (double rel : ladder) {
        Eigen::MatrixXd jittered = m;
        if (rel > 0.0) jittered.diagonal().array() += rel * mean_diag;
        Eigen::LLT<Eigen::MatrixXd> llt(jittered);
        if (llt.info() == Eigen::Success) return llt;
    }
    throw NumericError(what + ": Cholesky failed after jitter ladder (mean diagonal " +
                       std::to_string(mean_diag) + ")");
}

double gp_marginal_loglik_dense(const KernelSpec& kspec, const Eigen::MatrixXd& inputs,
                                const Eigen::VectorXd& residual, double sigma) {
    kspec.validate();
    const auto n = inputs.rows();
    if (n != residual.size()) throw ContractError("gp dense: residual length mismatch");
    if (n > kDenseGuard) throw ContractError("gp dense: N exceeds the dense guard (5000)");

    Eigen::MatrixXd k = kernel_matrix(kspec, inputs, inputs);
    k.diagonal().array() += sigma * sigma;
    auto llt = cholesky_with_jitter(k, "gp dense marginal");

    const Eigen::VectorXd alpha = llt.solve(residual);
    const double logdet = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
    return -0.5 * (static_cast<double>(n) * kLog2Pi + logdet + residual.dot(alpha));
}

FitcFactors fitc_covariance(const KernelSpec& kspec, const Eigen::MatrixXd& inputs,
                            const Eigen::MatrixXd& inducing) {
    kspec.validate();
    if (inducing.rows() < 1) throw ContractError("fitc: need at least one inducing point");
    if (inducing.rows() > inputs.rows()) throw ContractError("fitc: P must not exceed N");
    if (inducing.cols() != inputs.cols()) throw ContractError("fitc: covariate dimension mismatch");

    FitcFactors f;
    const Eigen::MatrixXd kpp = kernel_matrix(kspec, inducing, inducing);
    auto llt = cholesky_with_jitter(kpp, "fitc K_PP");
    f.lpp = llt.matrixL();

    const Eigen::MatrixXd kpn = kernel_matrix(kspec, inducing, inputs);
    f.v = f.lpp.triangularView<Eigen::Lower>().solve(kpn);
    f.q_diag = f.v.colwise().squaredNorm();
    f.prior_diag = Eigen::VectorXd::Constant(inputs.rows(), kspec.alpha * kspec.alpha);
    f.correction = (f.prior_diag - f.q_diag).cwiseMax(0.0);
    return f;
}

double lowrank_diag_loglik(const Eigen::MatrixXd& factor, const Eigen::VectorXd& diag,
                           const Eigen::VectorXd& residual) {
    const auto n = residual.size();
    if (factor.cols() != n || diag.size() != n) throw ContractError("lowrank loglik: shape mismatch");
    if (diag.minCoeff() <= 0.0) throw NumericError("lowrank loglik: non-positive diagonal");

    const Eigen::VectorXd inv_diag = diag.cwiseInverse();
    // W = F * diag^{-1/2}; A = I + W W^T
    const Eigen::MatrixXd w = factor * inv_diag.cwiseSqrt().asDiagonal();
    Eigen::MatrixXd a = w * w.transpose();
    a.diagonal().array() += 1.0;
    auto llt = cholesky_with_jitter(a, "lowrank loglik");

    const Eigen::VectorXd scaled = residual.cwiseProduct(inv_diag);
    const Eigen::VectorXd proj = factor * scaled;  // F D^{-1} r
    const Eigen::VectorXd solve = llt.matrixL().solve(proj);
    const double quad = residual.dot(scaled) - solve.squaredNorm();

    const double logdet =
        diag.array().log().sum() + 2.0 * llt.matrixLLT().diagonal().array().log().sum();

    return -0.5 * (static_cast<double>(n) * kLog2Pi + logdet + quad);
}

double gp_marginal_loglik_fitc(const KernelSpec& kspec, const Eigen::MatrixXd& inputs,
                               const Eigen::MatrixXd& inducing, const Eigen::VectorXd& residual,
                               double sigma) {
    const FitcFactors f = fitc_covariance(kspec, inputs, inducing);
    const Eigen::VectorXd lambda = f.correction.array() + sigma * sigma;
    return lowrank_diag_loglik(f.v, lambda, residual);
}

DenseGpFit::DenseGpFit(KernelSpec kspec, Eigen::MatrixXd train_inputs, const Eigen::VectorXd& train_residual,
                       double sigma)
    : kspec_(std::move(kspec)), train_inputs_(std::move(train_inputs)), sigma_(sigma) {
    kspec_.validate();
    const auto n = train_inputs_.rows();
    if (n != train_residual.size()) throw ContractError("gp fit: residual length mismatch");
    if (n > kDenseGuard) throw ContractError("gp fit: N exceeds the dense guard (5000)");
    Eigen::MatrixXd k = kernel_matrix(kspec_, train_inputs_, train_inputs_);
    k.diagonal().array() += sigma_ * sigma_;
    llt_ = cholesky_with_jitter(k, "gp dense fit");
    weights_ = llt_.solve(train_residual);
}

GpPrediction DenseGpFit::predict(const Eigen::MatrixXd& inputs, const Eigen::VectorXd& model_mean) const {
    if (inputs.rows() != model_mean.size()) throw ContractError("gp predict: model mean length mismatch");
    const Eigen::MatrixXd kmn = kernel_matrix(kspec_, inputs, train_inputs_);

    GpPrediction out;
    out.mean = model_mean + kmn * weights_;
    out.latent_variance.resize(inputs.rows());
    const double prior_var = kspec_.alpha * kspec_.alpha;
    for (Eigen::Index i = 0; i < inputs.rows(); ++i) {
        const Eigen::VectorXd solve = llt_.matrixL().solve(kmn.row(i).transpose());
        double var = prior_var - solve.squaredNorm();
        if (var < 0.0) {
            if (var < -1e-10) ++out.clamped_negative_variances;
            var = 0.0;
        }
        out.latent_variance(i) = var;
    }
    out.variance = out.latent_variance.array() + sigma_ * sigma_;
    return out;
}

double DenseGpFit::conditional_loglik(const Eigen::MatrixXd& inputs, const Eigen::VectorXd& residual) const {
    const auto m = inputs.rows();
    if (m != residual.size()) throw ContractError("gp conditional: residual length mismatch");
    if (m > kDenseGuard) throw ContractError("gp conditional: M exceeds the dense guard (5000)");
    const Eigen::MatrixXd kmn = kernel_matrix(kspec_, inputs, train_inputs_);
    const Eigen::MatrixXd kmm = kernel_matrix(kspec_, inputs, inputs);

    const Eigen::VectorXd mean_shift = kmn * weights_;
    Eigen::MatrixXd cov = kmm - kmn * llt_.solve(kmn.transpose());
    cov.diagonal().array() += sigma_ * sigma_;
    auto llt = cholesky_with_jitter(cov, "gp conditional");
    const Eigen::VectorXd centered = residual - mean_shift;
    const Eigen::VectorXd alpha = llt.solve(centered);
    const double logdet = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
    return -0.5 * (static_cast<double>(m) * kLog2Pi + logdet + centered.dot(alpha));
}

FitcGpFit::FitcGpFit(KernelSpec kspec, const Eigen::MatrixXd& train_inputs, Eigen::MatrixXd inducing,
                     const Eigen::VectorXd& train_residual, double sigma)
    : kspec_(std::move(kspec)), inducing_(std::move(inducing)), sigma_(sigma) {
    const FitcFactors f = fitc_covariance(kspec_, train_inputs, inducing_);
    lpp_ = f.lpp;
    const Eigen::VectorXd lambda = f.correction.array() + sigma * sigma;
    marginal_loglik_ = lowrank_diag_loglik(f.v, lambda, train_residual);

    const Eigen::VectorXd inv_lambda = lambda.cwiseInverse();
    const Eigen::MatrixXd w = f.v * inv_lambda.cwiseSqrt().asDiagonal();
    Eigen::MatrixXd a = w * w.transpose();
    a.diagonal().array() += 1.0;
    auto llt_a = cholesky_with_jitter(a, "fitc fit");
    la_ = llt_a.matrixL();

    // mean weights in whitened coordinates: A^{-1} (V Lambda^{-1} r); the
    // predictive mean is then u*^T times this with u* = Lpp^{-1} k_P*
    const Eigen::VectorXd proj = f.v * train_residual.cwiseProduct(inv_lambda);
    Eigen::VectorXd tmp = la_.triangularView<Eigen::Lower>().solve(proj);
    whitened_weights_ = la_.transpose().triangularView<Eigen::Upper>().solve(tmp);
}

GpPrediction FitcGpFit::predict(const Eigen::MatrixXd& inputs, const Eigen::VectorXd& model_mean) const {
    if (inputs.rows() != model_mean.size()) throw ContractError("fitc predict: model mean length mismatch");
    const Eigen::MatrixXd kpm = kernel_matrix(kspec_, inducing_, inputs);  // P x M

    const Eigen::MatrixXd u = lpp_.triangularView<Eigen::Lower>().solve(kpm);
    const Eigen::MatrixXd s = la_.triangularView<Eigen::Lower>().solve(u);

    GpPrediction out;
    out.mean = model_mean + u.transpose() * whitened_weights_;

    // var = k** - ||u||^2 + ||La^{-1} u||^2
    const double prior_var = kspec_.alpha * kspec_.alpha;
    out.latent_variance.resize(inputs.rows());
    for (Eigen::Index i = 0; i < inputs.rows(); ++i) {
        double var = prior_var - u.col(i).squaredNorm() + s.col(i).squaredNorm();
        if (var < 0.0) {
            if (var < -1e-10) ++out.clamped_negative_variances;
            var = 0.0;
        }
        out.latent_variance(i) = var;
    }
    out.variance = out.latent_variance.array() + sigma_ * sigma_;
    return out;
}

double FitcGpFit::conditional_loglik(const Eigen::MatrixXd& inputs, const Eigen::VectorXd& residual) const {
    // conditional covariance keeps the low-rank-plus-diagonal form:
    //   C = K_*P B^{-1} K_P* + diag(k** - Q**) + sigma^2 I
    // with K_*P B^{-1} K_P* = (La^{-1} u)^T (La^{-1} u)
    const auto m = inputs.rows();
    if (m != residual.size()) throw ContractError("fitc conditional: residual length mismatch");
    const Eigen::MatrixXd kpm = kernel_matrix(kspec_, inducing_, inputs);

    const Eigen::MatrixXd u = lpp_.triangularView<Eigen::Lower>().solve(kpm);
    const Eigen::VectorXd mean_shift = u.transpose() * whitened_weights_;
    const Eigen::MatrixXd factor = la_.triangularView<Eigen::Lower>().solve(u);

    const double prior_var = kspec_.alpha * kspec_.alpha;
    Eigen::VectorXd diag(m);
    for (Eigen::Index i = 0; i < m; ++i)
        diag(i) = std::max(0.0, prior_var - u.col(i).squaredNorm()) + sigma_ * sigma_;

    return lowrank_diag_loglik(factor, diag, residual - mean_shift);
}

}  // namespace ioncalib
