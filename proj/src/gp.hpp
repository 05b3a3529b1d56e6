#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

namespace ioncalib {

enum class KernelFamily { RBF, OU, Matern32 };

KernelFamily kernel_family_from_name(const std::string& name);
std::string kernel_family_name(KernelFamily family);

// alpha: marginal std (pA); rho: one length-scale per covariate, applied on
// the standardized covariate scale
struct KernelSpec {
    KernelFamily family = KernelFamily::RBF;
    double alpha = 1.0;
    std::vector<double> rho;

    void validate() const;
    int dims() const { return static_cast<int>(rho.size()); }
};

double kernel_eval(const KernelSpec& kspec, const Eigen::VectorXd& v, const Eigen::VectorXd& w);

// per-column shift/scale fitted on the training covariates; constant columns
// keep scale 1 so standardization never divides by zero
struct Standardizer {
    Eigen::VectorXd mean;
    Eigen::VectorXd scale;

    static Standardizer fit(const Eigen::MatrixXd& covariates);
    Eigen::MatrixXd apply(const Eigen::MatrixXd& covariates) const;
};

// uniform grid over [lo, hi] per covariate; for q = 2 the per-axis counts
// multiply (e.g. 16 x 16)
Eigen::MatrixXd inducing_grid(const Eigen::MatrixXd& covariates, const std::vector<int>& per_axis_counts);

// N x N covariance via kernel_eval on all pairs (small-N paths and oracles)
Eigen::MatrixXd kernel_matrix(const KernelSpec& kspec, const Eigen::MatrixXd& a, const Eigen::MatrixXd& b);

// Cholesky with a relative jitter ladder 1e-10 -> 1e-8 -> 1e-6; throws
// NumericError if the last rung still fails
Eigen::LLT<Eigen::MatrixXd> cholesky_with_jitter(const Eigen::MatrixXd& m, const std::string& what);

// log N(y; mean, K_NN + sigma^2 I); guard N <= 5000
double gp_marginal_loglik_dense(const KernelSpec& kspec, const Eigen::MatrixXd& inputs,
                                const Eigen::VectorXd& residual, double sigma);

// Low-rank-plus-diagonal representation of Sigma-hat = Q + diag(K_NN - Q),
// Q = K_NP K_PP^{-1} K_PN; never materializes N x N.
struct FitcFactors {
    Eigen::MatrixXd lpp;          // chol(K_PP + jitter), lower
    Eigen::MatrixXd v;            // Lpp^{-1} K_PN, P x N; Q = V^T V
    Eigen::VectorXd q_diag;       // diag of Q
    Eigen::VectorXd prior_diag;   // diag of K_NN (= alpha^2)
    Eigen::VectorXd correction;   // prior_diag - q_diag, clamped at 0
};

FitcFactors fitc_covariance(const KernelSpec& kspec, const Eigen::MatrixXd& inputs,
                            const Eigen::MatrixXd& inducing);

// log N(y; mean, Sigma-hat + sigma^2 I) in O(N P^2) time, O(N P) memory
double gp_marginal_loglik_fitc(const KernelSpec& kspec, const Eigen::MatrixXd& inputs,
                               const Eigen::MatrixXd& inducing, const Eigen::VectorXd& residual, double sigma);

// Conditioned GP ready for prediction. Latent variance excludes sigma^2; the
// observation-level variance adds it back.
struct GpPrediction {
    Eigen::VectorXd mean;             // model mean + discrepancy mean, pA
    Eigen::VectorXd latent_variance;  // pA^2
    Eigen::VectorXd variance;         // latent + sigma^2
    int clamped_negative_variances = 0;
};

class DenseGpFit {
  public:
    DenseGpFit(KernelSpec kspec, Eigen::MatrixXd train_inputs, const Eigen::VectorXd& train_residual,
               double sigma);

    GpPrediction predict(const Eigen::MatrixXd& inputs, const Eigen::VectorXd& model_mean) const;

    // joint conditional density of observations at `inputs` (guard M <= 5000)
    double conditional_loglik(const Eigen::MatrixXd& inputs, const Eigen::VectorXd& residual) const;

    double sigma() const { return sigma_; }

  private:
    KernelSpec kspec_;
    Eigen::MatrixXd train_inputs_;
    Eigen::LLT<Eigen::MatrixXd> llt_;
    Eigen::VectorXd weights_;  // (K + sigma^2 I)^{-1} r
    double sigma_;
};

// Everything needed to reuse a conditioned FITC GP without its training set;
// serialized as JSON metadata plus a binary matrix blob.
struct GpSnapshot {
    KernelSpec kernel;
    double sigma = 0.0;
    Standardizer standardizer;
    Eigen::MatrixXd inducing;
    Eigen::MatrixXd lpp;
    Eigen::MatrixXd la;
    Eigen::VectorXd whitened_weights;
    double marginal_loglik = 0.0;
};

void save_gp_snapshot(const GpSnapshot& snapshot, const std::string& json_path);
GpSnapshot load_gp_snapshot(const std::string& json_path);

class FitcGpFit {
  public:
    FitcGpFit(KernelSpec kspec, const Eigen::MatrixXd& train_inputs, Eigen::MatrixXd inducing,
              const Eigen::VectorXd& train_residual, double sigma);

    static FitcGpFit from_snapshot(const GpSnapshot& snapshot);
    GpSnapshot snapshot(const Standardizer& standardizer) const;

    GpPrediction predict(const Eigen::MatrixXd& inputs, const Eigen::VectorXd& model_mean) const;

    // joint conditional density under the FITC structure, O(M P^2)
    double conditional_loglik(const Eigen::MatrixXd& inputs, const Eigen::VectorXd& residual) const;

    double marginal_loglik() const { return marginal_loglik_; }
    double sigma() const { return sigma_; }
    const Eigen::MatrixXd& inducing() const { return inducing_; }
    const KernelSpec& kernel() const { return kspec_; }

  private:
    FitcGpFit() = default;

    // All prediction algebra runs through u = Lpp^{-1} k_P* and the
    // well-conditioned A = I + W W^T (W = V Lambda^{-1/2}), never through
    // B = K_PP + K_PN Lambda^{-1} K_NP directly, which squares the K_PP
    // condition number.
    KernelSpec kspec_;
    Eigen::MatrixXd inducing_;          // P x q
    Eigen::MatrixXd lpp_;               // chol(K_PP + jitter), lower
    Eigen::MatrixXd la_;                // chol(A), lower
    Eigen::VectorXd whitened_weights_;  // A^{-1} V Lambda^{-1} r
    double sigma_ = 0.0;
    double marginal_loglik_ = 0.0;
};

// log N(y; mean, F^T F + diag) without forming the dense covariance
double lowrank_diag_loglik(const Eigen::MatrixXd& factor, const Eigen::VectorXd& diag,
                           const Eigen::VectorXd& residual);

}  // namespace ioncalib
