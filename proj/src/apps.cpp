#include "simdiag/apps.hpp"

#include <stdexcept>

#include "simdiag/optim.hpp"

namespace simdiag {

namespace {

// The partial machinery tests shared *left* eigenvectors of its inputs.
// VAR decoupling needs shared right eigenvectors of the coefficient
// matrices, so the lag-1 estimates enter transposed: vec(A') = K vec(A)
// carries the covariance along.
MatrixEstimate transpose_estimate(const MatrixEstimate& est) {
  const int d = est.dim();
  const Mat k = commutation_matrix(d);
  MatrixEstimate out;
  out.a = est.a.transpose();
  out.sigma_hat = k * est.sigma_hat * k.transpose();
  out.sigma_hat = 0.5 * (out.sigma_hat + out.sigma_hat.transpose()).eval();
  out.c_n = est.c_n;
  out.n = est.n;
  return out;
}

Mat householder_from_direction(const Vec& unit) {
  const Eigen::Index d = unit.size();
  Mat h = Mat::Identity(d, d);
  Vec v = unit;
  v(0) -= 1.0;
  const double vv = v.squaredNorm();
  if (vv < 1e-24) return h;
  h -= (2.0 / vv) * v * v.transpose();
  return h;
}

}  // namespace

VarAnalysis var_pipeline(const std::vector<Mat>& series_list, int order,
                         double epsilon, double alpha) {
  if (series_list.size() < 2) {
    throw std::invalid_argument("var_pipeline: at least 2 subjects required");
  }
  const int d = static_cast<int>(series_list.front().cols());
  for (const Mat& s : series_list) {
    if (static_cast<int>(s.cols()) != d) {
      throw std::invalid_argument("var_pipeline: subjects must share one dimension");
    }
  }

  VarAnalysis analysis;
  analysis.alpha = alpha;
  EstimateBundle bundle;
  EstimateBundle bundle_t;  // transposed, for the partial tests
  std::vector<Mat> phis;
  for (const Mat& series : series_list) {
    analysis.fits.push_back(var_ls_estimator(series, order, true));
    const MatrixEstimate& lag1 = analysis.fits.back().lag_estimates.front();
    bundle.estimates.push_back(lag1);
    bundle_t.estimates.push_back(transpose_estimate(lag1));
    phis.push_back(lag1.a);
  }

  analysis.pairwise_pvalues = pairwise_pvalue_matrix(bundle, epsilon);

  OptimOptions opts;
  const JointDiagResult jd = joint_diagonalize(phis, opts);
  analysis.multi_gamma = multi_eig_gamma_test(bundle, jd.v_hat);
  analysis.v_hat = jd.v_hat.inverse();

  std::vector<Mat> phis_t;
  for (const Mat& phi : phis) phis_t.push_back(phi.transpose());
  for (int k = 1; k < d; ++k) {
    const PartialPairResult pp = partial_pair(phis_t, k, opts);
    PartialReportPair pair;
    pair.k = k;
    pair.chi2 = partial_test(bundle_t, pp.q_hat, k, pp.v_tilde, epsilon,
                             PartialVariant::ChiSquared);
    pair.gamma = partial_test(bundle_t, pp.q_hat, k, pp.v_tilde, epsilon,
                              PartialVariant::Gamma);
    analysis.partial.push_back(std::move(pair));
  }

  if (analysis.multi_gamma.p_value >= alpha) {
    analysis.decoupled_emitted = true;
    for (const Mat& series : series_list) {
      analysis.decoupled.push_back(series * analysis.v_hat.transpose());
    }
  }
  return analysis;
}

MarkovAnalysis markov_pipeline(const std::vector<std::vector<int>>& chains, int d,
                               double epsilon) {
  if (chains.size() < 2) {
    throw std::invalid_argument("markov_pipeline: at least 2 chains required");
  }

  MarkovAnalysis analysis;
  EstimateBundle bundle;
  std::vector<Mat> p_hats;
  for (const auto& chain : chains) {
    analysis.fits.push_back(markov_transition_estimator(chain, d));
    bundle.estimates.push_back(analysis.fits.back().estimate);
    p_hats.push_back(analysis.fits.back().p_hat);
  }

  const SimplexQpResult qp = simplex_qp_stationary(p_hats);
  analysis.pi_common = qp.x;
  analysis.qp_objective = qp.objective;
  analysis.qp_converged = qp.converged;

  // Stationary distributions are left eigenvectors of the transition
  // matrix (pi' P = pi'), so the estimates feed the partial machinery
  // untransposed, with the tested direction pi_common.
  const Vec direction = qp.x.normalized();
  const Mat q_hat = householder_from_direction(direction);
  const Mat v_tilde = Mat::Identity(1, 1);
  analysis.partial_chi2 =
      partial_test(bundle, q_hat, 1, v_tilde, epsilon, PartialVariant::ChiSquared);
  analysis.partial_gamma =
      partial_test(bundle, q_hat, 1, v_tilde, epsilon, PartialVariant::Gamma);
  return analysis;
}

}  // namespace simdiag
