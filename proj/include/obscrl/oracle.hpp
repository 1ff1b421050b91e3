#pragma once

#include <Eigen/Dense>

#include "obscrl/jacobian_batch.hpp"
#include "obscrl/scm.hpp"
#include "obscrl/synth.hpp"

namespace obscrl {

// Exact score and score-Jacobian of an additive Gaussian noise model.
//
// With residuals r_i = z_i - f_i(z_pa(i)) the log density is
//   log p(z) = sum_i [ -r_i^2 / (2 sigma_i^2) - log(2 pi sigma_i^2) / 2 ],
// so the score is s_k = -r_k / sigma_k^2 + sum_{i in ch(k)} d_k f_i * r_i / sigma_i^2
// and the Jacobian is
//   J = sum_i (1 / sigma_i^2) [ -(e_i - grad f_i)(e_i - grad f_i)^T + r_i hess f_i ],
// with grad f_i and hess f_i embedded at the parent coordinates of node i.

double log_density(const Scm& scm, const Eigen::VectorXd& z);
Eigen::VectorXd score_latent(const Scm& scm, const Eigen::VectorXd& z);
Eigen::MatrixXd jacobian_latent(const Scm& scm, const Eigen::VectorXd& z);

// One Jacobian per row of Z (N x n); centered, tagged latent.
JacobianBatch latent_jacobians(const Scm& scm, const Eigen::MatrixXd& Z);

// J_X = (H^+)^T J_Z H^+ per sample; tagged observed.
JacobianBatch latent_to_observed(const JacobianBatch& latent, const MixingMatrix& h);

// s_X = (H^+)^T s_Z
Eigen::VectorXd score_to_observed(const Eigen::VectorXd& latent_score, const MixingMatrix& h);

// Model of Z' = scale .* Z + offset: f'_i(y) = scale_i f_i((y - offset_pa) ./ scale_pa) + offset_i
// and sigma'_i^2 = scale_i^2 sigma_i^2.
Scm affine_reparameterize(const Scm& scm, const ScaleInfo& info);

}  // namespace obscrl
