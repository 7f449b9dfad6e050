#pragma once

#include "mssl/spike_slab.hpp"
#include "mssl/types.hpp"

namespace mssl {

// Entrywise penalties for the precision matrix: off-diagonals carry the
// adaptive xi_star values in [xi1, xi0], the diagonal carries xi1 exactly.
struct PenaltyMatrix {
  MatrixXd values;  // q x q symmetric

  static PenaltyMatrix from_qstar(const MatrixXd& qstar, const OmegaMixture& mix);
};

struct EStepQ {
  MatrixXd qstar;          // symmetric, diagonal fixed at 1
  PenaltyMatrix penalties;
};

// Slab responsibilities of the current Omega, mirrored from the strict
// upper triangle, plus the penalty matrix they induce.
EStepQ e_step_q(const MatrixXd& Omega, double eta, const OmegaMixture& mix);

// Closed-form update of the slab fraction eta, clamped to the interior.
// Throws when a_eta + b_eta - 2 + q(q-1)/2 <= 0.
double update_eta(const MatrixXd& qstar, double a_eta, double b_eta, Index q);

// Thrown when positive definiteness cannot be restored; carries the last
// positive definite iterate for diagnostics.
struct glasso_instability : numeric_error {
  MatrixXd last_pd;
  explicit glasso_instability(std::string msg, MatrixXd last)
      : numeric_error(std::move(msg)), last_pd(std::move(last)) {}
};

struct GlassoResult {
  MatrixXd Omega;
  bool converged = false;
  int iterations = 0;
  std::vector<double> objective_trace;  // maximized objective, one entry per pass
};

// Weighted graphical lasso:
//   maximize (n/2) log|Omega| - (n/2) tr(S Omega)
//            - sum_{k != k'} P_kk' |omega_kk'| - P_kk sum_k omega_kk
// by block coordinate descent over columns; every column update is a lasso
// problem on the Schur complement, which keeps the iterates positive
// definite by construction. The solution satisfies the stationarity
// certificate on G = (n/2)(inv(Omega) - S): G_kk = P_kk on the diagonal,
// G_kk' = P_kk' sign(omega_kk') on the active off-diagonals, |G_kk'| <= P_kk'
// on the zero ones.
GlassoResult glasso_weighted(const MatrixXd& S, const PenaltyMatrix& penalties, Index n,
                             const MatrixXd& Omega_init, const FitOptions& opts);

struct CmStepOmegaResult {
  bool converged = false;
  int glasso_iterations = 0;
};

// E-step over the edge indicators (using the incoming Omega, eta), the
// closed-form eta update, then the weighted graphical lasso on the current
// residual covariance.
CmStepOmegaResult cm_step_Omega(const DataSet& data, EcmState& state, const PenaltyConfig& cfg,
                                double xi0, const FitOptions& opts);

}  // namespace mssl
