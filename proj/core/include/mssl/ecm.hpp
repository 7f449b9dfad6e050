#pragma once

#include "mssl/b_step.hpp"
#include "mssl/omega_step.hpp"
#include "mssl/types.hpp"

namespace mssl {

struct EcmResult {
  EcmState state;
  EcmTrace trace;
  FitStatus status = FitStatus::converged;
  std::string message;
};

// Full expectation/conditional-maximization loop at fixed spike penalties:
// E-step over the edge indicators, (B, theta) update, (Omega, eta) update,
// until the percentage change in every beta and omega falls below opts.tol
// or the percentage increase of the objective does. Changes of parameters
// at zero are measured against scale 1. Numerical instability in the Omega
// update ends the fit with status unstable and the trace so far.
EcmResult ecm_fit(const DataSet& data, EcmState init, const PenaltyConfig& cfg, double lambda0,
                  double xi0, const FitOptions& opts);

}  // namespace mssl
