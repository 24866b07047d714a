#pragma once

#include <cstdint>

#include "pairlot/dataset.hpp"
#include "pairlot/estimators.hpp"

namespace pairlot {

// Hayden-type survivor average causal effect: survivors weighted by the
// fitted probability of surviving under the opposite arm given (L, Y(0)).
// Bootstrap SE over whole subjects.
EstimateResult sace(const TrialDataset& data, int t, double alpha = 0.05, int bootstrap_b = 500,
                    std::uint64_t seed = 77);

// Inverse probability of censoring weighting for the no-ICE hypothetical
// contrast: per-arm pooled discrete-time hazard with main effects
// (visit, lagged outcome, baseline outcome, L); survivor-only outcome model
// weighted by inverse survival probability (floored at 0.02); returns the
// treatment coefficient with a sandwich SE that ignores weight estimation.
EstimateResult ipcw(const TrialDataset& data, int t, double alpha = 0.05);

// Welch contrast of each subject's last observed outcome.
EstimateResult locf(const TrialDataset& data, double alpha = 0.05);

// Welch contrast of Y(tau) among end-of-study survivors.
EstimateResult survivors_only(const TrialDataset& data, double alpha = 0.05);

}  // namespace pairlot
