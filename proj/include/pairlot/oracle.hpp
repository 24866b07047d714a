#pragma once

#include "pairlot/dataset.hpp"
#include "pairlot/dgp.hpp"
#include "pairlot/nuisance.hpp"

namespace pairlot {

// True nuisance functions evaluated at each subject's covariates, with the
// unmeasured latent integrated out by Gauss-Hermite quadrature. Supported for
// the example model (any coefficients) and setting 3; the propensity slot is
// the sample proportion, as in the fitted pipeline.
NuisanceFit oracle_nuisance(const DgpConfig& config, const TrialDataset& data);

}  // namespace pairlot
