#pragma once

#include "calib/hpv_model.h"
#include "calib/sampler.h"
#include "calib/sis_model.h"

#include <memory>
#include <string>
#include <vector>

namespace calib
{

/// Parameters (c, p, d) on c >= 0, 0 <= p <= 1, d >= 0, with derived beta = c p and gamma = 1 / d.
Model make_sis_model(const sis::SisSimConfig& config = {});

/// One parameter per multiplier (>= 0); outputs are the 31 cohort summaries.
Model make_hpv_model(std::shared_ptr<const hpv::HpvModelConfig> config);

/// Derived quantities known for a registered model id ("sis"): used when diagnosing stored chains
/// whose parameter names match the model. Empty otherwise.
std::vector<DerivedQuantity> derived_quantities_for(const std::string& model_id,
                                                    const std::vector<std::string>& parameter_names);

} // namespace calib
