#pragma once

#include <json.hpp>

#include "gti/exact.hpp"
#include "gti/sampling.hpp"

namespace gti {

/// JSON record shapes are part of the tool's output contract; field names are
/// frozen.
nlohmann::json to_json(const InteractionEstimate& est);
nlohmann::json to_json(const AttributionEstimate& est);
nlohmann::json to_json(const AttributionVector& att);
nlohmann::json to_json(const InstabilityReport& report);

}  // namespace gti
