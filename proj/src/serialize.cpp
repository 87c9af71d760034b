#include "gti/serialize.hpp"

namespace gti {

using nlohmann::json;

json to_json(const InteractionEstimate& est) {
    return json{{"pair", {est.i, est.j}},
                {"estimate", est.value},
                {"stderr", est.std_err},
                {"m", est.m},
                {"seed", est.seed},
                {"exact", est.exact},
                {"weighting",
                 est.weighting == InteractionWeighting::shapley ? "shapley" : "banzhaf"},
                {"normalized", est.normalized}};
}

json to_json(const AttributionEstimate& est) {
    return json{{"player", est.player},
                {"estimate", est.value},
                {"stderr", est.std_err},
                {"m", est.m},
                {"seed", est.seed}};
}

json to_json(const AttributionVector& att) {
    return json{{"kind", att.kind == AttributionKind::shapley ? "shapley" : "banzhaf"},
                {"game", att.game_id},
                {"values", att.values}};
}

json to_json(const InstabilityReport& report) {
    return json{{"per_image", report.per_image},
                {"mean", report.mean},
                {"sample_count", report.sample_count}};
}

}  // namespace gti
