#pragma once

#include <json.hpp>

#include "noxpred/divergence.hpp"
#include "noxpred/mining.hpp"
#include "noxpred/obd.hpp"
#include "noxpred/physics.hpp"
#include "noxpred/pstva.hpp"
#include "noxpred/regression.hpp"
#include "noxpred/synth.hpp"

// JSON bindings (nlohmann, ADL). Keys are emitted in sorted order, so a
// given value always serializes to the same bytes.

namespace noxpred::obd {
void to_json(nlohmann::json& j, const IngestReport& r);
void from_json(const nlohmann::json& j, IngestReport& r);
void to_json(nlohmann::json& j, const SplitSpec& s);
void from_json(const nlohmann::json& j, SplitSpec& s);
}  // namespace noxpred::obd

namespace noxpred::physics {
void to_json(nlohmann::json& j, const PhysicsConstants& c);
void from_json(const nlohmann::json& j, PhysicsConstants& c);
void to_json(nlohmann::json& j, const LopParams& p);
void from_json(const nlohmann::json& j, LopParams& p);
}  // namespace noxpred::physics

namespace noxpred::regression {
void to_json(nlohmann::json& j, const PowerLawParams& p);
void from_json(const nlohmann::json& j, PowerLawParams& p);
void to_json(nlohmann::json& j, const LmOptions& o);
void from_json(const nlohmann::json& j, LmOptions& o);
void to_json(nlohmann::json& j, const FitReport& r);
void from_json(const nlohmann::json& j, FitReport& r);
void to_json(nlohmann::json& j, const Metrics& m);  // r2 sentinel -> null
void from_json(const nlohmann::json& j, Metrics& m);
void to_json(nlohmann::json& j, const DeltaCandidate& c);
void from_json(const nlohmann::json& j, DeltaCandidate& c);
void to_json(nlohmann::json& j, const DeltaSelection& s);
void from_json(const nlohmann::json& j, DeltaSelection& s);
}  // namespace noxpred::regression

namespace noxpred::divergence {
void to_json(nlohmann::json& j, const DivergenceConfig& c);
void from_json(const nlohmann::json& j, DivergenceConfig& c);
}  // namespace noxpred::divergence

namespace noxpred::mining {
void to_json(nlohmann::json& j, const MinerConfig& c);
void from_json(const nlohmann::json& j, MinerConfig& c);
void to_json(nlohmann::json& j, const AttributeBins& b);
void from_json(const nlohmann::json& j, AttributeBins& b);
void to_json(nlohmann::json& j, const Discretizer& d);
void from_json(const nlohmann::json& j, Discretizer& d);
void to_json(nlohmann::json& j, const CoOccurrencePattern& p);
void from_json(const nlohmann::json& j, CoOccurrencePattern& p);
}  // namespace noxpred::mining

namespace noxpred::synth {
void to_json(nlohmann::json& j, const RegimeSpec& r);
void from_json(const nlohmann::json& j, RegimeSpec& r);
void to_json(nlohmann::json& j, const SynthConfig& c);
void from_json(const nlohmann::json& j, SynthConfig& c);
}  // namespace noxpred::synth

namespace noxpred::pstva {
void to_json(nlohmann::json& j, const PartitionedModel& m);
void from_json(const nlohmann::json& j, PartitionedModel& m);
}  // namespace noxpred::pstva
