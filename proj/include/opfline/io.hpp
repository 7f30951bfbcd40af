#pragma once

#include "opfline/gufp.hpp"
#include "opfline/instance.hpp"
#include "opfline/sweep.hpp"

#include <json.hpp>

#include <cstdint>
#include <string>

namespace opfline {

using Json = nlohmann::json;

/// Schema or semantic defect in an instance document; the message names the
/// offending path.
struct ParseError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

RadialInstance parse_instance(const Json& doc);
Json emit_instance(const RadialInstance& inst);
RadialInstance load_instance(const std::string& path);
void save_json(const Json& doc, const std::string& path);

GufpInstance parse_gufp(const Json& doc);
Json emit_gufp(const GufpInstance& g);
GufpInstance load_gufp(const std::string& path);

Json emit_state(const PowerFlowState& st);
Json emit_report(const FeasibilityReport& rep);

/// Deterministic line-network generator honoring the model assumptions:
/// positive resistances, first-quadrant impedances, demand phase spread
/// within 36 degrees (power factor >= 0.8), voltage window around v0 = 1,
/// and capacities feasible at the all-off assignment. Profiles: "default",
/// "tight" (scarcer capacity), "lossy" (larger impedances).
RadialInstance generate_instance(std::uint64_t seed, int m, int n_inelastic, int n_elastic,
                                 const std::string& profile = "default");

/// Deterministic random separable 3-GUFP instance for desk-scale testing.
GufpInstance generate_gufp(std::uint64_t seed, int users, int edges);

} // namespace opfline
