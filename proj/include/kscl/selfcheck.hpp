#pragma once

#include <string>
#include <vector>

namespace kscl {

enum class FaultInjection {
    None,
    FlipProjectionSign, // test hook: negates one coordinate of every projection
};

struct SuiteResult {
    std::string name;
    bool passed = false;
    std::string message; // names the violated invariant on failure
    double seconds = 0.0;
};

// Runs the invariant suites (eigensolver residuals, subspace geometry,
// one-shot reduction, gradient checks, oracle equivalences) on seeded random
// inputs. The fault hook corrupts the projection values the geometry checks
// see, to demonstrate that violations are caught and named.
std::vector<SuiteResult> run_selfcheck(FaultInjection fault = FaultInjection::None);

} // namespace kscl
