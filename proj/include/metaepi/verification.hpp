#pragma once

#include "metaepi/model.hpp"

#include <random>
#include <string>
#include <vector>

namespace metaepi {

struct CriterionResult {
    int id = 0;
    std::string name;
    bool passed = false;
    std::string detail;
    std::string tolerance;
};

/// Positive entries log-uniform on [0.1, 10]; entries pinned by the variant are zero.
ParameterSet random_parameters(std::mt19937_64& rng, Variant variant);
State random_state(std::mt19937_64& rng, double lo = 0.1, double hi = 10.0);

/// Named fixtures used by the acceptance suite, the tests and the README examples.
ParameterSet symmetric_fixture();       ///< all-ones rates, delta = 0.5, B = 10
ParameterSet z1_fixture();
ParameterSet z2_fixture();
ParameterSet unidirectional_fixture();  ///< symmetric_fixture with m12 = n12 = 0

CriterionResult check_origin_instability();
CriterionResult check_origin_factorization();
CriterionResult check_general_endemic_convergence();
CriterionResult check_z1_fixture();
CriterionResult check_z2_fixture();
CriterionResult check_no_migrate_coexistence();
CriterionResult check_e2_never_stable();
CriterionResult check_e1_threshold();
CriterionResult check_origin_hopf_exclusion();
CriterionResult check_jacobian();
CriterionResult check_invariants();
CriterionResult check_hopf_detector();

std::vector<CriterionResult> run_acceptance();

/// "AC<id> PASS|FAIL <name> (tol: ...) - detail"
std::string format_result(const CriterionResult& r);

} // namespace metaepi
