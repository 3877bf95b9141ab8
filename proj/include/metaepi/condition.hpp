#pragma once

#include <string>
#include <string_view>

namespace metaepi {

enum class Relation { Less, LessEqual, Greater, GreaterEqual, Equal };

std::string_view to_string(Relation r);

/// One evaluated inequality. `holds` is always reproducible from (lhs, relation, rhs, tolerance);
/// the tolerance only widens Equal.
struct Condition {
    std::string name;
    double lhs = 0;
    Relation relation = Relation::Less;
    double rhs = 0;
    double tolerance = 0;
    bool holds = false;
};

bool evaluate(double lhs, Relation relation, double rhs, double tolerance = 0);

Condition make_condition(std::string name, double lhs, Relation relation, double rhs, double tolerance = 0);

} // namespace metaepi
