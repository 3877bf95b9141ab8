#include "metaepi/condition.hpp"

#include <cmath>

namespace metaepi {

std::string_view to_string(Relation r)
{
    switch (r) {
    case Relation::Less:
        return "<";
    case Relation::LessEqual:
        return "<=";
    case Relation::Greater:
        return ">";
    case Relation::GreaterEqual:
        return ">=";
    case Relation::Equal:
        return "==";
    }
    return "?";
}

bool evaluate(double lhs, Relation relation, double rhs, double tolerance)
{
    switch (relation) {
    case Relation::Less:
        return lhs < rhs;
    case Relation::LessEqual:
        return lhs <= rhs;
    case Relation::Greater:
        return lhs > rhs;
    case Relation::GreaterEqual:
        return lhs >= rhs;
    case Relation::Equal:
        return std::abs(lhs - rhs) <= tolerance;
    }
    return false;
}

Condition make_condition(std::string name, double lhs, Relation relation, double rhs, double tolerance)
{
    return {std::move(name), lhs, relation, rhs, tolerance, evaluate(lhs, relation, rhs, tolerance)};
}

} // namespace metaepi
