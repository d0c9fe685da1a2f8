#pragma once

#include <string>
#include <vector>

#include "tmqa/model.hpp"

namespace tmqa::textio {

// Line-oriented textual formats. Statements are "."-terminated, `#` starts a
// line comment, files are UTF-8.
//
//   .tgd   rules:     `E(x,y) -> exists z. E(y,z).`  plus `const a,b.` lines,
//          `true` for empty bodies and `@dom(x)` body items for active-domain
//          variables.
//   .fact  instances: `Human(abel).` over constants and printed Skolem terms.
//   .cq    queries:   `?(x,y) := R(x,u), R(y,v), G(u,v).`
//
// Argument identifiers whose first letter is s..z or an uppercase letter are
// variables; everything else is a constant. `const` declarations force
// constant-hood regardless of spelling. Relation symbols are whatever stands
// before a parenthesis.

RuleSet parse_rules(const std::string& text);
Instance parse_instance(const std::string& text);
ConjunctiveQuery parse_query(const std::string& text);
/// All query statements of a file (used for UCQ files).
std::vector<ConjunctiveQuery> parse_queries(const std::string& text);

/// Printed form of a term; injective and stable across runs. Skolem terms
/// print as sk[<canonical>/<position>](args...).
std::string print_term(const Term& t);
std::string print_atom(const Atom& a);

std::string print_instance(const Instance& inst);
std::string print_rules(const RuleSet& rules);
std::string print_query(const ConjunctiveQuery& q);
std::string print_ucq(const std::vector<ConjunctiveQuery>& queries, bool complete);

}  // namespace tmqa::textio
