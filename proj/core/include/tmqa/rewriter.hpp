#pragma once

#include <set>
#include <string>
#include <vector>

#include "tmqa/model.hpp"

namespace tmqa {

struct RewriteSet {
  std::vector<ConjunctiveQuery> queries;  // canonical forms, minimized, sorted by key
  bool complete = false;                  // fixpoint reached within fuel
  std::size_t fuel_used = 0;              // closure rounds performed
  std::size_t rs_value = 0;               // max atom count over queries

  bool member(const ConjunctiveQuery& q) const;
};

/// Multi-head rules split through a fresh auxiliary predicate (one existential
/// rule producing the aux atom plus Datalog projections). Queries mentioning
/// aux relations are never part of a final rewriting.
struct SplitTheory {
  RuleSet rules;
  std::set<std::string> aux_relations;
};

SplitTheory split_heads(const RuleSet& theory);

struct RewriteOptions {
  std::size_t fuel = 8;            // closure rounds
  std::size_t max_queries = 20000; // guard on the explored set
};

/// Piece rewriting of q through a single-head rule: every subset of q's atoms
/// unifiable with the head (existential positions binding only non-free
/// variables local to the subset) is replaced by the rule body with fresh
/// non-frontier variables. Results are canonicalized.
std::vector<ConjunctiveQuery> one_step_rewrites(const ConjunctiveQuery& q, const Rule& rule,
                                                const std::map<std::string, std::size_t>& signature);

/// Fuel-bounded closure of {q} under one-step rewriting across all rules,
/// interleaved with containment minimization.
RewriteSet rewrite(const RuleSet& theory, const ConjunctiveQuery& q,
                   const RewriteOptions& opts = {});

/// Both complete and equal up to isomorphism (mutual containment pairing).
bool unique_up_to_iso(const RewriteSet& a, const RewriteSet& b);

}  // namespace tmqa
