#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <vector>

#include "tmqa/model.hpp"

namespace tmqa {

struct ChaseOptions {
  std::size_t max_atoms = 500000;  // atom cap guarding non-terminating theories
};

/// How an atom first entered the chase: least (rule index, substitution) among
/// the applications producing it at its birth stage.
struct Creation {
  std::size_t rule_index = 0;
  Subst sigma;
  std::size_t stage = 0;  // stage at which the atom first appears (>= 1)
};

struct ChaseRun {
  RuleSet theory;
  Instance start;
  std::vector<Instance> stages;  // stages[i] = Ch_i
  bool saturated = false;
  std::map<Atom, Creation> provenance;  // created atoms only

  const Instance& last() const { return stages.back(); }
  std::size_t depth() const { return stages.size() - 1; }
  /// Stage clamped to the computed range (stages are constant once saturated).
  const Instance& stage(std::size_t i) const { return stages[i < stages.size() ? i : stages.size() - 1]; }
};

struct BirthRecord {
  Term term;
  Atom birth_atom;
  std::set<Term> frontier_terms;
  /// Set when several atoms carry the term outside the frontier (multi-head
  /// detached rules); birth_atom is then the canonically least candidate.
  bool ambiguous = false;
};

/// All homomorphisms from the rule body into inst, extended over active-domain
/// variables; canonically ordered.
std::vector<Subst> hom_matches(const Rule& rule, const Instance& inst);

/// appl(rule, sigma): sigma applied to the skolemized head. sigma must cover
/// the body and active-domain variables.
std::vector<Atom> apply(const Rule& rule, const Subst& sigma);

/// One parallel chase stage.
Instance chase_step(const RuleSet& theory, const Instance& inst);

ChaseRun chase_to(const RuleSet& theory, const Instance& start, std::size_t depth,
                  const ChaseOptions& opts = {});

/// Minimal d <= depth such that stage d satisfies q with free_vars bound to
/// args; nullopt when not found within depth (semi-decision).
std::optional<std::size_t> entails(const RuleSet& theory, const Instance& inst,
                                   const ConjunctiveQuery& q, const std::vector<Term>& args,
                                   std::size_t depth, const ChaseOptions& opts = {});

/// Same check against a precomputed run.
std::optional<std::size_t> entails(const ChaseRun& run, const ConjunctiveQuery& q,
                                    const std::vector<Term>& args, std::size_t depth);

BirthRecord birth_atom(const ChaseRun& run, const Term& t);

/// Literal equality of chases from D and from an
/// intermediate F coincide atom-for-atom at compatible depths.
bool subchase_equal(const RuleSet& theory, const Instance& D, const Instance& F,
                    std::size_t depth, const ChaseOptions& opts = {});

}  // namespace tmqa
