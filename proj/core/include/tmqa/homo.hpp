#pragma once

#include <functional>
#include <map>
#include <optional>
#include <vector>

#include "tmqa/model.hpp"

namespace tmqa {

/// Homomorphism between finite structures: a total map on the source active
/// domain sending every source atom to a target atom.
struct Hom {
  std::map<Term, Term> mapping;
  std::set<Term> fixed;

  Term operator()(const Term& t) const;
  Atom operator()(const Atom& a) const;
};

struct CoreResult {
  Instance core;
  Hom retraction;
  std::size_t c_value = 0;     // least n with core ⊆ Ch_n
  std::size_t found_at = 0;    // stage the retraction maps into
  std::size_t slack = 0;       // extra stages the retraction was searched from
};

// ---------------------------------------------------------------------------
// Pattern matching into instances (variables bind, other terms are rigid).

class AtomIndex {
 public:
  explicit AtomIndex(const std::vector<Atom>& atoms);
  explicit AtomIndex(const Instance& inst);
  const std::vector<Atom>& candidates(const std::string& relation) const;
  const std::vector<Atom>& all() const { return atoms_; }

 private:
  std::vector<Atom> atoms_;
  std::map<std::string, std::vector<Atom>> by_relation_;
};

/// Per-variable admissibility constraint for bindings.
using VarFilter = std::function<bool(const std::string& var, const Term& value)>;

/// First substitution extending seed that maps every pattern atom into the
/// target; variables bind, constants and Skolem terms must match exactly.
std::optional<Subst> match_first(const std::vector<Atom>& pattern, const Subst& seed,
                                 const AtomIndex& target, const VarFilter& filter = {});

/// All such substitutions, canonically ordered.
std::vector<Subst> match_all(const std::vector<Atom>& pattern, const Subst& seed,
                             const AtomIndex& target, const VarFilter& filter = {});

// ---------------------------------------------------------------------------
// Operations.

/// Lexicographically least homomorphism src -> dst extending `fixed` (ordered
/// by source term, then image), or nullopt. Every source term may move; use
/// `fixed` to pin constants where the caller needs identity.
std::optional<Hom> find_hom(const Instance& src, const Instance& dst,
                            const std::map<Term, Term>& fixed = {});

/// True iff there is a bijective homomorphism a -> b whose image is exactly b.
bool is_isomorphic(const Instance& a, const Instance& b);

/// phi "contains" psi: a homomorphism from phi's body to psi's body fixing the
/// free tuples positionally; equivalently every answer of psi is an answer of
/// phi. Throws on free-tuple arity mismatch.
bool cq_contains(const ConjunctiveQuery& phi, const ConjunctiveQuery& psi);

/// Keep only the most general queries: one representative per mutual-
/// containment class (fewest atoms, then least canonical key), with strictly
/// contained members dropped.
std::vector<ConjunctiveQuery> minimize_ucq(std::vector<ConjunctiveQuery> queries);

/// Every TGD satisfied: for each body match some head witness exists in inst
/// (existentials may map to any domain term).
bool is_model(const Instance& inst, const RuleSet& theory);

struct CoreOptions {
  std::size_t slack = 2;             // retraction source is Ch_{n+slack}
  std::size_t node_budget = 2000000; // backtracking node cap
  std::size_t max_atoms = 500000;    // chase cap
};

/// Bounded search for Core(R, start): scans n <= depth for retractions of
/// Ch_{n+slack} into Ch_n that fix dom(start) and whose image is a model,
/// returning the minimum-cardinality image (ties broken canonically) with
/// c_value = least stage containing it. nullopt if no witness within depth.
std::optional<CoreResult> core_retract(const RuleSet& theory, const Instance& start,
                                       std::size_t depth, const CoreOptions& opts = {});

/// Core(Core(D)) = Core(D), up to isomorphism.
bool core_idempotent_check(const RuleSet& theory, const Instance& start, std::size_t depth,
                           const CoreOptions& opts = {});

}  // namespace tmqa
