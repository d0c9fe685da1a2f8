#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "tmqa/chase.hpp"
#include "tmqa/homo.hpp"
#include "tmqa/model.hpp"

namespace tmqa {

struct LocalityParams {
  std::size_t l = 1;                        // candidate locality constant
  std::optional<std::size_t> degree_bound;  // bd-locality degree, when probing it
  std::size_t probe_depth = 4;
};

struct Witness {
  Instance instance;
  Atom atom;
  std::string note;
};

/// Empirical probe outcome. Refutations are sound and carry a re-checkable
/// witness; anything else is inconclusive at the probed depth.
struct ProbeReport {
  enum class Verdict { Refuted, NotRefutedWithinBudget };
  Verdict verdict = Verdict::NotRefutedWithinBudget;
  std::optional<Witness> witness;
  /// Estimated constants (n_at, d_R, c_T, k_R, ...) with the depth at which
  /// each was observed.
  std::map<std::string, std::pair<double, std::size_t>> constants_estimated;
  std::vector<std::string> notes;
};

struct AnalysisOptions {
  std::size_t island_cap = 2000000;  // max number of islands to enumerate
  ChaseOptions chase;
  CoreOptions core;
};

/// All subsets of D of size <= l (the empty set included).
std::vector<Instance> islands(const Instance& D, std::size_t l,
                              const AnalysisOptions& opts = {});

/// Compares Ch_depth(D) against the union of island chases; any missing atom
/// soundly refutes locality at this l.
ProbeReport locality_refute(const RuleSet& theory, const LocalityParams& params,
                            const Instance& D, const AnalysisOptions& opts = {});

struct DistancePair {
  Term a, b;
  std::optional<std::size_t> dist_instance;
  std::optional<std::size_t> dist_chase;
  double ratio = 0.0;  // dist_instance / dist_chase when both finite
};

struct DistancingReport {
  std::vector<DistancePair> pairs;
  double max_ratio = 0.0;
  ProbeReport probe;
};

DistancingReport distancing_probe(const RuleSet& theory, const Instance& D,
                                  const std::vector<std::pair<Term, Term>>& pairs,
                                  std::size_t depth, const AnalysisOptions& opts = {});

enum class EnoughVerdict { True, False, Unknown };

/// Per query: entailment found by `depth` implies found by `n`.
std::vector<EnoughVerdict> check_enough(const RuleSet& theory, const Instance& D, std::size_t n,
                                        const std::vector<std::pair<ConjunctiveQuery,
                                                                    std::vector<Term>>>& queries,
                                        std::size_t depth, const AnalysisOptions& opts = {});

struct CDResult {
  Instance cd;                 // union of island cores
  std::size_t observed_k = 0;  // least k with cd ⊆ Ch_k(D)
  std::size_t max_island_c = 0;
};

CDResult compute_C_D(const RuleSet& theory, const Instance& D, std::size_t l, std::size_t depth,
                     const AnalysisOptions& opts = {});

struct BannedResult {
  Instance m_f;
  std::set<Term> banned;
  bool model = false;  // is_model(m_f, theory) at this depth
};

/// M_F: the chase of D restricted away from terms of Ch(F) outside Core(F).
BannedResult banned_restrict(const RuleSet& theory, const Instance& D, const Instance& F,
                             std::size_t depth, const AnalysisOptions& opts = {});

struct UbddEntry {
  Instance instance;
  std::size_t c = 0;  // least stage containing the core
};

struct UbddReport {
  std::vector<UbddEntry> entries;
  std::size_t max_c = 0;
};

UbddReport ubdd_probe(const RuleSet& theory, const std::vector<Instance>& instances,
                      std::size_t depth, const AnalysisOptions& opts = {});

/// Max observed delay between a fact's terms all existing and the fact being
/// derived (the n_at constant), over the given instances at the given depth.
std::size_t estimate_n_at(const RuleSet& theory, const std::vector<Instance>& instances,
                          std::size_t depth, const AnalysisOptions& opts = {});

/// The connectivity trick: a fresh first variable added to every atom of every
/// rule (arity + 1), making all bodies connected.
RuleSet make_connected(const RuleSet& theory);

/// Max Gaifman degree of an instance (0 for empty).
std::size_t gaifman_degree(const Instance& inst);

}  // namespace tmqa
