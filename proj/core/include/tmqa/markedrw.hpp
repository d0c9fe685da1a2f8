#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "tmqa/chase.hpp"
#include "tmqa/model.hpp"
#include "tmqa/rewriter.hpp"

namespace tmqa {

// The marked-query rewriting calculus for the grid theories: two-relation
// signature {R,G} (levels 2 and 1) and its K-level generalization I_K..I_1.
//
// Properly marked queries satisfy, per relation: (i) an edge into a marked
// target has a marked source; (ii) every directed cycle is fully marked;
// (iii) same-relation co-sources of one target share markedness. For K >= 3 a
// fourth condition is adopted (needed for the case analysis of the
// generalization to stay complete): the incoming atoms of an unmarked
// variable use levels within one adjacent pair {i+1, i}. Non-original chase
// terms are pin terms (one in-edge), grid terms (one in-edge at levels i+1 and
// i), or the loop term, which connected queries with a marked variable can
// never reach, so the condition is sound and makes the case analysis of
// maximal variables complete. It is vacuous at K = 2.

/// Relation name -> level (R_d: G=1, R=2; Sigma_K: I_k = k).
using LevelMap = std::map<std::string, int>;

LevelMap rd_levels();
LevelMap sigma_levels(int K);

/// CQ plus the set of marked variables (free variables always marked). The
/// body may be empty (arises when cut removes the last atom); such queries are
/// totally marked and expand over the signature when exported as CQs.
struct MarkedQuery {
  std::vector<std::string> free_vars;
  std::vector<Atom> atoms;  // canonical order, possibly empty
  std::set<std::string> marked;

  bool properly_marked = false;
  bool totally_marked = false;
  bool live = false;

  static MarkedQuery make(const ConjunctiveQuery& q, std::set<std::string> marked,
                          const LevelMap& levels);
  static MarkedQuery make(std::vector<std::string> free_vars, std::vector<Atom> atoms,
                          std::set<std::string> marked, const LevelMap& levels);

  std::set<std::string> variables() const;
  ConjunctiveQuery query() const;  // throws on empty body
  std::string key() const;         // canonical form key including the marking
  std::vector<Atom> red_atoms(const LevelMap& levels, int level) const;
};

/// Canonical renaming of bound variables (marked u1,u2,..., unmarked v1,v2,...).
MarkedQuery canonicalize_marked(const MarkedQuery& q, const LevelMap& levels);

// ---------------------------------------------------------------------------
// Ranks

/// Rank of a marked query: for each level i = K..2 the pair (number of level-i
/// atoms, multiset of level-i edge ranks of the level-(i-1) atoms), compared
/// lexicographically with Dershowitz–Manna multiset comparisons. For K = 2
/// this is the pair <|Q_R|, {erk(alpha,Q)}_m>.
struct RankValue {
  std::vector<std::uint64_t> counts;                  // index 0 = level K
  std::vector<std::vector<std::uint64_t>> multisets;  // sorted descending

  std::string str() const;
};

int rank_compare(const RankValue& a, const RankValue& b);
bool rank_less(const RankValue& a, const RankValue& b);

/// Strict Dershowitz–Manna multiset comparison over naturals.
bool multiset_less(std::vector<std::uint64_t> a, std::vector<std::uint64_t> b);

/// A directed walk over the query's edges; red atoms (level i) are consumed at
/// most once in one direction.
struct RPath {
  struct Step {
    Atom atom;
    bool reversed = false;
  };
  std::vector<Step> steps;
  std::uint64_t cost = 0;
};

/// Minimal hike cost to a level-(i-1) atom alpha: hikes start at a marked
/// variable, end traversing alpha, carry elevation 3^{|Q_i|} scaled by 3 per
/// forward level-i step (divided per backward step), and pay the current
/// elevation per level-(i-1) step. nullopt when no hike exists.
std::optional<std::uint64_t> erk_opt(const MarkedQuery& q, const Atom& alpha,
                                     const LevelMap& levels, int level);

/// Throwing variant; also returns a witness hike on request.
std::uint64_t erk(const MarkedQuery& q, const Atom& alpha, const LevelMap& levels, int level = 2);
RPath erk_witness(const MarkedQuery& q, const Atom& alpha, const LevelMap& levels, int level = 2);

RankValue qrk(const MarkedQuery& q, const LevelMap& levels, int K);
std::vector<RankValue> srk(const std::vector<MarkedQuery>& S, const LevelMap& levels, int K);
bool srk_less(const std::vector<RankValue>& a, const std::vector<RankValue>& b);
std::string srk_str(const std::vector<RankValue>& s);

// ---------------------------------------------------------------------------
// Operations

struct MaximalVar {
  enum class Kind { SingleEdge, LevelPair, DuplicateTargets };
  std::string var;
  Kind kind = Kind::SingleEdge;
  int level = 0;          // SingleEdge: in-atom level; LevelPair: lower level i
  std::string source_hi;  // LevelPair: source of the level-(i+1) atom (x_r)
  std::string source_lo;  // LevelPair: source of the level-i atom (x_g)
  std::string dup_a, dup_b;  // DuplicateTargets: the two least distinct sources
};

std::set<std::string> marked_variable_set(const MarkedQuery& q);

/// All possible markings of q containing the free variables, filtered to
/// properly marked. Throws on Boolean or disconnected input.
std::vector<MarkedQuery> initial_markings(const ConjunctiveQuery& q, const LevelMap& levels);

/// Maximal variables (unmarked, no outgoing atom) of a live query with their
/// operation case; throws InvariantError if none exists (every live query
/// admits one).
std::vector<MaximalVar> classify_maximal(const MarkedQuery& q, const LevelMap& levels);

/// Removes the sole atom containing x. When the body empties, the result is a
/// totally marked empty query.
MarkedQuery cut(const MarkedQuery& q, const std::string& x, const LevelMap& levels);

/// Renames z2 to z everywhere (both sources of same-level in-atoms at x).
MarkedQuery fuse(const MarkedQuery& q, const std::string& x, const std::string& z,
                 const std::string& z2, const LevelMap& levels);

/// Replaces I_{i+1}(x_r,x), I_i(x_g,x) by I_i(x',x''), I_i(x'',x_r),
/// I_{i+1}(x',x_g) and returns the properly marked results among the four
/// markings of {x',x''}.
std::vector<MarkedQuery> reduce(const MarkedQuery& q, const std::string& x,
                                const LevelMap& levels);

// ---------------------------------------------------------------------------
// Process

struct ProcessStep {
  std::size_t index = 0;
  std::string op;  // "cut-red", "fuse-green", "reduce", "cut-I3", ...
  std::string variable;
  std::string before_key;
  std::vector<std::string> after_keys;
  std::string srk_before;
  std::string srk_after;
};

struct ProcessResult {
  RewriteSet rewriting;
  std::vector<ProcessStep> trace;
  std::vector<MarkedQuery> final_marked;
  std::size_t dropped_improper = 0;
  std::size_t dropped_inert = 0;  // queries with an unreachable green atom
};

struct ProcessOptions {
  std::size_t max_steps = 200000;
  bool check_invariants = true;  // per-step rank monotonicity and clause checks
};

/// The rewriting process for R_d over {R/2, G/2}.
ProcessResult run_process(const ConjunctiveQuery& q, const ProcessOptions& opts = {});

/// Marked satisfaction: a homomorphism witnessing q over Ch_depth mapping
/// exactly the marked variables into dom(D).
bool satisfies_marked(const RuleSet& theory, const Instance& D, const MarkedQuery& Q,
                      const std::vector<Term>& args, std::size_t depth,
                      const ChaseOptions& opts = {});
bool satisfies_marked(const ChaseRun& run, const MarkedQuery& Q, const std::vector<Term>& args,
                      std::size_t depth);

/// The 2K rules of the K-level grid theory: (loop), (pin_k) for k=1..K and
/// (grid_i) for i=1..K-1, over I_K..I_1.
RuleSet gen_theory_K(int K);

/// R_d itself (multi-head (loop) and (pins), (grid)).
RuleSet rd_theory();

/// Generalized process over Sigma_K: K cut operations, K fuse operations,
/// K-1 reduce operations, ranks per the K-level tuple.
ProcessResult run_process_K(int K, const ConjunctiveQuery& q, const ProcessOptions& opts = {});

}  // namespace tmqa
