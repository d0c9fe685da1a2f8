#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "tmqa/chase.hpp"
#include "tmqa/model.hpp"

namespace tmqa {

struct Taxonomy {
  std::vector<Rule> datalog;
  std::vector<Rule> existential;
  std::vector<Rule> detached;  // subset of existential
  std::vector<Rule> sensible;  // existential minus detached
};

/// Binary-signature rule taxonomy (arity <= 2 enforced).
Taxonomy split_taxonomy(const RuleSet& theory);

struct NormalizedTheory {
  RuleSet t_nf;   // T_II ∪ T_III
  RuleSet t_ii;   // existential rules: one connected CQ plus one nullary atom
  RuleSet t_iii;  // Datalog rules proving nullary atoms
  /// Canonical Boolean-CQ key -> nullary predicate name ("m_empty" for the
  /// connected-body case).
  std::map<std::string, std::string> m_predicates;
  std::map<std::string, std::vector<Atom>> m_bodies;  // name -> remainder atoms
};

struct NormalizeOptions {
  std::size_t fuel = 8;  // body-rewriting fuel
};

/// Rew(rule): one rule per rewriting disjunct of the body (head unchanged,
/// frontier variables kept free). Throws BudgetError when the rewriting does
/// not complete within fuel.
std::vector<Rule> body_rewriting(const Rule& rule, const RuleSet& theory, std::size_t fuel);

struct Separation {
  Rule sep_cc;
  std::optional<Rule> sep_m;  // absent when the body is connected (M_∅ case)
  std::string m_name;
  std::vector<Atom> remainder;
};

/// Splits an existential rule body into the connected frontier component plus
/// the variable-disjoint remainder encapsulated behind a nullary predicate.
/// `m_name` must be the predicate chosen for the remainder.
Separation body_separation(const Rule& rule, const std::string& m_name);

NormalizedTheory normalize(const RuleSet& theory, const NormalizeOptions& opts = {});

struct SkeletonForest {
  Instance skeleton;     // D ∪ existential atoms of the run's last stage
  std::set<Term> roots;  // dom(D) ∪ detached terms
  std::map<Term, Term> parent_term;             // child skolem -> frontier term
  std::map<Term, std::vector<Atom>> tree_atoms;  // root -> S(root)
  std::map<Term, Term> root_of;                  // node -> its tree root
  std::size_t max_out_degree = 0;
};

/// The sensible-atom forest of a run over a binary theory. Verifies the
/// out-degree bound (number of existential rules).
SkeletonForest existential_skeleton(const ChaseRun& run);

struct AppAConstants {
  std::size_t k = 0;  // nullary predicates in T_NF
  std::size_t h = 0;  // max body atom count
  std::size_t n = 0;  // rule count
  std::uint64_t N = 0;  // nodes of the full n-ary tree of depth h (saturating)
  std::uint64_t M = 0;  // N*h + k*h
};

AppAConstants compute_constants(const NormalizedTheory& nf);

/// A parent function: one creating application per non-original atom.
struct AncestorTrace {
  std::map<Atom, std::vector<Atom>> parent;
  std::map<Atom, std::set<Atom>> ancestors(const Instance& start) const;
};

/// The canonical parent choice recorded by the chase.
AncestorTrace canonical_trace(const ChaseRun& run);
/// A random parent choice among all creating applications (seeded).
AncestorTrace random_trace(const ChaseRun& run, std::uint64_t seed);

struct AncestorReport {
  std::map<Term, std::size_t> per_root;  // |∪_{α in S(t)} anc(α)|
  std::size_t max_count = 0;
};

/// Ancestor counts per tree of the forest, under the given parent function.
AncestorReport ancestor_probe(const ChaseRun& run, const SkeletonForest& forest,
                              const AncestorTrace& trace);

}  // namespace tmqa
