#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "tmqa/error.hpp"

namespace tmqa {

/// Isomorphism type of an existential rule head: a canonical serialization of
/// the head atoms with frontier variables renamed f1,f2,... and existential
/// variables renamed e1,e2,... in order of first occurrence. Independent of
/// the rule body and of variable names.
struct TauId {
  std::string canonical;

  friend bool operator==(const TauId& a, const TauId& b) { return a.canonical == b.canonical; }
  friend bool operator<(const TauId& a, const TauId& b) { return a.canonical < b.canonical; }
};

/// A term: constant, variable, or Skolem term sk[tau/i](args...).
/// Immutable value; structural equality is the only identity.
class Term {
 public:
  enum class Kind { Constant, Variable, Skolem };

  /// Default-constructs the empty constant (container convenience).
  Term() : Term(constant("")) {}

  static Term constant(std::string name);
  static Term variable(std::string name);
  static Term skolem(TauId tau, int position, std::vector<Term> args);

  Kind kind() const { return rep_->kind; }
  bool is_constant() const { return rep_->kind == Kind::Constant; }
  bool is_variable() const { return rep_->kind == Kind::Variable; }
  bool is_skolem() const { return rep_->kind == Kind::Skolem; }

  /// Name of a constant or variable.
  const std::string& name() const;
  const TauId& tau() const;
  int position() const;
  const std::vector<Term>& args() const;

  /// Printed form; injective on terms of the same kind, and globally
  /// injective on ground terms (constants never look like sk[...]).
  const std::string& text() const { return rep_->text; }

  /// True iff no variable occurs anywhere inside.
  bool ground() const { return rep_->ground; }

  friend bool operator==(const Term& a, const Term& b) {
    return a.rep_ == b.rep_ || (a.rep_->kind == b.rep_->kind && a.rep_->text == b.rep_->text);
  }
  friend bool operator!=(const Term& a, const Term& b) { return !(a == b); }
  friend bool operator<(const Term& a, const Term& b) {
    if (a.rep_ == b.rep_) return false;
    if (a.rep_->text != b.rep_->text) return a.rep_->text < b.rep_->text;
    return a.rep_->kind < b.rep_->kind;
  }

  std::size_t hash() const { return rep_->hash; }

 private:
  struct Rep {
    Kind kind;
    std::string name;  // constant / variable
    TauId tau;         // skolem
    int position = 0;  // skolem
    std::vector<Term> args;
    std::string text;
    bool ground = true;
    std::size_t hash = 0;
  };
  explicit Term(std::shared_ptr<const Rep> rep) : rep_(std::move(rep)) {}
  std::shared_ptr<const Rep> rep_;
};

/// Relational fact or rule/query atom.
struct Atom {
  std::string relation;
  std::vector<Term> args;

  std::size_t arity() const { return args.size(); }
  std::string text() const;
  bool ground() const;

  friend bool operator==(const Atom& a, const Atom& b) {
    return a.relation == b.relation && a.args == b.args;
  }
  friend bool operator!=(const Atom& a, const Atom& b) { return !(a == b); }
  // Canonical atom order: relation name, then printed args.
  friend bool operator<(const Atom& a, const Atom& b);
};

/// Variable assignment. Keys are variable names.
using Subst = std::map<std::string, Term>;

Term apply_subst(const Term& t, const Subst& s);
/// Substitutes variables; variables absent from s are kept as-is.
Atom apply_subst(const Atom& a, const Subst& s);

/// A deduplicated set of ground facts with its active domain.
class Instance {
 public:
  Instance() = default;
  Instance(std::initializer_list<Atom> facts) : Instance(std::vector<Atom>(facts)) {}
  explicit Instance(std::vector<Atom> facts);
  explicit Instance(std::set<Atom> facts);

  const std::set<Atom>& facts() const { return facts_; }
  const std::set<Term>& domain() const { return domain_; }
  bool contains(const Atom& a) const { return facts_.count(a) > 0; }
  bool contains_term(const Term& t) const { return domain_.count(t) > 0; }
  std::size_t size() const { return facts_.size(); }
  bool empty() const { return facts_.empty(); }
  bool subset_of(const Instance& other) const;

  friend bool operator==(const Instance& a, const Instance& b) { return a.facts_ == b.facts_; }
  friend bool operator!=(const Instance& a, const Instance& b) { return !(a == b); }
  friend bool operator<(const Instance& a, const Instance& b) { return a.facts_ < b.facts_; }

 private:
  void init();
  std::set<Atom> facts_;
  std::set<Term> domain_;
};

/// A TGD. Body and head are stored in canonical atom order. Variables whose
/// only head occurrence is universal (the (pins) shape) carry the
/// active-domain flag and range over dom of the instance when firing.
struct Rule {
  std::vector<Atom> body;  // possibly empty ("true")
  std::vector<Atom> head;  // nonempty
  std::set<std::string> dom_vars;

  // Derived on construction.
  std::set<std::string> body_vars;
  std::set<std::string> head_vars;
  std::set<std::string> frontier;      // body ∩ head variables
  std::set<std::string> existentials;  // head-only variables minus dom_vars

  bool datalog = false;
  bool existential = false;
  bool detached = false;  // existential with empty frontier and no dom vars
  bool sensible = false;  // existential and not detached
  bool linear = false;
  bool connected = false;  // body Gaifman graph connected

  static Rule make(std::vector<Atom> body, std::vector<Atom> head,
                   std::set<std::string> dom_vars = {});

  std::string text() const;
  friend bool operator==(const Rule& a, const Rule& b) {
    return a.body == b.body && a.head == b.head && a.dom_vars == b.dom_vars;
  }
  friend bool operator<(const Rule& a, const Rule& b) { return a.text() < b.text(); }
};

struct RuleSet {
  std::vector<Rule> rules;

  static RuleSet make(std::vector<Rule> rules);
  /// Relation name -> arity. Throws on inconsistent arities.
  std::map<std::string, std::size_t> signature() const;
  bool empty() const { return rules.empty(); }
};

/// CQ with an ordered tuple of free variables. Constants are permitted in the
/// body; the body is kept in canonical atom order.
struct ConjunctiveQuery {
  std::vector<std::string> free_vars;
  std::vector<Atom> body;

  static ConjunctiveQuery make(std::vector<std::string> free_vars, std::vector<Atom> body);
  std::size_t size() const { return body.size(); }
  bool boolean() const { return free_vars.empty(); }
  std::set<std::string> variables() const;
  std::set<std::string> bound_variables() const;
  bool connected() const;

  friend bool operator==(const ConjunctiveQuery& a, const ConjunctiveQuery& b) {
    return a.free_vars == b.free_vars && a.body == b.body;
  }
};

// ---------------------------------------------------------------------------
// Canonicalization machinery (shared by iso_type, canonicalize and markedrw).

/// Per-variable rename class. Variables in `fixed` keep their names and render
/// as ?name; others render as <class><index> with indices assigned per class
/// in order of first occurrence along the winning atom order.
struct CanonSpec {
  std::map<std::string, char> var_class;
  std::set<std::string> fixed;
};

struct CanonResult {
  std::string serialization;                    // least serialization over atom orders
  std::map<std::string, std::string> rename;    // old var name -> canonical token
  std::vector<std::size_t> atom_order;          // winning permutation (indices into input)
};

CanonResult canonical_form(const std::vector<Atom>& atoms, const CanonSpec& spec);

// ---------------------------------------------------------------------------
// Operations.

/// Isomorphism type of a head with the given frontier variables (for rules
/// with active-domain variables, pass frontier ∪ dom_vars). Heads containing
/// constants are rejected.
TauId iso_type(const std::vector<Atom>& head, const std::set<std::string>& frontier);

/// Head with each existential variable w replaced by the Skolem template
/// sk[tau/i](frontier...) where i is the earliest argument position of w in
/// the canonical serialization of the whole head, counted across atoms, and
/// the frontier arguments appear in canonical order.
std::vector<Atom> skolemize_head(const Rule& rule);

/// Shortest-path distance in the Gaifman graph of inst; nullopt = infinity.
/// Throws PreconditionError if either term is not in the active domain.
std::optional<std::size_t> gaifman_distance(const Instance& inst, const Term& s, const Term& t);

/// Deterministic canonical form: bound variables renamed v1,v2,... along the
/// least serialization, atoms reordered; free variables untouched. Idempotent;
/// isomorphic inputs give equal outputs.
ConjunctiveQuery canonicalize(const ConjunctiveQuery& q);

/// Canonical key: equal iff queries are isomorphic (same free tuple).
std::string query_key(const ConjunctiveQuery& q);

}  // namespace tmqa
