#include "tmqa/homo.hpp"

#include <algorithm>

#include "tmqa/chase.hpp"

namespace tmqa {

Term Hom::operator()(const Term& t) const {
  auto it = mapping.find(t);
  return it == mapping.end() ? t : it->second;
}

Atom Hom::operator()(const Atom& a) const {
  Atom out;
  out.relation = a.relation;
  out.args.reserve(a.args.size());
  for (const auto& t : a.args) out.args.push_back((*this)(t));
  return out;
}

// ---------------------------------------------------------------------------
// AtomIndex

AtomIndex::AtomIndex(const std::vector<Atom>& atoms) : atoms_(atoms) {
  std::sort(atoms_.begin(), atoms_.end());
  atoms_.erase(std::unique(atoms_.begin(), atoms_.end()), atoms_.end());
  for (const auto& a : atoms_) by_relation_[a.relation].push_back(a);
}

AtomIndex::AtomIndex(const Instance& inst)
    : AtomIndex(std::vector<Atom>(inst.facts().begin(), inst.facts().end())) {}

const std::vector<Atom>& AtomIndex::candidates(const std::string& relation) const {
  static const std::vector<Atom> empty;
  auto it = by_relation_.find(relation);
  return it == by_relation_.end() ? empty : it->second;
}

// ---------------------------------------------------------------------------
// Backtracking matcher

namespace {

// Reorders pattern atoms so that each one shares a variable with the atoms
// before it when possible (cheap join ordering).
std::vector<Atom> join_order(const std::vector<Atom>& pattern) {
  std::vector<Atom> out;
  std::vector<bool> used(pattern.size(), false);
  std::set<std::string> bound;
  auto vars_of = [](const Atom& a) {
    std::set<std::string> vs;
    for (const auto& t : a.args)
      if (t.is_variable()) vs.insert(t.name());
    return vs;
  };
  for (std::size_t k = 0; k < pattern.size(); ++k) {
    std::size_t best = pattern.size();
    long best_score = -1;
    for (std::size_t i = 0; i < pattern.size(); ++i) {
      if (used[i]) continue;
      auto vs = vars_of(pattern[i]);
      long shared = 0;
      for (const auto& v : vs)
        if (bound.count(v)) ++shared;
      long score = shared * 100 - static_cast<long>(vs.size());
      if (best == pattern.size() || score > best_score) {
        best = i;
        best_score = score;
      }
    }
    used[best] = true;
    for (const auto& v : vars_of(pattern[best])) bound.insert(v);
    out.push_back(pattern[best]);
  }
  return out;
}

bool unify_term(const Term& pat, const Term& value, Subst& binding, const VarFilter& filter,
                std::vector<std::string>& trail) {
  if (pat.is_variable()) {
    auto it = binding.find(pat.name());
    if (it != binding.end()) return it->second == value;
    if (filter && !filter(pat.name(), value)) return false;
    binding.emplace(pat.name(), value);
    trail.push_back(pat.name());
    return true;
  }
  return pat == value;
}

struct Matcher {
  std::vector<Atom> pattern;
  const AtomIndex& target;
  const VarFilter& filter;
  Subst binding;
  std::function<bool(const Subst&)> emit;  // returns false to stop the search

  bool run() { return step(0); }

  bool step(std::size_t k) {
    if (k == pattern.size()) return emit(binding);
    const Atom& pat = pattern[k];
    for (const Atom& cand : target.candidates(pat.relation)) {
      if (cand.args.size() != pat.args.size()) continue;
      std::vector<std::string> trail;
      bool ok = true;
      for (std::size_t i = 0; i < pat.args.size() && ok; ++i)
        ok = unify_term(pat.args[i], cand.args[i], binding, filter, trail);
      if (ok && !step(k + 1)) return false;
      for (const auto& v : trail) binding.erase(v);
    }
    return true;
  }
};

}  // namespace

std::optional<Subst> match_first(const std::vector<Atom>& pattern, const Subst& seed,
                                 const AtomIndex& target, const VarFilter& filter) {
  std::optional<Subst> found;
  Matcher m{join_order(pattern), target, filter, seed,
            [&](const Subst& s) {
              found = s;
              return false;
            }};
  m.run();
  return found;
}

std::vector<Subst> match_all(const std::vector<Atom>& pattern, const Subst& seed,
                             const AtomIndex& target, const VarFilter& filter) {
  std::vector<Subst> out;
  Matcher m{join_order(pattern), target, filter, seed,
            [&](const Subst& s) {
              out.push_back(s);
              return true;
            }};
  m.run();
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

// ---------------------------------------------------------------------------
// find_hom / is_isomorphic

namespace {

struct HomSearch {
  std::vector<Term> src_terms;  // sorted: assignment order
  std::vector<Term> dst_terms;  // sorted: candidate order
  std::vector<Atom> src_atoms;
  const AtomIndex& dst;
  std::map<Term, Term> assignment;
  bool injective = false;
  std::set<Term> used;
  // src atom index -> position (in src_terms) of its last-assigned term
  std::vector<std::size_t> check_at;

  bool found = false;
  std::map<Term, Term> result;

  void prepare() {
    std::map<Term, std::size_t> pos;
    for (std::size_t i = 0; i < src_terms.size(); ++i) pos[src_terms[i]] = i;
    check_at.resize(src_atoms.size(), 0);
    for (std::size_t a = 0; a < src_atoms.size(); ++a) {
      std::size_t last = 0;
      for (const auto& t : src_atoms[a].args) last = std::max(last, pos.at(t));
      check_at[a] = last;
    }
  }

  bool atom_ok(const Atom& a) {
    Atom img;
    img.relation = a.relation;
    img.args.reserve(a.args.size());
    for (const auto& t : a.args) img.args.push_back(assignment.at(t));
    const auto& cands = dst.candidates(img.relation);
    return std::binary_search(cands.begin(), cands.end(), img);
  }

  bool step(std::size_t k) {
    if (k == src_terms.size()) {
      found = true;
      result = assignment;
      return false;  // stop at the first (lexicographically least) solution
    }
    const Term& t = src_terms[k];
    if (assignment.count(t)) return check_and_descend(k);
    for (const auto& cand : dst_terms) {
      if (injective && used.count(cand)) continue;
      assignment.emplace(t, cand);
      if (injective) used.insert(cand);
      if (!check_and_descend(k)) return false;
      if (injective) used.erase(cand);
      assignment.erase(t);
    }
    return true;
  }

  bool check_and_descend(std::size_t k) {
    for (std::size_t a = 0; a < src_atoms.size(); ++a)
      if (check_at[a] == k && !atom_ok(src_atoms[a])) return true;
    return step(k + 1);
  }
};

}  // namespace

std::optional<Hom> find_hom(const Instance& src, const Instance& dst,
                            const std::map<Term, Term>& fixed) {
  for (const auto& [from, to] : fixed) {
    if (!src.contains_term(from))
      throw PreconditionError("find_hom: fixed term not in source: " + from.text());
    if (!dst.contains_term(to))
      throw PreconditionError("find_hom: fixed image not in target: " + to.text());
  }
  AtomIndex index(dst);
  HomSearch search{std::vector<Term>(src.domain().begin(), src.domain().end()),
                   std::vector<Term>(dst.domain().begin(), dst.domain().end()),
                   std::vector<Atom>(src.facts().begin(), src.facts().end()), index};
  search.assignment = fixed;
  search.prepare();
  search.step(0);
  if (!search.found) return std::nullopt;
  Hom h;
  h.mapping = search.result;
  for (const auto& [k, v] : h.mapping)
    if (k == v) h.fixed.insert(k);
  return h;
}

bool is_isomorphic(const Instance& a, const Instance& b) {
  if (a.size() != b.size() || a.domain().size() != b.domain().size()) return false;
  AtomIndex index(b);
  HomSearch search{std::vector<Term>(a.domain().begin(), a.domain().end()),
                   std::vector<Term>(b.domain().begin(), b.domain().end()),
                   std::vector<Atom>(a.facts().begin(), a.facts().end()), index};
  search.injective = true;
  search.prepare();
  search.step(0);
  if (!search.found) return false;
  // Injective on equal-size domains and atom sets: check the atom image covers b.
  std::set<Atom> image;
  Hom h;
  h.mapping = search.result;
  for (const auto& f : a.facts()) image.insert(h(f));
  return image == b.facts();
}

// ---------------------------------------------------------------------------
// Containment / minimization

bool cq_contains(const ConjunctiveQuery& phi, const ConjunctiveQuery& psi) {
  if (phi.free_vars.size() != psi.free_vars.size())
    throw PreconditionError("cq_contains: free tuple lengths differ");
  Subst seed;
  for (std::size_t i = 0; i < phi.free_vars.size(); ++i) {
    Term img = Term::variable(psi.free_vars[i]);
    auto it = seed.find(phi.free_vars[i]);
    if (it != seed.end()) {
      if (!(it->second == img)) return false;  // repeated free var, inconsistent images
    } else {
      seed.emplace(phi.free_vars[i], img);
    }
  }
  AtomIndex index(psi.body);
  return match_first(phi.body, seed, index).has_value();
}

std::vector<ConjunctiveQuery> minimize_ucq(std::vector<ConjunctiveQuery> queries) {
  // Canonicalize and dedup first.
  std::map<std::string, ConjunctiveQuery> byKey;
  for (auto& q : queries) {
    auto c = canonicalize(q);
    byKey.emplace(query_key(c), std::move(c));
  }
  std::vector<ConjunctiveQuery> items;
  items.reserve(byKey.size());
  for (auto& [k, q] : byKey) items.push_back(std::move(q));

  std::size_t n = items.size();
  std::vector<std::vector<bool>> ge(n, std::vector<bool>(n, false));  // ge[i][j]: i contains j
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (i != j) ge[i][j] = cq_contains(items[i], items[j]);

  // Representative per mutual-containment class: fewest atoms, then least key.
  std::vector<int> cls(n, -1);
  int ncls = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (cls[i] >= 0) continue;
    cls[i] = ncls;
    for (std::size_t j = i + 1; j < n; ++j)
      if (cls[j] < 0 && ge[i][j] && ge[j][i]) cls[j] = ncls;
    ++ncls;
  }
  std::vector<std::size_t> rep(static_cast<std::size_t>(ncls), SIZE_MAX);
  for (std::size_t i = 0; i < n; ++i) {
    auto c = static_cast<std::size_t>(cls[i]);
    if (rep[c] == SIZE_MAX) {
      rep[c] = i;
    } else {
      const auto& a = items[i];
      const auto& b = items[rep[c]];
      if (a.size() < b.size() || (a.size() == b.size() && query_key(a) < query_key(b))) rep[c] = i;
    }
  }
  std::vector<ConjunctiveQuery> kept;
  for (std::size_t c = 0; c < rep.size(); ++c) {
    std::size_t i = rep[c];
    bool dominated = false;
    for (std::size_t d = 0; d < rep.size() && !dominated; ++d) {
      if (d == c) continue;
      std::size_t j = rep[d];
      // j strictly contains i: i is redundant as a disjunct.
      dominated = ge[j][i] && !ge[i][j];
    }
    if (!dominated) kept.push_back(items[i]);
  }
  std::sort(kept.begin(), kept.end(),
            [](const auto& a, const auto& b) { return query_key(a) < query_key(b); });
  return kept;
}

// ---------------------------------------------------------------------------
// is_model

bool is_model(const Instance& inst, const RuleSet& theory) {
  AtomIndex index(inst);
  for (const auto& rule : theory.rules) {
    auto head_witness = [&](const Subst& sigma) {
      Subst seed;
      for (const auto& v : rule.frontier) seed.emplace(v, sigma.at(v));
      for (const auto& v : rule.dom_vars) seed.emplace(v, sigma.at(v));
      return match_first(rule.head, seed, index).has_value();
    };
    for (const auto& sigma : hom_matches(rule, inst))
      if (!head_witness(sigma)) return false;
  }
  return true;
}

// ---------------------------------------------------------------------------
// Core search

namespace {

// Enumerates homomorphisms big -> small fixing `fixed`, minimizing the image
// atom count; image must be a model of the theory. Branch and bound on the
// partial image size.
struct CoreSearch {
  const Instance& big;
  const Instance& small;
  const RuleSet& theory;
  std::map<Term, Term> fixed;
  std::size_t node_budget;

  std::vector<Term> src_terms;
  std::vector<Term> dst_terms;
  std::vector<Atom> src_atoms;
  AtomIndex index;
  std::vector<std::size_t> check_at;
  std::map<Term, Term> assignment;
  std::set<Atom> partial_image;
  std::size_t nodes = 0;

  std::optional<std::set<Atom>> best_image;
  std::map<Term, Term> best_map;

  CoreSearch(const Instance& big_, const Instance& small_, const RuleSet& theory_,
             std::map<Term, Term> fixed_, std::size_t budget)
      : big(big_), small(small_), theory(theory_), fixed(std::move(fixed_)),
        node_budget(budget),
        src_terms(big.domain().begin(), big.domain().end()),
        dst_terms(small.domain().begin(), small.domain().end()),
        src_atoms(big.facts().begin(), big.facts().end()),
        index(small) {
    std::map<Term, std::size_t> pos;
    for (std::size_t i = 0; i < src_terms.size(); ++i) pos[src_terms[i]] = i;
    check_at.resize(src_atoms.size());
    for (std::size_t a = 0; a < src_atoms.size(); ++a) {
      std::size_t last = 0;
      for (const auto& t : src_atoms[a].args) last = std::max(last, pos.at(t));
      check_at[a] = last;
    }
    assignment = fixed;
  }

  void run() { step(0); }

  void step(std::size_t k) {
    if (++nodes > node_budget) throw BudgetError("core_retract: node budget exhausted");
    // The image only grows along a branch, so an incumbent of equal size wins.
    if (best_image && partial_image.size() >= best_image->size()) return;
    if (k == src_terms.size()) {
      Instance img(partial_image);
      if (!is_model(img, theory)) return;
      best_image = partial_image;
      best_map = assignment;
      return;
    }
    const Term& t = src_terms[k];
    if (assignment.count(t)) {
      descend(k);
      return;
    }
    for (const auto& cand : dst_terms) {
      assignment.emplace(t, cand);
      descend(k);
      assignment.erase(t);
    }
  }

  void descend(std::size_t k) {
    std::vector<Atom> added;
    for (std::size_t a = 0; a < src_atoms.size(); ++a) {
      if (check_at[a] != k) continue;
      Atom img;
      img.relation = src_atoms[a].relation;
      for (const auto& t : src_atoms[a].args) img.args.push_back(assignment.at(t));
      const auto& cands = index.candidates(img.relation);
      if (!std::binary_search(cands.begin(), cands.end(), img)) {
        for (const auto& x : added) partial_image.erase(x);
        return;
      }
      if (partial_image.insert(img).second) added.push_back(img);
    }
    step(k + 1);
    for (const auto& x : added) partial_image.erase(x);
  }
};

}  // namespace

std::optional<CoreResult> core_retract(const RuleSet& theory, const Instance& start,
                                       std::size_t depth, const CoreOptions& opts) {
  ChaseOptions copts;
  copts.max_atoms = opts.max_atoms;
  ChaseRun run = chase_to(theory, start, depth + opts.slack, copts);

  std::map<Term, Term> fixed;
  for (const auto& t : start.domain()) fixed.emplace(t, t);

  std::optional<CoreResult> best;
  for (std::size_t n = 0; n <= depth; ++n) {
    const Instance& small = run.stage(n);
    const Instance& big = run.stage(n + opts.slack);
    CoreSearch search(big, small, theory, fixed, opts.node_budget);
    search.run();
    if (!search.best_image) continue;
    Instance core(*search.best_image);
    if (best && best->core.size() <= core.size()) continue;
    CoreResult res;
    res.core = std::move(core);
    res.retraction.mapping = search.best_map;
    for (const auto& [k, v] : res.retraction.mapping)
      if (k == v) res.retraction.fixed.insert(k);
    res.found_at = n;
    res.slack = opts.slack;
    res.c_value = 0;
    while (!res.core.subset_of(run.stage(res.c_value))) {
      ++res.c_value;
      if (res.c_value > run.depth() + 1)
        throw InvariantError("core_retract: core not contained in any computed stage");
    }
    best = std::move(res);
  }
  return best;
}

bool core_idempotent_check(const RuleSet& theory, const Instance& start, std::size_t depth,
                           const CoreOptions& opts) {
  auto first = core_retract(theory, start, depth, opts);
  if (!first) throw PreconditionError("core_idempotent_check: no core found for the input");
  auto second = core_retract(theory, first->core, depth, opts);
  if (!second) return false;
  return is_isomorphic(first->core, second->core);
}

}  // namespace tmqa
