#include "tmqa/normalizer.hpp"

#include <algorithm>
#include <functional>
#include <random>

#include "tmqa/homo.hpp"
#include "tmqa/rewriter.hpp"

namespace tmqa {

namespace {

void require_binary(const RuleSet& theory) {
  for (const auto& [rel, arity] : theory.signature())
    if (arity > 2)
      throw PreconditionError("normalizer requires a binary signature; " + rel + " has arity " +
                              std::to_string(arity));
}

}  // namespace

Taxonomy split_taxonomy(const RuleSet& theory) {
  require_binary(theory);
  Taxonomy t;
  for (const auto& r : theory.rules) {
    if (!r.dom_vars.empty())
      throw PreconditionError("normalizer does not accept active-domain rules");
    if (r.datalog) {
      t.datalog.push_back(r);
    } else {
      t.existential.push_back(r);
      if (r.detached)
        t.detached.push_back(r);
      else
        t.sensible.push_back(r);
    }
  }
  return t;
}

std::vector<Rule> body_rewriting(const Rule& rule, const RuleSet& theory, std::size_t fuel) {
  for (const auto& a : rule.body)
    if (a.arity() == 0)
      throw PreconditionError("body_rewriting: nullary atoms may not appear in inputs");
  if (rule.body.empty()) return {rule};

  std::vector<std::string> frontier(rule.frontier.begin(), rule.frontier.end());
  ConjunctiveQuery body_q = ConjunctiveQuery::make(frontier, rule.body);
  RewriteOptions opts;
  opts.fuel = fuel;
  RewriteSet rs = rewrite(theory, body_q, opts);
  if (!rs.complete)
    throw BudgetError("body_rewriting: rewriting of the body did not complete within fuel " +
                      std::to_string(fuel));

  std::vector<Rule> out;
  for (const auto& disjunct : rs.queries) {
    // Free tuples match positionally; merged frontier variables propagate to
    // the head, fresh bound names must avoid head variables.
    Subst head_subst;
    for (std::size_t i = 0; i < frontier.size(); ++i)
      head_subst.emplace(frontier[i], Term::variable(disjunct.free_vars[i]));
    std::set<std::string> head_names;
    for (const auto& a : rule.head)
      for (const auto& t : a.args)
        if (t.is_variable()) head_names.insert(apply_subst(t, head_subst).name());
    Subst avoid;
    std::set<std::string> taken = head_names;
    for (const auto& v : disjunct.variables()) taken.insert(v);
    for (const auto& v : disjunct.bound_variables()) {
      if (!head_names.count(v)) continue;
      for (int i = 1;; ++i) {
        std::string cand = v + "_" + std::to_string(i);
        if (!taken.count(cand)) {
          avoid.emplace(v, Term::variable(cand));
          taken.insert(cand);
          break;
        }
      }
    }
    std::vector<Atom> body;
    for (const auto& a : disjunct.body) body.push_back(apply_subst(a, avoid));
    std::vector<Atom> head;
    for (const auto& a : rule.head) head.push_back(apply_subst(a, head_subst));
    out.push_back(Rule::make(std::move(body), std::move(head)));
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

namespace {

std::vector<std::vector<Atom>> body_components(const std::vector<Atom>& body) {
  std::vector<int> comp(body.size());
  for (std::size_t i = 0; i < body.size(); ++i) comp[i] = static_cast<int>(i);
  std::function<int(int)> find = [&](int x) { return comp[x] == x ? x : comp[x] = find(comp[x]); };
  auto vars_of = [](const Atom& a) {
    std::set<std::string> vs;
    for (const auto& t : a.args)
      if (t.is_variable()) vs.insert(t.name());
    return vs;
  };
  std::vector<std::set<std::string>> vars(body.size());
  for (std::size_t i = 0; i < body.size(); ++i) vars[i] = vars_of(body[i]);
  for (std::size_t i = 0; i < body.size(); ++i)
    for (std::size_t j = i + 1; j < body.size(); ++j)
      for (const auto& v : vars[i])
        if (vars[j].count(v)) {
          comp[find(static_cast<int>(i))] = find(static_cast<int>(j));
          break;
        }
  std::map<int, std::vector<Atom>> groups;
  for (std::size_t i = 0; i < body.size(); ++i) groups[find(static_cast<int>(i))].push_back(body[i]);
  std::vector<std::vector<Atom>> out;
  for (auto& [root, atoms] : groups) out.push_back(std::move(atoms));
  return out;
}

std::string boolean_cq_key(const std::vector<Atom>& atoms) {
  if (atoms.empty()) return "";
  return query_key(canonicalize(ConjunctiveQuery::make({}, atoms)));
}

}  // namespace

Separation body_separation(const Rule& rule, const std::string& m_name) {
  if (rule.datalog) throw PreconditionError("body_separation: rule must be existential");
  Separation sep;
  sep.m_name = m_name;
  Atom m_atom{m_name, {}};

  std::vector<Atom> beta;
  std::vector<Atom> remainder;
  auto components = body_components(rule.body);
  std::size_t frontier_components = 0;
  for (const auto& comp : components) {
    bool has_frontier = false;
    for (const auto& a : comp)
      for (const auto& t : a.args)
        if (t.is_variable() && rule.frontier.count(t.name())) has_frontier = true;
    if (has_frontier) {
      ++frontier_components;
      beta = comp;
    } else {
      for (const auto& a : comp) remainder.push_back(a);
    }
  }
  if (frontier_components > 1)
    throw PreconditionError(
        "body_separation: frontier spreads over several connected components");

  sep.remainder = remainder;
  std::vector<Atom> cc_body = beta;
  cc_body.push_back(m_atom);
  sep.sep_cc = Rule::make(std::move(cc_body), rule.head);
  if (!remainder.empty()) sep.sep_m = Rule::make(remainder, {m_atom});
  return sep;
}

NormalizedTheory normalize(const RuleSet& theory, const NormalizeOptions& opts) {
  Taxonomy tax = split_taxonomy(theory);

  // Step One: body-rewrite every existential rule.
  std::vector<Rule> t_i;
  for (const auto& rho : tax.existential)
    for (auto& r : body_rewriting(rho, theory, opts.fuel)) t_i.push_back(std::move(r));
  std::sort(t_i.begin(), t_i.end());
  t_i.erase(std::unique(t_i.begin(), t_i.end()), t_i.end());

  // Assign nullary predicate names by canonical remainder key.
  NormalizedTheory nf;
  std::map<std::string, std::vector<Atom>> remainders;  // key -> atoms
  std::vector<std::pair<Rule, std::string>> pending;    // (rule, remainder key)
  for (const auto& rho : t_i) {
    Rule probe = rho;
    Separation sep = body_separation(probe, "m_probe");
    std::string key = boolean_cq_key(sep.remainder);
    remainders.emplace(key, sep.remainder);
    pending.push_back({rho, key});
  }
  nf.m_predicates[""] = "m_empty";
  nf.m_bodies["m_empty"] = {};
  int counter = 0;
  for (const auto& [key, atoms] : remainders) {
    if (key.empty()) continue;
    std::string name = "m" + std::to_string(counter++);
    nf.m_predicates[key] = name;
    nf.m_bodies[name] = atoms;
  }

  // Step Two: separate every Step-One rule.
  std::vector<Rule> t_ii;
  bool uses_m_empty = false;
  for (const auto& [rho, key] : pending) {
    Separation sep = body_separation(rho, nf.m_predicates.at(key));
    t_ii.push_back(sep.sep_cc);
    if (key.empty()) uses_m_empty = true;
  }
  std::sort(t_ii.begin(), t_ii.end());
  t_ii.erase(std::unique(t_ii.begin(), t_ii.end()), t_ii.end());

  // Step Three: body-rewrite every sep_M rule.
  std::vector<Rule> t_iii;
  if (uses_m_empty) t_iii.push_back(Rule::make({}, {Atom{"m_empty", {}}}));
  for (const auto& [key, atoms] : remainders) {
    if (key.empty()) continue;
    Rule sep_m = Rule::make(atoms, {Atom{nf.m_predicates.at(key), {}}});
    for (auto& r : body_rewriting(sep_m, theory, opts.fuel)) t_iii.push_back(std::move(r));
  }
  std::sort(t_iii.begin(), t_iii.end());
  t_iii.erase(std::unique(t_iii.begin(), t_iii.end()), t_iii.end());

  nf.t_ii = RuleSet::make(t_ii);
  nf.t_iii = RuleSet::make(t_iii);
  std::vector<Rule> all = t_ii;
  all.insert(all.end(), t_iii.begin(), t_iii.end());
  nf.t_nf = RuleSet::make(std::move(all));
  return nf;
}

// ---------------------------------------------------------------------------
// Skeleton forest

SkeletonForest existential_skeleton(const ChaseRun& run) {
  for (const auto& [rel, arity] : run.theory.signature())
    if (arity > 2)
      throw PreconditionError("existential_skeleton requires a binary theory");
  SkeletonForest forest;
  std::set<Atom> skeleton_atoms = run.start.facts();
  std::vector<std::pair<Term, Term>> edges;  // (parent term, child term)
  std::map<Term, std::vector<Atom>> children_atoms;

  for (const auto& [atom, creation] : run.provenance) {
    if (!run.last().contains(atom)) continue;
    const Rule& rule = run.theory.rules[creation.rule_index];
    if (rule.datalog) continue;
    skeleton_atoms.insert(atom);
    if (rule.detached) {
      for (const auto& t : atom.args) forest.roots.insert(t);
      continue;
    }
    // Sensible binary rule: frontier-one. Parent is the frontier image.
    std::set<Term> fr;
    for (const auto& v : rule.frontier) fr.insert(creation.sigma.at(v));
    for (const auto& v : rule.dom_vars) fr.insert(creation.sigma.at(v));
    if (fr.size() != 1)
      throw InvariantError("existential_skeleton: sensible rule is not frontier-one");
    Term parent = *fr.begin();
    for (const auto& t : atom.args) {
      if (t == parent) continue;
      forest.parent_term.emplace(t, parent);
      edges.push_back({parent, t});
    }
    children_atoms[parent].push_back(atom);
  }
  for (const auto& t : run.start.domain()) forest.roots.insert(t);
  forest.skeleton = Instance(std::move(skeleton_atoms));

  // Out-degree bound: number of existential rules.
  std::size_t existential_rules = 0;
  for (const auto& r : run.theory.rules)
    if (!r.datalog) ++existential_rules;
  std::map<Term, std::set<Atom>> out_atoms;
  for (const auto& [parent, atoms] : children_atoms)
    for (const auto& a : atoms) out_atoms[parent].insert(a);
  for (const auto& [t, atoms] : out_atoms) {
    forest.max_out_degree = std::max(forest.max_out_degree, atoms.size());
    if (atoms.size() > existential_rules)
      throw InvariantError("existential_skeleton: out-degree exceeds the existential rule count");
  }

  // Trees: propagate roots along child links.
  for (const auto& r : forest.roots) forest.root_of[r] = r;
  bool changed = true;
  while (changed) {
    changed = false;
    for (const auto& [parent, child] : edges) {
      auto pit = forest.root_of.find(parent);
      if (pit == forest.root_of.end()) continue;
      auto cit = forest.root_of.find(child);
      if (cit == forest.root_of.end()) {
        forest.root_of[child] = pit->second;
        changed = true;
      }
    }
  }
  for (const auto& [parent, atoms] : children_atoms) {
    auto rit = forest.root_of.find(parent);
    if (rit == forest.root_of.end())
      throw InvariantError("existential_skeleton: sensible atom with an unrooted parent");
    for (const auto& a : atoms) forest.tree_atoms[rit->second].push_back(a);
  }
  for (auto& [root, atoms] : forest.tree_atoms) {
    std::sort(atoms.begin(), atoms.end());
    atoms.erase(std::unique(atoms.begin(), atoms.end()), atoms.end());
  }
  return forest;
}

AppAConstants compute_constants(const NormalizedTheory& nf) {
  AppAConstants c;
  std::set<std::string> nullary;
  for (const auto& [rel, arity] : nf.t_nf.signature())
    if (arity == 0) nullary.insert(rel);
  c.k = nullary.size();
  for (const auto& r : nf.t_nf.rules) c.h = std::max(c.h, r.body.size());
  c.n = nf.t_nf.rules.size();
  // Nodes of the full n-ary tree of depth h: sum_{i=0..h} n^i, saturating.
  std::uint64_t pow = 1, total = 0;
  for (std::size_t i = 0; i <= c.h; ++i) {
    if (total > UINT64_MAX - pow) {
      total = UINT64_MAX;
      break;
    }
    total += pow;
    if (c.n != 0 && pow > UINT64_MAX / c.n) {
      total = UINT64_MAX;
      break;
    }
    pow *= c.n == 0 ? 1 : c.n;
  }
  c.N = total;
  c.M = (c.N > UINT64_MAX / 2 ? UINT64_MAX : c.N * c.h + c.k * c.h);
  return c;
}

// ---------------------------------------------------------------------------
// Ancestor traces

namespace {

std::vector<Atom> sigma_body(const Rule& rule, const Subst& sigma) {
  std::vector<Atom> out;
  for (const auto& a : rule.body) out.push_back(apply_subst(a, sigma));
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

// All parent candidates per created atom: every (rule, sigma) application
// against the stage before the atom's birth that produces it.
std::map<Atom, std::vector<std::vector<Atom>>> creators_by_atom(const ChaseRun& run) {
  std::map<Atom, std::vector<std::vector<Atom>>> out;
  for (std::size_t s = 1; s < run.stages.size(); ++s) {
    const Instance& prev = run.stages[s - 1];
    for (std::size_t r = 0; r < run.theory.rules.size(); ++r) {
      const Rule& rule = run.theory.rules[r];
      auto skolemized = skolemize_head(rule);
      for (const auto& sigma : hom_matches(rule, prev)) {
        for (const auto& tmpl : skolemized) {
          Atom atom = apply_subst(tmpl, sigma);
          auto prov = run.provenance.find(atom);
          if (prov == run.provenance.end() || prov->second.stage != s) continue;
          out[atom].push_back(sigma_body(rule, sigma));
        }
      }
    }
  }
  for (auto& [atom, parents] : out) {
    std::sort(parents.begin(), parents.end());
    parents.erase(std::unique(parents.begin(), parents.end()), parents.end());
  }
  return out;
}

}  // namespace

AncestorTrace canonical_trace(const ChaseRun& run) {
  AncestorTrace trace;
  for (const auto& [atom, creation] : run.provenance)
    trace.parent.emplace(atom, sigma_body(run.theory.rules[creation.rule_index], creation.sigma));
  return trace;
}

AncestorTrace random_trace(const ChaseRun& run, std::uint64_t seed) {
  auto creators = creators_by_atom(run);
  std::mt19937_64 rng(seed);
  AncestorTrace trace;
  for (const auto& [atom, options] : creators) {
    std::uniform_int_distribution<std::size_t> pick(0, options.size() - 1);
    trace.parent.emplace(atom, options[pick(rng)]);
  }
  return trace;
}

std::map<Atom, std::set<Atom>> AncestorTrace::ancestors(const Instance& start) const {
  std::map<Atom, std::set<Atom>> memo;
  std::function<const std::set<Atom>&(const Atom&)> anc = [&](const Atom& a) -> const std::set<Atom>& {
    auto it = memo.find(a);
    if (it != memo.end()) return it->second;
    std::set<Atom> s;
    if (start.contains(a)) {
      s.insert(a);
    } else {
      auto pit = parent.find(a);
      if (pit != parent.end())
        for (const auto& p : pit->second) {
          const auto& ps = anc(p);
          s.insert(ps.begin(), ps.end());
        }
    }
    return memo.emplace(a, std::move(s)).first->second;
  };
  for (const auto& [a, ps] : parent) anc(a);
  return memo;
}

AncestorReport ancestor_probe(const ChaseRun& run, const SkeletonForest& forest,
                              const AncestorTrace& trace) {
  auto anc = trace.ancestors(run.start);
  AncestorReport rep;
  for (const auto& [root, atoms] : forest.tree_atoms) {
    std::set<Atom> u;
    for (const auto& a : atoms) {
      auto it = anc.find(a);
      if (it != anc.end()) u.insert(it->second.begin(), it->second.end());
    }
    rep.per_root[root] = u.size();
    rep.max_count = std::max(rep.max_count, u.size());
  }
  return rep;
}

}  // namespace tmqa
