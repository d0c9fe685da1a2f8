#include "tmqa/rewriter.hpp"

#include <algorithm>
#include <map>

#include "tmqa/homo.hpp"

namespace tmqa {

bool RewriteSet::member(const ConjunctiveQuery& q) const {
  std::string key = query_key(canonicalize(q));
  for (const auto& m : queries)
    if (query_key(m) == key) return true;
  return false;
}

// ---------------------------------------------------------------------------
// Head splitting

SplitTheory split_heads(const RuleSet& theory) {
  SplitTheory out;
  std::vector<Rule> rules;
  for (std::size_t i = 0; i < theory.rules.size(); ++i) {
    const Rule& r = theory.rules[i];
    if (r.head.size() <= 1) {
      rules.push_back(r);
      continue;
    }
    std::string aux = "_aux" + std::to_string(i);
    out.aux_relations.insert(aux);
    // Aux head variables: frontier, dom vars, existentials, in sorted order.
    std::vector<std::string> vars;
    for (const auto& v : r.frontier) vars.push_back(v);
    for (const auto& v : r.dom_vars) vars.push_back(v);
    for (const auto& v : r.existentials) vars.push_back(v);
    std::sort(vars.begin(), vars.end());
    Atom aux_atom;
    aux_atom.relation = aux;
    for (const auto& v : vars) aux_atom.args.push_back(Term::variable(v));
    rules.push_back(Rule::make(r.body, {aux_atom}, r.dom_vars));
    for (const auto& h : r.head) rules.push_back(Rule::make({aux_atom}, {h}));
  }
  out.rules = RuleSet::make(std::move(rules));
  return out;
}

// ---------------------------------------------------------------------------
// One-step piece rewriting

namespace {

struct UnionFind {
  std::map<std::string, std::string> parent;
  const std::string& find(const std::string& x) {
    auto it = parent.find(x);
    if (it == parent.end()) {
      parent.emplace(x, x);
      return parent.find(x)->first;
    }
    if (it->second == x) return it->first;
    std::string root = find(it->second);
    parent[x] = root;
    return parent.find(x)->second;
  }
  void unite(const std::string& a, const std::string& b) {
    std::string ra = find(a), rb = find(b);
    if (ra != rb) parent[ra] = rb;
  }
};

std::string fresh_name(std::set<std::string>& taken, const std::string& base) {
  for (int i = 1;; ++i) {
    std::string cand = base + std::to_string(i);
    if (taken.insert(cand).second) return cand;
  }
}

}  // namespace

std::vector<ConjunctiveQuery> one_step_rewrites(
    const ConjunctiveQuery& q, const Rule& rule,
    const std::map<std::string, std::size_t>& signature) {
  if (rule.head.size() != 1)
    throw PreconditionError("one_step_rewrites requires a single-head rule; split first");
  const Atom& head = rule.head[0];

  std::vector<std::size_t> candidates;
  for (std::size_t i = 0; i < q.body.size(); ++i)
    if (q.body[i].relation == head.relation && q.body[i].arity() == head.arity())
      candidates.push_back(i);
  if (candidates.empty()) return {};
  if (candidates.size() > 16)
    throw BudgetError("one_step_rewrites: too many unifiable atoms");

  std::set<std::string> free(q.free_vars.begin(), q.free_vars.end());
  std::set<std::string> qvars = q.variables();
  // Occurrence counts per atom index, to detect variables local to S.
  std::map<std::string, std::set<std::size_t>> occurs_in;
  for (std::size_t i = 0; i < q.body.size(); ++i)
    for (const auto& t : q.body[i].args)
      if (t.is_variable()) occurs_in[t.name()].insert(i);

  std::vector<ConjunctiveQuery> results;
  std::size_t nsubsets = std::size_t{1} << candidates.size();
  for (std::size_t mask = 1; mask < nsubsets; ++mask) {
    std::vector<std::size_t> S;
    for (std::size_t b = 0; b < candidates.size(); ++b)
      if (mask & (std::size_t{1} << b)) S.push_back(candidates[b]);

    // Union query-side keys ("q:<var>" / "c:<const>") with head keys ("h:<var>").
    UnionFind uf;
    bool feasible = true;
    for (std::size_t idx : S) {
      const Atom& atom = q.body[idx];
      for (std::size_t p = 0; p < atom.args.size() && feasible; ++p) {
        const Term& t = atom.args[p];
        const Term& h = head.args[p];
        std::string qkey = t.is_variable() ? "q:" + t.name() : "c:" + t.text();
        std::string hkey = "h:" + h.name();
        uf.unite(qkey, hkey);
      }
    }
    if (!feasible) continue;

    // Gather class members.
    std::map<std::string, std::vector<std::string>> classes;
    for (const auto& [key, _] : uf.parent) classes[uf.find(key)].push_back(key);

    bool ok = true;
    std::set<std::size_t> Sset(S.begin(), S.end());
    std::map<std::string, Term> head_to_rep;  // head var -> representative term
    Subst theta;                              // query var -> representative term

    for (auto& [root, members] : classes) {
      std::vector<std::string> consts, q_members, h_frontier, h_exist;
      for (const auto& m : members) {
        if (m[0] == 'c')
          consts.push_back(m.substr(2));
        else if (m[0] == 'q')
          q_members.push_back(m.substr(2));
        else {
          std::string hv = m.substr(2);
          if (rule.existentials.count(hv))
            h_exist.push_back(hv);
          else
            h_frontier.push_back(hv);
        }
      }
      std::sort(consts.begin(), consts.end());
      consts.erase(std::unique(consts.begin(), consts.end()), consts.end());
      std::sort(q_members.begin(), q_members.end());
      if (consts.size() > 1) {
        ok = false;
        break;
      }
      if (!h_exist.empty()) {
        std::sort(h_exist.begin(), h_exist.end());
        h_exist.erase(std::unique(h_exist.begin(), h_exist.end()), h_exist.end());
        // Existential positions never equal distinct Skolem functions, frontier
        // values (occurs-check) or constants, and may only bind bound query
        // variables with no occurrence outside S.
        if (h_exist.size() > 1 || !h_frontier.empty() || !consts.empty()) {
          ok = false;
          break;
        }
        for (const auto& v : q_members) {
          if (free.count(v)) {
            ok = false;
            break;
          }
          for (std::size_t at : occurs_in[v])
            if (!Sset.count(at)) {
              ok = false;
              break;
            }
          if (!ok) break;
        }
        if (!ok) break;
      }
      // Representative: constant, else least free variable, else least query var.
      Term rep = Term::variable("");
      if (!consts.empty()) {
        rep = Term::constant(consts[0]);
      } else {
        std::string pick;
        for (const auto& v : q_members)
          if (free.count(v) && (pick.empty() || v < pick)) pick = v;
        if (pick.empty())
          for (const auto& v : q_members)
            if (pick.empty() || v < pick) pick = v;
        if (pick.empty()) {
          // Class with only head variables cannot arise: every union pairs a
          // head position with a query term.
          ok = false;
          break;
        }
        rep = Term::variable(pick);
      }
      for (const auto& v : q_members) theta.emplace(v, rep);
      for (const auto& m : members)
        if (m[0] == 'h') head_to_rep.emplace(m.substr(2), rep);
    }
    if (!ok) continue;

    // Build the result: theta over the kept atoms plus the rule body with
    // frontier variables replaced by representatives and other body variables
    // renamed fresh.
    std::set<std::string> taken = qvars;
    for (const auto& [v, rep] : theta)
      if (rep.is_variable()) taken.insert(rep.name());
    Subst body_subst;
    for (const auto& v : rule.body_vars) {
      if (rule.frontier.count(v)) {
        body_subst.emplace(v, head_to_rep.at(v));
      } else {
        body_subst.emplace(v, Term::variable(fresh_name(taken, "w")));
      }
    }

    std::vector<Atom> atoms;
    for (std::size_t i = 0; i < q.body.size(); ++i)
      if (!Sset.count(i)) atoms.push_back(apply_subst(q.body[i], theta));
    for (const auto& b : rule.body) atoms.push_back(apply_subst(b, body_subst));

    // Free tuple with unified names.
    std::vector<std::string> new_free;
    for (const auto& f : q.free_vars) {
      auto it = theta.find(f);
      if (it != theta.end() && it->second.is_variable())
        new_free.push_back(it->second.name());
      else if (it != theta.end())
        new_free.push_back(f);  // free var unified with a constant: keep name, add guard below
      else
        new_free.push_back(f);
    }

    // Variables that must occur in the body but no longer do: free variables
    // and representatives of active-domain head variables. Such occurrences
    // are reintroduced by expanding one atom over the signature.
    std::set<std::string> present;
    for (const auto& a : atoms)
      for (const auto& t : a.args)
        if (t.is_variable()) present.insert(t.name());

    std::set<Term> missing;
    for (const auto& f : new_free)
      if (!present.count(f)) missing.insert(Term::variable(f));
    for (const auto& dv : rule.dom_vars) {
      auto it = head_to_rep.find(dv);
      if (it == head_to_rep.end()) continue;
      const Term& rep = it->second;
      bool occurs;
      if (rep.is_variable()) {
        occurs = present.count(rep.name()) > 0;
      } else {
        occurs = false;
        for (const auto& a : atoms)
          for (const auto& t : a.args)
            if (t == rep) occurs = true;
      }
      // Active-domain membership must survive as an occurrence in some atom.
      if (!occurs) missing.insert(rep);
    }
    // Free variables unified with constants cannot be expressed in a CQ whose
    // answers range over arbitrary tuples; skip such rewritings.
    bool const_free_clash = false;
    for (const auto& f : q.free_vars) {
      auto it = theta.find(f);
      if (it != theta.end() && !it->second.is_variable()) const_free_clash = true;
    }
    if (const_free_clash) continue;

    if (missing.size() > 2) continue;  // combinatorial guard; not seen in practice

    std::vector<std::vector<Atom>> expansions{{}};
    for (const auto& v : missing) {
      std::vector<std::vector<Atom>> next;
      for (const auto& base : expansions) {
        for (const auto& [rel, arity] : signature) {
          for (std::size_t p = 0; p < arity; ++p) {
            Atom guard;
            guard.relation = rel;
            std::set<std::string> taken2 = taken;
            for (std::size_t j = 0; j < arity; ++j)
              guard.args.push_back(j == p ? v : Term::variable(fresh_name(taken2, "w")));
            auto ext = base;
            ext.push_back(guard);
            next.push_back(std::move(ext));
          }
        }
      }
      expansions = std::move(next);
    }

    for (const auto& extra : expansions) {
      std::vector<Atom> full = atoms;
      full.insert(full.end(), extra.begin(), extra.end());
      if (full.empty()) continue;
      try {
        results.push_back(canonicalize(ConjunctiveQuery::make(new_free, std::move(full))));
      } catch (const PreconditionError&) {
        // e.g. a free variable still absent; drop this candidate
      }
    }
  }

  // Dedup by canonical key.
  std::map<std::string, ConjunctiveQuery> dedup;
  for (auto& r : results) dedup.emplace(query_key(r), std::move(r));
  std::vector<ConjunctiveQuery> out;
  for (auto& [k, v] : dedup) out.push_back(std::move(v));
  return out;
}

// ---------------------------------------------------------------------------
// Fixpoint closure

namespace {

bool mentions_any(const ConjunctiveQuery& q, const std::set<std::string>& relations) {
  for (const auto& a : q.body)
    if (relations.count(a.relation)) return true;
  return false;
}

}  // namespace

RewriteSet rewrite(const RuleSet& theory, const ConjunctiveQuery& q, const RewriteOptions& opts) {
  if (opts.fuel < 1) throw PreconditionError("rewrite: fuel must be >= 1");
  SplitTheory split = split_heads(theory);
  auto signature = theory.signature();
  for (const auto& a : q.body) {
    auto [it, fresh] = signature.emplace(a.relation, a.arity());
    if (!fresh && it->second != a.arity())
      throw PreconditionError("rewrite: query arity clashes with the theory signature for " +
                              a.relation);
  }

  ConjunctiveQuery q0 = canonicalize(q);
  std::map<std::string, ConjunctiveQuery> alive;  // key -> query (survivors)
  std::set<std::string> seen;                     // all keys ever produced
  alive.emplace(query_key(q0), q0);
  seen.insert(query_key(q0));
  std::vector<ConjunctiveQuery> frontier{q0};

  RewriteSet rs;
  rs.complete = false;

  std::size_t round = 0;
  for (; round < opts.fuel; ++round) {
    std::vector<ConjunctiveQuery> produced;
    for (const auto& src : frontier) {
      for (const auto& rule : split.rules.rules) {
        for (auto& cand : one_step_rewrites(src, rule, signature)) {
          std::string key = query_key(cand);
          if (seen.count(key)) continue;
          seen.insert(key);
          produced.push_back(std::move(cand));
        }
      }
    }
    if (produced.empty()) {
      rs.complete = true;
      break;
    }
    if (seen.size() > opts.max_queries)
      throw BudgetError("rewrite: explored set exceeds max_queries");

    // Containment minimization over survivors plus the new queries.
    std::vector<ConjunctiveQuery> pool;
    pool.reserve(alive.size() + produced.size());
    for (const auto& [k, v] : alive) pool.push_back(v);
    for (const auto& p : produced) pool.push_back(p);
    auto kept = minimize_ucq(std::move(pool));

    std::map<std::string, ConjunctiveQuery> next_alive;
    std::vector<ConjunctiveQuery> next_frontier;
    for (auto& k : kept) {
      std::string key = query_key(k);
      bool is_new = !alive.count(key);
      next_alive.emplace(key, k);
      if (is_new) next_frontier.push_back(k);
    }
    alive = std::move(next_alive);
    frontier = std::move(next_frontier);
    if (frontier.empty()) {
      rs.complete = true;
      ++round;
      break;
    }
  }
  rs.fuel_used = round;

  // Final set: queries over the original signature only, minimized.
  std::vector<ConjunctiveQuery> finals;
  for (const auto& [k, v] : alive)
    if (!mentions_any(v, split.aux_relations)) finals.push_back(v);
  rs.queries = minimize_ucq(std::move(finals));
  rs.rs_value = 0;
  for (const auto& m : rs.queries) rs.rs_value = std::max(rs.rs_value, m.size());
  return rs;
}

bool unique_up_to_iso(const RewriteSet& a, const RewriteSet& b) {
  if (!a.complete || !b.complete)
    throw PreconditionError("unique_up_to_iso: both rewrite sets must be complete");
  if (a.queries.size() != b.queries.size()) return false;
  auto covered = [](const ConjunctiveQuery& x, const std::vector<ConjunctiveQuery>& ys) {
    for (const auto& y : ys)
      if (cq_contains(x, y) && cq_contains(y, x)) return true;
    return false;
  };
  for (const auto& x : a.queries)
    if (!covered(x, b.queries)) return false;
  for (const auto& y : b.queries)
    if (!covered(y, a.queries)) return false;
  return true;
}

}  // namespace tmqa
