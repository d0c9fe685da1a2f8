#include "tmqa/chase.hpp"

#include <algorithm>

#include "tmqa/homo.hpp"

namespace tmqa {

std::vector<Subst> hom_matches(const Rule& rule, const Instance& inst) {
  AtomIndex index(inst);
  std::vector<Subst> body_matches = match_all(rule.body, {}, index);
  if (rule.dom_vars.empty()) return body_matches;
  // Extend every body match over all active-domain choices.
  std::vector<Subst> out;
  for (const auto& base : body_matches) {
    std::vector<Subst> partial{base};
    for (const auto& v : rule.dom_vars) {
      std::vector<Subst> next;
      for (const auto& s : partial)
        for (const auto& t : inst.domain()) {
          Subst e = s;
          e.emplace(v, t);
          next.push_back(std::move(e));
        }
      partial = std::move(next);
    }
    for (auto& s : partial) out.push_back(std::move(s));
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<Atom> apply(const Rule& rule, const Subst& sigma) {
  for (const auto& v : rule.body_vars)
    if (!sigma.count(v)) throw PreconditionError("apply: substitution misses body variable " + v);
  for (const auto& v : rule.dom_vars)
    if (!sigma.count(v))
      throw PreconditionError("apply: substitution misses active-domain variable " + v);
  std::vector<Atom> out;
  for (const auto& a : skolemize_head(rule)) {
    Atom img = apply_subst(a, sigma);
    if (!img.ground()) throw InvariantError("apply: non-ground atom produced: " + img.text());
    out.push_back(std::move(img));
  }
  return out;
}

namespace {

struct StepDelta {
  std::set<Atom> atoms;
  std::vector<std::pair<Atom, Creation>> creations;  // in canonical creator order
};

StepDelta step_delta(const RuleSet& theory, const Instance& inst,
                     const std::vector<std::vector<Atom>>& skolemized) {
  StepDelta delta;
  std::set<Atom> recorded;
  for (std::size_t r = 0; r < theory.rules.size(); ++r) {
    const Rule& rule = theory.rules[r];
    for (const auto& sigma : hom_matches(rule, inst)) {
      for (const auto& tmpl : skolemized[r]) {
        Atom atom = apply_subst(tmpl, sigma);
        if (inst.contains(atom)) continue;
        delta.atoms.insert(atom);
        if (recorded.insert(atom).second)
          delta.creations.push_back({atom, Creation{r, sigma, 0}});
      }
    }
  }
  return delta;
}

std::vector<std::vector<Atom>> skolemize_all(const RuleSet& theory) {
  std::vector<std::vector<Atom>> out;
  out.reserve(theory.rules.size());
  for (const auto& r : theory.rules) out.push_back(skolemize_head(r));
  return out;
}

}  // namespace

Instance chase_step(const RuleSet& theory, const Instance& inst) {
  auto skolemized = skolemize_all(theory);
  StepDelta delta = step_delta(theory, inst, skolemized);
  std::set<Atom> facts = inst.facts();
  facts.insert(delta.atoms.begin(), delta.atoms.end());
  return Instance(std::move(facts));
}

ChaseRun chase_to(const RuleSet& theory, const Instance& start, std::size_t depth,
                  const ChaseOptions& opts) {
  ChaseRun run;
  run.theory = theory;
  run.start = start;
  run.stages.push_back(start);
  auto skolemized = skolemize_all(theory);
  for (std::size_t i = 0; i < depth; ++i) {
    StepDelta delta = step_delta(theory, run.stages.back(), skolemized);
    if (delta.atoms.empty()) {
      run.saturated = true;
      break;
    }
    std::set<Atom> facts = run.stages.back().facts();
    facts.insert(delta.atoms.begin(), delta.atoms.end());
    if (facts.size() > opts.max_atoms)
      throw BudgetError("chase_to: atom cap exceeded at stage " + std::to_string(i + 1) + " (" +
                        std::to_string(facts.size()) + " atoms)");
    run.stages.push_back(Instance(std::move(facts)));
    for (auto& [atom, creation] : delta.creations) {
      if (run.provenance.count(atom)) continue;
      creation.stage = run.stages.size() - 1;
      run.provenance.emplace(atom, std::move(creation));
    }
  }
  return run;
}

namespace {

std::optional<std::size_t> entails_in_stages(const ChaseRun& run, const ConjunctiveQuery& q,
                                             const std::vector<Term>& args, std::size_t depth) {
  if (args.size() != q.free_vars.size())
    throw PreconditionError("entails: argument tuple length does not match the free tuple");
  Subst seed;
  for (std::size_t i = 0; i < args.size(); ++i) {
    auto it = seed.find(q.free_vars[i]);
    if (it != seed.end()) {
      if (!(it->second == args[i])) return std::nullopt;  // repeated free var, unequal args
    } else {
      seed.emplace(q.free_vars[i], args[i]);
    }
  }
  std::size_t upto = std::min(depth, run.depth());
  for (std::size_t d = 0; d <= upto; ++d) {
    AtomIndex index(run.stages[d]);
    if (match_first(q.body, seed, index)) return d;
  }
  return std::nullopt;
}

}  // namespace

std::optional<std::size_t> entails(const ChaseRun& run, const ConjunctiveQuery& q,
                                   const std::vector<Term>& args, std::size_t depth) {
  return entails_in_stages(run, q, args, depth);
}

std::optional<std::size_t> entails(const RuleSet& theory, const Instance& inst,
                                   const ConjunctiveQuery& q, const std::vector<Term>& args,
                                   std::size_t depth, const ChaseOptions& opts) {
  for (const auto& a : args)
    if (!inst.contains_term(a))
      throw PreconditionError("entails: argument not in the instance domain: " + a.text());
  ChaseRun run = chase_to(theory, inst, depth, opts);
  return entails_in_stages(run, q, args, depth);
}

BirthRecord birth_atom(const ChaseRun& run, const Term& t) {
  if (!t.is_skolem()) {
    if (run.start.contains_term(t))
      throw PreconditionError("birth_atom: term is an original constant: " + t.text());
    throw PreconditionError("birth_atom: not a Skolem term: " + t.text());
  }
  if (run.start.contains_term(t))
    throw PreconditionError("birth_atom: term originates in the start instance: " + t.text());
  if (!run.last().contains_term(t))
    throw PreconditionError("birth_atom: term absent from the run: " + t.text());

  std::vector<std::pair<Atom, std::set<Term>>> candidates;
  for (const auto& atom : run.last().facts()) {
    if (std::find(atom.args.begin(), atom.args.end(), t) == atom.args.end()) continue;
    auto prov = run.provenance.find(atom);
    if (prov == run.provenance.end()) continue;  // original atom
    const Creation& cr = prov->second;
    const Rule& rule = run.theory.rules[cr.rule_index];
    std::set<Term> fr;
    for (const auto& v : rule.frontier) fr.insert(cr.sigma.at(v));
    for (const auto& v : rule.dom_vars) fr.insert(cr.sigma.at(v));
    if (fr.count(t)) continue;  // t only enters through the frontier here
    candidates.push_back({atom, std::move(fr)});
  }
  if (candidates.empty())
    throw InvariantError("birth_atom: no birth atom found for " + t.text());
  BirthRecord rec;
  rec.term = t;
  rec.birth_atom = candidates.front().first;  // facts() iterates canonically
  rec.frontier_terms = candidates.front().second;
  rec.ambiguous = candidates.size() > 1;
  return rec;
}

bool subchase_equal(const RuleSet& theory, const Instance& D, const Instance& F,
                    std::size_t depth, const ChaseOptions& opts) {
  if (!D.subset_of(F)) throw PreconditionError("subchase_equal: D is not a subset of F");
  ChaseRun runD = chase_to(theory, D, depth, opts);
  std::size_t offset = 0;
  while (!F.subset_of(runD.stage(offset))) {
    if (offset >= runD.depth() && !F.subset_of(runD.last()))
      throw PreconditionError("subchase_equal: F is not inside Ch_depth(D)");
    ++offset;
  }
  ChaseRun runF = chase_to(theory, F, depth, opts);
  ChaseRun runD2 = offset == 0 ? runD : chase_to(theory, D, depth + offset, opts);
  bool forward = runF.stage(depth).subset_of(runD2.stage(depth + offset));
  bool backward = runD.stage(depth).subset_of(runF.stage(depth));
  return forward && backward;
}

}  // namespace tmqa
