#include "tmqa/analysis.hpp"

#include <algorithm>

namespace tmqa {

std::vector<Instance> islands(const Instance& D, std::size_t l, const AnalysisOptions& opts) {
  std::vector<Atom> facts(D.facts().begin(), D.facts().end());
  std::size_t n = facts.size();
  // Count sum_{i<=l} C(n,i) with an early cap.
  double count = 0;
  double binom = 1;
  for (std::size_t i = 0; i <= std::min(l, n); ++i) {
    count += binom;
    binom = binom * static_cast<double>(n - i) / static_cast<double>(i + 1);
    if (count > static_cast<double>(opts.island_cap))
      throw BudgetError("islands: combinatorial cap exceeded");
  }
  std::vector<Instance> out;
  std::vector<std::size_t> pick;
  std::function<void(std::size_t)> rec = [&](std::size_t start) {
    std::set<Atom> subset;
    for (std::size_t i : pick) subset.insert(facts[i]);
    out.push_back(Instance(std::move(subset)));
    if (pick.size() == l) return;
    for (std::size_t i = start; i < n; ++i) {
      pick.push_back(i);
      rec(i + 1);
      pick.pop_back();
    }
  };
  rec(0);
  return out;
}

ProbeReport locality_refute(const RuleSet& theory, const LocalityParams& params,
                            const Instance& D, const AnalysisOptions& opts) {
  ProbeReport report;
  if (params.degree_bound) {
    std::size_t deg = gaifman_degree(D);
    report.notes.push_back("instance degree " + std::to_string(deg) + ", bound " +
                           std::to_string(*params.degree_bound));
    if (deg > *params.degree_bound)
      throw PreconditionError("locality_refute: instance degree exceeds the declared bound");
  }
  ChaseRun big = chase_to(theory, D, params.probe_depth, opts.chase);
  std::set<Atom> island_union;
  for (const auto& island : islands(D, params.l, opts)) {
    ChaseRun run = chase_to(theory, island, params.probe_depth, opts.chase);
    for (const auto& a : run.last().facts()) island_union.insert(a);
  }
  // Islands are subsets and Skolem naming aligns, so the union is a subset.
  for (const auto& a : island_union)
    if (!big.last().contains(a))
      throw InvariantError("locality probe: island union atom outside Ch(D): " + a.text());
  for (const auto& a : big.last().facts()) {
    if (!island_union.count(a)) {
      report.verdict = ProbeReport::Verdict::Refuted;
      report.witness = Witness{D, a, "atom of Ch_depth(D) missing from every island chase"};
      break;
    }
  }
  return report;
}

DistancingReport distancing_probe(const RuleSet& theory, const Instance& D,
                                  const std::vector<std::pair<Term, Term>>& pairs,
                                  std::size_t depth, const AnalysisOptions& opts) {
  for (const auto& [a, b] : pairs)
    if (!D.contains_term(a) || !D.contains_term(b))
      throw PreconditionError("distancing_probe: pair terms must be in dom(D)");
  ChaseRun run = chase_to(theory, D, depth, opts.chase);
  DistancingReport rep;
  for (const auto& [a, b] : pairs) {
    DistancePair p;
    p.a = a;
    p.b = b;
    p.dist_instance = gaifman_distance(D, a, b);
    p.dist_chase = gaifman_distance(run.last(), a, b);
    if (p.dist_instance && p.dist_chase && *p.dist_chase > 0)
      p.ratio = static_cast<double>(*p.dist_instance) / static_cast<double>(*p.dist_chase);
    rep.max_ratio = std::max(rep.max_ratio, p.ratio);
    rep.pairs.push_back(std::move(p));
  }
  rep.probe.constants_estimated["d_R_lower_bound"] = {rep.max_ratio, depth};
  if (rep.max_ratio > 1.0) {
    rep.probe.verdict = ProbeReport::Verdict::Refuted;  // distancing with d=1 refuted
    rep.probe.notes.push_back("chase distance undercuts instance distance");
  }
  return rep;
}

std::vector<EnoughVerdict> check_enough(
    const RuleSet& theory, const Instance& D, std::size_t n,
    const std::vector<std::pair<ConjunctiveQuery, std::vector<Term>>>& queries, std::size_t depth,
    const AnalysisOptions& opts) {
  if (depth < n) throw PreconditionError("check_enough: depth must be >= n");
  ChaseRun run = chase_to(theory, D, depth, opts.chase);
  std::vector<EnoughVerdict> out;
  for (const auto& [q, args] : queries) {
    auto d = entails(run, q, args, depth);
    if (!d)
      out.push_back(EnoughVerdict::Unknown);
    else
      out.push_back(*d <= n ? EnoughVerdict::True : EnoughVerdict::False);
  }
  return out;
}

CDResult compute_C_D(const RuleSet& theory, const Instance& D, std::size_t l, std::size_t depth,
                     const AnalysisOptions& opts) {
  CDResult res;
  std::set<Atom> atoms;
  for (const auto& island : islands(D, l, opts)) {
    auto core = core_retract(theory, island, depth, opts.core);
    if (!core)
      throw BudgetError("compute_C_D: island core not found within depth: " +
                        std::to_string(island.size()) + " atoms");
    for (const auto& a : core->core.facts()) atoms.insert(a);
    res.max_island_c = std::max(res.max_island_c, core->c_value);
  }
  res.cd = Instance(std::move(atoms));
  ChaseRun run = chase_to(theory, D, depth, opts.chase);
  std::size_t k = 0;
  while (!res.cd.subset_of(run.stage(k))) {
    ++k;
    if (k > run.depth())
      throw InvariantError("compute_C_D: union of island cores not inside Ch_depth(D)");
  }
  res.observed_k = k;
  return res;
}

BannedResult banned_restrict(const RuleSet& theory, const Instance& D, const Instance& F,
                             std::size_t depth, const AnalysisOptions& opts) {
  if (!F.subset_of(D)) throw PreconditionError("banned_restrict: F must be a subset of D");
  BannedResult res;
  if (!F.empty() || !F.domain().empty()) {
    auto core = core_retract(theory, F, depth, opts.core);
    if (!core) throw BudgetError("banned_restrict: no core for F within depth");
    ChaseRun runF = chase_to(theory, F, depth, opts.chase);
    for (const auto& t : runF.last().domain())
      if (!core->core.contains_term(t)) res.banned.insert(t);
  }
  ChaseRun runD = chase_to(theory, D, depth, opts.chase);
  std::set<Atom> kept;
  for (const auto& a : runD.last().facts()) {
    bool touches_banned = false;
    for (const auto& t : a.args)
      if (res.banned.count(t)) touches_banned = true;
    if (!touches_banned) kept.insert(a);
  }
  res.m_f = Instance(std::move(kept));
  res.model = is_model(res.m_f, theory);
  return res;
}

UbddReport ubdd_probe(const RuleSet& theory, const std::vector<Instance>& instances,
                      std::size_t depth, const AnalysisOptions& opts) {
  UbddReport rep;
  for (const auto& inst : instances) {
    auto core = core_retract(theory, inst, depth, opts.core);
    if (!core) throw BudgetError("ubdd_probe: no core within depth for an instance");
    UbddEntry e;
    e.instance = inst;
    e.c = core->c_value;
    rep.max_c = std::max(rep.max_c, e.c);
    rep.entries.push_back(std::move(e));
  }
  return rep;
}

std::size_t estimate_n_at(const RuleSet& theory, const std::vector<Instance>& instances,
                          std::size_t depth, const AnalysisOptions& opts) {
  std::size_t n_at = 0;
  for (const auto& inst : instances) {
    ChaseRun run = chase_to(theory, inst, depth, opts.chase);
    for (const auto& [atom, creation] : run.provenance) {
      std::size_t terms_at = 0;
      for (const auto& t : atom.args) {
        std::size_t s = 0;
        while (!run.stage(s).contains_term(t)) {
          ++s;
          if (s > run.depth()) throw InvariantError("estimate_n_at: term never appears");
        }
        terms_at = std::max(terms_at, s);
      }
      n_at = std::max(n_at, creation.stage - terms_at);
    }
  }
  return n_at;
}

RuleSet make_connected(const RuleSet& theory) {
  std::vector<Rule> rules;
  for (const auto& r : theory.rules) {
    std::set<std::string> taken = r.body_vars;
    for (const auto& v : r.head_vars) taken.insert(v);
    std::string fresh = "x_cc";
    for (int i = 0; taken.count(fresh); ++i) fresh = "x_cc" + std::to_string(i);
    auto widen = [&](const Atom& a) {
      Atom out;
      out.relation = a.relation;
      out.args.push_back(Term::variable(fresh));
      for (const auto& t : a.args) out.args.push_back(t);
      return out;
    };
    std::vector<Atom> body, head;
    for (const auto& a : r.body) body.push_back(widen(a));
    for (const auto& a : r.head) head.push_back(widen(a));
    std::set<std::string> dom = r.dom_vars;
    if (r.body.empty()) dom.insert(fresh);  // keep the fresh variable bound
    rules.push_back(Rule::make(std::move(body), std::move(head), std::move(dom)));
  }
  return RuleSet::make(std::move(rules));
}

std::size_t gaifman_degree(const Instance& inst) {
  std::map<Term, std::set<Term>> adj;
  for (const auto& f : inst.facts())
    for (std::size_t i = 0; i < f.args.size(); ++i)
      for (std::size_t j = i + 1; j < f.args.size(); ++j)
        if (!(f.args[i] == f.args[j])) {
          adj[f.args[i]].insert(f.args[j]);
          adj[f.args[j]].insert(f.args[i]);
        }
  std::size_t deg = 0;
  for (const auto& [t, ns] : adj) deg = std::max(deg, ns.size());
  return deg;
}

}  // namespace tmqa
