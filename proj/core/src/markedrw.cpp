#include "tmqa/markedrw.hpp"

#include <algorithm>
#include <functional>
#include <queue>

#include "tmqa/homo.hpp"

namespace tmqa {

LevelMap rd_levels() { return {{"G", 1}, {"R", 2}}; }

LevelMap sigma_levels(int K) {
  LevelMap m;
  for (int k = 1; k <= K; ++k) m["I" + std::to_string(k)] = k;
  return m;
}

namespace {

int level_of(const LevelMap& levels, const std::string& rel) {
  auto it = levels.find(rel);
  if (it == levels.end())
    throw PreconditionError("relation outside the marked-query signature: " + rel);
  return it->second;
}

int max_level(const LevelMap& levels) {
  int K = 0;
  for (const auto& [rel, lvl] : levels) K = std::max(K, lvl);
  return K;
}

void check_signature(const std::vector<Atom>& atoms, const LevelMap& levels) {
  for (const auto& a : atoms) {
    level_of(levels, a.relation);
    if (a.arity() != 2)
      throw PreconditionError("marked queries are over binary relations, got " + a.text());
    for (const auto& t : a.args)
      if (!t.is_variable())
        throw PreconditionError("marked queries are constant-free, got " + a.text());
  }
}

// Properness conditions (i)-(iii) per relation, plus the adjacent-levels
// condition (iv) for unmarked variables (vacuous at K = 2).
bool check_properly_marked(const std::vector<Atom>& atoms, const std::set<std::string>& marked,
                           const LevelMap& levels) {
  auto is_marked = [&](const Term& t) { return marked.count(t.name()) > 0; };
  // (i) edge into a marked target has a marked source.
  for (const auto& a : atoms)
    if (is_marked(a.args[1]) && !is_marked(a.args[0])) return false;
  // (ii) every directed cycle is fully marked: an unmarked variable must not
  // lie on a cycle. Unmarked targets of unmarked sources stay unmarked, so it
  // suffices to find a cycle within the unmarked subgraph.
  {
    std::map<std::string, std::vector<std::string>> succ;
    std::set<std::string> unmarked;
    for (const auto& a : atoms) {
      const std::string s = a.args[0].name(), t = a.args[1].name();
      if (!marked.count(s) && !marked.count(t)) succ[s].push_back(t);
      for (const auto& v : {s, t})
        if (!marked.count(v)) unmarked.insert(v);
    }
    // DFS cycle detection on the unmarked subgraph. A cycle with any marked
    // variable would force all its variables marked via (i), so a cycle
    // violating (ii) lies entirely in the unmarked subgraph.
    std::map<std::string, int> state;  // 0 new, 1 open, 2 done
    std::function<bool(const std::string&)> dfs = [&](const std::string& v) -> bool {
      state[v] = 1;
      for (const auto& w : succ[v]) {
        if (state[w] == 1) return true;
        if (state[w] == 0 && dfs(w)) return true;
      }
      state[v] = 2;
      return false;
    };
    for (const auto& v : unmarked)
      if (state[v] == 0 && dfs(v)) return false;
  }
  // (iii) same-relation co-sources of one target share markedness.
  {
    std::map<std::pair<std::string, std::string>, std::pair<bool, bool>> groups;
    for (const auto& a : atoms) {
      auto& g = groups[{a.relation, a.args[1].name()}];
      if (is_marked(a.args[0]))
        g.first = true;
      else
        g.second = true;
    }
    for (const auto& [k, g] : groups)
      if (g.first && g.second) return false;
  }
  // (iv) incoming levels at an unmarked variable fit one adjacent pair.
  if (max_level(levels) >= 3) {
    std::map<std::string, std::set<int>> in_levels;
    std::set<std::string> vars;
    for (const auto& a : atoms) {
      in_levels[a.args[1].name()].insert(level_of(levels, a.relation));
      vars.insert(a.args[0].name());
      vars.insert(a.args[1].name());
    }
    for (const auto& v : vars) {
      if (marked.count(v)) continue;
      const auto& ls = in_levels[v];
      if (ls.size() <= 1) continue;
      if (ls.size() == 2 && *ls.rbegin() - *ls.begin() == 1) continue;
      return false;
    }
  }
  return true;
}

}  // namespace

// ---------------------------------------------------------------------------
// MarkedQuery

MarkedQuery MarkedQuery::make(const ConjunctiveQuery& q, std::set<std::string> marked,
                              const LevelMap& levels) {
  return make(q.free_vars, q.body, std::move(marked), levels);
}

MarkedQuery MarkedQuery::make(std::vector<std::string> free_vars, std::vector<Atom> atoms,
                              std::set<std::string> marked, const LevelMap& levels) {
  check_signature(atoms, levels);
  std::sort(atoms.begin(), atoms.end());
  atoms.erase(std::unique(atoms.begin(), atoms.end()), atoms.end());
  MarkedQuery mq;
  mq.free_vars = std::move(free_vars);
  mq.atoms = std::move(atoms);
  auto vars = mq.variables();
  for (const auto& f : mq.free_vars) marked.insert(f);
  for (auto it = marked.begin(); it != marked.end();) {
    if (!vars.count(*it) &&
        std::find(mq.free_vars.begin(), mq.free_vars.end(), *it) == mq.free_vars.end())
      it = marked.erase(it);
    else
      ++it;
  }
  mq.marked = std::move(marked);
  mq.properly_marked = check_properly_marked(mq.atoms, mq.marked, levels);
  mq.totally_marked = true;
  for (const auto& v : vars)
    if (!mq.marked.count(v)) mq.totally_marked = false;
  mq.live = mq.properly_marked && !mq.totally_marked;
  return mq;
}

std::set<std::string> MarkedQuery::variables() const {
  std::set<std::string> vars;
  for (const auto& a : atoms)
    for (const auto& t : a.args) vars.insert(t.name());
  return vars;
}

ConjunctiveQuery MarkedQuery::query() const {
  if (atoms.empty()) throw PreconditionError("marked query has an empty body");
  return ConjunctiveQuery::make(free_vars, atoms);
}

std::string MarkedQuery::key() const {
  CanonSpec spec;
  for (const auto& v : variables()) spec.var_class[v] = marked.count(v) ? 'u' : 'v';
  for (const auto& f : free_vars) spec.fixed.insert(f);
  auto res = canonical_form(atoms, spec);
  std::string key = "?(";
  for (std::size_t i = 0; i < free_vars.size(); ++i) key += (i ? "," : "") + free_vars[i];
  key += ")|" + res.serialization;
  return key;
}

std::vector<Atom> MarkedQuery::red_atoms(const LevelMap& levels, int level) const {
  std::vector<Atom> out;
  for (const auto& a : atoms)
    if (level_of(levels, a.relation) == level) out.push_back(a);
  return out;
}

MarkedQuery canonicalize_marked(const MarkedQuery& q, const LevelMap& levels) {
  CanonSpec spec;
  for (const auto& v : q.variables()) spec.var_class[v] = q.marked.count(v) ? 'u' : 'v';
  for (const auto& f : q.free_vars) spec.fixed.insert(f);
  auto res = canonical_form(q.atoms, spec);
  std::set<std::string> free(q.free_vars.begin(), q.free_vars.end());
  Subst s;
  std::map<std::string, std::string> name_of;
  // Token names u<i>/v<i> become the actual variable names; skip names taken
  // by free variables.
  std::set<std::string> taken = free;
  std::vector<std::pair<std::pair<char, int>, std::string>> tokens;
  for (const auto& [var, token] : res.rename)
    tokens.push_back({{token[0], std::stoi(token.substr(1))}, var});
  std::sort(tokens.begin(), tokens.end());
  std::map<char, int> counter;
  for (const auto& [tk, var] : tokens) {
    std::string name;
    do {
      name = std::string(1, tk.first) + std::to_string(++counter[tk.first]);
    } while (taken.count(name));
    taken.insert(name);
    s[var] = Term::variable(name);
    name_of[var] = name;
  }
  std::vector<Atom> atoms;
  atoms.reserve(q.atoms.size());
  for (const auto& a : q.atoms) atoms.push_back(apply_subst(a, s));
  std::set<std::string> marked;
  for (const auto& v : q.marked) {
    auto it = name_of.find(v);
    marked.insert(it == name_of.end() ? v : it->second);
  }
  return MarkedQuery::make(q.free_vars, std::move(atoms), std::move(marked), levels);
}

// ---------------------------------------------------------------------------
// Ranks

bool multiset_less(std::vector<std::uint64_t> a, std::vector<std::uint64_t> b) {
  std::sort(a.rbegin(), a.rend());
  std::sort(b.rbegin(), b.rend());
  // Dershowitz–Manna over a total order = lexicographic on the descending
  // sequences, shorter prefix first.
  return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end());
}

namespace {

int multiset_compare(std::vector<std::uint64_t> a, std::vector<std::uint64_t> b) {
  std::sort(a.rbegin(), a.rend());
  std::sort(b.rbegin(), b.rend());
  if (a == b) return 0;
  return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end()) ? -1 : 1;
}

}  // namespace

int rank_compare(const RankValue& a, const RankValue& b) {
  if (a.counts.size() != b.counts.size())
    throw PreconditionError("rank_compare: ranks from different signatures");
  for (std::size_t i = 0; i < a.counts.size(); ++i) {
    if (a.counts[i] != b.counts[i]) return a.counts[i] < b.counts[i] ? -1 : 1;
    int c = multiset_compare(a.multisets[i], b.multisets[i]);
    if (c != 0) return c;
  }
  return 0;
}

bool rank_less(const RankValue& a, const RankValue& b) { return rank_compare(a, b) < 0; }

std::string RankValue::str() const {
  std::string s = "<";
  for (std::size_t i = 0; i < counts.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(counts[i]) + ",{";
    auto m = multisets[i];
    std::sort(m.rbegin(), m.rend());
    for (std::size_t j = 0; j < m.size(); ++j) s += (j ? "," : "") + std::to_string(m[j]);
    s += "}";
  }
  return s + ">";
}

// ---------------------------------------------------------------------------
// Hikes: least-cost search over (vertex, used-red directions).

namespace {

struct HikeState {
  std::string vertex;
  std::vector<int> used;  // per red atom: 0 unused, 1 forward, 2 backward

  friend bool operator<(const HikeState& a, const HikeState& b) {
    if (a.vertex != b.vertex) return a.vertex < b.vertex;
    return a.used < b.used;
  }
};

std::uint64_t pow3(std::uint64_t e) {
  std::uint64_t r = 1;
  while (e--) r *= 3;
  return r;
}

struct HikeSearch {
  const MarkedQuery& q;
  const LevelMap& levels;
  int level;  // red level i; green is i-1
  std::vector<Atom> reds;
  std::uint64_t base_exp;

  struct PQItem {
    std::uint64_t cost;
    HikeState state;
    friend bool operator>(const PQItem& a, const PQItem& b) {
      if (a.cost != b.cost) return a.cost > b.cost;
      return b.state < a.state;
    }
  };

  explicit HikeSearch(const MarkedQuery& q_, const LevelMap& levels_, int level_)
      : q(q_), levels(levels_), level(level_) {
    reds = q.red_atoms(levels, level);
    base_exp = reds.size();
  }

  std::uint64_t exponent(const std::vector<int>& used) const {
    std::uint64_t e = base_exp;
    for (int u : used) {
      if (u == 1) ++e;
      if (u == 2) --e;  // never underflows: backward uses <= total red atoms
    }
    return e;
  }

  // Least hike cost ending with a traversal of alpha (either direction);
  // records predecessor links when trace != nullptr.
  std::optional<std::uint64_t> run(const Atom& alpha, RPath* trace) {
    std::map<HikeState, std::uint64_t> dist;
    std::map<HikeState, std::pair<HikeState, RPath::Step>> pred;
    std::priority_queue<PQItem, std::vector<PQItem>, std::greater<PQItem>> pq;
    for (const auto& v : q.marked) {
      HikeState s{v, std::vector<int>(reds.size(), 0)};
      dist[s] = 0;
      pq.push({0, s});
    }
    std::optional<std::uint64_t> best;
    std::optional<std::pair<HikeState, RPath::Step>> goal_pred;

    while (!pq.empty()) {
      auto [cost, state] = pq.top();
      pq.pop();
      auto it = dist.find(state);
      if (it == dist.end() || it->second < cost) continue;
      if (best && cost >= *best) break;  // all remaining entries are no better
      std::uint64_t exp = exponent(state.used);
      std::uint64_t elev = pow3(exp);

      auto relax = [&](const HikeState& next, std::uint64_t ncost, const RPath::Step& step) {
        auto dit = dist.find(next);
        if (dit != dist.end() && dit->second <= ncost) return;
        dist[next] = ncost;
        if (trace) pred[next] = {state, step};
        pq.push({ncost, next});
      };

      for (std::size_t r = 0; r < reds.size(); ++r) {
        if (state.used[r]) continue;
        const Atom& a = reds[r];
        if (a.args[0].name() == state.vertex) {
          HikeState next = state;
          next.vertex = a.args[1].name();
          next.used[r] = 1;
          relax(next, cost, {a, false});
        }
        if (a.args[1].name() == state.vertex) {
          HikeState next = state;
          next.vertex = a.args[0].name();
          next.used[r] = 2;
          relax(next, cost, {a, true});
        }
      }
      for (const auto& a : q.atoms) {
        int l = level_of(levels, a.relation);
        if (l == level) continue;  // handled above
        bool green = (l == level - 1);
        std::uint64_t ncost = cost + (green ? elev : 0);
        if (green && a == alpha) {
          if (a.args[0].name() == state.vertex || a.args[1].name() == state.vertex) {
            if (!best || ncost < *best) {
              best = ncost;
              if (trace)
                goal_pred = {state, RPath::Step{a, a.args[1].name() == state.vertex &&
                                                       a.args[0].name() != state.vertex}};
            }
          }
          // alpha can also be traversed mid-path; fall through to the moves.
        }
        if (a.args[0].name() == state.vertex) {
          HikeState next = state;
          next.vertex = a.args[1].name();
          relax(next, ncost, {a, false});
        }
        if (a.args[1].name() == state.vertex) {
          HikeState next = state;
          next.vertex = a.args[0].name();
          relax(next, ncost, {a, true});
        }
      }
    }
    if (best && trace && goal_pred) {
      std::vector<RPath::Step> steps{goal_pred->second};
      HikeState cur = goal_pred->first;
      while (true) {
        auto pit = pred.find(cur);
        if (pit == pred.end()) break;
        steps.push_back(pit->second.second);
        cur = pit->second.first;
      }
      std::reverse(steps.begin(), steps.end());
      trace->steps = std::move(steps);
      trace->cost = *best;
    }
    return best;
  }
};

}  // namespace

std::optional<std::uint64_t> erk_opt(const MarkedQuery& q, const Atom& alpha,
                                     const LevelMap& levels, int level) {
  if (!q.properly_marked || q.marked.empty())
    throw PreconditionError("erk requires a properly marked query with a nonempty marking");
  if (level_of(levels, alpha.relation) != level - 1)
    throw PreconditionError("erk: atom " + alpha.text() + " is not at level " +
                            std::to_string(level - 1));
  HikeSearch search(q, levels, level);
  return search.run(alpha, nullptr);
}

std::uint64_t erk(const MarkedQuery& q, const Atom& alpha, const LevelMap& levels, int level) {
  auto r = erk_opt(q, alpha, levels, level);
  if (!r) throw PreconditionError("erk: no hike reaches " + alpha.text());
  return *r;
}

RPath erk_witness(const MarkedQuery& q, const Atom& alpha, const LevelMap& levels, int level) {
  HikeSearch search(q, levels, level);
  RPath path;
  auto r = search.run(alpha, &path);
  if (!r) throw PreconditionError("erk: no hike reaches " + alpha.text());
  return path;
}

RankValue qrk(const MarkedQuery& q, const LevelMap& levels, int K) {
  RankValue rv;
  for (int lvl = K; lvl >= 2; --lvl) {
    rv.counts.push_back(q.red_atoms(levels, lvl).size());
    std::vector<std::uint64_t> ms;
    for (const auto& a : q.atoms) {
      if (level_of(levels, a.relation) != lvl - 1) continue;
      auto e = erk_opt(q, a, levels, lvl);
      if (!e) throw PreconditionError("qrk: unreachable atom " + a.text());
      ms.push_back(*e);
    }
    std::sort(ms.rbegin(), ms.rend());
    rv.multisets.push_back(std::move(ms));
  }
  return rv;
}

std::vector<RankValue> srk(const std::vector<MarkedQuery>& S, const LevelMap& levels, int K) {
  std::vector<RankValue> out;
  out.reserve(S.size());
  for (const auto& q : S) out.push_back(qrk(q, levels, K));
  return out;
}

bool srk_less(const std::vector<RankValue>& a, const std::vector<RankValue>& b) {
  // DM over the total order rank_compare = lexicographic on descending sorts.
  auto sorted_desc = [](std::vector<RankValue> v) {
    std::sort(v.begin(), v.end(), [](const RankValue& x, const RankValue& y) {
      return rank_compare(x, y) > 0;
    });
    return v;
  };
  auto sa = sorted_desc(a);
  auto sb = sorted_desc(b);
  for (std::size_t i = 0; i < std::min(sa.size(), sb.size()); ++i) {
    int c = rank_compare(sa[i], sb[i]);
    if (c != 0) return c < 0;
  }
  return sa.size() < sb.size();
}

std::string srk_str(const std::vector<RankValue>& s) {
  auto v = s;
  std::sort(v.begin(), v.end(),
            [](const RankValue& x, const RankValue& y) { return rank_compare(x, y) > 0; });
  std::string out = "{";
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + v[i].str();
  return out + "}";
}

// ---------------------------------------------------------------------------
// Operations

std::vector<MarkedQuery> initial_markings(const ConjunctiveQuery& q, const LevelMap& levels) {
  if (q.boolean())
    throw PreconditionError("initial_markings: Boolean queries are handled upstream");
  if (!q.connected()) throw PreconditionError("initial_markings: query must be connected");
  check_signature(q.body, levels);
  auto bound_set = q.bound_variables();
  std::vector<std::string> bound(bound_set.begin(), bound_set.end());
  if (bound.size() > 20) throw BudgetError("initial_markings: too many bound variables");
  std::vector<MarkedQuery> out;
  for (std::size_t mask = 0; mask < (std::size_t{1} << bound.size()); ++mask) {
    std::set<std::string> marked(q.free_vars.begin(), q.free_vars.end());
    for (std::size_t b = 0; b < bound.size(); ++b)
      if (mask & (std::size_t{1} << b)) marked.insert(bound[b]);
    MarkedQuery mq = MarkedQuery::make(q, std::move(marked), levels);
    if (mq.properly_marked) out.push_back(std::move(mq));
  }
  return out;
}

std::vector<MaximalVar> classify_maximal(const MarkedQuery& q, const LevelMap& levels) {
  if (!q.live) throw PreconditionError("classify_maximal: query is not live");
  std::set<std::string> has_out;
  std::map<std::string, std::vector<Atom>> in_atoms;
  for (const auto& a : q.atoms) {
    has_out.insert(a.args[0].name());
    in_atoms[a.args[1].name()].push_back(a);
  }
  std::vector<MaximalVar> out;
  for (const auto& v : q.variables()) {
    if (q.marked.count(v) || has_out.count(v)) continue;
    const auto& ins = in_atoms[v];
    if (ins.empty())
      throw InvariantError("classify_maximal: isolated unmarked variable " + v);
    MaximalVar mv;
    mv.var = v;
    // Duplicates: same level, two distinct sources. Highest level first.
    std::map<int, std::set<std::string>> sources_by_level;
    for (const auto& a : ins)
      sources_by_level[level_of(levels, a.relation)].insert(a.args[0].name());
    for (auto it = sources_by_level.rbegin(); it != sources_by_level.rend(); ++it) {
      if (it->second.size() >= 2) {
        mv.kind = MaximalVar::Kind::DuplicateTargets;
        mv.level = it->first;
        auto s = it->second.begin();
        mv.dup_a = *s++;
        mv.dup_b = *s;
        break;
      }
    }
    if (mv.kind != MaximalVar::Kind::DuplicateTargets) {
      if (ins.size() == 1) {
        mv.kind = MaximalVar::Kind::SingleEdge;
        mv.level = level_of(levels, ins[0].relation);
      } else if (ins.size() == 2) {
        int l0 = level_of(levels, ins[0].relation);
        int l1 = level_of(levels, ins[1].relation);
        if (std::abs(l0 - l1) != 1)
          throw InvariantError("classify_maximal: non-adjacent in-levels at " + v +
                               " in a properly marked query");
        mv.kind = MaximalVar::Kind::LevelPair;
        mv.level = std::min(l0, l1);
        const Atom& hi = l0 > l1 ? ins[0] : ins[1];
        const Atom& lo = l0 > l1 ? ins[1] : ins[0];
        mv.source_hi = hi.args[0].name();
        mv.source_lo = lo.args[0].name();
      } else {
        throw InvariantError("classify_maximal: unexpected in-atom shape at " + v);
      }
    }
    out.push_back(std::move(mv));
  }
  if (out.empty())
    throw InvariantError("classify_maximal: live query without a maximal variable");
  std::sort(out.begin(), out.end(),
            [](const MaximalVar& a, const MaximalVar& b) { return a.var < b.var; });
  return out;
}

MarkedQuery cut(const MarkedQuery& q, const std::string& x, const LevelMap& levels) {
  std::vector<Atom> touching;
  std::vector<Atom> rest;
  for (const auto& a : q.atoms) {
    if (a.args[0].name() == x || a.args[1].name() == x)
      touching.push_back(a);
    else
      rest.push_back(a);
  }
  if (q.marked.count(x) || touching.size() != 1 || touching[0].args[0].name() == x)
    throw PreconditionError("cut: " + x + " is not maximal with a single incoming atom");
  std::set<std::string> marked = q.marked;
  return MarkedQuery::make(q.free_vars, std::move(rest), std::move(marked), levels);
}

MarkedQuery fuse(const MarkedQuery& q, const std::string& x, const std::string& z,
                 const std::string& z2, const LevelMap& levels) {
  if (z == z2) throw PreconditionError("fuse: sources must be distinct");
  bool witnessed = false;
  for (const auto& a : q.atoms)
    for (const auto& b : q.atoms)
      if (a.relation == b.relation && a.args[1].name() == x && b.args[1].name() == x &&
          a.args[0].name() == z && b.args[0].name() == z2)
        witnessed = true;
  if (q.marked.count(x) || !witnessed)
    throw PreconditionError("fuse: no duplicate same-relation in-atoms at " + x);
  if (q.marked.count(z) != q.marked.count(z2))
    throw InvariantError("fuse: sources with different markedness in a properly marked query");
  // Keep a free variable when one is involved; otherwise the least name.
  std::set<std::string> free(q.free_vars.begin(), q.free_vars.end());
  std::string keep = z, drop = z2;
  if (free.count(z2) && !free.count(z)) std::swap(keep, drop);
  if (free.count(z) == free.count(z2) && drop < keep) std::swap(keep, drop);
  Subst s{{drop, Term::variable(keep)}};
  std::vector<Atom> atoms;
  for (const auto& a : q.atoms) atoms.push_back(apply_subst(a, s));
  std::set<std::string> marked;
  for (const auto& v : q.marked) marked.insert(v == drop ? keep : v);
  std::vector<std::string> free_vars;
  for (const auto& f : q.free_vars) free_vars.push_back(f == drop ? keep : f);
  return MarkedQuery::make(std::move(free_vars), std::move(atoms), std::move(marked), levels);
}

namespace {

std::string fresh_var(std::set<std::string>& taken, const std::string& base) {
  for (int i = 1;; ++i) {
    std::string cand = base + std::to_string(i);
    if (taken.insert(cand).second) return cand;
  }
}

}  // namespace

std::vector<MarkedQuery> reduce(const MarkedQuery& q, const std::string& x,
                                const LevelMap& levels) {
  std::vector<Atom> ins;
  for (const auto& a : q.atoms) {
    if (a.args[0].name() == x)
      throw PreconditionError("reduce: " + x + " has an outgoing atom");
    if (a.args[1].name() == x) ins.push_back(a);
  }
  if (q.marked.count(x) || ins.size() != 2)
    throw PreconditionError("reduce: " + x + " does not have exactly two incoming atoms");
  int l0 = level_of(levels, ins[0].relation);
  int l1 = level_of(levels, ins[1].relation);
  if (std::abs(l0 - l1) != 1)
    throw PreconditionError("reduce: incoming atoms are not at adjacent levels");
  const Atom& hi = l0 > l1 ? ins[0] : ins[1];  // level i+1 ("red")
  const Atom& lo = l0 > l1 ? ins[1] : ins[0];  // level i  ("green")
  std::string x_r = hi.args[0].name();
  std::string x_g = lo.args[0].name();
  std::string rel_hi = hi.relation, rel_lo = lo.relation;

  std::set<std::string> taken = q.variables();
  std::string xp = fresh_var(taken, "w");
  std::string xpp = fresh_var(taken, "w");

  std::vector<Atom> atoms;
  for (const auto& a : q.atoms)
    if (!(a == hi) && !(a == lo)) atoms.push_back(a);
  atoms.push_back(Atom{rel_lo, {Term::variable(xp), Term::variable(xpp)}});
  atoms.push_back(Atom{rel_lo, {Term::variable(xpp), Term::variable(x_r)}});
  atoms.push_back(Atom{rel_hi, {Term::variable(xp), Term::variable(x_g)}});

  std::vector<MarkedQuery> out;
  for (int markmask = 0; markmask < 4; ++markmask) {
    std::set<std::string> marked = q.marked;
    if (markmask & 1) marked.insert(xp);
    if (markmask & 2) marked.insert(xpp);
    MarkedQuery mq = MarkedQuery::make(q.free_vars, atoms, std::move(marked), levels);
    if (mq.properly_marked) out.push_back(std::move(mq));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Marked satisfaction

bool satisfies_marked(const ChaseRun& run, const MarkedQuery& Q, const std::vector<Term>& args,
                      std::size_t depth) {
  if (args.size() != Q.free_vars.size())
    throw PreconditionError("satisfies_marked: argument tuple length mismatch");
  const Instance& target = run.stage(depth);
  Subst seed;
  for (std::size_t i = 0; i < args.size(); ++i) {
    auto it = seed.find(Q.free_vars[i]);
    if (it != seed.end()) {
      if (!(it->second == args[i])) return false;
    } else {
      seed.emplace(Q.free_vars[i], args[i]);
    }
  }
  for (const auto& [v, t] : seed) {
    bool want_original = Q.marked.count(v) > 0;
    if (run.start.contains_term(t) != want_original) return false;
  }
  if (Q.atoms.empty()) return true;  // empty body: the marking constraints on frees held
  const Instance& start = run.start;
  VarFilter filter = [&](const std::string& var, const Term& value) {
    bool want_original = Q.marked.count(var) > 0;
    return start.contains_term(value) == want_original;
  };
  AtomIndex index(target);
  return match_first(Q.atoms, seed, index, filter).has_value();
}

bool satisfies_marked(const RuleSet& theory, const Instance& D, const MarkedQuery& Q,
                      const std::vector<Term>& args, std::size_t depth, const ChaseOptions& opts) {
  ChaseRun run = chase_to(theory, D, depth, opts);
  return satisfies_marked(run, Q, args, depth);
}

// ---------------------------------------------------------------------------
// Theories

RuleSet rd_theory() {
  auto V = [](const char* n) { return Term::variable(n); };
  std::vector<Rule> rules;
  // (loop) true => exists x. R(x,x), G(x,x)
  rules.push_back(Rule::make({}, {Atom{"R", {V("x"), V("x")}}, Atom{"G", {V("x"), V("x")}}}));
  // (pins) @dom(x) true => exists z,z'. R(x,z), G(x,z')
  rules.push_back(Rule::make({}, {Atom{"R", {V("x"), V("z")}}, Atom{"G", {V("x"), V("z'")}}},
                             {"x"}));
  // (grid) R(x,x'), G(x,u), G(u,u') => exists z. R(u',z), G(x',z)
  rules.push_back(Rule::make(
      {Atom{"R", {V("x"), V("x'")}}, Atom{"G", {V("x"), V("u")}}, Atom{"G", {V("u"), V("u'")}}},
      {Atom{"R", {V("u'"), V("z")}}, Atom{"G", {V("x'"), V("z")}}}));
  return RuleSet::make(std::move(rules));
}

RuleSet gen_theory_K(int K) {
  if (K < 2) throw PreconditionError("gen_theory_K: K must be >= 2");
  auto I = [](int k) { return "I" + std::to_string(k); };
  auto V = [](const char* n) { return Term::variable(n); };
  std::vector<Rule> rules;
  // (loop) true => exists x. I_K(x,x), ..., I_1(x,x)
  {
    std::vector<Atom> head;
    for (int k = K; k >= 1; --k) head.push_back(Atom{I(k), {V("x"), V("x")}});
    rules.push_back(Rule::make({}, std::move(head)));
  }
  // (pin_k) @dom(x) true => exists z. I_k(x,z)
  for (int k = 1; k <= K; ++k)
    rules.push_back(Rule::make({}, {Atom{I(k), {V("x"), V("z")}}}, {"x"}));
  // (grid_i) I_{i+1}(x,x'), I_i(x,u), I_i(u,u') => exists z. I_{i+1}(u',z), I_i(x',z)
  for (int i = 1; i < K; ++i)
    rules.push_back(Rule::make({Atom{I(i + 1), {V("x"), V("x'")}}, Atom{I(i), {V("x"), V("u")}},
                                Atom{I(i), {V("u"), V("u'")}}},
                               {Atom{I(i + 1), {V("u'"), V("z")}}, Atom{I(i), {V("x'"), V("z")}}}));
  return RuleSet::make(std::move(rules));
}

// ---------------------------------------------------------------------------
// The process

namespace {

struct ProcessEngine {
  LevelMap levels;
  int K;
  ProcessOptions opts;
  ProcessResult result;

  std::string op_name(const MaximalVar& mv) const {
    auto color = [&](int lvl) -> std::string {
      if (K == 2) return lvl == 2 ? "red" : "green";
      return "I" + std::to_string(lvl);
    };
    switch (mv.kind) {
      case MaximalVar::Kind::SingleEdge:
        return "cut-" + color(mv.level);
      case MaximalVar::Kind::DuplicateTargets:
        return "fuse-" + color(mv.level);
      case MaximalVar::Kind::LevelPair:
        return K == 2 ? "reduce" : "reduce-" + std::to_string(mv.level);
    }
    return "?";
  }

  // Clause-level rank checks for the K = 2 calculus, plus the per-result strict
  // rank decrease for every K.
  void check_step(const MarkedQuery& before, const std::vector<MarkedQuery>& after,
                  const MaximalVar& mv, const std::vector<Atom>& removed_greens,
                  const std::vector<Atom>& added_greens,
                  const std::map<std::string, std::string>* rename) {
    RankValue rb = qrk(before, levels, K);
    for (const auto& q : after) {
      RankValue ra = qrk(q, levels, K);
      if (!rank_less(ra, rb))
        throw InvariantError("rank monotonicity violated: " + ra.str() + " !< " + rb.str() +
                             " after " + op_name(mv));
    }
    if (K != 2 || after.empty()) return;
    auto reds = [&](const MarkedQuery& q) { return q.red_atoms(levels, 2).size(); };
    auto greens = [&](const MarkedQuery& q) { return q.red_atoms(levels, 1); };
    auto rename_atom = [&](const Atom& a) {
      if (!rename) return a;
      Subst s;
      for (const auto& [from, to] : *rename) s.emplace(from, Term::variable(to));
      return apply_subst(a, s);
    };
    switch (mv.kind) {
      case MaximalVar::Kind::SingleEdge: {
        const auto& q = after.at(0);
        if (mv.level == 2) {
          if (reds(q) >= reds(before)) throw InvariantError("cut-red must drop |Q_R|");
        } else {
          if (reds(q) != reds(before)) throw InvariantError("cut-green must preserve |Q_R|");
          for (const auto& g : greens(q)) {
            auto e_after = erk_opt(q, g, levels, 2);
            auto e_before = erk_opt(before, g, levels, 2);
            if (e_after && e_before && *e_after > *e_before)
              throw InvariantError("cut-green increased erk of " + g.text());
          }
        }
        break;
      }
      case MaximalVar::Kind::DuplicateTargets: {
        const auto& q = after.at(0);
        if (mv.level == 2) {
          if (reds(q) >= reds(before)) throw InvariantError("fuse-red must drop |Q_R|");
        } else {
          bool red_drop = reds(q) < reds(before);
          if (!red_drop) {
            if (reds(q) != reds(before)) throw InvariantError("fuse-green raised |Q_R|");
            for (const auto& g : greens(before)) {
              auto e_before = erk_opt(before, g, levels, 2);
              auto e_after = erk_opt(q, rename_atom(g), levels, 2);
              if (e_before && e_after && *e_after > *e_before)
                throw InvariantError("fuse-green increased erk of " + g.text());
            }
          }
        }
        break;
      }
      case MaximalVar::Kind::LevelPair: {
        if (removed_greens.size() != 1) throw InvariantError("reduce removes one green atom");
        auto e_removed = erk_opt(before, removed_greens[0], levels, 2);
        for (const auto& q : after) {
          if (reds(q) != reds(before)) throw InvariantError("reduce must preserve |Q_R|");
          for (const auto& g : added_greens) {
            auto e_new = erk_opt(q, g, levels, 2);
            if (e_new && e_removed && *e_new >= *e_removed)
              throw InvariantError("reduce: new green atom does not strictly drop erk");
          }
          for (const auto& g : greens(before)) {
            if (g == removed_greens[0]) continue;
            auto e_before = erk_opt(before, g, levels, 2);
            auto e_after = erk_opt(q, g, levels, 2);
            if (e_before && e_after && *e_after > *e_before)
              throw InvariantError("reduce increased erk of surviving " + g.text());
          }
        }
        break;
      }
    }
  }

  ProcessResult run(const ConjunctiveQuery& q) {
    std::map<std::string, MarkedQuery> S;
    std::map<std::string, RankValue> ranks;  // qrk cache keyed like S
    for (auto& mq : initial_markings(q, levels)) {
      auto c = canonicalize_marked(mq, levels);
      std::string key = c.key();
      if (S.emplace(key, std::move(c)).second && opts.check_invariants)
        ranks.emplace(key, qrk(S.at(key), levels, K));
    }

    std::size_t steps = 0;
    while (true) {
      // Canonically least live query.
      const MarkedQuery* live = nullptr;
      std::string live_key;
      for (const auto& [key, mq] : S)
        if (mq.live) {
          live = &mq;
          live_key = key;
          break;
        }
      if (!live) break;
      if (++steps > opts.max_steps) throw BudgetError("run_process: step budget exhausted");

      MarkedQuery before = *live;
      auto maximal = classify_maximal(before, levels);
      // Operation priority: fuse, then reduce, then cut; then variable order.
      auto priority = [](const MaximalVar& mv) {
        switch (mv.kind) {
          case MaximalVar::Kind::DuplicateTargets: return 0;
          case MaximalVar::Kind::LevelPair: return 1;
          case MaximalVar::Kind::SingleEdge: return 2;
        }
        return 3;
      };
      std::stable_sort(maximal.begin(), maximal.end(),
                       [&](const MaximalVar& a, const MaximalVar& b) {
                         return priority(a) < priority(b);
                       });
      const MaximalVar& mv = maximal.front();

      std::vector<MarkedQuery> raw;
      std::vector<Atom> removed_greens, added_greens;
      std::map<std::string, std::string> rename;
      const std::map<std::string, std::string>* rename_ptr = nullptr;
      switch (mv.kind) {
        case MaximalVar::Kind::SingleEdge:
          raw.push_back(cut(before, mv.var, levels));
          break;
        case MaximalVar::Kind::DuplicateTargets: {
          MarkedQuery fused = fuse(before, mv.var, mv.dup_a, mv.dup_b, levels);
          // fuse keeps one of the two source names; record the actual rename.
          std::set<std::string> after_vars = fused.variables();
          std::string kept = after_vars.count(mv.dup_a) ? mv.dup_a : mv.dup_b;
          std::string dropped = kept == mv.dup_a ? mv.dup_b : mv.dup_a;
          rename.emplace(dropped, kept);
          rename_ptr = &rename;
          raw.push_back(std::move(fused));
          break;
        }
        case MaximalVar::Kind::LevelPair: {
          for (const auto& a : before.atoms)
            if (a.args[1].name() == mv.var && level_of(levels, a.relation) == mv.level)
              removed_greens.push_back(a);
          raw = reduce(before, mv.var, levels);
          if (!raw.empty()) {
            for (const auto& a : raw.front().atoms) {
              bool in_before = false;
              for (const auto& b : before.atoms)
                if (a == b) in_before = true;
              if (!in_before && level_of(levels, a.relation) == mv.level)
                added_greens.push_back(a);
            }
          }
          break;
        }
      }

      // Drop results that are not properly marked (unsatisfiable) and queries
      // with an unreachable green atom (inert).
      std::vector<MarkedQuery> kept;
      for (auto& r : raw) {
        if (!r.properly_marked) {
          ++result.dropped_improper;
          continue;
        }
        bool inert = false;
        for (int lvl = K; lvl >= 2 && !inert; --lvl)
          for (const auto& a : r.atoms) {
            if (level_of(levels, a.relation) != lvl - 1) continue;
            if (!erk_opt(r, a, levels, lvl)) {
              inert = true;
              break;
            }
          }
        if (inert) {
          ++result.dropped_inert;
          continue;
        }
        kept.push_back(std::move(r));
      }

      std::vector<RankValue> srk_before;
      std::string srk_before_str;
      if (opts.check_invariants) {
        check_step(before, kept, mv, removed_greens, added_greens, rename_ptr);
        for (const auto& [k, rv] : ranks) srk_before.push_back(rv);
        srk_before_str = srk_str(srk_before);
      }

      S.erase(live_key);
      ranks.erase(live_key);
      ProcessStep st;
      st.index = steps;
      st.op = op_name(mv);
      st.variable = mv.var;
      st.before_key = live_key;
      for (auto& r : kept) {
        auto c = canonicalize_marked(r, levels);
        std::string key = c.key();
        st.after_keys.push_back(key);
        if (S.emplace(key, std::move(c)).second && opts.check_invariants)
          ranks.emplace(key, qrk(S.at(key), levels, K));
      }
      if (opts.check_invariants) {
        std::vector<RankValue> srk_after;
        for (const auto& [k, rv] : ranks) srk_after.push_back(rv);
        if (!srk_less(srk_after, srk_before))
          throw InvariantError("srk did not strictly decrease at step " + std::to_string(steps));
        st.srk_before = srk_before_str;
        st.srk_after = srk_str(srk_after);
      }
      result.trace.push_back(std::move(st));
    }

    // All remaining queries are totally marked (or the empty-body terminal).
    std::vector<ConjunctiveQuery> finals;
    for (const auto& [key, mq] : S) {
      result.final_marked.push_back(mq);
      if (!mq.atoms.empty()) {
        finals.push_back(mq.query());
        continue;
      }
      // Empty body: the query asserts that its free variable occurs in the
      // instance; expand over the signature.
      if (mq.free_vars.size() != 1)
        throw InvariantError("empty-body marked query with free tuple size != 1");
      const std::string& f = mq.free_vars[0];
      for (const auto& [rel, lvl] : levels) {
        for (int pos = 0; pos < 2; ++pos) {
          std::set<std::string> taken{f};
          std::string other = fresh_var(taken, "v");
          std::vector<Atom> body{Atom{
              rel, {pos == 0 ? Term::variable(f) : Term::variable(other),
                    pos == 0 ? Term::variable(other) : Term::variable(f)}}};
          finals.push_back(ConjunctiveQuery::make({f}, std::move(body)));
        }
      }
    }
    result.rewriting.queries = minimize_ucq(std::move(finals));
    result.rewriting.complete = true;
    result.rewriting.fuel_used = steps;
    result.rewriting.rs_value = 0;
    for (const auto& m : result.rewriting.queries)
      result.rewriting.rs_value = std::max(result.rewriting.rs_value, m.size());
    return std::move(result);
  }
};

}  // namespace

ProcessResult run_process(const ConjunctiveQuery& q, const ProcessOptions& opts) {
  ProcessEngine engine{rd_levels(), 2, opts, {}};
  return engine.run(q);
}

ProcessResult run_process_K(int K, const ConjunctiveQuery& q, const ProcessOptions& opts) {
  if (K < 2) throw PreconditionError("run_process_K: K must be >= 2");
  ProcessEngine engine{sigma_levels(K), K, opts, {}};
  return engine.run(q);
}

}  // namespace tmqa
