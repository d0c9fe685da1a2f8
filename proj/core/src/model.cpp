#include "tmqa/model.hpp"

#include <algorithm>
#include <deque>
#include <functional>
#include <sstream>

namespace tmqa {

// ---------------------------------------------------------------------------
// Term

Term Term::constant(std::string name) {
  auto rep = std::make_shared<Rep>();
  rep->kind = Kind::Constant;
  rep->name = name;
  rep->text = std::move(name);
  rep->ground = true;
  rep->hash = std::hash<std::string>{}(rep->text) ^ 0x9e3779b9u;
  return Term(std::move(rep));
}

Term Term::variable(std::string name) {
  auto rep = std::make_shared<Rep>();
  rep->kind = Kind::Variable;
  rep->name = name;
  rep->text = std::move(name);
  rep->ground = false;
  rep->hash = std::hash<std::string>{}(rep->text) ^ 0x7f4a7c15u;
  return Term(std::move(rep));
}

Term Term::skolem(TauId tau, int position, std::vector<Term> args) {
  auto rep = std::make_shared<Rep>();
  rep->kind = Kind::Skolem;
  rep->tau = std::move(tau);
  rep->position = position;
  rep->args = std::move(args);
  std::string t = "sk[" + rep->tau.canonical + "/" + std::to_string(position) + "](";
  bool ground = true;
  for (std::size_t i = 0; i < rep->args.size(); ++i) {
    if (i) t += ",";
    t += rep->args[i].text();
    ground = ground && rep->args[i].ground();
  }
  t += ")";
  rep->text = std::move(t);
  rep->ground = ground;
  rep->hash = std::hash<std::string>{}(rep->text);
  return Term(std::move(rep));
}

const std::string& Term::name() const {
  if (rep_->kind == Kind::Skolem) throw PreconditionError("name() called on a Skolem term");
  return rep_->name;
}

const TauId& Term::tau() const {
  if (rep_->kind != Kind::Skolem) throw PreconditionError("tau() called on a non-Skolem term");
  return rep_->tau;
}

int Term::position() const {
  if (rep_->kind != Kind::Skolem) throw PreconditionError("position() called on a non-Skolem term");
  return rep_->position;
}

const std::vector<Term>& Term::args() const {
  if (rep_->kind != Kind::Skolem) throw PreconditionError("args() called on a non-Skolem term");
  return rep_->args;
}

// ---------------------------------------------------------------------------
// Atom

std::string Atom::text() const {
  std::string s = relation + "(";
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (i) s += ",";
    s += args[i].text();
  }
  s += ")";
  return s;
}

bool Atom::ground() const {
  for (const auto& a : args)
    if (!a.ground()) return false;
  return true;
}

bool operator<(const Atom& a, const Atom& b) {
  if (a.relation != b.relation) return a.relation < b.relation;
  return std::lexicographical_compare(a.args.begin(), a.args.end(), b.args.begin(), b.args.end());
}

Term apply_subst(const Term& t, const Subst& s) {
  switch (t.kind()) {
    case Term::Kind::Constant:
      return t;
    case Term::Kind::Variable: {
      auto it = s.find(t.name());
      return it == s.end() ? t : it->second;
    }
    case Term::Kind::Skolem: {
      std::vector<Term> args;
      args.reserve(t.args().size());
      bool changed = false;
      for (const auto& a : t.args()) {
        args.push_back(apply_subst(a, s));
        changed = changed || !(args.back() == a);
      }
      if (!changed) return t;
      return Term::skolem(t.tau(), t.position(), std::move(args));
    }
  }
  throw InvariantError("unreachable term kind");
}

Atom apply_subst(const Atom& a, const Subst& s) {
  Atom out;
  out.relation = a.relation;
  out.args.reserve(a.args.size());
  for (const auto& t : a.args) out.args.push_back(apply_subst(t, s));
  return out;
}

// ---------------------------------------------------------------------------
// Instance

Instance::Instance(std::vector<Atom> facts) {
  for (auto& f : facts) facts_.insert(std::move(f));
  init();
}

Instance::Instance(std::set<Atom> facts) : facts_(std::move(facts)) { init(); }

void Instance::init() {
  for (const auto& f : facts_) {
    if (!f.ground()) throw PreconditionError("instance fact contains a variable: " + f.text());
    for (const auto& t : f.args) domain_.insert(t);
  }
}

bool Instance::subset_of(const Instance& other) const {
  return std::includes(other.facts_.begin(), other.facts_.end(), facts_.begin(), facts_.end());
}

// ---------------------------------------------------------------------------
// Rule

namespace {

void collect_vars(const Atom& a, std::set<std::string>& out) {
  std::function<void(const Term&)> walk = [&](const Term& t) {
    if (t.is_variable())
      out.insert(t.name());
    else if (t.is_skolem())
      for (const auto& s : t.args()) walk(s);
  };
  for (const auto& t : a.args) walk(t);
}

bool atoms_connected(const std::vector<Atom>& atoms) {
  if (atoms.size() <= 1) return true;
  // Union atoms that share a variable.
  std::vector<int> comp(atoms.size());
  for (std::size_t i = 0; i < atoms.size(); ++i) comp[i] = static_cast<int>(i);
  std::function<int(int)> find = [&](int x) { return comp[x] == x ? x : comp[x] = find(comp[x]); };
  std::vector<std::set<std::string>> vars(atoms.size());
  for (std::size_t i = 0; i < atoms.size(); ++i) collect_vars(atoms[i], vars[i]);
  for (std::size_t i = 0; i < atoms.size(); ++i)
    for (std::size_t j = i + 1; j < atoms.size(); ++j) {
      for (const auto& v : vars[i])
        if (vars[j].count(v)) {
          comp[find(static_cast<int>(i))] = find(static_cast<int>(j));
          break;
        }
    }
  int root = find(0);
  for (std::size_t i = 1; i < atoms.size(); ++i)
    if (find(static_cast<int>(i)) != root) return false;
  return true;
}

}  // namespace

Rule Rule::make(std::vector<Atom> body, std::vector<Atom> head, std::set<std::string> dom_vars) {
  if (head.empty()) throw PreconditionError("rule head must be nonempty");
  Rule r;
  std::sort(body.begin(), body.end());
  body.erase(std::unique(body.begin(), body.end()), body.end());
  std::sort(head.begin(), head.end());
  head.erase(std::unique(head.begin(), head.end()), head.end());
  r.body = std::move(body);
  r.head = std::move(head);
  r.dom_vars = std::move(dom_vars);
  for (const auto& a : r.body) collect_vars(a, r.body_vars);
  for (const auto& a : r.head) collect_vars(a, r.head_vars);
  for (const auto& v : r.head_vars)
    if (r.body_vars.count(v)) r.frontier.insert(v);
  for (const auto& v : r.dom_vars) {
    if (r.body_vars.count(v))
      throw PreconditionError("active-domain variable also occurs in the body: " + v);
    if (!r.head_vars.count(v))
      throw PreconditionError("active-domain variable does not occur in the head: " + v);
  }
  for (const auto& v : r.head_vars)
    if (!r.frontier.count(v) && !r.dom_vars.count(v)) r.existentials.insert(v);
  r.datalog = r.existentials.empty();
  r.existential = !r.datalog;
  r.detached = r.existential && r.frontier.empty() && r.dom_vars.empty();
  r.sensible = r.existential && !r.detached;
  r.linear = r.body.size() <= 1;
  r.connected = atoms_connected(r.body);
  return r;
}

std::string Rule::text() const {
  std::string s;
  if (!dom_vars.empty()) {
    s += "@dom{";
    bool first = true;
    for (const auto& v : dom_vars) {
      if (!first) s += ",";
      s += v;
      first = false;
    }
    s += "} ";
  }
  if (body.empty())
    s += "true";
  else
    for (std::size_t i = 0; i < body.size(); ++i) s += (i ? "," : "") + body[i].text();
  s += " -> ";
  if (!existentials.empty()) {
    s += "exists ";
    bool first = true;
    for (const auto& v : existentials) {
      if (!first) s += ",";
      s += v;
      first = false;
    }
    s += ". ";
  }
  for (std::size_t i = 0; i < head.size(); ++i) s += (i ? "," : "") + head[i].text();
  return s;
}

RuleSet RuleSet::make(std::vector<Rule> rules) {
  RuleSet rs;
  rs.rules = std::move(rules);
  rs.signature();  // validates arity consistency
  return rs;
}

std::map<std::string, std::size_t> RuleSet::signature() const {
  std::map<std::string, std::size_t> sig;
  auto note = [&](const Atom& a) {
    auto [it, fresh] = sig.emplace(a.relation, a.arity());
    if (!fresh && it->second != a.arity())
      throw PreconditionError("relation " + a.relation + " used with arities " +
                              std::to_string(it->second) + " and " + std::to_string(a.arity()));
  };
  for (const auto& r : rules) {
    for (const auto& a : r.body) note(a);
    for (const auto& a : r.head) note(a);
  }
  return sig;
}

// ---------------------------------------------------------------------------
// ConjunctiveQuery

ConjunctiveQuery ConjunctiveQuery::make(std::vector<std::string> free_vars,
                                        std::vector<Atom> body) {
  if (body.empty()) throw PreconditionError("query body must be nonempty");
  ConjunctiveQuery q;
  std::sort(body.begin(), body.end());
  body.erase(std::unique(body.begin(), body.end()), body.end());
  q.free_vars = std::move(free_vars);
  q.body = std::move(body);
  auto vars = q.variables();
  for (const auto& v : q.free_vars)
    if (!vars.count(v))
      throw PreconditionError("free variable " + v + " does not occur in the query body");
  return q;
}

std::set<std::string> ConjunctiveQuery::variables() const {
  std::set<std::string> vars;
  for (const auto& a : body) collect_vars(a, vars);
  return vars;
}

std::set<std::string> ConjunctiveQuery::bound_variables() const {
  auto vars = variables();
  for (const auto& v : free_vars) vars.erase(v);
  return vars;
}

bool ConjunctiveQuery::connected() const { return atoms_connected(body); }

// ---------------------------------------------------------------------------
// Canonical form search: lexicographically least serialization over atom
// orders, with variables renamed on first occurrence. Greedy choice of the
// minimal next atom render is exact here because the atom separator '&'
// compares below every character that can appear inside a render.

namespace {

struct CanonState {
  std::map<std::string, std::string> rename;
  std::map<char, int> counters;
};

std::string render_atom(const Atom& atom, const CanonSpec& spec, CanonState& st) {
  std::string s = atom.relation + "(";
  for (std::size_t i = 0; i < atom.args.size(); ++i) {
    if (i) s += ",";
    const Term& t = atom.args[i];
    if (t.is_constant()) {
      s += "$" + t.name();
    } else if (t.is_variable()) {
      const std::string& v = t.name();
      if (spec.fixed.count(v)) {
        s += "?" + v;
      } else {
        auto it = st.rename.find(v);
        if (it == st.rename.end()) {
          auto cls = spec.var_class.find(v);
          char c = cls == spec.var_class.end() ? 'v' : cls->second;
          std::string token = std::string(1, c) + std::to_string(++st.counters[c]);
          it = st.rename.emplace(v, std::move(token)).first;
        }
        s += it->second;
      }
    } else {
      throw PreconditionError("canonical form does not accept Skolem terms: " + t.text());
    }
  }
  s += ")";
  return s;
}

struct CanonSearch {
  const std::vector<Atom>& atoms;
  const CanonSpec& spec;
  std::string best;
  std::map<std::string, std::string> best_rename;
  std::vector<std::size_t> best_order;
  bool have_best = false;

  void run() {
    CanonState st;
    std::vector<bool> used(atoms.size(), false);
    std::vector<std::size_t> order;
    step(st, used, order, "");
  }

  void step(CanonState& st, std::vector<bool>& used, std::vector<std::size_t>& order,
            const std::string& prefix) {
    if (order.size() == atoms.size()) {
      if (!have_best || prefix < best) {
        best = prefix;
        best_rename = st.rename;
        best_order = order;
        have_best = true;
      }
      return;
    }
    // Find the minimal provisional render among unused atoms.
    std::string min_render;
    std::vector<std::size_t> ties;
    for (std::size_t i = 0; i < atoms.size(); ++i) {
      if (used[i]) continue;
      CanonState tmp = st;
      std::string r = render_atom(atoms[i], spec, tmp);
      if (ties.empty() || r < min_render) {
        min_render = r;
        ties.assign(1, i);
      } else if (r == min_render) {
        ties.push_back(i);
      }
    }
    std::string next_prefix = prefix.empty() ? min_render : prefix + "&" + min_render;
    // Every extension of next_prefix is >= next_prefix, so a smaller best wins.
    if (have_best && best < next_prefix) return;
    for (std::size_t i : ties) {
      CanonState tmp = st;
      render_atom(atoms[i], spec, tmp);  // commit renames
      used[i] = true;
      order.push_back(i);
      step(tmp, used, order, next_prefix);
      order.pop_back();
      used[i] = false;
    }
  }
};

}  // namespace

CanonResult canonical_form(const std::vector<Atom>& atoms, const CanonSpec& spec) {
  if (atoms.empty()) return CanonResult{"", {}, {}};
  CanonSearch search{atoms, spec};
  search.run();
  return CanonResult{search.best, search.best_rename, search.best_order};
}

// ---------------------------------------------------------------------------
// iso_type and skolemize_head

TauId iso_type(const std::vector<Atom>& head, const std::set<std::string>& frontier) {
  if (head.empty()) throw PreconditionError("iso_type: empty head");
  CanonSpec spec;
  for (const auto& a : head) {
    for (const auto& t : a.args) {
      if (t.is_constant())
        throw PreconditionError("iso_type: head contains a constant: " + t.text());
      if (t.is_skolem()) throw PreconditionError("iso_type: head contains a Skolem term");
      spec.var_class[t.name()] = frontier.count(t.name()) ? 'f' : 'e';
    }
  }
  for (const auto& v : frontier)
    if (!spec.var_class.count(v))
      throw PreconditionError("iso_type: frontier variable " + v + " not in head");
  auto res = canonical_form(head, spec);
  return TauId{res.serialization};
}

std::vector<Atom> skolemize_head(const Rule& rule) {
  std::set<std::string> fr = rule.frontier;
  for (const auto& v : rule.dom_vars) fr.insert(v);
  if (rule.existentials.empty()) return rule.head;

  CanonSpec spec;
  for (const auto& a : rule.head)
    for (const auto& t : a.args) {
      if (!t.is_variable())
        throw PreconditionError("skolemize_head: head must be over variables");
      spec.var_class[t.name()] = fr.count(t.name()) ? 'f' : 'e';
    }
  auto res = canonical_form(rule.head, spec);
  TauId tau{res.serialization};

  // Frontier variables ordered by their canonical f-token index.
  std::vector<std::pair<std::string, std::string>> fr_tokens;  // (token, var)
  for (const auto& [var, token] : res.rename)
    if (token[0] == 'f') fr_tokens.emplace_back(token, var);
  std::sort(fr_tokens.begin(), fr_tokens.end(), [](const auto& a, const auto& b) {
    return std::stoi(a.first.substr(1)) < std::stoi(b.first.substr(1));
  });
  std::vector<Term> fr_args;
  fr_args.reserve(fr_tokens.size());
  for (const auto& [token, var] : fr_tokens) fr_args.push_back(Term::variable(var));

  // Earliest global argument position of each existential variable, counted
  // across the head atoms in canonical order (1-based).
  std::map<std::string, int> first_pos;
  int pos = 0;
  for (std::size_t idx : res.atom_order) {
    for (const auto& t : rule.head[idx].args) {
      ++pos;
      const std::string& v = t.name();
      if (rule.existentials.count(v) && !first_pos.count(v)) first_pos[v] = pos;
    }
  }

  Subst s;
  for (const auto& [v, p] : first_pos) s[v] = Term::skolem(tau, p, fr_args);
  std::vector<Atom> out;
  out.reserve(rule.head.size());
  for (const auto& a : rule.head) out.push_back(apply_subst(a, s));
  return out;
}

// ---------------------------------------------------------------------------
// Gaifman distance

std::optional<std::size_t> gaifman_distance(const Instance& inst, const Term& s, const Term& t) {
  if (!inst.contains_term(s))
    throw PreconditionError("gaifman_distance: term not in domain: " + s.text());
  if (!inst.contains_term(t))
    throw PreconditionError("gaifman_distance: term not in domain: " + t.text());
  if (s == t) return 0;
  std::map<Term, std::vector<Term>> adj;
  for (const auto& f : inst.facts()) {
    for (std::size_t i = 0; i < f.args.size(); ++i)
      for (std::size_t j = i + 1; j < f.args.size(); ++j) {
        if (f.args[i] == f.args[j]) continue;
        adj[f.args[i]].push_back(f.args[j]);
        adj[f.args[j]].push_back(f.args[i]);
      }
  }
  std::map<Term, std::size_t> dist;
  std::deque<Term> queue;
  dist.emplace(s, 0);
  queue.push_back(s);
  while (!queue.empty()) {
    Term cur = queue.front();
    queue.pop_front();
    std::size_t d = dist.at(cur);
    auto it = adj.find(cur);
    if (it == adj.end()) continue;
    for (const auto& nxt : it->second) {
      if (dist.count(nxt)) continue;
      if (nxt == t) return d + 1;
      dist.emplace(nxt, d + 1);
      queue.push_back(nxt);
    }
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Query canonicalization

namespace {

CanonResult query_canon(const ConjunctiveQuery& q) {
  CanonSpec spec;
  std::set<std::string> free(q.free_vars.begin(), q.free_vars.end());
  for (const auto& v : q.variables()) spec.var_class[v] = 'v';
  spec.fixed = free;
  return canonical_form(q.body, spec);
}

}  // namespace

ConjunctiveQuery canonicalize(const ConjunctiveQuery& q) {
  auto res = query_canon(q);
  // Rename bound variables to v1,v2,... skipping any name that collides with
  // a free variable.
  std::set<std::string> free(q.free_vars.begin(), q.free_vars.end());
  Subst s;
  // Assign final names in token index order so numbering is stable.
  std::vector<std::pair<int, std::pair<std::string, std::string>>> tokens;  // (idx,(var,token))
  for (const auto& [var, token] : res.rename)
    tokens.push_back({std::stoi(token.substr(1)), {var, token}});
  std::sort(tokens.begin(), tokens.end());
  int counter = 0;
  for (const auto& [idx, vt] : tokens) {
    std::string name;
    do {
      name = "v" + std::to_string(++counter);
    } while (free.count(name));
    s[vt.first] = Term::variable(name);
  }
  std::vector<Atom> body;
  body.reserve(q.body.size());
  for (std::size_t idx : res.atom_order) body.push_back(apply_subst(q.body[idx], s));
  std::sort(body.begin(), body.end());
  body.erase(std::unique(body.begin(), body.end()), body.end());
  ConjunctiveQuery out;
  out.free_vars = q.free_vars;
  out.body = std::move(body);
  return out;
}

std::string query_key(const ConjunctiveQuery& q) {
  auto res = query_canon(q);
  std::string key = "?(";
  for (std::size_t i = 0; i < q.free_vars.size(); ++i)
    key += (i ? "," : "") + q.free_vars[i];
  key += "):" + res.serialization;
  return key;
}

}  // namespace tmqa
