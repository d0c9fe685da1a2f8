#include "tmqa/textio.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <set>

namespace tmqa::textio {

namespace {

bool ident_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; }
bool ident_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '\'';
}

struct Cursor {
  const std::string& src;
  std::size_t pos = 0;
  std::size_t line = 1;
  std::size_t col = 1;

  explicit Cursor(const std::string& s) : src(s) {}

  bool eof() const { return pos >= src.size(); }
  char peek() const { return eof() ? '\0' : src[pos]; }
  char peek2() const { return pos + 1 >= src.size() ? '\0' : src[pos + 1]; }

  void advance() {
    if (eof()) return;
    if (src[pos] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
    ++pos;
  }

  void skip_ws() {
    while (!eof()) {
      char c = peek();
      if (c == '#') {
        while (!eof() && peek() != '\n') advance();
      } else if (std::isspace(static_cast<unsigned char>(c))) {
        advance();
      } else {
        break;
      }
    }
  }

  SourceSpan span() const { return SourceSpan{line, col}; }

  [[noreturn]] void fail(const std::string& msg) const { throw ParseError(msg, span()); }

  void expect(char c, const std::string& what) {
    skip_ws();
    if (peek() != c) fail("expected '" + std::string(1, c) + "' " + what);
    advance();
  }

  bool try_consume(char c) {
    skip_ws();
    if (peek() != c) return false;
    advance();
    return true;
  }

  std::string ident() {
    skip_ws();
    if (!ident_start(peek())) fail("expected an identifier");
    std::string out;
    while (!eof() && ident_char(peek())) {
      out += peek();
      advance();
    }
    return out;
  }

  bool lookahead_is(char c) {
    skip_ws();
    return peek() == c;
  }
};

bool variable_spelling(const std::string& name) {
  char c = name[0];
  return (c >= 's' && c <= 'z') || (c >= 'A' && c <= 'Z');
}

struct ArityTable {
  std::map<std::string, std::pair<std::size_t, SourceSpan>> seen;
  void note(const std::string& rel, std::size_t arity, SourceSpan where) {
    auto [it, fresh] = seen.emplace(rel, std::make_pair(arity, where));
    if (!fresh && it->second.first != arity)
      throw ParseError("relation " + rel + " previously used with arity " +
                           std::to_string(it->second.first),
                       where);
  }
};

// Parses `rel(args...)` where args are bare identifiers classified by the
// variable convention and the `consts` declarations.
Atom parse_symbolic_atom(Cursor& cur, const std::set<std::string>& consts, ArityTable& arities) {
  cur.skip_ws();
  SourceSpan at = cur.span();
  std::string rel = cur.ident();
  cur.expect('(', "after relation name");
  Atom a;
  a.relation = rel;
  if (!cur.try_consume(')')) {
    while (true) {
      std::string name = cur.ident();
      bool is_var = !consts.count(name) && variable_spelling(name);
      a.args.push_back(is_var ? Term::variable(name) : Term::constant(name));
      cur.skip_ws();
      if (cur.try_consume(')')) break;
      if (!cur.try_consume(',')) cur.fail("expected ',' or ')' in atom argument list");
    }
  }
  arities.note(rel, a.args.size(), at);
  return a;
}

// Ground term in an instance file: constant or printed Skolem term.
Term parse_ground_term(Cursor& cur) {
  cur.skip_ws();
  SourceSpan at = cur.span();
  std::string name = cur.ident();
  if (name == "sk" && cur.lookahead_is('[')) {
    cur.advance();  // '['
    std::string canonical;
    while (!cur.eof() && cur.peek() != '/') {
      canonical += cur.peek();
      cur.advance();
    }
    if (cur.eof()) cur.fail("unterminated Skolem term");
    cur.advance();  // '/'
    cur.skip_ws();
    std::string digits;
    while (std::isdigit(static_cast<unsigned char>(cur.peek()))) {
      digits += cur.peek();
      cur.advance();
    }
    if (digits.empty()) cur.fail("expected a position index in Skolem term");
    cur.expect(']', "after Skolem position");
    cur.expect('(', "before Skolem arguments");
    std::vector<Term> args;
    if (!cur.try_consume(')')) {
      while (true) {
        args.push_back(parse_ground_term(cur));
        cur.skip_ws();
        if (cur.try_consume(')')) break;
        if (!cur.try_consume(',')) cur.fail("expected ',' or ')' in Skolem arguments");
      }
    }
    return Term::skolem(TauId{canonical}, std::stoi(digits), std::move(args));
  }
  if (variable_spelling(name))
    throw ParseError("variables are forbidden in instances: " + name, at);
  return Term::constant(name);
}

std::set<std::string> atom_variables(const Atom& a) {
  std::set<std::string> out;
  for (const auto& t : a.args)
    if (t.is_variable()) out.insert(t.name());
  return out;
}

Rule parse_rule_stmt(Cursor& cur, const std::set<std::string>& consts, ArityTable& arities) {
  std::vector<Atom> body;
  std::set<std::string> dom_vars;
  std::map<std::string, SourceSpan> dom_spans;

  cur.skip_ws();
  bool empty_body = false;
  // Body: `true` or a comma-separated list of atoms / @dom markers.
  while (true) {
    cur.skip_ws();
    if (cur.peek() == '@') {
      SourceSpan at = cur.span();
      cur.advance();
      std::string kw = cur.ident();
      if (kw != "dom") throw ParseError("unknown marker @" + kw, at);
      cur.expect('(', "after @dom");
      std::string v = cur.ident();
      if (!variable_spelling(v) || consts.count(v))
        throw ParseError("@dom expects a variable, got " + v, at);
      cur.expect(')', "after @dom variable");
      dom_vars.insert(v);
      dom_spans.emplace(v, at);
    } else {
      std::size_t save_pos = cur.pos, save_line = cur.line, save_col = cur.col;
      std::string first = cur.ident();
      if (first == "true" && !cur.lookahead_is('(')) {
        empty_body = true;
      } else {
        cur.pos = save_pos;
        cur.line = save_line;
        cur.col = save_col;
        body.push_back(parse_symbolic_atom(cur, consts, arities));
      }
    }
    cur.skip_ws();
    if (!cur.try_consume(',')) break;
    if (empty_body) cur.fail("'true' cannot be combined with body atoms");
  }

  cur.skip_ws();
  SourceSpan arrow_at = cur.span();
  if (!(cur.peek() == '-' && cur.peek2() == '>')) cur.fail("expected '->'");
  cur.advance();
  cur.advance();

  // Head: optional `exists v1,...,vk .` prefix, then atoms.
  std::set<std::string> exists_vars;
  cur.skip_ws();
  {
    std::size_t save_pos = cur.pos, save_line = cur.line, save_col = cur.col;
    std::string kw;
    if (ident_start(cur.peek())) kw = cur.ident();
    if (kw == "exists" && !cur.lookahead_is('(')) {
      while (true) {
        SourceSpan at = cur.span();
        std::string v = cur.ident();
        if (!variable_spelling(v) || consts.count(v))
          throw ParseError("existential must be a variable, got " + v, at);
        exists_vars.insert(v);
        cur.skip_ws();
        if (cur.try_consume('.')) break;
        if (!cur.try_consume(',')) cur.fail("expected ',' or '.' after existential variable");
      }
    } else {
      cur.pos = save_pos;
      cur.line = save_line;
      cur.col = save_col;
    }
  }

  std::vector<Atom> head;
  while (true) {
    cur.skip_ws();
    SourceSpan at = cur.span();
    Atom a = parse_symbolic_atom(cur, consts, arities);
    for (const auto& t : a.args)
      if (t.is_constant()) throw ParseError("constants are not allowed in rule heads", at);
    head.push_back(std::move(a));
    cur.skip_ws();
    if (cur.try_consume('.')) break;
    if (!cur.try_consume(',')) cur.fail("expected ',' or '.' after head atom");
  }

  std::set<std::string> body_vars;
  for (const auto& a : body)
    for (const auto& v : atom_variables(a)) body_vars.insert(v);
  for (const auto& v : exists_vars)
    if (body_vars.count(v))
      throw ParseError("existential variable " + v + " occurs in the body", arrow_at);
  for (const auto& [v, at] : dom_spans) {
    if (body_vars.count(v))
      throw ParseError("@dom variable " + v + " occurs in the body", at);
  }
  std::set<std::string> head_vars;
  for (const auto& a : head)
    for (const auto& v : atom_variables(a)) head_vars.insert(v);
  for (const auto& v : head_vars)
    if (!body_vars.count(v) && !exists_vars.count(v) && !dom_vars.count(v))
      throw ParseError(
          "head variable " + v + " is neither bound in the body nor declared existential/@dom",
          arrow_at);
  for (const auto& [v, at] : dom_spans)
    if (!head_vars.count(v)) throw ParseError("@dom variable " + v + " absent from the head", at);

  try {
    return Rule::make(std::move(body), std::move(head), std::move(dom_vars));
  } catch (const PreconditionError& e) {
    throw ParseError(e.what(), arrow_at);
  }
}

bool statement_is_const_decl(Cursor& cur) {
  std::size_t save_pos = cur.pos, save_line = cur.line, save_col = cur.col;
  bool yes = false;
  cur.skip_ws();
  if (ident_start(cur.peek())) {
    std::string kw = cur.ident();
    yes = (kw == "const" && !cur.lookahead_is('('));
  }
  cur.pos = save_pos;
  cur.line = save_line;
  cur.col = save_col;
  return yes;
}

void parse_const_decl(Cursor& cur, std::set<std::string>& consts) {
  cur.ident();  // 'const'
  while (true) {
    consts.insert(cur.ident());
    cur.skip_ws();
    if (cur.try_consume('.')) break;
    if (!cur.try_consume(',')) cur.fail("expected ',' or '.' in const declaration");
  }
}

}  // namespace

RuleSet parse_rules(const std::string& text) {
  Cursor cur(text);
  std::set<std::string> consts;
  ArityTable arities;
  std::vector<Rule> rules;
  while (true) {
    cur.skip_ws();
    if (cur.eof()) break;
    if (statement_is_const_decl(cur))
      parse_const_decl(cur, consts);
    else
      rules.push_back(parse_rule_stmt(cur, consts, arities));
  }
  return RuleSet::make(std::move(rules));
}

Instance parse_instance(const std::string& text) {
  Cursor cur(text);
  ArityTable arities;
  std::vector<Atom> facts;
  while (true) {
    cur.skip_ws();
    if (cur.eof()) break;
    SourceSpan at = cur.span();
    std::string rel = cur.ident();
    cur.expect('(', "after relation name");
    Atom a;
    a.relation = rel;
    if (!cur.try_consume(')')) {
      while (true) {
        a.args.push_back(parse_ground_term(cur));
        cur.skip_ws();
        if (cur.try_consume(')')) break;
        if (!cur.try_consume(',')) cur.fail("expected ',' or ')' in fact argument list");
      }
    }
    arities.note(rel, a.args.size(), at);
    cur.expect('.', "after fact");
    facts.push_back(std::move(a));
  }
  return Instance(std::move(facts));
}

std::vector<ConjunctiveQuery> parse_queries(const std::string& text) {
  Cursor cur(text);
  std::set<std::string> consts;
  ArityTable arities;
  std::vector<ConjunctiveQuery> out;
  while (true) {
    cur.skip_ws();
    if (cur.eof()) break;
    if (statement_is_const_decl(cur)) {
      parse_const_decl(cur, consts);
      continue;
    }
    SourceSpan at = cur.span();
    if (!cur.try_consume('?')) cur.fail("expected '?' starting a query");
    cur.expect('(', "after '?'");
    std::vector<std::string> free_vars;
    if (!cur.try_consume(')')) {
      while (true) {
        SourceSpan vat = cur.span();
        std::string v = cur.ident();
        if (!variable_spelling(v) || consts.count(v))
          throw ParseError("free variable expected in query head, got " + v, vat);
        free_vars.push_back(v);
        cur.skip_ws();
        if (cur.try_consume(')')) break;
        if (!cur.try_consume(',')) cur.fail("expected ',' or ')' in query head");
      }
    }
    cur.skip_ws();
    if (!(cur.peek() == ':' && cur.peek2() == '=')) cur.fail("expected ':='");
    cur.advance();
    cur.advance();
    std::vector<Atom> body;
    while (true) {
      body.push_back(parse_symbolic_atom(cur, consts, arities));
      cur.skip_ws();
      if (cur.try_consume('.')) break;
      if (!cur.try_consume(',')) cur.fail("expected ',' or '.' after query atom");
    }
    try {
      out.push_back(ConjunctiveQuery::make(std::move(free_vars), std::move(body)));
    } catch (const PreconditionError& e) {
      throw ParseError(e.what(), at);
    }
  }
  return out;
}

ConjunctiveQuery parse_query(const std::string& text) {
  auto qs = parse_queries(text);
  if (qs.empty()) throw ParseError("no query statement found", SourceSpan{1, 1});
  if (qs.size() > 1)
    throw ParseError("expected exactly one query statement, found " + std::to_string(qs.size()),
                     SourceSpan{1, 1});
  return qs.front();
}

// ---------------------------------------------------------------------------
// Printers

std::string print_term(const Term& t) { return t.text(); }
std::string print_atom(const Atom& a) { return a.text(); }

std::string print_instance(const Instance& inst) {
  std::string out;
  for (const auto& f : inst.facts()) out += f.text() + ".\n";
  return out;
}

namespace {

void collect_constants(const Atom& a, std::set<std::string>& out) {
  for (const auto& t : a.args)
    if (t.is_constant()) out.insert(t.name());
}

std::string const_decl_line(const std::set<std::string>& consts) {
  if (consts.empty()) return "";
  std::string s = "const ";
  bool first = true;
  for (const auto& c : consts) {
    if (!first) s += ", ";
    s += c;
    first = false;
  }
  return s + ".\n";
}

std::string rule_statement(const Rule& r) {
  std::string s;
  bool first = true;
  for (const auto& v : r.dom_vars) {
    s += (first ? "" : ", ") + std::string("@dom(") + v + ")";
    first = false;
  }
  for (const auto& a : r.body) {
    s += (first ? "" : ", ") + a.text();
    first = false;
  }
  if (first) s += "true";
  s += " -> ";
  if (!r.existentials.empty()) {
    s += "exists ";
    bool ef = true;
    for (const auto& v : r.existentials) {
      s += (ef ? "" : ", ") + v;
      ef = false;
    }
    s += ". ";
  }
  for (std::size_t i = 0; i < r.head.size(); ++i) s += (i ? ", " : "") + r.head[i].text();
  return s + ".";
}

std::string query_statement(const ConjunctiveQuery& q) {
  std::string s = "?(";
  for (std::size_t i = 0; i < q.free_vars.size(); ++i) s += (i ? ", " : "") + q.free_vars[i];
  s += ") := ";
  for (std::size_t i = 0; i < q.body.size(); ++i) s += (i ? ", " : "") + q.body[i].text();
  return s + ".";
}

}  // namespace

std::string print_rules(const RuleSet& rules) {
  std::set<std::string> consts;
  for (const auto& r : rules.rules) {
    for (const auto& a : r.body) collect_constants(a, consts);
    for (const auto& a : r.head) collect_constants(a, consts);
  }
  std::string out = const_decl_line(consts);
  for (const auto& r : rules.rules) out += rule_statement(r) + "\n";
  return out;
}

std::string print_query(const ConjunctiveQuery& q) {
  std::set<std::string> consts;
  for (const auto& a : q.body) collect_constants(a, consts);
  return const_decl_line(consts) + query_statement(q) + "\n";
}

std::string print_ucq(const std::vector<ConjunctiveQuery>& queries, bool complete) {
  std::string out = std::string("# complete: ") + (complete ? "yes" : "no") + "\n";
  std::set<std::string> consts;
  for (const auto& q : queries)
    for (const auto& a : q.body) collect_constants(a, consts);
  out += const_decl_line(consts);
  for (const auto& q : queries) out += query_statement(q) + "\n";
  return out;
}

}  // namespace tmqa::textio
