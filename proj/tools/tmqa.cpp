// tmqa: chase, rewrite and analyze existential-rule theories from the command
// line. One subcommand per task; see --help.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "tmqa/analysis.hpp"
#include "tmqa/chase.hpp"
#include "tmqa/homo.hpp"
#include "tmqa/markedrw.hpp"
#include "tmqa/model.hpp"
#include "tmqa/normalizer.hpp"
#include "tmqa/rewriter.hpp"
#include "tmqa/textio.hpp"

namespace {

using nlohmann::json;
using namespace tmqa;

constexpr int kExitOk = 0;
constexpr int kExitNegative = 1;  // refutation / negative verdict of a check
constexpr int kExitUsage = 2;
constexpr int kExitBudget = 3;

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Writes atomically: temp file in place, then rename.
void spill(const std::string& path, const std::string& content) {
  std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    if (!out) throw Error("cannot write " + tmp);
    out << content;
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) throw Error("cannot rename into " + path);
}

json term_json(const Term& t) { return textio::print_term(t); }

json atom_json(const Atom& a) { return textio::print_atom(a); }

json probe_json(const ProbeReport& report) {
  json j;
  j["verdict"] = report.verdict == ProbeReport::Verdict::Refuted ? "refuted"
                                                                 : "not-refuted-within-budget";
  if (report.witness) {
    json w;
    w["atom"] = atom_json(report.witness->atom);
    w["note"] = report.witness->note;
    json facts = json::array();
    for (const auto& f : report.witness->instance.facts()) facts.push_back(atom_json(f));
    w["instance"] = facts;
    j["witness"] = w;
  }
  json consts = json::object();
  for (const auto& [name, value] : report.constants_estimated)
    consts[name] = {{"value", value.first}, {"observed_at_depth", value.second}};
  j["constants"] = consts;
  j["notes"] = report.notes;
  return j;
}

void write_report(const std::string& path, json j) {
  j["schema"] = 1;
  if (path.empty())
    std::cout << j.dump(2) << "\n";
  else
    spill(path, j.dump(2) + "\n");
}

int run_chase(const std::string& rules_path, const std::string& data_path, std::size_t depth,
              std::size_t cap, const std::string& out) {
  auto theory = textio::parse_rules(slurp(rules_path));
  auto data = textio::parse_instance(slurp(data_path));
  ChaseOptions opts;
  opts.max_atoms = cap;
  auto run = chase_to(theory, data, depth, opts);
  std::string header = "# chase of " + data_path + " under " + rules_path + "\n";
  header += "# stages:";
  for (const auto& s : run.stages) header += " " + std::to_string(s.size());
  header += run.saturated ? " (saturated)\n" : "\n";
  std::string body = textio::print_instance(run.last());
  if (out.empty())
    std::cout << header << body;
  else
    spill(out, header + body);
  std::cerr << "chase: " << run.stages.size() - 1 << " stages, " << run.last().size()
            << " atoms" << (run.saturated ? ", saturated" : "") << "\n";
  return kExitOk;
}

int run_rewrite(const std::string& rules_path, const std::string& query_path, std::size_t fuel,
                const std::string& emit) {
  auto theory = textio::parse_rules(slurp(rules_path));
  auto q = textio::parse_query(slurp(query_path));
  RewriteOptions opts;
  opts.fuel = fuel;
  auto rs = rewrite(theory, q, opts);
  std::string out = textio::print_ucq(rs.queries, rs.complete);
  if (emit.empty())
    std::cout << out;
  else
    spill(emit, out);
  std::cerr << "rewrite: " << rs.queries.size() << " disjuncts, complete: "
            << (rs.complete ? "yes" : "no") << ", rounds: " << rs.fuel_used
            << ", rs_value: " << rs.rs_value << "\n";
  return kExitOk;
}

int run_markedrw(const std::string& query_path, int K, const std::string& trace_path,
                 const std::string& emit) {
  auto q = textio::parse_query(slurp(query_path));
  bool rg_signature = true;
  for (const auto& a : q.body)
    rg_signature = rg_signature && (a.relation == "R" || a.relation == "G");
  ProcessResult res = (K == 2 && rg_signature) ? run_process(q) : run_process_K(K, q);
  std::string out = textio::print_ucq(res.rewriting.queries, res.rewriting.complete);
  if (emit.empty())
    std::cout << out;
  else
    spill(emit, out);
  if (!trace_path.empty()) {
    std::string t;
    for (const auto& st : res.trace) {
      t += std::to_string(st.index) + " " + st.op + " " + st.variable + "\n";
      t += "  before: " + st.before_key + "\n";
      for (const auto& k : st.after_keys) t += "  after:  " + k + "\n";
      t += "  srk: " + st.srk_before + " -> " + st.srk_after + "\n";
    }
    spill(trace_path, t);
  }
  std::cerr << "markedrw: " << res.rewriting.queries.size() << " disjuncts in "
            << res.trace.size() << " steps";
  if (res.dropped_improper) std::cerr << ", " << res.dropped_improper << " improper dropped";
  if (res.dropped_inert) std::cerr << ", " << res.dropped_inert << " inert dropped";
  std::cerr << "\n";
  return kExitOk;
}

int run_core(const std::string& rules_path, const std::string& data_path, std::size_t depth,
             const std::string& out) {
  auto theory = textio::parse_rules(slurp(rules_path));
  auto data = textio::parse_instance(slurp(data_path));
  auto res = core_retract(theory, data, depth);
  if (!res) {
    std::cerr << "core: no retraction witness within depth " << depth
              << " (theory may not be core-terminating)\n";
    return kExitNegative;
  }
  std::string header = "# core with c_value " + std::to_string(res->c_value) +
                       " (searched from Ch_{n+" + std::to_string(res->slack) + "})\n";
  std::string body = textio::print_instance(res->core);
  if (out.empty())
    std::cout << header << body;
  else
    spill(out, header + body);
  std::cerr << "core: " << res->core.size() << " atoms, c_value " << res->c_value << "\n";
  return kExitOk;
}

int run_normalize(const std::string& rules_path, std::size_t fuel, const std::string& out) {
  auto theory = textio::parse_rules(slurp(rules_path));
  NormalizeOptions opts;
  opts.fuel = fuel;
  auto nf = normalize(theory, opts);
  std::string text = textio::print_rules(nf.t_nf);
  text += "# nullary predicates:\n";
  for (const auto& [name, atoms] : nf.m_bodies) {
    text += "#   " + name + " <-";
    for (const auto& a : atoms) text += " " + a.text();
    text += atoms.empty() ? " (empty remainder)\n" : "\n";
  }
  if (out.empty())
    std::cout << text;
  else
    spill(out, text);
  std::cerr << "normalize: " << nf.t_ii.rules.size() << " existential + "
            << nf.t_iii.rules.size() << " nullary rules\n";
  return kExitOk;
}

int run_ancestors(const std::string& rules_path, const std::string& data_path, std::size_t depth,
                  std::size_t samples, std::uint64_t seed, const std::string& report_path) {
  auto theory = textio::parse_rules(slurp(rules_path));
  auto data = textio::parse_instance(slurp(data_path));
  auto run = chase_to(theory, data, depth);
  auto forest = existential_skeleton(run);
  json j;
  j["depth"] = depth;
  json trees = json::array();
  auto canonical = ancestor_probe(run, forest, canonical_trace(run));
  for (const auto& [root, count] : canonical.per_root)
    trees.push_back({{"root", term_json(root)}, {"ancestors", count}});
  j["canonical"] = {{"per_root", trees}, {"max", canonical.max_count}};
  json sampled = json::array();
  std::size_t overall_max = canonical.max_count;
  for (std::size_t s = 0; s < samples; ++s) {
    auto probe = ancestor_probe(run, forest, random_trace(run, seed + s));
    sampled.push_back(probe.max_count);
    overall_max = std::max(overall_max, probe.max_count);
  }
  j["sampled_max"] = sampled;
  j["max_ancestors"] = overall_max;
  write_report(report_path, j);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"theory-mediated query answering workbench"};
  app.set_version_flag("--version", "tmqa 0.1.0");
  app.require_subcommand(1);

  // chase
  auto* chase_cmd = app.add_subcommand("chase", "run the semi-oblivious Skolem chase");
  std::string c_rules, c_data, c_out;
  std::size_t c_depth = 4, c_cap = 500000;
  chase_cmd->add_option("--rules", c_rules, "rule set (.tgd)")->required();
  chase_cmd->add_option("--data", c_data, "instance (.fact)")->required();
  chase_cmd->add_option("--depth", c_depth, "number of parallel stages");
  chase_cmd->add_option("--cap", c_cap, "atom budget");
  chase_cmd->add_option("--out", c_out, "write the final stage here");

  // rewrite
  auto* rew_cmd = app.add_subcommand("rewrite", "generic fuel-bounded UCQ rewriting");
  std::string r_rules, r_query, r_emit;
  std::size_t r_fuel = 8;
  rew_cmd->add_option("--rules", r_rules)->required();
  rew_cmd->add_option("--query", r_query)->required();
  rew_cmd->add_option("--fuel", r_fuel, "closure rounds");
  rew_cmd->add_option("--emit-ucq", r_emit, "write the UCQ here");

  // markedrw
  auto* mrw_cmd =
      app.add_subcommand("markedrw", "complete marked-query rewriting for the grid theories");
  std::string m_query, m_trace, m_emit;
  int m_K = 2;
  mrw_cmd->add_option("--query", m_query)->required();
  mrw_cmd->add_option("--K", m_K, "signature level count (2 = R/G)");
  mrw_cmd->add_option("--trace", m_trace, "write the per-step trace here");
  mrw_cmd->add_option("--emit-ucq", m_emit);

  // core
  auto* core_cmd = app.add_subcommand("core", "bounded core computation");
  std::string k_rules, k_data, k_out;
  std::size_t k_depth = 4;
  core_cmd->add_option("--rules", k_rules)->required();
  core_cmd->add_option("--data", k_data)->required();
  core_cmd->add_option("--depth", k_depth);
  core_cmd->add_option("--out", k_out);

  // analyze
  auto* an_cmd = app.add_subcommand("analyze", "empirical locality/distancing/UBDD probes");
  an_cmd->require_subcommand(1);
  std::string a_rules, a_data, a_report, a_query;
  std::size_t a_l = 1, a_depth = 4, a_n = 0;
  std::size_t a_degree_raw = 0;
  auto* loc = an_cmd->add_subcommand("locality", "union-of-island-chases check");
  auto* dis = an_cmd->add_subcommand("distancing", "Gaifman distance ratios");
  auto* eno = an_cmd->add_subcommand("enough", "Enough(n, query) checks");
  auto* cdp = an_cmd->add_subcommand("cd", "union of island cores");
  auto* ubd = an_cmd->add_subcommand("ubdd", "least stage containing the core");
  for (auto* sub : {loc, dis, eno, cdp, ubd}) {
    sub->add_option("--rules", a_rules)->required();
    sub->add_option("--data", a_data)->required();
    sub->add_option("--depth", a_depth);
    sub->add_option("--report", a_report, "JSON report path (default: stdout)");
  }
  loc->add_option("--l", a_l, "locality constant candidate");
  cdp->add_option("--l", a_l, "island size bound");
  auto* degree_opt = loc->add_option("--degree", a_degree_raw, "declared degree bound");
  eno->add_option("--query", a_query, "query file (.cq)")->required();
  eno->add_option("--n", a_n, "stage bound to certify")->required();

  // normalize / ancestors
  auto* nf_cmd =
      app.add_subcommand("normalize", "three-step normalization of a binary theory");
  std::string n_rules, n_out;
  std::size_t n_fuel = 8;
  nf_cmd->add_option("--rules", n_rules)->required();
  nf_cmd->add_option("--fuel", n_fuel);
  nf_cmd->add_option("--out", n_out);

  auto* anc_cmd = app.add_subcommand("ancestors", "ancestor-set probe over a normalized theory");
  std::string anc_rules, anc_data, anc_report;
  std::size_t anc_depth = 5, anc_samples = 10;
  std::uint64_t anc_seed = 1;
  anc_cmd->add_option("--rules", anc_rules)->required();
  anc_cmd->add_option("--data", anc_data)->required();
  anc_cmd->add_option("--depth", anc_depth);
  anc_cmd->add_option("--samples", anc_samples, "random parent functions to sample");
  anc_cmd->add_option("--seed", anc_seed);
  anc_cmd->add_option("--report", anc_report);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*chase_cmd) return run_chase(c_rules, c_data, c_depth, c_cap, c_out);
    if (*rew_cmd) return run_rewrite(r_rules, r_query, r_fuel, r_emit);
    if (*mrw_cmd) return run_markedrw(m_query, m_K, m_trace, m_emit);
    if (*core_cmd) return run_core(k_rules, k_data, k_depth, k_out);
    if (*nf_cmd) return run_normalize(n_rules, n_fuel, n_out);
    if (*anc_cmd)
      return run_ancestors(anc_rules, anc_data, anc_depth, anc_samples, anc_seed, anc_report);

    if (*loc) {
      auto theory = textio::parse_rules(slurp(a_rules));
      auto data = textio::parse_instance(slurp(a_data));
      LocalityParams params;
      params.l = a_l;
      params.probe_depth = a_depth;
      if (degree_opt->count() > 0) params.degree_bound = a_degree_raw;
      auto report = locality_refute(theory, params, data);
      json j = probe_json(report);
      j["l"] = a_l;
      j["depth"] = a_depth;
      write_report(a_report, j);
      return report.verdict == ProbeReport::Verdict::Refuted ? kExitNegative : kExitOk;
    }
    if (*dis) {
      auto theory = textio::parse_rules(slurp(a_rules));
      auto data = textio::parse_instance(slurp(a_data));
      std::vector<std::pair<Term, Term>> pairs;
      std::vector<Term> dom(data.domain().begin(), data.domain().end());
      for (std::size_t i = 0; i < dom.size(); ++i)
        for (std::size_t j = i + 1; j < dom.size(); ++j) pairs.push_back({dom[i], dom[j]});
      auto rep = distancing_probe(theory, data, pairs, a_depth);
      json j = probe_json(rep.probe);
      json table = json::array();
      for (const auto& p : rep.pairs) {
        json row;
        row["a"] = term_json(p.a);
        row["b"] = term_json(p.b);
        row["dist_instance"] = p.dist_instance ? json(*p.dist_instance) : json(nullptr);
        row["dist_chase"] = p.dist_chase ? json(*p.dist_chase) : json(nullptr);
        row["ratio"] = p.ratio;
        table.push_back(row);
      }
      j["pairs"] = table;
      j["max_ratio"] = rep.max_ratio;
      write_report(a_report, j);
      return rep.max_ratio > 1.0 ? kExitNegative : kExitOk;
    }
    if (*eno) {
      auto theory = textio::parse_rules(slurp(a_rules));
      auto data = textio::parse_instance(slurp(a_data));
      auto q = textio::parse_query(slurp(a_query));
      if (!q.boolean()) throw Error("enough: only Boolean queries are supported on the CLI");
      auto verdicts = check_enough(theory, data, a_n, {{q, {}}}, a_depth);
      json j;
      j["n"] = a_n;
      j["verdict"] = verdicts[0] == EnoughVerdict::True
                         ? "true"
                         : verdicts[0] == EnoughVerdict::False ? "false" : "unknown";
      write_report(a_report, j);
      return verdicts[0] == EnoughVerdict::False ? kExitNegative : kExitOk;
    }
    if (*cdp) {
      auto theory = textio::parse_rules(slurp(a_rules));
      auto data = textio::parse_instance(slurp(a_data));
      auto res = compute_C_D(theory, data, a_l, a_depth);
      json j;
      j["observed_k"] = res.observed_k;
      j["max_island_c"] = res.max_island_c;
      json atoms = json::array();
      for (const auto& a : res.cd.facts()) atoms.push_back(atom_json(a));
      j["cd"] = atoms;
      write_report(a_report, j);
      return kExitOk;
    }
    if (*ubd) {
      auto theory = textio::parse_rules(slurp(a_rules));
      auto data = textio::parse_instance(slurp(a_data));
      auto rep = ubdd_probe(theory, {data}, a_depth);
      json j;
      j["c"] = rep.max_c;
      write_report(a_report, j);
      return kExitOk;
    }
  } catch (const BudgetError& e) {
    std::cerr << "budget exhausted: " << e.what() << "\n";
    return kExitBudget;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitUsage;
}
