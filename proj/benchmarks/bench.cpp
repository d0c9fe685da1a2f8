#include <benchmark/benchmark.h>

#include <fstream>
#include <sstream>

#include "tmqa/chase.hpp"
#include "tmqa/homo.hpp"
#include "tmqa/markedrw.hpp"
#include "tmqa/rewriter.hpp"
#include "tmqa/textio.hpp"

using namespace tmqa;

namespace {

std::string slurp(const std::string& name) {
  std::ifstream in(std::string(TMQA_TEST_DATA_DIR) + "/" + name);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

RuleSet grid_theory() { return textio::parse_rules(slurp("rd.tgd")); }

Instance green_path(int len) {
  std::vector<Atom> facts;
  for (int i = 0; i < len; ++i)
    facts.push_back(Atom{"G", {Term::constant("a" + std::to_string(i)),
                               Term::constant("a" + std::to_string(i + 1))}});
  return Instance(facts);
}

void BM_ChaseGreenPath(benchmark::State& state) {
  auto rd = grid_theory();
  auto d = green_path(static_cast<int>(state.range(0)));
  ChaseOptions opts;
  opts.max_atoms = 2000000;
  for (auto _ : state) {
    auto run = chase_to(rd, d, 4, opts);
    benchmark::DoNotOptimize(run.last().size());
  }
}
BENCHMARK(BM_ChaseGreenPath)->Arg(2)->Arg(4)->Arg(8);

void BM_ErkPhiR(benchmark::State& state) {
  auto phi = textio::parse_query(slurp("phir" + std::to_string(state.range(0)) + ".cq"));
  auto levels = rd_levels();
  auto Q = MarkedQuery::make(phi, {"x", "y"}, levels);
  Atom alpha{"G", {Term::variable("x'"), Term::variable("y'")}};
  for (auto _ : state) {
    auto v = erk(Q, alpha, levels);
    benchmark::DoNotOptimize(v);
  }
}
BENCHMARK(BM_ErkPhiR)->Arg(1)->Arg(2)->Arg(3);

void BM_RunProcessPhiR(benchmark::State& state) {
  auto phi = textio::parse_query(slurp("phir" + std::to_string(state.range(0)) + ".cq"));
  for (auto _ : state) {
    auto res = run_process(phi);
    benchmark::DoNotOptimize(res.rewriting.queries.size());
  }
}
BENCHMARK(BM_RunProcessPhiR)->Arg(1)->Arg(2)->Unit(benchmark::kMillisecond);

void BM_RewritePathTheory(benchmark::State& state) {
  auto tp = textio::parse_rules(slurp("tp.tgd"));
  auto q = textio::parse_query(slurp("ezdy.cq"));
  for (auto _ : state) {
    auto rs = rewrite(tp, q, {});
    benchmark::DoNotOptimize(rs.queries.size());
  }
}
BENCHMARK(BM_RewritePathTheory);

void BM_CanonicalizePhiR3(benchmark::State& state) {
  auto phi = textio::parse_query(slurp("phir3.cq"));
  for (auto _ : state) {
    auto c = canonicalize(phi);
    benchmark::DoNotOptimize(c.body.size());
  }
}
BENCHMARK(BM_CanonicalizePhiR3);

void BM_CoreLoopClosing(benchmark::State& state) {
  auto core1 = textio::parse_rules(slurp("core1.tgd"));
  Instance start({Atom{"E", {Term::constant("a"), Term::constant("b")}}});
  for (auto _ : state) {
    auto res = core_retract(core1, start, 4);
    benchmark::DoNotOptimize(res.has_value());
  }
}
BENCHMARK(BM_CoreLoopClosing)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
