#include <random>

#include "doctest.h"
#include "helpers.hpp"
#include "tmqa/analysis.hpp"

using namespace tmqa;
using namespace tmqa_test;

TEST_CASE("islands enumerates bounded subsets including the empty set") {
  Instance d({A("P", {C("a")}), A("P", {C("b")}), A("P", {C("c")})});
  auto is2 = islands(d, 2);
  CHECK(is2.size() == 7);  // empty + 3 singletons + 3 pairs
  auto full = islands(d, 5);
  CHECK(full.size() == 8);

  std::vector<Atom> big;
  for (int i = 0; i < 40; ++i) big.push_back(A("P", {C("c" + std::to_string(i))}));
  CHECK_THROWS_AS(islands(Instance(big), 20), BudgetError);
}

TEST_CASE("the sticky example is non-local at every probed l") {
  auto sticky = rules("sticky.tgd");
  for (std::size_t l = 1; l <= 3; ++l) {
    std::vector<Atom> facts{A("E", {C("a"), C("b1"), C("b2"), C("c1")})};
    for (std::size_t i = 1; i <= l + 1; ++i)
      facts.push_back(A("R", {C("a"), C("c" + std::to_string(i))}));
    Instance d(facts);
    LocalityParams params;
    params.l = l;
    params.probe_depth = l + 2;
    auto report = locality_refute(sticky, params, d);
    REQUIRE(report.verdict == ProbeReport::Verdict::Refuted);
    // Witness re-verification: present in the full chase, missing from every
    // island chase.
    REQUIRE(report.witness.has_value());
    auto big = chase_to(sticky, d, params.probe_depth);
    CHECK(big.last().contains(report.witness->atom));
    for (const auto& island : islands(d, l)) {
      auto run = chase_to(sticky, island, params.probe_depth);
      CHECK(!run.last().contains(report.witness->atom));
    }
  }
}

TEST_CASE("R_c is refuted on the four-cycle even at degree 2") {
  auto rc = rules("rc.tgd");
  auto cycle = instance("cycle4.fact");
  LocalityParams params;
  params.l = 3;
  params.degree_bound = 2;
  params.probe_depth = 5;
  auto report = locality_refute(rc, params, cycle);
  CHECK(report.verdict == ProbeReport::Verdict::Refuted);
  REQUIRE(report.witness.has_value());
}

TEST_CASE("the linear path theory is never refuted at l = 1") {
  auto tp = rules("tp.tgd");
  std::mt19937 rng(42);
  const char* cs[] = {"a", "b", "c", "d"};
  for (int trial = 0; trial < 25; ++trial) {
    std::vector<Atom> facts;
    int n = 1 + static_cast<int>(rng() % 5);
    for (int i = 0; i < n; ++i) facts.push_back(A("E", {C(cs[rng() % 4]), C(cs[rng() % 4])}));
    LocalityParams params;
    params.l = 1;
    params.probe_depth = 4;
    auto report = locality_refute(tp, params, Instance(facts));
    REQUIRE(report.verdict == ProbeReport::Verdict::NotRefutedWithinBudget);
  }
}

TEST_CASE("distancing probe records instance and chase distances") {
  auto rd = rules("rd.tgd");
  auto g2 = instance("g2.fact");
  auto rep = distancing_probe(rd, g2, {{C("a0"), C("a2")}}, 4);
  REQUIRE(rep.pairs.size() == 1);
  CHECK(rep.pairs[0].dist_instance == 2);
  REQUIRE(rep.pairs[0].dist_chase.has_value());
  CHECK(*rep.pairs[0].dist_chase <= 3);

  // Empty theory: distances coincide, all ratios are 1.
  auto rep2 = distancing_probe(RuleSet::make({}), g2, {{C("a0"), C("a2")}}, 3);
  CHECK(rep2.pairs[0].ratio == doctest::Approx(1.0));
}

TEST_CASE("non-distancing evidence on G^8") {
  auto rd = rules("rd.tgd");
  AnalysisOptions opts;
  opts.chase.max_atoms = 2000000;
  auto rep = distancing_probe(rd, instance("g8.fact"), {{C("a0"), C("a8")}}, 4, opts);
  REQUIRE(rep.pairs[0].dist_chase.has_value());
  CHECK(*rep.pairs[0].dist_chase == 7);
  CHECK(rep.pairs[0].dist_instance == 8);
  CHECK(rep.max_ratio > 1.0);
  CHECK(rep.probe.verdict == ProbeReport::Verdict::Refuted);
}

TEST_CASE("check_enough classifies entailment depths") {
  auto ta = rules("ta.tgd");
  auto da = instance("abel.fact");
  auto q = query("abelq.cq");
  // The Mother-Mother query needs three stages (see the chase tests).
  auto verdicts = check_enough(ta, da, 3, {{q, {}}}, 4);
  REQUIRE(verdicts.size() == 1);
  CHECK(verdicts[0] == EnoughVerdict::True);
  auto verdicts2 = check_enough(ta, da, 2, {{q, {}}}, 4);
  CHECK(verdicts2[0] == EnoughVerdict::False);

  auto tp = rules("tp.tgd");
  Instance d({A("E", {C("a"), C("b")})});
  auto q2 = ConjunctiveQuery::make({}, {A("E", {C("b"), V("z")})});
  auto v3 = check_enough(tp, d, 0, {{q2, {}}}, 3);
  CHECK(v3[0] == EnoughVerdict::False);
  auto v4 = check_enough(tp, d, 3, {{q2, {}}}, 3);
  CHECK(v4[0] == EnoughVerdict::True);
}

TEST_CASE("C_D is the union of island cores") {
  auto core1 = rules("core1.tgd");
  Instance d({A("E", {C("a"), C("b")}), A("E", {C("c"), C("d")})});
  auto res = compute_C_D(core1, d, 1, 4);
  Instance expected({A("E", {C("a"), C("b")}), A("E", {C("b"), C("b")}),
                     A("E", {C("c"), C("d")}), A("E", {C("d"), C("d")})});
  CHECK(res.cd == expected);
  CHECK(res.observed_k == 2);
  CHECK(res.observed_k <= res.max_island_c);
}

TEST_CASE("banned_restrict computes M_F") {
  auto core1 = rules("core1.tgd");
  Instance d({A("E", {C("a"), C("b")})});

  // F = empty: nothing banned.
  auto none = banned_restrict(core1, d, Instance(), 3);
  auto full = chase_to(core1, d, 3);
  CHECK(none.m_f == full.last());

  // F = D: the Skolem chain is banned and the model check passes.
  auto res = banned_restrict(core1, d, d, 4);
  CHECK(res.m_f == Instance({A("E", {C("a"), C("b")}), A("E", {C("b"), C("b")})}));
  CHECK(res.model);
  CHECK(!res.banned.empty());
  for (const auto& t : res.banned) CHECK(t.is_skolem());

  // Monotone-true at deeper probes for this core-terminating theory.
  for (std::size_t depth = 4; depth <= 6; ++depth)
    CHECK(banned_restrict(core1, d, d, depth).model);

  auto tp = rules("tp.tgd");
  CHECK_THROWS_AS(banned_restrict(tp, d, d, 4), BudgetError);
}

TEST_CASE("ubdd probe on random instances of the core-terminating theory") {
  auto core1 = rules("core1.tgd");
  std::mt19937 rng(4242);
  const char* cs[] = {"a", "b", "c", "d"};
  std::vector<Instance> instances;
  while (instances.size() < 10) {
    std::vector<Atom> facts;
    int n = 1 + static_cast<int>(rng() % 4);
    for (int i = 0; i < n; ++i) facts.push_back(A("E", {C(cs[rng() % 4]), C(cs[rng() % 4])}));
    instances.push_back(Instance(facts));
  }
  auto rep = ubdd_probe(core1, instances, 5);
  CHECK(rep.entries.size() == 10);
  CHECK(rep.max_c <= 5);

  // An instance that is already a model has c = 0.
  auto rep2 = ubdd_probe(core1, {Instance({A("E", {C("a"), C("a")})})}, 3);
  CHECK(rep2.entries[0].c == 0);
}

TEST_CASE("the truncated E_i chain shows growing c with K") {
  auto make_chain_theory = [](int K) {
    std::vector<Rule> rs;
    for (int i = 1; i <= K; ++i)
      rs.push_back(Rule::make({A("E" + std::to_string(i), {V("x"), V("y")})},
                              {A("E" + std::to_string(i - 1), {V("y"), V("z")})}));
    return RuleSet::make(rs);
  };
  auto probe = [&](int K) {
    Instance d({A("E" + std::to_string(K), {C("a"), C("b")})});
    auto rep = ubdd_probe(make_chain_theory(K), {d}, K + 2);
    return rep.max_c;
  };
  auto c2 = probe(2);
  auto c4 = probe(4);
  CHECK(c2 == 2);
  CHECK(c4 == 4);
  CHECK(c4 > c2);
}

TEST_CASE("estimate_n_at sees the one-stage Datalog delay") {
  auto appa = rules("appa.tgd");
  Instance d({A("E", {C("a"), C("b")}), A("P", {C("c")})});
  auto n_at = estimate_n_at(appa, {d}, 4);
  CHECK(n_at >= 1);
  CHECK(n_at <= 2);
}

TEST_CASE("make_connected widens every atom with a shared fresh variable") {
  auto sticky = rules("sticky.tgd");
  auto connected = make_connected(sticky);
  auto orig_sig = sticky.signature();
  auto new_sig = connected.signature();
  for (const auto& [rel, arity] : orig_sig) CHECK(new_sig.at(rel) == arity + 1);
  for (const auto& r : connected.rules) CHECK(r.connected);
  CHECK(connected.rules.size() == sticky.rules.size());
}

TEST_CASE("gaifman_degree") {
  CHECK(gaifman_degree(instance("cycle4.fact")) == 2);
  CHECK(gaifman_degree(Instance()) == 0);
}
