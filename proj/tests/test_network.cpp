#include <cmath>
#include <numeric>

#include "doctest.h"

#include "aoi/baselines.hpp"
#include "aoi/network.hpp"
#include "aoi/scenario.hpp"
#include "oracle.hpp"

using namespace aoi;

namespace {

Action all_devices(const Topology& topo) {
  Action a;
  for (const auto& g : topo.groups) a.sample_sets.push_back(g);
  a.update_set.resize(topo.num_devices);
  std::iota(a.update_set.begin(), a.update_set.end(), 0);
  return a;
}

Action idle(const Topology& topo) {
  Action a;
  a.sample_sets.assign(topo.num_relays, {});
  return a;
}

TopologyConfig lossless(int M, int N, int L, int K) {
  TopologyConfig c;
  c.num_devices = M;
  c.num_relays = N;
  c.relay_channels = L;
  c.tbs_channels = K;
  c.loss_sample_range = c.loss_update_range = {0.0, 0.0};
  c.traffic = TrafficKind::generate_at_will;
  return c;
}

}  // namespace

TEST_SUITE("network") {

TEST_CASE("uniform split of 30 devices over 3 relays") {
  TopologyConfig c;
  c.num_devices = 30;
  c.num_relays = 3;
  c.relay_channels = 4;
  c.tbs_channels = 10;
  const auto topo = build_topology(c, 1);
  CHECK(topo.group_sizes() == std::vector<int>{10, 10, 10});
  for (int d = 0; d < 30; ++d) CHECK(topo.relay_of[d] == d / 10);
}

TEST_CASE("uneven split gives the remainder to earlier relays") {
  TopologyConfig c;
  c.num_devices = 8;
  c.num_relays = 3;
  CHECK(build_topology(c, 1).group_sizes() == std::vector<int>{3, 3, 2});
}

TEST_CASE("single relay owns every device") {
  const auto topo = build_topology(lossless(2, 1, 1, 1), 3);
  CHECK(topo.groups.size() == 1);
  CHECK(topo.groups[0] == std::vector<int>{0, 1});
  CHECK(topo.relay_of == std::vector<int>{0, 0});
}

TEST_CASE("same seed gives identical loss vectors") {
  TopologyConfig c;
  c.loss_sample_range = c.loss_update_range = {0.0, 0.5};
  const auto a = build_topology(c, 7);
  const auto b = build_topology(c, 7);
  CHECK(a.loss_sample == b.loss_sample);
  CHECK(a.loss_update == b.loss_update);
  for (double l : a.loss_sample) CHECK((l >= 0.0 && l < 0.5));
  CHECK(build_topology(c, 8).loss_sample != a.loss_sample);
}

TEST_CASE("growing M keeps the first devices' parameters") {
  TopologyConfig c;
  c.num_devices = 8;
  const auto small = build_topology(c, 5);
  c.num_devices = 16;
  const auto big = build_topology(c, 5);
  for (int d = 0; d < 8; ++d) {
    CHECK(small.loss_sample[d] == big.loss_sample[d]);
    CHECK(small.loss_update[d] == big.loss_update[d]);
    CHECK(std::get<Periodic>(small.traffic[d]).period ==
          std::get<Periodic>(big.traffic[d]).period);
  }
}

TEST_CASE("periodicities come from the configured set") {
  TopologyConfig c;
  c.num_devices = 40;
  c.periodicity_set = {2, 7};
  for (const auto& t : build_topology(c, 2).traffic) {
    const int p = std::get<Periodic>(t).period;
    CHECK((p == 2 || p == 7));
  }
}

TEST_CASE("invalid topologies are rejected") {
  CHECK_THROWS_AS(build_topology(lossless(2, 3, 1, 1), 1), std::invalid_argument);
  CHECK_THROWS_AS(build_topology(lossless(0, 1, 1, 1), 1), std::invalid_argument);
  CHECK_THROWS_AS(build_topology(lossless(4, 1, 0, 1), 1), std::invalid_argument);
  auto c = lossless(4, 2, 1, 1);
  c.group_sizes = {3, 3};
  CHECK_THROWS_AS(build_topology(c, 1), std::invalid_argument);
  c.group_sizes = {};
  c.loss_sample_range = {0.2, 1.0};
  CHECK_THROWS_AS(build_topology(c, 1), std::invalid_argument);
}

TEST_CASE("latest generation") {
  CHECK(latest_generation(Periodic{3}, 7, false) == 6);
  CHECK(latest_generation(Periodic{3}, 2, false) == 0);
  CHECK(latest_generation(Periodic{3}, 3, true) == 3);
  CHECK(latest_generation(GenerateAtWill{}, 5, true) == 5);
}

TEST_CASE("initial state has unit AoI everywhere") {
  const auto snap = NetState::initial(3).snapshot();
  CHECK(snap.slot == 1);
  CHECK(snap.relay == std::vector<int>{1, 1, 1});
  CHECK(snap.tbs == std::vector<int>{1, 1, 1});
}

TEST_CASE("single-slot transitions") {
  const auto topo = build_topology(lossless(2, 1, 1, 1), 1);
  auto rng = make_rng(1);
  NetState s = NetState::initial(2);
  s.slot = 5;
  s.device_gen = {5, 5};
  s.relay_gen = {1, 3};  // relay AoI 4 and 2
  s.tbs_gen = {0, 0};

  SUBCASE("lossless sampling resets relay AoI to 1") {
    Action a{{{0}}, {}};
    const auto next = step_dynamics(s, topo, a, rng).next.snapshot();
    CHECK(next.relay[0] == 1);
    CHECK(next.relay[1] == 3);
  }
  SUBCASE("unsampled relay AoI grows by one") {
    const auto next = step_dynamics(s, topo, idle(topo), rng).next.snapshot();
    CHECK(next.relay[0] == 5);
    CHECK(next.relay[1] == 3);
  }
  SUBCASE("update forwards the start-of-slot relay packet") {
    Action a{{{}}, {1}};
    const auto next = step_dynamics(s, topo, a, rng).next.snapshot();
    CHECK(next.tbs[1] == 3);  // relay AoI 2 at t -> TBS AoI 3 at t+1
    CHECK(next.tbs[0] == 6);
  }
  SUBCASE("sampling and updating the same device in one slot") {
    Action a{{{1}}, {1}};
    const auto next = step_dynamics(s, topo, a, rng).next.snapshot();
    CHECK(next.relay[1] == 1);
    CHECK(next.tbs[1] == 3);
  }
}

TEST_CASE("lost transmissions leave AoI growing") {
  auto topo = build_topology(lossless(1, 1, 1, 1), 1);
  topo.loss_sample = {0.999999};
  topo.loss_update = {0.999999};
  auto rng = make_rng(4);
  auto s = NetState::initial(1);
  for (int i = 0; i < 5; ++i) {
    const auto r = step_dynamics(s, topo, all_devices(topo), rng);
    CHECK(r.outcome.sample_lost[0] == 1);
    CHECK(r.outcome.update_lost[0] == 1);
    s = r.next;
  }
  CHECK(s.snapshot().relay[0] == 6);
  CHECK(s.snapshot().tbs[0] == 6);
}

TEST_CASE("full scheduling without losses reaches the pipeline bound") {
  const auto topo = build_topology(lossless(6, 2, 3, 6), 1);
  auto rng = make_rng(2);
  auto s = NetState::initial(6);
  for (int t = 1; t <= 10; ++t) {
    s = step_dynamics(s, topo, all_devices(topo), rng).next;
    const auto snap = s.snapshot();
    for (int m = 0; m < 6; ++m) {
      CHECK(snap.relay[m] == 1);
      CHECK(snap.tbs[m] == 2);
    }
  }
}

TEST_CASE("constraint violations are reported") {
  const auto topo = build_topology(lossless(4, 2, 1, 2), 1);
  auto rng = make_rng(1);
  const auto s = NetState::initial(4);
  CHECK_THROWS_AS(step_dynamics(s, topo, {{{0, 1}, {}}, {}}, rng),
                  ConstraintViolation);  // L exceeded
  CHECK_THROWS_AS(step_dynamics(s, topo, {{{2}, {}}, {}}, rng),
                  ConstraintViolation);  // device 2 belongs to relay 1
  CHECK_THROWS_AS(step_dynamics(s, topo, {{{}, {}}, {0, 1, 2}}, rng),
                  ConstraintViolation);  // K exceeded
  CHECK_THROWS_AS(step_dynamics(s, topo, {{{}, {}}, {1, 1}}, rng),
                  ConstraintViolation);  // duplicate
  CHECK_THROWS_AS(step_dynamics(s, topo, {{{}}, {}}, rng),
                  ConstraintViolation);  // wrong relay count
  CHECK_NOTHROW(step_dynamics(s, topo, {{{1}, {3}}, {0, 2}}, rng));
}

TEST_CASE("chain monotonicity and +1-or-reset deltas under random schedules") {
  TopologyConfig c;
  c.num_devices = 9;
  c.num_relays = 3;
  c.relay_channels = 2;
  c.tbs_channels = 3;
  for (auto traffic : {TrafficKind::periodic, TrafficKind::generate_at_will}) {
    c.traffic = traffic;
    const auto topo = build_topology(c, 11);
    auto rng = make_rng(3);
    auto sched_rng = make_rng(4);
    auto s = NetState::initial(9);
    for (int t = 0; t < 2000; ++t) {
      const auto action = random_sched(topo, sched_rng);
      const auto before = s.snapshot();
      const auto r = step_dynamics(s, topo, action, rng);
      const auto after = r.next.snapshot();
      for (int m = 0; m < 9; ++m) {
        REQUIRE(r.next.tbs_gen[m] <= r.next.relay_gen[m]);
        REQUIRE(r.next.relay_gen[m] <= r.next.device_gen[m]);
        REQUIRE(after.tbs[m] >= after.relay[m]);
        const bool relay_reset =
            r.outcome.sampled[m] && !r.outcome.sample_lost[m];
        if (!relay_reset) REQUIRE(after.relay[m] == before.relay[m] + 1);
        if (relay_reset)
          REQUIRE(after.relay[m] ==
                  std::min(before.relay[m] + 1,
                           after.slot - latest_generation(topo.traffic[m],
                                                          before.slot, true)));
        const bool tbs_reset = r.outcome.updated[m] && !r.outcome.update_lost[m];
        REQUIRE(after.tbs[m] ==
                (tbs_reset ? before.relay[m] + 1 : before.tbs[m] + 1));
      }
      s = r.next;
    }
  }
}

TEST_CASE("sampling success frequency matches 1 - loss") {
  auto topo = build_topology(lossless(3, 1, 3, 3), 1);
  topo.loss_sample = {0.1, 0.35, 0.7};
  topo.loss_update = {0.2, 0.5, 0.05};
  auto rng = make_rng(99);
  const int n = 20000;
  std::vector<int> sample_ok(3, 0), update_ok(3, 0);
  const auto s = NetState::initial(3);
  for (int i = 0; i < n; ++i) {
    const auto r = step_dynamics(s, topo, all_devices(topo), rng);
    for (int m = 0; m < 3; ++m) {
      sample_ok[m] += !r.outcome.sample_lost[m];
      update_ok[m] += !r.outcome.update_lost[m];
    }
  }
  for (int m = 0; m < 3; ++m) {
    for (auto [count, loss] : {std::pair{sample_ok[m], topo.loss_sample[m]},
                               std::pair{update_ok[m], topo.loss_update[m]}}) {
      const double p = 1.0 - loss;
      const double se = std::sqrt(p * (1 - p) / n);
      CHECK(std::abs(count / double(n) - p) < 3 * se);
    }
  }
}

TEST_CASE("step draws the same number of uniforms for every action") {
  const auto topo = build_topology(lossless(4, 2, 2, 4), 1);
  auto a = make_rng(5);
  auto b = make_rng(5);
  const auto s = NetState::initial(4);
  step_dynamics(s, topo, idle(topo), a);
  step_dynamics(s, topo, all_devices(topo), b);
  CHECK(a() == b());
}

TEST_CASE("average AoI") {
  CHECK(average_aoi(std::vector<AoiSnapshot>{{2, {1, 1}, {3, 5}}}).tbs ==
        doctest::Approx(4.0));
  const std::vector<AoiSnapshot> ones{{2, {1, 1}, {1, 1}}, {3, {1, 1}, {1, 1}}};
  CHECK(average_aoi(ones).relay == 1.0);
  CHECK(average_aoi(ones).tbs == 1.0);
  CHECK(average_aoi(std::vector<AoiSnapshot>{{2, {1}, {1}}, {3, {1}, {2}}}).tbs ==
        1.5);
  CHECK_THROWS_AS(average_aoi(std::vector<AoiSnapshot>{}), std::invalid_argument);
}

TEST_CASE("action space cardinality") {
  SUBCASE("two devices, one channel each") {
    const auto size =
        action_space_cardinality(build_topology(lossless(2, 1, 1, 1), 1));
    CHECK(size.combinatorial == 4);
    CHECK(size.linear == 4);
  }
  SUBCASE("product of binomials, independent formula") {
    const auto size =
        action_space_cardinality(build_topology(lossless(16, 1, 8, 8), 1));
    // C(16,8) = 12870 computed by Pascal's rule
    std::vector<std::vector<long long>> pascal(17, std::vector<long long>(17, 0));
    for (int n = 0; n <= 16; ++n) {
      pascal[n][0] = 1;
      for (int k = 1; k <= n; ++k) pascal[n][k] = pascal[n - 1][k - 1] + pascal[n - 1][k];
    }
    CHECK(pascal[16][8] == 12870);
    CHECK(size.combinatorial == pascal[16][8] * pascal[16][8]);
    CHECK(size.linear == 32);
  }
  SUBCASE("channels beyond the group size leave one subset") {
    CHECK(binomial(3, 5) == 0);
    const auto size =
        action_space_cardinality(build_topology(lossless(3, 1, 5, 7), 1));
    CHECK(size.combinatorial == 1);
    CHECK(size.linear == 6);
    CHECK(binomial(30, 15) == boost::multiprecision::cpp_int("155117520"));
  }
}

TEST_CASE("Monte-Carlo AoI matches exhaustive enumeration") {
  oracle::TinyNet net{1, 1, {0.2, 0.4}, {0.3, 0.1}, {0, 2}};
  const auto topo = oracle::to_topology(net);
  const int T = 3;
  const double exact = oracle::maf_mad_expected_tbs(net, T);
  auto rng = make_rng(17);
  const int runs = 100000;
  double total = 0.0;
  for (int r = 0; r < runs; ++r) {
    auto s = NetState::initial(2);
    std::vector<AoiSnapshot> trace;
    for (int t = 0; t < T; ++t) {
      s = step_dynamics(s, topo, maf_mad(s.snapshot(), topo), rng).next;
      trace.push_back(s.snapshot());
    }
    total += average_aoi(trace).tbs;
  }
  CHECK(std::abs(total / runs - exact) / exact < 0.01);
}

}  // TEST_SUITE
