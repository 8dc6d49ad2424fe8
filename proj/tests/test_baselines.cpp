#include <cmath>
#include <numeric>

#include "doctest.h"

#include "aoi/baselines.hpp"
#include "aoi/env.hpp"
#include "oracle.hpp"

using namespace aoi;

namespace {

Topology single_relay(int M, int L, int K) {
  TopologyConfig c;
  c.num_devices = M;
  c.num_relays = 1;
  c.relay_channels = L;
  c.tbs_channels = K;
  c.loss_sample_range = c.loss_update_range = {0.0, 0.0};
  c.traffic = TrafficKind::generate_at_will;
  return build_topology(c, 1);
}

AoiSnapshot snap(std::vector<int> relay, std::vector<int> tbs) {
  return {1, std::move(relay), std::move(tbs)};
}

}  // namespace

TEST_SUITE("baselines") {

TEST_CASE("top_k breaks ties toward the lowest index") {
  const std::vector<int> cand{0, 1, 2, 3};
  const std::vector<double> score{1, 3, 3, 2};
  CHECK(top_k(cand, score, 2) == std::vector<int>{1, 2});
  CHECK(top_k(cand, score, 3) == std::vector<int>{1, 2, 3});
  CHECK(top_k(cand, score, 10) == cand);
  CHECK(top_k(cand, std::vector<double>(4, 0.0), 2) == std::vector<int>{0, 1});
}

TEST_CASE("maf_mad examples") {
  SUBCASE("sampling picks the stalest relay copy") {
    const auto topo = single_relay(3, 1, 1);
    CHECK(maf_mad(snap({4, 2, 9}, {4, 2, 9}), topo).sample_sets ==
          std::vector<std::vector<int>>{{2}});
  }
  SUBCASE("updating picks the largest age difference") {
    const auto topo = single_relay(2, 1, 1);
    CHECK(maf_mad(snap({3, 6}, {10, 7}), topo).update_set == std::vector<int>{0});
  }
  SUBCASE("all equal ages choose the lowest indices") {
    const auto topo = single_relay(4, 2, 2);
    const auto a = maf_mad(snap({5, 5, 5, 5}, {5, 5, 5, 5}), topo);
    CHECK(a.sample_sets[0] == std::vector<int>{0, 1});
    CHECK(a.update_set == std::vector<int>{0, 1});
  }
}

TEST_CASE("maf examples") {
  const auto topo2 = single_relay(2, 1, 1);
  CHECK(maf(snap({3, 6}, {10, 7}), topo2).update_set == std::vector<int>{0});
  const auto topo3 = single_relay(3, 1, 2);
  CHECK(maf(snap({1, 1, 1}, {5, 5, 6}), topo3).update_set ==
        std::vector<int>{0, 2});
  const auto s = snap({7, 2, 4}, {9, 3, 8});
  CHECK(maf(s, topo3).sample_sets == maf_mad(s, topo3).sample_sets);
}

TEST_CASE("greedy baselines are pure") {
  TopologyConfig c;
  const auto topo = build_topology(c, 3);
  const auto s = snap({3, 1, 4, 1, 5, 9, 2, 6}, {5, 3, 5, 8, 9, 9, 7, 9});
  CHECK(maf_mad(s, topo) == maf_mad(s, topo));
  CHECK(maf(s, topo) == maf(s, topo));
}

TEST_CASE("round robin walks each group with wraparound") {
  const auto topo = single_relay(3, 2, 1);
  auto state = RoundRobinState::initial(topo);
  auto d1 = round_robin(state, topo);
  CHECK(d1.action.sample_sets[0] == std::vector<int>{0, 1});
  CHECK(d1.state.relay_cursor[0] == 2);
  auto d2 = round_robin(d1.state, topo);
  CHECK(d2.action.sample_sets[0] == std::vector<int>{0, 2});
  CHECK(d2.state.relay_cursor[0] == 1);
  CHECK(d1.action.update_set == std::vector<int>{0});
  CHECK(d2.action.update_set == std::vector<int>{1});
}

TEST_CASE("round robin with channels covering the group") {
  const auto topo = single_relay(3, 5, 3);
  auto state = RoundRobinState::initial(topo);
  for (int i = 0; i < 4; ++i) {
    auto d = round_robin(state, topo);
    CHECK(d.action.sample_sets[0] == std::vector<int>{0, 1, 2});
    CHECK(d.action.update_set == std::vector<int>{0, 1, 2});
    state = d.state;
  }
}

TEST_CASE("random scheduler") {
  SUBCASE("full channels leave a single choice") {
    const auto topo = single_relay(4, 4, 4);
    auto rng = make_rng(1);
    const auto a = random_sched(topo, rng);
    CHECK(a.sample_sets[0] == std::vector<int>{0, 1, 2, 3});
    CHECK(a.update_set == std::vector<int>{0, 1, 2, 3});
  }
  SUBCASE("same seed, same action") {
    TopologyConfig c;
    const auto topo = build_topology(c, 2);
    auto a = make_rng(42);
    auto b = make_rng(42);
    CHECK(random_sched(topo, a) == random_sched(topo, b));
  }
  SUBCASE("uniform inclusion frequency") {
    const auto topo = single_relay(4, 2, 1);
    auto rng = make_rng(7);
    const int n = 10000;
    std::vector<int> hits(4, 0);
    for (int i = 0; i < n; ++i) {
      const auto sets = random_sample_sets(topo, rng);
      for (int d : sets[0]) ++hits[d];
    }
    const double se = std::sqrt(0.25 / n);
    for (int d = 0; d < 4; ++d)
      CHECK(std::abs(hits[d] / double(n) - 0.5) < 3 * se);
  }
}

TEST_CASE("every baseline respects the channel constraints") {
  TopologyConfig c;
  c.num_devices = 11;
  c.num_relays = 3;
  c.relay_channels = 2;
  c.tbs_channels = 3;
  const auto topo = build_topology(c, 4);
  auto rng = make_rng(8);
  auto rr = RoundRobinState::initial(topo);
  Env env(topo, {50, 1}, 9);
  env.reset();
  while (!env.done()) {
    const auto s = env.snapshot();
    auto d = round_robin(rr, topo);
    rr = d.state;
    for (const auto& a : {maf_mad(s, topo), maf(s, topo), d.action,
                          random_sched(topo, rng)})
      CHECK_NOTHROW(check_action(a, topo));
    env.step(maf_mad(s, topo));
  }
}

TEST_CASE("MAF-MAD is optimal on a small lossless network") {
  oracle::TinyNet net{1, 1, {0, 0, 0}, {0, 0, 0}, {0, 0, 0}};
  const auto topo = oracle::to_topology(net);
  const int T = 4;
  const auto search = oracle::exhaustive_lossless(net, T);
  CHECK(search.sequences == 6561);

  Env env(topo, {T, 1}, 1);
  env.reset();
  while (!env.done()) env.step(maf_mad(env.snapshot(), topo));
  CHECK(env.episode_average().tbs == doctest::Approx(search.best).epsilon(1e-12));
}

}  // TEST_SUITE
