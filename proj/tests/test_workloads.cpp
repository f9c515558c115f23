#include <atomic>
#include <random>
#include <set>
#include <thread>

#include "bestow/workloads.hpp"
#include "doctest.h"
#include "oracles.hpp"

using namespace bst;
using namespace bst::workloads;

// --- DHT ---------------------------------------------------------------------

TEST_CASE("dht: put then get, no rehash") {
  rt::Runtime rtx;
  DhtSystem dht(rtx, 2, 1, 42);
  dht.put(0, 7, 700);
  auto v = dht.get(0, 7);
  REQUIRE(v.has_value());
  CHECK(*v == 700);
  CHECK(!dht.get(0, 8).has_value());
}

TEST_CASE("dht: rehash to the same count keeps contents") {
  rt::Runtime rtx;
  DhtSystem dht(rtx, 2, 1, 1);
  for (std::uint64_t k = 0; k < 50; k++) dht.put(0, k, static_cast<int>(k));
  dht.rehash(2);
  rtx.run_until_quiescent();
  for (std::uint64_t k = 0; k < 50; k++) {
    auto v = dht.get(0, k);
    REQUIRE(v.has_value());
    CHECK(*v == static_cast<std::int64_t>(k));
  }
}

TEST_CASE("dht: occupancy matches the hash ranges after a rehash") {
  rt::Runtime rtx;
  DhtSystem dht(rtx, 2, 1, 3);
  for (std::uint64_t k = 0; k < 100; k++) dht.put(0, k, 1);
  dht.rehash(4);
  rtx.run_until_quiescent();
  auto keys = dht.shard_keys();
  REQUIRE(keys.size() == 4);
  size_t total = 0;
  for (int s = 0; s < 4; s++) {
    for (auto k : keys[static_cast<size_t>(s)]) {
      CHECK(dht.expected_shard(k) == s);
    }
    total += keys[static_cast<size_t>(s)].size();
  }
  CHECK(total == 100);
}

TEST_CASE("dht: puts racing a rehash are never lost or duplicated") {
  for (std::uint64_t seed : {11ull, 12ull, 13ull}) {
    rt::Runtime rtx;
    DhtSystem dht(rtx, 2, 4, seed);
    oracles::KvOracle oracle;
    for (std::uint64_t k = 0; k < 1000; k++) {
      oracle[k] = static_cast<std::int64_t>(mix64(seed ^ k));
    }
    std::atomic<std::uint64_t> next{0};
    std::vector<std::thread> writers;
    for (int c = 0; c < 4; c++) {
      writers.emplace_back([&, c] {
        for (;;) {
          std::uint64_t k = next.fetch_add(1);
          if (k >= 1000) return;
          dht.put(c, k, oracle[k]);
        }
      });
    }
    // rehash while the puts are in flight
    std::this_thread::sleep_for(std::chrono::milliseconds(2));
    dht.rehash(4);
    for (auto& w : writers) w.join();
    rtx.run_until_quiescent();

    // no loss, no duplication, correct values
    auto keys = dht.shard_keys();
    std::set<std::uint64_t> seen;
    size_t total = 0;
    for (auto& shard : keys) {
      for (auto k : shard) {
        CHECK(seen.insert(k).second);
      }
      total += shard.size();
    }
    CHECK(total == oracle.size());
    for (auto& [k, v] : oracle) {
      auto got = dht.get(0, k);
      REQUIRE(got.has_value());
      CHECK(*got == v);
    }
  }
}

TEST_CASE("dht: figure protocol and atomic_all produce identical layouts") {
  for (std::uint64_t seed : {21ull, 22ull}) {
    auto run = [&](bool viaAtomic) {
      rt::Runtime rtx;
      DhtSystem dht(rtx, 2, 2, seed);
      for (std::uint64_t k = 0; k < 300; k++) {
        dht.put(static_cast<int>(k % 2), k, static_cast<std::int64_t>(k * 3));
      }
      if (viaAtomic) dht.rehash_atomic(4);
      else dht.rehash(4);
      rtx.run_until_quiescent();
      return dht.shard_keys();
    };
    auto a = run(false);
    auto b = run(true);
    REQUIRE(a.size() == b.size());
    for (size_t i = 0; i < a.size(); i++) {
      auto x = a[i];
      auto y = b[i];
      std::sort(x.begin(), x.end());
      std::sort(y.begin(), y.end());
      CHECK(x == y);
    }
  }
}

TEST_CASE("dht: gets during a rehash are buffered and answered") {
  rt::Runtime rtx;
  DhtSystem dht(rtx, 2, 2, 5);
  for (std::uint64_t k = 0; k < 64; k++) dht.put(0, k, static_cast<int>(k));
  std::atomic<bool> stop{false};
  std::atomic<int> answered{0};
  std::thread reader([&] {
    std::uint64_t k = 0;
    while (!stop) {
      auto v = dht.get(1, k % 64);
      REQUIRE(v.has_value());
      CHECK(*v == static_cast<std::int64_t>(k % 64));
      answered++;
      k++;
    }
  });
  dht.rehash(3);
  dht.rehash(4);
  stop = true;
  reader.join();
  rtx.run_until_quiescent();
  CHECK(answered.load() > 0);
}

// --- money -------------------------------------------------------------------

TEST_CASE("money: a simple transfer moves the amount") {
  rt::Runtime rtx;
  MoneySystem bank(rtx, 2, 1, 100);
  CHECK(bank.transfer(0, 1, 50));
  rtx.run_until_quiescent();
  CHECK(bank.snapshot_total() == bank.initial_total());
}

TEST_CASE("money: overdrafts fail and change nothing") {
  rt::Runtime rtx;
  MoneySystem bank(rtx, 2, 1, 100);
  CHECK(!bank.transfer(0, 1, 101));
  rtx.run_until_quiescent();
  CHECK(bank.snapshot_total() == bank.initial_total());
}

TEST_CASE("money: same-owner transfers skip the mailbox installs") {
  rt::Runtime rtx;
  MoneySystem bank(rtx, 1, 2, 100);
  auto before = rtx.stats().privateInstalls;
  CHECK(bank.transfer(0, 1, 30));
  rtx.run_until_quiescent();
  CHECK(rtx.stats().privateInstalls == before);
}

TEST_CASE("money: atomic snapshots conserve the total under racing transfers") {
  rt::Runtime rtx{rt::Runtime::Options{.workers = 4}};
  MoneySystem bank(rtx, 2, 2, 1000);
  std::atomic<bool> stop{false};
  std::thread mover([&] {
    std::mt19937_64 rng(99);
    while (!stop) {
      int from = static_cast<int>(rng() % 4);
      int to = static_cast<int>(rng() % 4);
      if (from == to) continue;
      bank.transfer(from, to, static_cast<std::int64_t>(rng() % 50) + 1);
    }
  });
  for (int i = 0; i < 300; i++) {
    CHECK(bank.snapshot_total() == bank.initial_total());
  }
  stop = true;
  mover.join();
  rtx.run_until_quiescent();
}

TEST_CASE("money: the non-atomic control leaks intermediate states") {
  rt::Runtime rtx{rt::Runtime::Options{.workers = 4}};
  MoneySystem bank(rtx, 2, 2, 1000000);
  std::atomic<bool> stop{false};
  std::thread mover([&] {
    std::mt19937_64 rng(7);
    while (!stop) {
      bank.transfer_nonatomic(0, 3, 1);
      bank.transfer_nonatomic(3, 0, 1);
    }
  });
  int violations = 0;
  for (int i = 0; i < 20000 && violations == 0; i++) {
    if (bank.snapshot_total_unsafe() != bank.initial_total()) violations++;
  }
  stop = true;
  mover.join();
  rtx.run_until_quiescent();
  CHECK(violations > 0);
  // and the books still balance once quiescent
  CHECK(bank.snapshot_total() == bank.initial_total());
}

// --- graph --------------------------------------------------------------------

TEST_CASE("graph: single-part graphs match the oracle exactly") {
  rt::Runtime rtx;
  DistGraph g(rtx, 20, 1, 2024);
  auto got = g.distributed_shortest_path(0, false);
  auto want = oracles::dijkstra(20, g.edge_list(), 0);
  CHECK(got == want);
}

TEST_CASE("graph: four-part graphs match the oracle for several seeds") {
  for (std::uint64_t seed : {1ull, 2ull, 3ull, 4ull, 5ull}) {
    rt::Runtime rtx;
    DistGraph g(rtx, 50, 4, seed);
    auto got = g.distributed_shortest_path(0, false);
    auto want = oracles::dijkstra(50, g.edge_list(), 0);
    CHECK(got == want);
  }
}

TEST_CASE("graph: hot-path pulls keep answers identical and move nodes") {
  rt::Runtime rtx;
  rtx.set_transfer_policy(rt::TransferPolicy::WhenOwnerIdle);
  DistGraph g(rtx, 50, 4, 77);
  auto got = g.distributed_shortest_path(0, true);
  auto want = oracles::dijkstra(50, g.edge_list(), 0);
  CHECK(got == want);
  CHECK(rtx.stats().transfers >= 1);
}

// --- ping bench ---------------------------------------------------------------

TEST_CASE("ping: envelope counts are exact per mode") {
  auto direct = bench_ping(2000, PingMode::Direct, 1);
  REQUIRE(direct.runs.size() == 1);
  CHECK(direct.runs[0].envelopes == 4000);

  auto bestowed = bench_ping(2000, PingMode::Bestowed, 1);
  CHECK(bestowed.runs[0].envelopes == 4000);

  auto batched = bench_ping(2000, PingMode::BestowedAtomic, 1, 500);
  CHECK(batched.runs[0].envelopes <= 2000 / 500 + 4);
}

TEST_CASE("ping: median helpers") {
  PingReport r;
  r.messages = 100;
  r.runs = {{2.0, 0}, {1.0, 0}, {4.0, 0}};
  CHECK(r.median_seconds() == 2.0);
  CHECK(r.median_throughput() == 50.0);
}
