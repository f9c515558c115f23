#pragma once

#include <atomic>
#include <iostream>
#include <random>
#include <set>
#include <thread>

#include "bestow/report_json.hpp"
#include "bestow/workloads.hpp"
#include "json.hpp"

// Scenario drivers for the demo subcommand: each prints a short narration,
// checks its closing assertions, and reports a stable JSON summary.
namespace bst::tools {

inline int run_demo_dht(std::uint64_t seed, bool deterministic, bool asJson) {
  rt::Runtime rtx{rt::Runtime::Options{.workers = deterministic ? 0u : 4u,
                                       .deterministic = deterministic,
                                       .seed = seed}};
  workloads::DhtSystem dht(rtx, 2, 2, seed);
  const std::uint64_t keys = 300;
  if (!asJson) {
    std::cout << "dht: 2 shards, 2 proxy-holding clients, " << keys
              << " puts\n";
  }
  for (std::uint64_t k = 0; k < keys; k++) {
    dht.put(static_cast<int>(k % 2), k,
            static_cast<std::int64_t>(workloads::mix64(seed ^ k)));
  }
  if (!asJson) {
    std::cout << "dht: rehashing 2 -> 4 while clients keep reading\n";
  }
  std::atomic<bool> stop{false};
  std::atomic<long> reads{0};
  std::thread reader([&] {
    std::uint64_t k = 0;
    while (!stop) {
      auto v = dht.get(1, k % keys);
      if (v) reads++;
      k++;
    }
  });
  dht.rehash(4);
  stop = true;
  reader.join();
  rtx.run_until_quiescent();

  bool allPresent = true;
  for (std::uint64_t k = 0; k < keys; k++) {
    auto v = dht.get(0, k);
    if (!v || *v != static_cast<std::int64_t>(workloads::mix64(seed ^ k))) {
      allPresent = false;
    }
  }
  auto layout = dht.shard_keys();
  std::set<std::uint64_t> seen;
  bool noDuplicates = true, rangesRespected = true;
  std::uint64_t total = 0;
  for (size_t s = 0; s < layout.size(); s++) {
    for (auto k : layout[s]) {
      if (!seen.insert(k).second) noDuplicates = false;
      if (dht.expected_shard(k) != static_cast<int>(s)) {
        rangesRespected = false;
      }
      total++;
    }
  }
  bool ok = allPresent && noDuplicates && rangesRespected && total == keys;
  if (asJson) {
    nlohmann::json out = {{"schema", 1},
                          {"demo", "dht"},
                          {"keys", keys},
                          {"shards", dht.shard_count()},
                          {"mapVersion", dht.map_version()},
                          {"allKeysPresent", allPresent},
                          {"noDuplicates", noDuplicates},
                          {"rangesRespected", rangesRespected},
                          {"ok", ok}};
    std::cout << out.dump(2) << "\n";
  } else {
    std::cout << "dht: version " << dht.map_version() << " map, reads during "
              << "rehash answered: " << reads.load() << "\n"
              << "dht: all keys present: " << (allPresent ? "yes" : "NO")
              << ", no duplicates: " << (noDuplicates ? "yes" : "NO")
              << ", ranges respected: " << (rangesRespected ? "yes" : "NO")
              << "\n"
              << "dht: stats " << rt::to_json(rtx.stats()).dump() << "\n";
  }
  return ok ? 0 : 1;
}

inline int run_demo_bank(std::uint64_t seed, bool deterministic, bool asJson) {
  rt::Runtime rtx{rt::Runtime::Options{.workers = deterministic ? 0u : 4u,
                                       .deterministic = deterministic,
                                       .seed = seed}};
  workloads::MoneySystem bank(rtx, 2, 2, 10000);
  if (!asJson) {
    std::cout << "bank: 2 banks x 2 accounts, initial total "
              << bank.initial_total() << "\n"
              << "bank: racing transfers against an atomic observer\n";
  }
  std::atomic<bool> stop{false};
  std::atomic<long> clean{0}, dirty{0};
  std::thread observer([&] {
    while (!stop) {
      if (bank.snapshot_total() == bank.initial_total()) clean++;
      else dirty++;
    }
  });
  std::mt19937_64 rng(seed + 1);
  for (int i = 0; i < 2000; i++) {
    int from = static_cast<int>(rng() % 4);
    int to = static_cast<int>(rng() % 4);
    if (from == to) to = (to + 1) % 4;
    bank.transfer(from, to, static_cast<std::int64_t>(rng() % 90) + 1);
  }
  stop = true;
  observer.join();
  rtx.run_until_quiescent();

  // control: non-atomic transfers leak the missing-money window
  std::atomic<bool> stop2{false};
  std::atomic<long> controlViolations{0};
  std::thread observer2([&] {
    while (!stop2 && controlViolations.load() == 0) {
      if (bank.snapshot_total_unsafe() != bank.initial_total()) {
        controlViolations++;
      }
    }
  });
  for (int i = 0; i < 20000 && controlViolations.load() == 0; i++) {
    bank.transfer_nonatomic(0, 3, 1);
    bank.transfer_nonatomic(3, 0, 1);
  }
  stop2 = true;
  observer2.join();
  rtx.run_until_quiescent();

  bool conserved = dirty.load() == 0 &&
                   bank.snapshot_total() == bank.initial_total();
  bool monitorHasTeeth = controlViolations.load() >= 1;
  bool ok = conserved && monitorHasTeeth;
  if (asJson) {
    nlohmann::json out = {{"schema", 1},
                          {"demo", "bank"},
                          {"atomicSnapshotsConserve", conserved},
                          {"controlViolationsFound", monitorHasTeeth},
                          {"ok", ok}};
    std::cout << out.dump(2) << "\n";
  } else {
    std::cout << "bank: " << clean.load() << " atomic snapshots, "
              << dirty.load() << " unbalanced\n"
              << "bank: non-atomic control leaked a window: "
              << (monitorHasTeeth ? "yes (expected)" : "NO") << "\n"
              << "bank: stats " << rt::to_json(rtx.stats()).dump() << "\n";
  }
  return ok ? 0 : 1;
}

inline int run_demo_graph(std::uint64_t seed, bool deterministic,
                          bool asJson) {
  auto run_policy = [&](bool pull) {
    rt::Runtime rtx{rt::Runtime::Options{.workers = deterministic ? 0u : 4u,
                                         .deterministic = deterministic,
                                         .seed = seed}};
    rtx.set_transfer_policy(pull ? rt::TransferPolicy::WhenOwnerIdle
                                 : rt::TransferPolicy::Never);
    workloads::DistGraph g(rtx, 50, 4, seed);
    auto dist = g.distributed_shortest_path(0, pull);
    return std::make_pair(dist, rtx.stats().transfers);
  };
  if (!asJson) {
    std::cout << "graph: 50 nodes over 4 actors, shortest paths from node 0\n";
  }
  auto [plain, t0] = run_policy(false);
  auto [pulled, t1] = run_policy(true);
  bool policyIndependent = plain == pulled;
  if (asJson) {
    nlohmann::json out = {{"schema", 1},
                          {"demo", "graph"},
                          {"nodes", 50},
                          {"distances", plain},
                          {"policyIndependent", policyIndependent},
                          {"ok", policyIndependent}};
    std::cout << out.dump(2) << "\n";
  } else {
    std::cout << "graph: transfers under Never: " << t0
              << ", under WhenOwnerIdle: " << t1 << "\n"
              << "graph: distances agree across policies: "
              << (policyIndependent ? "yes" : "NO") << "\n"
              << "graph: sample distances:";
    for (int i = 0; i < 8; i++) std::cout << " " << plain[size_t(i)];
    std::cout << " ...\n";
  }
  return policyIndependent ? 0 : 1;
}

inline int run_demo(const std::string& name, std::uint64_t seed,
                    bool deterministic, bool asJson) {
  if (name == "dht") return run_demo_dht(seed, deterministic, asJson);
  if (name == "bank") return run_demo_bank(seed, deterministic, asJson);
  if (name == "graph") return run_demo_graph(seed, deterministic, asJson);
  std::cerr << "unknown demo: " << name << " (expected dht, bank or graph)\n";
  return 2;
}

}  // namespace bst::tools
