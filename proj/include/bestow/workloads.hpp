#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <variant>
#include <vector>

#include "bestow/runtime.hpp"

// The case studies and the ping benchmark, built solely on the runtime.
namespace bst::workloads {

// Fixed 64-bit mix (splitmix64 finalizer) so shard assignment is
// reproducible across implementations and runs.
std::uint64_t mix64(std::uint64_t x);
std::uint64_t hash_key(std::uint64_t seed, std::uint64_t key);

// --- distributed hash table --------------------------------------------------

struct ShardState;

// Ordered ranges covering the full 64-bit hash space; the version increases
// with every rehash and stale requests are redirected.
struct ShardMap {
  std::uint64_t version = 0;
  std::vector<std::pair<std::uint64_t, rt::ActorRef<ShardState>>> ranges;

  int index_for(std::uint64_t hash) const;
  const rt::ActorRef<ShardState>& shard_for(std::uint64_t hash) const;
};

struct PutReply {
  bool ok = false;
  bool redirect = false;
  ShardMap newMap;
};

struct GetReply {
  bool found = false;
  std::int64_t value = 0;
  bool redirect = false;
  ShardMap newMap;
};

class DhtSystem {
 public:
  DhtSystem(rt::Runtime& rt, int shards, int clients, std::uint64_t hashSeed);

  // External-thread API; redirects are retried through the client's proxy.
  void put(int client, std::uint64_t key, std::int64_t value);
  std::optional<std::int64_t> get(int client, std::uint64_t key);

  // The stop/move/start protocol, coordinated by the table actor, with the
  // new map pushed to every proxy through its bestowed reference.
  void rehash(int newShardCount);
  // Same outcome expressed as one atomic_all block over the shards; public
  // puts and gets buffer implicitly in their mailboxes.
  void rehash_atomic(int newShardCount);

  int shard_count() const;
  std::vector<std::vector<std::uint64_t>> shard_keys() const;
  int expected_shard(std::uint64_t key) const;
  std::uint64_t map_version() const;

 private:
  struct Impl;
  std::shared_ptr<Impl> impl_;
};

// --- money transfer -----------------------------------------------------------

struct Account {
  std::int64_t balance = 0;
  int id = 0;
};

struct BankState {
  std::vector<std::unique_ptr<Account>> accounts;
};

class MoneySystem {
 public:
  MoneySystem(rt::Runtime& rt, int banks, int accountsPerBank,
              std::int64_t initialBalance);

  // Withdraw-then-deposit inside nested (identity-ordered) atomic blocks;
  // accounts under one bank take the single-envelope fast path.
  bool transfer(int fromAccount, int toAccount, std::int64_t amount);
  // Control variant: two independent sends with a window in between.
  bool transfer_nonatomic(int fromAccount, int toAccount, std::int64_t amount);

  // Observer snapshot of the total balance inside one atomic_all block.
  std::int64_t snapshot_total();
  // Control observer: plain reads, no atomicity.
  std::int64_t snapshot_total_unsafe();

  int account_count() const;
  std::int64_t initial_total() const;

 private:
  struct Impl;
  std::shared_ptr<Impl> impl_;
};

// --- distributed graph ----------------------------------------------------------

struct GraphNode;
struct GraphPartState {
  std::vector<std::unique_ptr<GraphNode>> nodes;
};

struct GraphEdge {
  // intra-part edges hold the neighbor directly; inter-part edges go through
  // a (transferable) bestowed reference
  std::variant<GraphNode*, rt::BestowedRef<GraphNode>> to;
  int toId = 0;
  std::int64_t weight = 0;
};

struct GraphNode {
  int id = 0;
  std::vector<GraphEdge> edges;
};

class DistGraph {
 public:
  // Round-robin distribution of nodes over part actors; edges from a seeded
  // generator with non-negative weights.
  DistGraph(rt::Runtime& rt, int nodes, int parts, std::uint64_t seed);

  static constexpr std::int64_t kUnreachable = -1;

  // Dijkstra run inside the first part actor: local nodes are read
  // synchronously, remote ones through their bestowed references. When the
  // runtime policy allows it, hot remote nodes are pulled over first.
  std::vector<std::int64_t> distributed_shortest_path(int source,
                                                      bool pullHotNodes);

  // Edge list for the sequential oracle: (from, to, weight).
  std::vector<std::tuple<int, int, std::int64_t>> edge_list() const;
  int node_count() const;

 private:
  struct Impl;
  std::shared_ptr<Impl> impl_;
};

// --- ping benchmark --------------------------------------------------------------

enum class PingMode { Direct, Bestowed, BestowedAtomic };

struct PingRun {
  double seconds = 0;
  std::uint64_t envelopes = 0;
};

struct PingReport {
  PingMode mode = PingMode::Direct;
  std::uint64_t messages = 0;
  int batch = 0;
  std::vector<PingRun> runs;
  double median_seconds() const;
  double median_throughput() const;  // messages per second
};

PingReport bench_ping(std::uint64_t messages, PingMode mode, int runs,
                      int batch = 1000, unsigned workers = 2);

}  // namespace bst::workloads
