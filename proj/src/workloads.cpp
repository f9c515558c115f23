#include "bestow/workloads.hpp"

#include <algorithm>
#include <chrono>
#include <queue>
#include <random>
#include <stdexcept>

namespace bst::workloads {

using rt::ActorRef;
using rt::AtomicHandle;
using rt::BestowedRef;
using rt::FutureValue;
using rt::Runtime;

std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

std::uint64_t hash_key(std::uint64_t seed, std::uint64_t key) {
  return mix64(seed ^ mix64(key));
}

// ---------------------------------------------------------------------------
// DHT
// ---------------------------------------------------------------------------

int ShardMap::index_for(std::uint64_t hash) const {
  for (size_t i = 0; i < ranges.size(); i++) {
    if (hash <= ranges[i].first) return static_cast<int>(i);
  }
  return static_cast<int>(ranges.size()) - 1;
}

const ActorRef<ShardState>& ShardMap::shard_for(std::uint64_t hash) const {
  return ranges[static_cast<size_t>(index_for(hash))].second;
}

namespace {

struct BufferedOp {
  bool isPut = false;
  std::uint64_t key = 0;
  std::uint64_t hash = 0;
  std::int64_t value = 0;
  std::uint64_t version = 0;
  std::shared_ptr<rt::detail::FutureCore<PutReply>> putReply;
  std::shared_ptr<rt::detail::FutureCore<GetReply>> getReply;
};

}  // namespace

struct ShardState {
  std::map<std::uint64_t, std::int64_t> data;  // keyed by key (not hash)
  bool stopped = false;
  std::vector<BufferedOp> buffer;
  ShardMap map;
  int selfIndex = 0;
};

struct DhtProxy {
  ShardMap map;
};

namespace {

struct ClientState {
  DhtProxy proxy;
};

struct TableState {
  ShardMap map;
  std::vector<BestowedRef<DhtProxy>> proxies;
};

ShardMap make_map(std::uint64_t version,
                  const std::vector<ActorRef<ShardState>>& shards) {
  ShardMap m;
  m.version = version;
  size_t n = shards.size();
  for (size_t i = 0; i < n; i++) {
    // split the hash space into n near-equal ranges; the last takes the rest
    std::uint64_t upper =
        i + 1 == n ? ~0ull
                   : static_cast<std::uint64_t>(
                         (static_cast<unsigned __int128>(~0ull) * (i + 1)) /
                         n);
    m.ranges.emplace_back(upper, shards[i]);
  }
  return m;
}

void shard_apply_put(ShardState& s, BufferedOp op);
void shard_apply_get(ShardState& s, BufferedOp op);

void shard_replay(ShardState& s) {
  std::vector<BufferedOp> pending;
  pending.swap(s.buffer);
  for (auto& op : pending) {
    // rerouted with the fresh version so the new owner accepts it
    op.version = s.map.version;
    int owner = s.map.index_for(op.hash);
    if (owner == s.selfIndex) {
      if (op.isPut) shard_apply_put(s, std::move(op));
      else shard_apply_get(s, std::move(op));
    } else {
      auto target = s.map.ranges[static_cast<size_t>(owner)].second;
      rt::send(target, [op = std::move(op)](ShardState& other) mutable {
        if (op.isPut) shard_apply_put(other, std::move(op));
        else shard_apply_get(other, std::move(op));
      });
    }
  }
}

void shard_apply_put(ShardState& s, BufferedOp op) {
  if (s.stopped) {
    s.buffer.push_back(std::move(op));
    return;
  }
  if (op.version < s.map.version) {
    PutReply r;
    r.redirect = true;
    r.newMap = s.map;
    op.putReply->fulfill(std::move(r));
    return;
  }
  s.data[op.key] = op.value;
  PutReply r;
  r.ok = true;
  op.putReply->fulfill(std::move(r));
}

void shard_apply_get(ShardState& s, BufferedOp op) {
  if (s.stopped) {
    s.buffer.push_back(std::move(op));
    return;
  }
  if (op.version < s.map.version) {
    GetReply r;
    r.redirect = true;
    r.newMap = s.map;
    op.getReply->fulfill(std::move(r));
    return;
  }
  GetReply r;
  auto it = s.data.find(op.key);
  if (it != s.data.end()) {
    r.found = true;
    r.value = it->second;
  }
  op.getReply->fulfill(std::move(r));
}

}  // namespace

struct DhtSystem::Impl {
  Runtime* rtx = nullptr;
  std::uint64_t hashSeed = 0;
  std::vector<ActorRef<ShardState>> shards;
  std::vector<ActorRef<ClientState>> clients;
  ActorRef<TableState> table;

  ShardMap master_map() {
    return rt::send(table, [](TableState& t) { return t.map; }).get();
  }

  void push_map_to_clients(const ShardMap& m) {
    auto proxies =
        rt::send(table, [](TableState& t) { return t.proxies; }).get();
    std::vector<FutureValue<void>> acks;
    for (auto& p : proxies) {
      acks.push_back(
          rt::send_bestowed(p, [m](DhtProxy& proxy) { proxy.map = m; }));
    }
    for (auto& a : acks) a.get();
  }
};

DhtSystem::DhtSystem(Runtime& rtx, int shards, int clients,
                     std::uint64_t hashSeed)
    : impl_(std::make_shared<Impl>()) {
  impl_->rtx = &rtx;
  impl_->hashSeed = hashSeed;
  for (int i = 0; i < shards; i++) {
    impl_->shards.push_back(rtx.spawn<ShardState>());
  }
  ShardMap m = make_map(1, impl_->shards);
  for (int i = 0; i < shards; i++) {
    rt::send(impl_->shards[i], [m, i](ShardState& s) {
      s.map = m;
      s.selfIndex = i;
    }).get();
  }
  impl_->table = rtx.spawn<TableState>();
  rt::send(impl_->table, [m](TableState& t) { t.map = m; }).get();
  for (int i = 0; i < clients; i++) {
    auto c = rtx.spawn<ClientState>();
    impl_->clients.push_back(c);
    // the client registers its proxy with the table by bestowing it
    auto ref = rt::send(c, [m](ClientState& s) {
                 s.proxy.map = m;
                 return rt::bestow(s.proxy);
               }).get();
    rt::send(impl_->table, [ref](TableState& t) {
      t.proxies.push_back(ref);
    }).get();
  }
}

void DhtSystem::put(int client, std::uint64_t key, std::int64_t value) {
  auto& c = impl_->clients.at(static_cast<size_t>(client));
  Runtime& rtx = *impl_->rtx;
  std::uint64_t h = hash_key(impl_->hashSeed, key);
  for (int attempt = 0; attempt < 64; attempt++) {
    // route inside the client using its proxy's (possibly stale) map
    auto reply = std::make_shared<rt::detail::FutureCore<PutReply>>(
        &rtx, /*fulfiller unknown*/ 0);
    rt::send(c, [h, key, value, reply](ClientState& s) {
      BufferedOp op;
      op.isPut = true;
      op.key = key;
      op.hash = h;
      op.value = value;
      op.version = s.proxy.map.version;
      op.putReply = reply;
      auto target = s.proxy.map.shard_for(h);
      rt::send(target, [op = std::move(op)](ShardState& sh) mutable {
        shard_apply_put(sh, std::move(op));
      });
    });
    PutReply r = FutureValue<PutReply>(reply).get();
    if (r.ok) return;
    if (r.redirect) {
      ShardMap m = r.newMap;
      rt::send(c, [m](ClientState& s) { s.proxy.map = m; }).get();
      continue;
    }
  }
  throw std::runtime_error("dht put: too many redirects");
}

std::optional<std::int64_t> DhtSystem::get(int client, std::uint64_t key) {
  auto& c = impl_->clients.at(static_cast<size_t>(client));
  Runtime& rtx = *impl_->rtx;
  std::uint64_t h = hash_key(impl_->hashSeed, key);
  for (int attempt = 0; attempt < 64; attempt++) {
    auto reply =
        std::make_shared<rt::detail::FutureCore<GetReply>>(&rtx, 0);
    rt::send(c, [h, key, reply](ClientState& s) {
      BufferedOp op;
      op.key = key;
      op.hash = h;
      op.version = s.proxy.map.version;
      op.getReply = reply;
      auto target = s.proxy.map.shard_for(h);
      rt::send(target, [op = std::move(op)](ShardState& sh) mutable {
        shard_apply_get(sh, std::move(op));
      });
    });
    GetReply r = FutureValue<GetReply>(reply).get();
    if (r.redirect) {
      ShardMap m = r.newMap;
      rt::send(c, [m](ClientState& s) { s.proxy.map = m; }).get();
      continue;
    }
    if (r.found) return r.value;
    return std::nullopt;
  }
  throw std::runtime_error("dht get: too many redirects");
}

namespace {

std::vector<ActorRef<ShardState>> grow_shards(Runtime& rtx,
                                              std::vector<ActorRef<ShardState>>
                                                  shards,
                                              int count) {
  while (static_cast<int>(shards.size()) < count) {
    shards.push_back(rtx.spawn<ShardState>());
  }
  shards.resize(static_cast<size_t>(count));
  return shards;
}

}  // namespace

void DhtSystem::rehash(int newShardCount) {
  if (newShardCount < 1) throw std::invalid_argument("rehash: shard count");
  Runtime& rtx = *impl_->rtx;
  auto oldShards = impl_->shards;
  auto newShards = grow_shards(rtx, oldShards, newShardCount);
  impl_->shards = newShards;

  // the table actor coordinates the stop / move / start protocol
  std::uint64_t seed = impl_->hashSeed;
  rt::send(impl_->table, [oldShards, newShards, seed](TableState& t) {
    // stop all actors backing the table
    std::vector<FutureValue<void>> stops;
    stops.reserve(oldShards.size());
    for (auto& sh : oldShards) {
      stops.push_back(rt::send(sh, [](ShardState& s) { s.stopped = true; }));
    }
    ShardMap newMap = make_map(t.map.version + 1, newShards);
    // block until all actors have stopped
    for (auto& f : stops) {
      if (!f.wait_for(std::chrono::milliseconds(10000))) {
        throw std::runtime_error(
            "rehash: a shard never acknowledged the stop message");
      }
      f.get();
    }

    // move entries to their owners under the new map
    std::vector<std::pair<std::uint64_t, std::int64_t>> entries;
    for (auto& sh : oldShards) {
      auto part = rt::send(sh, [](ShardState& s) {
                    std::vector<std::pair<std::uint64_t, std::int64_t>> out(
                        s.data.begin(), s.data.end());
                    s.data.clear();
                    return out;
                  }).get();
      entries.insert(entries.end(), part.begin(), part.end());
    }
    std::vector<std::vector<std::pair<std::uint64_t, std::int64_t>>> perShard(
        newShards.size());
    for (auto& [key, value] : entries) {
      int idx = newMap.index_for(hash_key(seed, key));
      perShard[static_cast<size_t>(idx)].emplace_back(key, value);
    }
    std::vector<FutureValue<void>> installs;
    for (size_t i = 0; i < newShards.size(); i++) {
      auto batch = std::move(perShard[i]);
      installs.push_back(rt::send(newShards[i], [batch](ShardState& s) {
        for (auto& [k, v] : batch) s.data[k] = v;
      }));
    }
    for (auto& f : installs) f.get();

    // start actors up using the new map (replays anything buffered)
    std::vector<FutureValue<void>> starts;
    for (size_t i = 0; i < newShards.size(); i++) {
      starts.push_back(rt::send(newShards[i], [newMap, i](ShardState& s) {
        s.map = newMap;
        s.selfIndex = static_cast<int>(i);
        s.stopped = false;
        shard_replay(s);
      }));
    }
    for (auto& f : starts) f.get();
    t.map = newMap;

    // push the new map to every proxy through its bestowed reference
    for (auto& p : t.proxies) {
      rt::send_bestowed(p, [newMap](DhtProxy& proxy) { proxy.map = newMap; });
    }
  }).get();
}

void DhtSystem::rehash_atomic(int newShardCount) {
  if (newShardCount < 1) throw std::invalid_argument("rehash: shard count");
  Runtime& rtx = *impl_->rtx;
  auto oldShards = impl_->shards;
  auto newShards = grow_shards(rtx, oldShards, newShardCount);
  impl_->shards = newShards;
  std::uint64_t seed = impl_->hashSeed;

  rt::send(impl_->table, [oldShards, newShards, seed](TableState& t) {
    // operate atomically on every actor backing the table: buffering of
    // concurrent puts and gets is implicit in their suspended mailboxes
    std::vector<ActorRef<ShardState>> all = newShards;
    for (auto& sh : oldShards) {
      bool present = false;
      for (auto& n : all) {
        if (n.id() == sh.id()) present = true;
      }
      if (!present) all.push_back(sh);
    }
    ShardMap newMap = make_map(t.map.version + 1, newShards);
    rt::atomic_all(all, [&](std::vector<AtomicHandle<ShardState>>& hs) {
      auto handle_for = [&](const ActorRef<ShardState>& ref)
          -> AtomicHandle<ShardState>& {
        for (auto& h : hs) {
          if (h.target_id() == ref.id()) return h;
        }
        throw std::logic_error("missing handle");
      };
      std::vector<std::pair<std::uint64_t, std::int64_t>> entries;
      for (auto& sh : oldShards) {
        auto part = handle_for(sh)
                        .send([](ShardState& s) {
                          std::vector<std::pair<std::uint64_t, std::int64_t>>
                              out(s.data.begin(), s.data.end());
                          s.data.clear();
                          return out;
                        })
                        .get();
        entries.insert(entries.end(), part.begin(), part.end());
      }
      std::vector<std::vector<std::pair<std::uint64_t, std::int64_t>>>
          perShard(newShards.size());
      for (auto& [key, value] : entries) {
        int idx = newMap.index_for(hash_key(seed, key));
        perShard[static_cast<size_t>(idx)].emplace_back(key, value);
      }
      for (size_t i = 0; i < newShards.size(); i++) {
        auto batch = std::move(perShard[i]);
        handle_for(newShards[i])
            .send([batch, newMap, i](ShardState& s) {
              for (auto& [k, v] : batch) s.data[k] = v;
              s.map = newMap;
              s.selfIndex = static_cast<int>(i);
            })
            .get();
      }
      // old shards dropped from the new map still need the version bump so
      // they redirect anything sent via a stale proxy
      for (auto& sh : all) {
        bool inNew = false;
        for (auto& n : newShards) {
          if (n.id() == sh.id()) inNew = true;
        }
        if (!inNew) {
          handle_for(sh).send([newMap](ShardState& s) { s.map = newMap; });
        }
      }
    });
    t.map = newMap;
    for (auto& p : t.proxies) {
      rt::send_bestowed(p, [newMap](DhtProxy& proxy) { proxy.map = newMap; });
    }
  }).get();
}

int DhtSystem::shard_count() const {
  return static_cast<int>(impl_->shards.size());
}

std::vector<std::vector<std::uint64_t>> DhtSystem::shard_keys() const {
  std::vector<std::vector<std::uint64_t>> out;
  for (auto& sh : impl_->shards) {
    out.push_back(rt::send(sh, [](ShardState& s) {
                    std::vector<std::uint64_t> keys;
                    keys.reserve(s.data.size());
                    for (auto& [k, v] : s.data) keys.push_back(k);
                    return keys;
                  }).get());
  }
  return out;
}

int DhtSystem::expected_shard(std::uint64_t key) const {
  ShardMap m = impl_->master_map();
  return m.index_for(hash_key(impl_->hashSeed, key));
}

std::uint64_t DhtSystem::map_version() const {
  return impl_->master_map().version;
}

// ---------------------------------------------------------------------------
// Money transfer
// ---------------------------------------------------------------------------

struct MoneySystem::Impl {
  Runtime* rtx = nullptr;
  std::vector<ActorRef<BankState>> banks;
  // per account: owning bank + bestowed handle to the account object
  std::vector<ActorRef<BankState>> ownerOf;
  std::vector<BestowedRef<Account>> accounts;
  std::int64_t initialTotal = 0;
};

MoneySystem::MoneySystem(Runtime& rtx, int banks, int accountsPerBank,
                         std::int64_t initialBalance)
    : impl_(std::make_shared<Impl>()) {
  impl_->rtx = &rtx;
  int id = 0;
  for (int b = 0; b < banks; b++) {
    auto bank = rtx.spawn<BankState>();
    impl_->banks.push_back(bank);
    for (int a = 0; a < accountsPerBank; a++) {
      auto ref = rt::send(bank, [id, initialBalance](BankState& s) {
                   auto acc = std::make_unique<Account>();
                   acc->balance = initialBalance;
                   acc->id = id;
                   s.accounts.push_back(std::move(acc));
                   return rt::bestow(*s.accounts.back());
                 }).get();
      impl_->accounts.push_back(ref);
      impl_->ownerOf.push_back(bank);
      id++;
    }
  }
  impl_->initialTotal =
      static_cast<std::int64_t>(banks) * accountsPerBank * initialBalance;
}

bool MoneySystem::transfer(int fromAccount, int toAccount,
                           std::int64_t amount) {
  if (amount <= 0) throw std::invalid_argument("transfer: amount");
  auto& from = impl_->accounts.at(static_cast<size_t>(fromAccount));
  auto& to = impl_->accounts.at(static_cast<size_t>(toAccount));
  auto& fromBank = impl_->ownerOf.at(static_cast<size_t>(fromAccount));
  auto& toBank = impl_->ownerOf.at(static_cast<size_t>(toAccount));

  if (fromBank.id() == toBank.id()) {
    // both accounts live in one actor: the whole block is one envelope run
    // synchronously at the owner
    auto fc = from.cell();
    auto tc = to.cell();
    return rt::send(fromBank, [fc, tc, amount](BankState&) {
             if (fc->object->balance < amount) return false;
             fc->object->balance -= amount;
             tc->object->balance += amount;
             return true;
           }).get();
  }

  auto fc = from.cell();
  auto tc = to.cell();
  bool ok = false;
  rt::atomic_all(std::vector<ActorRef<BankState>>{fromBank, toBank},
                 [&](std::vector<AtomicHandle<BankState>>& hs) {
                   auto& hFrom = hs[0].target_id() == fromBank.id() ? hs[0]
                                                                    : hs[1];
                   auto& hTo = hs[0].target_id() == toBank.id() ? hs[0]
                                                                : hs[1];
                   bool withdrew =
                       hFrom.send([fc, amount](BankState&) {
                              if (fc->object->balance < amount) return false;
                              fc->object->balance -= amount;
                              return true;
                            })
                           .get();
                   if (!withdrew) return;
                   hTo.send([tc, amount](BankState&) {
                     tc->object->balance += amount;
                   });
                   ok = true;
                 });
  return ok;
}

bool MoneySystem::transfer_nonatomic(int fromAccount, int toAccount,
                                     std::int64_t amount) {
  auto& from = impl_->accounts.at(static_cast<size_t>(fromAccount));
  auto& to = impl_->accounts.at(static_cast<size_t>(toAccount));
  bool withdrew = rt::send_bestowed(from, [amount](Account& a) {
                    if (a.balance < amount) return false;
                    a.balance -= amount;
                    return true;
                  }).get();
  if (!withdrew) return false;
  // the withdrawn-but-not-deposited window is observable here
  rt::send_bestowed(to, [amount](Account& a) { a.balance += amount; }).get();
  return true;
}

std::int64_t MoneySystem::snapshot_total() {
  std::int64_t total = 0;
  rt::atomic_all(impl_->banks,
                 [&](std::vector<AtomicHandle<BankState>>& hs) {
                   std::vector<FutureValue<std::int64_t>> sums;
                   for (auto& h : hs) {
                     sums.push_back(h.send([](BankState& s) {
                       std::int64_t sum = 0;
                       for (auto& a : s.accounts) sum += a->balance;
                       return sum;
                     }));
                   }
                   for (auto& f : sums) total += f.get();
                 });
  return total;
}

std::int64_t MoneySystem::snapshot_total_unsafe() {
  std::int64_t total = 0;
  for (auto& bank : impl_->banks) {
    total += rt::send(bank, [](BankState& s) {
               std::int64_t sum = 0;
               for (auto& a : s.accounts) sum += a->balance;
               return sum;
             }).get();
  }
  return total;
}

int MoneySystem::account_count() const {
  return static_cast<int>(impl_->accounts.size());
}

std::int64_t MoneySystem::initial_total() const { return impl_->initialTotal; }

// ---------------------------------------------------------------------------
// Distributed graph
// ---------------------------------------------------------------------------

struct DistGraph::Impl {
  Runtime* rtx = nullptr;
  std::vector<ActorRef<GraphPartState>> parts;
  std::vector<BestowedRef<GraphNode>> nodes;  // by node id
  std::vector<int> partOf;
  std::vector<std::tuple<int, int, std::int64_t>> edges;
  int n = 0;
};

DistGraph::DistGraph(Runtime& rtx, int nodes, int parts, std::uint64_t seed)
    : impl_(std::make_shared<Impl>()) {
  impl_->rtx = &rtx;
  impl_->n = nodes;
  for (int p = 0; p < parts; p++) {
    impl_->parts.push_back(rtx.spawn<GraphPartState>());
  }
  impl_->nodes.resize(static_cast<size_t>(nodes));
  impl_->partOf.resize(static_cast<size_t>(nodes));
  // round-robin node placement; every node is bestowed transferable so the
  // hot-path pull works when the policy allows it
  for (int i = 0; i < nodes; i++) {
    int p = i % parts;
    impl_->partOf[static_cast<size_t>(i)] = p;
    impl_->nodes[static_cast<size_t>(i)] =
        rt::send(impl_->parts[static_cast<size_t>(p)],
                 [i](GraphPartState& s) {
                   auto node = std::make_unique<GraphNode>();
                   node->id = i;
                   s.nodes.push_back(std::move(node));
                   return rt::bestow_transferable(*s.nodes.back());
                 })
            .get();
  }

  // seeded random edges: a weighted ring for connectivity plus extras
  std::mt19937_64 rng(seed);
  auto add_edge = [&](int from, int to, std::int64_t w) {
    impl_->edges.emplace_back(from, to, w);
  };
  for (int i = 0; i < nodes; i++) {
    add_edge(i, (i + 1) % nodes, static_cast<std::int64_t>(rng() % 100));
    int extra = static_cast<int>(rng() % 3);
    for (int e = 0; e < extra; e++) {
      int to = static_cast<int>(rng() % static_cast<std::uint64_t>(nodes));
      if (to == i) continue;
      add_edge(i, to, static_cast<std::int64_t>(rng() % 100));
    }
  }

  // materialize edges inside the owners: local neighbors by pointer, remote
  // ones through their bestowed reference
  for (auto& [from, to, w] : impl_->edges) {
    auto fromPart = impl_->parts[static_cast<size_t>(
        impl_->partOf[static_cast<size_t>(from)])];
    bool local = impl_->partOf[static_cast<size_t>(from)] ==
                 impl_->partOf[static_cast<size_t>(to)];
    auto toRef = impl_->nodes[static_cast<size_t>(to)];
    int f = from, t = to;
    std::int64_t weight = w;
    rt::send(fromPart, [f, t, weight, local, toRef](GraphPartState& s) {
      GraphNode* fromNode = nullptr;
      GraphNode* toNode = nullptr;
      for (auto& nd : s.nodes) {
        if (nd->id == f) fromNode = nd.get();
        if (nd->id == t) toNode = nd.get();
      }
      GraphEdge e;
      e.toId = t;
      e.weight = weight;
      if (local && toNode) {
        e.to = toNode;
      } else {
        e.to = toRef;
      }
      fromNode->edges.push_back(std::move(e));
    }).get();
  }
}

std::vector<std::tuple<int, int, std::int64_t>> DistGraph::edge_list() const {
  return impl_->edges;
}

int DistGraph::node_count() const { return impl_->n; }

std::vector<std::int64_t> DistGraph::distributed_shortest_path(
    int source, bool pullHotNodes) {
  auto impl = impl_;
  auto driver = impl->parts.front();
  // the whole algorithm runs inside the first part actor: its own nodes are
  // read synchronously, remote nodes asynchronously via bestowed refs
  return rt::send(driver, [impl, source, pullHotNodes](GraphPartState&) {
           int n = impl->n;
           const std::int64_t INF = std::numeric_limits<std::int64_t>::max();
           std::vector<std::int64_t> dist(static_cast<size_t>(n), INF);
           std::vector<bool> done(static_cast<size_t>(n), false);
           using Item = std::pair<std::int64_t, int>;
           std::priority_queue<Item, std::vector<Item>, std::greater<>> pq;
           dist[static_cast<size_t>(source)] = 0;
           pq.emplace(0, source);
           while (!pq.empty()) {
             auto [d, u] = pq.top();
             pq.pop();
             if (done[static_cast<size_t>(u)]) continue;
             done[static_cast<size_t>(u)] = true;
             auto& ref = impl->nodes[static_cast<size_t>(u)];
             if (pullHotNodes) {
               // pull the node over when its owner is idle; either way the
               // read below lands wherever ownership points
               rt::try_transfer(ref, impl->parts.front());
             }
             auto edges =
                 rt::send_bestowed(ref, [](GraphNode& node) {
                   std::vector<std::pair<int, std::int64_t>> out;
                   out.reserve(node.edges.size());
                   for (auto& e : node.edges) {
                     out.emplace_back(e.toId, e.weight);
                   }
                   return out;
                 }).get();
             for (auto& [v, w] : edges) {
               if (dist[static_cast<size_t>(u)] + w <
                   dist[static_cast<size_t>(v)]) {
                 dist[static_cast<size_t>(v)] =
                     dist[static_cast<size_t>(u)] + w;
                 pq.emplace(dist[static_cast<size_t>(v)], v);
               }
             }
           }
           for (auto& d : dist) {
             if (d == INF) d = kUnreachable;
           }
           return dist;
         })
      .get();
}

// ---------------------------------------------------------------------------
// Ping benchmark
// ---------------------------------------------------------------------------

namespace {

struct PongerState {
  std::uint64_t pings = 0;
};
struct PingerState {
  std::uint64_t remaining = 0;
};

double median(std::vector<double> xs) {
  std::sort(xs.begin(), xs.end());
  size_t n = xs.size();
  if (n == 0) return 0;
  return n % 2 ? xs[n / 2] : (xs[n / 2 - 1] + xs[n / 2]) / 2.0;
}

PingRun ping_direct(std::uint64_t messages, unsigned workers) {
  Runtime rtx{Runtime::Options{.workers = workers}};
  auto ponger = rtx.spawn<PongerState>();
  auto pinger = rtx.spawn<PingerState>();
  rt::send(pinger, [messages](PingerState& s) { s.remaining = messages; })
      .get();
  rtx.run_until_quiescent();  // settle so the baseline is exact
  auto start0 = rtx.stats();
  auto done = std::make_shared<rt::detail::FutureCore<void>>(&rtx, 0);

  // ping and pong ops reference each other; build them as std::functions
  auto pingOp = std::make_shared<std::function<void(PongerState&)>>();
  auto pongOp = std::make_shared<std::function<void(PingerState&)>>();
  *pingOp = [pinger, pongOp](PongerState& s) {
    s.pings++;
    rt::send(pinger, *pongOp);
  };
  *pongOp = [ponger, pingOp, done](PingerState& s) {
    if (--s.remaining > 0) {
      rt::send(ponger, *pingOp);
    } else {
      done->fulfill({});
    }
  };

  auto t0 = std::chrono::steady_clock::now();
  rt::send(ponger, *pingOp);  // the first ping comes from the driver
  FutureValue<void>(done).get();
  auto t1 = std::chrono::steady_clock::now();
  rtx.run_until_quiescent();
  *pingOp = {};  // break the op cycle
  *pongOp = {};

  PingRun run;
  run.seconds = std::chrono::duration<double>(t1 - t0).count();
  run.envelopes = rtx.stats().envelopesDelivered - start0.envelopesDelivered;
  return run;
}

struct PingTarget {
  std::uint64_t pings = 0;
};
struct PongTarget {
  std::uint64_t remaining = 0;
};
struct BestowHost {
  PingTarget ping;
};
struct BestowClient {
  PongTarget pong;
};

PingRun ping_bestowed(std::uint64_t messages, unsigned workers) {
  Runtime rtx{Runtime::Options{.workers = workers}};
  auto host = rtx.spawn<BestowHost>();
  auto client = rtx.spawn<BestowClient>();
  auto pingRef =
      rt::send(host, [](BestowHost& h) { return rt::bestow(h.ping); }).get();
  auto pongRef =
      rt::send(client, [messages](BestowClient& c) {
        c.pong.remaining = messages;
        return rt::bestow(c.pong);
      }).get();
  rtx.run_until_quiescent();  // settle so the baseline is exact
  auto start0 = rtx.stats();
  auto done = std::make_shared<rt::detail::FutureCore<void>>(&rtx, 0);

  auto pingOp = std::make_shared<std::function<void(PingTarget&)>>();
  auto pongOp = std::make_shared<std::function<void(PongTarget&)>>();
  *pingOp = [pongRef, pongOp](PingTarget& t) {
    t.pings++;
    rt::send_bestowed(pongRef, *pongOp);
  };
  *pongOp = [pingRef, pingOp, done](PongTarget& t) {
    if (--t.remaining > 0) {
      rt::send_bestowed(pingRef, *pingOp);
    } else {
      done->fulfill({});
    }
  };

  auto t0 = std::chrono::steady_clock::now();
  rt::send_bestowed(pingRef, *pingOp);
  FutureValue<void>(done).get();
  auto t1 = std::chrono::steady_clock::now();
  rtx.run_until_quiescent();
  *pingOp = {};  // break the op cycle
  *pongOp = {};

  PingRun run;
  run.seconds = std::chrono::duration<double>(t1 - t0).count();
  run.envelopes = rtx.stats().envelopesDelivered - start0.envelopesDelivered;
  return run;
}

PingRun ping_bestowed_atomic(std::uint64_t messages, int batch,
                             unsigned workers) {
  Runtime rtx{Runtime::Options{.workers = workers}};
  auto host = rtx.spawn<BestowHost>();
  auto pingRef =
      rt::send(host, [](BestowHost& h) { return rt::bestow(h.ping); }).get();
  rtx.run_until_quiescent();  // settle so the baseline is exact
  auto start0 = rtx.stats();

  // the whole loop moves to the receiver in coalesced slabs
  auto t0 = std::chrono::steady_clock::now();
  std::uint64_t sent = 0;
  FutureValue<void> last;
  while (sent < messages) {
    std::uint64_t k =
        std::min<std::uint64_t>(static_cast<std::uint64_t>(batch),
                                messages - sent);
    std::vector<std::function<void(PingTarget&)>> ops;
    ops.reserve(static_cast<size_t>(k));
    for (std::uint64_t i = 0; i < k; i++) {
      ops.push_back([](PingTarget& t) { t.pings++; });
    }
    auto futs = coalesce(pingRef, std::move(ops));
    last = std::move(futs.back());
    sent += k;
  }
  last.get();
  auto t1 = std::chrono::steady_clock::now();
  rtx.run_until_quiescent();

  PingRun run;
  run.seconds = std::chrono::duration<double>(t1 - t0).count();
  run.envelopes = rtx.stats().envelopesDelivered - start0.envelopesDelivered;
  return run;
}

}  // namespace

double PingReport::median_seconds() const {
  std::vector<double> xs;
  for (auto& r : runs) xs.push_back(r.seconds);
  return median(std::move(xs));
}

double PingReport::median_throughput() const {
  double s = median_seconds();
  return s > 0 ? static_cast<double>(messages) / s : 0;
}

PingReport bench_ping(std::uint64_t messages, PingMode mode, int runs,
                      int batch, unsigned workers) {
  if (messages < 1) throw std::invalid_argument("bench_ping: messages");
  PingReport rep;
  rep.mode = mode;
  rep.messages = messages;
  rep.batch = batch;
  for (int i = 0; i < runs; i++) {
    switch (mode) {
      case PingMode::Direct:
        rep.runs.push_back(ping_direct(messages, workers));
        break;
      case PingMode::Bestowed:
        rep.runs.push_back(ping_bestowed(messages, workers));
        break;
      case PingMode::BestowedAtomic:
        rep.runs.push_back(ping_bestowed_atomic(messages, batch, workers));
        break;
    }
  }
  return rep;
}

}  // namespace bst::workloads
