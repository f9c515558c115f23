#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <type_traits>
#include <vector>

// In-process actor runtime with bestowed references, scoped atomic blocks
// backed by private mailboxes, coalesced batches, and an ownership-transfer
// policy for transferable objects.
//
// Isolation is structural: an actor's state is reachable only as the
// reference passed into closures that execute inside the actor, and bestow
// is the one sanctioned way to hand out a longer-lived handle to it.
namespace bst::rt {

class Runtime;

struct ActorTerminated : std::runtime_error {
  ActorTerminated() : std::runtime_error("actor terminated") {}
};
struct NotInsideActor : std::logic_error {
  NotInsideActor() : std::logic_error("not executing inside an actor") {}
};
struct ScopeExpired : std::logic_error {
  ScopeExpired() : std::logic_error("atomic handle used outside its block") {}
};
struct AlreadyInAtomic : std::logic_error {
  AlreadyInAtomic()
      : std::logic_error("re-entrant atomic block on the same target") {}
};
struct NotTransferable : std::logic_error {
  NotTransferable()
      : std::logic_error("reference was not created transferable") {}
};
struct SelfWait : std::logic_error {
  SelfWait()
      : std::logic_error(
            "future would be fulfilled by the actor that is waiting on it") {}
};
struct QuiescenceTimeout : std::runtime_error {
  explicit QuiescenceTimeout(const std::string& diag)
      : std::runtime_error("timed out waiting for quiescence: " + diag) {}
};

enum class TransferPolicy { Never, WhenOwnerIdle };
enum class TransferResult { Transferred, Delegated };

struct Stats {
  std::uint64_t messagesSent = 0;
  std::uint64_t envelopesDelivered = 0;
  std::uint64_t privateInstalls = 0;
  std::uint64_t publicRestores = 0;
  std::uint64_t transfers = 0;
  std::uint64_t coalescedBatches = 0;
};

namespace detail {

class ActorBase;

// Execution context of the calling thread: the actor currently running an
// envelope on it, if any.
ActorBase*& current_actor();
// Stable identity tag for envelope provenance: the actor id inside an actor,
// a synthetic per-thread id outside.
std::uint64_t current_tag();

template <class R>
struct Stored {
  using type = R;
};
template <>
struct Stored<void> {
  struct Unit {};
  using type = Unit;
};

template <class R>
class FutureCore {
 public:
  using StoredT = typename Stored<R>::type;

  FutureCore(Runtime* rt, std::uint64_t fulfiller)
      : rt_(rt), fulfiller_(fulfiller) {}

  void fulfill(StoredT v) {
    std::vector<std::function<void()>> cbs;
    {
      std::lock_guard lk(mu_);
      if (done_) return;
      value_.emplace(std::move(v));
      done_ = true;
      cbs.swap(callbacks_);
    }
    cv_.notify_all();
    for (auto& cb : cbs) cb();
  }

  void fail(std::exception_ptr e) {
    std::vector<std::function<void()>> cbs;
    {
      std::lock_guard lk(mu_);
      if (done_) return;
      error_ = std::move(e);
      done_ = true;
      cbs.swap(callbacks_);
    }
    cv_.notify_all();
    for (auto& cb : cbs) cb();
  }

  bool ready() const {
    std::lock_guard lk(mu_);
    return done_;
  }

  void on_ready(std::function<void()> cb) {
    {
      std::lock_guard lk(mu_);
      if (!done_) {
        callbacks_.push_back(std::move(cb));
        return;
      }
    }
    cb();
  }

  R get();  // defined after Runtime (may pump the scheduler)

  // Waits up to the deadline, pumping like get(); true once fulfilled.
  bool wait_until(std::chrono::steady_clock::time_point deadline);

  std::uint64_t fulfiller() const { return fulfiller_; }

 private:
  friend class bst::rt::Runtime;
  Runtime* rt_;
  std::uint64_t fulfiller_;
  mutable std::mutex mu_;
  std::condition_variable cv_;
  bool done_ = false;
  std::optional<StoredT> value_;
  std::exception_ptr error_;
  std::vector<std::function<void()>> callbacks_;
};

struct Envelope {
  enum class Kind { Perform, Batch, InstallPrivate, RestorePublic };
  Kind kind = Kind::Perform;
  std::vector<std::function<void()>> ops;
  std::vector<std::function<void()>> abandons;  // error paths, one per future
  std::shared_ptr<struct PrivateMailbox> mailbox;
  std::shared_ptr<FutureCore<void>> installAck;
  std::uint64_t senderTag = 0;
};

struct PrivateMailbox {
  explicit PrivateMailbox(std::uint64_t initiator) : initiatorTag(initiator) {}
  std::mutex mu;
  std::deque<Envelope> q;
  const std::uint64_t initiatorTag;
};

class ActorBase : public std::enable_shared_from_this<ActorBase> {
 public:
  virtual ~ActorBase() = default;
  std::uint64_t id() const { return id_; }
  Runtime* runtime() const { return rt_; }

  void enqueue_public(Envelope env);
  // Pushes into an installed (or pending) private mailbox.
  void enqueue_private(const std::shared_ptr<PrivateMailbox>& mb,
                       Envelope env);

  // One envelope from the active mailbox; called by workers and the pump.
  void process_one();

  void terminate();
  bool terminated() const {
    std::lock_guard lk(mu_);
    return terminated_;
  }

  // Transfer support: atomically checks owner-is-idle and holds the actor
  // while the ownership record is updated.
  bool try_mark_idle_for_transfer();
  void release_transfer_mark();

 protected:
  ActorBase(Runtime* rt, std::uint64_t id) : rt_(rt), id_(id) {}

 private:
  friend class bst::rt::Runtime;

  void maybe_schedule();
  bool runnable_locked() const;
  void execute(Envelope& env);

  Runtime* rt_;
  std::uint64_t id_;
  mutable std::mutex mu_;
  std::deque<Envelope> publicQ_;
  std::shared_ptr<PrivateMailbox> priv_;
  bool executing_ = false;
  bool scheduled_ = false;
  bool terminated_ = false;
  std::atomic<int> inBody_{0};  // serialization invariant, must stay <= 1
};

template <class S>
class ActorCell final : public ActorBase {
 public:
  template <class... Args>
  ActorCell(Runtime* rt, std::uint64_t id, Args&&... args)
      : ActorBase(rt, id), state_(std::forward<Args>(args)...) {}
  S& state() { return state_; }

 private:
  S state_;
};

// Shared ownership record of a bestowed object. For transferable objects the
// owner field is the single source of truth consulted on every dispatch.
template <class T>
struct BestowCell {
  std::mutex mu;
  std::shared_ptr<ActorBase> owner;
  T* object;
  bool transferable;
};

}  // namespace detail

template <class R>
class FutureValue {
 public:
  FutureValue() = default;
  explicit FutureValue(std::shared_ptr<detail::FutureCore<R>> core)
      : core_(std::move(core)) {}

  R get() { return core_->get(); }
  bool ready() const { return core_->ready(); }
  bool wait_for(std::chrono::milliseconds d) {
    return core_->wait_until(std::chrono::steady_clock::now() + d);
  }
  template <class F>
  void on_ready(F&& f) {
    core_->on_ready(std::forward<F>(f));
  }
  bool valid() const { return core_ != nullptr; }

 private:
  std::shared_ptr<detail::FutureCore<R>> core_;
};

template <class S>
class ActorRef {
 public:
  ActorRef() = default;
  explicit ActorRef(std::shared_ptr<detail::ActorCell<S>> cell)
      : cell_(std::move(cell)) {}

  std::uint64_t id() const { return cell_->id(); }
  bool valid() const { return cell_ != nullptr; }
  detail::ActorCell<S>* cell() const { return cell_.get(); }
  std::shared_ptr<detail::ActorCell<S>> cell_ptr() const { return cell_; }

  friend bool operator==(const ActorRef& a, const ActorRef& b) {
    return a.cell_ == b.cell_;
  }

 private:
  std::shared_ptr<detail::ActorCell<S>> cell_;
};

template <class T>
class BestowedRef {
 public:
  BestowedRef() = default;
  explicit BestowedRef(std::shared_ptr<detail::BestowCell<T>> cell)
      : cell_(std::move(cell)) {}

  bool valid() const { return cell_ != nullptr; }
  bool transferable() const { return cell_->transferable; }
  std::shared_ptr<detail::ActorBase> owner() const {
    std::lock_guard lk(cell_->mu);
    return cell_->owner;
  }
  detail::BestowCell<T>* cell() const { return cell_.get(); }
  std::shared_ptr<detail::BestowCell<T>> cell_ptr() const { return cell_; }

 private:
  std::shared_ptr<detail::BestowCell<T>> cell_;
};

class Runtime {
 public:
  struct Options {
    unsigned workers = 0;  // 0: hardware concurrency (min 2)
    bool deterministic = false;
    std::uint64_t seed = 0;
  };

  Runtime() : Runtime(Options{}) {}
  explicit Runtime(Options opts);
  ~Runtime();

  Runtime(const Runtime&) = delete;
  Runtime& operator=(const Runtime&) = delete;

  template <class S, class... Args>
  ActorRef<S> spawn(Args&&... args) {
    auto cell = std::make_shared<detail::ActorCell<S>>(
        this, nextActorId_.fetch_add(1), std::forward<Args>(args)...);
    {
      std::lock_guard lk(actorsMu_);
      actors_.push_back(cell);
    }
    return ActorRef<S>(cell);
  }

  template <class S>
  void stop(const ActorRef<S>& ref) {
    ref.cell()->terminate();
  }

  void shutdown();

  void set_transfer_policy(TransferPolicy p) { policy_.store(p); }
  TransferPolicy transfer_policy() const { return policy_.load(); }

  Stats stats() const;

  // Blocks until every mailbox is empty, nothing is executing and no private
  // mailbox is installed. Throws QuiescenceTimeout with a diagnostic naming
  // the non-quiescent actors otherwise.
  Stats run_until_quiescent(
      std::chrono::milliseconds timeout = std::chrono::milliseconds(10000));

  bool deterministic() const { return deterministic_; }

  // --- internals used by the templates below ---
  void ready_actor(const std::shared_ptr<detail::ActorBase>& a);
  bool run_one_ready();  // pump: execute one pending envelope on this thread
  void note_sent() { messagesSent_.fetch_add(1, std::memory_order_relaxed); }
  void note_delivered() {
    envelopesDelivered_.fetch_add(1, std::memory_order_relaxed);
  }
  void note_install() {
    privateInstalls_.fetch_add(1, std::memory_order_relaxed);
  }
  void note_restore() {
    publicRestores_.fetch_add(1, std::memory_order_relaxed);
  }
  void note_transfer() { transfers_.fetch_add(1, std::memory_order_relaxed); }
  void note_batch() {
    coalescedBatches_.fetch_add(1, std::memory_order_relaxed);
  }
  void note_exec_begin() { executing_.fetch_add(1); }
  void note_exec_end() { executing_.fetch_sub(1); }

 private:
  friend class detail::ActorBase;

  void worker_loop();
  std::shared_ptr<detail::ActorBase> pick_ready_locked();
  std::string quiescence_diagnostic();

  std::mutex schedMu_;
  std::condition_variable schedCv_;
  std::deque<std::shared_ptr<detail::ActorBase>> ready_;
  bool stopping_ = false;
  std::mt19937_64 rng_;
  bool deterministic_ = false;

  std::vector<std::thread> workers_;

  std::mutex actorsMu_;
  std::vector<std::shared_ptr<detail::ActorBase>> actors_;
  std::atomic<std::uint64_t> nextActorId_{1};

  std::atomic<TransferPolicy> policy_{TransferPolicy::Never};

  std::atomic<std::uint64_t> messagesSent_{0};
  std::atomic<std::uint64_t> envelopesDelivered_{0};
  std::atomic<std::uint64_t> privateInstalls_{0};
  std::atomic<std::uint64_t> publicRestores_{0};
  std::atomic<std::uint64_t> transfers_{0};
  std::atomic<std::uint64_t> coalescedBatches_{0};
  std::atomic<int> executing_{0};
};

namespace detail {

// Set while a worker (or pump frame) belongs to a runtime; futures use it to
// decide between pumping and plain blocking.
Runtime*& current_runtime();

template <class R>
R FutureCore<R>::get() {
  // Waiting on a future the current actor itself must fulfill can never
  // finish: its own later envelopes are behind the current one.
  if (current_actor() && current_actor()->id() == fulfiller_ && !ready()) {
    throw SelfWait();
  }
  if (current_runtime() == rt_) {
    // Executing inside the runtime: keep the system moving while waiting.
    while (!ready()) {
      if (!rt_->run_one_ready()) {
        std::unique_lock lk(mu_);
        cv_.wait_for(lk, std::chrono::microseconds(200),
                     [&] { return done_; });
      }
    }
  } else {
    std::unique_lock lk(mu_);
    cv_.wait(lk, [&] { return done_; });
  }
  std::lock_guard lk(mu_);
  if (error_) std::rethrow_exception(error_);
  if constexpr (std::is_void_v<R>) {
    return;
  } else {
    return std::move(*value_);
  }
}

template <class R>
bool FutureCore<R>::wait_until(std::chrono::steady_clock::time_point deadline) {
  if (current_runtime() == rt_) {
    while (!ready()) {
      if (std::chrono::steady_clock::now() > deadline) return false;
      if (!rt_->run_one_ready()) {
        std::unique_lock lk(mu_);
        cv_.wait_for(lk, std::chrono::microseconds(200),
                     [&] { return done_; });
      }
    }
    return true;
  }
  std::unique_lock lk(mu_);
  return cv_.wait_until(lk, deadline, [&] { return done_; });
}

// Builds the perform op + abandon pair for an op against state accessor A.
template <class R, class A, class F>
void bind_op(Envelope& env, const std::shared_ptr<FutureCore<R>>& fut, A acc,
             F op) {
  env.ops.push_back([fut, acc, op = std::move(op)]() mutable {
    try {
      if constexpr (std::is_void_v<R>) {
        op(acc());
        fut->fulfill({});
      } else {
        fut->fulfill(op(acc()));
      }
    } catch (...) {
      fut->fail(std::current_exception());
    }
  });
  env.abandons.push_back(
      [fut] { fut->fail(std::make_exception_ptr(ActorTerminated())); });
}

}  // namespace detail

// --- core operations --------------------------------------------------------

// Sends a closure to run against the actor's private state; the future is
// fulfilled with its result.
template <class S, class F>
auto send(const ActorRef<S>& a, F op)
    -> FutureValue<std::invoke_result_t<F, S&>> {
  using R = std::invoke_result_t<F, S&>;
  auto* cell = a.cell();
  auto fut = std::make_shared<detail::FutureCore<R>>(cell->runtime(),
                                                     cell->id());
  detail::Envelope env;
  env.kind = detail::Envelope::Kind::Perform;
  env.senderTag = detail::current_tag();
  detail::bind_op(env, fut, [cell]() -> S& { return cell->state(); },
                  std::move(op));
  cell->runtime()->note_sent();
  cell->enqueue_public(std::move(env));
  return FutureValue<R>(fut);
}

// Lifts an object living inside the calling actor into a freely shareable
// handle; operations on it are delegated to this actor.
template <class T>
BestowedRef<T> bestow(T& objectInsideActor) {
  detail::ActorBase* self = detail::current_actor();
  if (!self) throw NotInsideActor();
  auto cell = std::make_shared<detail::BestowCell<T>>();
  cell->owner = self->shared_from_this();
  cell->object = &objectInsideActor;
  cell->transferable = false;
  return BestowedRef<T>(cell);
}

template <class T>
BestowedRef<T> bestow_transferable(T& objectInsideActor) {
  detail::ActorBase* self = detail::current_actor();
  if (!self) throw NotInsideActor();
  auto cell = std::make_shared<detail::BestowCell<T>>();
  cell->owner = self->shared_from_this();
  cell->object = &objectInsideActor;
  cell->transferable = true;
  return BestowedRef<T>(cell);
}

namespace detail {

// Dispatch with owner re-checking: if ownership moved while the envelope was
// in flight, the op is re-delegated to the current owner, so an object's
// state is only ever touched by the actor that owns it at execution time.
template <class T, class R, class F>
void dispatch_bestowed(std::shared_ptr<BestowCell<T>> cell, F op,
                       std::shared_ptr<FutureCore<R>> fut) {
  std::shared_ptr<ActorBase> owner;
  {
    std::lock_guard lk(cell->mu);
    owner = cell->owner;
  }
  if (cell->transferable && current_actor() == owner.get()) {
    // the owner operates on its own transferable synchronously
    try {
      if constexpr (std::is_void_v<R>) {
        op(*cell->object);
        fut->fulfill({});
      } else {
        fut->fulfill(op(*cell->object));
      }
    } catch (...) {
      fut->fail(std::current_exception());
    }
    return;
  }
  Envelope env;
  env.kind = Envelope::Kind::Perform;
  env.senderTag = current_tag();
  env.ops.push_back([cell, op = std::move(op), fut]() mutable {
    std::shared_ptr<ActorBase> nowOwner;
    {
      std::lock_guard lk(cell->mu);
      nowOwner = cell->owner;
    }
    if (nowOwner.get() != current_actor()) {
      // ownership moved in flight: delegate onward
      dispatch_bestowed<T, R, F>(cell, std::move(op), fut);
      return;
    }
    try {
      if constexpr (std::is_void_v<R>) {
        op(*cell->object);
        fut->fulfill({});
      } else {
        fut->fulfill(op(*cell->object));
      }
    } catch (...) {
      fut->fail(std::current_exception());
    }
  });
  env.abandons.push_back(
      [fut] { fut->fail(std::make_exception_ptr(ActorTerminated())); });
  owner->runtime()->note_sent();
  owner->enqueue_public(std::move(env));
}

}  // namespace detail

// Equivalent to send(owner, state -> op(object)): serialized in the owner's
// mailbox, interleaved with its other traffic.
template <class T, class F>
auto send_bestowed(const BestowedRef<T>& b, F op)
    -> FutureValue<std::invoke_result_t<F, T&>> {
  using R = std::invoke_result_t<F, T&>;
  auto owner = b.owner();
  auto fut =
      std::make_shared<detail::FutureCore<R>>(owner->runtime(), owner->id());
  detail::dispatch_bestowed<T, R, F>(b.cell_ptr(), std::move(op), fut);
  return FutureValue<R>(fut);
}

// Attempts to move ownership of a transferable object. Under WhenOwnerIdle
// the move happens only when the owner is between envelopes with an empty
// mailbox; otherwise the operation stays delegation-based.
template <class T, class S>
TransferResult try_transfer(const BestowedRef<T>& b,
                            const ActorRef<S>& newOwner) {
  auto* cell = b.cell();
  if (!cell->transferable) throw NotTransferable();
  Runtime* rt = newOwner.cell()->runtime();
  if (rt->transfer_policy() == TransferPolicy::Never) {
    return TransferResult::Delegated;
  }
  std::shared_ptr<detail::ActorBase> owner;
  {
    std::lock_guard lk(cell->mu);
    owner = cell->owner;
  }
  if (owner.get() == newOwner.cell()) return TransferResult::Transferred;
  if (!owner->try_mark_idle_for_transfer()) return TransferResult::Delegated;
  {
    std::lock_guard lk(cell->mu);
    cell->owner = newOwner.cell_ptr();
  }
  owner->release_transfer_mark();
  rt->note_transfer();
  return TransferResult::Transferred;
}

// --- atomic blocks ----------------------------------------------------------

template <class T>
class AtomicHandle {
 public:
  AtomicHandle(std::shared_ptr<detail::ActorBase> target,
               std::shared_ptr<detail::PrivateMailbox> mb,
               std::shared_ptr<std::atomic<bool>> alive,
               std::function<T&()> access)
      : target_(std::move(target)),
        mb_(std::move(mb)),
        alive_(std::move(alive)),
        access_(std::move(access)) {}

  AtomicHandle(const AtomicHandle&) = delete;
  AtomicHandle& operator=(const AtomicHandle&) = delete;
  AtomicHandle(AtomicHandle&&) = default;

  // Enqueues op on the private mailbox: FIFO among the block's sends and
  // never interleaved with other actors' messages at the target.
  template <class F>
  auto send(F op) -> FutureValue<std::invoke_result_t<F, T&>> {
    using R = std::invoke_result_t<F, T&>;
    if (!alive_->load()) throw ScopeExpired();
    if (detail::current_tag() != mb_->initiatorTag) {
      // handles are actor-local: they may not cross to another actor
      throw ScopeExpired();
    }
    auto fut = std::make_shared<detail::FutureCore<R>>(target_->runtime(),
                                                       target_->id());
    detail::Envelope env;
    env.kind = detail::Envelope::Kind::Perform;
    env.senderTag = mb_->initiatorTag;
    detail::bind_op(env, fut, access_, std::move(op));
    target_->runtime()->note_sent();
    target_->enqueue_private(mb_, std::move(env));
    return FutureValue<R>(fut);
  }

  std::uint64_t target_id() const { return target_->id(); }

 private:
  std::shared_ptr<detail::ActorBase> target_;
  std::shared_ptr<detail::PrivateMailbox> mb_;
  std::shared_ptr<std::atomic<bool>> alive_;
  std::function<T&()> access_;
};

template <class T, class F>
auto atomic_send(AtomicHandle<T>& h, F op) {
  return h.send(std::move(op));
}

namespace detail {

// Per-thread stack of actors currently targeted by atomic blocks; used to
// reject re-entrant blocks on the same target.
std::vector<ActorBase*>& atomic_stack();

// RAII acquisition of one private mailbox.
template <class T>
class AtomicScope {
 public:
  AtomicScope(std::shared_ptr<ActorBase> target, std::function<T&()> access)
      : target_(std::move(target)),
        mb_(std::make_shared<PrivateMailbox>(current_tag())),
        alive_(std::make_shared<std::atomic<bool>>(true)),
        access_(std::move(access)) {
    auto& stack = atomic_stack();
    if (std::find(stack.begin(), stack.end(), target_.get()) != stack.end()) {
      throw AlreadyInAtomic();
    }
    if (target_->terminated()) throw ActorTerminated();
    stack.push_back(target_.get());
    ack_ = std::make_shared<FutureCore<void>>(target_->runtime(),
                                              target_->id());
    Envelope env;
    env.kind = Envelope::Kind::InstallPrivate;
    env.mailbox = mb_;
    env.installAck = ack_;
    env.senderTag = mb_->initiatorTag;
    target_->enqueue_public(std::move(env));
  }

  ~AtomicScope() {
    if (released_) return;
    release();
  }

  AtomicScope(const AtomicScope&) = delete;
  AtomicScope(AtomicScope&&) = delete;

  AtomicHandle<T> handle() {
    return AtomicHandle<T>(target_, mb_, alive_, access_);
  }

  // The block's guarantee becomes visible once installation is acknowledged.
  void wait_installed() { FutureValue<void>(ack_).get(); }

  void release() {
    released_ = true;
    alive_->store(false);
    Envelope env;
    env.kind = Envelope::Kind::RestorePublic;
    env.senderTag = mb_->initiatorTag;
    target_->enqueue_private(mb_, std::move(env));
    auto& stack = atomic_stack();
    auto it = std::find(stack.begin(), stack.end(), target_.get());
    if (it != stack.end()) stack.erase(it);
  }

 private:
  std::shared_ptr<ActorBase> target_;
  std::shared_ptr<PrivateMailbox> mb_;
  std::shared_ptr<std::atomic<bool>> alive_;
  std::function<T&()> access_;
  std::shared_ptr<FutureCore<void>> ack_;
  bool released_ = false;
};

template <class T, class Body>
auto atomic_impl(std::shared_ptr<ActorBase> target, std::function<T&()> acc,
                 Body&& body) {
  AtomicScope<T> scope(std::move(target), std::move(acc));
  AtomicHandle<T> h = scope.handle();
  using R = std::invoke_result_t<Body, AtomicHandle<T>&>;
  if constexpr (std::is_void_v<R>) {
    try {
      body(h);
    } catch (...) {
      scope.release();  // restore on unwind: a wedged target is worse
      throw;
    }
    scope.release();
    scope.wait_installed();
  } else {
    R result = [&] {
      try {
        return body(h);
      } catch (...) {
        scope.release();
        throw;
      }
    }();
    scope.release();
    scope.wait_installed();
    return result;
  }
}

}  // namespace detail

// Runs body with a scope-bound handle while the target drains only the
// block's private mailbox; buffered public traffic resumes in FIFO order at
// exit (normal or exceptional).
template <class S, class Body>
auto atomic(const ActorRef<S>& target, Body&& body) {
  auto cell = target.cell_ptr();
  auto* raw = cell.get();
  return detail::atomic_impl<S>(
      cell, [raw]() -> S& { return raw->state(); },
      std::forward<Body>(body));
}

template <class T, class Body>
auto atomic(const BestowedRef<T>& target, Body&& body) {
  if (target.transferable()) {
    // transferable objects follow the ownership-transfer discipline; their
    // owner may move, which an installed mailbox cannot follow
    throw NotTransferable();
  }
  auto cell = target.cell_ptr();
  return detail::atomic_impl<T>(
      target.owner(), [cell]() -> T& { return *cell->object; },
      std::forward<Body>(body));
}

// Acquires private mailboxes on all targets in identity order (waiting for
// each installation), runs body with one handle per target, and releases in
// reverse order. Identity ordering keeps concurrent atomic_all callers from
// deadlocking; ad-hoc nesting of plain atomic() remains deadlock-capable.
template <class S, class Body>
auto atomic_all(std::vector<ActorRef<S>> targets, Body&& body) {
  if (targets.empty()) throw std::invalid_argument("atomic_all: no targets");
  std::sort(targets.begin(), targets.end(),
            [](const ActorRef<S>& a, const ActorRef<S>& b) {
              return a.id() < b.id();
            });
  for (size_t i = 1; i < targets.size(); i++) {
    if (targets[i].id() == targets[i - 1].id()) {
      throw std::invalid_argument("atomic_all: duplicate target");
    }
  }
  std::vector<std::unique_ptr<detail::AtomicScope<S>>> scopes;
  scopes.reserve(targets.size());
  for (auto& t : targets) {
    auto cell = t.cell_ptr();
    auto* raw = cell.get();
    scopes.push_back(std::make_unique<detail::AtomicScope<S>>(
        cell, [raw]() -> S& { return raw->state(); }));
    scopes.back()->wait_installed();  // hold before acquiring the next
  }
  std::vector<AtomicHandle<S>> handles;
  handles.reserve(scopes.size());
  for (auto& s : scopes) handles.push_back(s->handle());

  auto release_all = [&] {
    for (auto it = scopes.rbegin(); it != scopes.rend(); ++it) {
      (*it)->release();
    }
  };
  using R = std::invoke_result_t<Body, std::vector<AtomicHandle<S>>&>;
  if constexpr (std::is_void_v<R>) {
    try {
      body(handles);
    } catch (...) {
      release_all();
      throw;
    }
    release_all();
  } else {
    R result = [&] {
      try {
        return body(handles);
      } catch (...) {
        release_all();
        throw;
      }
    }();
    release_all();
    return result;
  }
}

// --- coalescing --------------------------------------------------------------

// One envelope carrying the whole batch: the target runs the closures
// back-to-back with no interleaving, and the sender cannot react in between.
template <class S, class R>
std::vector<FutureValue<R>> coalesce(const ActorRef<S>& target,
                                     std::vector<std::function<R(S&)>> batch) {
  if (batch.empty()) throw std::invalid_argument("coalesce: empty batch");
  auto* cell = target.cell();
  Runtime* rt = cell->runtime();
  detail::Envelope env;
  env.kind = detail::Envelope::Kind::Batch;
  env.senderTag = detail::current_tag();
  std::vector<FutureValue<R>> futures;
  futures.reserve(batch.size());
  for (auto& op : batch) {
    auto fut = std::make_shared<detail::FutureCore<R>>(rt, cell->id());
    detail::bind_op(env, fut, [cell]() -> S& { return cell->state(); },
                    std::move(op));
    futures.emplace_back(fut);
  }
  rt->note_sent();
  cell->enqueue_public(std::move(env));
  return futures;
}

template <class T, class R>
std::vector<FutureValue<R>> coalesce(const BestowedRef<T>& target,
                                     std::vector<std::function<R(T&)>> batch) {
  if (batch.empty()) throw std::invalid_argument("coalesce: empty batch");
  auto owner = target.owner();
  Runtime* rt = owner->runtime();
  auto cell = target.cell_ptr();
  detail::Envelope env;
  env.kind = detail::Envelope::Kind::Batch;
  env.senderTag = detail::current_tag();
  std::vector<FutureValue<R>> futures;
  futures.reserve(batch.size());
  for (auto& op : batch) {
    auto fut = std::make_shared<detail::FutureCore<R>>(rt, owner->id());
    detail::bind_op(env, fut, [cell]() -> T& { return *cell->object; },
                    std::move(op));
    futures.emplace_back(fut);
  }
  rt->note_sent();
  owner->enqueue_public(std::move(env));
  return futures;
}

}  // namespace bst::rt
