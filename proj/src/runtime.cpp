#include "bestow/runtime.hpp"

namespace bst::rt {
namespace detail {

namespace {
thread_local ActorBase* tls_current_actor = nullptr;
thread_local Runtime* tls_current_runtime = nullptr;
thread_local std::vector<ActorBase*> tls_atomic_stack;

std::uint64_t external_thread_tag() {
  static std::atomic<std::uint64_t> next{1};
  thread_local std::uint64_t tag = (1ull << 63) | next.fetch_add(1);
  return tag;
}
}  // namespace

ActorBase*& current_actor() { return tls_current_actor; }
Runtime*& current_runtime() { return tls_current_runtime; }
std::vector<ActorBase*>& atomic_stack() { return tls_atomic_stack; }

std::uint64_t current_tag() {
  if (tls_current_actor) return tls_current_actor->id();
  return external_thread_tag();
}

void ActorBase::enqueue_public(Envelope env) {
  {
    std::lock_guard lk(mu_);
    if (terminated_) {
      for (auto& a : env.abandons) a();
      if (env.installAck) {
        env.installAck->fail(std::make_exception_ptr(ActorTerminated()));
      }
      return;
    }
    publicQ_.push_back(std::move(env));
  }
  maybe_schedule();
}

void ActorBase::enqueue_private(const std::shared_ptr<PrivateMailbox>& mb,
                                Envelope env) {
  {
    // mu_ is held across the push so terminate() cannot orphan the mailbox
    // between the liveness check and the enqueue
    std::lock_guard lk(mu_);
    if (terminated_) {
      for (auto& a : env.abandons) a();
      return;
    }
    std::lock_guard plk(mb->mu);
    mb->q.push_back(std::move(env));
  }
  maybe_schedule();
}

bool ActorBase::runnable_locked() const {
  if (terminated_) return false;
  if (priv_) {
    std::lock_guard plk(priv_->mu);
    return !priv_->q.empty();
  }
  return !publicQ_.empty();
}

void ActorBase::maybe_schedule() {
  bool doit = false;
  {
    std::lock_guard lk(mu_);
    if (!executing_ && !scheduled_ && runnable_locked()) {
      scheduled_ = true;
      doit = true;
    }
  }
  if (doit) rt_->ready_actor(shared_from_this());
}

void ActorBase::process_one() {
  Envelope env;
  {
    std::lock_guard lk(mu_);
    scheduled_ = false;
    if (terminated_ || executing_) return;
    if (priv_) {
      std::lock_guard plk(priv_->mu);
      if (priv_->q.empty()) return;
      env = std::move(priv_->q.front());
      priv_->q.pop_front();
      // Atomic non-interleaving: everything read out of a private mailbox
      // must carry the tag of the conversation's initiator.
      if ((env.kind == Envelope::Kind::Perform ||
           env.kind == Envelope::Kind::Batch) &&
          env.senderTag != priv_->initiatorTag) {
        std::terminate();  // invariant breach: foreign message in a block
      }
    } else {
      if (publicQ_.empty()) return;
      env = std::move(publicQ_.front());
      publicQ_.pop_front();
    }
    executing_ = true;
  }
  rt_->note_exec_begin();
  ActorBase* prevActor = tls_current_actor;
  tls_current_actor = this;
  execute(env);
  tls_current_actor = prevActor;
  rt_->note_exec_end();
  {
    std::lock_guard lk(mu_);
    executing_ = false;
  }
  maybe_schedule();
}

void ActorBase::execute(Envelope& env) {
  switch (env.kind) {
    case Envelope::Kind::Perform:
    case Envelope::Kind::Batch: {
      if (inBody_.fetch_add(1) != 0) std::terminate();  // never two at once
      for (auto& op : env.ops) op();
      inBody_.fetch_sub(1);
      rt_->note_delivered();
      if (env.kind == Envelope::Kind::Batch) rt_->note_batch();
      break;
    }
    case Envelope::Kind::InstallPrivate: {
      {
        std::lock_guard lk(mu_);
        priv_ = env.mailbox;
      }
      rt_->note_delivered();
      rt_->note_install();
      if (env.installAck) env.installAck->fulfill({});
      break;
    }
    case Envelope::Kind::RestorePublic: {
      {
        std::lock_guard lk(mu_);
        priv_ = nullptr;
      }
      rt_->note_delivered();
      rt_->note_restore();
      break;
    }
  }
}

void ActorBase::terminate() {
  std::deque<Envelope> orphanedPublic;
  std::shared_ptr<PrivateMailbox> orphanedPriv;
  {
    std::lock_guard lk(mu_);
    if (terminated_) return;
    terminated_ = true;
    orphanedPublic.swap(publicQ_);
    orphanedPriv = std::move(priv_);
    priv_ = nullptr;
  }
  auto abandon_all = [](std::deque<Envelope>& q) {
    for (auto& env : q) {
      for (auto& a : env.abandons) a();
      if (env.installAck) {
        env.installAck->fail(std::make_exception_ptr(ActorTerminated()));
      }
    }
  };
  abandon_all(orphanedPublic);
  if (orphanedPriv) {
    std::lock_guard plk(orphanedPriv->mu);
    abandon_all(orphanedPriv->q);
    orphanedPriv->q.clear();
  }
}

bool ActorBase::try_mark_idle_for_transfer() {
  std::lock_guard lk(mu_);
  if (executing_ || terminated_ || priv_ || !publicQ_.empty()) return false;
  executing_ = true;  // hold the actor while ownership swings
  return true;
}

void ActorBase::release_transfer_mark() {
  {
    std::lock_guard lk(mu_);
    executing_ = false;
  }
  maybe_schedule();
}

}  // namespace detail

Runtime::Runtime(Options opts) : deterministic_(opts.deterministic) {
  rng_.seed(opts.seed);
  unsigned n = opts.workers;
  if (deterministic_) {
    n = 1;
  } else if (n == 0) {
    n = std::max(2u, std::thread::hardware_concurrency());
  }
  workers_.reserve(n);
  for (unsigned i = 0; i < n; i++) {
    workers_.emplace_back([this] { worker_loop(); });
  }
}

Runtime::~Runtime() { shutdown(); }

void Runtime::shutdown() {
  {
    std::lock_guard lk(schedMu_);
    if (stopping_) return;
    stopping_ = true;
  }
  schedCv_.notify_all();
  std::vector<std::shared_ptr<detail::ActorBase>> actors;
  {
    std::lock_guard lk(actorsMu_);
    actors = actors_;
  }
  for (auto& a : actors) a->terminate();
  for (auto& w : workers_) {
    if (w.joinable()) w.join();
  }
}

void Runtime::ready_actor(const std::shared_ptr<detail::ActorBase>& a) {
  {
    std::lock_guard lk(schedMu_);
    ready_.push_back(a);
  }
  schedCv_.notify_one();
}

std::shared_ptr<detail::ActorBase> Runtime::pick_ready_locked() {
  if (ready_.empty()) return nullptr;
  size_t idx = 0;
  if (deterministic_ && ready_.size() > 1) {
    idx = static_cast<size_t>(rng_() % ready_.size());
  }
  auto a = ready_[idx];
  ready_.erase(ready_.begin() + static_cast<long>(idx));
  return a;
}

void Runtime::worker_loop() {
  detail::current_runtime() = this;
  for (;;) {
    std::shared_ptr<detail::ActorBase> a;
    {
      std::unique_lock lk(schedMu_);
      schedCv_.wait(lk, [&] { return stopping_ || !ready_.empty(); });
      if (stopping_) return;
      a = pick_ready_locked();
    }
    if (a) a->process_one();
  }
}

bool Runtime::run_one_ready() {
  std::shared_ptr<detail::ActorBase> a;
  {
    std::lock_guard lk(schedMu_);
    a = pick_ready_locked();
  }
  if (!a) return false;
  a->process_one();
  return true;
}

Stats Runtime::stats() const {
  Stats s;
  s.messagesSent = messagesSent_.load();
  s.envelopesDelivered = envelopesDelivered_.load();
  s.privateInstalls = privateInstalls_.load();
  s.publicRestores = publicRestores_.load();
  s.transfers = transfers_.load();
  s.coalescedBatches = coalescedBatches_.load();
  return s;
}

std::string Runtime::quiescence_diagnostic() {
  std::ostringstream os;
  std::lock_guard lk(actorsMu_);
  for (auto& a : actors_) {
    std::lock_guard alk(a->mu_);
    if (a->terminated_) continue;
    bool busy = a->executing_;
    size_t pub = a->publicQ_.size();
    bool installed = a->priv_ != nullptr;
    size_t privn = 0;
    if (installed) {
      std::lock_guard plk(a->priv_->mu);
      privn = a->priv_->q.size();
    }
    if (busy || pub > 0 || installed) {
      os << " actor#" << a->id_ << "{";
      if (busy) os << "executing ";
      if (pub) os << "public=" << pub << " ";
      if (installed) {
        os << "private-mailbox-installed pending=" << privn
           << " (unfinished atomic block)";
      }
      os << "}";
    }
  }
  std::string out = os.str();
  return out.empty() ? " (transient)" : out;
}

Stats Runtime::run_until_quiescent(std::chrono::milliseconds timeout) {
  auto deadline = std::chrono::steady_clock::now() + timeout;
  for (;;) {
    bool idle = executing_.load() == 0;
    if (idle) {
      std::lock_guard lk(schedMu_);
      if (!ready_.empty()) idle = false;
    }
    if (idle) {
      std::lock_guard lk(actorsMu_);
      for (auto& a : actors_) {
        std::lock_guard alk(a->mu_);
        if (a->terminated_) continue;
        if (a->executing_ || !a->publicQ_.empty() || a->priv_) {
          idle = false;
          break;
        }
      }
    }
    if (idle) {
      // settle check: nothing became ready while we looked
      std::lock_guard lk(schedMu_);
      if (ready_.empty() && executing_.load() == 0) return stats();
    }
    if (std::chrono::steady_clock::now() > deadline) {
      throw QuiescenceTimeout(quiescence_diagnostic());
    }
    std::this_thread::sleep_for(std::chrono::microseconds(100));
  }
}

}  // namespace bst::rt
