#include "bestow/wellformed.hpp"

#include <sstream>

namespace bst::calc {

std::string WfReport::str() const {
  if (ok) return "well-formed";
  std::ostringstream os;
  for (const auto& v : violations) {
    os << v.rule << " [" << v.subject << "]: " << v.detail << "\n";
  }
  return os.str();
}

namespace {

struct ValueRefs {
  std::vector<int> locs;
  std::vector<int> actorIds;
  std::vector<std::pair<int, int>> bestowed;  // (loc, owner)
  std::vector<int> transferable;
};

void collect_value(const Value& v, ValueRefs& out);

void collect_expr(const Expr& e, ValueRefs& out) {
  std::visit(
      [&](const auto& n) {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, AppE>) {
          collect_expr(n.fn, out);
          collect_expr(n.arg, out);
        } else if constexpr (std::is_same_v<T, SendE>) {
          collect_expr(n.target, out);
          collect_value(n.msg, out);
        } else if constexpr (std::is_same_v<T, MutateE>) {
          collect_expr(n.target, out);
        } else if constexpr (std::is_same_v<T, BestowE>) {
          collect_expr(n.inner, out);
        } else if constexpr (std::is_same_v<T, AtomicE>) {
          collect_expr(n.target, out);
        } else if constexpr (std::is_same_v<T, ReleaseE>) {
          collect_expr(n.target, out);
        } else if constexpr (std::is_same_v<T, ValE>) {
          collect_value(n.v, out);
        }
      },
      e->node);
}

void collect_value(const Value& v, ValueRefs& out) {
  std::visit(
      [&](const auto& a) {
        using T = std::decay_t<decltype(a)>;
        if constexpr (std::is_same_v<T, Lambda>) {
          collect_expr(a.body, out);
        } else if constexpr (std::is_same_v<T, ActorIdV>) {
          out.actorIds.push_back(a.id);
        } else if constexpr (std::is_same_v<T, LocV>) {
          out.locs.push_back(a.loc);
        } else if constexpr (std::is_same_v<T, BestowedLocV>) {
          out.bestowed.emplace_back(a.loc, a.owner);
        } else if constexpr (std::is_same_v<T, TransferableLocV>) {
          out.transferable.push_back(a.loc);
        }
      },
      v);
}

class WfChecker {
 public:
  WfChecker(const Config& cfg, Variant variant, const TypecheckOptions& opts)
      : cfg_(cfg), variant_(variant), opts_(opts) {}

  WfReport run() {
    check_heap();
    for (const auto& [id, a] : cfg_.actors) {
      check_actor(id, a);
      check_queue(id, a);
    }
    if (variant_ == Variant::Transfer) check_transfer_extras();
    if (variant_ == Variant::PrivateQueues) check_private_extras();
    check_variant_consistency();
    return std::move(report_);
  }

 private:
  std::string actor_name(int id) const { return "a" + std::to_string(id); }

  // wf-heap: local heaps of any two different actors are disjoint.
  void check_heap() {
    std::map<int, int> seen;  // location -> first owner
    for (const auto& [id, a] : cfg_.actors) {
      for (int loc : a.localHeap) {
        auto [it, fresh] = seen.emplace(loc, id);
        if (!fresh) {
          report_.add("wf-heap", "l" + std::to_string(loc),
                      "location is in the local heaps of both " +
                          actor_name(it->second) + " and " + actor_name(id));
        }
      }
    }
  }

  // Shared value restrictions for a current expression or a message body,
  // judged relative to the actor whose state holds the expression.
  void check_refs(const ValueRefs& refs, int id, const ActorState& a,
                  const std::string& rule, const std::string& what) {
    for (int loc : refs.locs) {
      if (!a.localHeap.count(loc)) {
        report_.add(rule, actor_name(id),
                    what + " references l" + std::to_string(loc) +
                        " outside its local heap");
      }
      if (variant_ == Variant::Transfer && cfg_.owners.count(loc) &&
          rule == "wf-queue-message") {
        report_.add("wf-queue-message-trans", actor_name(id),
                    what + " references l" + std::to_string(loc) +
                        " as passive, but it has transferable ownership");
      }
    }
    for (int aid : refs.actorIds) {
      if (!cfg_.actors.count(aid)) {
        report_.add(rule, actor_name(id),
                    what + " references missing actor a" +
                        std::to_string(aid));
      }
    }
    for (auto [loc, owner] : refs.bestowed) {
      auto it = cfg_.actors.find(owner);
      if (it == cfg_.actors.end() || !it->second.localHeap.count(loc)) {
        report_.add(rule, actor_name(id),
                    what + " holds bestowed l" + std::to_string(loc) + "@a" +
                        std::to_string(owner) +
                        " whose location is not in the bestower's heap");
      }
    }
    for (int loc : refs.transferable) {
      if (variant_ != Variant::Transfer) {
        report_.add(rule, actor_name(id),
                    what + " holds a transferable location outside the "
                           "transfer variant");
      } else if (!cfg_.owners.count(loc)) {
        report_.add(rule == "wf-queue-message" ? "wf-queue-message-trans"
                                               : "wf-actor-trans",
                    actor_name(id),
                    what + " holds transferable l" + std::to_string(loc) +
                        " with no entry in the owner map");
      }
    }
  }

  // wf-actor: this in local heap; current expression typable in the empty
  // env, with all embedded values resolvable in this configuration.
  void check_actor(int id, const ActorState& a) {
    if (!a.localHeap.count(a.thisLoc)) {
      report_.add("wf-actor", actor_name(id),
                  "this=l" + std::to_string(a.thisLoc) +
                      " is not in the local heap");
    }
    auto tc = typecheck(TypeEnv{}, a.current, variant_, opts_);
    if (const auto* err = std::get_if<TypeError>(&tc)) {
      report_.add("wf-actor", actor_name(id),
                  "current expression does not typecheck: " + err->str());
    }
    ValueRefs refs;
    collect_expr(a.current, refs);
    check_refs(refs, id, a, "wf-actor", "current expression");
  }

  // wf-queue: every lambda message takes a passive argument and obeys the
  // same value restrictions as a current expression.
  void check_queue(int id, const ActorState& a) {
    int idx = 0;
    for (const auto& m : a.publicQueue) {
      check_message(m, id, a, "public queue message #" + std::to_string(idx));
      idx++;
    }
  }

  void check_message(const Message& m, int ownerId, const ActorState& owner,
                     const std::string& what) {
    switch (m.kind) {
      case Message::Kind::Fn: {
        const auto* lam = std::get_if<Lambda>(&m.payload);
        if (!lam) {
          report_.add("wf-queue-message", actor_name(ownerId),
                      what + " is not an anonymous function");
          return;
        }
        if (lam->paramType != Type::passive()) {
          report_.add("wf-queue-message", actor_name(ownerId),
                      what + " does not take a passive argument");
        }
        auto tc = typecheck(TypeEnv{}, make_val(m.payload), variant_, opts_);
        if (const auto* err = std::get_if<TypeError>(&tc)) {
          report_.add("wf-queue-message", actor_name(ownerId),
                      what + " does not typecheck: " + err->str());
        }
        ValueRefs refs;
        collect_value(m.payload, refs);
        check_refs(refs, ownerId, owner, "wf-queue-message", what);
        break;
      }
      case Message::Kind::AtReq: {
        // wf-queue-atomic: the request must reference a waiting queue.
        if (!cfg_.queues.count(m.queueId)) {
          report_.add("wf-queue-atomic", actor_name(ownerId),
                      what + " requests missing queue q" +
                          std::to_string(m.queueId));
        }
        break;
      }
      case Message::Kind::End:
        // wf-queue-end: End is always well-formed (in a private queue).
        break;
    }
  }

  // wf-owners / wf-actor-trans.
  void check_transfer_extras() {
    for (const auto& [loc, id] : cfg_.owners) {
      auto it = cfg_.actors.find(id);
      if (it == cfg_.actors.end()) {
        report_.add("wf-owners", "l" + std::to_string(loc),
                    "owner a" + std::to_string(id) + " does not exist");
      } else if (!it->second.localHeap.count(loc)) {
        report_.add("wf-owners", "l" + std::to_string(loc),
                    "owner a" + std::to_string(id) +
                        " does not have the location in its local heap");
      }
    }
    for (const auto& [id, a] : cfg_.actors) {
      if (cfg_.owners.count(a.thisLoc)) {
        report_.add("wf-actor-trans", actor_name(id),
                    "this of an actor must not be transferable");
      }
    }
  }

  // wf-queue-map / wf-heap-priv / wf-actor-priv.
  void check_private_extras() {
    for (const auto& [qid, pq] : cfg_.queues) {
      auto ownerIt = cfg_.actors.find(pq.owner);
      if (ownerIt == cfg_.actors.end()) {
        report_.add("wf-queue-map", "q" + std::to_string(qid),
                    "queue owner a" + std::to_string(pq.owner) +
                        " does not exist");
        continue;
      }
      bool sawEnd = false;
      int idx = 0;
      for (const auto& m : pq.items) {
        if (m.kind == Message::Kind::AtReq) {
          report_.add("wf-queue-map", "q" + std::to_string(qid),
                      "private queue contains a conversation request");
        } else {
          check_message(m, pq.owner, ownerIt->second,
                        "private queue q" + std::to_string(qid) +
                            " message #" + std::to_string(idx));
        }
        if (m.kind == Message::Kind::End) sawEnd = true;
        idx++;
      }
      if (sawEnd) {
        for (const auto& [aid, a] : cfg_.actors) {
          for (const auto& [partner, q] : a.conversations) {
            if (q == qid) {
              report_.add("wf-queue-map", "q" + std::to_string(qid),
                          "queue holds End but a" + std::to_string(aid) +
                              " still converses through it");
            }
          }
        }
      }
    }
    // wf-heap-priv: conversation ranges pairwise disjoint.
    std::map<int, int> queueUsers;  // queue id -> conversing actor
    for (const auto& [aid, a] : cfg_.actors) {
      for (const auto& [partner, q] : a.conversations) {
        auto [it, fresh] = queueUsers.emplace(q, aid);
        if (!fresh) {
          report_.add("wf-heap-priv", "q" + std::to_string(q),
                      "both a" + std::to_string(it->second) + " and a" +
                          std::to_string(aid) +
                          " hold a conversation through the same queue");
        }
      }
    }
    for (const auto& [aid, a] : cfg_.actors) {
      // wf-actor-priv: conversations resolve to queues owned by the partner.
      for (const auto& [partner, q] : a.conversations) {
        auto it = cfg_.queues.find(q);
        if (it == cfg_.queues.end()) {
          report_.add("wf-actor-priv", actor_name(aid),
                      "conversation with a" + std::to_string(partner) +
                          " has no queue q" + std::to_string(q));
        } else if (it->second.owner != partner) {
          report_.add("wf-actor-priv", actor_name(aid),
                      "conversation queue q" + std::to_string(q) +
                          " is not owned by partner a" +
                          std::to_string(partner));
        }
      }
      // public queues never hold End; atomic requests use distinct queues
      std::set<int> reqs;
      for (const auto& m : a.publicQueue) {
        if (m.kind == Message::Kind::End) {
          report_.add("wf-actor-priv", actor_name(aid),
                      "public queue contains an End message");
        }
        if (m.kind == Message::Kind::AtReq && !reqs.insert(m.queueId).second) {
          report_.add("wf-actor-priv", actor_name(aid),
                      "public queue holds duplicate requests for q" +
                          std::to_string(m.queueId));
        }
      }
    }
  }

  // Variant gating on machine state: owner/queue/conversation maps only
  // exist in their variants.
  void check_variant_consistency() {
    if (variant_ != Variant::Transfer && !cfg_.owners.empty()) {
      report_.add("wf-variant", "owners",
                  "owner map in a non-transfer variant");
    }
    if (variant_ != Variant::PrivateQueues) {
      if (!cfg_.queues.empty()) {
        report_.add("wf-variant", "queues",
                    "private queue map outside the private-queue variant");
      }
      for (const auto& [aid, a] : cfg_.actors) {
        if (!a.conversations.empty()) {
          report_.add("wf-variant", actor_name(aid),
                      "conversations outside the private-queue variant");
        }
        for (const auto& m : a.publicQueue) {
          if (m.kind != Message::Kind::Fn) {
            report_.add("wf-variant", actor_name(aid),
                        "control message outside the private-queue variant");
          }
        }
      }
    }
  }

  const Config& cfg_;
  Variant variant_;
  TypecheckOptions opts_;
  WfReport report_;
};

}  // namespace

WfReport check_wf_core(const Config& cfg, const TypecheckOptions& opts) {
  return WfChecker(cfg, Variant::Core, opts).run();
}

WfReport check_wf_transfer(const Config& cfg, const TypecheckOptions& opts) {
  return WfChecker(cfg, Variant::Transfer, opts).run();
}

WfReport check_wf_private(const Config& cfg, const TypecheckOptions& opts) {
  return WfChecker(cfg, Variant::PrivateQueues, opts).run();
}

WfReport check_wf(const Config& cfg, Variant variant,
                  const TypecheckOptions& opts) {
  return WfChecker(cfg, variant, opts).run();
}

}  // namespace bst::calc
