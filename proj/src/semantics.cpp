#include "bestow/semantics.hpp"

#include <algorithm>
#include <sstream>

namespace bst::calc {

Config initial_config(Expr program) {
  Config cfg;
  ActorState main;
  main.thisLoc = 0;
  main.localHeap = {0};
  main.current = std::move(program);
  cfg.actors.emplace(0, std::move(main));
  cfg.nextActor = 1;
  cfg.nextLoc = 1;
  cfg.nextQueue = 0;
  return cfg;
}

namespace {

bool message_equal(const Message& a, const Message& b) {
  return a.kind == b.kind && a.queueId == b.queueId && a.sender == b.sender &&
         a.convId == b.convId && value_equal(a.payload, b.payload);
}

}  // namespace

bool config_equal(const Config& a, const Config& b) {
  if (a.nextActor != b.nextActor || a.nextLoc != b.nextLoc ||
      a.nextQueue != b.nextQueue)
    return false;
  if (a.owners != b.owners) return false;
  if (a.actors.size() != b.actors.size() || a.queues.size() != b.queues.size())
    return false;
  for (auto ita = a.actors.begin(), itb = b.actors.begin();
       ita != a.actors.end(); ++ita, ++itb) {
    if (ita->first != itb->first) return false;
    const ActorState& x = ita->second;
    const ActorState& y = itb->second;
    if (x.thisLoc != y.thisLoc || x.localHeap != y.localHeap ||
        x.conversations != y.conversations)
      return false;
    if (x.publicQueue.size() != y.publicQueue.size()) return false;
    for (size_t i = 0; i < x.publicQueue.size(); i++) {
      if (!message_equal(x.publicQueue[i], y.publicQueue[i])) return false;
    }
    if (!expr_equal(x.current, y.current)) return false;
  }
  for (auto ita = a.queues.begin(), itb = b.queues.begin();
       ita != a.queues.end(); ++ita, ++itb) {
    if (ita->first != itb->first) return false;
    const PrivateQueueState& x = ita->second;
    const PrivateQueueState& y = itb->second;
    if (x.owner != y.owner || x.initiator != y.initiator ||
        x.items.size() != y.items.size())
      return false;
    for (size_t i = 0; i < x.items.size(); i++) {
      if (!message_equal(x.items[i], y.items[i])) return false;
    }
  }
  return true;
}

std::string label_str(const TransitionLabel& l) {
  std::ostringstream os;
  std::visit(
      [&](const auto& x) {
        using T = std::decay_t<decltype(x)>;
        if constexpr (std::is_same_v<T, RunExprL>) {
          os << "RunExpr(a" << x.actor << ")";
        } else if constexpr (std::is_same_v<T, PopPublicL>) {
          os << "PopPublic(a" << x.actor << ")";
        } else if constexpr (std::is_same_v<T, PopPrivateL>) {
          os << "PopPrivate(a" << x.actor << ")";
        } else if constexpr (std::is_same_v<T, EndPrivateL>) {
          os << "EndPrivate(a" << x.actor << ")";
        } else {
          static_assert(std::is_same_v<T, TransferL>);
          os << "Transfer(l" << x.loc << ",a" << x.to << ")";
        }
      },
      l);
  return os.str();
}

std::optional<TransitionLabel> label_from_string(std::string_view s) {
  auto parse_int = [](std::string_view t) -> std::optional<int> {
    if (t.empty()) return std::nullopt;
    int v = 0;
    for (char c : t) {
      if (c < '0' || c > '9') return std::nullopt;
      v = v * 10 + (c - '0');
    }
    return v;
  };
  auto inner = [&](std::string_view name) -> std::optional<std::string_view> {
    if (s.substr(0, name.size()) != name) return std::nullopt;
    std::string_view rest = s.substr(name.size());
    if (rest.size() < 2 || rest.front() != '(' || rest.back() != ')')
      return std::nullopt;
    return rest.substr(1, rest.size() - 2);
  };
  if (auto in = inner("RunExpr")) {
    if (in->size() > 1 && (*in)[0] == 'a') {
      if (auto v = parse_int(in->substr(1))) return RunExprL{*v};
    }
  } else if (auto in2 = inner("PopPublic")) {
    if (in2->size() > 1 && (*in2)[0] == 'a') {
      if (auto v = parse_int(in2->substr(1))) return PopPublicL{*v};
    }
  } else if (auto in3 = inner("PopPrivate")) {
    if (in3->size() > 1 && (*in3)[0] == 'a') {
      if (auto v = parse_int(in3->substr(1))) return PopPrivateL{*v};
    }
  } else if (auto in4 = inner("EndPrivate")) {
    if (in4->size() > 1 && (*in4)[0] == 'a') {
      if (auto v = parse_int(in4->substr(1))) return EndPrivateL{*v};
    }
  } else if (auto in5 = inner("Transfer")) {
    size_t comma = in5->find(',');
    if (comma != std::string_view::npos) {
      std::string_view lpart = in5->substr(0, comma);
      std::string_view apart = in5->substr(comma + 1);
      if (lpart.size() > 1 && lpart[0] == 'l' && apart.size() > 1 &&
          apart[0] == 'a') {
        auto lv = parse_int(lpart.substr(1));
        auto av = parse_int(apart.substr(1));
        if (lv && av) return TransferL{*lv, *av};
      }
    }
  }
  return std::nullopt;
}

bool label_equal(const TransitionLabel& a, const TransitionLabel& b) {
  return label_str(a) == label_str(b);
}

std::string to_string(Mutant m) {
  switch (m) {
    case Mutant::None:
      return "none";
    case Mutant::DropPassiveLeakPremise:
      return "drop-passive-leak-premise";
    case Mutant::MisdeliverBestowedSend:
      return "misdeliver-bestowed-send";
    case Mutant::TransferWhileRunning:
      return "transfer-while-running";
    case Mutant::PrivateSendToPublic:
      return "private-send-to-public";
    case Mutant::EndToPublic:
      return "end-to-public";
  }
  return "?";
}

// ---------------------------------------------------------------------------
// Decomposition and substitution
// ---------------------------------------------------------------------------

namespace {

// A value form embedded in expression position.
const Value* expr_as_value(const Expr& e) {
  if (const auto* v = std::get_if<ValE>(&e->node)) return &v->v;
  return nullptr;
}

// Is the candidate at the hole an actual redex?
bool fireable(const Expr& e, std::string* why) {
  return std::visit(
      [&](const auto& n) -> bool {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, AppE>) {
          const Value* f = expr_as_value(n.fn);
          if (!std::holds_alternative<Lambda>(*f)) {
            *why = "application of a non-function value";
            return false;
          }
          return true;
        } else if constexpr (std::is_same_v<T, SendE>) {
          const Value* t = expr_as_value(n.target);
          if (std::holds_alternative<ActorIdV>(*t) ||
              std::holds_alternative<BestowedLocV>(*t) ||
              std::holds_alternative<TransferableLocV>(*t)) {
            return true;
          }
          *why = "send to a non-active value";
          return false;
        } else if constexpr (std::is_same_v<T, MutateE>) {
          if (!std::holds_alternative<LocV>(*expr_as_value(n.target))) {
            *why = "mutate of a non-location value";
            return false;
          }
          return true;
        } else if constexpr (std::is_same_v<T, NewE>) {
          return true;
        } else if constexpr (std::is_same_v<T, BestowE>) {
          if (!std::holds_alternative<LocV>(*expr_as_value(n.inner))) {
            *why = "bestow of a non-location value";
            return false;
          }
          return true;
        } else if constexpr (std::is_same_v<T, AtomicE> ||
                             std::is_same_v<T, ReleaseE>) {
          const Value* t = expr_as_value(n.target);
          if (std::holds_alternative<ActorIdV>(*t) ||
              std::holds_alternative<BestowedLocV>(*t)) {
            return true;
          }
          *why = "atomic/release on a non-conversable value";
          return false;
        } else {
          *why = "not a redex";
          return false;
        }
      },
      e->node);
}

// Finds the innermost-leftmost candidate per the context grammar. Returns
// false with *stuckWhy set when an open variable or invalid candidate blocks.
bool find_redex(const Expr& e, std::vector<Frame>& path, Expr& redex,
                std::string* stuckWhy) {
  if (expr_as_value(e)) {
    *stuckWhy = "";  // a value: handled by the caller
    return false;
  }
  return std::visit(
      [&](const auto& n) -> bool {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, VarE>) {
          *stuckWhy = "free variable '" + n.name + "'";
          return false;
        } else if constexpr (std::is_same_v<T, AppE>) {
          if (!expr_as_value(n.fn)) {
            path.push_back(Frame::AppFun);
            return find_redex(n.fn, path, redex, stuckWhy);
          }
          if (!expr_as_value(n.arg)) {
            path.push_back(Frame::AppArg);
            return find_redex(n.arg, path, redex, stuckWhy);
          }
        } else if constexpr (std::is_same_v<T, SendE>) {
          if (!expr_as_value(n.target)) {
            path.push_back(Frame::SendTarget);
            return find_redex(n.target, path, redex, stuckWhy);
          }
        } else if constexpr (std::is_same_v<T, MutateE>) {
          if (!expr_as_value(n.target)) {
            path.push_back(Frame::MutateTarget);
            return find_redex(n.target, path, redex, stuckWhy);
          }
        } else if constexpr (std::is_same_v<T, BestowE>) {
          if (!expr_as_value(n.inner)) {
            path.push_back(Frame::BestowInner);
            return find_redex(n.inner, path, redex, stuckWhy);
          }
        } else if constexpr (std::is_same_v<T, AtomicE>) {
          if (!expr_as_value(n.target)) {
            path.push_back(Frame::AtomicTarget);
            return find_redex(n.target, path, redex, stuckWhy);
          }
        } else if constexpr (std::is_same_v<T, ReleaseE>) {
          if (!expr_as_value(n.target)) {
            path.push_back(Frame::ReleaseTarget);
            return find_redex(n.target, path, redex, stuckWhy);
          }
        }
        // All immediate subterms are values: e itself is the candidate.
        std::string why;
        if (!fireable(e, &why)) {
          *stuckWhy = why;
          return false;
        }
        redex = e;
        return true;
      },
      e->node);
}

}  // namespace

DecomposeResult decompose(const Expr& e) {
  if (const Value* v = expr_as_value(e)) return AlreadyValue{*v};
  std::vector<Frame> path;
  Expr redex;
  std::string why;
  if (find_redex(e, path, redex, &why)) {
    return Decomposition{std::move(path), std::move(redex)};
  }
  return StuckExpr{why.empty() ? "no redex" : why};
}

Expr plug(const Expr& whole, const std::vector<Frame>& path,
          Expr replacement) {
  if (path.empty()) return replacement;
  Frame f = path.front();
  std::vector<Frame> rest(path.begin() + 1, path.end());
  const SourcePos pos = whole->pos;
  switch (f) {
    case Frame::AppFun: {
      const auto& n = std::get<AppE>(whole->node);
      return make_app(plug(n.fn, rest, std::move(replacement)), n.arg, pos);
    }
    case Frame::AppArg: {
      const auto& n = std::get<AppE>(whole->node);
      return make_app(n.fn, plug(n.arg, rest, std::move(replacement)), pos);
    }
    case Frame::SendTarget: {
      const auto& n = std::get<SendE>(whole->node);
      return make_send(plug(n.target, rest, std::move(replacement)), n.msg,
                       pos);
    }
    case Frame::MutateTarget: {
      const auto& n = std::get<MutateE>(whole->node);
      return make_mutate(plug(n.target, rest, std::move(replacement)), pos);
    }
    case Frame::BestowInner: {
      const auto& n = std::get<BestowE>(whole->node);
      return make_bestow(plug(n.inner, rest, std::move(replacement)), pos);
    }
    case Frame::AtomicTarget: {
      const auto& n = std::get<AtomicE>(whole->node);
      return make_atomic(plug(n.target, rest, std::move(replacement)), pos);
    }
    case Frame::ReleaseTarget: {
      const auto& n = std::get<ReleaseE>(whole->node);
      return make_release(plug(n.target, rest, std::move(replacement)), pos);
    }
  }
  throw IllegalLabel("bad frame");
}

namespace {

Value substitute_value(const Value& in, const std::string& param,
                       const Value& v);

Expr substitute_expr(const Expr& e, const std::string& param, const Value& v) {
  return std::visit(
      [&](const auto& n) -> Expr {
        using T = std::decay_t<decltype(n)>;
        const SourcePos pos = e->pos;
        if constexpr (std::is_same_v<T, VarE>) {
          if (n.name == param) return make_val(v, pos);
          return e;
        } else if constexpr (std::is_same_v<T, AppE>) {
          return make_app(substitute_expr(n.fn, param, v),
                          substitute_expr(n.arg, param, v), pos);
        } else if constexpr (std::is_same_v<T, SendE>) {
          return make_send(substitute_expr(n.target, param, v),
                           substitute_value(n.msg, param, v), pos);
        } else if constexpr (std::is_same_v<T, MutateE>) {
          return make_mutate(substitute_expr(n.target, param, v), pos);
        } else if constexpr (std::is_same_v<T, NewE>) {
          return e;
        } else if constexpr (std::is_same_v<T, BestowE>) {
          return make_bestow(substitute_expr(n.inner, param, v), pos);
        } else if constexpr (std::is_same_v<T, AtomicE>) {
          return make_atomic(substitute_expr(n.target, param, v), pos);
        } else if constexpr (std::is_same_v<T, ReleaseE>) {
          return make_release(substitute_expr(n.target, param, v), pos);
        } else {
          static_assert(std::is_same_v<T, ValE>);
          return make_val(substitute_value(n.v, param, v), pos);
        }
      },
      e->node);
}

Value substitute_value(const Value& in, const std::string& param,
                       const Value& v) {
  if (const auto* lam = std::get_if<Lambda>(&in)) {
    if (lam->param == param) return in;  // shadowed
    return Lambda{lam->param, lam->paramType,
                  substitute_expr(lam->body, param, v)};
  }
  return in;
}

}  // namespace

Expr substitute(const Expr& body, const std::string& param, const Value& v) {
  return substitute_expr(body, param, v);
}

// ---------------------------------------------------------------------------
// enabled / apply
// ---------------------------------------------------------------------------

namespace {

bool current_is_value(const ActorState& a) {
  return as_value(a.current) != nullptr;
}

bool has_redex(const ActorState& a) {
  return std::holds_alternative<Decomposition>(decompose(a.current));
}

}  // namespace

std::vector<TransitionLabel> enabled(const Config& cfg, Variant variant,
                                     Mutant mutant) {
  std::vector<TransitionLabel> out;
  for (const auto& [id, a] : cfg.actors) {
    if (has_redex(a)) out.push_back(RunExprL{id});
    if (!current_is_value(a) || a.publicQueue.empty()) continue;
    const Message& head = a.publicQueue.front();
    if (head.kind == Message::Kind::Fn) {
      out.push_back(PopPublicL{id});
    } else if (head.kind == Message::Kind::AtReq) {
      auto it = cfg.queues.find(head.queueId);
      if (it != cfg.queues.end() && !it->second.items.empty()) {
        if (it->second.items.front().kind == Message::Kind::Fn) {
          out.push_back(PopPrivateL{id});
        } else if (it->second.items.front().kind == Message::Kind::End) {
          out.push_back(EndPrivateL{id});
        }
      }
    }
    // An End at the head of a public queue only arises under the EndToPublic
    // mutant; no rule consumes it, which the well-formedness oracle reports.
  }
  if (variant == Variant::Transfer) {
    for (const auto& [loc, from] : cfg.owners) {
      auto it = cfg.actors.find(from);
      if (it == cfg.actors.end()) continue;
      bool ownerIdle = current_is_value(it->second);
      if (!ownerIdle && mutant != Mutant::TransferWhileRunning) continue;
      for (const auto& [to, _] : cfg.actors) {
        if (to != from) out.push_back(TransferL{loc, to});
      }
    }
  }
  return out;
}

namespace {

[[noreturn]] void illegal(const std::string& what) {
  throw IllegalLabel("illegal label application: " + what);
}

ActorState& actor_of(Config& cfg, int id, const char* ctx) {
  auto it = cfg.actors.find(id);
  if (it == cfg.actors.end()) illegal(std::string(ctx) + ": no actor");
  return it->second;
}

// Delivers a lambda message from `sender` to actor `to`, honoring a private
// conversation when the PrivateQueues variant has one open.
void deliver(Config& cfg, Variant variant, Mutant mutant, int sender, int to,
             Value msg) {
  Message m;
  m.kind = Message::Kind::Fn;
  m.payload = std::move(msg);
  m.sender = sender;
  if (variant == Variant::PrivateQueues) {
    const ActorState& s = actor_of(cfg, sender, "deliver");
    auto conv = s.conversations.find(to);
    if (conv != s.conversations.end()) {
      m.convId = conv->second;
      if (mutant == Mutant::PrivateSendToPublic) {
        actor_of(cfg, to, "deliver").publicQueue.push_back(std::move(m));
        return;
      }
      auto q = cfg.queues.find(conv->second);
      if (q == cfg.queues.end()) illegal("conversation without queue");
      q->second.items.push_back(std::move(m));
      return;
    }
  }
  actor_of(cfg, to, "deliver").publicQueue.push_back(std::move(m));
}

// One expression step of actor `id` (eval-actor-run and the per-redex rules).
void run_expr(Config& cfg, int id, Variant variant, Mutant mutant) {
  ActorState& self = actor_of(cfg, id, "RunExpr");
  auto dec = decompose(self.current);
  auto* d = std::get_if<Decomposition>(&dec);
  if (!d) illegal("RunExpr on actor without redex");

  const Expr& r = d->redex;
  Expr result;

  if (const auto* app = std::get_if<AppE>(&r->node)) {
    const auto& lam = std::get<Lambda>(std::get<ValE>(app->fn->node).v);
    const Value& arg = std::get<ValE>(app->arg->node).v;
    result = substitute(lam.body, lam.param, arg);
  } else if (std::get_if<MutateE>(&r->node)) {
    // Mutation is a no-op in the formalism; races on it are what the
    // explorer's DRF oracle looks for.
    result = make_val(UnitV{});
  } else if (const auto* nw = std::get_if<NewE>(&r->node)) {
    switch (nw->type.kind()) {
      case Type::Kind::Passive: {
        int loc = cfg.nextLoc++;
        self.localHeap.insert(loc);
        result = make_val(LocV{loc});
        break;
      }
      case Type::Kind::Actor: {
        int aid = cfg.nextActor++;
        int loc = cfg.nextLoc++;
        ActorState fresh;
        fresh.thisLoc = loc;
        fresh.localHeap = {loc};
        fresh.current = make_val(UnitV{});
        cfg.actors.emplace(aid, std::move(fresh));
        result = make_val(ActorIdV{aid});
        break;
      }
      case Type::Kind::Transferable: {
        if (variant != Variant::Transfer) illegal("new T(p) outside transfer");
        int loc = cfg.nextLoc++;
        // re-fetch: the actor map may have rehashed aliases above
        ActorState& me = actor_of(cfg, id, "RunExpr");
        me.localHeap.insert(loc);
        cfg.owners[loc] = id;
        result = make_val(TransferableLocV{loc});
        break;
      }
      default:
        illegal("new of unallocatable type");
    }
  } else if (const auto* bst = std::get_if<BestowE>(&r->node)) {
    const Value& v = std::get<ValE>(bst->inner->node).v;
    result = make_val(BestowedLocV{std::get<LocV>(v).loc, id});
  } else if (const auto* snd = std::get_if<SendE>(&r->node)) {
    const Value& target = std::get<ValE>(snd->target->node).v;
    if (const auto* aid = std::get_if<ActorIdV>(&target)) {
      deliver(cfg, variant, mutant, id, aid->id, snd->msg);
      result = make_val(UnitV{});
    } else if (const auto* b = std::get_if<BestowedLocV>(&target)) {
      // Wrap: the owner applies the original lambda to the passive object.
      Expr wrapBody = make_app(make_val(snd->msg), make_val(LocV{b->loc}));
      Value wrapper = Lambda{"y", Type::passive(), std::move(wrapBody)};
      int dest = b->owner;
      if (mutant == Mutant::MisdeliverBestowedSend && id != b->owner) {
        dest = id;
      }
      deliver(cfg, variant, mutant, id, dest, std::move(wrapper));
      result = make_val(UnitV{});
    } else if (const auto* t = std::get_if<TransferableLocV>(&target)) {
      auto own = cfg.owners.find(t->loc);
      if (own == cfg.owners.end()) illegal("transferable without owner");
      if (own->second == id) {
        // eval-send-trans-run: run the message synchronously in place
        result = make_app(make_val(snd->msg), make_val(LocV{t->loc}));
      } else {
        // eval-send-trans-delegate: re-perform the original send at the
        // owner so it can be delegated again if ownership moved
        Expr again = make_send(make_val(*t), snd->msg);
        Value wrapper = Lambda{"y", Type::passive(), std::move(again)};
        deliver(cfg, variant, mutant, id, own->second, std::move(wrapper));
        result = make_val(UnitV{});
      }
    } else {
      illegal("send to non-active value");
    }
  } else if (const auto* at = std::get_if<AtomicE>(&r->node)) {
    const Value& target = std::get<ValE>(at->target->node).v;
    int partner = -1;
    if (const auto* aid = std::get_if<ActorIdV>(&target)) partner = aid->id;
    else if (const auto* b = std::get_if<BestowedLocV>(&target))
      partner = b->owner;
    else
      illegal("atomic on non-conversable value");
    ActorState& me = actor_of(cfg, id, "RunExpr");
    if (me.conversations.count(partner)) {
      result = make_val(UnitV{});  // eval-atomic-*-fail: no-op
    } else {
      int q = cfg.nextQueue++;
      me.conversations[partner] = q;
      PrivateQueueState pq;
      pq.owner = partner;
      pq.initiator = id;
      cfg.queues.emplace(q, std::move(pq));
      Message req;
      req.kind = Message::Kind::AtReq;
      req.queueId = q;
      req.sender = id;
      actor_of(cfg, partner, "RunExpr").publicQueue.push_back(std::move(req));
      result = make_val(UnitV{});
    }
  } else if (const auto* rel = std::get_if<ReleaseE>(&r->node)) {
    const Value& target = std::get<ValE>(rel->target->node).v;
    int partner = -1;
    if (const auto* aid = std::get_if<ActorIdV>(&target)) partner = aid->id;
    else if (const auto* b = std::get_if<BestowedLocV>(&target))
      partner = b->owner;
    else
      illegal("release on non-conversable value");
    ActorState& me = actor_of(cfg, id, "RunExpr");
    auto conv = me.conversations.find(partner);
    if (conv == me.conversations.end()) {
      result = make_val(UnitV{});  // eval-release-*-fail: no-op
    } else {
      int q = conv->second;
      Message end;
      end.kind = Message::Kind::End;
      end.sender = id;
      end.convId = q;
      if (mutant == Mutant::EndToPublic) {
        actor_of(cfg, partner, "RunExpr").publicQueue.push_back(std::move(end));
      } else {
        auto qit = cfg.queues.find(q);
        if (qit == cfg.queues.end()) illegal("release without queue");
        qit->second.items.push_back(std::move(end));
      }
      me.conversations.erase(partner);
      result = make_val(UnitV{});
    }
  } else {
    illegal("unknown redex");
  }

  ActorState& me = actor_of(cfg, id, "RunExpr");
  me.current = plug(me.current, d->path, std::move(result));
}

}  // namespace

Config apply(const Config& cfg, const TransitionLabel& label, Variant variant,
             Mutant mutant) {
  Config out = cfg;
  std::visit(
      [&](const auto& l) {
        using T = std::decay_t<decltype(l)>;
        if constexpr (std::is_same_v<T, RunExprL>) {
          run_expr(out, l.actor, variant, mutant);
        } else if constexpr (std::is_same_v<T, PopPublicL>) {
          ActorState& a = actor_of(out, l.actor, "PopPublic");
          if (!current_is_value(a) || a.publicQueue.empty() ||
              a.publicQueue.front().kind != Message::Kind::Fn) {
            illegal("PopPublic precondition");
          }
          Message m = std::move(a.publicQueue.front());
          a.publicQueue.pop_front();
          a.current =
              make_app(make_val(std::move(m.payload)),
                       make_val(LocV{a.thisLoc}));
        } else if constexpr (std::is_same_v<T, PopPrivateL>) {
          ActorState& a = actor_of(out, l.actor, "PopPrivate");
          if (!current_is_value(a) || a.publicQueue.empty() ||
              a.publicQueue.front().kind != Message::Kind::AtReq) {
            illegal("PopPrivate precondition");
          }
          auto q = out.queues.find(a.publicQueue.front().queueId);
          if (q == out.queues.end() || q->second.items.empty() ||
              q->second.items.front().kind != Message::Kind::Fn) {
            illegal("PopPrivate: no runnable private message");
          }
          Message m = std::move(q->second.items.front());
          q->second.items.pop_front();
          // the public queue (and its AtReq head) stays intact
          a.current =
              make_app(make_val(std::move(m.payload)),
                       make_val(LocV{a.thisLoc}));
        } else if constexpr (std::is_same_v<T, EndPrivateL>) {
          ActorState& a = actor_of(out, l.actor, "EndPrivate");
          if (!current_is_value(a) || a.publicQueue.empty() ||
              a.publicQueue.front().kind != Message::Kind::AtReq) {
            illegal("EndPrivate precondition");
          }
          int qid = a.publicQueue.front().queueId;
          auto q = out.queues.find(qid);
          if (q == out.queues.end() || q->second.items.empty() ||
              q->second.items.front().kind != Message::Kind::End) {
            illegal("EndPrivate: head of private queue is not End");
          }
          out.queues.erase(q);
          a.publicQueue.pop_front();
        } else {
          static_assert(std::is_same_v<T, TransferL>);
          if (variant != Variant::Transfer) illegal("Transfer outside variant");
          auto own = out.owners.find(l.loc);
          if (own == out.owners.end()) illegal("Transfer of unowned location");
          int from = own->second;
          if (from == l.to) illegal("Transfer to current owner");
          ActorState& src = actor_of(out, from, "Transfer");
          if (!current_is_value(src) && mutant != Mutant::TransferWhileRunning)
            illegal("Transfer while owner is running");
          ActorState& dst = actor_of(out, l.to, "Transfer");
          src.localHeap.erase(l.loc);
          dst.localHeap.insert(l.loc);
          own->second = l.to;
        }
      },
      label);
  return out;
}

std::string config_str(const Config& cfg) {
  std::ostringstream os;
  for (const auto& [id, a] : cfg.actors) {
    os << "a" << id << ": this=l" << a.thisLoc << " heap={";
    bool first = true;
    for (int l : a.localHeap) {
      if (!first) os << ",";
      os << "l" << l;
      first = false;
    }
    os << "} queue=[";
    first = true;
    for (const auto& m : a.publicQueue) {
      if (!first) os << ", ";
      first = false;
      switch (m.kind) {
        case Message::Kind::Fn:
          os << pretty(m.payload);
          break;
        case Message::Kind::AtReq:
          os << "At(q" << m.queueId << ")";
          break;
        case Message::Kind::End:
          os << "End";
          break;
      }
    }
    os << "]";
    if (!a.conversations.empty()) {
      os << " conv={";
      first = true;
      for (const auto& [p, q] : a.conversations) {
        if (!first) os << ",";
        os << "a" << p << "->q" << q;
        first = false;
      }
      os << "}";
    }
    os << "\n    e = " << pretty(a.current) << "\n";
  }
  if (!cfg.owners.empty()) {
    os << "owners: {";
    bool first = true;
    for (const auto& [l, a] : cfg.owners) {
      if (!first) os << ", ";
      os << "l" << l << "->a" << a;
      first = false;
    }
    os << "}\n";
  }
  for (const auto& [q, pq] : cfg.queues) {
    os << "q" << q << " (owner a" << pq.owner << "): [";
    bool first = true;
    for (const auto& m : pq.items) {
      if (!first) os << ", ";
      first = false;
      if (m.kind == Message::Kind::End) os << "End";
      else os << pretty(m.payload);
    }
    os << "]\n";
  }
  return os.str();
}

}  // namespace bst::calc
