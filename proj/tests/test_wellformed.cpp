#include "bestow/wellformed.hpp"
#include "doctest.h"

using namespace bst::calc;

namespace {

Expr parsed(const std::string& src, Variant v) {
  auto r = parse(src, v);
  auto* e = std::get_if<Expr>(&r);
  REQUIRE_MESSAGE(e != nullptr, "failed to parse: " << src);
  return *e;
}

bool has_rule(const WfReport& rep, const std::string& rule) {
  for (const auto& v : rep.violations) {
    if (v.rule == rule) return true;
  }
  return false;
}

Config two_actor_core() {
  Config cfg = initial_config(parsed("unit", Variant::Core));
  ActorState a1;
  a1.thisLoc = 1;
  a1.localHeap = {1};
  a1.current = make_val(UnitV{});
  cfg.actors.emplace(1, std::move(a1));
  cfg.nextActor = 2;
  cfg.nextLoc = 2;
  return cfg;
}

}  // namespace

TEST_CASE("a fresh initial config is well-formed") {
  Config cfg = initial_config(
      parsed("(new c) ! (fn (x : p) => x.mutate())", Variant::Core));
  CHECK(check_wf_core(cfg).ok);
}

TEST_CASE("overlapping local heaps violate wf-heap") {
  Config cfg = two_actor_core();
  cfg.actors.at(0).localHeap.insert(5);
  cfg.actors.at(1).localHeap.insert(5);
  auto rep = check_wf_core(cfg);
  CHECK(!rep.ok);
  CHECK(has_rule(rep, "wf-heap"));
}

TEST_CASE("foreign locations in the current expression violate wf-actor") {
  Config cfg = two_actor_core();
  cfg.actors.at(0).current = make_mutate(make_val(LocV{9}));
  auto rep = check_wf_core(cfg);
  CHECK(!rep.ok);
  CHECK(has_rule(rep, "wf-actor"));
}

TEST_CASE("this outside the heap and missing actors are reported") {
  Config cfg = two_actor_core();
  cfg.actors.at(1).localHeap.clear();
  cfg.actors.at(0).current =
      make_send(make_val(ActorIdV{7}),
                Lambda{"x", Type::passive(), make_val(UnitV{})});
  auto rep = check_wf_core(cfg);
  CHECK(!rep.ok);
  // both problems show up in one accumulated report
  CHECK(rep.violations.size() >= 2);
}

TEST_CASE("bestowed values must point into their owner's heap") {
  Config cfg = two_actor_core();
  cfg.actors.at(1).current = make_send(
      make_val(BestowedLocV{0, 0}),
      Lambda{"x", Type::passive(), make_val(UnitV{})});
  CHECK(check_wf_core(cfg).ok);

  cfg.actors.at(1).current = make_send(
      make_val(BestowedLocV{42, 0}),
      Lambda{"x", Type::passive(), make_val(UnitV{})});
  auto rep = check_wf_core(cfg);
  CHECK(!rep.ok);
  CHECK(has_rule(rep, "wf-actor"));
}

TEST_CASE("queue messages must be lambdas over local values") {
  Config cfg = two_actor_core();
  Message m;
  m.kind = Message::Kind::Fn;
  m.payload = UnitV{};  // not a lambda
  cfg.actors.at(0).publicQueue.push_back(m);
  auto rep = check_wf_core(cfg);
  CHECK(has_rule(rep, "wf-queue-message"));

  // a message mentioning a location of another actor
  Config cfg2 = two_actor_core();
  Message m2;
  m2.kind = Message::Kind::Fn;
  m2.payload = Lambda{"x", Type::passive(), make_mutate(make_val(LocV{1}))};
  cfg2.actors.at(0).publicQueue.push_back(m2);
  auto rep2 = check_wf_core(cfg2);
  CHECK(has_rule(rep2, "wf-queue-message"));
}

// --- transfer variant -------------------------------------------------------

TEST_CASE("wf-owners ties the owner map to local heaps") {
  Config cfg = two_actor_core();
  cfg.actors.at(0).localHeap.insert(2);
  cfg.owners[2] = 0;
  cfg.nextLoc = 3;
  CHECK(check_wf_transfer(cfg).ok);

  cfg.owners[2] = 1;  // owner does not hold the location
  auto rep = check_wf_transfer(cfg);
  CHECK(has_rule(rep, "wf-owners"));
}

TEST_CASE("the this of an actor is never transferable") {
  Config cfg = two_actor_core();
  cfg.owners[0] = 0;  // l0 is a0's this
  auto rep = check_wf_transfer(cfg);
  CHECK(has_rule(rep, "wf-actor-trans"));
}

TEST_CASE("transferable values need an owner entry") {
  Config cfg = two_actor_core();
  cfg.actors.at(0).current =
      make_send(make_val(TransferableLocV{9}),
                Lambda{"x", Type::passive(), make_val(UnitV{})});
  auto rep = check_wf_transfer(cfg);
  CHECK(has_rule(rep, "wf-actor-trans"));

  // same for queued messages
  Config cfg2 = two_actor_core();
  Message m;
  m.kind = Message::Kind::Fn;
  m.payload = Lambda{
      "y", Type::passive(),
      make_send(make_val(TransferableLocV{9}),
                Lambda{"x", Type::passive(), make_val(UnitV{})})};
  cfg2.actors.at(0).publicQueue.push_back(m);
  auto rep2 = check_wf_transfer(cfg2);
  CHECK(has_rule(rep2, "wf-queue-message-trans"));
}

TEST_CASE("queued message locations may not have transferable ownership") {
  Config cfg = two_actor_core();
  cfg.actors.at(0).localHeap.insert(2);
  cfg.owners[2] = 0;
  cfg.nextLoc = 3;
  Message m;
  m.kind = Message::Kind::Fn;
  m.payload = Lambda{"y", Type::passive(), make_mutate(make_val(LocV{2}))};
  cfg.actors.at(0).publicQueue.push_back(m);
  auto rep = check_wf_transfer(cfg);
  CHECK(has_rule(rep, "wf-queue-message-trans"));
}

// --- private-queue variant --------------------------------------------------

namespace {

Config conversation_config() {
  Config cfg = two_actor_core();
  cfg.actors.at(0).conversations[1] = 0;
  PrivateQueueState q;
  q.owner = 1;
  q.initiator = 0;
  cfg.queues.emplace(0, std::move(q));
  Message at;
  at.kind = Message::Kind::AtReq;
  at.queueId = 0;
  at.sender = 0;
  cfg.actors.at(1).publicQueue.push_back(at);
  cfg.nextQueue = 1;
  return cfg;
}

}  // namespace

TEST_CASE("an open conversation with matching queue is well-formed") {
  CHECK(check_wf_private(conversation_config()).ok);
}

TEST_CASE("two actors conversing through one queue violate wf-heap-priv") {
  Config cfg = conversation_config();
  ActorState a2;
  a2.thisLoc = 2;
  a2.localHeap = {2};
  a2.current = make_val(UnitV{});
  a2.conversations[1] = 0;  // hijacks q0
  cfg.actors.emplace(2, std::move(a2));
  cfg.nextActor = 3;
  cfg.nextLoc = 3;
  auto rep = check_wf_private(cfg);
  CHECK(has_rule(rep, "wf-heap-priv"));
}

TEST_CASE("End in a public queue violates wf-actor-priv") {
  Config cfg = conversation_config();
  Message end;
  end.kind = Message::Kind::End;
  cfg.actors.at(1).publicQueue.push_back(end);
  auto rep = check_wf_private(cfg);
  CHECK(has_rule(rep, "wf-actor-priv"));
}

TEST_CASE("conversation queues must be owned by the partner") {
  Config cfg = conversation_config();
  cfg.queues.at(0).owner = 0;
  auto rep = check_wf_private(cfg);
  CHECK(has_rule(rep, "wf-actor-priv"));
}

TEST_CASE("requests for missing queues violate wf-queue-atomic") {
  Config cfg = conversation_config();
  cfg.queues.clear();
  auto rep = check_wf_private(cfg);
  CHECK(has_rule(rep, "wf-queue-atomic"));
}

TEST_CASE("private queues never hold conversation requests") {
  Config cfg = conversation_config();
  Message at;
  at.kind = Message::Kind::AtReq;
  at.queueId = 0;
  cfg.queues.at(0).items.push_back(at);
  auto rep = check_wf_private(cfg);
  CHECK(has_rule(rep, "wf-queue-map"));
}

TEST_CASE("a queue holding End must have no remaining converser") {
  Config cfg = conversation_config();
  Message end;
  end.kind = Message::Kind::End;
  end.sender = 0;
  cfg.queues.at(0).items.push_back(end);
  // a0 still holds the conversation entry
  auto rep = check_wf_private(cfg);
  CHECK(has_rule(rep, "wf-queue-map"));

  cfg.actors.at(0).conversations.clear();
  CHECK(check_wf_private(cfg).ok);
}

TEST_CASE("duplicate atomic requests for one queue are flagged") {
  Config cfg = conversation_config();
  Message at;
  at.kind = Message::Kind::AtReq;
  at.queueId = 0;
  at.sender = 0;
  cfg.actors.at(1).publicQueue.push_back(at);
  auto rep = check_wf_private(cfg);
  CHECK(has_rule(rep, "wf-actor-priv"));
}

TEST_CASE("variant bleed-through is reported") {
  Config cfg = two_actor_core();
  cfg.owners[1] = 1;  // owner map has no business in the core variant
  auto rep = check_wf_core(cfg);
  CHECK(has_rule(rep, "wf-variant"));
}
