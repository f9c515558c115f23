#include <filesystem>
#include <fstream>

#include "bestow/explorer.hpp"
#include "doctest.h"

using namespace bst::calc;
namespace fs = std::filesystem;

namespace {

Expr parsed(const std::string& src, Variant v) {
  auto r = parse(src, v);
  auto* e = std::get_if<Expr>(&r);
  REQUIRE_MESSAGE(e != nullptr, "failed to parse: " << src);
  return *e;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  REQUIRE_MESSAGE(in.good(), "cannot open " << p.string());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

struct CorpusProgram {
  fs::path path;
  Variant variant;
  Expr program;
};

std::vector<CorpusProgram> explore_corpus(const std::string& prefix) {
  std::vector<CorpusProgram> out;
  fs::path dir = fs::path(BESTOW_CORPUS_DIR) / "explore";
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.path().extension() == ".bst" &&
        entry.path().filename().string().rfind(prefix, 0) == 0) {
      files.push_back(entry.path());
    }
  }
  std::sort(files.begin(), files.end());
  for (const auto& f : files) {
    std::string src = slurp(f);
    auto v = pragma_variant(src);
    REQUIRE_MESSAGE(v.has_value(), f.string() << ": missing variant pragma");
    out.push_back({f, *v, parsed(src, *v)});
  }
  return out;
}

}  // namespace

TEST_CASE("check_drf spots two actors mutating one location") {
  Config cfg = initial_config(make_mutate(make_val(LocV{0})));
  ActorState a1;
  a1.thisLoc = 1;
  a1.localHeap = {1};
  a1.current = make_mutate(make_val(LocV{0}));  // same location: race
  cfg.actors.emplace(1, std::move(a1));

  auto v = check_drf(cfg);
  REQUIRE(v.size() == 1);
  CHECK(v[0].loc == 0);

  // different locations: fine
  cfg.actors.at(1).current = make_mutate(make_val(LocV{1}));
  CHECK(check_drf(cfg).empty());

  // one of them idle: fine
  cfg.actors.at(1).current = make_val(UnitV{});
  CHECK(check_drf(cfg).empty());
}

TEST_CASE("check_progress classifies terminal, blocked and stuck") {
  Config cfg = initial_config(make_val(UnitV{}));
  CHECK(!check_progress(cfg, Variant::Core).has_value());

  // blocked: head is a conversation request with an empty private queue
  Config blocked = initial_config(make_val(UnitV{}));
  Message at;
  at.kind = Message::Kind::AtReq;
  at.queueId = 0;
  blocked.actors.at(0).publicQueue.push_back(at);
  PrivateQueueState q;
  q.owner = 0;
  q.initiator = 0;
  blocked.queues.emplace(0, std::move(q));
  blocked.nextQueue = 1;
  CHECK(!check_progress(blocked, Variant::PrivateQueues).has_value());

  // ill-typed application: unreachable from typed programs, but the
  // checker itself must call it stuck
  Config stuck = initial_config(
      make_app(make_val(UnitV{}), make_val(UnitV{})));
  auto rep = check_progress(stuck, Variant::Core);
  REQUIRE(rep.has_value());
  CHECK(rep->stuckActors == std::vector<int>{0});
}

TEST_CASE("check_atomicity flags foreign messages consumed from a queue") {
  // hand-built trace: a0 opened q0 with a1, but a2's message sits at its head
  Config pre = initial_config(make_val(UnitV{}));
  for (int i = 1; i <= 2; i++) {
    ActorState a;
    a.thisLoc = i;
    a.localHeap = {i};
    a.current = make_val(UnitV{});
    pre.actors.emplace(i, std::move(a));
  }
  pre.nextActor = 3;
  pre.nextLoc = 3;
  pre.actors.at(0).conversations[1] = 0;
  PrivateQueueState q;
  q.owner = 1;
  q.initiator = 0;
  Message hijack;
  hijack.kind = Message::Kind::Fn;
  hijack.payload = Lambda{"x", Type::passive(), make_val(UnitV{})};
  hijack.sender = 2;  // not the initiator
  hijack.convId = 0;
  q.items.push_back(hijack);
  pre.queues.emplace(0, std::move(q));
  pre.nextQueue = 1;
  Message at;
  at.kind = Message::Kind::AtReq;
  at.queueId = 0;
  at.sender = 0;
  pre.actors.at(1).publicQueue.push_back(at);

  Trace t;
  t.initial = pre;
  Config post = apply(pre, PopPrivateL{1}, Variant::PrivateQueues);
  t.steps.push_back({PopPrivateL{1}, post});
  auto violations = check_atomicity(t, Variant::PrivateQueues);
  REQUIRE(violations.size() == 1);
  CHECK(violations[0].queueId == 0);

  // a trace without atomic blocks has nothing to flag
  Trace empty;
  empty.initial = initial_config(make_val(UnitV{}));
  CHECK(check_atomicity(empty, Variant::PrivateQueues).empty());
}

TEST_CASE("exhausted state budgets mark the report truncated") {
  std::string src = slurp(fs::path(BESTOW_CORPUS_DIR) / "explore" /
                          "private_05_noisy_third.bst");
  Expr prog = parsed(src, Variant::PrivateQueues);
  ExploreOptions opts;
  opts.stateBudget = 50;
  auto rep = explore(prog, Variant::PrivateQueues, opts);
  CHECK(rep.truncated);
  CHECK(rep.statesVisited <= 51);
}

TEST_CASE("exploring a single spawn visits a tiny graph with no violations") {
  auto rep = explore(parsed("new c", Variant::Core), Variant::Core,
                     ExploreOptions{.depthBound = 10});
  CHECK(rep.statesVisited == 2);
  CHECK(rep.maxDepth == 1);
  CHECK(!rep.truncated);
  CHECK(rep.violations.empty());
}

TEST_CASE("two producers mutating their own objects are race-free") {
  std::string src = slurp(fs::path(BESTOW_CORPUS_DIR) / "explore" /
                          "core_04_two_producers.bst");
  auto rep = explore(parsed(src, Variant::Core), Variant::Core);
  CHECK(rep.violations.empty());
  CHECK(!rep.truncated);
  CHECK(rep.statesVisited > 10);
}

TEST_CASE("exploration reports are deterministic") {
  std::string src = slurp(fs::path(BESTOW_CORPUS_DIR) / "explore" /
                          "private_05_noisy_third.bst");
  Expr prog = parsed(src, Variant::PrivateQueues);
  auto a = explore(prog, Variant::PrivateQueues);
  auto b = explore(prog, Variant::PrivateQueues);
  CHECK(a.statesVisited == b.statesVisited);
  CHECK(a.maxDepth == b.maxDepth);
  CHECK(a.violations.size() == b.violations.size());
}

TEST_CASE("canonicalization only dedupes, never changes verdicts") {
  std::string src = slurp(fs::path(BESTOW_CORPUS_DIR) / "explore" /
                          "core_04_two_producers.bst");
  Expr prog = parsed(src, Variant::Core);
  auto plain = explore(prog, Variant::Core);
  auto canon = explore(prog, Variant::Core,
                       ExploreOptions{.canonicalize = true});
  CHECK(canon.violations.empty());
  CHECK(canon.statesVisited <= plain.statesVisited);
}

TEST_CASE("full corpus explores to quiescence with zero violations") {
  for (const auto& prefix : {"core_", "transfer_", "private_"}) {
    auto corpus = explore_corpus(prefix);
    CHECK(corpus.size() >= 10);
    for (const auto& c : corpus) {
      CAPTURE(c.path.string());
      auto rep = explore(c.program, c.variant);
      CHECK(rep.violations.empty());
      CHECK(!rep.truncated);
    }
  }
}

// ---------------------------------------------------------------------------
// Mutation suite: each broken rule variant must be detected with a minimized,
// replayable trace.
// ---------------------------------------------------------------------------

namespace {

// Replays the minimized trace under the mutant and checks it demonstrates
// the violation: the final step or state must fail the reported property.
void require_replayable(const Expr& prog, Variant variant, Mutant mutant,
                        const PropertyViolation& v) {
  auto t = replay(prog, variant, v.trace, mutant);
  REQUIRE_MESSAGE(t.has_value(), "trace does not replay: " << v.detail);
  // the violated property must be observable at the end of the trace
  const Config& last = t->steps.empty() ? t->initial : t->steps.back().after;
  TypecheckOptions opts{mutant == Mutant::DropPassiveLeakPremise};
  if (v.property == "wf") {
    CHECK(!check_wf(last, variant, opts).ok);
  } else if (v.property == "drf") {
    CHECK(!check_drf(last).empty());
  } else if (v.property == "progress") {
    CHECK(check_progress(last, variant).has_value());
  } else if (v.property == "atomicity") {
    CHECK(!check_atomicity(*t, variant).empty());
  }
}

}  // namespace

TEST_CASE("mutant: dropped passive-leak premise is caught") {
  // sends a raw location across actors, then mutates it locally
  Expr prog = parsed(
      "(fn (y : p) => (fn (z : Unit) => y.mutate())"
      " ((new c) ! (fn (x : p) => y.mutate()))) (new p)",
      Variant::Core);
  // the honest typechecker rejects this program outright
  auto honest = typecheck(TypeEnv{}, prog, Variant::Core);
  REQUIRE(std::holds_alternative<TypeError>(honest));
  CHECK(std::get<TypeError>(honest).kind == TypeErrorKind::PassiveLeak);

  auto rep = explore(prog, Variant::Core,
                     ExploreOptions{.mutant = Mutant::DropPassiveLeakPremise});
  REQUIRE(!rep.violations.empty());
  const auto& v = rep.violations.front();
  CHECK((v.property == "wf" || v.property == "drf"));
  require_replayable(prog, Variant::Core, Mutant::DropPassiveLeakPremise, v);
}

TEST_CASE("mutant: misdelivered bestowed sends are caught") {
  std::string src = slurp(fs::path(BESTOW_CORPUS_DIR) / "explore" /
                          "core_05_bestowed_delegation.bst");
  Expr prog = parsed(src, Variant::Core);
  auto rep = explore(prog, Variant::Core,
                     ExploreOptions{.mutant = Mutant::MisdeliverBestowedSend});
  REQUIRE(!rep.violations.empty());
  require_replayable(prog, Variant::Core, Mutant::MisdeliverBestowedSend,
                     rep.violations.front());
}

TEST_CASE("mutant: mid-message ownership transfer is caught") {
  std::string src = slurp(fs::path(BESTOW_CORPUS_DIR) / "explore" /
                          "transfer_04_cross_actor.bst");
  Expr prog = parsed(src, Variant::Transfer);
  auto rep = explore(prog, Variant::Transfer,
                     ExploreOptions{.mutant = Mutant::TransferWhileRunning});
  REQUIRE(!rep.violations.empty());
  require_replayable(prog, Variant::Transfer, Mutant::TransferWhileRunning,
                     rep.violations.front());
}

TEST_CASE("mutant: private sends routed publicly break atomicity") {
  std::string src = slurp(fs::path(BESTOW_CORPUS_DIR) / "explore" /
                          "private_03_conversation.bst");
  Expr prog = parsed(src, Variant::PrivateQueues);
  auto rep = explore(prog, Variant::PrivateQueues,
                     ExploreOptions{.mutant = Mutant::PrivateSendToPublic});
  REQUIRE(!rep.violations.empty());
  CHECK(rep.violations.front().property == "atomicity");
  require_replayable(prog, Variant::PrivateQueues,
                     Mutant::PrivateSendToPublic, rep.violations.front());
}

TEST_CASE("mutant: End in the public queue is caught") {
  std::string src = slurp(fs::path(BESTOW_CORPUS_DIR) / "explore" /
                          "private_03_conversation.bst");
  Expr prog = parsed(src, Variant::PrivateQueues);
  auto rep = explore(prog, Variant::PrivateQueues,
                     ExploreOptions{.mutant = Mutant::EndToPublic});
  REQUIRE(!rep.violations.empty());
  CHECK(rep.violations.front().property == "wf");
  require_replayable(prog, Variant::PrivateQueues, Mutant::EndToPublic,
                     rep.violations.front());
}

TEST_CASE("minimized traces are no longer than needed") {
  Expr prog = parsed(
      "(fn (y : p) => (fn (z : Unit) => y.mutate())"
      " ((new c) ! (fn (x : p) => y.mutate()))) (new p)",
      Variant::Core);
  auto rep = explore(prog, Variant::Core,
                     ExploreOptions{.mutant = Mutant::DropPassiveLeakPremise});
  REQUIRE(!rep.violations.empty());
  const auto& tr = rep.violations.front().trace;
  // dropping any single label must destroy the violation or the replay
  for (size_t i = 0; i < tr.size(); i++) {
    std::vector<TransitionLabel> shorter;
    for (size_t j = 0; j < tr.size(); j++) {
      if (j != i) shorter.push_back(tr[j]);
    }
    auto t = replay(prog, Variant::Core, shorter,
                    Mutant::DropPassiveLeakPremise);
    if (!t) continue;  // replay broke: deletion is invalid, fine
    TypecheckOptions opts{true};
    bool violates = false;
    const Config* pre = &t->initial;
    if (!check_wf(*pre, Variant::Core, opts).ok || !check_drf(*pre).empty()) {
      violates = true;
    }
    for (const auto& step : t->steps) {
      if (!check_wf(step.after, Variant::Core, opts).ok ||
          !check_drf(step.after).empty()) {
        violates = true;
      }
    }
    CHECK(!violates);
  }
}

// ---------------------------------------------------------------------------
// Single-schedule runs
// ---------------------------------------------------------------------------

TEST_CASE("fifo runs reach quiescence and replay exactly") {
  std::string src = slurp(fs::path(BESTOW_CORPUS_DIR) / "explore" /
                          "core_05_bestowed_delegation.bst");
  Expr prog = parsed(src, Variant::Core);
  auto res = run_program(prog, Variant::Core, Schedule{}, 200, true);
  CHECK(res.quiescent);
  CHECK(!res.violation.has_value());

  std::vector<TransitionLabel> labels;
  for (const auto& s : res.trace.steps) labels.push_back(s.label);
  auto t = replay(prog, Variant::Core, labels);
  REQUIRE(t.has_value());
  REQUIRE(!t->steps.empty());
  CHECK(config_equal(t->steps.back().after, res.trace.steps.back().after));
}

TEST_CASE("random schedules are reproducible per seed") {
  std::string src = slurp(fs::path(BESTOW_CORPUS_DIR) / "explore" /
                          "private_05_noisy_third.bst");
  Expr prog = parsed(src, Variant::PrivateQueues);
  Schedule s{ScheduleKind::Random, 42, {}};
  auto a = run_program(prog, Variant::PrivateQueues, s, 300, false);
  auto b = run_program(prog, Variant::PrivateQueues, s, 300, false);
  CHECK(a.quiescent);
  REQUIRE(a.trace.steps.size() == b.trace.steps.size());
  for (size_t i = 0; i < a.trace.steps.size(); i++) {
    CHECK(label_equal(a.trace.steps[i].label, b.trace.steps[i].label));
  }
}

TEST_CASE("script schedules reject labels that are not enabled") {
  Expr prog = parsed("new c", Variant::Core);
  Schedule s{ScheduleKind::Script, 0, {PopPublicL{0}}};
  auto res = run_program(prog, Variant::Core, s, 10, false);
  REQUIRE(res.violation.has_value());
  CHECK(res.violation->property == "script");
}
