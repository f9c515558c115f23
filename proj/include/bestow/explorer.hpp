#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "bestow/semantics.hpp"
#include "bestow/wellformed.hpp"

// Bounded exhaustive exploration of all interleavings, checking
// well-formedness preservation, data-race freedom, progress and private-queue
// atomicity on every visited state and transition.
namespace bst::calc {

struct TraceStep {
  TransitionLabel label;
  Config after;
};

struct Trace {
  Config initial;
  std::vector<TraceStep> steps;
};

// Pairs of distinct actors both about to mutate the same location.
struct DrfViolation {
  int actorA;
  int actorB;
  int loc;
};
std::vector<DrfViolation> check_drf(const Config& cfg);

struct StuckReport {
  std::vector<int> stuckActors;
  std::string detail;
};
// nullopt = ok: every actor has an enabled label, is terminal, or (in the
// PrivateQueues variant) is blocked waiting on its current private queue.
std::optional<StuckReport> check_progress(const Config& cfg, Variant variant);

struct AtomicityViolation {
  int queueId;
  std::string what;
};
// Checks the conversation discipline over a whole trace: consumers of a
// private queue only see messages from its initiator, and messages sent
// under a conversation are never consumed from the public queue.
std::vector<AtomicityViolation> check_atomicity(const Trace& t,
                                                Variant variant);

struct ExploreOptions {
  int depthBound = 60;
  int transferCap = 2;
  bool canonicalize = false;  // dedupe states up to fresh-name renaming
  std::uint64_t stateBudget = 4000000;
  Mutant mutant = Mutant::None;
};

struct PropertyViolation {
  std::string property;  // wf | drf | progress | atomicity | preservation-type
  std::string detail;
  std::vector<TransitionLabel> trace;  // minimized, replayable from initial
};

struct ExplorationReport {
  std::uint64_t statesVisited = 0;
  int maxDepth = 0;
  bool truncated = false;
  std::vector<PropertyViolation> violations;
};

ExplorationReport explore(const Expr& program, Variant variant,
                          const ExploreOptions& opts = {});

// Replays a label sequence from the initial configuration of `program`.
// Returns nullopt if some label is not enabled at its turn.
std::optional<Trace> replay(const Expr& program, Variant variant,
                            const std::vector<TransitionLabel>& labels,
                            Mutant mutant = Mutant::None);

// --- single-schedule execution (the `run` subcommand) -----------------------

enum class ScheduleKind { Fifo, Random, Script };

struct Schedule {
  ScheduleKind kind = ScheduleKind::Fifo;
  std::uint64_t seed = 0;
  std::vector<TransitionLabel> script;
};

struct RunResult {
  Trace trace;
  bool quiescent = false;
  std::optional<PropertyViolation> violation;  // when wfEveryStep is on
};

RunResult run_program(const Expr& program, Variant variant,
                      const Schedule& schedule, int maxSteps,
                      bool wfEveryStep, Mutant mutant = Mutant::None);

}  // namespace bst::calc
