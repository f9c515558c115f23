#pragma once

#include <deque>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "bestow/syntax.hpp"

// Small-step labeled transition system for the three variants: per-actor
// expression evaluation plus the global scheduling steps.
namespace bst::calc {

// Queue entries. Fn carries a lambda; AtReq/End drive private conversations
// in the PrivateQueues variant. `sender` and `convId` are provenance
// metadata used by the atomicity oracle, not part of the semantics proper.
struct Message {
  enum class Kind { Fn, AtReq, End };
  Kind kind = Kind::Fn;
  Value payload = UnitV{};
  int queueId = -1;  // AtReq only
  int sender = -1;
  int convId = -1;  // queue this message was sent through, -1 for public
};

struct ActorState {
  int thisLoc = -1;
  std::set<int> localHeap;           // L
  std::deque<Message> publicQueue;   // Q
  std::map<int, int> conversations;  // C: partner actor id -> queue id
  Expr current;                      // e
};

struct PrivateQueueState {
  std::deque<Message> items;
  int owner = -1;      // the actor reading from this queue
  int initiator = -1;  // metadata: the actor that opened the conversation
};

// Global machine state. Plain value type: apply() returns a fresh Config and
// never aliases mutable state, so snapshots can be explored from any thread.
struct Config {
  std::map<int, ActorState> actors;        // H
  std::map<int, int> owners;               // O (Transfer): location -> actor
  std::map<int, PrivateQueueState> queues; // M (PrivateQueues)
  int nextActor = 0;
  int nextLoc = 0;
  int nextQueue = 0;
};

// The main actor starts with one location (its this) and the program as its
// current expression.
Config initial_config(Expr program);

bool config_equal(const Config& a, const Config& b);

struct RunExprL {
  int actor;
};
struct PopPublicL {
  int actor;
};
struct PopPrivateL {
  int actor;
};
struct EndPrivateL {
  int actor;
};
struct TransferL {
  int loc;
  int to;
};
using TransitionLabel =
    std::variant<RunExprL, PopPublicL, PopPrivateL, EndPrivateL, TransferL>;

std::string label_str(const TransitionLabel& l);
std::optional<TransitionLabel> label_from_string(std::string_view s);
bool label_equal(const TransitionLabel& a, const TransitionLabel& b);

// Deliberately broken rule variants for the mutation-detection suite. The
// explorer must flag each of them on the bundled corpus.
enum class Mutant {
  None,
  DropPassiveLeakPremise,  // e-send accepts bodies with passive captures
  MisdeliverBestowedSend,  // delegated sends land on the sender, not the owner
  TransferWhileRunning,    // ownership may move mid-message
  PrivateSendToPublic,     // conversation sends bypass the private queue
  EndToPublic,             // release appends End to the public queue
};

std::string to_string(Mutant m);

// --- decomposition ---------------------------------------------------------

// E ::= [] e | v [] | []!v | [].mutate() | bestow [] | atomic [] | release []
enum class Frame {
  AppFun,
  AppArg,
  SendTarget,
  MutateTarget,
  BestowInner,
  AtomicTarget,
  ReleaseTarget,
};

struct Decomposition {
  std::vector<Frame> path;  // from the root down to the redex
  Expr redex;
};
struct AlreadyValue {
  Value v;
};
struct StuckExpr {
  std::string why;
};
using DecomposeResult = std::variant<Decomposition, AlreadyValue, StuckExpr>;

DecomposeResult decompose(const Expr& e);

// Rebuilds `whole` with the subexpression at `path` replaced.
Expr plug(const Expr& whole, const std::vector<Frame>& path, Expr replacement);

// Capture-avoiding substitution of a closed value for a parameter.
Expr substitute(const Expr& body, const std::string& param, const Value& v);

// --- transitions -----------------------------------------------------------

std::vector<TransitionLabel> enabled(const Config& cfg, Variant variant,
                                     Mutant mutant = Mutant::None);

struct IllegalLabel : std::logic_error {
  using std::logic_error::logic_error;
};

Config apply(const Config& cfg, const TransitionLabel& label, Variant variant,
             Mutant mutant = Mutant::None);

// Human-readable dump of a configuration (used by the run subcommand).
std::string config_str(const Config& cfg);

}  // namespace bst::calc
