#include "bestow/explorer.hpp"

#include <algorithm>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include "bestow/types.hpp"

namespace bst::calc {

std::vector<DrfViolation> check_drf(const Config& cfg) {
  // Collect every actor whose next step is mutate of a concrete location.
  std::vector<std::pair<int, int>> mutating;  // (actor, loc)
  for (const auto& [id, a] : cfg.actors) {
    auto dec = decompose(a.current);
    const auto* d = std::get_if<Decomposition>(&dec);
    if (!d) continue;
    const auto* mut = std::get_if<MutateE>(&d->redex->node);
    if (!mut) continue;
    const auto* val = as_value(mut->target);
    if (!val) continue;
    if (const auto* loc = std::get_if<LocV>(&val->v)) {
      mutating.emplace_back(id, loc->loc);
    }
  }
  std::vector<DrfViolation> out;
  for (size_t i = 0; i < mutating.size(); i++) {
    for (size_t j = i + 1; j < mutating.size(); j++) {
      if (mutating[i].second == mutating[j].second) {
        out.push_back(
            {mutating[i].first, mutating[j].first, mutating[i].second});
      }
    }
  }
  return out;
}

std::optional<StuckReport> check_progress(const Config& cfg, Variant variant) {
  auto labels = enabled(cfg, variant);
  std::set<int> canStep;
  for (const auto& l : labels) {
    std::visit(
        [&](const auto& x) {
          using T = std::decay_t<decltype(x)>;
          if constexpr (!std::is_same_v<T, TransferL>) canStep.insert(x.actor);
        },
        l);
  }
  StuckReport rep;
  for (const auto& [id, a] : cfg.actors) {
    if (canStep.count(id)) continue;
    bool isValue = as_value(a.current) != nullptr;
    if (isValue && a.publicQueue.empty()) continue;  // terminal
    if (variant == Variant::PrivateQueues && isValue &&
        !a.publicQueue.empty() &&
        a.publicQueue.front().kind == Message::Kind::AtReq) {
      auto it = cfg.queues.find(a.publicQueue.front().queueId);
      if (it != cfg.queues.end() && it->second.items.empty()) {
        continue;  // blocked, waiting for the conversation to produce
      }
    }
    rep.stuckActors.push_back(id);
  }
  if (rep.stuckActors.empty()) return std::nullopt;
  std::ostringstream os;
  os << "stuck actors:";
  for (int id : rep.stuckActors) os << " a" << id;
  rep.detail = os.str();
  return rep;
}

namespace {

// Checks one transition for conversation-discipline violations.
// pre is the state the label fired from.
std::vector<AtomicityViolation> check_atomicity_step(const Config& pre,
                                                     const TransitionLabel& l) {
  std::vector<AtomicityViolation> out;
  if (const auto* pop = std::get_if<PopPrivateL>(&l)) {
    const ActorState& a = pre.actors.at(pop->actor);
    int qid = a.publicQueue.front().queueId;
    const PrivateQueueState& q = pre.queues.at(qid);
    const Message& m = q.items.front();
    if (m.sender != q.initiator) {
      out.push_back({qid, "private queue q" + std::to_string(qid) +
                              " delivered a message from a" +
                              std::to_string(m.sender) +
                              " but the conversation belongs to a" +
                              std::to_string(q.initiator)});
    }
  } else if (const auto* end = std::get_if<EndPrivateL>(&l)) {
    const ActorState& a = pre.actors.at(end->actor);
    int qid = a.publicQueue.front().queueId;
    const PrivateQueueState& q = pre.queues.at(qid);
    const Message& m = q.items.front();
    if (m.sender != q.initiator) {
      out.push_back({qid, "conversation q" + std::to_string(qid) +
                              " was ended by a" + std::to_string(m.sender) +
                              " instead of its initiator a" +
                              std::to_string(q.initiator)});
    }
  } else if (const auto* pub = std::get_if<PopPublicL>(&l)) {
    const ActorState& a = pre.actors.at(pub->actor);
    const Message& m = a.publicQueue.front();
    if (m.convId != -1) {
      out.push_back({m.convId,
                     "message sent under conversation q" +
                         std::to_string(m.convId) +
                         " was consumed from the public queue of a" +
                         std::to_string(pub->actor)});
    }
  }
  return out;
}

}  // namespace

std::vector<AtomicityViolation> check_atomicity(const Trace& t,
                                                Variant variant) {
  std::vector<AtomicityViolation> out;
  if (variant != Variant::PrivateQueues) return out;
  const Config* pre = &t.initial;
  for (const auto& step : t.steps) {
    auto vs = check_atomicity_step(*pre, step.label);
    out.insert(out.end(), vs.begin(), vs.end());
    pre = &step.after;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Exploration
// ---------------------------------------------------------------------------

namespace {

// Canonical serialization of a config with ids/locations/queues renamed in
// first-appearance order, so states differing only in fresh-name allocation
// deduplicate.
class Canonicalizer {
 public:
  std::string key(const Config& cfg) {
    actors_.clear();
    locs_.clear();
    queues_.clear();
    os_.str("");
    for (const auto& [id, a] : cfg.actors) {
      os_ << "A" << actor(id) << "{t" << loc(a.thisLoc) << ";";
      for (int l : a.localHeap) os_ << "h" << loc(l) << ",";
      os_ << ";";
      for (const auto& m : a.publicQueue) msg(m);
      os_ << ";";
      for (const auto& [p, q] : a.conversations) {
        os_ << "c" << actor(p) << ">" << queue(q) << ",";
      }
      os_ << ";";
      expr(a.current);
      os_ << "}";
    }
    for (const auto& [l, o] : cfg.owners) {
      os_ << "O" << loc(l) << ">" << actor(o) << ";";
    }
    for (const auto& [q, pq] : cfg.queues) {
      os_ << "Q" << queue(q) << "(o" << actor(pq.owner) << ")[";
      for (const auto& m : pq.items) msg(m);
      os_ << "]";
    }
    return os_.str();
  }

 private:
  int actor(int id) { return rename(actors_, id); }
  int loc(int l) { return rename(locs_, l); }
  int queue(int q) { return rename(queues_, q); }

  static int rename(std::map<int, int>& m, int v) {
    auto [it, fresh] = m.emplace(v, static_cast<int>(m.size()));
    return it->second;
  }

  void msg(const Message& m) {
    switch (m.kind) {
      case Message::Kind::Fn:
        os_ << "F";
        value(m.payload);
        break;
      case Message::Kind::AtReq:
        os_ << "R" << queue(m.queueId);
        break;
      case Message::Kind::End:
        os_ << "E";
        break;
    }
    os_ << "<s" << (m.sender >= 0 ? actor(m.sender) : -1) << ">,";
  }

  void value(const Value& v) {
    std::visit(
        [&](const auto& a) {
          using T = std::decay_t<decltype(a)>;
          if constexpr (std::is_same_v<T, Lambda>) {
            os_ << "\\" << a.param << ":" << a.paramType.str() << ".";
            expr(a.body);
          } else if constexpr (std::is_same_v<T, UnitV>) {
            os_ << "u";
          } else if constexpr (std::is_same_v<T, ActorIdV>) {
            os_ << "@" << actor(a.id);
          } else if constexpr (std::is_same_v<T, LocV>) {
            os_ << "#" << loc(a.loc);
          } else if constexpr (std::is_same_v<T, BestowedLocV>) {
            os_ << "#" << loc(a.loc) << "@" << actor(a.owner);
          } else {
            os_ << "#" << loc(a.loc) << "*";
          }
        },
        v);
  }

  void expr(const Expr& e) {
    std::visit(
        [&](const auto& n) {
          using T = std::decay_t<decltype(n)>;
          if constexpr (std::is_same_v<T, VarE>) {
            os_ << n.name;
          } else if constexpr (std::is_same_v<T, AppE>) {
            os_ << "(";
            expr(n.fn);
            os_ << " ";
            expr(n.arg);
            os_ << ")";
          } else if constexpr (std::is_same_v<T, SendE>) {
            os_ << "(";
            expr(n.target);
            os_ << "!";
            value(n.msg);
            os_ << ")";
          } else if constexpr (std::is_same_v<T, MutateE>) {
            expr(n.target);
            os_ << ".m";
          } else if constexpr (std::is_same_v<T, NewE>) {
            os_ << "new:" << n.type.str();
          } else if constexpr (std::is_same_v<T, BestowE>) {
            os_ << "(bw ";
            expr(n.inner);
            os_ << ")";
          } else if constexpr (std::is_same_v<T, AtomicE>) {
            os_ << "(at ";
            expr(n.target);
            os_ << ")";
          } else if constexpr (std::is_same_v<T, ReleaseE>) {
            os_ << "(rl ";
            expr(n.target);
            os_ << ")";
          } else {
            value(n.v);
          }
        },
        e->node);
  }

  std::map<int, int> actors_, locs_, queues_;
  std::ostringstream os_;
};

struct StepCheckResult {
  std::optional<std::pair<std::string, std::string>> violation;  // (prop, why)
};

class Explorer {
 public:
  Explorer(Expr program, Variant variant, const ExploreOptions& opts)
      : program_(std::move(program)), variant_(variant), opts_(opts) {
    tcOpts_.dropPassiveLeakPremise =
        opts_.mutant == Mutant::DropPassiveLeakPremise;
  }

  ExplorationReport run() {
    Config init = initial_config(program_);
    path_.clear();
    visit(init, 0, 0);
    return std::move(report_);
  }

 private:
  // Checks that hold at a state. Returns the first violated property.
  std::optional<std::pair<std::string, std::string>> state_checks(
      const Config& cfg) {
    WfReport wf = check_wf(cfg, variant_, tcOpts_);
    if (!wf.ok) return std::make_pair(std::string("wf"), wf.str());
    auto drf = check_drf(cfg);
    if (!drf.empty()) {
      std::ostringstream os;
      os << "actors a" << drf[0].actorA << " and a" << drf[0].actorB
         << " are both about to mutate l" << drf[0].loc;
      return std::make_pair(std::string("drf"), os.str());
    }
    if (auto stuck = check_progress(cfg, variant_)) {
      return std::make_pair(std::string("progress"), stuck->detail);
    }
    return std::nullopt;
  }

  // Checks across a transition: per-actor type preservation plus the
  // conversation discipline.
  std::optional<std::pair<std::string, std::string>> transition_checks(
      const Config& pre, const TransitionLabel& label, const Config& post) {
    auto atom = check_atomicity_step(pre, label);
    if (!atom.empty()) {
      return std::make_pair(std::string("atomicity"), atom[0].what);
    }
    if (const auto* run = std::get_if<RunExprL>(&label)) {
      const auto& before = pre.actors.at(run->actor).current;
      const auto& after = post.actors.at(run->actor).current;
      auto tb = typecheck(TypeEnv{}, before, variant_, tcOpts_);
      if (const auto* t0 = std::get_if<Type>(&tb)) {
        auto ta = typecheck(TypeEnv{}, after, variant_, tcOpts_);
        const auto* t1 = std::get_if<Type>(&ta);
        if (!t1) {
          return std::make_pair(
              std::string("preservation-type"),
              "a" + std::to_string(run->actor) +
                  ": expression no longer typechecks after a step: " +
                  std::get<TypeError>(ta).str());
        }
        if (!(*t0 == *t1)) {
          return std::make_pair(std::string("preservation-type"),
                                "a" + std::to_string(run->actor) +
                                    ": type changed from " + t0->str() +
                                    " to " + t1->str());
        }
      }
    } else {
      int actor = -1;
      if (const auto* p = std::get_if<PopPublicL>(&label)) actor = p->actor;
      if (const auto* p = std::get_if<PopPrivateL>(&label)) actor = p->actor;
      if (actor >= 0) {
        const auto& after = post.actors.at(actor).current;
        auto ta = typecheck(TypeEnv{}, after, variant_, tcOpts_);
        if (const auto* err = std::get_if<TypeError>(&ta)) {
          return std::make_pair(std::string("preservation-type"),
                                "a" + std::to_string(actor) +
                                    ": popped message does not typecheck: " +
                                    err->str());
        }
      }
    }
    return std::nullopt;
  }

  void record_violation(const std::string& property, const std::string& detail,
                        const std::vector<TransitionLabel>& labels) {
    PropertyViolation v;
    v.property = property;
    v.detail = detail;
    v.trace = minimize(labels, property);
    report_.violations.push_back(std::move(v));
  }

  // Greedy label-deletion minimization with replay validation: a deletion is
  // kept only if the remaining schedule still replays and still violates the
  // same property.
  std::vector<TransitionLabel> minimize(std::vector<TransitionLabel> labels,
                                        const std::string& property) {
    size_t i = 0;
    while (i < labels.size()) {
      std::vector<TransitionLabel> cand = labels;
      cand.erase(cand.begin() + static_cast<long>(i));
      auto rep = replay_violating(cand, property);
      if (rep) {
        labels = std::move(*rep);
      } else {
        i++;
      }
    }
    // One last validation pass so the reported trace is replayable verbatim.
    auto last = replay_violating(labels, property);
    return last ? *last : labels;
  }

  // Replays labels (prefix-tolerant): returns the prefix up to and including
  // the first step at which `property` is violated, or nullopt if replay
  // fails or the property never trips.
  std::optional<std::vector<TransitionLabel>> replay_violating(
      const std::vector<TransitionLabel>& labels,
      const std::string& property) {
    Config cfg = initial_config(program_);
    if (auto v = state_checks(cfg); v && v->first == property) {
      return std::vector<TransitionLabel>{};
    }
    std::vector<TransitionLabel> done;
    for (const auto& l : labels) {
      auto en = enabled(cfg, variant_, opts_.mutant);
      bool ok = false;
      for (const auto& e : en) {
        if (label_equal(e, l)) {
          ok = true;
          break;
        }
      }
      if (!ok) return std::nullopt;
      Config next = apply(cfg, l, variant_, opts_.mutant);
      done.push_back(l);
      if (auto v = transition_checks(cfg, l, next);
          v && v->first == property) {
        return done;
      }
      if (auto v = state_checks(next); v && v->first == property) {
        return done;
      }
      cfg = std::move(next);
    }
    return std::nullopt;
  }

  void visit(const Config& cfg, int depth, int transfersUsed) {
    if (stop_) return;
    report_.statesVisited++;
    report_.maxDepth = std::max(report_.maxDepth, depth);
    if (report_.statesVisited > opts_.stateBudget) {
      report_.truncated = true;
      stop_ = true;
      return;
    }
    if (auto v = state_checks(cfg)) {
      record_violation(v->first, v->second, current_labels());
      stop_ = true;
      return;
    }
    auto labels = enabled(cfg, variant_, opts_.mutant);
    if (labels.empty()) return;  // quiescent
    if (depth >= opts_.depthBound) {
      report_.truncated = true;
      return;
    }
    if (opts_.canonicalize) {
      std::string key = canon_.key(cfg);
      if (!seen_.insert(std::move(key)).second) return;
    }
    for (const auto& l : labels) {
      bool isTransfer = std::holds_alternative<TransferL>(l);
      if (isTransfer && transfersUsed >= opts_.transferCap) continue;
      Config next = apply(cfg, l, variant_, opts_.mutant);
      if (auto v = transition_checks(cfg, l, next)) {
        auto labelsSoFar = current_labels();
        labelsSoFar.push_back(l);
        record_violation(v->first, v->second, labelsSoFar);
        stop_ = true;
        return;
      }
      path_.push_back(l);
      visit(next, depth + 1, transfersUsed + (isTransfer ? 1 : 0));
      path_.pop_back();
      if (stop_) return;
    }
  }

  std::vector<TransitionLabel> current_labels() const { return path_; }

  Expr program_;
  Variant variant_;
  ExploreOptions opts_;
  TypecheckOptions tcOpts_;
  ExplorationReport report_;
  std::vector<TransitionLabel> path_;
  std::set<std::string> seen_;
  Canonicalizer canon_;
  bool stop_ = false;
};

}  // namespace

ExplorationReport explore(const Expr& program, Variant variant,
                          const ExploreOptions& opts) {
  return Explorer(program, variant, opts).run();
}

std::optional<Trace> replay(const Expr& program, Variant variant,
                            const std::vector<TransitionLabel>& labels,
                            Mutant mutant) {
  Trace t;
  t.initial = initial_config(program);
  Config cfg = t.initial;
  for (const auto& l : labels) {
    auto en = enabled(cfg, variant, mutant);
    bool ok = false;
    for (const auto& e : en) {
      if (label_equal(e, l)) {
        ok = true;
        break;
      }
    }
    if (!ok) return std::nullopt;
    cfg = apply(cfg, l, variant, mutant);
    t.steps.push_back({l, cfg});
  }
  return t;
}

RunResult run_program(const Expr& program, Variant variant,
                      const Schedule& schedule, int maxSteps,
                      bool wfEveryStep, Mutant mutant) {
  RunResult res;
  res.trace.initial = initial_config(program);
  Config cfg = res.trace.initial;
  std::mt19937_64 rng(schedule.seed);
  size_t scriptPos = 0;
  for (int step = 0; step < maxSteps; step++) {
    if (wfEveryStep) {
      TypecheckOptions tco{mutant == Mutant::DropPassiveLeakPremise};
      WfReport wf = check_wf(cfg, variant, tco);
      if (!wf.ok) {
        PropertyViolation v;
        v.property = "wf";
        v.detail = wf.str();
        for (const auto& s : res.trace.steps) v.trace.push_back(s.label);
        res.violation = std::move(v);
        return res;
      }
    }
    auto labels = enabled(cfg, variant, mutant);
    if (labels.empty()) {
      res.quiescent = true;
      return res;
    }
    TransitionLabel pick = labels.front();
    switch (schedule.kind) {
      case ScheduleKind::Fifo:
        break;  // first label in canonical order
      case ScheduleKind::Random: {
        std::uniform_int_distribution<size_t> d(0, labels.size() - 1);
        pick = labels[d(rng)];
        break;
      }
      case ScheduleKind::Script: {
        if (scriptPos >= schedule.script.size()) return res;
        bool found = false;
        for (const auto& l : labels) {
          if (label_equal(l, schedule.script[scriptPos])) {
            pick = l;
            found = true;
            break;
          }
        }
        if (!found) {
          PropertyViolation v;
          v.property = "script";
          v.detail = "label " + label_str(schedule.script[scriptPos]) +
                     " is not enabled at step " + std::to_string(step);
          res.violation = std::move(v);
          return res;
        }
        scriptPos++;
        break;
      }
    }
    cfg = apply(cfg, pick, variant, mutant);
    res.trace.steps.push_back({pick, cfg});
  }
  return res;
}

}  // namespace bst::calc
