#pragma once

#include "bestow/explorer.hpp"
#include "bestow/workloads.hpp"
#include "json.hpp"

// JSON views of configurations and reports, shared by the CLI and the
// Python bindings. All schemas carry a top-level version field.
namespace bst::calc {

inline nlohmann::json to_json(const Config& cfg) {
  nlohmann::json actors = nlohmann::json::array();
  for (const auto& [id, a] : cfg.actors) {
    nlohmann::json queue = nlohmann::json::array();
    for (const auto& m : a.publicQueue) {
      switch (m.kind) {
        case Message::Kind::Fn:
          queue.push_back({{"kind", "fn"}, {"payload", pretty(m.payload)}});
          break;
        case Message::Kind::AtReq:
          queue.push_back({{"kind", "at"}, {"queue", m.queueId}});
          break;
        case Message::Kind::End:
          queue.push_back({{"kind", "end"}});
          break;
      }
    }
    nlohmann::json conv = nlohmann::json::object();
    for (const auto& [partner, q] : a.conversations) {
      conv["a" + std::to_string(partner)] = q;
    }
    actors.push_back({{"id", id},
                      {"this", a.thisLoc},
                      {"heap", a.localHeap},
                      {"queue", std::move(queue)},
                      {"conversations", std::move(conv)},
                      {"current", pretty(a.current)}});
  }
  nlohmann::json owners = nlohmann::json::object();
  for (const auto& [loc, id] : cfg.owners) {
    owners["l" + std::to_string(loc)] = id;
  }
  nlohmann::json queues = nlohmann::json::object();
  for (const auto& [qid, pq] : cfg.queues) {
    nlohmann::json items = nlohmann::json::array();
    for (const auto& m : pq.items) {
      items.push_back(m.kind == Message::Kind::End ? "End"
                                                   : pretty(m.payload));
    }
    queues["q" + std::to_string(qid)] = {{"owner", pq.owner},
                                         {"items", std::move(items)}};
  }
  return {{"actors", std::move(actors)},
          {"owners", std::move(owners)},
          {"queues", std::move(queues)}};
}

inline nlohmann::json to_json(const ExplorationReport& rep) {
  nlohmann::json violations = nlohmann::json::array();
  for (const auto& v : rep.violations) {
    nlohmann::json trace = nlohmann::json::array();
    for (const auto& l : v.trace) trace.push_back(label_str(l));
    violations.push_back({{"property", v.property},
                          {"detail", v.detail},
                          {"trace", std::move(trace)}});
  }
  return {{"schema", 1},
          {"statesVisited", rep.statesVisited},
          {"maxDepth", rep.maxDepth},
          {"truncated", rep.truncated},
          {"violations", std::move(violations)}};
}

inline nlohmann::json to_json(const RunResult& res) {
  nlohmann::json labels = nlohmann::json::array();
  for (const auto& s : res.trace.steps) labels.push_back(label_str(s.label));
  nlohmann::json out = {{"schema", 1},
                        {"labels", std::move(labels)},
                        {"steps", res.trace.steps.size()},
                        {"quiescent", res.quiescent}};
  const Config& last = res.trace.steps.empty()
                           ? res.trace.initial
                           : res.trace.steps.back().after;
  out["final"] = to_json(last);
  if (res.violation) {
    nlohmann::json trace = nlohmann::json::array();
    for (const auto& l : res.violation->trace) trace.push_back(label_str(l));
    out["violation"] = {{"property", res.violation->property},
                        {"detail", res.violation->detail},
                        {"trace", std::move(trace)}};
  }
  return out;
}

}  // namespace bst::calc

namespace bst::rt {

inline nlohmann::json to_json(const Stats& s) {
  return {{"messagesSent", s.messagesSent},
          {"envelopesDelivered", s.envelopesDelivered},
          {"privateMailboxInstalls", s.privateInstalls},
          {"publicMailboxRestores", s.publicRestores},
          {"transfersPerformed", s.transfers},
          {"coalescedBatches", s.coalescedBatches}};
}

}  // namespace bst::rt

namespace bst::workloads {

inline nlohmann::json to_json(const PingReport& rep, bool withTimings) {
  const char* mode = rep.mode == PingMode::Direct          ? "direct"
                     : rep.mode == PingMode::Bestowed      ? "bestowed"
                                                           : "bestowed-atomic";
  nlohmann::json runs = nlohmann::json::array();
  for (const auto& r : rep.runs) {
    nlohmann::json run = {{"envelopes", r.envelopes}};
    if (withTimings) run["seconds"] = r.seconds;
    runs.push_back(std::move(run));
  }
  nlohmann::json out = {{"schema", 1},
                        {"mode", mode},
                        {"messages", rep.messages},
                        {"batch", rep.batch},
                        {"runs", std::move(runs)}};
  if (withTimings) {
    out["medianSeconds"] = rep.median_seconds();
    out["messagesPerSecond"] = rep.median_throughput();
  }
  return out;
}

}  // namespace bst::workloads
