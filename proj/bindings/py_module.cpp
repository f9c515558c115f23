// Python bindings for the main operations: typechecking, single-schedule
// runs, interleaving exploration, and the ping benchmark.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "bestow/report_json.hpp"
#include "bestow/types.hpp"

namespace py = pybind11;
using namespace bst;

namespace {

calc::Variant variant_of(const std::string& name, const std::string& source) {
  if (!name.empty()) {
    auto v = calc::variant_from_string(name);
    if (!v) throw py::value_error("unknown variant: " + name);
    return *v;
  }
  if (auto v = calc::pragma_variant(source)) return *v;
  throw py::value_error("no variant given and no #variant pragma in source");
}

py::object json_obj(const nlohmann::json& j) {
  py::module_ json = py::module_::import("json");
  return json.attr("loads")(j.dump());
}

calc::Mutant mutant_of(const std::string& name) {
  if (name.empty()) return calc::Mutant::None;
  for (auto m : {calc::Mutant::DropPassiveLeakPremise,
                 calc::Mutant::MisdeliverBestowedSend,
                 calc::Mutant::TransferWhileRunning,
                 calc::Mutant::PrivateSendToPublic,
                 calc::Mutant::EndToPublic}) {
    if (calc::to_string(m) == name) return m;
  }
  throw py::value_error("unknown mutant: " + name);
}

struct Loaded {
  calc::Variant variant;
  calc::Expr program;
};

std::variant<Loaded, nlohmann::json> load(const std::string& source,
                                          const std::string& variantName) {
  calc::Variant v = variant_of(variantName, source);
  auto r = calc::parse(source, v);
  if (auto* e = std::get_if<calc::Expr>(&r)) return Loaded{v, *e};
  if (auto* pe = std::get_if<calc::ParseError>(&r)) {
    return nlohmann::json{{"ok", false},
                          {"error",
                           {{"kind", "ParseError"},
                            {"line", pe->pos.line},
                            {"col", pe->pos.col},
                            {"message", pe->message}}}};
  }
  const auto& ve = std::get<calc::VariantError>(r);
  return nlohmann::json{{"ok", false},
                        {"error",
                         {{"kind", "VariantError"},
                          {"line", ve.pos.line},
                          {"col", ve.pos.col},
                          {"construct", ve.construct}}}};
}

py::object check(const std::string& source, const std::string& variantName) {
  auto loaded = load(source, variantName);
  if (auto* err = std::get_if<nlohmann::json>(&loaded)) {
    return json_obj(*err);
  }
  auto& [variant, program] = std::get<Loaded>(loaded);
  auto tc = calc::typecheck(calc::TypeEnv{}, program, variant);
  if (auto* t = std::get_if<calc::Type>(&tc)) {
    return json_obj({{"ok", true}, {"type", t->str()}});
  }
  const auto& err = std::get<calc::TypeError>(tc);
  return json_obj({{"ok", false},
                   {"error",
                    {{"kind", calc::to_string(err.kind)},
                     {"line", err.pos.line},
                     {"col", err.pos.col},
                     {"message", err.message}}}});
}

std::string pretty(const std::string& source,
                   const std::string& variantName) {
  auto loaded = load(source, variantName);
  if (std::holds_alternative<nlohmann::json>(loaded)) {
    throw py::value_error("source does not parse");
  }
  return calc::pretty(std::get<Loaded>(loaded).program);
}

py::object run(const std::string& source, const std::string& variantName,
               const std::string& schedule, std::uint64_t seed, int maxSteps,
               bool wfEveryStep, const std::string& mutant) {
  auto loaded = load(source, variantName);
  if (auto* err = std::get_if<nlohmann::json>(&loaded)) return json_obj(*err);
  auto& [variant, program] = std::get<Loaded>(loaded);
  calc::Schedule s;
  if (schedule == "fifo") {
    s.kind = calc::ScheduleKind::Fifo;
  } else if (schedule == "random") {
    s.kind = calc::ScheduleKind::Random;
    s.seed = seed;
  } else {
    throw py::value_error("schedule must be 'fifo' or 'random'");
  }
  auto res = calc::run_program(program, variant, s, maxSteps, wfEveryStep,
                               mutant_of(mutant));
  return json_obj(calc::to_json(res));
}

py::object explore(const std::string& source, const std::string& variantName,
                   int depth, int transferCap, bool canonicalize,
                   std::uint64_t stateBudget, const std::string& mutant) {
  auto loaded = load(source, variantName);
  if (auto* err = std::get_if<nlohmann::json>(&loaded)) return json_obj(*err);
  auto& [variant, program] = std::get<Loaded>(loaded);
  calc::ExploreOptions opts;
  opts.depthBound = depth;
  opts.transferCap = transferCap;
  opts.canonicalize = canonicalize;
  opts.stateBudget = stateBudget;
  opts.mutant = mutant_of(mutant);
  return json_obj(calc::to_json(calc::explore(program, variant, opts)));
}

py::object bench_ping(std::uint64_t messages, const std::string& mode,
                      int runs, int batch, unsigned workers,
                      bool withTimings) {
  workloads::PingMode m;
  if (mode == "direct") m = workloads::PingMode::Direct;
  else if (mode == "bestowed") m = workloads::PingMode::Bestowed;
  else if (mode == "bestowed-atomic") m = workloads::PingMode::BestowedAtomic;
  else throw py::value_error("unknown mode: " + mode);
  auto rep = workloads::bench_ping(messages, m, runs, batch, workers);
  return json_obj(workloads::to_json(rep, withTimings));
}

}  // namespace

PYBIND11_MODULE(pybestow, m) {
  m.doc() = "Delegation-based actor calculus (check / run / explore) and the "
            "runtime's ping benchmark";

  m.def("check", &check, py::arg("source"), py::arg("variant") = "",
        "Typecheck a program; returns {ok, type} or {ok, error}.");
  m.def("pretty", &pretty, py::arg("source"), py::arg("variant") = "",
        "Parse and print a program back in canonical form.");
  m.def("run", &run, py::arg("source"), py::arg("variant") = "",
        py::arg("schedule") = "fifo", py::arg("seed") = 0,
        py::arg("max_steps") = 10000, py::arg("wf_every_step") = false,
        py::arg("mutant") = "",
        "Execute one schedule; returns the labels, final config and any "
        "violation.");
  m.def("explore", &explore, py::arg("source"), py::arg("variant") = "",
        py::arg("depth") = 60, py::arg("transfer_cap") = 2,
        py::arg("canonicalize") = false, py::arg("state_budget") = 4000000,
        py::arg("mutant") = "",
        "Exhaustively explore interleavings; returns the exploration "
        "report.");
  m.def("bench_ping", &bench_ping, py::arg("messages"),
        py::arg("mode") = "direct", py::arg("runs") = 3,
        py::arg("batch") = 1000, py::arg("workers") = 2,
        py::arg("with_timings") = true,
        "Run the ping benchmark; returns per-run seconds and envelope "
        "counts.");
  m.attr("variants") = py::make_tuple("core", "transfer", "private");
  m.attr("mutants") =
      py::make_tuple("drop-passive-leak-premise", "misdeliver-bestowed-send",
                     "transfer-while-running", "private-send-to-public",
                     "end-to-public");
}
