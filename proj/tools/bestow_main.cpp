// bestow: check / run / explore the calculus, and drive the runtime's
// demos and the ping benchmark.
//
// Exit codes: 0 success or no violations; 1 property violations (trace
// artifacts written next to the input); 2 usage, parse or type errors.

#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "bestow/report_json.hpp"
#include "bestow/types.hpp"
#include "demos.hpp"

using namespace bst;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  if (!in.good()) throw CLI::ValidationError("cannot open " + path);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

calc::Variant resolve_variant(const std::string& flag, const std::string& src,
                              const std::string& path) {
  if (!flag.empty()) {
    auto v = calc::variant_from_string(flag);
    if (!v) throw CLI::ValidationError("unknown variant: " + flag);
    return *v;
  }
  if (auto v = calc::pragma_variant(src)) return *v;
  throw CLI::ValidationError(path +
                             ": no --variant flag and no #variant pragma");
}

struct ParsedProgram {
  calc::Variant variant;
  calc::Expr program;
};

// Parses or exits with code 2, printing the structured error.
ParsedProgram load_program(const std::string& path, const std::string& flag,
                           bool asJson) {
  std::string src = slurp(path);
  calc::Variant variant = resolve_variant(flag, src, path);
  auto r = calc::parse(src, variant);
  if (auto* e = std::get_if<calc::Expr>(&r)) return {variant, *e};
  if (auto* pe = std::get_if<calc::ParseError>(&r)) {
    if (asJson) {
      nlohmann::json out = {{"schema", 1},
                            {"ok", false},
                            {"error",
                             {{"kind", "ParseError"},
                              {"line", pe->pos.line},
                              {"col", pe->pos.col},
                              {"message", pe->message},
                              {"expected", pe->expected}}}};
      std::cout << out.dump(2) << "\n";
    } else {
      std::cerr << pe->str() << "\n";
    }
    std::exit(2);
  }
  const auto& ve = std::get<calc::VariantError>(r);
  if (asJson) {
    nlohmann::json out = {{"schema", 1},
                          {"ok", false},
                          {"error",
                           {{"kind", "VariantError"},
                            {"line", ve.pos.line},
                            {"col", ve.pos.col},
                            {"construct", ve.construct},
                            {"variant", calc::to_string(ve.active)}}}};
    std::cout << out.dump(2) << "\n";
  } else {
    std::cerr << ve.str() << "\n";
  }
  std::exit(2);
}

int cmd_check(const std::string& path, const std::string& variantFlag,
              bool asJson) {
  auto [variant, program] = load_program(path, variantFlag, asJson);
  auto tc = calc::typecheck(calc::TypeEnv{}, program, variant);
  if (auto* t = std::get_if<calc::Type>(&tc)) {
    if (asJson) {
      nlohmann::json out = {{"schema", 1}, {"ok", true}, {"type", t->str()}};
      std::cout << out.dump(2) << "\n";
    } else {
      std::cout << t->str() << "\n";
    }
    return 0;
  }
  const auto& err = std::get<calc::TypeError>(tc);
  if (asJson) {
    nlohmann::json out = {{"schema", 1},
                          {"ok", false},
                          {"error",
                           {{"kind", calc::to_string(err.kind)},
                            {"line", err.pos.line},
                            {"col", err.pos.col},
                            {"message", err.message}}}};
    std::cout << out.dump(2) << "\n";
  } else {
    std::cerr << err.str() << "\n";
  }
  return 2;
}

calc::Mutant parse_mutant(const std::string& name) {
  if (name.empty()) return calc::Mutant::None;
  for (auto m : {calc::Mutant::DropPassiveLeakPremise,
                 calc::Mutant::MisdeliverBestowedSend,
                 calc::Mutant::TransferWhileRunning,
                 calc::Mutant::PrivateSendToPublic,
                 calc::Mutant::EndToPublic}) {
    if (calc::to_string(m) == name) return m;
  }
  throw CLI::ValidationError("unknown mutant: " + name);
}

calc::Schedule parse_schedule(const std::string& spec) {
  calc::Schedule s;
  if (spec == "fifo" || spec.empty()) {
    s.kind = calc::ScheduleKind::Fifo;
    return s;
  }
  if (spec.rfind("random:", 0) == 0) {
    s.kind = calc::ScheduleKind::Random;
    s.seed = std::stoull(spec.substr(7));
    return s;
  }
  if (spec.rfind("script:", 0) == 0) {
    s.kind = calc::ScheduleKind::Script;
    std::ifstream in(spec.substr(7));
    if (!in.good()) {
      throw CLI::ValidationError("cannot open schedule script " +
                                 spec.substr(7));
    }
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty() || line[0] == '#') continue;
      auto l = calc::label_from_string(line);
      if (!l) throw CLI::ValidationError("bad label in script: " + line);
      s.script.push_back(*l);
    }
    return s;
  }
  throw CLI::ValidationError(
      "schedule must be fifo, random:<seed> or script:<file>");
}

int cmd_run(const std::string& path, const std::string& variantFlag,
            const std::string& scheduleSpec, int maxSteps, bool wfEveryStep,
            const std::string& mutantName, bool asJson) {
  auto [variant, program] = load_program(path, variantFlag, asJson);
  calc::Mutant mutant = parse_mutant(mutantName);
  calc::TypecheckOptions tco{mutant == calc::Mutant::DropPassiveLeakPremise};
  auto tc = calc::typecheck(calc::TypeEnv{}, program, variant, tco);
  if (auto* err = std::get_if<calc::TypeError>(&tc)) {
    std::cerr << err->str() << "\n";
    return 2;
  }
  calc::Schedule schedule = parse_schedule(scheduleSpec);
  auto res = calc::run_program(program, variant, schedule, maxSteps,
                               wfEveryStep, mutant);
  if (asJson) {
    std::cout << calc::to_json(res).dump(2) << "\n";
  } else {
    for (const auto& s : res.trace.steps) {
      std::cout << calc::label_str(s.label) << "\n";
    }
    const calc::Config& last = res.trace.steps.empty()
                                   ? res.trace.initial
                                   : res.trace.steps.back().after;
    std::cout << (res.quiescent ? "-- quiescent after " : "-- stopped after ")
              << res.trace.steps.size() << " steps\n"
              << calc::config_str(last);
    if (res.violation) {
      std::cout << "violation (" << res.violation->property
                << "): " << res.violation->detail << "\n";
    }
  }
  return res.violation ? 1 : 0;
}

int cmd_explore(const std::string& path, const std::string& variantFlag,
                int depth, int transferCap, bool canonicalize,
                std::uint64_t stateBudget, const std::string& mutantName,
                bool asJson) {
  auto [variant, program] = load_program(path, variantFlag, asJson);
  calc::ExploreOptions opts;
  opts.depthBound = depth;
  opts.transferCap = transferCap;
  opts.canonicalize = canonicalize;
  opts.stateBudget = stateBudget;
  opts.mutant = parse_mutant(mutantName);
  calc::TypecheckOptions tco{opts.mutant ==
                             calc::Mutant::DropPassiveLeakPremise};
  auto tc = calc::typecheck(calc::TypeEnv{}, program, variant, tco);
  if (auto* err = std::get_if<calc::TypeError>(&tc)) {
    std::cerr << err->str() << "\n";
    return 2;
  }

  auto rep = calc::explore(program, variant, opts);

  // replayable trace artifacts, one label per line, usable as
  // `run --schedule script:<file>`
  int n = 0;
  for (const auto& v : rep.violations) {
    std::string artifact =
        path + ".violation-" + std::to_string(n++) + ".trace";
    std::ofstream out(artifact);
    out << "# property: " << v.property << "\n";
    for (const auto& l : v.trace) out << calc::label_str(l) << "\n";
    if (!asJson) std::cerr << "trace written to " << artifact << "\n";
  }

  if (asJson) {
    std::cout << calc::to_json(rep).dump(2) << "\n";
  } else {
    std::cout << "states visited: " << rep.statesVisited
              << "\nmax depth: " << rep.maxDepth
              << "\ntruncated: " << (rep.truncated ? "yes" : "no") << "\n";
    for (const auto& v : rep.violations) {
      std::cout << "violation (" << v.property << "): " << v.detail
                << "\n  trace:";
      for (const auto& l : v.trace) std::cout << " " << calc::label_str(l);
      std::cout << "\n";
    }
    if (rep.violations.empty()) std::cout << "no violations\n";
  }
  return rep.violations.empty() ? 0 : 1;
}

int cmd_bench(std::uint64_t messages, const std::string& modeName, int runs,
              int batch, unsigned workers, bool asJson, bool noTimestamps) {
  workloads::PingMode mode;
  if (modeName == "direct") mode = workloads::PingMode::Direct;
  else if (modeName == "bestowed") mode = workloads::PingMode::Bestowed;
  else if (modeName == "bestowed-atomic")
    mode = workloads::PingMode::BestowedAtomic;
  else throw CLI::ValidationError("unknown mode: " + modeName);

  auto rep = workloads::bench_ping(messages, mode, runs, batch, workers);
  if (asJson) {
    std::cout << workloads::to_json(rep, !noTimestamps).dump(2) << "\n";
  } else {
    std::cout << modeName << ": " << messages << " messages, " << runs
              << " runs\n";
    for (const auto& r : rep.runs) {
      std::cout << "  " << r.seconds << " s, " << r.envelopes
                << " envelopes\n";
    }
    std::cout << "median: " << rep.median_seconds() << " s ("
              << static_cast<std::uint64_t>(rep.median_throughput())
              << " msg/s)\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"bestow: delegation-based actor calculus and runtime"};
  app.require_subcommand(1);

  std::string file, variantFlag, scheduleSpec = "fifo", mutantName, demoName,
                                 modeName = "direct";
  bool asJson = false, wfEveryStep = false, canonicalize = false,
       deterministic = false, noTimestamps = false;
  int maxSteps = 10000, depth = 60, transferCap = 2, runs = 5, batch = 1000;
  unsigned workers = 2;
  std::uint64_t stateBudget = 4000000, seed = 0, messages = 100000;

  auto* check = app.add_subcommand("check", "typecheck a program");
  check->add_option("file", file)->required();
  check->add_option("--variant", variantFlag, "core|transfer|private");
  check->add_flag("--json", asJson);

  auto* run = app.add_subcommand("run", "execute one schedule");
  run->add_option("file", file)->required();
  run->add_option("--variant", variantFlag);
  run->add_option("--schedule", scheduleSpec,
                  "fifo | random:<seed> | script:<file>");
  run->add_option("--steps", maxSteps, "step bound");
  run->add_flag("--wf-every-step", wfEveryStep,
                "run the well-formedness oracle after every step");
  run->add_option("--mutant", mutantName,
                  "replay traces recorded under a broken rule (testing aid)");
  run->add_flag("--json", asJson);

  auto* explore =
      app.add_subcommand("explore", "exhaustively explore all interleavings");
  explore->add_option("file", file)->required();
  explore->add_option("--variant", variantFlag);
  explore->add_option("--depth", depth, "depth bound");
  explore->add_option("--transfer-cap", transferCap,
                      "max ownership transfers per path");
  explore->add_flag("--canonicalize", canonicalize,
                    "dedupe states up to fresh-name renaming");
  explore->add_option("--state-budget", stateBudget);
  explore->add_option(
      "--mutant", mutantName,
      "explore under a deliberately broken rule (testing aid)");
  explore->add_flag("--wf-every-step", wfEveryStep,
                    "accepted for symmetry with run; exploration always "
                    "checks well-formedness at every state");
  explore->add_flag("--json", asJson);

  auto* demo = app.add_subcommand("demo", "run a case study");
  demo->add_option("name", demoName, "dht | bank | graph")->required();
  demo->add_option("--seed", seed);
  demo->add_flag("--deterministic", deterministic);
  demo->add_flag("--json", asJson);

  auto* bench = app.add_subcommand("bench", "ping benchmark");
  bench->add_option("name", demoName)->required();
  bench->add_option("--messages", messages);
  bench->add_option("--mode", modeName, "direct | bestowed | bestowed-atomic");
  bench->add_option("--runs", runs);
  bench->add_option("--batch", batch);
  bench->add_option("--workers", workers);
  bench->add_flag("--json", asJson);
  bench->add_flag("--no-timestamps", noTimestamps,
                  "omit timing fields from JSON output");

  try {
    app.parse(argc, argv);
    if (check->parsed()) return cmd_check(file, variantFlag, asJson);
    if (run->parsed()) {
      return cmd_run(file, variantFlag, scheduleSpec, maxSteps, wfEveryStep,
                     mutantName, asJson);
    }
    if (explore->parsed()) {
      return cmd_explore(file, variantFlag, depth, transferCap, canonicalize,
                         stateBudget, mutantName, asJson);
    }
    if (demo->parsed()) {
      return tools::run_demo(demoName, seed, deterministic, asJson);
    }
    if (bench->parsed()) {
      if (demoName != "ping") {
        throw CLI::ValidationError("only the ping benchmark exists");
      }
      return cmd_bench(messages, modeName, runs, batch, workers, asJson,
                       noTimestamps);
    }
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  } catch (const CLI::Error& e) {
    std::cerr << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 2;
}
