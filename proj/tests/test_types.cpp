#include <random>

#include "bestow/semantics.hpp"
#include "bestow/types.hpp"
#include "doctest.h"

using namespace bst::calc;

namespace {

Expr parsed(const std::string& src, Variant v) {
  auto r = parse(src, v);
  auto* e = std::get_if<Expr>(&r);
  REQUIRE_MESSAGE(e != nullptr, "failed to parse: " << src);
  return *e;
}

Type check_ok(const std::string& src, Variant v, TypeEnv env = {}) {
  auto r = typecheck(env, parsed(src, v), v);
  if (auto* err = std::get_if<TypeError>(&r)) FAIL(err->str());
  return std::get<Type>(r);
}

TypeErrorKind check_err(const std::string& src, Variant v, TypeEnv env = {}) {
  auto r = typecheck(env, parsed(src, v), v);
  auto* err = std::get_if<TypeError>(&r);
  REQUIRE_MESSAGE(err != nullptr, "expected a type error for: " << src);
  return err->kind;
}

}  // namespace

TEST_CASE("lookup returns the innermost binding") {
  TypeEnv env;
  env.bind("x", Type::passive());
  env.bind("x", Type::actor());
  CHECK(env.lookup("x") == Type::actor());
  // lambda nesting shadows the same way
  CHECK(check_ok("fn (x : p) => fn (x : c) => x ! (fn (y : p) => unit)",
                 Variant::Core)
            .str() == "p -> c -> Unit");
}

TEST_CASE("active restriction keeps exactly the active bindings") {
  TypeEnv env;
  env.bind("x", Type::passive());
  env.bind("y", Type::actor());
  TypeEnv r = active_restriction(env);
  CHECK(r.size() == 1);
  CHECK(r.lookup("y") == Type::actor());
  CHECK(!r.lookup("x"));

  CHECK(active_restriction(TypeEnv{}).empty());

  TypeEnv env2;
  env2.bind("x", Type::bestowed());
  env2.bind("y", Type::arrow(Type::passive(), Type::unit()));
  TypeEnv r2 = active_restriction(env2);
  CHECK(r2.size() == 1);
  CHECK(r2.lookup("x") == Type::bestowed());
}

TEST_CASE("send with a well-scoped message types to Unit") {
  CHECK(check_ok("(new c) ! (fn (x : p) => x.mutate())", Variant::Core) ==
        Type::unit());
}

TEST_CASE("messages capturing passive bindings are leaks") {
  TypeEnv env;
  env.bind("y", Type::passive());
  CHECK(check_err("(new c) ! (fn (x : p) => y.mutate())", Variant::Core,
                  env) == TypeErrorKind::PassiveLeak);
}

TEST_CASE("messages may capture active bindings") {
  TypeEnv env;
  env.bind("b", Type::bestowed());
  CHECK(check_ok("(new c) ! (fn (x : p) => b ! (fn (z : p) => unit))",
                 Variant::Core, env) == Type::unit());
}

TEST_CASE("receivers must be active") {
  CHECK(check_err("(new p) ! (fn (x : p) => unit)", Variant::Core) ==
        TypeErrorKind::ReceiverNotActive);
}

TEST_CASE("bestow gives B(p)") {
  CHECK(check_ok("bestow (new p)", Variant::Core) == Type::bestowed());
  CHECK(check_err("bestow (new c)", Variant::Core) == TypeErrorKind::BadBestow);
}

TEST_CASE("mutate requires a passive target") {
  CHECK(check_ok("(new p).mutate()", Variant::Core) == Type::unit());
  CHECK(check_err("(new c).mutate()", Variant::Core) ==
        TypeErrorKind::BadMutate);
}

TEST_CASE("application rules") {
  CHECK(check_ok("(fn (x : p) => x.mutate()) (new p)", Variant::Core) ==
        Type::unit());
  CHECK(check_err("unit unit", Variant::Core) == TypeErrorKind::NotAFunction);
  CHECK(check_err("(fn (x : p) => x) unit", Variant::Core) ==
        TypeErrorKind::ArgMismatch);
  CHECK(check_err("nope", Variant::Core) == TypeErrorKind::UnboundVar);
}

TEST_CASE("message must be a lambda over p") {
  CHECK(check_err("(new c) ! unit", Variant::Core) ==
        TypeErrorKind::ArgMismatch);
  CHECK(check_err("(new c) ! (fn (x : c) => unit)", Variant::Core) ==
        TypeErrorKind::ArgMismatch);
}

TEST_CASE("transfer variant demands Unit message bodies") {
  CHECK(check_ok("(new c) ! (fn (x : p) => x.mutate())", Variant::Transfer) ==
        Type::unit());
  // body has type p, not Unit: fine in core, rejected in transfer
  CHECK(check_ok("(new c) ! (fn (x : p) => x)", Variant::Core) == Type::unit());
  CHECK(check_err("(new c) ! (fn (x : p) => x)", Variant::Transfer) ==
        TypeErrorKind::BodyNotUnit);
  CHECK(check_ok("(new T(p)) ! (fn (x : p) => x.mutate())",
                 Variant::Transfer) == Type::unit());
}

TEST_CASE("atomic and release require active targets and give Unit") {
  CHECK(check_ok("atomic (new c)", Variant::PrivateQueues) == Type::unit());
  CHECK(check_ok("release bestow (new p)", Variant::PrivateQueues) ==
        Type::unit());
  CHECK(check_err("atomic (new p)", Variant::PrivateQueues) ==
        TypeErrorKind::ReceiverNotActive);
}

TEST_CASE("runtime values carry their types intrinsically") {
  for (Variant v :
       {Variant::Core, Variant::Transfer, Variant::PrivateQueues}) {
    auto t = [&](Value val) {
      auto r = typecheck(TypeEnv{}, make_val(std::move(val)), v);
      REQUIRE(std::holds_alternative<Type>(r));
      return std::get<Type>(r);
    };
    CHECK(t(LocV{3}) == Type::passive());
    CHECK(t(ActorIdV{1}) == Type::actor());
    CHECK(t(BestowedLocV{3, 1}) == Type::bestowed());
    CHECK(t(TransferableLocV{4}) == Type::transferable());
    CHECK(t(UnitV{}) == Type::unit());
  }
}

TEST_CASE("validate_message flags raw locations in bodies") {
  // fn (x : p) => #l3.mutate()
  Value leaky = Lambda{"x", Type::passive(),
                       make_mutate(make_val(LocV{3}))};
  auto err = validate_message(leaky);
  REQUIRE(err.has_value());
  CHECK(err->kind == TypeErrorKind::PassiveLeak);

  Value fine = Lambda{"x", Type::passive(),
                      make_mutate(make_var("x"))};
  CHECK(!validate_message(fine).has_value());

  // actor ids and bestowed locations are active values and pass
  Value sendy = Lambda{
      "x", Type::passive(),
      make_send(make_val(ActorIdV{1}),
                Lambda{"y", Type::passive(), make_val(UnitV{})})};
  CHECK(!validate_message(sendy).has_value());

  // typecheck routes the same check through e-send
  Expr send = make_send(make_val(ActorIdV{0}), leaky);
  auto r = typecheck(TypeEnv{}, send, Variant::Core);
  REQUIRE(std::holds_alternative<TypeError>(r));
  CHECK(std::get<TypeError>(r).kind == TypeErrorKind::PassiveLeak);
}

// ---------------------------------------------------------------------------
// Substitution lemma, checked on randomly generated small typed terms:
// if  env + {x:t'} |- e : t  and  {} |- v : t'  then  env |- e[v/x] : t.
// ---------------------------------------------------------------------------

namespace {

class TypedGen {
 public:
  TypedGen(std::mt19937_64& rng, Variant variant)
      : rng_(rng), variant_(variant) {}

  // A closed value of the given type (runtime values allowed).
  Value value_of(const Type& t, int depth) {
    switch (t.kind()) {
      case Type::Kind::Unit:
        return UnitV{};
      case Type::Kind::Passive:
        return LocV{static_cast<int>(rng_() % 4)};
      case Type::Kind::Actor:
        return ActorIdV{static_cast<int>(rng_() % 3)};
      case Type::Kind::Bestowed:
        return BestowedLocV{static_cast<int>(rng_() % 4),
                            static_cast<int>(rng_() % 3)};
      case Type::Kind::Transferable:
        return TransferableLocV{static_cast<int>(rng_() % 4)};
      case Type::Kind::Arrow: {
        std::string p = fresh();
        TypeEnv env;
        env.bind(p, t.dom());
        Expr body = expr_of(env, t.cod(), depth - 1);
        return Lambda{p, t.dom(), body};
      }
    }
    return UnitV{};
  }

  // An expression of the given type under env.
  Expr expr_of(const TypeEnv& env, const Type& t, int depth) {
    // use a variable of the right type when available
    std::vector<std::string> candidates;
    for (const auto& [n, bt] : env.bindings()) {
      if (bt == t) candidates.push_back(n);
    }
    if (!candidates.empty() && rng_() % 2) {
      return make_var(candidates[rng_() % candidates.size()]);
    }
    if (depth <= 0) return canonical(env, t);
    switch (rng_() % 3) {
      case 0:
        return canonical(env, t);
      case 1: {  // application producing t
        Type dom = small_type();
        TypeEnv inner = env;
        std::string p = fresh();
        inner.bind(p, dom);
        Expr body = expr_of(inner, t, depth - 1);
        Expr fn = make_val(Lambda{p, dom, body});
        Expr arg = expr_of(env, dom, depth - 1);
        return make_app(fn, arg);
      }
      default:
        if (t == Type::unit()) {
          switch (rng_() % 3) {
            case 0:
              return make_mutate(expr_of(env, Type::passive(), depth - 1));
            case 1: {
              // a send: receiver active, message body closed over actives
              Expr recv = expr_of(env, Type::actor(), depth - 1);
              TypeEnv msgEnv = active_restriction(env);
              std::string p = fresh();
              msgEnv.bind(p, Type::passive());
              Expr body = expr_of(msgEnv, Type::unit(), depth - 1);
              // bodies must not embed raw locations
              if (validate_message(Lambda{p, Type::passive(), body})) {
                return canonical(env, t);
              }
              return make_send(recv, Lambda{p, Type::passive(), body});
            }
            default:
              return canonical(env, t);
          }
        }
        return canonical(env, t);
    }
  }

 private:
  Expr canonical(const TypeEnv& env, const Type& t) {
    switch (t.kind()) {
      case Type::Kind::Unit:
        return make_val(UnitV{});
      case Type::Kind::Passive:
        return make_new(Type::passive());
      case Type::Kind::Actor:
        return make_new(Type::actor());
      case Type::Kind::Bestowed:
        if (variant_ != Variant::Transfer) {
          return make_bestow(make_new(Type::passive()));
        }
        return make_val(value_of(t, 0));
      case Type::Kind::Transferable:
        if (variant_ == Variant::Transfer) {
          return make_new(Type::transferable());
        }
        return make_val(value_of(t, 0));
      case Type::Kind::Arrow:
        return make_val(value_of(t, 1));
    }
    (void)env;
    return make_val(UnitV{});
  }

  Type small_type() {
    switch (rng_() % 4) {
      case 0:
        return Type::unit();
      case 1:
        return Type::passive();
      case 2:
        return Type::actor();
      default:
        return Type::arrow(Type::passive(), Type::unit());
    }
  }

  std::string fresh() { return "v" + std::to_string(counter_++); }

  std::mt19937_64& rng_;
  Variant variant_;
  int counter_ = 0;
};

}  // namespace

TEST_CASE("substitution lemma holds on random typed terms") {
  std::mt19937_64 rng(987654);
  int checked = 0;
  for (int i = 0; i < 400; i++) {
    Variant v = Variant::Core;
    TypedGen gen(rng, v);
    Type varT = [&] {
      switch (rng() % 4) {
        case 0:
          return Type::unit();
        case 1:
          return Type::passive();
        case 2:
          return Type::actor();
        default:
          return Type::bestowed();
      }
    }();
    Type wantT = rng() % 2 ? Type::unit() : varT;

    TypeEnv env;
    env.bind("g", Type::actor());
    TypeEnv withX = env;
    withX.bind("x", varT);

    Expr e = gen.expr_of(withX, wantT, 3);
    auto te = typecheck(withX, e, v);
    REQUIRE(std::holds_alternative<Type>(te));

    Value val = gen.value_of(varT, 2);
    auto tv = typecheck(TypeEnv{}, make_val(val), v);
    REQUIRE(std::holds_alternative<Type>(tv));
    REQUIRE(std::get<Type>(tv) == varT);

    // Message bodies are generated over the active restriction, so a
    // passive x never occurs inside one and substitution stays leak-free.
    Expr substituted = substitute(e, "x", val);
    auto ts = typecheck(env, substituted, v);
    if (std::holds_alternative<TypeError>(ts)) {
      CAPTURE(pretty(e));
      CAPTURE(std::get<TypeError>(ts).str());
    }
    REQUIRE(std::holds_alternative<Type>(ts));
    CHECK(std::get<Type>(ts) == std::get<Type>(te));
    checked++;
  }
  CHECK(checked == 400);
}
