#include <random>

#include "bestow/syntax.hpp"
#include "doctest.h"

using namespace bst::calc;

namespace {

Expr parse_ok(const std::string& src, Variant v) {
  auto r = parse(src, v);
  auto* e = std::get_if<Expr>(&r);
  if (!e) {
    if (auto* pe = std::get_if<ParseError>(&r)) FAIL(pe->str());
    if (auto* ve = std::get_if<VariantError>(&r)) FAIL(ve->str());
  }
  REQUIRE(e != nullptr);
  return *e;
}

}  // namespace

TEST_CASE("unit literal parses to the unit value") {
  Expr e = parse_ok("unit", Variant::Core);
  const auto* v = as_value(e);
  REQUIRE(v != nullptr);
  CHECK(std::holds_alternative<UnitV>(v->v));
}

TEST_CASE("bestow (new p) parses under the core variant") {
  Expr e = parse_ok("bestow (new p)", Variant::Core);
  const auto* b = std::get_if<BestowE>(&e->node);
  REQUIRE(b != nullptr);
  const auto* n = std::get_if<NewE>(&b->inner->node);
  REQUIRE(n != nullptr);
  CHECK(n->type == Type::passive());
}

TEST_CASE("atomic is gated by variant") {
  auto r = parse("atomic x", Variant::Core);
  CHECK(std::holds_alternative<VariantError>(r));
  r = parse("atomic x", Variant::PrivateQueues);
  CHECK(std::holds_alternative<Expr>(r));
  r = parse("release x", Variant::Transfer);
  CHECK(std::holds_alternative<VariantError>(r));
}

TEST_CASE("new T(p) only parses in the transfer variant") {
  CHECK(std::holds_alternative<VariantError>(parse("new T(p)", Variant::Core)));
  CHECK(std::holds_alternative<Expr>(parse("new T(p)", Variant::Transfer)));
  CHECK(std::holds_alternative<VariantError>(
      parse("new T(p)", Variant::PrivateQueues)));
}

TEST_CASE("bestow is absent from the transfer variant") {
  CHECK(std::holds_alternative<VariantError>(
      parse("bestow (new p)", Variant::Transfer)));
  // ... but present in the private-queue variant, whose grammar extends core
  CHECK(std::holds_alternative<Expr>(
      parse("bestow (new p)", Variant::PrivateQueues)));
}

TEST_CASE("send binds tighter than application") {
  // f x ! v parses as f (x ! v)
  Expr e = parse_ok("f x ! unit", Variant::Core);
  const auto* app = std::get_if<AppE>(&e->node);
  REQUIRE(app != nullptr);
  CHECK(std::holds_alternative<VarE>(app->fn->node));
  CHECK(std::holds_alternative<SendE>(app->arg->node));
}

TEST_CASE("application is left-associative") {
  Expr e = parse_ok("f g h", Variant::Core);
  const auto* outer = std::get_if<AppE>(&e->node);
  REQUIRE(outer != nullptr);
  const auto* inner = std::get_if<AppE>(&outer->fn->node);
  REQUIRE(inner != nullptr);
  CHECK(std::get<VarE>(inner->fn->node).name == "f");
  CHECK(std::get<VarE>(inner->arg->node).name == "g");
  CHECK(std::get<VarE>(outer->arg->node).name == "h");
}

TEST_CASE("mutate binds tightest") {
  Expr e = parse_ok("bestow x.mutate()", Variant::Core);
  const auto* b = std::get_if<BestowE>(&e->node);
  REQUIRE(b != nullptr);
  CHECK(std::holds_alternative<MutateE>(b->inner->node));
}

TEST_CASE("message position only accepts value literals") {
  auto r = parse("x ! y", Variant::Core);
  auto* pe = std::get_if<ParseError>(&r);
  REQUIRE(pe != nullptr);
  CHECK(pe->expected.size() >= 2);
}

TEST_CASE("parse errors carry positions") {
  auto r = parse("fn (x : p) =>", Variant::Core);
  auto* pe = std::get_if<ParseError>(&r);
  REQUIRE(pe != nullptr);
  CHECK(pe->pos.line == 1);
  CHECK(pe->pos.col > 10);
}

TEST_CASE("line comments and pragma lines are skipped") {
  Expr e = parse_ok("#variant core\n-- a comment\nunit -- trailing\n",
                    Variant::Core);
  CHECK(as_value(e) != nullptr);
  CHECK(pragma_variant("#variant transfer\nnew T(p)") == Variant::Transfer);
  CHECK(pragma_variant("unit") == std::nullopt);
  CHECK(pragma_variant("#variant bogus\nx") == std::nullopt);
}

TEST_CASE("pretty prints the fixed examples") {
  CHECK(pretty(make_val(UnitV{})) == "unit");
  Expr send = make_send(
      make_var("x"),
      Lambda{"y", Type::passive(), make_val(UnitV{})});
  CHECK(pretty(send) == "x ! (fn (y : p) => unit)");
  CHECK(pretty(make_val(LocV{3})) == "#l3");
  CHECK(pretty(make_val(ActorIdV{1})) == "@a1");
}

TEST_CASE("printer refuses unrepresentable allocations") {
  Expr bad = make_new(Type::bestowed());
  CHECK_THROWS_AS(pretty(bad), InternalError);
}

TEST_CASE("runtime-only values never come out of the parser") {
  // locations and actor ids print with sigils the lexer rejects
  CHECK(std::holds_alternative<ParseError>(parse("#l3", Variant::Core)));
  CHECK(std::holds_alternative<ParseError>(parse("@a1", Variant::Core)));
  CHECK(std::holds_alternative<ParseError>(
      parse("x ! (#l3)", Variant::Core)));
}

// ---------------------------------------------------------------------------
// Round-trip property: parse(pretty(e)) is structurally equal to e for random
// parseable ASTs (no runtime-only values).
// ---------------------------------------------------------------------------

namespace {

class AstGen {
 public:
  AstGen(std::mt19937_64& rng, Variant variant) : rng_(rng), variant_(variant) {}

  Expr gen(int depth) {
    int pick = static_cast<int>(rng_() % (depth <= 0 ? 3u : 9u));
    switch (pick) {
      case 0:
        return make_val(UnitV{});
      case 1:
        return make_var(varname());
      case 2:
        return make_new(newable());
      case 3:
        return make_app(gen(depth - 1), gen(depth - 1));
      case 4:
        return make_send(gen(depth - 1), msgval(depth - 1));
      case 5:
        return make_mutate(gen(depth - 1));
      case 6:
        return make_val(lambda(depth - 1));
      case 7:
        if (variant_ != Variant::Transfer) return make_bestow(gen(depth - 1));
        return make_new(newable());
      default:
        if (variant_ == Variant::PrivateQueues) {
          return rng_() % 2 ? make_atomic(gen(depth - 1))
                            : make_release(gen(depth - 1));
        }
        return make_app(gen(depth - 1), gen(depth - 1));
    }
  }

 private:
  std::string varname() {
    static const char* names[] = {"x", "y", "z", "w", "frob"};
    return names[rng_() % 5];
  }

  Type newable() {
    if (variant_ == Variant::Transfer && rng_() % 2) {
      return Type::transferable();
    }
    return rng_() % 2 ? Type::passive() : Type::actor();
  }

  Type type(int depth) {
    switch (rng_() % (depth <= 0 ? 3u : 4u)) {
      case 0:
        return Type::passive();
      case 1:
        return Type::actor();
      case 2:
        return rng_() % 2 ? Type::unit()
                          : (variant_ == Variant::Transfer
                                 ? Type::transferable()
                                 : Type::bestowed());
      default:
        return Type::arrow(type(depth - 1), type(depth - 1));
    }
  }

  Lambda lambda(int depth) {
    return Lambda{varname(), type(2), gen(depth)};
  }

  Value msgval(int depth) {
    if (rng_() % 3 == 0) return UnitV{};
    return lambda(depth);
  }

  std::mt19937_64& rng_;
  Variant variant_;
};

}  // namespace

TEST_CASE("round-trip: pretty then parse is identity") {
  std::mt19937_64 rng(20240817);
  for (Variant v :
       {Variant::Core, Variant::Transfer, Variant::PrivateQueues}) {
    for (int i = 0; i < 400; i++) {
      AstGen gen(rng, v);
      Expr e = gen.gen(4);
      std::string text = pretty(e);
      CAPTURE(text);
      auto r = parse(text, v);
      auto* back = std::get_if<Expr>(&r);
      REQUIRE(back != nullptr);
      CHECK(expr_equal(e, *back));
    }
  }
}
