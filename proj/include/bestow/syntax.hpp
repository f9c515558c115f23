#pragma once

#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

// Abstract syntax, parser and printer for the actor calculus.
//
// The calculus comes in three variants that gate which constructs are legal:
//   Core          -- actors, passive objects, bestow
//   Transfer      -- actors, transferable objects (new T(p)), no bestow
//   PrivateQueues -- Core plus atomic/release and private conversations
namespace bst::calc {

enum class Variant { Core, Transfer, PrivateQueues };

std::string to_string(Variant v);
std::optional<Variant> variant_from_string(std::string_view s);

struct SourcePos {
  int line = 0;
  int col = 0;
};

// Types: c | p | B(p) | T(p) | Unit | tau -> tau.
// Bestowed/Transferable wrap only the passive type, so no payload is needed.
class Type {
 public:
  enum class Kind { Actor, Passive, Bestowed, Transferable, Unit, Arrow };

  static Type actor() { return Type(Kind::Actor); }
  static Type passive() { return Type(Kind::Passive); }
  static Type bestowed() { return Type(Kind::Bestowed); }
  static Type transferable() { return Type(Kind::Transferable); }
  static Type unit() { return Type(Kind::Unit); }
  static Type arrow(Type dom, Type cod);

  Kind kind() const { return kind_; }
  const Type& dom() const { return fn_->first; }
  const Type& cod() const { return fn_->second; }

  // Active types are those usable as message receivers: c, B(p), T(p).
  bool is_active() const {
    return kind_ == Kind::Actor || kind_ == Kind::Bestowed ||
           kind_ == Kind::Transferable;
  }

  std::string str() const;

  friend bool operator==(const Type& a, const Type& b);
  friend bool operator!=(const Type& a, const Type& b) { return !(a == b); }

 private:
  explicit Type(Kind k) : kind_(k) {}
  Kind kind_;
  std::shared_ptr<const std::pair<Type, Type>> fn_;
};

struct ExprNode;
using Expr = std::shared_ptr<const ExprNode>;

// Values. Lambda and UnitV can appear in source; the rest arise only during
// evaluation (locations, actor ids, bestowed and transferable locations).
struct Lambda {
  std::string param;
  Type paramType;
  Expr body;
};
struct UnitV {};
struct ActorIdV {
  int id;
};
struct LocV {
  int loc;
};
struct BestowedLocV {
  int loc;
  int owner;
};
struct TransferableLocV {
  int loc;
};
using Value =
    std::variant<Lambda, UnitV, ActorIdV, LocV, BestowedLocV, TransferableLocV>;

struct VarE {
  std::string name;
};
struct AppE {
  Expr fn;
  Expr arg;
};
struct SendE {
  Expr target;
  Value msg;  // grammar is e!v: the message position holds a value
};
struct MutateE {
  Expr target;
};
struct NewE {
  Type type;
};
struct BestowE {
  Expr inner;
};
struct AtomicE {
  Expr target;
};
struct ReleaseE {
  Expr target;
};
struct ValE {
  Value v;
};

struct ExprNode {
  std::variant<VarE, AppE, SendE, MutateE, NewE, BestowE, AtomicE, ReleaseE,
               ValE>
      node;
  SourcePos pos;
};

Expr make_var(std::string name, SourcePos pos = {});
Expr make_app(Expr fn, Expr arg, SourcePos pos = {});
Expr make_send(Expr target, Value msg, SourcePos pos = {});
Expr make_mutate(Expr target, SourcePos pos = {});
Expr make_new(Type t, SourcePos pos = {});
Expr make_bestow(Expr inner, SourcePos pos = {});
Expr make_atomic(Expr target, SourcePos pos = {});
Expr make_release(Expr target, SourcePos pos = {});
Expr make_val(Value v, SourcePos pos = {});

// Structural equality; source positions are ignored.
bool expr_equal(const Expr& a, const Expr& b);
bool value_equal(const Value& a, const Value& b);

const ValE* as_value(const Expr& e);  // nullptr if e is not a value form

struct ParseError {
  SourcePos pos;
  std::string message;
  std::vector<std::string> expected;
  std::string str() const;
};

// A construct that exists in the language but is illegal under the active
// variant (e.g. `atomic` outside PrivateQueues).
struct VariantError {
  SourcePos pos;
  std::string construct;
  Variant active;
  std::string str() const;
};

using ParseResult = std::variant<Expr, ParseError, VariantError>;

ParseResult parse(std::string_view source, Variant variant);

// Reads a `#variant core|transfer|private` pragma from the first line.
std::optional<Variant> pragma_variant(std::string_view source);

// Raised when asked to print an AST the grammar cannot express
// (e.g. New(B(p)) -- only `new p`, `new c`, `new T(p)` parse).
struct InternalError : std::logic_error {
  using std::logic_error::logic_error;
};

std::string pretty(const Expr& e);
std::string pretty(const Value& v);

}  // namespace bst::calc
