#pragma once

#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "bestow/syntax.hpp"

// Static semantics: the typing judgment for all three variants.
namespace bst::calc {

// Gamma. Bindings are ordered; lookup returns the innermost one, so shadowing
// through nested lambdas behaves as expected.
class TypeEnv {
 public:
  TypeEnv() = default;

  void bind(std::string name, Type t) {
    bindings_.emplace_back(std::move(name), std::move(t));
  }

  std::optional<Type> lookup(const std::string& name) const {
    for (auto it = bindings_.rbegin(); it != bindings_.rend(); ++it) {
      if (it->first == name) return it->second;
    }
    return std::nullopt;
  }

  bool empty() const { return bindings_.empty(); }
  size_t size() const { return bindings_.size(); }
  const std::vector<std::pair<std::string, Type>>& bindings() const {
    return bindings_;
  }

 private:
  std::vector<std::pair<std::string, Type>> bindings_;
};

enum class TypeErrorKind {
  UnboundVar,
  NotAFunction,
  ArgMismatch,
  ReceiverNotActive,
  PassiveLeak,
  BodyNotUnit,
  BadMutate,
  BadBestow,
};

std::string to_string(TypeErrorKind k);

struct TypeError {
  TypeErrorKind kind;
  SourcePos pos;
  std::string message;
  std::string str() const;
};

using TypecheckResult = std::variant<Type, TypeError>;

// Gamma_alpha: keeps exactly the bindings of active type (c, B(p), T(p)).
TypeEnv active_restriction(const TypeEnv& env);

struct TypecheckOptions {
  // Fault injection for the explorer's mutation suite: disables the e-send
  // premise that message bodies may only reference active bindings/values.
  bool dropPassiveLeakPremise = false;
};

TypecheckResult typecheck(const TypeEnv& env, const Expr& e, Variant variant,
                          const TypecheckOptions& opts = {});

// Dynamic side of the e-send premise: a message body may mention actors,
// bestowed and transferable locations, but never a raw passive location.
// Precondition: v is a Lambda. Returns nullopt when ok.
std::optional<TypeError> validate_message(const Value& v);

}  // namespace bst::calc
