#include "bestow/types.hpp"

#include <sstream>

namespace bst::calc {

std::string to_string(TypeErrorKind k) {
  switch (k) {
    case TypeErrorKind::UnboundVar:
      return "UnboundVar";
    case TypeErrorKind::NotAFunction:
      return "NotAFunction";
    case TypeErrorKind::ArgMismatch:
      return "ArgMismatch";
    case TypeErrorKind::ReceiverNotActive:
      return "ReceiverNotActive";
    case TypeErrorKind::PassiveLeak:
      return "PassiveLeak";
    case TypeErrorKind::BodyNotUnit:
      return "BodyNotUnit";
    case TypeErrorKind::BadMutate:
      return "BadMutate";
    case TypeErrorKind::BadBestow:
      return "BadBestow";
  }
  return "?";
}

std::string TypeError::str() const {
  std::ostringstream os;
  os << "type error at " << pos.line << ":" << pos.col << ": "
     << to_string(kind) << ": " << message;
  return os.str();
}

TypeEnv active_restriction(const TypeEnv& env) {
  TypeEnv out;
  for (const auto& [name, t] : env.bindings()) {
    if (t.is_active()) out.bind(name, t);
  }
  return out;
}

namespace {

bool value_contains_loc(const Value& v);

bool expr_contains_loc(const Expr& e) {
  return std::visit(
      [](const auto& n) -> bool {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, VarE>) {
          return false;
        } else if constexpr (std::is_same_v<T, AppE>) {
          return expr_contains_loc(n.fn) || expr_contains_loc(n.arg);
        } else if constexpr (std::is_same_v<T, SendE>) {
          return expr_contains_loc(n.target) || value_contains_loc(n.msg);
        } else if constexpr (std::is_same_v<T, MutateE>) {
          return expr_contains_loc(n.target);
        } else if constexpr (std::is_same_v<T, NewE>) {
          return false;
        } else if constexpr (std::is_same_v<T, BestowE>) {
          return expr_contains_loc(n.inner);
        } else if constexpr (std::is_same_v<T, AtomicE>) {
          return expr_contains_loc(n.target);
        } else if constexpr (std::is_same_v<T, ReleaseE>) {
          return expr_contains_loc(n.target);
        } else {
          static_assert(std::is_same_v<T, ValE>);
          return value_contains_loc(n.v);
        }
      },
      e->node);
}

bool value_contains_loc(const Value& v) {
  if (std::holds_alternative<LocV>(v)) return true;
  if (const auto* lam = std::get_if<Lambda>(&v)) {
    return expr_contains_loc(lam->body);
  }
  return false;
}

class Checker {
 public:
  Checker(Variant variant, const TypecheckOptions& opts)
      : variant_(variant), opts_(opts) {}

  TypecheckResult check(const TypeEnv& env, const Expr& e) {
    return std::visit(
        [&](const auto& n) -> TypecheckResult {
          using T = std::decay_t<decltype(n)>;
          const SourcePos pos = e->pos;
          if constexpr (std::is_same_v<T, VarE>) {
            if (auto t = env.lookup(n.name)) return *t;
            return err(TypeErrorKind::UnboundVar, pos,
                       "unbound variable '" + n.name + "'");
          } else if constexpr (std::is_same_v<T, AppE>) {
            auto tf = check(env, n.fn);
            if (is_err(tf)) return tf;
            auto ta = check(env, n.arg);
            if (is_err(ta)) return ta;
            const Type& f = std::get<Type>(tf);
            if (f.kind() != Type::Kind::Arrow) {
              return err(TypeErrorKind::NotAFunction, pos,
                         "applied expression has type " + f.str());
            }
            if (!(f.dom() == std::get<Type>(ta))) {
              return err(TypeErrorKind::ArgMismatch, pos,
                         "argument has type " + std::get<Type>(ta).str() +
                             ", function expects " + f.dom().str());
            }
            return f.cod();
          } else if constexpr (std::is_same_v<T, SendE>) {
            return check_send(env, n, pos);
          } else if constexpr (std::is_same_v<T, MutateE>) {
            auto tt = check(env, n.target);
            if (is_err(tt)) return tt;
            if (std::get<Type>(tt).kind() != Type::Kind::Passive) {
              return err(TypeErrorKind::BadMutate, pos,
                         "mutate target has type " + std::get<Type>(tt).str() +
                             ", expected p");
            }
            return Type::unit();
          } else if constexpr (std::is_same_v<T, NewE>) {
            return n.type;
          } else if constexpr (std::is_same_v<T, BestowE>) {
            auto ti = check(env, n.inner);
            if (is_err(ti)) return ti;
            if (std::get<Type>(ti).kind() != Type::Kind::Passive) {
              return err(TypeErrorKind::BadBestow, pos,
                         "bestow target has type " + std::get<Type>(ti).str() +
                             ", expected p");
            }
            return Type::bestowed();
          } else if constexpr (std::is_same_v<T, AtomicE> ||
                               std::is_same_v<T, ReleaseE>) {
            auto tt = check(env, n.target);
            if (is_err(tt)) return tt;
            if (!std::get<Type>(tt).is_active()) {
              return err(TypeErrorKind::ReceiverNotActive, pos,
                         "target has type " + std::get<Type>(tt).str() +
                             ", expected an active type");
            }
            return Type::unit();
          } else {
            static_assert(std::is_same_v<T, ValE>);
            return check_value(env, n.v, pos);
          }
        },
        e->node);
  }

  TypecheckResult check_value(const TypeEnv& env, const Value& v,
                              SourcePos /*pos*/) {
    return std::visit(
        [&](const auto& a) -> TypecheckResult {
          using T = std::decay_t<decltype(a)>;
          if constexpr (std::is_same_v<T, Lambda>) {
            TypeEnv inner = env;
            inner.bind(a.param, a.paramType);
            auto tb = check(inner, a.body);
            if (is_err(tb)) return tb;
            return Type::arrow(a.paramType, std::get<Type>(tb));
          } else if constexpr (std::is_same_v<T, UnitV>) {
            return Type::unit();
          } else if constexpr (std::is_same_v<T, ActorIdV>) {
            return Type::actor();
          } else if constexpr (std::is_same_v<T, LocV>) {
            return Type::passive();
          } else if constexpr (std::is_same_v<T, BestowedLocV>) {
            return Type::bestowed();
          } else {
            static_assert(std::is_same_v<T, TransferableLocV>);
            return Type::transferable();
          }
        },
        v);
  }

 private:
  static bool is_err(const TypecheckResult& r) {
    return std::holds_alternative<TypeError>(r);
  }

  static TypecheckResult err(TypeErrorKind k, SourcePos pos, std::string msg) {
    return TypeError{k, pos, std::move(msg)};
  }

  TypecheckResult check_send(const TypeEnv& env, const SendE& n,
                             SourcePos pos) {
    auto tt = check(env, n.target);
    if (is_err(tt)) return tt;
    if (!std::get<Type>(tt).is_active()) {
      return err(TypeErrorKind::ReceiverNotActive, pos,
                 "receiver has type " + std::get<Type>(tt).str() +
                     ", expected an active type");
    }
    const auto* lam = std::get_if<Lambda>(&n.msg);
    if (!lam) {
      return err(TypeErrorKind::ArgMismatch, pos,
                 "message must be an anonymous function");
    }
    if (lam->paramType != Type::passive()) {
      return err(TypeErrorKind::ArgMismatch, pos,
                 "message parameter must have type p, got " +
                     lam->paramType.str());
    }
    if (!opts_.dropPassiveLeakPremise) {
      if (auto leak = validate_message(n.msg)) {
        leak->pos = pos;
        return *leak;
      }
    }
    // The body is typed under Gamma_alpha so passive bindings cannot leak
    // into another actor.
    TypeEnv bodyEnv =
        opts_.dropPassiveLeakPremise ? env : active_restriction(env);
    bodyEnv.bind(lam->param, lam->paramType);
    auto tb = check(bodyEnv, lam->body);
    if (is_err(tb)) {
      TypeError te = std::get<TypeError>(tb);
      if (te.kind == TypeErrorKind::UnboundVar) {
        // Bound in Gamma but restricted away: the program tried to close a
        // message over a non-active binding.
        for (const auto& [bname, bt] : env.bindings()) {
          if (te.message.find("'" + bname + "'") != std::string::npos &&
              !bt.is_active()) {
            return err(TypeErrorKind::PassiveLeak, pos,
                       "message body captures '" + bname + "' of type " +
                           bt.str() + ", which is not active");
          }
        }
      }
      return te;
    }
    if (variant_ == Variant::Transfer &&
        !(std::get<Type>(tb) == Type::unit())) {
      return err(TypeErrorKind::BodyNotUnit, pos,
                 "message body has type " + std::get<Type>(tb).str() +
                     ", the transfer variant requires Unit");
    }
    return Type::unit();
  }

  Variant variant_;
  TypecheckOptions opts_;
};

}  // namespace

std::optional<TypeError> validate_message(const Value& v) {
  const auto* lam = std::get_if<Lambda>(&v);
  if (!lam) return std::nullopt;
  if (expr_contains_loc(lam->body)) {
    return TypeError{TypeErrorKind::PassiveLeak,
                     {},
                     "message body contains a raw passive location"};
  }
  return std::nullopt;
}

TypecheckResult typecheck(const TypeEnv& env, const Expr& e, Variant variant,
                          const TypecheckOptions& opts) {
  return Checker(variant, opts).check(env, e);
}

}  // namespace bst::calc
