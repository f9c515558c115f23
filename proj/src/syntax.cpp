#include "bestow/syntax.hpp"

#include <cctype>
#include <sstream>

namespace bst::calc {

std::string to_string(Variant v) {
  switch (v) {
    case Variant::Core:
      return "core";
    case Variant::Transfer:
      return "transfer";
    case Variant::PrivateQueues:
      return "private";
  }
  return "?";
}

std::optional<Variant> variant_from_string(std::string_view s) {
  if (s == "core") return Variant::Core;
  if (s == "transfer") return Variant::Transfer;
  if (s == "private") return Variant::PrivateQueues;
  return std::nullopt;
}

Type Type::arrow(Type dom, Type cod) {
  Type t(Kind::Arrow);
  t.fn_ = std::make_shared<const std::pair<Type, Type>>(std::move(dom),
                                                        std::move(cod));
  return t;
}

bool operator==(const Type& a, const Type& b) {
  if (a.kind_ != b.kind_) return false;
  if (a.kind_ != Type::Kind::Arrow) return true;
  return a.dom() == b.dom() && a.cod() == b.cod();
}

std::string Type::str() const {
  switch (kind_) {
    case Kind::Actor:
      return "c";
    case Kind::Passive:
      return "p";
    case Kind::Bestowed:
      return "B(p)";
    case Kind::Transferable:
      return "T(p)";
    case Kind::Unit:
      return "Unit";
    case Kind::Arrow: {
      std::string lhs = dom().str();
      if (dom().kind() == Kind::Arrow) lhs = "(" + lhs + ")";
      return lhs + " -> " + cod().str();
    }
  }
  return "?";
}

Expr make_var(std::string name, SourcePos pos) {
  return std::make_shared<const ExprNode>(ExprNode{VarE{std::move(name)}, pos});
}
Expr make_app(Expr fn, Expr arg, SourcePos pos) {
  return std::make_shared<const ExprNode>(
      ExprNode{AppE{std::move(fn), std::move(arg)}, pos});
}
Expr make_send(Expr target, Value msg, SourcePos pos) {
  return std::make_shared<const ExprNode>(
      ExprNode{SendE{std::move(target), std::move(msg)}, pos});
}
Expr make_mutate(Expr target, SourcePos pos) {
  return std::make_shared<const ExprNode>(
      ExprNode{MutateE{std::move(target)}, pos});
}
Expr make_new(Type t, SourcePos pos) {
  return std::make_shared<const ExprNode>(ExprNode{NewE{std::move(t)}, pos});
}
Expr make_bestow(Expr inner, SourcePos pos) {
  return std::make_shared<const ExprNode>(
      ExprNode{BestowE{std::move(inner)}, pos});
}
Expr make_atomic(Expr target, SourcePos pos) {
  return std::make_shared<const ExprNode>(
      ExprNode{AtomicE{std::move(target)}, pos});
}
Expr make_release(Expr target, SourcePos pos) {
  return std::make_shared<const ExprNode>(
      ExprNode{ReleaseE{std::move(target)}, pos});
}
Expr make_val(Value v, SourcePos pos) {
  return std::make_shared<const ExprNode>(ExprNode{ValE{std::move(v)}, pos});
}

const ValE* as_value(const Expr& e) { return std::get_if<ValE>(&e->node); }

bool value_equal(const Value& a, const Value& b) {
  if (a.index() != b.index()) return false;
  return std::visit(
      [&](const auto& va) -> bool {
        using T = std::decay_t<decltype(va)>;
        const auto& vb = std::get<T>(b);
        if constexpr (std::is_same_v<T, Lambda>) {
          return va.param == vb.param && va.paramType == vb.paramType &&
                 expr_equal(va.body, vb.body);
        } else if constexpr (std::is_same_v<T, UnitV>) {
          return true;
        } else if constexpr (std::is_same_v<T, ActorIdV>) {
          return va.id == vb.id;
        } else if constexpr (std::is_same_v<T, LocV>) {
          return va.loc == vb.loc;
        } else if constexpr (std::is_same_v<T, BestowedLocV>) {
          return va.loc == vb.loc && va.owner == vb.owner;
        } else {
          static_assert(std::is_same_v<T, TransferableLocV>);
          return va.loc == vb.loc;
        }
      },
      a);
}

bool expr_equal(const Expr& a, const Expr& b) {
  if (a == b) return true;
  if (!a || !b) return false;
  if (a->node.index() != b->node.index()) return false;
  return std::visit(
      [&](const auto& na) -> bool {
        using T = std::decay_t<decltype(na)>;
        const auto& nb = std::get<T>(b->node);
        if constexpr (std::is_same_v<T, VarE>) {
          return na.name == nb.name;
        } else if constexpr (std::is_same_v<T, AppE>) {
          return expr_equal(na.fn, nb.fn) && expr_equal(na.arg, nb.arg);
        } else if constexpr (std::is_same_v<T, SendE>) {
          return expr_equal(na.target, nb.target) &&
                 value_equal(na.msg, nb.msg);
        } else if constexpr (std::is_same_v<T, MutateE>) {
          return expr_equal(na.target, nb.target);
        } else if constexpr (std::is_same_v<T, NewE>) {
          return na.type == nb.type;
        } else if constexpr (std::is_same_v<T, BestowE>) {
          return expr_equal(na.inner, nb.inner);
        } else if constexpr (std::is_same_v<T, AtomicE>) {
          return expr_equal(na.target, nb.target);
        } else if constexpr (std::is_same_v<T, ReleaseE>) {
          return expr_equal(na.target, nb.target);
        } else {
          static_assert(std::is_same_v<T, ValE>);
          return value_equal(na.v, nb.v);
        }
      },
      a->node);
}

// ---------------------------------------------------------------------------
// Lexer
// ---------------------------------------------------------------------------

namespace {

enum class Tok {
  Ident,
  KwFn,
  KwUnit,
  KwNew,
  KwBestow,
  KwAtomic,
  KwRelease,
  LParen,
  RParen,
  Colon,
  FatArrow,
  Arrow,
  Bang,
  DotMutate,  // `.mutate()` lexed as one token
  Eof,
};

struct Token {
  Tok kind;
  std::string text;
  SourcePos pos;
};

struct LexFail {
  SourcePos pos;
  std::string message;
};

class Lexer {
 public:
  explicit Lexer(std::string_view src) : src_(src) {}

  // Returns tokens or a lex failure.
  std::variant<std::vector<Token>, LexFail> run() {
    std::vector<Token> out;
    for (;;) {
      skip_ws_and_comments();
      SourcePos pos = pos_;
      if (eof()) {
        out.push_back({Tok::Eof, "", pos});
        return out;
      }
      char ch = peek();
      if (std::isalpha(static_cast<unsigned char>(ch)) || ch == '_') {
        std::string id;
        while (!eof() && (std::isalnum(static_cast<unsigned char>(peek())) ||
                          peek() == '_')) {
          id.push_back(advance());
        }
        Tok k = Tok::Ident;
        if (id == "fn") k = Tok::KwFn;
        else if (id == "unit") k = Tok::KwUnit;
        else if (id == "new") k = Tok::KwNew;
        else if (id == "bestow") k = Tok::KwBestow;
        else if (id == "atomic") k = Tok::KwAtomic;
        else if (id == "release") k = Tok::KwRelease;
        out.push_back({k, std::move(id), pos});
        continue;
      }
      switch (ch) {
        case '(':
          advance();
          out.push_back({Tok::LParen, "(", pos});
          break;
        case ')':
          advance();
          out.push_back({Tok::RParen, ")", pos});
          break;
        case ':':
          advance();
          out.push_back({Tok::Colon, ":", pos});
          break;
        case '!':
          advance();
          out.push_back({Tok::Bang, "!", pos});
          break;
        case '=':
          advance();
          if (!eof() && peek() == '>') {
            advance();
            out.push_back({Tok::FatArrow, "=>", pos});
          } else {
            return LexFail{pos, "expected '=>' after '='"};
          }
          break;
        case '-':
          advance();
          if (!eof() && peek() == '>') {
            advance();
            out.push_back({Tok::Arrow, "->", pos});
          } else {
            return LexFail{pos, "stray '-' (comments are '--', arrows '->')"};
          }
          break;
        case '.': {
          advance();
          std::string word;
          while (!eof() && std::isalpha(static_cast<unsigned char>(peek()))) {
            word.push_back(advance());
          }
          if (word != "mutate") {
            return LexFail{pos, "only '.mutate()' is supported after '.'"};
          }
          if (eof() || advance() != '(') {
            return LexFail{pos, "expected '(' in '.mutate()'"};
          }
          if (eof() || advance() != ')') {
            return LexFail{pos, "expected ')' in '.mutate()'"};
          }
          out.push_back({Tok::DotMutate, ".mutate()", pos});
          break;
        }
        default:
          return LexFail{pos, std::string("unexpected character '") + ch + "'"};
      }
    }
  }

 private:
  bool eof() const { return i_ >= src_.size(); }
  char peek() const { return src_[i_]; }
  char advance() {
    char c = src_[i_++];
    if (c == '\n') {
      pos_.line++;
      pos_.col = 1;
    } else {
      pos_.col++;
    }
    return c;
  }

  void skip_ws_and_comments() {
    for (;;) {
      while (!eof() && std::isspace(static_cast<unsigned char>(peek()))) {
        advance();
      }
      if (!eof() && peek() == '-' && i_ + 1 < src_.size() &&
          src_[i_ + 1] == '-') {
        while (!eof() && peek() != '\n') advance();
        continue;
      }
      // a '#variant ...' pragma line is stripped before lexing; any other
      // '#' is an error handled by the main loop
      return;
    }
  }

  std::string_view src_;
  size_t i_ = 0;
  SourcePos pos_{1, 1};
};

// ---------------------------------------------------------------------------
// Parser
//
//   expr     := ('bestow' | 'atomic' | 'release') expr | app
//   app      := send send*                (left associative)
//   send     := postfix ('!' msgval)*
//   postfix  := atom ('.mutate()')*
//   atom     := ident | 'unit' | 'new' newtype | lambda | '(' expr ')'
//   lambda   := 'fn' '(' ident ':' type ')' '=>' expr
//   msgval   := 'unit' | lambda | '(' msgval ')'
// ---------------------------------------------------------------------------

struct ParseFail {
  ParseError err;
};
struct VariantFail {
  VariantError err;
};

class Parser {
 public:
  Parser(std::vector<Token> toks, Variant variant)
      : toks_(std::move(toks)), variant_(variant) {}

  ParseResult run() {
    try {
      Expr e = parse_expr();
      expect(Tok::Eof, "end of input");
      return e;
    } catch (ParseFail& f) {
      return f.err;
    } catch (VariantFail& f) {
      return f.err;
    }
  }

 private:
  const Token& cur() const { return toks_[i_]; }
  const Token& advance() { return toks_[i_++]; }
  bool at(Tok k) const { return cur().kind == k; }

  [[noreturn]] void fail(std::string msg, std::vector<std::string> expected) {
    throw ParseFail{ParseError{cur().pos, std::move(msg), std::move(expected)}};
  }

  [[noreturn]] void gated(const std::string& construct) {
    throw VariantFail{VariantError{cur().pos, construct, variant_}};
  }

  void expect(Tok k, const std::string& what) {
    if (!at(k)) fail("expected " + what, {what});
    advance();
  }

  bool starts_atom(Tok k) const {
    return k == Tok::Ident || k == Tok::KwUnit || k == Tok::KwNew ||
           k == Tok::KwFn || k == Tok::LParen;
  }

  Expr parse_expr() {
    if (at(Tok::KwBestow)) {
      // bestow exists in Core and PrivateQueues; the Transfer variant
      // replaces it with objects created transferable
      if (variant_ == Variant::Transfer) gated("bestow");
      SourcePos pos = advance().pos;
      return make_bestow(parse_expr(), pos);
    }
    if (at(Tok::KwAtomic)) {
      if (variant_ != Variant::PrivateQueues) gated("atomic");
      SourcePos pos = advance().pos;
      return make_atomic(parse_expr(), pos);
    }
    if (at(Tok::KwRelease)) {
      if (variant_ != Variant::PrivateQueues) gated("release");
      SourcePos pos = advance().pos;
      return make_release(parse_expr(), pos);
    }
    return parse_app();
  }

  Expr parse_app() {
    Expr e = parse_send();
    while (starts_atom(cur().kind)) {
      SourcePos pos = cur().pos;
      Expr arg = parse_send();
      e = make_app(std::move(e), std::move(arg), pos);
    }
    return e;
  }

  Expr parse_send() {
    Expr e = parse_postfix();
    while (at(Tok::Bang)) {
      SourcePos pos = advance().pos;
      Value v = parse_msgval();
      e = make_send(std::move(e), std::move(v), pos);
    }
    return e;
  }

  Expr parse_postfix() {
    Expr e = parse_atom();
    while (at(Tok::DotMutate)) {
      SourcePos pos = advance().pos;
      e = make_mutate(std::move(e), pos);
    }
    return e;
  }

  Expr parse_atom() {
    SourcePos pos = cur().pos;
    switch (cur().kind) {
      case Tok::Ident: {
        std::string name = advance().text;
        return make_var(std::move(name), pos);
      }
      case Tok::KwUnit:
        advance();
        return make_val(UnitV{}, pos);
      case Tok::KwNew: {
        advance();
        Type t = parse_new_type();
        return make_new(t, pos);
      }
      case Tok::KwFn:
        return make_val(parse_lambda(), pos);
      case Tok::LParen: {
        advance();
        Expr e = parse_expr();
        expect(Tok::RParen, "')'");
        return e;
      }
      default:
        fail("expected an expression",
             {"identifier", "unit", "new", "fn", "("});
    }
  }

  Lambda parse_lambda() {
    expect(Tok::KwFn, "'fn'");
    expect(Tok::LParen, "'('");
    if (!at(Tok::Ident)) fail("expected parameter name", {"identifier"});
    std::string param = advance().text;
    expect(Tok::Colon, "':'");
    Type pt = parse_type();
    expect(Tok::RParen, "')'");
    expect(Tok::FatArrow, "'=>'");
    Expr body = parse_expr();
    return Lambda{std::move(param), pt, std::move(body)};
  }

  Value parse_msgval() {
    if (at(Tok::KwUnit)) {
      advance();
      return UnitV{};
    }
    if (at(Tok::KwFn)) return parse_lambda();
    if (at(Tok::LParen)) {
      advance();
      Value v = parse_msgval();
      expect(Tok::RParen, "')'");
      return v;
    }
    fail("message must be a value (unit or fn)", {"unit", "fn", "("});
  }

  // After `new`: p, c, or T(p) (Transfer only).
  Type parse_new_type() {
    if (at(Tok::Ident)) {
      const std::string& id = cur().text;
      if (id == "p") {
        advance();
        return Type::passive();
      }
      if (id == "c") {
        advance();
        return Type::actor();
      }
      if (id == "T") {
        if (variant_ != Variant::Transfer) gated("new T(p)");
        advance();
        expect(Tok::LParen, "'('");
        if (!at(Tok::Ident) || cur().text != "p")
          fail("transferable types wrap only p", {"p"});
        advance();
        expect(Tok::RParen, "')'");
        return Type::transferable();
      }
    }
    fail("expected allocatable type after 'new'", {"p", "c", "T(p)"});
  }

  Type parse_type() {
    Type lhs = parse_type_atom();
    if (at(Tok::Arrow)) {
      advance();
      Type rhs = parse_type();  // right associative
      return Type::arrow(lhs, rhs);
    }
    return lhs;
  }

  Type parse_type_atom() {
    if (at(Tok::LParen)) {
      advance();
      Type t = parse_type();
      expect(Tok::RParen, "')'");
      return t;
    }
    if (at(Tok::Ident)) {
      const std::string& id = cur().text;
      if (id == "p") {
        advance();
        return Type::passive();
      }
      if (id == "c") {
        advance();
        return Type::actor();
      }
      if (id == "Unit") {
        advance();
        return Type::unit();
      }
      if (id == "B" || id == "T") {
        bool bestowed = id == "B";
        if (bestowed && variant_ == Variant::Transfer) gated("B(p)");
        if (!bestowed && variant_ != Variant::Transfer) gated("T(p)");
        advance();
        expect(Tok::LParen, "'('");
        if (!at(Tok::Ident) || cur().text != "p")
          fail("wrapped type must be p", {"p"});
        advance();
        expect(Tok::RParen, "')'");
        return bestowed ? Type::bestowed() : Type::transferable();
      }
    }
    fail("expected a type", {"p", "c", "B(p)", "T(p)", "Unit", "("});
  }

  std::vector<Token> toks_;
  Variant variant_;
  size_t i_ = 0;
};

}  // namespace

std::string ParseError::str() const {
  std::ostringstream os;
  os << "parse error at " << pos.line << ":" << pos.col << ": " << message;
  if (!expected.empty()) {
    os << " (expected";
    for (const auto& e : expected) os << " " << e;
    os << ")";
  }
  return os.str();
}

std::string VariantError::str() const {
  std::ostringstream os;
  os << "variant error at " << pos.line << ":" << pos.col << ": '" << construct
     << "' is not part of the " << to_string(active) << " variant";
  return os.str();
}

std::optional<Variant> pragma_variant(std::string_view source) {
  constexpr std::string_view kPragma = "#variant";
  if (source.substr(0, kPragma.size()) != kPragma) return std::nullopt;
  size_t i = kPragma.size();
  while (i < source.size() && (source[i] == ' ' || source[i] == '\t')) i++;
  size_t j = i;
  while (j < source.size() && source[j] != '\n' && source[j] != ' ' &&
         source[j] != '\t' && source[j] != '\r') {
    j++;
  }
  return variant_from_string(source.substr(i, j - i));
}

ParseResult parse(std::string_view source, Variant variant) {
  // Strip a leading pragma line; the caller resolves which variant wins.
  if (source.substr(0, 1) == "#") {
    size_t nl = source.find('\n');
    std::string blanked(source.substr(0, nl == std::string_view::npos
                                             ? source.size()
                                             : nl));
    for (auto& c : blanked) c = ' ';
    std::string rest = nl == std::string_view::npos
                           ? blanked
                           : blanked + std::string(source.substr(nl));
    Lexer lex(rest);
    auto toks = lex.run();
    if (auto* f = std::get_if<LexFail>(&toks)) {
      return ParseError{f->pos, f->message, {}};
    }
    return Parser(std::move(std::get<std::vector<Token>>(toks)), variant)
        .run();
  }
  Lexer lex(source);
  auto toks = lex.run();
  if (auto* f = std::get_if<LexFail>(&toks)) {
    return ParseError{f->pos, f->message, {}};
  }
  return Parser(std::move(std::get<std::vector<Token>>(toks)), variant).run();
}

// ---------------------------------------------------------------------------
// Printer
//
// Levels mirror the grammar: 0 expr, 1 app, 2 send, 3 postfix, 4 atom.
// A node printed at a level tighter than its own gets parenthesized, which
// guarantees pretty . parse is the identity on parseable ASTs.
// ---------------------------------------------------------------------------

namespace {

void print_expr(std::ostream& os, const Expr& e, int level);

void print_value(std::ostream& os, const Value& v, int level) {
  std::visit(
      [&](const auto& a) {
        using T = std::decay_t<decltype(a)>;
        if constexpr (std::is_same_v<T, Lambda>) {
          bool paren = level > 0;
          if (paren) os << "(";
          os << "fn (" << a.param << " : " << a.paramType.str() << ") => ";
          print_expr(os, a.body, 0);
          if (paren) os << ")";
        } else if constexpr (std::is_same_v<T, UnitV>) {
          os << "unit";
        } else if constexpr (std::is_same_v<T, ActorIdV>) {
          os << "@a" << a.id;
        } else if constexpr (std::is_same_v<T, LocV>) {
          os << "#l" << a.loc;
        } else if constexpr (std::is_same_v<T, BestowedLocV>) {
          os << "#l" << a.loc << "@a" << a.owner;
        } else {
          static_assert(std::is_same_v<T, TransferableLocV>);
          os << "#l" << a.loc << "*";
        }
      },
      v);
}

void print_expr(std::ostream& os, const Expr& e, int level) {
  std::visit(
      [&](const auto& n) {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, VarE>) {
          os << n.name;
        } else if constexpr (std::is_same_v<T, AppE>) {
          bool paren = level > 1;
          if (paren) os << "(";
          print_expr(os, n.fn, 1);
          os << " ";
          print_expr(os, n.arg, 2);
          if (paren) os << ")";
        } else if constexpr (std::is_same_v<T, SendE>) {
          bool paren = level > 2;
          if (paren) os << "(";
          print_expr(os, n.target, 3);
          os << " ! ";
          // unit needs no parens in message position; lambdas do
          if (std::holds_alternative<UnitV>(n.msg)) {
            os << "unit";
          } else {
            print_value(os, n.msg, 4);
          }
          if (paren) os << ")";
        } else if constexpr (std::is_same_v<T, MutateE>) {
          print_expr(os, n.target, 4);
          os << ".mutate()";
        } else if constexpr (std::is_same_v<T, NewE>) {
          using K = Type::Kind;
          K k = n.type.kind();
          if (k != K::Passive && k != K::Actor && k != K::Transferable) {
            throw InternalError("new is only printable at p, c, or T(p): " +
                                n.type.str());
          }
          os << "new " << n.type.str();  // atoms never need parens
        } else if constexpr (std::is_same_v<T, BestowE>) {
          bool paren = level > 0;
          if (paren) os << "(";
          os << "bestow ";
          print_expr(os, n.inner, 0);
          if (paren) os << ")";
        } else if constexpr (std::is_same_v<T, AtomicE>) {
          bool paren = level > 0;
          if (paren) os << "(";
          os << "atomic ";
          print_expr(os, n.target, 0);
          if (paren) os << ")";
        } else if constexpr (std::is_same_v<T, ReleaseE>) {
          bool paren = level > 0;
          if (paren) os << "(";
          os << "release ";
          print_expr(os, n.target, 0);
          if (paren) os << ")";
        } else {
          static_assert(std::is_same_v<T, ValE>);
          print_value(os, n.v, level);
        }
      },
      e->node);
}

}  // namespace

std::string pretty(const Expr& e) {
  std::ostringstream os;
  print_expr(os, e, 0);
  return os.str();
}

std::string pretty(const Value& v) {
  std::ostringstream os;
  print_value(os, v, 0);
  return os.str();
}

}  // namespace bst::calc
