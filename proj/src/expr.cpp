#include "pwave/expr.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>

namespace pwave::expr {

// ---------------------------------------------------------------------------
// Jet arithmetic

Jet::Jet(double basepoint, int order) : base_(basepoint) {
  if (order < 0) throw DimError("jet order must be non-negative");
  coeffs_.assign(static_cast<std::size_t>(order) + 1, 0.0);
}

Jet Jet::constant(double value, double basepoint, int order) {
  Jet j(basepoint, order);
  j.coeffs_[0] = value;
  return j;
}

Jet Jet::variable(double value, int order) {
  Jet j(value, order);
  j.coeffs_[0] = value;
  if (order >= 1) j.coeffs_[1] = 1.0;
  return j;
}

double Jet::derivative(int k) const {
  if (k < 0 || k > order()) throw DimError("derivative order outside jet");
  double fact = 1.0;
  for (int i = 2; i <= k; ++i) fact *= i;
  return fact * coeffs_[static_cast<std::size_t>(k)];
}

namespace {
void check_compatible(const Jet& a, const Jet& b) {
  if (a.order() != b.order() || a.basepoint() != b.basepoint())
    throw DimError("jet operands disagree in order or basepoint");
}
}  // namespace

Jet operator+(const Jet& a, const Jet& b) {
  check_compatible(a, b);
  Jet out(a.basepoint(), a.order());
  for (int k = 0; k <= a.order(); ++k) out[k] = a[k] + b[k];
  return out;
}

Jet operator-(const Jet& a, const Jet& b) {
  check_compatible(a, b);
  Jet out(a.basepoint(), a.order());
  for (int k = 0; k <= a.order(); ++k) out[k] = a[k] - b[k];
  return out;
}

Jet operator-(const Jet& a) {
  Jet out(a.basepoint(), a.order());
  for (int k = 0; k <= a.order(); ++k) out[k] = -a[k];
  return out;
}

Jet operator*(const Jet& a, const Jet& b) {
  check_compatible(a, b);
  Jet out(a.basepoint(), a.order());
  for (int k = 0; k <= a.order(); ++k) {
    double s = 0.0;
    for (int j = 0; j <= k; ++j) s += a[j] * b[k - j];
    out[k] = s;
  }
  return out;
}

Jet operator/(const Jet& a, const Jet& b) {
  check_compatible(a, b);
  if (b[0] == 0.0) throw EvalError("/");
  Jet out(a.basepoint(), a.order());
  for (int k = 0; k <= a.order(); ++k) {
    double s = a[k];
    for (int j = 0; j < k; ++j) s -= out[j] * b[k - j];
    out[k] = s / b[0];
  }
  return out;
}

Jet Jet::pow(int n) const {
  if (n < 0) {
    Jet one = Jet::constant(1.0, base_, order());
    return one / pow(-n);
  }
  Jet acc = Jet::constant(1.0, base_, order());
  Jet base = *this;
  int e = n;
  while (e > 0) {
    if (e & 1) acc = acc * base;
    e >>= 1;
    if (e > 0) base = base * base;
  }
  return acc;
}

Jet exp(const Jet& a) {
  Jet out(a.basepoint(), a.order());
  out[0] = std::exp(a[0]);
  for (int k = 1; k <= a.order(); ++k) {
    double s = 0.0;
    for (int j = 1; j <= k; ++j) s += j * a[j] * out[k - j];
    out[k] = s / k;
  }
  return out;
}

Jet log(const Jet& a) {
  if (!(a[0] > 0.0)) throw EvalError("log");
  Jet out(a.basepoint(), a.order());
  out[0] = std::log(a[0]);
  for (int k = 1; k <= a.order(); ++k) {
    double s = a[k];
    for (int j = 1; j < k; ++j) s -= (static_cast<double>(j) / k) * out[j] * a[k - j];
    out[k] = s / a[0];
  }
  return out;
}

namespace {
void sincos_jets(const Jet& a, Jet& s, Jet& c) {
  s = Jet(a.basepoint(), a.order());
  c = Jet(a.basepoint(), a.order());
  s[0] = std::sin(a[0]);
  c[0] = std::cos(a[0]);
  for (int k = 1; k <= a.order(); ++k) {
    double ds = 0.0, dc = 0.0;
    for (int j = 1; j <= k; ++j) {
      ds += j * a[j] * c[k - j];
      dc += j * a[j] * s[k - j];
    }
    s[k] = ds / k;
    c[k] = -dc / k;
  }
}
}  // namespace

Jet sin(const Jet& a) {
  Jet s(a.basepoint(), a.order()), c(a.basepoint(), a.order());
  sincos_jets(a, s, c);
  return s;
}

Jet cos(const Jet& a) {
  Jet s(a.basepoint(), a.order()), c(a.basepoint(), a.order());
  sincos_jets(a, s, c);
  return c;
}

// ---------------------------------------------------------------------------
// Tokenizer shared by the expression and polynomial parsers

namespace {

enum class Tok { Number, Ident, Plus, Minus, Star, Slash, Caret, LParen, RParen, End };

struct Token {
  Tok kind = Tok::End;
  std::size_t offset = 0;
  std::size_t length = 0;
  double number = 0.0;
  std::string text;
};

class Lexer {
 public:
  explicit Lexer(std::string_view src) : src_(src) { advance(); }

  const Token& peek() const { return tok_; }
  Token take() {
    Token t = tok_;
    advance();
    return t;
  }

 private:
  void advance() {
    while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_]))) ++pos_;
    tok_ = Token{};
    tok_.offset = pos_;
    if (pos_ >= src_.size()) {
      tok_.kind = Tok::End;
      return;
    }
    const char c = src_[pos_];
    const auto single = [&](Tok k) {
      tok_.kind = k;
      tok_.length = 1;
      ++pos_;
    };
    switch (c) {
      case '+': single(Tok::Plus); return;
      case '-': single(Tok::Minus); return;
      case '*': single(Tok::Star); return;
      case '/': single(Tok::Slash); return;
      case '^': single(Tok::Caret); return;
      case '(': single(Tok::LParen); return;
      case ')': single(Tok::RParen); return;
      default: break;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
      std::size_t start = pos_;
      while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) ++pos_;
      if (pos_ < src_.size() && src_[pos_] == '.') {
        ++pos_;
        while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) ++pos_;
      }
      if (pos_ < src_.size() && (src_[pos_] == 'e' || src_[pos_] == 'E')) {
        std::size_t mark = pos_;
        ++pos_;
        if (pos_ < src_.size() && (src_[pos_] == '+' || src_[pos_] == '-')) ++pos_;
        if (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) {
          while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) ++pos_;
        } else {
          pos_ = mark;  // the 'e' belongs to something else
        }
      }
      tok_.kind = Tok::Number;
      tok_.length = pos_ - start;
      tok_.text = std::string(src_.substr(start, tok_.length));
      if (tok_.text == ".") throw ParseError("malformed number", start);
      tok_.number = std::strtod(tok_.text.c_str(), nullptr);
      return;
    }
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      std::size_t start = pos_;
      while (pos_ < src_.size() &&
             (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_'))
        ++pos_;
      tok_.kind = Tok::Ident;
      tok_.length = pos_ - start;
      tok_.text = std::string(src_.substr(start, tok_.length));
      return;
    }
    throw ParseError("unexpected character", pos_);
  }

  std::string_view src_;
  std::size_t pos_ = 0;
  Token tok_;
};

// Reads the integer right of '^'; a leading minus is allowed.
int parse_exponent(Lexer& lex) {
  bool negate = false;
  if (lex.peek().kind == Tok::Minus) {
    lex.take();
    negate = true;
  }
  if (lex.peek().kind != Tok::Number)
    throw ParseError("expected integer exponent", lex.peek().offset);
  Token t = lex.take();
  for (char c : t.text)
    if (!std::isdigit(static_cast<unsigned char>(c)))
      throw ParseError("expected integer exponent", t.offset);
  long v = std::strtol(t.text.c_str(), nullptr, 10);
  return static_cast<int>(negate ? -v : v);
}

}  // namespace

// ---------------------------------------------------------------------------
// Expression parser. Precedence: ^ over unary minus over * / over + -.

namespace {

class ExprParser {
 public:
  ExprParser(std::string_view src, std::string_view variable)
      : lex_(src), var_(variable) {}

  std::pair<std::vector<Expr::Node>, int> run() {
    int root = expr();
    if (lex_.peek().kind != Tok::End)
      throw ParseError("unexpected trailing input", lex_.peek().offset);
    return {std::move(nodes_), root};
  }

 private:
  int add(Expr::Node n) {
    nodes_.push_back(n);
    return static_cast<int>(nodes_.size()) - 1;
  }

  int expr() {
    int lhs = term();
    while (lex_.peek().kind == Tok::Plus || lex_.peek().kind == Tok::Minus) {
      Tok k = lex_.take().kind;
      int rhs = term();
      Expr::Node n;
      n.op = k == Tok::Plus ? Expr::Op::Add : Expr::Op::Sub;
      n.a = lhs;
      n.b = rhs;
      lhs = add(n);
    }
    return lhs;
  }

  int term() {
    int lhs = factor();
    while (lex_.peek().kind == Tok::Star || lex_.peek().kind == Tok::Slash) {
      Tok k = lex_.take().kind;
      int rhs = factor();
      Expr::Node n;
      n.op = k == Tok::Star ? Expr::Op::Mul : Expr::Op::Div;
      n.a = lhs;
      n.b = rhs;
      lhs = add(n);
    }
    return lhs;
  }

  int factor() {
    if (lex_.peek().kind == Tok::Minus) {
      lex_.take();
      int inner = factor();
      Expr::Node n;
      n.op = Expr::Op::Neg;
      n.a = inner;
      return add(n);
    }
    int base = atom();
    if (lex_.peek().kind == Tok::Caret) {
      lex_.take();
      int e = parse_exponent(lex_);
      Expr::Node n;
      n.op = Expr::Op::Pow;
      n.exponent = e;
      n.a = base;
      return add(n);
    }
    return base;
  }

  int atom() {
    const Token& t = lex_.peek();
    if (t.kind == Tok::Number) {
      Token tok = lex_.take();
      Expr::Node n;
      n.op = Expr::Op::Const;
      n.value = tok.number;
      return add(n);
    }
    if (t.kind == Tok::LParen) {
      lex_.take();
      int inner = expr();
      if (lex_.peek().kind != Tok::RParen)
        throw ParseError("expected ')'", lex_.peek().offset);
      lex_.take();
      return inner;
    }
    if (t.kind == Tok::Ident) {
      Token tok = lex_.take();
      if (tok.text == var_) {
        Expr::Node n;
        n.op = Expr::Op::Var;
        return add(n);
      }
      Expr::Op fn;
      if (tok.text == "exp") fn = Expr::Op::Exp;
      else if (tok.text == "log") fn = Expr::Op::Log;
      else if (tok.text == "sin") fn = Expr::Op::Sin;
      else if (tok.text == "cos") fn = Expr::Op::Cos;
      else throw ParseError("unknown identifier '" + tok.text + "'", tok.offset);
      if (lex_.peek().kind != Tok::LParen)
        throw ParseError("function application requires parentheses", lex_.peek().offset);
      lex_.take();
      int arg = expr();
      if (lex_.peek().kind != Tok::RParen)
        throw ParseError("expected ')'", lex_.peek().offset);
      lex_.take();
      Expr::Node n;
      n.op = fn;
      n.a = arg;
      return add(n);
    }
    throw ParseError("expected a value", t.offset);
  }

  Lexer lex_;
  std::string var_;
  std::vector<Expr::Node> nodes_;
};

}  // namespace

Expr parse(std::string_view src, std::string_view variable) {
  ExprParser p(src, variable);
  auto [nodes, root] = p.run();
  Expr e;
  e.nodes_ = std::move(nodes);
  e.root_ = root;
  e.var_ = std::string(variable);
  e.source_ = std::string(src);
  return e;
}

Expr Expr::parse_tree(std::string_view src, std::string_view variable) {
  return parse(src, variable);
}

bool Expr::uses_variable() const {
  for (const Node& n : nodes_)
    if (n.op == Op::Var) return true;
  return false;
}

double Expr::eval(double x) const { return at(x, 0).value(); }

Jet Expr::at(double x, int order) const {
  if (nodes_.empty()) throw EvalError("empty expression");
  std::vector<Jet> value(nodes_.size(), Jet(x, order));
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    const Node& n = nodes_[i];
    switch (n.op) {
      case Op::Const:
        value[i] = Jet::constant(n.value, x, order);
        break;
      case Op::Var:
        value[i] = Jet::variable(x, order);
        break;
      case Op::Add:
        value[i] = value[static_cast<std::size_t>(n.a)] + value[static_cast<std::size_t>(n.b)];
        break;
      case Op::Sub:
        value[i] = value[static_cast<std::size_t>(n.a)] - value[static_cast<std::size_t>(n.b)];
        break;
      case Op::Mul:
        value[i] = value[static_cast<std::size_t>(n.a)] * value[static_cast<std::size_t>(n.b)];
        break;
      case Op::Div:
        value[i] = value[static_cast<std::size_t>(n.a)] / value[static_cast<std::size_t>(n.b)];
        break;
      case Op::Neg:
        value[i] = -value[static_cast<std::size_t>(n.a)];
        break;
      case Op::Pow:
        value[i] = value[static_cast<std::size_t>(n.a)].pow(n.exponent);
        break;
      case Op::Exp:
        value[i] = exp(value[static_cast<std::size_t>(n.a)]);
        break;
      case Op::Log:
        value[i] = log(value[static_cast<std::size_t>(n.a)]);
        break;
      case Op::Sin:
        value[i] = sin(value[static_cast<std::size_t>(n.a)]);
        break;
      case Op::Cos:
        value[i] = cos(value[static_cast<std::size_t>(n.a)]);
        break;
    }
  }
  return value[static_cast<std::size_t>(root_)];
}

std::vector<double> jet(const Expr& e, double x0, int order) {
  return e.at(x0, order).coeffs();
}

// ---------------------------------------------------------------------------
// Polynomials

Poly Poly::constant(int nvars, double c) {
  Poly p(nvars);
  if (c != 0.0) p.terms_[std::vector<int>(static_cast<std::size_t>(nvars), 0)] = c;
  return p;
}

Poly Poly::variable(int nvars, int which) {
  if (which < 0 || which >= nvars) throw DimError("polynomial variable out of range");
  Poly p(nvars);
  std::vector<int> e(static_cast<std::size_t>(nvars), 0);
  e[static_cast<std::size_t>(which)] = 1;
  p.terms_[e] = 1.0;
  return p;
}

bool Poly::is_constant() const {
  for (auto& [e, c] : terms_) {
    (void)c;
    for (int k : e)
      if (k != 0) return false;
  }
  return true;
}

double Poly::eval(std::span<const double> x) const {
  if (static_cast<int>(x.size()) < nvars_)
    throw DimError("point has fewer coordinates than polynomial variables");
  double s = 0.0;
  for (auto& [e, c] : terms_) {
    double t = c;
    for (int v = 0; v < nvars_; ++v)
      for (int k = 0; k < e[static_cast<std::size_t>(v)]; ++k) t *= x[static_cast<std::size_t>(v)];
    s += t;
  }
  return s;
}

Poly Poly::partial(int var) const {
  if (var < 0 || var >= nvars_) throw DimError("partial variable out of range");
  Poly out(nvars_);
  for (auto& [e, c] : terms_) {
    const int k = e[static_cast<std::size_t>(var)];
    if (k == 0) continue;
    std::vector<int> d = e;
    d[static_cast<std::size_t>(var)] = k - 1;
    out.terms_[d] += c * k;
  }
  for (auto it = out.terms_.begin(); it != out.terms_.end();)
    it = it->second == 0.0 ? out.terms_.erase(it) : std::next(it);
  return out;
}

int Poly::degree() const {
  int d = 0;
  for (auto& [e, c] : terms_) {
    (void)c;
    int s = 0;
    for (int k : e) s += k;
    d = std::max(d, s);
  }
  return d;
}

Poly& Poly::add_term(std::vector<int> expo, double coeff) {
  if (static_cast<int>(expo.size()) != nvars_) throw DimError("exponent arity mismatch");
  terms_[std::move(expo)] += coeff;
  return *this;
}

namespace {
void prune(std::map<std::vector<int>, double>& terms) {
  for (auto it = terms.begin(); it != terms.end();)
    it = it->second == 0.0 ? terms.erase(it) : std::next(it);
}
}  // namespace

Poly operator+(const Poly& a, const Poly& b) {
  if (a.nvars_ != b.nvars_) throw DimError("polynomial variable counts differ");
  Poly out = a;
  for (auto& [e, c] : b.terms_) out.terms_[e] += c;
  prune(out.terms_);
  return out;
}

Poly operator-(const Poly& a, const Poly& b) {
  if (a.nvars_ != b.nvars_) throw DimError("polynomial variable counts differ");
  Poly out = a;
  for (auto& [e, c] : b.terms_) out.terms_[e] -= c;
  prune(out.terms_);
  return out;
}

Poly operator*(const Poly& a, const Poly& b) {
  if (a.nvars_ != b.nvars_) throw DimError("polynomial variable counts differ");
  Poly out(a.nvars_);
  for (auto& [ea, ca] : a.terms_)
    for (auto& [eb, cb] : b.terms_) {
      std::vector<int> e = ea;
      for (std::size_t v = 0; v < e.size(); ++v) e[v] += eb[v];
      out.terms_[e] += ca * cb;
    }
  prune(out.terms_);
  return out;
}

Poly operator*(double s, const Poly& a) {
  Poly out = a;
  for (auto& [e, c] : out.terms_) {
    (void)e;
    c *= s;
  }
  prune(out.terms_);
  return out;
}

Poly Poly::pow(int n) const {
  if (n < 0) throw DomainError("polynomial powers must be non-negative");
  Poly acc = Poly::constant(nvars_, 1.0);
  Poly base = *this;
  int e = n;
  while (e > 0) {
    if (e & 1) acc = acc * base;
    e >>= 1;
    if (e > 0) base = base * base;
  }
  return acc;
}

// ---------------------------------------------------------------------------
// Polynomial parser

namespace {

class PolyParser {
 public:
  PolyParser(std::string_view src, std::span<const std::string> variables)
      : lex_(src), vars_(variables) {}

  Poly run() {
    Poly p = expr();
    if (lex_.peek().kind != Tok::End)
      throw ParseError("unexpected trailing input", lex_.peek().offset);
    return p;
  }

 private:
  int nv() const { return static_cast<int>(vars_.size()); }

  Poly expr() {
    Poly lhs = term();
    while (lex_.peek().kind == Tok::Plus || lex_.peek().kind == Tok::Minus) {
      Tok k = lex_.take().kind;
      Poly rhs = term();
      lhs = k == Tok::Plus ? lhs + rhs : lhs - rhs;
    }
    return lhs;
  }

  Poly term() {
    Poly lhs = factor();
    while (lex_.peek().kind == Tok::Star || lex_.peek().kind == Tok::Slash) {
      Token op = lex_.take();
      Poly rhs = factor();
      if (op.kind == Tok::Star) {
        lhs = lhs * rhs;
      } else {
        if (!rhs.is_constant())
          throw ParseError("polynomial division only by a constant", op.offset);
        const double c = rhs.eval(std::vector<double>(vars_.size(), 0.0));
        if (c == 0.0) throw EvalError("/");
        lhs = (1.0 / c) * lhs;
      }
    }
    return lhs;
  }

  Poly factor() {
    if (lex_.peek().kind == Tok::Minus) {
      lex_.take();
      return -1.0 * factor();
    }
    Poly base = atom();
    if (lex_.peek().kind == Tok::Caret) {
      Token caret = lex_.take();
      int e = parse_exponent(lex_);
      if (e < 0) throw ParseError("polynomial exponents must be non-negative", caret.offset);
      return base.pow(e);
    }
    return base;
  }

  Poly atom() {
    const Token& t = lex_.peek();
    if (t.kind == Tok::Number) {
      Token tok = lex_.take();
      return Poly::constant(nv(), tok.number);
    }
    if (t.kind == Tok::LParen) {
      lex_.take();
      Poly inner = expr();
      if (lex_.peek().kind != Tok::RParen)
        throw ParseError("expected ')'", lex_.peek().offset);
      lex_.take();
      return inner;
    }
    if (t.kind == Tok::Ident) {
      Token tok = lex_.take();
      for (int v = 0; v < nv(); ++v)
        if (vars_[static_cast<std::size_t>(v)] == tok.text) return Poly::variable(nv(), v);
      if (tok.text == "exp" || tok.text == "log" || tok.text == "sin" || tok.text == "cos")
        throw ParseError("'" + tok.text + "' is not allowed in a polynomial", tok.offset);
      throw ParseError("unknown identifier '" + tok.text + "'", tok.offset);
    }
    throw ParseError("expected a value", t.offset);
  }

  Lexer lex_;
  std::span<const std::string> vars_;
};

}  // namespace

Poly parse_poly(std::string_view src, std::span<const std::string> variables) {
  PolyParser p(src, variables);
  return p.run();
}

}  // namespace pwave::expr
