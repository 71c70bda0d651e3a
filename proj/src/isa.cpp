#include "scm/isa.hpp"

#include <cctype>
#include <charconv>
#include <sstream>

namespace scm {
namespace {

struct Token {
  enum class Type { IDENT, NUMBER, COMMA, SEMI, COLON, END };
  Type type = Type::END;
  std::string text;
  int64_t value = 0;
  SourcePos pos;
};

class Lexer {
 public:
  explicit Lexer(std::string_view src) : src_(src) {}

  Token next() {
    skip_ws_and_comments();
    Token tok;
    tok.pos = {line_, col_};
    if (at_end()) {
      tok.type = Token::Type::END;
      return tok;
    }
    char c = src_[i_];
    if (c == ',') {
      advance();
      tok.type = Token::Type::COMMA;
      return tok;
    }
    if (c == ';') {
      advance();
      tok.type = Token::Type::SEMI;
      return tok;
    }
    if (c == ':') {
      advance();
      tok.type = Token::Type::COLON;
      return tok;
    }
    if (std::isalpha(uint8_t(c)) || c == '_') {
      size_t start = i_;
      while (!at_end() && (std::isalnum(uint8_t(src_[i_])) || src_[i_] == '_'))
        advance();
      tok.type = Token::Type::IDENT;
      tok.text = std::string(src_.substr(start, i_ - start));
      return tok;
    }
    if (std::isdigit(uint8_t(c)) || c == '-') {
      size_t start = i_;
      if (c == '-') advance();
      bool hex = false;
      if (!at_end() && src_[i_] == '0' && i_ + 1 < src_.size() &&
          (src_[i_ + 1] == 'x' || src_[i_ + 1] == 'X')) {
        hex = true;
        advance();
        advance();
      }
      size_t digits_start = i_;
      while (!at_end() && (hex ? std::isxdigit(uint8_t(src_[i_]))
                               : std::isdigit(uint8_t(src_[i_]))))
        advance();
      if (digits_start == i_)
        throw parse_error(tok.pos, "malformed numeric literal");
      std::string text(src_.substr(start, i_ - start));
      tok.type = Token::Type::NUMBER;
      tok.text = text;
      bool neg = text[0] == '-';
      std::string_view body = text;
      if (neg) body.remove_prefix(1);
      uint64_t mag = 0;
      int base = 10;
      if (hex) {
        body.remove_prefix(2);
        base = 16;
      }
      auto [p, ec] =
          std::from_chars(body.data(), body.data() + body.size(), mag, base);
      if (ec != std::errc{} || p != body.data() + body.size())
        throw parse_error(tok.pos, "numeric literal out of 64-bit range");
      tok.value = neg ? -int64_t(mag) : int64_t(mag);
      return tok;
    }
    throw parse_error(tok.pos,
                      std::string("unexpected character '") + c + "'");
  }

 private:
  bool at_end() const { return i_ >= src_.size(); }

  void advance() {
    if (src_[i_] == '\n') {
      ++line_;
      col_ = 1;
    } else {
      ++col_;
    }
    ++i_;
  }

  void skip_ws_and_comments() {
    while (!at_end()) {
      char c = src_[i_];
      if (std::isspace(uint8_t(c))) {
        advance();
      } else if (c == '/' && i_ + 1 < src_.size() && src_[i_ + 1] == '/') {
        while (!at_end() && src_[i_] != '\n') advance();
      } else {
        break;
      }
    }
  }

  std::string_view src_;
  size_t i_ = 0;
  int line_ = 1;
  int col_ = 1;
};

class Parser {
 public:
  explicit Parser(std::string_view src) : lex_(src) { shift(); }

  Program parse() {
    Program p;
    std::string pending_label;
    SourcePos pending_pos{};
    while (cur_.type != Token::Type::END) {
      if (cur_.type == Token::Type::IDENT && peek_.type == Token::Type::COLON) {
        if (!pending_label.empty())
          throw parse_error(cur_.pos,
                            "instruction cannot carry more than one label");
        pending_label = cur_.text;
        pending_pos = cur_.pos;
        if (p.labels.count(pending_label))
          throw parse_error(cur_.pos, "duplicate label '" + pending_label + "'");
        shift();  // label
        shift();  // colon
        continue;
      }
      Instruction ins = parse_instruction();
      if (!pending_label.empty()) {
        ins.label = pending_label;
        p.labels[pending_label] = p.instructions.size();
        pending_label.clear();
      }
      p.instructions.push_back(std::move(ins));
    }
    if (!pending_label.empty())
      throw parse_error(pending_pos,
                        "label '" + pending_label + "' has no instruction");
    resolve_branches(p);
    return p;
  }

 private:
  void shift() {
    cur_ = first_ ? lex_.next() : peek_;
    if (first_) first_ = false;
    peek_ = lex_.next();
  }

  Token expect(Token::Type t, const char* what) {
    if (cur_.type != t) throw parse_error(cur_.pos, std::string("expected ") + what);
    Token tok = cur_;
    shift();
    return tok;
  }

  RegisterName parse_register() {
    Token tok = expect(Token::Type::IDENT, "register name");
    RegisterName r;
    std::string_view s = tok.text;
    std::string_view rest;
    if (s.rfind("R64B_", 0) == 0) {
      r.cls = RegClass::BYTES64;
      rest = s.substr(5);
    } else if (s.rfind("R2048L_", 0) == 0) {
      r.cls = RegClass::LINES2048;
      rest = s.substr(7);
    } else {
      throw parse_error(tok.pos, "malformed register name '" + tok.text + "'");
    }
    uint32_t idx = 0;
    auto [p, ec] = std::from_chars(rest.data(), rest.data() + rest.size(), idx);
    if (rest.empty() || ec != std::errc{} || p != rest.data() + rest.size())
      throw parse_error(tok.pos, "malformed register name '" + tok.text + "'");
    r.index = idx;
    return r;
  }

  Instruction parse_instruction() {
    Token op = expect(Token::Type::IDENT, "opcode");
    Instruction ins;
    ins.pos = op.pos;
    if (op.text == "COD" || op.text == "MEMCOD") {
      ins.kind = op.text == "COD" ? InstrKind::COD : InstrKind::MEMCOD;
      Token name = expect(Token::Type::IDENT, "codelet name");
      ins.name = name.text;
      ins.operands.push_back(parse_register());
      while (cur_.type == Token::Type::COMMA) {
        shift();
        ins.operands.push_back(parse_register());
      }
      expect(Token::Type::SEMI, "';'");
      return ins;
    }
    auto ctl = control_op_from_string(op.text);
    if (!ctl) throw parse_error(op.pos, "unknown opcode '" + op.text + "'");
    ins.kind = InstrKind::CONTROL;
    ins.control.op = *ctl;
    switch (*ctl) {
      case ControlOp::LDIMM: {
        ins.control.regs.push_back(parse_register());
        expect(Token::Type::COMMA, "','");
        Token imm = expect(Token::Type::NUMBER, "immediate");
        ins.control.imm = imm.value;
        break;
      }
      case ControlOp::ADD:
      case ControlOp::SUB:
      case ControlOp::MULT:
        for (int i = 0; i < 3; ++i) {
          if (i) expect(Token::Type::COMMA, "','");
          ins.control.regs.push_back(parse_register());
        }
        break;
      case ControlOp::BREQ:
      case ControlOp::BRNE:
      case ControlOp::BRLT: {
        for (int i = 0; i < 2; ++i) {
          if (i) expect(Token::Type::COMMA, "','");
          ins.control.regs.push_back(parse_register());
        }
        expect(Token::Type::COMMA, "','");
        Token lbl = expect(Token::Type::IDENT, "branch target label");
        ins.control.label = lbl.text;
        break;
      }
      case ControlOp::JMPLBL: {
        Token lbl = expect(Token::Type::IDENT, "jump target label");
        ins.control.label = lbl.text;
        break;
      }
      case ControlOp::COMMIT:
        break;
    }
    expect(Token::Type::SEMI, "';'");
    return ins;
  }

  void resolve_branches(Program& p) {
    for (size_t i = 0; i < p.instructions.size(); ++i) {
      Instruction& ins = p.instructions[i];
      if (ins.kind != InstrKind::CONTROL || ins.control.label.empty()) continue;
      auto it = p.labels.find(ins.control.label);
      if (it == p.labels.end())
        throw parse_error(ins.pos,
                          "unresolved label '" + ins.control.label + "'");
      ins.control.target = int64_t(it->second);
    }
  }

  Lexer lex_;
  Token cur_, peek_;
  bool first_ = true;
};

}  // namespace

const char* mnemonic(ControlOp op) {
  switch (op) {
    case ControlOp::LDIMM: return "LDIMM";
    case ControlOp::ADD: return "ADD";
    case ControlOp::SUB: return "SUB";
    case ControlOp::MULT: return "MULT";
    case ControlOp::BREQ: return "BREQ";
    case ControlOp::BRNE: return "BRNE";
    case ControlOp::BRLT: return "BRLT";
    case ControlOp::JMPLBL: return "JMPLBL";
    case ControlOp::COMMIT: return "COMMIT";
  }
  return "?";
}

std::optional<ControlOp> control_op_from_string(std::string_view s) {
  static const std::pair<std::string_view, ControlOp> table[] = {
      {"LDIMM", ControlOp::LDIMM},   {"ADD", ControlOp::ADD},
      {"SUB", ControlOp::SUB},       {"MULT", ControlOp::MULT},
      {"BREQ", ControlOp::BREQ},     {"BRNE", ControlOp::BRNE},
      {"BRLT", ControlOp::BRLT},     {"JMPLBL", ControlOp::JMPLBL},
      {"COMMIT", ControlOp::COMMIT}};
  for (auto& [name, op] : table)
    if (name == s) return op;
  return std::nullopt;
}

Program parse_program(std::string_view text) { return Parser(text).parse(); }

std::string disassemble(const Program& p) {
  std::ostringstream out;
  for (const Instruction& ins : p.instructions) {
    if (!ins.label.empty()) out << ins.label << ": ";
    switch (ins.kind) {
      case InstrKind::COD:
      case InstrKind::MEMCOD:
        out << (ins.kind == InstrKind::COD ? "COD " : "MEMCOD ") << ins.name
            << " ";
        for (size_t i = 0; i < ins.operands.size(); ++i) {
          if (i) out << ", ";
          out << to_string(ins.operands[i]);
        }
        break;
      case InstrKind::CONTROL: {
        const ControlPayload& c = ins.control;
        out << mnemonic(c.op);
        bool first = true;
        for (const RegisterName& r : c.regs) {
          out << (first ? " " : ", ") << to_string(r);
          first = false;
        }
        if (c.op == ControlOp::LDIMM) out << ", " << c.imm;
        if (!c.label.empty()) out << (first ? " " : ", ") << c.label;
        break;
      }
    }
    out << ";\n";
  }
  return out.str();
}

}  // namespace scm
