#include "clips_lexer.hpp"

#include <cctype>
#include <charconv>
#include <cstring>

namespace sif::clips::detail {
namespace {

bool is_delimiter(char c) {
  return c == ' ' || c == '\t' || c == '\r' || c == '\n' || c == '\f' || c == '(' || c == ')' ||
         c == '"' || c == ';' || c == '&' || c == '|' || c == '~';
}

// Numbers must consume the whole atom; "1.2.3.4" stays a symbol.
bool classify_number(const std::string& atom, Token& token) {
  const char* first = atom.data();
  const char* last = atom.data() + atom.size();
  if (first != last && *first == '+') ++first;
  if (first == last) return false;
  bool floating = atom.find_first_of(".eE") != std::string::npos;
  if (!floating) {
    std::int64_t integer = 0;
    auto [ptr, ec] = std::from_chars(first, last, integer);
    if (ec == std::errc() && ptr == last) {
      token.kind = TokenKind::Integer;
      token.value = integer;
      return true;
    }
    return false;
  }
  if (!(std::isdigit(static_cast<unsigned char>(*first)) || *first == '-' || *first == '.')) return false;
  double real = 0;
  auto [ptr, ec] = std::from_chars(first, last, real, std::chars_format::general);
  if (ec == std::errc() && ptr == last) {
    token.kind = TokenKind::Float;
    token.value = real;
    return true;
  }
  return false;
}

}  // namespace

LexResult lex(std::string_view source) {
  LexResult result;
  int line = 1;
  int column = 1;
  std::size_t i = 0;
  auto advance = [&]() {
    if (source[i] == '\n') {
      ++line;
      column = 1;
    } else {
      ++column;
    }
    ++i;
  };

  while (i < source.size()) {
    char c = source[i];
    if (c == ' ' || c == '\t' || c == '\r' || c == '\n' || c == '\f') {
      advance();
      continue;
    }
    if (c == ';') {
      while (i < source.size() && source[i] != '\n') advance();
      continue;
    }
    Token token;
    token.line = line;
    token.column = column;
    if (c == '(' || c == ')') {
      token.kind = c == '(' ? TokenKind::LParen : TokenKind::RParen;
      token.text = std::string(1, c);
      advance();
      result.tokens.push_back(std::move(token));
      continue;
    }
    if (c == '"') {
      advance();
      std::string text;
      bool closed = false;
      while (i < source.size()) {
        char d = source[i];
        if (d == '\\' && i + 1 < source.size()) {
          advance();
          text.push_back(source[i]);
          advance();
          continue;
        }
        if (d == '"') {
          advance();
          closed = true;
          break;
        }
        text.push_back(d);
        advance();
      }
      if (!closed) {
        result.diagnostics.push_back({Severity::Error, DiagnosticCode::UnterminatedString,
                                      "string literal is not terminated", token.line, token.column});
        break;
      }
      token.kind = TokenKind::String;
      token.value = text;
      token.text = std::move(text);
      result.tokens.push_back(std::move(token));
      continue;
    }
    if (c == '&' || c == '|' || c == '~') {
      token.kind = TokenKind::Other;
      token.text = std::string(1, c);
      advance();
      result.tokens.push_back(std::move(token));
      continue;
    }

    std::string atom;
    while (i < source.size() && !is_delimiter(source[i])) {
      atom.push_back(source[i]);
      advance();
    }
    token.text = atom;
    if (atom == "?") {
      token.kind = TokenKind::Wildcard;
    } else if (atom == "$?") {
      token.kind = TokenKind::MultiWildcard;
    } else if (atom.rfind("$?", 0) == 0) {
      token.kind = TokenKind::MultiVariable;
      token.text = atom.substr(2);
    } else if (atom.front() == '?') {
      token.kind = TokenKind::Variable;
      token.text = atom.substr(1);
    } else if (atom == "<-") {
      token.kind = TokenKind::Other;
    } else if (!classify_number(atom, token)) {
      token.kind = TokenKind::Symbol;
      token.value = Symbol{atom};
    }
    result.tokens.push_back(std::move(token));
  }

  Token end;
  end.kind = TokenKind::End;
  end.line = line;
  end.column = column;
  result.tokens.push_back(std::move(end));
  return result;
}

}  // namespace sif::clips::detail
