#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "sif/clips.hpp"

namespace sif::clips::detail {

enum class TokenKind {
  LParen,
  RParen,
  Symbol,
  String,
  Integer,
  Float,
  Variable,       // ?name
  MultiVariable,  // $?name
  Wildcard,       // ?
  MultiWildcard,  // $?
  Other,          // & | ~ <- : connectives outside the subset
  End,
};

struct Token {
  TokenKind kind = TokenKind::End;
  std::string text;  // symbol/variable name, unescaped string, or raw number
  Value value;       // for literals
  int line = 1;
  int column = 1;
};

struct LexResult {
  std::vector<Token> tokens;  // always terminated by End
  std::vector<Diagnostic> diagnostics;
};

LexResult lex(std::string_view source);

}  // namespace sif::clips::detail
