#pragma once

#include <string>
#include <vector>

#include "ppl/value.hpp"

namespace ppl {

// Fixed registry of total builtin functions. Every builtin returns Null on
// erroneous input (wrong kind, wrong arity, division by zero, index out of
// range) and propagates Null arguments, so expression evaluation never traps.
struct Builtin {
  std::string name;
  int arity;  // -1: variadic
  Value (*fn)(const std::vector<Value>&);
};

int builtin_index(const std::string& name);      // -1 if unknown
const Builtin& builtin_at(int idx);
Value builtin_apply(int idx, const std::vector<Value>& args);
int builtin_count();

// Operator spellings used by the printer ("+", "==", "and", "?:", ...).
bool builtin_is_infix(const std::string& name);

}  // namespace ppl
