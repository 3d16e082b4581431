#ifndef FAASIM_DSL_HPP_
#define FAASIM_DSL_HPP_

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"

// Tiny s-expression language for function bodies so workloads can be
// registered from config files. Values are ints, strings and lists; kget
// and kput run through the caller-supplied store hooks, which lets the
// interpreter suspend across simulated KVS round-trips.

namespace faasim::dsl {

struct Value;
using ValueList = std::vector<Value>;

struct Value {
  std::variant<int64_t, std::string, ValueList> v;

  Value() : v(int64_t{0}) {}
  Value(int64_t i) : v(i) {}
  Value(std::string s) : v(std::move(s)) {}
  Value(ValueList l) : v(std::move(l)) {}

  bool is_int() const { return std::holds_alternative<int64_t>(v); }
  bool is_str() const { return std::holds_alternative<std::string>(v); }
  bool is_list() const { return std::holds_alternative<ValueList>(v); }
  int64_t as_int() const;
  const std::string& as_str() const;
  const ValueList& as_list() const;

  bool operator==(const Value&) const = default;

  // Canonical byte form stored in the KVS (compact JSON).
  std::string encode() const;
  static Value decode(const std::string& bytes);

  nlohmann::ordered_json to_json() const;
  static Value from_json(const nlohmann::ordered_json& j);
};

struct Expr {
  std::string op;  // "lit", "arg", or an operator name
  Value literal;
  int arg_index = 0;
  std::vector<std::shared_ptr<Expr>> children;
};

using ExprPtr = std::shared_ptr<Expr>;

ExprPtr parse(const std::string& source);

struct EvalError {
  std::string message;
};

// Store hooks; errors are reported by invoking the continuation's error
// side. kget resolves to NotFound as an error.
struct StoreOps {
  std::function<void(const std::string& key,
                     std::function<void(bool ok, Value)>)>
      kget;
  std::function<void(const std::string& key, const Value&,
                     std::function<void(bool ok)>)>
      kput;
};

using EvalCallback = std::function<void(bool ok, Value, std::string error)>;

// CPS evaluation: the continuation fires once the expression (and any
// store operations it performs) completes.
void eval(const ExprPtr& expr, const std::vector<Value>& args,
          const StoreOps& store, EvalCallback done);

// Deterministic 16-hex-digit digest used by workload string functions.
std::string digest_hex(const std::string& input);

}  // namespace faasim::dsl

#endif  // FAASIM_DSL_HPP_
