#include "faasim/dsl.hpp"

#include <sstream>
#include <stdexcept>

namespace faasim::dsl {

using Json = nlohmann::ordered_json;

int64_t Value::as_int() const {
  if (!is_int()) throw std::runtime_error("dsl: expected int");
  return std::get<int64_t>(v);
}

const std::string& Value::as_str() const {
  if (!is_str()) throw std::runtime_error("dsl: expected string");
  return std::get<std::string>(v);
}

const ValueList& Value::as_list() const {
  if (!is_list()) throw std::runtime_error("dsl: expected list");
  return std::get<ValueList>(v);
}

Json Value::to_json() const {
  if (is_int()) return as_int();
  if (is_str()) return as_str();
  Json arr = Json::array();
  for (const Value& item : as_list()) arr.push_back(item.to_json());
  return arr;
}

Value Value::from_json(const Json& j) {
  if (j.is_number_integer()) return Value{j.get<int64_t>()};
  if (j.is_string()) return Value{j.get<std::string>()};
  if (j.is_array()) {
    ValueList list;
    for (const auto& item : j) list.push_back(from_json(item));
    return Value{std::move(list)};
  }
  throw std::runtime_error("dsl: unsupported value json");
}

std::string Value::encode() const { return to_json().dump(); }

Value Value::decode(const std::string& bytes) {
  return from_json(Json::parse(bytes));
}

namespace {

struct Parser {
  const std::string& src;
  size_t pos = 0;

  void skip_ws() {
    while (pos < src.size() && std::isspace(static_cast<unsigned char>(src[pos]))) {
      ++pos;
    }
  }

  char peek() {
    if (pos >= src.size()) throw std::runtime_error("dsl: unexpected end");
    return src[pos];
  }

  std::string token() {
    size_t start = pos;
    while (pos < src.size() && !std::isspace(static_cast<unsigned char>(src[pos])) &&
           src[pos] != '(' && src[pos] != ')') {
      ++pos;
    }
    return src.substr(start, pos - start);
  }

  std::string string_literal() {
    ++pos;  // opening quote
    std::string out;
    while (true) {
      if (pos >= src.size()) throw std::runtime_error("dsl: unterminated string");
      char c = src[pos++];
      if (c == '"') break;
      if (c == '\\') {
        if (pos >= src.size()) throw std::runtime_error("dsl: bad escape");
        out.push_back(src[pos++]);
      } else {
        out.push_back(c);
      }
    }
    return out;
  }

  ExprPtr expr() {
    skip_ws();
    char c = peek();
    if (c == '"') {
      auto e = std::make_shared<Expr>();
      e->op = "lit";
      e->literal = Value{string_literal()};
      return e;
    }
    if (c == '-' || std::isdigit(static_cast<unsigned char>(c))) {
      auto e = std::make_shared<Expr>();
      e->op = "lit";
      e->literal = Value{static_cast<int64_t>(std::stoll(token()))};
      return e;
    }
    if (c != '(') throw std::runtime_error("dsl: expected expression");
    ++pos;
    skip_ws();
    auto e = std::make_shared<Expr>();
    e->op = token();
    if (e->op.empty()) throw std::runtime_error("dsl: missing operator");
    if (e->op == "arg") {
      skip_ws();
      e->arg_index = static_cast<int>(std::stoll(token()));
    } else {
      while (true) {
        skip_ws();
        if (peek() == ')') break;
        e->children.push_back(expr());
      }
    }
    skip_ws();
    if (peek() != ')') throw std::runtime_error("dsl: expected )");
    ++pos;
    return e;
  }
};

std::string value_to_string(const Value& value) {
  if (value.is_str()) return value.as_str();
  if (value.is_int()) return std::to_string(value.as_int());
  return value.encode();
}

class Evaluation : public std::enable_shared_from_this<Evaluation> {
 public:
  Evaluation(std::vector<Value> args, StoreOps store)
      : args_(std::move(args)), store_(std::move(store)) {}

  void run(const ExprPtr& expr, EvalCallback done) {
    eval_one(expr, [done](bool ok, Value v, std::string err) {
      done(ok, std::move(v), std::move(err));
    });
  }

 private:
  using Cont = std::function<void(bool, Value, std::string)>;

  void eval_one(const ExprPtr& e, Cont k) {
    try {
      if (e->op == "lit") return k(true, e->literal, "");
      if (e->op == "arg") {
        if (e->arg_index < 0 ||
            static_cast<size_t>(e->arg_index) >= args_.size()) {
          return k(false, {}, "arg index out of range");
        }
        return k(true, args_[e->arg_index], "");
      }
      eval_children(e, 0, std::make_shared<ValueList>(), k);
    } catch (const std::exception& ex) {
      k(false, {}, ex.what());
    }
  }

  void eval_children(const ExprPtr& e, size_t i,
                     std::shared_ptr<ValueList> acc, Cont k) {
    if (i == e->children.size()) return apply(e, *acc, k);
    auto self = shared_from_this();
    eval_one(e->children[i],
             [self, e, i, acc, k](bool ok, Value v, std::string err) {
               if (!ok) return k(false, {}, std::move(err));
               acc->push_back(std::move(v));
               self->eval_children(e, i + 1, acc, k);
             });
  }

  void apply(const ExprPtr& e, const ValueList& xs, Cont k) {
    try {
      const std::string& op = e->op;
      if (op == "begin") {
        return k(true, xs.empty() ? Value{} : xs.back(), "");
      }
      if (op == "add") return k(true, Value{xs.at(0).as_int() + xs.at(1).as_int()}, "");
      if (op == "sub") return k(true, Value{xs.at(0).as_int() - xs.at(1).as_int()}, "");
      if (op == "mul") return k(true, Value{xs.at(0).as_int() * xs.at(1).as_int()}, "");
      if (op == "concat") {
        std::string out;
        for (const Value& x : xs) out += value_to_string(x);
        return k(true, Value{out}, "");
      }
      if (op == "str") return k(true, Value{value_to_string(xs.at(0))}, "");
      if (op == "digest") {
        return k(true, Value{digest_hex(value_to_string(xs.at(0)))}, "");
      }
      if (op == "list") return k(true, Value{ValueList(xs)}, "");
      if (op == "append") {
        ValueList list = xs.at(0).as_list();
        list.push_back(xs.at(1));
        return k(true, Value{std::move(list)}, "");
      }
      if (op == "nth") {
        const ValueList& list = xs.at(0).as_list();
        int64_t i = xs.at(1).as_int();
        if (i < 0 || static_cast<size_t>(i) >= list.size()) {
          return k(false, {}, "nth out of range");
        }
        return k(true, list[i], "");
      }
      if (op == "len") {
        if (xs.at(0).is_list()) {
          return k(true, Value{static_cast<int64_t>(xs.at(0).as_list().size())}, "");
        }
        return k(true, Value{static_cast<int64_t>(xs.at(0).as_str().size())}, "");
      }
      if (op == "flatten") {
        ValueList out;
        for (const Value& item : xs.at(0).as_list()) {
          if (item.is_list()) {
            for (const Value& inner : item.as_list()) out.push_back(inner);
          } else {
            out.push_back(item);
          }
        }
        return k(true, Value{std::move(out)}, "");
      }
      if (op == "kget") {
        auto self = shared_from_this();
        store_.kget(value_to_string(xs.at(0)), [k](bool ok, Value v) {
          if (!ok) return k(false, {}, "kget: not found");
          k(true, std::move(v), "");
        });
        return;
      }
      if (op == "kget_or") {
        Value fallback = xs.at(1);
        store_.kget(value_to_string(xs.at(0)),
                    [k, fallback](bool ok, Value v) {
                      k(true, ok ? std::move(v) : fallback, "");
                    });
        return;
      }
      if (op == "kmget") {
        auto keys = std::make_shared<ValueList>(xs.at(0).as_list());
        auto out = std::make_shared<ValueList>();
        mget_step(keys, 0, out, k);
        return;
      }
      if (op == "kput") {
        Value stored = xs.at(1);
        store_.kput(value_to_string(xs.at(0)), stored, [k, stored](bool ok) {
          if (!ok) return k(false, {}, "kput failed");
          k(true, stored, "");
        });
        return;
      }
      k(false, {}, "unknown op: " + op);
    } catch (const std::exception& ex) {
      k(false, {}, ex.what());
    }
  }

  void mget_step(std::shared_ptr<ValueList> keys, size_t i,
                 std::shared_ptr<ValueList> out, Cont k) {
    if (i == keys->size()) return k(true, Value{*out}, "");
    auto self = shared_from_this();
    store_.kget(value_to_string((*keys)[i]),
                [self, keys, i, out, k](bool ok, Value v) {
                  if (!ok) return k(false, {}, "kmget: not found");
                  out->push_back(std::move(v));
                  self->mget_step(keys, i + 1, out, k);
                });
  }

  std::vector<Value> args_;
  StoreOps store_;
};

}  // namespace

ExprPtr parse(const std::string& source) {
  Parser p{source};
  ExprPtr e = p.expr();
  p.skip_ws();
  if (p.pos != source.size()) throw std::runtime_error("dsl: trailing input");
  return e;
}

void eval(const ExprPtr& expr, const std::vector<Value>& args,
          const StoreOps& store, EvalCallback done) {
  auto evaluation = std::make_shared<Evaluation>(args, store);
  evaluation->run(expr, [evaluation, done](bool ok, Value v, std::string err) {
    done(ok, std::move(v), std::move(err));
  });
}

std::string digest_hex(const std::string& input) {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : input) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  std::ostringstream out;
  out << std::hex;
  for (int i = 15; i >= 0; --i) out << ((h >> (i * 4)) & 0xF);
  return out.str();
}

}  // namespace faasim::dsl
