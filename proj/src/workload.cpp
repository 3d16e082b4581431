#include "faasim/workload.hpp"

#include <cmath>
#include <cstdio>

namespace faasim::load {

using exec::ArgSpec;
using exec::DagSpec;
using exec::FunctionDef;
using exec::Json;
using exec::Request;

Zipf::Zipf(size_t n, double s) : s_(s) {
  cdf_.resize(n);
  double acc = 0.0;
  for (size_t r = 1; r <= n; ++r) {
    acc += 1.0 / std::pow(static_cast<double>(r), s);
    cdf_[r - 1] = acc;
  }
  norm_ = acc;
  for (double& c : cdf_) c /= norm_;
}

size_t Zipf::sample(sim::Rng& rng) const {
  double u = rng.unit();
  auto it = std::lower_bound(cdf_.begin(), cdf_.end(), u);
  if (it == cdf_.end()) return cdf_.size() - 1;
  return static_cast<size_t>(it - cdf_.begin());
}

double Zipf::pmf(size_t rank1) const {
  return 1.0 / std::pow(static_cast<double>(rank1), s_) / norm_;
}

Json ArgTemplate::to_json() const {
  Json j;
  switch (kind) {
    case Kind::kLiteral: j["lit"] = text; break;
    case Kind::kZipfRef: j["zipf"] = true; break;
    case Kind::kFixedRef: j["ref"] = text; break;
    case Kind::kUpstream: j["up"] = true; break;
  }
  return j;
}

ArgTemplate ArgTemplate::from_json(const Json& j) {
  ArgTemplate t;
  if (j.contains("lit")) {
    t.kind = Kind::kLiteral;
    t.text = j["lit"].get<std::string>();
  } else if (j.contains("zipf")) {
    t.kind = Kind::kZipfRef;
  } else if (j.contains("ref")) {
    t.kind = Kind::kFixedRef;
    t.text = j["ref"].get<std::string>();
  } else {
    t.kind = Kind::kUpstream;
  }
  return t;
}

std::string Workload::key_at(size_t idx) const {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%s%05zu", key_prefix.c_str(), idx);
  return buf;
}

Json Workload::to_json() const {
  Json j;
  j["kind"] = kind;
  Json fns = Json::array();
  for (const auto& fn : functions) fns.push_back(fn.to_json());
  j["functions"] = fns;
  Json dag_arr = Json::array();
  for (const auto& dag : dags) dag_arr.push_back(dag.to_json());
  j["dags"] = dag_arr;
  Json args_json;
  for (const auto& [dag, per_fn] : args) {
    Json fn_json;
    for (const auto& [fn, tmpls] : per_fn) {
      Json arr = Json::array();
      for (const auto& t : tmpls) arr.push_back(t.to_json());
      fn_json[fn] = arr;
    }
    args_json[dag] = fn_json;
  }
  j["args"] = args_json;
  j["sink_writes"] = sink_writes;
  j["key_count"] = key_count;
  j["key_prefix"] = key_prefix;
  j["zipf_s"] = zipf_s;
  j["clients"] = clients;
  j["requests_per_client"] = requests_per_client;
  j["think_us"] = think;
  Json phases_json = Json::array();
  for (const auto& p : phases) {
    phases_json.push_back(Json::array({p.from, p.until, p.clients}));
  }
  j["phases"] = phases_json;
  j["users"] = users;
  j["seed_posts"] = seed_posts;
  j["read_fraction"] = read_fraction;
  j["reply_fraction"] = reply_fraction;
  j["actors"] = actors;
  j["convergence_error"] = convergence_error;
  j["prepop_seed"] = prepop_seed;
  return j;
}

Workload Workload::from_json(const Json& j) {
  Workload w;
  w.kind = j.at("kind").get<std::string>();
  for (const auto& fn : j.at("functions")) {
    w.functions.push_back(FunctionDef::from_json(fn));
  }
  for (const auto& dag : j.at("dags")) {
    w.dags.push_back(DagSpec::from_json(dag));
  }
  for (auto it = j.at("args").begin(); it != j.at("args").end(); ++it) {
    for (auto fn_it = it->begin(); fn_it != it->end(); ++fn_it) {
      std::vector<ArgTemplate> tmpls;
      for (const auto& t : *fn_it) tmpls.push_back(ArgTemplate::from_json(t));
      w.args[it.key()][fn_it.key()] = std::move(tmpls);
    }
  }
  w.sink_writes = j.at("sink_writes").get<bool>();
  w.key_count = j.at("key_count").get<size_t>();
  w.key_prefix = j.at("key_prefix").get<std::string>();
  w.zipf_s = j.at("zipf_s").get<double>();
  w.clients = j.at("clients").get<int>();
  w.requests_per_client = j.at("requests_per_client").get<uint64_t>();
  w.think = j.at("think_us").get<sim::Time>();
  for (const auto& p : j.at("phases")) {
    w.phases.push_back(Phase{p.at(0).get<sim::Time>(),
                             p.at(1).get<sim::Time>(), p.at(2).get<int>()});
  }
  w.users = j.at("users").get<int>();
  w.seed_posts = j.at("seed_posts").get<int>();
  w.read_fraction = j.at("read_fraction").get<double>();
  w.reply_fraction = j.at("reply_fraction").get<double>();
  w.actors = j.at("actors").get<int>();
  w.convergence_error = j.at("convergence_error").get<double>();
  w.prepop_seed = j.at("prepop_seed").get<uint64_t>();
  return w;
}

namespace {

// Chain lengths 2..5 weighted to a mean of 3, matching the shape of the
// random-composition benchmark.
size_t draw_chain_length(sim::Rng& rng) {
  double u = rng.unit();
  if (u < 0.30) return 2;
  if (u < 0.75) return 3;
  if (u < 0.95) return 4;
  return 5;
}

Workload random_dags_workload(uint64_t seed) {
  Workload w;
  w.kind = "random_dags";
  w.prepop_seed = sim::derive_seed(seed, "prepop");
  w.key_count = 10000;
  w.zipf_s = 1.0;
  w.clients = 8;
  w.requests_per_client = 50;
  w.sink_writes = true;

  const int pool = 40;
  for (int i = 0; i < pool; ++i) {
    char name[16];
    std::snprintf(name, sizeof(name), "f%02d", i);
    FunctionDef def;
    def.name = name;
    def.body = "(digest (concat (arg 0) (arg 1)))";
    def.service_ms = 1;
    w.functions.push_back(def);
  }

  sim::Rng rng(sim::derive_seed(seed, "dags"));
  for (int d = 0; d < 250; ++d) {
    size_t len = draw_chain_length(rng);
    DagSpec dag;
    char name[16];
    std::snprintf(name, sizeof(name), "dag%03d", d);
    dag.name = name;
    std::set<size_t> used;
    while (dag.functions.size() < len) {
      size_t f = rng.index(pool);
      if (used.insert(f).second) {
        dag.functions.push_back(w.functions[f].name);
      }
    }
    for (size_t i = 0; i + 1 < dag.functions.size(); ++i) {
      dag.edges.emplace_back(dag.functions[i], dag.functions[i + 1]);
    }
    auto& per_fn = w.args[dag.name];
    for (size_t i = 0; i < dag.functions.size(); ++i) {
      if (i == 0) {
        per_fn[dag.functions[i]] = {ArgTemplate{ArgTemplate::Kind::kZipfRef},
                                    ArgTemplate{ArgTemplate::Kind::kZipfRef}};
      } else {
        per_fn[dag.functions[i]] = {ArgTemplate{ArgTemplate::Kind::kUpstream},
                                    ArgTemplate{ArgTemplate::Kind::kZipfRef}};
      }
    }
    w.dags.push_back(dag);
  }
  return w;
}

Workload zipf_rw_workload(uint64_t seed) {
  Workload w;
  w.kind = "zipf_rw";
  w.prepop_seed = sim::derive_seed(seed, "prepop");
  w.key_count = 10000;
  w.zipf_s = 1.0;
  w.clients = 8;
  w.requests_per_client = 50;
  w.sink_writes = true;

  FunctionDef def;
  def.name = "sleepfn";
  def.body = "(digest (concat (arg 0) (arg 1)))";
  def.service_ms = 50;
  w.functions.push_back(def);

  DagSpec dag;
  dag.name = "zipfrw";
  dag.functions = {"sleepfn"};
  w.args[dag.name]["sleepfn"] = {ArgTemplate{ArgTemplate::Kind::kZipfRef},
                                 ArgTemplate{ArgTemplate::Kind::kZipfRef}};
  w.dags.push_back(dag);
  return w;
}

Workload retwis_workload(uint64_t seed) {
  Workload w;
  w.kind = "retwis";
  w.prepop_seed = sim::derive_seed(seed, "prepop");
  w.key_count = 0;  // keys come from the social graph
  w.zipf_s = 1.5;
  w.clients = 10;
  w.requests_per_client = 100;
  w.users = 50;
  w.seed_posts = 500;
  w.read_fraction = 0.9;
  w.reply_fraction = 0.5;

  FunctionDef timeline;
  timeline.name = "get_timeline";
  timeline.body = "(kmget (flatten (kmget (kget (arg 0)))))";
  timeline.service_ms = 1;
  FunctionDef post;
  post.name = "post_tweet";
  post.body =
      "(begin (kput (arg 1) (list (arg 2))) "
      "(kput (arg 0) (append (kget_or (arg 0) (list)) (arg 1))))";
  post.service_ms = 1;
  FunctionDef reply;
  reply.name = "post_reply";
  reply.body = "(kput (arg 0) (append (kget_or (arg 0) (list)) (arg 1)))";
  reply.service_ms = 1;
  w.functions = {timeline, post, reply};

  for (const auto& fn : w.functions) {
    DagSpec dag;
    dag.name = fn.name;
    dag.functions = {fn.name};
    w.dags.push_back(dag);
  }
  return w;
}

Workload step_load_workload(uint64_t seed) {
  Workload w = zipf_rw_workload(seed);
  w.kind = "step_load";
  w.key_count = 1000;
  w.requests_per_client = 1000000;  // bounded by the phase window
  w.phases = {
      Phase{0, 300 * sim::kSecond, 2},
      Phase{60 * sim::kSecond, 180 * sim::kSecond, 6},
  };
  return w;
}

Workload gossip_workload(uint64_t seed) {
  Workload w;
  w.kind = "gossip";
  w.prepop_seed = sim::derive_seed(seed, "prepop");
  w.actors = 10;
  w.clients = 0;
  w.key_count = 0;
  return w;
}

struct RetwisPrepop {
  std::map<std::string, dsl::Value> keys;
  std::vector<std::string> threads;
};

RetwisPrepop retwis_prepop(const Workload& w) {
  RetwisPrepop out;
  sim::Rng rng(w.prepop_seed);
  Zipf follow_zipf(static_cast<size_t>(w.users), w.zipf_s);

  std::map<int, dsl::ValueList> posts_of;
  for (int i = 0; i < w.seed_posts; ++i) {
    int author = static_cast<int>(rng.index(w.users));
    bool is_reply = !out.threads.empty() && rng.chance(w.reply_fraction);
    if (is_reply) {
      const std::string& thread =
          out.threads[rng.index(out.threads.size())];
      dsl::Value& v = out.keys.at(thread);
      dsl::ValueList list = v.as_list();
      list.push_back(dsl::Value{"re:" + std::to_string(i)});
      v = dsl::Value{std::move(list)};
    } else {
      std::string thread = "th:" + std::to_string(i);
      out.keys[thread] = dsl::Value{dsl::ValueList{
          dsl::Value{"post:" + std::to_string(i)}}};
      out.threads.push_back(thread);
      posts_of[author].push_back(dsl::Value{thread});
    }
  }
  for (int u = 0; u < w.users; ++u) {
    out.keys["posts:u" + std::to_string(u)] =
        dsl::Value{posts_of.contains(u) ? posts_of[u] : dsl::ValueList{}};
    std::set<size_t> follows;
    while (follows.size() < 5 && follows.size() + 1 <
                                     static_cast<size_t>(w.users)) {
      size_t v = follow_zipf.sample(rng);
      if (static_cast<int>(v) != u) follows.insert(v);
    }
    dsl::ValueList list;
    for (size_t v : follows) {
      list.push_back(dsl::Value{"posts:u" + std::to_string(v)});
    }
    out.keys["follows:u" + std::to_string(u)] = dsl::Value{std::move(list)};
  }
  return out;
}

}  // namespace

Workload generate_workload(const std::string& kind, uint64_t seed) {
  if (kind == "random_dags") return random_dags_workload(seed);
  if (kind == "zipf_rw") return zipf_rw_workload(seed);
  if (kind == "retwis") return retwis_workload(seed);
  if (kind == "step_load") return step_load_workload(seed);
  if (kind == "gossip") return gossip_workload(seed);
  throw std::invalid_argument("UnknownKind: " + kind);
}

cluster::ClientSim::Factory make_factory(const Workload& workload,
                                         uint64_t seed, int client_index,
                                         uint64_t max_requests) {
  auto rng = std::make_shared<sim::Rng>(
      sim::derive_seed(seed, "client/" + std::to_string(client_index)));
  auto zipf = std::make_shared<Zipf>(
      workload.key_count == 0 ? 1 : workload.key_count, workload.zipf_s);
  auto w = std::make_shared<Workload>(workload);
  auto own_threads = std::make_shared<std::vector<std::string>>();
  auto thread_pool = std::make_shared<std::vector<std::string>>();
  if (workload.kind == "retwis") {
    *thread_pool = retwis_prepop(workload).threads;
  }
  std::string tag = "c" + std::to_string(client_index);

  return [w, rng, zipf, own_threads, thread_pool, tag,
          max_requests](uint64_t idx) -> std::optional<Request> {
    if (idx >= max_requests) return std::nullopt;
    Request r;
    r.request_id = tag + ":r" + std::to_string(idx);

    if (w->kind == "retwis") {
      double u = rng->unit();
      if (u < w->read_fraction) {
        int user = static_cast<int>(rng->index(w->users));
        r.dag = "get_timeline";
        r.args["get_timeline"] = {
            ArgSpec::literal(dsl::Value{"follows:u" + std::to_string(user)}
                                 .encode())};
        return r;
      }
      bool is_reply =
          (!thread_pool->empty() || !own_threads->empty()) &&
          rng->chance(w->reply_fraction);
      if (is_reply) {
        std::vector<std::string>* pool =
            own_threads->empty() || rng->chance(0.5) ? thread_pool.get()
                                                     : own_threads.get();
        if (pool->empty()) pool = thread_pool.get();
        const std::string& thread = (*pool)[rng->index(pool->size())];
        r.dag = "post_reply";
        // The reply body reads and rewrites the thread key.
        r.args["post_reply"] = {
            ArgSpec::literal(dsl::Value{thread}.encode()),
            ArgSpec::literal(
                dsl::Value{"re:" + tag + ":" + std::to_string(idx)}.encode())};
        return r;
      }
      int user = static_cast<int>(rng->index(w->users));
      std::string thread = "th:" + tag + ":" + std::to_string(idx);
      own_threads->push_back(thread);
      r.dag = "post_tweet";
      r.args["post_tweet"] = {
          ArgSpec::literal(dsl::Value{"posts:u" + std::to_string(user)}
                               .encode()),
          ArgSpec::literal(dsl::Value{thread}.encode()),
          ArgSpec::literal(
              dsl::Value{"post:" + tag + ":" + std::to_string(idx)}.encode())};
      return r;
    }

    // Key-space workloads: pick a dag, instantiate templates.
    const DagSpec& dag = w->dags[w->dags.size() == 1
                                     ? 0
                                     : rng->index(w->dags.size())];
    r.dag = dag.name;
    std::vector<std::string> drawn;
    const auto& per_fn = w->args.at(dag.name);
    for (const auto& fn : dag.functions) {
      std::vector<ArgSpec> specs;
      for (const ArgTemplate& t : per_fn.at(fn)) {
        switch (t.kind) {
          case ArgTemplate::Kind::kLiteral:
            specs.push_back(ArgSpec::literal(t.text));
            break;
          case ArgTemplate::Kind::kFixedRef:
            specs.push_back(ArgSpec::ref(t.text));
            drawn.push_back(t.text);
            break;
          case ArgTemplate::Kind::kZipfRef: {
            std::string key = w->key_at(zipf->sample(*rng));
            specs.push_back(ArgSpec::ref(key));
            drawn.push_back(key);
            break;
          }
          case ArgTemplate::Kind::kUpstream:
            specs.push_back(ArgSpec::upstream());
            break;
        }
      }
      r.args[fn] = std::move(specs);
    }
    if (w->sink_writes && !drawn.empty()) {
      if (w->kind == "zipf_rw" || w->kind == "step_load") {
        r.sink_write_key = w->key_at(zipf->sample(*rng));
      } else {
        r.sink_write_key = drawn[rng->index(drawn.size())];
      }
    }
    return r;
  };
}

void install_workload(cluster::Cluster& cluster, const Workload& workload,
                      std::function<void(bool, std::string)> done) {
  // Preload the key space directly into storage; no trace events.
  for (size_t i = 0; i < workload.key_count; ++i) {
    cluster.preload(workload.key_at(i),
                    dsl::Value{"v" + std::to_string(i)}.encode());
  }
  if (workload.kind == "retwis") {
    RetwisPrepop prepop = retwis_prepop(workload);
    for (const auto& [key, value] : prepop.keys) {
      cluster.preload(key, value.encode());
    }
  }

  sched::Scheduler* s = cluster.scheduler(0);
  auto fns = std::make_shared<std::vector<FunctionDef>>(workload.functions);
  auto dags = std::make_shared<std::vector<DagSpec>>(workload.dags);
  auto step = std::make_shared<std::function<void(size_t, size_t)>>();
  *step = [s, fns, dags, step, done](size_t fi, size_t di) {
    if (fi < fns->size()) {
      s->register_function((*fns)[fi], [step, fi, di, done](bool ok,
                                                            std::string err) {
        if (!ok) {
          done(false, err);
          return;
        }
        (*step)(fi + 1, di);
      });
      return;
    }
    if (di < dags->size()) {
      s->register_dag((*dags)[di], [step, fi, di, done](bool ok,
                                                        std::string err) {
        if (!ok) {
          done(false, err);
          return;
        }
        (*step)(fi, di + 1);
      });
      return;
    }
    done(true, "");
  };
  (*step)(0, 0);
}

}  // namespace faasim::load
