#include "ntp/evalharness.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <thread>

#include <json.hpp>

#include "ntp/util.hpp"

namespace ntp::eval {

namespace fs = std::filesystem;

namespace {

struct EpisodeOutcome {
  bool success = false;
  runtime::Termination termination = runtime::Termination::Completed;
  std::string task_key;
};

EpisodeOutcome run_episode(model::NtpModel* m, const tasks::DatasetSplit& split,
                           const EvalOptions& opts, int episode) {
  Rng ep_rng(derive_seed(opts.seed, 2, episode));
  const auto& pool = opts.use_seen ? split.seen : split.unseen;
  if (pool.empty()) throw std::invalid_argument("evaluate: empty task pool");
  tasks::TaskInstance task = pool[ep_rng.uniform_index(pool.size())];
  int lo = opts.use_seen ? split.seen_count_lo : split.unseen_count_lo;
  int hi = opts.use_seen ? split.seen_count_hi : split.unseen_count_hi;
  if (opts.fixed_count > 0) lo = hi = opts.fixed_count;
  task = tasks::instantiate(task, ep_rng, lo, hi);

  uint64_t demo_seed = derive_seed(opts.seed, 3, episode);
  uint64_t env_seed = derive_seed(opts.seed, 4, episode);

  runtime::Environment env;
  env.world = tasks::reset(task, env_seed);
  env.task = &task;
  Rng adv_rng(derive_seed(opts.seed, 5, episode));
  env.adversary_prob = opts.adversary_prob;
  env.adversary_rng = &adv_rng;

  runtime::RunResult result;
  if (m == nullptr) {
    // expert-oracle control: teacher-forced replay of a demonstration
    // generated for this very environment seed
    expert::Trace demo = expert::demonstrate(task, env_seed);
    runtime::OraclePolicy oracle(demo.tree);
    result = runtime::run(expert::root_program(task.family), demo.frames, env, oracle, opts.runtime);
  } else {
    expert::Trace demo = expert::demonstrate(task, demo_seed);
    if (model::is_flat(m->config().variant)) {
      result = runtime::run_flat(demo.frames, env, *m, opts.runtime);
    } else {
      runtime::ModelPolicy policy(*m);
      result = runtime::run(expert::root_program(task.family), demo.frames, env, policy, opts.runtime);
    }
  }
  EpisodeOutcome out;
  out.success = result.success;
  out.termination = result.termination;
  out.task_key = tasks::equivalence_key(task);
  return out;
}

}  // namespace

EvalReport evaluate(model::NtpModel* m, const tasks::DatasetSplit& split, const EvalOptions& opts) {
  if (opts.episodes < 1) throw std::invalid_argument("evaluate: episodes must be >= 1");
  if (m != nullptr) {
    model::ModelConfig want = model::make_model_config(
        m->config().variant, split.family,
        split.family == tasks::Family::BlockStacking && !split.seen.empty()
            ? split.seen.front().stacking().num_blocks
            : 8);
    if (want.obs_dim() != m->config().obs_dim())
      throw std::invalid_argument("evaluate: model observation layout does not match the split family");
  }

  std::vector<EpisodeOutcome> outcomes(opts.episodes);
  int workers = std::max(1, opts.workers);
  if (workers == 1) {
    for (int e = 0; e < opts.episodes; ++e) outcomes[e] = run_episode(m, split, opts, e);
  } else {
    // Each worker owns a private model copy; parameters are read-only here
    // but inference caches live inside the policy objects per episode.
    std::vector<std::thread> threads;
    std::atomic<int> next{0};
    std::vector<std::string> errors(workers);
    for (int w = 0; w < workers; ++w) {
      threads.emplace_back([&, w]() {
        try {
          for (int e = next.fetch_add(1); e < opts.episodes; e = next.fetch_add(1))
            outcomes[e] = run_episode(m, split, opts, e);
        } catch (const std::exception& ex) {
          errors[w] = ex.what();
        }
      });
    }
    for (auto& t : threads) t.join();
    for (const auto& err : errors)
      if (!err.empty()) throw std::runtime_error("evaluate worker failed: " + err);
  }

  EvalReport report;
  report.policy = m ? model::variant_name(m->config().variant) : "oracle";
  report.family = tasks::family_name(split.family);
  report.axis = tasks::axis_name(split.axis);
  report.sweep_value = opts.sweep_value;
  report.adversary_prob = opts.adversary_prob;
  report.episodes = opts.episodes;
  report.seed = opts.seed;
  std::map<std::string, std::pair<int, int>> per_task;
  for (const auto& o : outcomes) {
    report.successes += o.success ? 1 : 0;
    report.termination[runtime::termination_name(o.termination)] += 1;
    auto& t = per_task[o.task_key];
    t.first += 1;
    t.second += o.success ? 1 : 0;
  }
  report.success_rate = static_cast<double>(report.successes) / report.episodes;
  for (const auto& [key, counts] : per_task)
    report.per_task.push_back({key, counts.first, counts.second});

  nlohmann::ordered_json fp;
  fp["family"] = report.family;
  fp["axis"] = report.axis;
  fp["episodes"] = opts.episodes;
  fp["seed"] = opts.seed;
  fp["adversary_prob"] = opts.adversary_prob;
  fp["fixed_count"] = opts.fixed_count;
  fp["use_seen"] = opts.use_seen;
  fp["alpha"] = opts.runtime.alpha;
  report.config_fingerprint = sha1_hex(fp.dump()).substr(0, 16);
  report.checkpoint_hash = m ? git_blob_hash(model::checkpoint_to_json(*m)).substr(0, 16) : "oracle";
  return report;
}

std::vector<EvalReport> length_sweep(const std::vector<std::pair<std::string, model::NtpModel*>>& models,
                                     const tasks::DatasetSplit& split, const std::vector<int>& grid,
                                     int episodes, uint64_t seed, int workers) {
  if (grid.empty()) throw std::invalid_argument("length_sweep: empty grid");
  std::vector<EvalReport> reports;
  for (int count : grid) {
    for (const auto& [name, m] : models) {
      EvalOptions opts;
      opts.episodes = episodes;
      opts.seed = derive_seed(seed, 6, count);
      opts.fixed_count = count;
      opts.workers = workers;
      opts.sweep_value = count;
      EvalReport r = evaluate(m, split, opts);
      if (m == nullptr) r.policy = name;
      reports.push_back(std::move(r));
    }
  }
  return reports;
}

AdversarialReport adversarial_eval(model::NtpModel& ntp, model::NtpModel& gru,
                                   const tasks::DatasetSplit& split, double prob, int episodes,
                                   uint64_t seed, int workers) {
  AdversarialReport rep;
  EvalOptions opts;
  opts.episodes = episodes;
  opts.seed = seed;
  opts.workers = workers;
  rep.ntp_clean = evaluate(&ntp, split, opts);
  rep.gru_clean = evaluate(&gru, split, opts);
  opts.adversary_prob = prob;
  rep.ntp_adv = evaluate(&ntp, split, opts);
  rep.gru_adv = evaluate(&gru, split, opts);
  rep.drop_ntp = rep.ntp_clean.success_rate - rep.ntp_adv.success_rate;
  rep.drop_gru = rep.gru_clean.success_rate - rep.gru_adv.success_rate;
  return rep;
}

namespace {

nlohmann::ordered_json report_json(const EvalReport& r) {
  nlohmann::ordered_json j;
  j["policy"] = r.policy;
  j["family"] = r.family;
  j["axis"] = r.axis;
  if (r.sweep_value) j["sweep_value"] = *r.sweep_value;
  j["adversary_prob"] = r.adversary_prob;
  j["episodes"] = r.episodes;
  j["successes"] = r.successes;
  j["success_rate"] = r.success_rate;
  j["termination"] = r.termination;
  auto tasks_arr = nlohmann::ordered_json::array();
  for (const auto& t : r.per_task) {
    nlohmann::ordered_json tj;
    tj["task"] = t.key;
    tj["episodes"] = t.episodes;
    tj["successes"] = t.successes;
    tasks_arr.push_back(tj);
  }
  j["per_task"] = tasks_arr;
  j["seed"] = r.seed;
  j["config_fingerprint"] = r.config_fingerprint;
  j["checkpoint_hash"] = r.checkpoint_hash;
  return j;
}

}  // namespace

std::string reports_to_json(const std::vector<EvalReport>& reports) {
  auto arr = nlohmann::ordered_json::array();
  for (const auto& r : reports) arr.push_back(report_json(r));
  return arr.dump(2) + "\n";
}

std::string reports_to_csv(const std::vector<EvalReport>& reports) {
  std::string out =
      "policy,family,axis,sweep_value,adversary_prob,episodes,successes,success_rate,"
      "completed,depth_exceeded,budget_exceeded,iteration_cap_exceeded,seed,"
      "config_fingerprint,checkpoint_hash\n";
  for (const auto& r : reports) {
    char buf[512];
    auto term = [&](const char* k) {
      auto it = r.termination.find(k);
      return it == r.termination.end() ? 0 : it->second;
    };
    std::snprintf(buf, sizeof(buf), "%s,%s,%s,%s,%.4f,%d,%d,%.6f,%d,%d,%d,%d,%llu,%s,%s\n",
                  r.policy.c_str(), r.family.c_str(), r.axis.c_str(),
                  r.sweep_value ? std::to_string(static_cast<int>(*r.sweep_value)).c_str() : "",
                  r.adversary_prob, r.episodes, r.successes, r.success_rate, term("completed"),
                  term("depth_exceeded"), term("budget_exceeded"), term("iteration_cap_exceeded"),
                  static_cast<unsigned long long>(r.seed), r.config_fingerprint.c_str(),
                  r.checkpoint_hash.c_str());
    out += buf;
  }
  return out;
}

void emit_report(const std::vector<EvalReport>& reports, const std::string& path,
                 const std::string& format) {
  if (format == "json") {
    write_file(path, reports_to_json(reports));
  } else if (format == "csv") {
    write_file(path, reports_to_csv(reports));
  } else {
    throw std::invalid_argument("emit_report: format must be json or csv");
  }
}

// ---- dataset generation ----------------------------------------------------

std::vector<expert::Trace> generate_traces(const tasks::DatasetSplit& split, const GenConfig& cfg) {
  std::vector<expert::Trace> traces;
  int per_task = std::max(1, cfg.traces_per_task);
  for (size_t ti = 0; ti < split.seen.size(); ++ti) {
    const auto& task = split.seen[ti];
    if (task.family == tasks::Family::ObjectSorting) {
      // pair rollouts on identical instances so spec swapping always works
      int pairs = std::max(1, per_task / 2);
      for (int p = 0; p < pairs; ++p) {
        Rng inst_rng(derive_seed(cfg.seed, 11, ti * 1000 + p));
        tasks::TaskInstance inst =
            tasks::instantiate(task, inst_rng, split.seen_count_lo, split.seen_count_hi);
        traces.push_back(expert::demonstrate(inst, derive_seed(cfg.seed, 12, ti * 100000 + p * 2)));
        traces.push_back(
            expert::demonstrate(inst, derive_seed(cfg.seed, 12, ti * 100000 + p * 2 + 1)));
      }
    } else {
      for (int p = 0; p < per_task; ++p)
        traces.push_back(expert::demonstrate(task, derive_seed(cfg.seed, 13, ti * 100000 + p)));
    }
  }
  return traces;
}

void write_dataset(const std::string& dir, const tasks::DatasetSplit& split,
                   const std::vector<expert::Trace>& traces, const GenConfig& cfg) {
  fs::create_directories(fs::path(dir) / "traces");
  fs::create_directories(fs::path(dir) / "splits");
  write_file((fs::path(dir) / "splits" / "split.json").string(), tasks::split_to_json(split));
  for (size_t i = 0; i < traces.size(); ++i) {
    char name[64];
    std::snprintf(name, sizeof(name), "trace_%06zu.jsonl", i);
    write_file((fs::path(dir) / "traces" / name).string(), expert::trace_to_jsonl(traces[i]));
  }
  nlohmann::ordered_json m;
  m["kind"] = "ntp-dataset";
  m["registry"] = expert::registry_version();
  m["family"] = tasks::family_name(cfg.family);
  m["axis"] = tasks::axis_name(cfg.axis);
  m["seed"] = cfg.seed;
  m["n_train"] = cfg.n_train;
  m["traces_per_task"] = cfg.traces_per_task;
  m["stacking_blocks"] = cfg.stacking_blocks;
  m["n_traces"] = traces.size();
  write_file((fs::path(dir) / "manifest.json").string(), m.dump(2) + "\n");
}

Dataset load_dataset(const std::string& dir) {
  Dataset ds;
  auto m = nlohmann::json::parse(read_file((fs::path(dir) / "manifest.json").string()));
  if (m.value("kind", "") != "ntp-dataset") throw std::runtime_error("not a dataset directory: " + dir);
  if (m.at("registry").get<std::string>() != expert::registry_version())
    throw std::runtime_error("registry version mismatch in dataset manifest");
  ds.cfg.family = tasks::family_from_name(m.at("family").get<std::string>());
  ds.cfg.axis = tasks::axis_from_name(m.at("axis").get<std::string>());
  ds.cfg.seed = m.at("seed").get<uint64_t>();
  ds.cfg.n_train = m.at("n_train").get<int>();
  ds.cfg.traces_per_task = m.at("traces_per_task").get<int>();
  ds.cfg.stacking_blocks = m.at("stacking_blocks").get<int>();
  ds.split = tasks::split_from_json(read_file((fs::path(dir) / "splits" / "split.json").string()));
  size_t n = m.at("n_traces").get<size_t>();
  for (size_t i = 0; i < n; ++i) {
    char name[64];
    std::snprintf(name, sizeof(name), "trace_%06zu.jsonl", i);
    ds.traces.push_back(expert::trace_from_jsonl(read_file((fs::path(dir) / "traces" / name).string())));
  }
  return ds;
}

}  // namespace ntp::eval
