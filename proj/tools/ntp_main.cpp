#include <CLI11.hpp>

#include <cstdio>
#include <string>
#include <vector>

#include "ntp/evalharness.hpp"
#include "ntp/expert.hpp"
#include "ntp/interpreter.hpp"
#include "ntp/model.hpp"
#include "ntp/taskgen.hpp"
#include "ntp/trainer.hpp"

using namespace ntp;

namespace {

struct SplitArgs {
  std::string dataset;
  std::string family = "sorting";
  std::string axis = "semantics";
  uint64_t split_seed = 0;
  int n_train = 4;
  int stacking_blocks = 8;
};

void add_split_options(CLI::App* cmd, SplitArgs& args, bool dataset_required) {
  auto* ds = cmd->add_option("--dataset", args.dataset, "dataset directory from gen-data");
  if (dataset_required) ds->required();
  cmd->add_option("--family", args.family, "task family (sorting|stacking|cleanup)");
  cmd->add_option("--axis", args.axis, "generalization axis (length|topology|semantics)");
  cmd->add_option("--split-seed", args.split_seed, "seed for split construction");
  cmd->add_option("--n-train", args.n_train, "number of seen tasks");
  cmd->add_option("--stacking-blocks", args.stacking_blocks, "blocks per stacking task");
}

tasks::DatasetSplit resolve_split(const SplitArgs& args) {
  if (!args.dataset.empty()) return eval::load_dataset(args.dataset).split;
  Rng rng(derive_seed(args.split_seed, 501));
  return tasks::make_splits(tasks::family_from_name(args.family), tasks::axis_from_name(args.axis),
                            rng, args.n_train, args.stacking_blocks);
}

// Gradient-check suite: every op chain used by the models plus the full
// per-step loss of each variant, against central finite differences.
int run_grad_check(double tolerance) {
  double worst = 0.0;
  auto note = [&](const std::string& name, double err) {
    std::printf("  %-28s max rel err %.3e\n", name.c_str(), err);
    worst = std::max(worst, err);
  };

  {
    Rng rng(1);
    num::ParamStore params;
    params.add("w", 5, 7, rng);
    params.add("b", 1, 7, rng, true);
    num::Tensor x(1, 5);
    for (double& v : x.data) v = rng.uniform(-1, 1);
    auto loss_fn = [&](bool wg) {
      num::Graph g(wg);
      auto w = g.param(&params.value("w"), wg ? &params.grad("w") : nullptr);
      auto b = g.param(&params.value("b"), wg ? &params.grad("b") : nullptr);
      auto out = g.relu(g.add_rowvec(g.matmul(g.input(x), w), b));
      auto loss = g.softmax_ce_rows(out, {3});
      double v = g.value(loss)[0];
      if (wg) g.backward(loss);
      return v;
    };
    note("dense+relu+ce", num::grad_check(loss_fn, params, 1e-5, -1, 7).max_rel_err);
  }
  {
    Rng rng(2);
    num::ParamStore params;
    params.add("w", 6, 12, rng);
    params.add("b", 1, 6, rng, true);
    params.add("seq", 9, 4, rng);
    auto loss_fn = [&](bool wg) {
      num::Graph g(wg);
      auto seq = g.param(&params.value("seq"), wg ? &params.grad("seq") : nullptr);
      auto w = g.param(&params.value("w"), wg ? &params.grad("w") : nullptr);
      auto b = g.param(&params.value("b"), wg ? &params.grad("b") : nullptr);
      auto conv = g.relu(g.conv1d_temporal(seq, w, b, 3));
      auto mx = g.row_max(conv);
      auto loss = g.softmax_ce_rows(mx, {2});
      double v = g.value(loss)[0];
      if (wg) g.backward(loss);
      return v;
    };
    note("conv1d+rowmax", num::grad_check(loss_fn, params, 1e-5, -1, 8).max_rel_err);
  }

  // full per-step losses for every variant on a tiny stacking dataset
  Rng task_rng(3);
  std::vector<expert::Trace> traces;
  for (int t = 0; t < 2; ++t) {
    auto task = tasks::sample_task(tasks::Family::BlockStacking, task_rng, 1, 1, 4);
    traces.push_back(expert::demonstrate(task, derive_seed(3, t, 0)));
    traces.push_back(expert::demonstrate(task, derive_seed(3, t, 1)));
  }
  for (model::Variant v :
       {model::Variant::Ntp, model::Variant::NtpGru, model::Variant::NtpNoScope,
        model::Variant::Flat, model::Variant::FlatGru}) {
    model::NtpModel m(model::make_model_config(v, tasks::Family::BlockStacking, 4), 17);
    auto ds = train::TraceDataset::build(traces, v, true);
    Rng rng(4);
    auto batch = train::curriculum_sample(ds, rng, 2, 0.05);
    train::TrainConfig cfg;
    auto loss_fn = [&](bool wg) {
      return train::compute_losses(m, ds, batch, cfg, wg, 1).total;
    };
    auto rep = num::grad_check(loss_fn, m.params(), 1e-5, 50, 4321);
    note(std::string("loss/") + model::variant_name(v), rep.max_rel_err);
  }

  std::printf("grad-check worst relative error: %.3e (tolerance %.1e)\n", worst, tolerance);
  return worst < tolerance ? 0 : 1;
}

std::vector<int> parse_grid(const std::string& text) {
  std::vector<int> grid;
  size_t pos = 0;
  while (pos < text.size()) {
    size_t comma = text.find(',', pos);
    if (comma == std::string::npos) comma = text.size();
    grid.push_back(std::stoi(text.substr(pos, comma - pos)));
    pos = comma + 1;
  }
  return grid;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Neural task programming workbench"};
  app.require_subcommand(1);

  // ---- gen-data -----------------------------------------------------------
  auto* gen = app.add_subcommand("gen-data", "generate splits and expert traces");
  SplitArgs gen_split;
  add_split_options(gen, gen_split, false);
  std::string gen_out;
  int traces_per_task = 2;
  gen->add_option("--out", gen_out, "output dataset directory")->required();
  gen->add_option("--traces-per-task", traces_per_task, "expert rollouts per seen task");
  uint64_t gen_seed = 0;
  gen->add_option("--seed", gen_seed, "master seed for instances and rollouts");

  // ---- train ---------------------------------------------------------------
  auto* tr = app.add_subcommand("train", "train a model on a dataset");
  std::string tr_dataset, tr_variant = "ntp", tr_out, tr_metrics;
  train::TrainConfig tr_cfg;
  bool no_spec_swap = false, scope_sum = false;
  tr->add_option("--dataset", tr_dataset, "dataset directory")->required();
  tr->add_option("--variant", tr_variant, "ntp|ntp_gru|ntp_noscope|flat|flat_gru");
  tr->add_option("--out", tr_out, "checkpoint output path")->required();
  tr->add_option("--metrics", tr_metrics, "per-epoch metrics CSV path");
  tr->add_option("--epochs", tr_cfg.epochs, "training epochs");
  tr->add_option("--lr", tr_cfg.lr, "learning rate");
  tr->add_option("--batch-size", tr_cfg.batch_size, "items per batch");
  tr->add_option("--seed", tr_cfg.seed, "training seed");
  tr->add_option("--workers", tr_cfg.workers, "batch gradient workers");
  tr->add_flag("--no-spec-swap", no_spec_swap, "pair each trace with its own demonstration");
  tr->add_flag("--scope-sum", scope_sum, "sum scoping CE over positions instead of averaging");

  // ---- eval ------------------------------------------------------------
  auto* ev = app.add_subcommand("eval", "evaluate a checkpoint on a split");
  SplitArgs ev_split;
  add_split_options(ev, ev_split, false);
  std::string ev_ckpt, ev_report, ev_csv;
  eval::EvalOptions ev_opts;
  bool ev_seen = false, ev_oracle = false;
  ev->add_option("--checkpoint", ev_ckpt, "model checkpoint (omit with --oracle)");
  ev->add_flag("--oracle", ev_oracle, "run the expert-oracle control policy");
  ev->add_option("--episodes", ev_opts.episodes, "evaluation episodes");
  ev->add_option("--seed", ev_opts.seed, "evaluation seed");
  ev->add_flag("--seen", ev_seen, "evaluate the seen half of the split");
  ev->add_option("--adversary-prob", ev_opts.adversary_prob, "topple probability after release");
  ev->add_option("--fixed-count", ev_opts.fixed_count, "sorting objects per category");
  ev->add_option("--workers", ev_opts.workers, "parallel episode workers");
  ev->add_option("--report", ev_report, "JSON report path");
  ev->add_option("--csv", ev_csv, "CSV report path");

  // ---- sweep ---------------------------------------------------------------
  auto* sw = app.add_subcommand("sweep", "object-sorting task-length sweep");
  SplitArgs sw_split;
  sw_split.axis = "length";
  add_split_options(sw, sw_split, false);
  std::vector<std::string> sw_models;
  std::string sw_grid = "1,4,7,10", sw_out;
  int sw_episodes = 100;
  uint64_t sw_seed = 0;
  int sw_workers = 4;
  bool sw_oracle = false;
  sw->add_option("--model", sw_models, "name=checkpoint.json (repeatable)");
  sw->add_flag("--oracle", sw_oracle, "include the expert-oracle control row");
  sw->add_option("--grid", sw_grid, "objects-per-category grid, comma separated");
  sw->add_option("--episodes", sw_episodes, "episodes per grid point");
  sw->add_option("--seed", sw_seed, "sweep seed");
  sw->add_option("--workers", sw_workers, "parallel episode workers");
  sw->add_option("--out", sw_out, "output path prefix (.json/.csv)")->required();

  // ---- adversary -------------------------------------------------------
  auto* adv = app.add_subcommand("adversary", "block-stacking adversarial comparison");
  SplitArgs adv_split;
  adv_split.family = "stacking";
  add_split_options(adv, adv_split, false);
  std::string adv_ntp, adv_gru, adv_out;
  double adv_prob = 0.25;
  int adv_episodes = 200, adv_workers = 4;
  uint64_t adv_seed = 0;
  adv->add_option("--ntp", adv_ntp, "reactive NTP checkpoint")->required();
  adv->add_option("--gru", adv_gru, "NTP-GRU checkpoint")->required();
  adv->add_option("--prob", adv_prob, "topple probability");
  adv->add_option("--episodes", adv_episodes, "episodes per arm");
  adv->add_option("--seed", adv_seed, "evaluation seed");
  adv->add_option("--workers", adv_workers, "parallel episode workers");
  adv->add_option("--out", adv_out, "output path prefix (.json/.csv)")->required();

  // ---- grad-check ------------------------------------------------------
  auto* gc = app.add_subcommand("grad-check", "finite-difference gradient suite");
  double gc_tol = 1e-4;
  gc->add_option("--tolerance", gc_tol, "maximum relative error");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    std::fprintf(stderr, "%s\n", e.what());
    std::fputs(app.help().c_str(), stderr);
    return 2;
  }

  try {
    if (gen->parsed()) {
      Rng rng(derive_seed(gen_split.split_seed, 501));
      auto family = tasks::family_from_name(gen_split.family);
      auto axis = tasks::axis_from_name(gen_split.axis);
      auto split = tasks::make_splits(family, axis, rng, gen_split.n_train, gen_split.stacking_blocks);
      split.seed = gen_split.split_seed;
      eval::GenConfig cfg;
      cfg.family = family;
      cfg.axis = axis;
      cfg.seed = gen_seed;
      cfg.n_train = gen_split.n_train;
      cfg.traces_per_task = traces_per_task;
      cfg.stacking_blocks = gen_split.stacking_blocks;
      auto traces = eval::generate_traces(split, cfg);
      eval::write_dataset(gen_out, split, traces, cfg);
      std::printf("wrote %zu traces (%zu seen / %zu unseen tasks) to %s\n", traces.size(),
                  split.seen.size(), split.unseen.size(), gen_out.c_str());
    } else if (tr->parsed()) {
      auto ds = eval::load_dataset(tr_dataset);
      tr_cfg.spec_swap = !no_spec_swap;
      tr_cfg.scope_average = !scope_sum;
      auto variant = model::variant_from_name(tr_variant);
      model::NtpModel m(
          model::make_model_config(variant, ds.cfg.family, ds.cfg.stacking_blocks), tr_cfg.seed);
      auto dataset = train::TraceDataset::build(std::move(ds.traces), variant, tr_cfg.spec_swap);
      auto history = train::train(m, dataset, tr_cfg, tr_metrics);
      model::save_checkpoint(m, tr_out);
      if (!history.empty()) {
        std::printf("trained %s for %d epochs; final: %s\n", tr_variant.c_str(), tr_cfg.epochs,
                    train::metrics_csv_row(history.back()).c_str());
      }
      std::printf("checkpoint written to %s\n", tr_out.c_str());
    } else if (ev->parsed()) {
      if (!ev_oracle && ev_ckpt.empty())
        throw CLI::RequiredError("--checkpoint (or --oracle)");
      auto split = resolve_split(ev_split);
      ev_opts.use_seen = ev_seen;
      std::optional<model::NtpModel> m;
      if (!ev_oracle) m = model::load_checkpoint(ev_ckpt);
      auto report = eval::evaluate(m ? &*m : nullptr, split, ev_opts);
      std::printf("%s on %s/%s: success %.3f over %d episodes\n", report.policy.c_str(),
                  report.family.c_str(), report.axis.c_str(), report.success_rate, report.episodes);
      if (!ev_report.empty()) eval::emit_report({report}, ev_report, "json");
      if (!ev_csv.empty()) eval::emit_report({report}, ev_csv, "csv");
    } else if (sw->parsed()) {
      auto split = resolve_split(sw_split);
      std::vector<model::NtpModel> held;
      std::vector<std::pair<std::string, model::NtpModel*>> models;
      held.reserve(sw_models.size());
      for (const auto& spec : sw_models) {
        auto eq = spec.find('=');
        if (eq == std::string::npos) throw CLI::ValidationError("--model expects name=path");
        held.push_back(model::load_checkpoint(spec.substr(eq + 1)));
        models.emplace_back(spec.substr(0, eq), &held.back());
      }
      if (sw_oracle || models.empty()) models.emplace_back("oracle", nullptr);
      auto reports = eval::length_sweep(models, split, parse_grid(sw_grid), sw_episodes, sw_seed,
                                        sw_workers);
      eval::emit_report(reports, sw_out + ".json", "json");
      eval::emit_report(reports, sw_out + ".csv", "csv");
      for (const auto& r : reports)
        std::printf("count %2d %-10s success %.3f\n", static_cast<int>(*r.sweep_value),
                    r.policy.c_str(), r.success_rate);
    } else if (adv->parsed()) {
      auto split = resolve_split(adv_split);
      auto ntp_model = model::load_checkpoint(adv_ntp);
      auto gru_model = model::load_checkpoint(adv_gru);
      auto rep = eval::adversarial_eval(ntp_model, gru_model, split, adv_prob, adv_episodes,
                                        adv_seed, adv_workers);
      eval::emit_report({rep.ntp_clean, rep.ntp_adv, rep.gru_clean, rep.gru_adv},
                        adv_out + ".json", "json");
      eval::emit_report({rep.ntp_clean, rep.ntp_adv, rep.gru_clean, rep.gru_adv}, adv_out + ".csv",
                        "csv");
      std::printf("ntp  %.3f -> %.3f (drop %.3f)\n", rep.ntp_clean.success_rate,
                  rep.ntp_adv.success_rate, rep.drop_ntp);
      std::printf("gru  %.3f -> %.3f (drop %.3f)\n", rep.gru_clean.success_rate,
                  rep.gru_adv.success_rate, rep.drop_gru);
    } else if (gc->parsed()) {
      return run_grad_check(gc_tol);
    }
  } catch (const CLI::Error& e) {
    std::fprintf(stderr, "%s\n", e.what());
    std::fputs(app.help().c_str(), stderr);
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
