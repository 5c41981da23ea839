#pragma once

// Command-line entry points. Four subcommands:
//   genworld  sample an environment and write its snapshot + skill bank
//   train     run the two-phase training loop; emit metrics CSV, a per-task
//             routing sidecar CSV, checkpoints, and a run manifest
//   eval      success-rate table for a checkpoint on a validation split
//   plot      render a metrics CSV as a self-contained SVG
// Exit codes: 0 success, 2 config/input error, 3 numerical abort. The only
// environment override is SKILLWORLD_THREADS (rollout fan-out width).
// Interrupted training resumes from <out_dir>/resume.state: the trainer state
// and both CSV byte offsets are saved after every completed step, and the CSVs
// are truncated back to those offsets on restart, so a resumed run reproduces
// the uninterrupted file bytes.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "skillworld/config.hpp"
#include "skillworld/metrics.hpp"
#include "skillworld/plot.hpp"
#include "skillworld/trainer.hpp"
#include "skillworld/world_io.hpp"

namespace skillworld::cli {

inline World world_for_run(const RunConfig& rc) {
  if (!rc.run.world.empty()) return load_world(rc.run.world);
  return generate_world(rc.env);
}

inline void print_world_summary(std::ostream& os, const World& w) {
  os << "world " << world_fingerprint(w) << "\n";
  os << "domains:";
  for (int d = 0; d < static_cast<int>(w.domains.size()); ++d)
    os << ' ' << w.domains[static_cast<std::size_t>(d)] << (w.domain_is_ood(d) ? "(ood)" : "(id)");
  os << "\n";
  os << "skills: general " << w.bank.general.size() << ", specific_id " << w.bank.specific_id.size()
     << ", specific_ood " << w.bank.specific_ood.size() << "\n";
  os << "tasks: train_id " << w.train_id.size() << ", val_id " << w.val_id.size() << ", val_ood "
     << w.val_ood.size() << "\n";
}

inline int cmd_genworld(const std::string& config_path, bool has_seed, std::uint64_t seed,
                        const std::string& out_path, bool print_config) {
  RunConfig rc;
  if (!config_path.empty()) rc = load_config(config_path);
  if (has_seed) rc.env.seed = seed;
  if (print_config) {
    std::cout << resolved_config_json(rc);
    return 0;
  }
  World w = generate_world(rc.env);
  save_world(out_path, w);
  print_world_summary(std::cout, w);
  std::cout << "wrote " << out_path << " and " << out_path << ".bank\n";
  return 0;
}

inline int cmd_train(const std::string& config_path, const std::string& out_dir_override,
                     bool fresh, bool print_config) {
  RunConfig rc = load_config(config_path);
  if (!out_dir_override.empty()) rc.run.out_dir = out_dir_override;
  if (print_config) {
    std::cout << resolved_config_json(rc);
    return 0;
  }

  std::filesystem::path out(rc.run.out_dir);
  std::filesystem::create_directories(out);
  World world = world_for_run(rc);

  RunManifest manifest;
  manifest.config = rc;
  manifest.world_fingerprint = world_fingerprint(world);
  manifest.started_utc = utc_timestamp();
  manifest.metrics_csv = (out / "metrics.csv").string();
  manifest.router_csv = (out / "router.csv").string();
  manifest.checkpoint = (out / "policy.ckpt").string();
  manifest.resume_file = (out / "resume.state").string();
  manifest.world_file = rc.run.world.empty() ? (out / "world.snapshot").string() : rc.run.world;
  if (rc.run.world.empty()) save_world(manifest.world_file, world);
  save_manifest((out / "manifest.json").string(), manifest);

  Trainer trainer(world, rc.train);
  MetricsWriter metrics, router_csv;
  if (!fresh && std::filesystem::exists(manifest.resume_file)) {
    std::ifstream is(manifest.resume_file, std::ios::binary);
    if (!is) throw IoError("train: cannot open " + manifest.resume_file);
    Trainer::ResumeInfo info = trainer.restore_state(is);
    metrics.open_resume(manifest.metrics_csv, info.csv_offset);
    router_csv.open_resume(manifest.router_csv, info.router_csv_offset);
    std::cout << "resuming at step " << trainer.current_step() << "\n";
  } else {
    metrics.open_fresh(manifest.metrics_csv, kMetricsHeader);
    router_csv.open_fresh(manifest.router_csv, kRouterHeader);
  }

  const TrainConfig& tc = trainer.config();
  for (int step = trainer.current_step() + 1; step <= tc.steps; ++step) {
    StepRecord rec = trainer.train_step();

    MetricsRow base;
    base.step = rec.step;
    base.n_hard = rec.n_hard;
    base.n_medium = rec.n_medium;
    base.n_easy = rec.n_easy;
    base.eta = rec.eta;
    base.u_anchor = rec.u_anchor;
    base.train_pass = rec.train_pass;

    MetricsRow row = base;
    row.has_loss = true;
    row.loss_hard = rec.loss.hard;
    row.loss_medium = rec.loss.medium;
    row.loss_easy = rec.loss.easy;
    row.loss_kl = rec.loss.kl;
    row.loss_entropy = rec.loss.entropy;
    row.loss_total = rec.loss.total;
    row.grad_norm = rec.loss.grad_norm;
    metrics.append_line(format_metrics_row(row));

    for (const RouteRecord& rr : rec.routes) {
      std::ostringstream ss;
      ss << rec.step << ',' << rr.task_id << ',' << fmt_g9(rr.pass) << ',' << fmt_g9(rec.eta) << ','
         << tier_name(rr.tier);
      router_csv.append_line(ss.str());
    }

    if (tc.eval_episodes > 0 && (step % tc.eval_every == 0 || step == tc.steps)) {
      ContextMode mode = method_context(tc.method);
      for (Split split : {Split::ValID, Split::ValOOD}) {
        EvalResult ev = trainer.evaluate(split, mode, tc.eval_episodes, tc.eval_temperature);
        MetricsRow erow = base;
        erow.has_eval = true;
        erow.eval_split = split_name(split);
        erow.eval_mode = context_mode_name(mode);
        erow.eval_avg = ev.avg;
        erow.eval_per_domain = ev.per_domain;
        metrics.append_line(format_metrics_row(erow));
        std::cout << "step " << step << " " << split_name(split) << " avg " << fmt_g9(ev.avg) << "\n";
      }
    }

    write_file_atomic(manifest.resume_file,
                      trainer.serialize_state(metrics.offset(), router_csv.offset()));
  }

  save_policy(manifest.checkpoint, trainer.params());
  manifest.finished_utc = utc_timestamp();
  save_manifest((out / "manifest.json").string(), manifest);
  std::cout << "wrote " << manifest.metrics_csv << "\n";
  return 0;
}

inline int cmd_eval(const std::string& checkpoint, const std::string& world_path,
                    const std::string& split_str, const std::string& mode_str, int episodes,
                    double temperature, int retrieval_k, const std::string& retrieval_log_path) {
  World world = load_world(world_path);
  PolicyParams loaded = load_policy(checkpoint);

  TrainConfig tc;
  tc.hidden = loaded.shape.hidden;
  tc.retrieval_k = retrieval_k;
  // evaluation never draws training batches; pin the training-only knobs to
  // their smallest legal values so any evaluable world passes validation
  tc.batch_size = 1;
  tc.group_size = 2;
  tc.probe_episodes = 2;
  Trainer trainer(world, tc);
  if (!(loaded.shape == trainer.params().shape))
    throw ConfigError("eval: checkpoint shape does not match the world's observation layout");
  trainer.mutable_params() = loaded;

  Split split = split_from_name(split_str);
  ContextMode mode = context_mode_from_name(mode_str);
  std::vector<std::string> retrieval_log;
  EvalResult res = trainer.evaluate(split, mode, episodes, temperature,
                                    retrieval_log_path.empty() ? nullptr : &retrieval_log);

  for (const auto& [domain, rate] : res.per_domain)
    std::printf("%-12s %.4f\n", domain.c_str(), rate);
  if (!res.per_domain.empty()) std::printf("%-12s %.4f\n", "avg", res.avg);

  if (!retrieval_log_path.empty()) {
    std::ostringstream ss;
    for (const std::string& id : retrieval_log) ss << id << "\n";
    write_file_atomic(retrieval_log_path, ss.str());
  }
  return 0;
}

inline int cmd_plot(const std::string& metrics_path, const std::string& out_path) {
  std::vector<MetricsRow> rows = parse_metrics_file(metrics_path);
  std::string svg = render_metrics_svg(rows);
  write_file_atomic(out_path, svg);
  std::cout << "wrote " << out_path << " (" << rows.size() << " rows)\n";
  return 0;
}

inline int run(int argc, const char* const* argv) {
  CLI::App app{"skill-gated POMDP trainer"};
  app.require_subcommand(1);

  auto* gen = app.add_subcommand("genworld", "sample a world and write its snapshot");
  std::string gen_config, gen_out = "world.snapshot";
  std::uint64_t gen_seed = 0;
  bool gen_print = false;
  gen->add_option("--config", gen_config, "config file (env section)");
  auto* seed_opt = gen->add_option("--seed", gen_seed, "override env seed");
  gen->add_option("--out", gen_out, "output snapshot path");
  gen->add_flag("--print-config", gen_print, "dump the resolved config and exit");

  auto* train = app.add_subcommand("train", "run the training loop");
  std::string train_config, train_out;
  bool train_fresh = false, train_print = false;
  train->add_option("--config", train_config, "config file")->required();
  train->add_option("--out-dir", train_out, "override run.out_dir");
  train->add_flag("--fresh", train_fresh, "ignore any resume state");
  train->add_flag("--print-config", train_print, "dump the resolved config and exit");

  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint");
  std::string ev_ckpt, ev_world, ev_split = "val_id", ev_mode = "standard", ev_log;
  int ev_episodes = 25, ev_k = 3;
  double ev_temp = 0.4;
  eval->add_option("--checkpoint", ev_ckpt, "policy checkpoint")->required();
  eval->add_option("--world", ev_world, "world snapshot")->required();
  eval->add_option("--split", ev_split, "val_id or val_ood");
  eval->add_option("--mode", ev_mode, "context mode");
  eval->add_option("--episodes", ev_episodes, "episodes per domain");
  eval->add_option("--temperature", ev_temp, "sampling temperature");
  eval->add_option("--retrieval-k", ev_k, "retrieved specific skills per episode");
  eval->add_option("--retrieval-log", ev_log, "write retrieved skill ids to this file");

  auto* plot = app.add_subcommand("plot", "render a metrics CSV as SVG");
  std::string plot_metrics, plot_out = "metrics.svg";
  plot->add_option("--metrics", plot_metrics, "metrics CSV")->required();
  plot->add_option("--out", plot_out, "output SVG path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (gen->parsed()) return cmd_genworld(gen_config, seed_opt->count() > 0, gen_seed, gen_out, gen_print);
    if (train->parsed()) return cmd_train(train_config, train_out, train_fresh, train_print);
    if (eval->parsed())
      return cmd_eval(ev_ckpt, ev_world, ev_split, ev_mode, ev_episodes, ev_temp, ev_k, ev_log);
    return cmd_plot(plot_metrics, plot_out);
  } catch (const NumericalError& e) {
    std::fprintf(stderr, "numerical abort: %s\n", e.what());
    return 3;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
}

}  // namespace skillworld::cli
