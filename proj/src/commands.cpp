#include "meanfield/commands.hpp"

#include "meanfield/checkpoint.hpp"
#include "meanfield/diagnostics.hpp"
#include "meanfield/linalg.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>

namespace meanfield {

using nlohmann::json;

namespace {

int guarded(const std::function<int()>& body) {
  try {
    return body();
  } catch (const std::invalid_argument& ex) {
    std::cerr << "error: " << ex.what() << "\n";
    return 2;
  } catch (const std::domain_error& ex) {
    std::cerr << "error: " << ex.what() << "\n";
    return 2;
  } catch (const std::runtime_error& ex) {
    std::cerr << "numeric error: " << ex.what() << "\n";
    return 3;
  }
}

void apply_overrides(RunConfig& cfg, const RunOptions& opts) {
  if (opts.seed_override) cfg.train.seed = *opts.seed_override;
}

std::filesystem::path prepare_out_dir(const RunOptions& opts) {
  std::filesystem::path out(opts.out_dir);
  std::filesystem::create_directories(out);
  return out;
}

void write_json(const json& j, const std::filesystem::path& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write '" + path.string() + "'");
  f << j.dump(2) << "\n";
}

void write_report(const RunConfig& cfg, const std::string& which, json fields, bool verdict,
                  const std::filesystem::path& out) {
  fields["check"] = which;
  fields["verdict"] = verdict;
  fields["tail_mode"] = to_string(cfg.model.tail_mode);
  write_json(fields, out / ("report_" + which + ".json"));
  std::cout << "diag " << which << ": " << (verdict ? "pass" : "FAIL") << "\n";
}

Batch diag_batch(const RunConfig& cfg, const ModelConfig& model) {
  const Dataset ds = build_dataset(cfg, model);
  const std::size_t count =
      std::min(ds.samples.size(), static_cast<std::size_t>(cfg.diag.batch_size));
  return Batch(ds.samples.begin(), ds.samples.begin() + count);
}

}  // namespace

int cmd_train(RunConfig cfg, const RunOptions& opts) {
  return guarded([&]() -> int {
    apply_overrides(cfg, opts);
    cfg.validate();
    const auto out = prepare_out_dir(opts);
    const ModelConfig model = cfg.model.to_model_config();
    const Dataset data = build_dataset(cfg, model);

    std::optional<TrainState> start;
    if (opts.resume_path) {
      Checkpoint ckpt = load_checkpoint(*opts.resume_path);
      if (!resume_compatible(ckpt.config, cfg))
        throw std::invalid_argument(
            "resume checkpoint was produced by a different run configuration "
            "(only train.epochs and checkpoint_every may change)");
      start = std::move(ckpt.state);
    }

    write_json(json::parse(serialize_run_config(cfg)), out / "config.json");

    std::ofstream metrics(out / "metrics.jsonl", std::ios::app);
    if (!metrics) throw std::runtime_error("cannot write metrics.jsonl");
    const std::string ckpt_path = (out / "checkpoint.json").string();
    const std::string rng_note = "shuffle streams derived from (train.seed, epoch)";

    const TrainState final_state = train(
        data, model, cfg.train,
        [&](const MetricsRecord& rec, const TrainState& st) {
          metrics << json{{"step", rec.step},
                          {"epoch", rec.epoch},
                          {"train_loss", rec.train_loss},
                          {"eval_loss", rec.eval_loss},
                          {"wallclock", rec.wallclock_s}}
                         .dump()
                  << "\n";
          metrics.flush();
          if (cfg.checkpoint_every > 0 && rec.epoch % cfg.checkpoint_every == 0)
            save_checkpoint({Checkpoint{}.version, cfg, st, rng_note}, ckpt_path);
        },
        std::move(start));

    save_checkpoint({Checkpoint{}.version, cfg, final_state, rng_note}, ckpt_path);
    if (!final_state.history.empty()) {
      const MetricsRecord& last = final_state.history.back();
      std::cout << "trained " << last.epoch << " epochs (" << last.step
                << " steps), train_loss " << last.train_loss << ", eval_loss "
                << last.eval_loss << "\n";
    } else {
      std::cout << "no epochs requested; wrote initial checkpoint\n";
    }
    return 0;
  });
}

int cmd_diag(RunConfig cfg, const std::string& which, const RunOptions& opts) {
  return guarded([&]() -> int {
    apply_overrides(cfg, opts);
    cfg.validate();
    const auto out = prepare_out_dir(opts);
    const ModelConfig model = cfg.model.to_model_config();
    const DiagSettings& dg = cfg.diag;

    const auto make_student = [&]() {
      Rng rng(dg.seed);
      return init_ensemble(cfg.train, model, rng);
    };

    if (which == "gradcheck") {
      if (!is_smooth(model.act))
        throw std::invalid_argument("gradcheck requires a smooth activation (tanh or sigmoid)");
      const Scalar err = grad_check(make_student(), diag_batch(cfg, model), model, dg.gradcheck_h);
      const bool ok = err < dg.gradcheck_tol;
      write_report(cfg, which,
                   {{"max_rel_err", err}, {"h", dg.gradcheck_h}, {"tol", dg.gradcheck_tol}}, ok,
                   out);
      return ok ? 0 : 1;
    }
    if (which == "stability") {
      Rng rng(Rng::derive(dg.seed, 1));
      const StabilityReport rep =
          stability_probe(make_student(), diag_batch(cfg, model), model, dg.stability_scales, rng);
      const bool ok = stability_bounded(rep);
      write_report(cfg, which,
                   {{"scales", rep.scales},
                    {"ratios", rep.ratios},
                    {"skipped_scales", rep.skipped},
                    {"estimated_constant", rep.estimated_constant}},
                   ok, out);
      return ok ? 0 : 1;
    }
    if (which == "expansion") {
      const ExpansionSweep sweep =
          expansion_depth_sweep(model, dg.expansion_depths, dg.expansion_seeds, dg.batch_size,
                                dg.expansion_theta_scale, dg.seed);
      const bool ok =
          sweep.slope >= -1.3 && sweep.slope <= -0.7 && sweep.order2_below_order1;
      write_report(cfg, which,
                   {{"depths", sweep.depths},
                    {"order1_err", sweep.order1_err},
                    {"order2_err", sweep.order2_err},
                    {"slope", sweep.slope},
                    {"order2_below_order1", sweep.order2_below_order1}},
                   ok, out);
      return ok ? 0 : 1;
    }
    if (which == "adjointbound") {
      const AdjointBoundReport rep =
          adjoint_bound_check(make_student(), diag_batch(cfg, model), model);
      write_report(cfg, which,
                   {{"costate_sq_norms", rep.costate_sq_norms},
                    {"loss", rep.loss_value},
                    {"lipschitz_bound", rep.lipschitz_bound}},
                   rep.verdict, out);
      return rep.verdict ? 0 : 1;
    }
    if (which == "homogeneity") {
      Rng rng(Rng::derive(dg.seed, 2));
      const Vector x = sample_in_ball(model.d1, model.input_radius, rng);
      Matrix theta(model.d2, model.d2);
      rng.fill_normal(theta,
                      cfg.train.theta_init_scale / std::sqrt(static_cast<Scalar>(model.d2)));
      const Vector x2 = matvec(model.w2, x);  // block acts on the feature vector
      const HomogeneityReport rep = homogeneity_degree(model, x2, theta, dg.homogeneity_lambdas);
      const bool ok = rep.max_residual <= dg.homogeneity_tol;
      write_report(cfg, which,
                   {{"lambdas", rep.lambdas},
                    {"degree", rep.degree},
                    {"max_residual", rep.max_residual},
                    {"tol", dg.homogeneity_tol}},
                   ok, out);
      return ok ? 0 : 1;
    }
    if (which == "descent") {
      const Dataset data = build_dataset(cfg, model);
      Batch full, eval_unused;
      split_dataset(data, cfg.train.eval_fraction, full, eval_unused);
      TrainState state = init_train_state(cfg.train, model);
      for (Index s = 0; s < dg.descent_pretrain_steps; ++s)
        train_step(state, full, model, cfg.train);
      Rng rng(Rng::derive(dg.seed, 3));
      DescentOptions dopts;
      dopts.half_width = dg.descent_half_width;
      dopts.candidate_scale = dg.descent_candidate_scale;
      const DescentReport rep =
          descent_probe(state.ensemble, full, model, dg.descent_candidates, rng, dopts);
      const bool ok = rep.pairing < 0;
      write_report(cfg, which,
                   {{"pairing", rep.pairing},
                    {"fit_residual", rep.fit_residual},
                    {"target_norm", rep.target_norm},
                    {"fit_warning", rep.fit_warning},
                    {"t_star", rep.direction.t_star},
                    {"layer", rep.direction.layer},
                    {"half_width", rep.direction.half_width},
                    {"n_candidates", dg.descent_candidates}},
                   ok, out);
      return ok ? 0 : 1;
    }
    throw std::invalid_argument(
        "unknown diagnostic '" + which +
        "' (expected gradcheck|stability|expansion|adjointbound|homogeneity|descent)");
  });
}

int cmd_compare(RunConfig cfg, const RunOptions& opts) {
  return guarded([&]() -> int {
    apply_overrides(cfg, opts);
    cfg.validate();
    if (cfg.compare.seeds.empty())
      throw std::invalid_argument("compare.seeds must not be empty");
    const auto out = prepare_out_dir(opts);
    const ModelConfig model = cfg.model.to_model_config();
    const Dataset data = build_dataset(cfg, model);  // shared across modes and seeds

    json table;
    table["seeds"] = cfg.compare.seeds;
    table["tail_mode"] = to_string(cfg.model.tail_mode);

    std::cout << "mode        seed        final_eval_loss\n";
    for (TrainMode mode : {TrainMode::Vanilla, TrainMode::MeanField}) {
      std::vector<Scalar> losses;
      for (std::uint64_t seed : cfg.compare.seeds) {
        TrainConfig tc = cfg.train;
        tc.mode = mode;
        tc.seed = seed;
        const TrainState state = train(data, model, tc);
        Scalar final_eval;
        if (!state.history.empty()) {
          final_eval = state.history.back().eval_loss;
        } else {
          Batch tr, ev;
          split_dataset(data, tc.eval_fraction, tr, ev);
          final_eval = loss(state.ensemble, ev.empty() ? tr : ev, model);
        }
        losses.push_back(final_eval);
        std::cout << to_string(mode) << (mode == TrainMode::Vanilla ? "     " : "   ") << seed
                  << "           " << final_eval << "\n";
      }
      Scalar mean = 0;
      for (Scalar l : losses) mean += l;
      mean /= static_cast<Scalar>(losses.size());
      Scalar var = 0;
      for (Scalar l : losses) var += (l - mean) * (l - mean);
      var /= static_cast<Scalar>(losses.size());
      table[to_string(mode)] = {{"final_eval_losses", losses},
                                {"mean", mean},
                                {"stddev", std::sqrt(var)},
                                {"min", *std::min_element(losses.begin(), losses.end())},
                                {"max", *std::max_element(losses.begin(), losses.end())}};
    }
    const Scalar mf = table["meanfield"]["mean"].get<Scalar>();
    const Scalar va = table["vanilla"]["mean"].get<Scalar>();
    table["meanfield_leq_vanilla"] = mf <= va;
    std::cout << "mean: meanfield " << mf << (mf <= va ? " <= " : " > ") << "vanilla " << va
              << "\n";
    write_json(table, out / "compare.json");
    return 0;
  });
}

int cmd_gen_data(RunConfig cfg, const RunOptions& opts) {
  return guarded([&]() -> int {
    apply_overrides(cfg, opts);
    cfg.validate();
    const auto out = prepare_out_dir(opts);
    const ModelConfig model = cfg.model.to_model_config();
    Rng rng(cfg.data.seed);
    const Dataset ds = gen_teacher_student(cfg.data.teacher, model, cfg.data.n_samples, rng);
    const std::string path = (out / "data.csv").string();
    save_csv(ds, path);
    std::cout << "wrote " << ds.samples.size() << " samples to " << path << " (max ||x|| "
              << ds.attained_input_radius << ", max |y| " << ds.attained_target_bound << ")\n";
    return 0;
  });
}

int run_cli(int argc, char** argv) {
  CLI::App app{"Mean-field residual network: training, comparison and theory diagnostics"};
  app.require_subcommand(1);

  std::string config_path;
  RunOptions opts;
  std::string resume;
  std::uint64_t seed = 0;
  std::string which;

  const auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path, "run configuration (JSON)")->required();
    cmd->add_option("--out", opts.out_dir, "output directory");
    cmd->add_option("--seed", seed, "override train.seed");
    cmd->add_flag("--deterministic", opts.deterministic,
                  "deterministic single-threaded mode (always on; flag kept for scripts)");
  };

  CLI::App* train_cmd = app.add_subcommand("train", "train per the mean-field scheme");
  add_common(train_cmd);
  train_cmd->add_option("--resume", resume, "checkpoint to resume from");

  CLI::App* diag_cmd = app.add_subcommand("diag", "run one theory diagnostic");
  add_common(diag_cmd);
  diag_cmd
      ->add_option("which", which,
                   "gradcheck|stability|expansion|adjointbound|homogeneity|descent")
      ->required();

  CLI::App* compare_cmd =
      app.add_subcommand("compare", "vanilla vs mean-field on the same data");
  add_common(compare_cmd);

  CLI::App* gen_cmd = app.add_subcommand("gen-data", "write a teacher-student CSV");
  add_common(gen_cmd);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  const auto* seed_opt = app.get_subcommands().front()->get_option("--seed");
  if (seed_opt->count() > 0) opts.seed_override = seed;
  if (train_cmd->parsed() && !resume.empty()) opts.resume_path = resume;

  return guarded([&]() -> int {
    const RunConfig cfg = load_run_config(config_path);
    if (train_cmd->parsed()) return cmd_train(cfg, opts);
    if (diag_cmd->parsed()) return cmd_diag(cfg, which, opts);
    if (compare_cmd->parsed()) return cmd_compare(cfg, opts);
    return cmd_gen_data(cfg, opts);
  });
}

}  // namespace meanfield
