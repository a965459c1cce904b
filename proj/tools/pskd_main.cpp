// pskd: construct private states, decompose the twisted phase observable,
// run the LOCC estimation experiment, evaluate security bounds, and run the
// full protocol. Exit codes: 0 success, 1 configuration error, 2 numerical
// validity error.

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "pskd/bounds.hpp"
#include "pskd/estimation.hpp"
#include "pskd/observables.hpp"
#include "pskd/private_state.hpp"
#include "pskd/protocol.hpp"
#include "pskd/serialize.hpp"

namespace {

using namespace pskd;

void emit(const std::string& text, const std::string& out_path) {
  if (out_path.empty())
    std::cout << text;
  else
    write_text_file(out_path, text);
}

TwistingSpec::Kind parse_twisting_kind(const std::string& s) {
  if (s == "identity") return TwistingSpec::Kind::Identity;
  if (s == "random") return TwistingSpec::Kind::Random;
  if (s == "explicit") return TwistingSpec::Kind::Explicit;
  throw ConfigError("unknown twisting kind '" + s + "' (identity|random|explicit)");
}

struct StateOptions {
  std::string config_path;
  int d = 2;
  int a = 1;
  std::string twisting_kind = "identity";
  std::string blocks_path;  // Twisting JSON for explicit blocks
  bool seed_set = false;
  std::uint64_t seed = 0;
};

// Shared shape/twisting resolution for decompose and verify-private. Flags
// override the config file when both are given.
Twisting resolve_twisting(const StateOptions& opt, SystemShape* shape_out) {
  SystemShape shape{opt.d, opt.a};
  TwistingSpec spec;
  if (!opt.config_path.empty()) {
    const Json j = load_json_file(opt.config_path);
    const ProtocolConfig c = protocol_config_from_json(j);
    shape = c.shape;
    spec = c.twisting;
  }
  if (!opt.blocks_path.empty()) {
    const Twisting tw = twisting_from_json(load_json_file(opt.blocks_path));
    if (shape_out) *shape_out = tw.shape;
    return tw;
  }
  spec.kind = parse_twisting_kind(opt.twisting_kind);
  if (spec.kind == TwistingSpec::Kind::Random) {
    if (!opt.seed_set && opt.config_path.empty())
      throw ConfigError("--seed is required for a random twisting");
    if (opt.seed_set) spec.seed = opt.seed;
  }
  shape.validate();
  if (shape_out) *shape_out = shape;
  return build_twisting(shape, spec);
}

int run_cli(int argc, char** argv) {
  CLI::App app{"private-state QKD simulation toolkit"};
  app.require_subcommand(1);

  // ---- decompose ----------------------------------------------------------
  auto* dec_cmd = app.add_subcommand(
      "decompose", "decompose the twisted phase observable into product observables");
  StateOptions dec_opt;
  std::string dec_out;
  dec_cmd->add_option("--config", dec_opt.config_path, "protocol config JSON");
  dec_cmd->add_option("--d", dec_opt.d, "key dimension");
  dec_cmd->add_option("--a", dec_opt.a, "shield dimension per side");
  dec_cmd->add_option("--twisting", dec_opt.twisting_kind, "identity|random|explicit");
  dec_cmd->add_option("--blocks", dec_opt.blocks_path, "Twisting JSON (explicit blocks)");
  dec_cmd->add_option("--seed", dec_opt.seed, "seed for a random twisting")
      ->each([&](const std::string&) { dec_opt.seed_set = true; });
  dec_cmd->add_option("--out", dec_out, "write JSON here instead of stdout");
  dec_cmd->callback([&]() {
    SystemShape shape;
    const Twisting tw = resolve_twisting(dec_opt, &shape);
    const HermitianOperator sigma = twisted_phase_operator(tw);
    const ProductDecomposition dec = decompose_product(sigma.matrix, shape);
    emit(decomposition_to_json(dec).dump(2) + "\n", dec_out);
  });

  // ---- verify-private -----------------------------------------------------
  auto* ver_cmd = app.add_subcommand(
      "verify-private", "construct a private state and check key correlation and privacy");
  StateOptions ver_opt;
  std::string ver_out, ver_dump;
  ver_cmd->add_option("--config", ver_opt.config_path, "protocol config JSON");
  ver_cmd->add_option("--d", ver_opt.d, "key dimension");
  ver_cmd->add_option("--a", ver_opt.a, "shield dimension per side");
  ver_cmd->add_option("--twisting", ver_opt.twisting_kind, "identity|random|explicit");
  ver_cmd->add_option("--blocks", ver_opt.blocks_path, "Twisting JSON (explicit blocks)");
  ver_cmd->add_option("--seed", ver_opt.seed, "seed for a random twisting")
      ->each([&](const std::string&) { ver_opt.seed_set = true; });
  ver_cmd->add_option("--out", ver_out, "write JSON here instead of stdout");
  ver_cmd->add_option("--dump-state", ver_dump, "also write the full PrivateState JSON here");
  ver_cmd->callback([&]() {
    SystemShape shape;
    const Twisting tw = resolve_twisting(ver_opt, &shape);
    Matrix ancilla = identity(shape.d_prime()) / static_cast<double>(shape.d_prime());
    if (!ver_opt.config_path.empty()) {
      const ProtocolConfig c =
          protocol_config_from_json(load_json_file(ver_opt.config_path));
      ancilla = build_ancilla(c.shape, c.ancilla);
    }
    const PrivateState st = make_private_state(shape.d, ancilla, tw);
    const Eigen::MatrixXd corr = key_correlation(st);
    const PrivacyReport priv = verify_privacy(st);

    Json corr_json = Json::array();
    for (int i = 0; i < shape.d; ++i) {
      Json row = Json::array();
      for (int j = 0; j < shape.d; ++j) row.push_back(corr(i, j));
      corr_json.push_back(std::move(row));
    }
    double diag_dev = 0.0;
    for (int i = 0; i < shape.d; ++i)
      diag_dev = std::max(diag_dev, std::abs(corr(i, i) - 1.0 / shape.d));
    const Matrix pt = partial_transpose(st.gamma, shape.dims(), 1);
    const Matrix ptb = partial_transpose(pt, shape.dims(), 3);  // both of Bob's factors

    Json out{{"shape", shape_to_json(shape)},
             {"key_correlation", std::move(corr_json)},
             {"key_diagonal_deviation", diag_dev},
             {"privacy_distance", priv.max_distance},
             {"privacy_excluded_keys", priv.excluded},
             {"ppt_min_eigenvalue", min_eigenvalue(ptb)},
             {"trace", st.gamma.trace().real()}};
    emit(out.dump(2) + "\n", ver_out);
    if (!ver_dump.empty())
      write_text_file(ver_dump, private_state_to_json(st).dump() + "\n");
  });

  // ---- estimate -----------------------------------------------------------
  auto* est_cmd = app.add_subcommand(
      "estimate", "indirect (LOCC) vs direct estimation experiment on the configured state");
  std::string est_config, est_out, est_format = "csv";
  long long est_m = 1000, est_n = 1000;
  int est_trials = 1;
  std::uint64_t est_seed = 0;
  bool est_all_terms = false;
  est_cmd->add_option("--config", est_config, "protocol config JSON")->required();
  est_cmd->add_option("--m", est_m, "copies for the indirect estimate");
  est_cmd->add_option("--n", est_n, "extra copies for the direct estimate (uses m+n)");
  est_cmd->add_option("--trials", est_trials, "number of trials");
  est_cmd->add_option("--seed", est_seed, "master seed")->required();
  est_cmd->add_flag("--all-terms", est_all_terms, "measure every basis pair, not only active terms");
  est_cmd->add_option("--format", est_format, "csv|json");
  est_cmd->add_option("--out", est_out, "write results here instead of stdout");
  est_cmd->callback([&]() {
    const ProtocolConfig c = protocol_config_from_json(load_json_file(est_config));
    const Twisting tw = build_twisting(c.shape, c.twisting);
    const PrivateState st = make_private_state(c.shape.d, build_ancilla(c.shape, c.ancilla), tw);
    const Matrix attacked = apply_channel(st.gamma, c.shape, c.attack);
    const StateSource source = StateSource::iid(c.shape, attacked);
    const HermitianOperator sigma = twisted_phase_operator(tw);
    const ProductDecomposition dec = decompose_product(sigma.matrix, c.shape);
    const std::vector<EstimationResult> results =
        agreement_experiment(source, dec, est_m, est_n, est_trials, est_seed, est_all_terms);
    if (est_format == "csv") {
      emit(estimation_results_to_csv(results), est_out);
    } else if (est_format == "json") {
      Json arr = Json::array();
      for (const auto& r : results) arr.push_back(estimation_result_to_json(r));
      emit(arr.dump(2) + "\n", est_out);
    } else {
      throw ConfigError("unknown format '" + est_format + "' (csv|json)");
    }
  });

  // ---- bounds -------------------------------------------------------------
  auto* bnd_cmd = app.add_subcommand("bounds", "evaluate the closed-form security bounds");
  std::string bnd_json, bnd_out, bnd_sweep;
  double bnd_from = 0.0, bnd_to = 0.0;
  int bnd_steps = 0;
  BoundParams bp;
  bnd_cmd->add_option("--json", bnd_json, "BoundParams JSON file");
  bnd_cmd->add_option("--n", bp.n, "total systems");
  bnd_cmd->add_option("--m", bp.m, "indirect-estimation systems");
  bnd_cmd->add_option("--m-x,--m_x", bp.m_x, "bit-test systems");
  bnd_cmd->add_option("--m-z,--m_z", bp.m_z, "phase-test systems");
  bnd_cmd->add_option("--k", bp.k, "sample size for classical sampling");
  bnd_cmd->add_option("--r", bp.r, "almost-power deviation parameter");
  bnd_cmd->add_option("--t", bp.t, "intermediate observable count");
  bnd_cmd->add_option("--delta", bp.delta, "estimate deviation");
  bnd_cmd->add_option("--epsilon", bp.epsilon, "sampling deviation");
  bnd_cmd->add_option("--d", bp.d, "single-site dimension");
  bnd_cmd->add_option("--d-prime,--d_prime", bp.d_prime, "shield dimension d'");
  bnd_cmd->add_option("--alphabet", bp.alphabet_size, "measurement alphabet size |Z|");
  bnd_cmd->add_option("--hs-norm,--hs_norm", bp.hs_norm,
                      "Hilbert-Schmidt norm of the observable");
  bnd_cmd->add_option("--exponent-power,--exponent_power", bp.exponent_power,
                      "power of dim in the de Finetti exponent (1 or 2)");
  bnd_cmd->add_option("--sweep", bnd_sweep, "range this parameter (n|m|m_z|k|r|t|delta|epsilon)");
  bnd_cmd->add_option("--from", bnd_from, "sweep start");
  bnd_cmd->add_option("--to", bnd_to, "sweep end");
  bnd_cmd->add_option("--steps", bnd_steps, "sweep point count");
  bnd_cmd->add_option("--out", bnd_out, "write output here instead of stdout");
  bnd_cmd->callback([&]() {
    if (!bnd_json.empty()) bp = bound_params_from_json(load_json_file(bnd_json));

    auto evaluate = [](const BoundParams& p) -> BoundsReport {
      BoundsReport rep;
      const long long r0 = std::max(0LL, p.r);  // single-formula terms default r to 0
      if (p.m_z >= 1 && p.delta > 0.0) {
        rep.lo_chau = BoundTerm::from_ln(std::log(lo_chau_bound(p.m_z, p.delta)));
        if (p.n >= 1 && !lo_chau_side_condition(p.m_z, p.delta, p.n))
          rep.warnings.push_back(
              "m_z exceeds the sampling-rate side condition m_z < (2 delta^2/(1+2 delta^2)) n");
      }
      // Composite evaluations own the three term slots (matching protocol
      // reports); the single-formula bounds fill whatever remains open.
      if (p.n >= 1 && p.m_z >= 1 && p.n > p.m_z && p.t >= 1) {
        if (p.m_z >= p.t * p.t) {
          const BoundsReport tw =
              twisted_lo_chau_bounds(p.n, p.m_z, p.r, p.d, p.d_prime, p.t, p.delta);
          rep.twisted_total = tw.twisted_total;
          rep.definetti = tw.definetti;
          rep.chernoff = tw.chernoff;
          rep.sampling = tw.sampling;
          for (const auto& w : tw.warnings) rep.warnings.push_back(w);
        } else {
          rep.warnings.push_back("twisted bound skipped: needs m_z >= t^2");
        }
      }
      if (p.m >= 1 && p.t >= 1 && p.n >= 1 && p.hs_norm > 0.0) {
        if (p.m >= p.t) {
          BoundParams ap = p;
          ap.r = r0;
          const BoundsReport agr = agreement_bounds(ap);
          rep.agreement_total = agr.agreement_total;
          if (!rep.definetti) rep.definetti = agr.definetti;
          if (!rep.chernoff) rep.chernoff = agr.chernoff;
          if (!rep.sampling) rep.sampling = agr.sampling;
        } else {
          rep.warnings.push_back("agreement bound skipped: needs m >= t");
        }
      }
      if (!rep.definetti && p.n >= 1 && p.k >= 1)
        rep.definetti = BoundTerm::from_ln(
            definetti_bound_ln(p.n, p.k, r0, p.d, p.exponent_power));
      if (!rep.chernoff && p.n >= 1 && p.delta > 0.0 && p.alphabet_size >= 1)
        rep.chernoff = BoundTerm::from_log2(
            chernoff_bound_log2(p.delta, p.n, r0, p.alphabet_size));
      if (!rep.sampling && p.k >= 1 && p.epsilon > 0.0)
        rep.sampling = BoundTerm::from_ln(
            std::log(sampling_bound(p.k, p.epsilon, p.alphabet_size)));
      return rep;
    };

    if (bnd_sweep.empty()) {
      emit(bounds_report_to_json(evaluate(bp)).dump(2) + "\n", bnd_out);
      return;
    }
    if (bnd_steps < 2) throw ConfigError("sweep needs --steps >= 2");
    auto set_field = [](BoundParams& p, const std::string& name, double v) {
      if (name == "n") p.n = static_cast<long long>(v);
      else if (name == "m") p.m = static_cast<long long>(v);
      else if (name == "m_x") p.m_x = static_cast<long long>(v);
      else if (name == "m_z") p.m_z = static_cast<long long>(v);
      else if (name == "k") p.k = static_cast<long long>(v);
      else if (name == "r") p.r = static_cast<long long>(v);
      else if (name == "t") p.t = static_cast<long long>(v);
      else if (name == "delta") p.delta = v;
      else if (name == "epsilon") p.epsilon = v;
      else throw ConfigError("unknown sweep parameter '" + name + "'");
    };
    const char* names[] = {"lo_chau", "definetti", "chernoff",
                           "sampling", "agreement_total", "twisted_total"};
    std::string csv = bnd_sweep;
    for (const char* n : names) csv += std::string(",") + n + "_log2," + n + "_vacuous";
    csv += "\n";
    for (int i = 0; i < bnd_steps; ++i) {
      const double v = bnd_from + (bnd_to - bnd_from) * i / (bnd_steps - 1);
      BoundParams p = bp;
      set_field(p, bnd_sweep, v);
      const BoundsReport rep = evaluate(p);
      const std::optional<BoundTerm>* terms[] = {&rep.lo_chau,   &rep.definetti,
                                                 &rep.chernoff,  &rep.sampling,
                                                 &rep.agreement_total, &rep.twisted_total};
      csv += format_double(v);
      for (const auto* t : terms) {
        if (t->has_value())
          csv += "," + format_double((*t)->log2_value) + "," + ((*t)->vacuous ? "1" : "0");
        else
          csv += ",,";
      }
      csv += "\n";
    }
    emit(csv, bnd_out);
  });

  // ---- run ----------------------------------------------------------------
  auto* run_cmd = app.add_subcommand("run", "run the full protocol");
  std::string run_config, run_out, run_json;
  std::uint64_t run_seed = 0;
  int run_trials_override = -1;
  run_cmd->add_option("--config", run_config, "protocol config JSON")->required();
  run_cmd->add_option("--seed", run_seed, "master seed (overrides config)")->required();
  run_cmd->add_option("--trials", run_trials_override, "override config trial count");
  run_cmd->add_option("--out", run_out, "CSV output path (default stdout)");
  run_cmd->add_option("--json", run_json, "also write full RunResult JSON here");
  run_cmd->callback([&]() {
    ProtocolConfig c = protocol_config_from_json(load_json_file(run_config));
    c.seed = run_seed;
    if (run_trials_override > 0) c.trials = run_trials_override;
    const std::vector<RunResult> results = run_trials(c);
    emit(run_results_to_csv(results), run_out);
    if (!run_json.empty()) {
      Json arr = Json::array();
      for (const auto& r : results) arr.push_back(run_result_to_json(r));
      write_text_file(run_json, arr.dump(2) + "\n");
    }
  });

  // ---- sweep --------------------------------------------------------------
  auto* swp_cmd = app.add_subcommand("sweep", "range one protocol parameter over repeated runs");
  std::string swp_config, swp_param = "attack.p", swp_out;
  double swp_from = 0.0, swp_to = 0.0;
  int swp_steps = 0, swp_trials = -1;
  std::uint64_t swp_seed = 0;
  swp_cmd->add_option("--config", swp_config, "protocol config JSON")->required();
  swp_cmd->add_option("--param", swp_param,
                      "attack.p|delta|m_x|m_z|n_total|threshold_x|threshold_z");
  swp_cmd->add_option("--from", swp_from, "sweep start")->required();
  swp_cmd->add_option("--to", swp_to, "sweep end")->required();
  swp_cmd->add_option("--steps", swp_steps, "sweep point count")->required();
  swp_cmd->add_option("--trials", swp_trials, "override config trial count");
  swp_cmd->add_option("--seed", swp_seed, "master seed")->required();
  swp_cmd->add_option("--out", swp_out, "CSV output path (default stdout)");
  swp_cmd->callback([&]() {
    if (swp_steps < 2) throw ConfigError("sweep needs --steps >= 2");
    const ProtocolConfig base = protocol_config_from_json(load_json_file(swp_config));
    std::string csv =
        "param,value,trials,abort_rate,mean_eps_x,mean_sigma_x,mean_eps_z,mean_key_length\n";
    for (int i = 0; i < swp_steps; ++i) {
      const double v = swp_from + (swp_to - swp_from) * i / (swp_steps - 1);
      ProtocolConfig c = base;
      if (swp_param == "attack.p") c.attack.p = v;
      else if (swp_param == "delta") c.delta = v;
      else if (swp_param == "m_x") c.m_x = static_cast<long long>(v);
      else if (swp_param == "m_z") c.m_z = static_cast<long long>(v);
      else if (swp_param == "n_total") c.n_total = static_cast<long long>(v);
      else if (swp_param == "threshold_x") c.threshold_x = v;
      else if (swp_param == "threshold_z") c.threshold_z = v;
      else throw ConfigError("unknown sweep parameter '" + swp_param + "'");
      if (swp_trials > 0) c.trials = swp_trials;
      c.seed = child_seed(swp_seed, static_cast<std::uint64_t>(i));
      const std::vector<RunResult> rs = run_trials(c);
      double aborts = 0, ex = 0, sx = 0, ez = 0, kl = 0;
      for (const auto& r : rs) {
        aborts += r.aborted ? 1.0 : 0.0;
        ex += r.eps_x_hat;
        sx += r.sigma_x_hat;
        ez += r.eps_z_hat;
        kl += static_cast<double>(r.key_length);
      }
      const double n = static_cast<double>(rs.size());
      csv += swp_param + "," + format_double(v) + "," + std::to_string(rs.size()) + "," +
             format_double(aborts / n) + "," + format_double(ex / n) + "," +
             format_double(sx / n) + "," + format_double(ez / n) + "," +
             format_double(kl / n) + "\n";
    }
    emit(csv, swp_out);
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;  // help is success; any parse failure is a config error
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run_cli(argc, argv);
  } catch (const pskd::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const pskd::NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
