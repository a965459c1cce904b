#pragma once

#include <charconv>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "bounds.hpp"
#include "estimation.hpp"
#include "observables.hpp"
#include "private_state.hpp"
#include "protocol.hpp"

namespace pskd {

using Json = nlohmann::json;

/// Shortest round-trippable decimal form; identical on every run.
inline std::string format_double(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, end);
}

// ---------------------------------------------------------------------------
// matrices: complex entries serialize as [re, im]

inline Json matrix_to_json(const Matrix& m) {
  Json rows = Json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    Json row = Json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c)
      row.push_back(Json::array({m(r, c).real(), m(r, c).imag()}));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline Matrix matrix_from_json(const Json& j) {
  if (!j.is_array() || j.empty())
    throw ConfigError("matrix: expected a non-empty array of rows");
  const long rows = static_cast<long>(j.size());
  const long cols = static_cast<long>(j.at(0).size());
  Matrix m(rows, cols);
  for (long r = 0; r < rows; ++r) {
    const Json& row = j.at(static_cast<size_t>(r));
    if (static_cast<long>(row.size()) != cols)
      throw ConfigError("matrix: ragged rows");
    for (long c = 0; c < cols; ++c) {
      const Json& e = row.at(static_cast<size_t>(c));
      if (!e.is_array() || e.size() != 2)
        throw ConfigError("matrix: entries must be [re, im] pairs");
      m(r, c) = Complex(e.at(0).get<double>(), e.at(1).get<double>());
    }
  }
  return m;
}

inline Json shape_to_json(const SystemShape& s) { return Json{{"d", s.d}, {"a", s.a}}; }

inline SystemShape shape_from_json(const Json& j) {
  SystemShape s;
  s.d = j.at("d").get<int>();
  s.a = j.at("a").get<int>();
  s.validate();
  return s;
}

// ---------------------------------------------------------------------------
// twisting and private states

inline Json twisting_to_json(const Twisting& tw) {
  Json blocks = Json::array();
  for (const auto& b : tw.blocks) blocks.push_back(matrix_to_json(b));
  return Json{{"shape", shape_to_json(tw.shape)}, {"blocks", std::move(blocks)}};
}

inline Twisting twisting_from_json(const Json& j) {
  Twisting tw;
  tw.shape = shape_from_json(j.at("shape"));
  for (const auto& b : j.at("blocks")) tw.blocks.push_back(matrix_from_json(b));
  tw.validate();
  return tw;
}

inline Json private_state_to_json(const PrivateState& st) {
  return Json{{"shape", shape_to_json(st.shape)},
              {"gamma", matrix_to_json(st.gamma)},
              {"twisting", twisting_to_json(st.twisting)},
              {"ancilla", matrix_to_json(st.ancilla)}};
}

inline PrivateState private_state_from_json(const Json& j) {
  PrivateState st;
  st.shape = shape_from_json(j.at("shape"));
  st.gamma = matrix_from_json(j.at("gamma"));
  st.twisting = twisting_from_json(j.at("twisting"));
  st.ancilla = matrix_from_json(j.at("ancilla"));
  validate_density(st.gamma, "gamma");
  return st;
}

// ---------------------------------------------------------------------------
// decompositions: basis indices into the canonical hermitian basis, plus the
// full coefficient matrix

inline Json decomposition_to_json(const ProductDecomposition& dec) {
  Json coeffs = Json::array();
  for (long r = 0; r < dec.coefficients.rows(); ++r) {
    Json row = Json::array();
    for (long c = 0; c < dec.coefficients.cols(); ++c)
      row.push_back(dec.coefficients(r, c));
    coeffs.push_back(std::move(row));
  }
  Json terms = Json::array();
  for (const auto& t : dec.nonzero_terms)
    terms.push_back(Json{{"j_a", t.j_a}, {"j_b", t.j_b}, {"s", t.s}});
  return Json{{"shape", shape_to_json(dec.shape)},
              {"t", dec.shape.t()},
              {"basis", "canonical-hermitian"},
              {"coefficients", std::move(coeffs)},
              {"nonzero_terms", std::move(terms)},
              {"prune_tol", dec.prune_tol},
              {"parseval_sum", dec.parseval_sum()}};
}

// ---------------------------------------------------------------------------
// bounds

inline Json bound_term_to_json(const BoundTerm& b) {
  return Json{{"log2", b.log2_value}, {"linear", b.linear}, {"vacuous", b.vacuous}};
}

inline Json bounds_report_to_json(const BoundsReport& rep) {
  Json j = Json::object();
  if (rep.lo_chau) j["lo_chau"] = bound_term_to_json(*rep.lo_chau);
  if (rep.definetti) j["definetti"] = bound_term_to_json(*rep.definetti);
  if (rep.chernoff) j["chernoff"] = bound_term_to_json(*rep.chernoff);
  if (rep.sampling) j["sampling"] = bound_term_to_json(*rep.sampling);
  if (rep.agreement_total) j["agreement_total"] = bound_term_to_json(*rep.agreement_total);
  if (rep.twisted_total) j["twisted_total"] = bound_term_to_json(*rep.twisted_total);
  if (!rep.warnings.empty()) j["warnings"] = rep.warnings;
  return j;
}

inline Json bound_params_to_json(const BoundParams& p) {
  return Json{{"n", p.n},
              {"m", p.m},
              {"m_x", p.m_x},
              {"m_z", p.m_z},
              {"k", p.k},
              {"r", p.r},
              {"t", p.t},
              {"delta", p.delta},
              {"epsilon", p.epsilon},
              {"d", p.d},
              {"d_prime", p.d_prime},
              {"alphabet_size", p.alphabet_size},
              {"hs_norm", p.hs_norm},
              {"exponent_power", p.exponent_power}};
}

inline BoundParams bound_params_from_json(const Json& j) {
  BoundParams p;
  p.n = j.value("n", p.n);
  p.m = j.value("m", p.m);
  p.m_x = j.value("m_x", p.m_x);
  p.m_z = j.value("m_z", p.m_z);
  p.k = j.value("k", p.k);
  p.r = j.value("r", p.r);
  p.t = j.value("t", p.t);
  p.delta = j.value("delta", p.delta);
  p.epsilon = j.value("epsilon", p.epsilon);
  p.d = j.value("d", p.d);
  p.d_prime = j.value("d_prime", p.d_prime);
  p.alphabet_size = j.value("alphabet_size", p.alphabet_size);
  p.hs_norm = j.value("hs_norm", p.hs_norm);
  p.exponent_power = j.value("exponent_power", p.exponent_power);
  return p;
}

// ---------------------------------------------------------------------------
// estimation results

inline Json per_term_to_json(const PerTermEstimate& t) {
  return Json{{"j_a", t.j_a},
              {"j_b", t.j_b},
              {"s", t.s},
              {"samples", t.samples},
              {"mean", t.mean}};
}

inline Json estimation_result_to_json(const EstimationResult& r) {
  Json terms = Json::array();
  for (const auto& t : r.per_term) terms.push_back(per_term_to_json(t));
  return Json{{"sigma_indirect", r.sigma_indirect},
              {"sigma_direct", r.sigma_direct},
              {"deviation", r.deviation},
              {"group_sizes", r.group_sizes},
              {"per_term", std::move(terms)},
              {"seed", r.seed}};
}

inline std::string estimation_results_to_csv(const std::vector<EstimationResult>& rs) {
  std::string csv = "trial,sigma_indirect,sigma_direct,deviation,seed\n";
  for (size_t i = 0; i < rs.size(); ++i) {
    csv += std::to_string(i) + "," + format_double(rs[i].sigma_indirect) + "," +
           format_double(rs[i].sigma_direct) + "," + format_double(rs[i].deviation) +
           "," + std::to_string(rs[i].seed) + "\n";
  }
  return csv;
}

// ---------------------------------------------------------------------------
// protocol configuration (stable field names) and results

inline AttackSpec attack_from_json(const Json& j) {
  AttackSpec a;
  const std::string kind = j.value("kind", "none");
  if (kind == "none")
    a.kind = AttackSpec::Kind::None;
  else if (kind == "depolarizing")
    a.kind = AttackSpec::Kind::Depolarizing;
  else if (kind == "dephasing")
    a.kind = AttackSpec::Kind::Dephasing;
  else if (kind == "custom")
    a.kind = AttackSpec::Kind::Custom;
  else
    throw ConfigError("attack: unknown kind '" + kind + "'");
  a.p = j.value("p", 0.0);
  if (j.contains("kraus"))
    for (const auto& k : j.at("kraus")) a.kraus.push_back(matrix_from_json(k));
  return a;
}

inline Json attack_to_json(const AttackSpec& a) {
  Json j = Json::object();
  switch (a.kind) {
    case AttackSpec::Kind::None: j["kind"] = "none"; break;
    case AttackSpec::Kind::Depolarizing: j["kind"] = "depolarizing"; break;
    case AttackSpec::Kind::Dephasing: j["kind"] = "dephasing"; break;
    case AttackSpec::Kind::Custom: j["kind"] = "custom"; break;
  }
  j["p"] = a.p;
  if (!a.kraus.empty()) {
    Json ks = Json::array();
    for (const auto& k : a.kraus) ks.push_back(matrix_to_json(k));
    j["kraus"] = std::move(ks);
  }
  return j;
}

inline ProtocolConfig protocol_config_from_json(const Json& j) {
  ProtocolConfig c;
  try {
    c.shape = shape_from_json(j.at("shape"));
    if (j.contains("twisting")) {
      const Json& tw = j.at("twisting");
      const std::string kind = tw.value("kind", "identity");
      if (kind == "identity")
        c.twisting.kind = TwistingSpec::Kind::Identity;
      else if (kind == "random")
        c.twisting.kind = TwistingSpec::Kind::Random;
      else if (kind == "explicit")
        c.twisting.kind = TwistingSpec::Kind::Explicit;
      else
        throw ConfigError("twisting: unknown kind '" + kind + "'");
      c.twisting.seed = tw.value("seed", 0ULL);
      if (tw.contains("blocks"))
        for (const auto& b : tw.at("blocks"))
          c.twisting.blocks.push_back(matrix_from_json(b));
    }
    if (j.contains("ancilla")) {
      const Json& an = j.at("ancilla");
      const std::string kind = an.value("kind", "maximally_mixed");
      if (kind == "maximally_mixed")
        c.ancilla.kind = AncillaSpec::Kind::MaximallyMixed;
      else if (kind == "explicit") {
        c.ancilla.kind = AncillaSpec::Kind::Explicit;
        c.ancilla.rho = matrix_from_json(an.at("matrix"));
      } else
        throw ConfigError("ancilla: unknown kind '" + kind + "'");
    }
    c.n_total = j.at("n_total").get<long long>();
    c.m_x = j.at("m_x").get<long long>();
    c.m_z = j.at("m_z").get<long long>();
    c.delta = j.value("delta", c.delta);
    c.r = j.value("r", c.r);
    if (j.contains("attack")) c.attack = attack_from_json(j.at("attack"));
    if (j.contains("thresholds")) {
      c.threshold_x = j.at("thresholds").value("x", c.threshold_x);
      c.threshold_z = j.at("thresholds").value("z", c.threshold_z);
    }
    c.seed = j.value("seed", 0ULL);
    c.trials = j.value("trials", 1);
    c.use_all_terms = j.value("use_all_terms", false);
  } catch (const Json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  c.validate();
  return c;
}

inline Json protocol_config_to_json(const ProtocolConfig& c) {
  Json tw = Json::object();
  switch (c.twisting.kind) {
    case TwistingSpec::Kind::Identity: tw["kind"] = "identity"; break;
    case TwistingSpec::Kind::Random: tw["kind"] = "random"; break;
    case TwistingSpec::Kind::Explicit: tw["kind"] = "explicit"; break;
  }
  tw["seed"] = c.twisting.seed;
  if (!c.twisting.blocks.empty()) {
    Json bs = Json::array();
    for (const auto& b : c.twisting.blocks) bs.push_back(matrix_to_json(b));
    tw["blocks"] = std::move(bs);
  }
  Json an = Json::object();
  if (c.ancilla.kind == AncillaSpec::Kind::MaximallyMixed)
    an["kind"] = "maximally_mixed";
  else {
    an["kind"] = "explicit";
    an["matrix"] = matrix_to_json(c.ancilla.rho);
  }
  return Json{{"shape", shape_to_json(c.shape)},
              {"twisting", std::move(tw)},
              {"ancilla", std::move(an)},
              {"n_total", c.n_total},
              {"m_x", c.m_x},
              {"m_z", c.m_z},
              {"delta", c.delta},
              {"r", c.r},
              {"attack", attack_to_json(c.attack)},
              {"thresholds", Json{{"x", c.threshold_x}, {"z", c.threshold_z}}},
              {"seed", c.seed},
              {"trials", c.trials},
              {"use_all_terms", c.use_all_terms}};
}

inline Json run_result_to_json(const RunResult& r, bool with_transcript = true) {
  Json j{{"eps_x_hat", r.eps_x_hat},
         {"sigma_x_hat", r.sigma_x_hat},
         {"eps_z_hat", r.eps_z_hat},
         {"key_length", r.key_length},
         {"aborted", r.aborted},
         {"bounds", bounds_report_to_json(r.bounds)},
         {"seed", r.seed}};
  if (with_transcript) {
    Json groups = Json::array();
    for (const auto& g : r.transcript.groups) groups.push_back(per_term_to_json(g));
    j["transcript"] = Json{{"bit_test_indices", r.transcript.bit_test_indices},
                           {"phase_test_indices", r.transcript.phase_test_indices},
                           {"copy_order", r.transcript.copy_order},
                           {"groups", std::move(groups)}};
  }
  return j;
}

inline std::string run_results_to_csv(const std::vector<RunResult>& rs) {
  std::string csv = "trial,eps_x_hat,sigma_x_hat,eps_z_hat,key_length,aborted\n";
  for (size_t i = 0; i < rs.size(); ++i) {
    csv += std::to_string(i) + "," + format_double(rs[i].eps_x_hat) + "," +
           format_double(rs[i].sigma_x_hat) + "," + format_double(rs[i].eps_z_hat) +
           "," + std::to_string(rs[i].key_length) + "," +
           (rs[i].aborted ? "1" : "0") + "\n";
  }
  return csv;
}

inline Json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open file: " + path);
  try {
    return Json::parse(in);
  } catch (const Json::exception& e) {
    throw ConfigError("cannot parse " + path + ": " + e.what());
  }
}

inline void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot open output file: " + path);
  out << text;
}

}  // namespace pskd
