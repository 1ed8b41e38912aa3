#include "predict/experiments.hpp"

#include <array>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "predict/csv.hpp"
#include "predict/errors.hpp"
#include "predict/numerics.hpp"
#include "predict/ode.hpp"
#include "predict/spectral_linear.hpp"
#include "predict/version.hpp"

namespace predict::experiments {
namespace {

using json = nlohmann::ordered_json;
using Eigen::MatrixXd;
using Eigen::VectorXd;

constexpr double kTau = 2.0 * std::numbers::pi;

// The linear figures sweep kernel widths sigma_frac * {1, 0.5, 0.1} * dx.
constexpr std::array<double, 3> kWidthScales = {1.0, 0.5, 0.1};

// ---------------------------------------------------------------------------
// config I/O

void check_keys(const json& j, const std::string& where,
                std::initializer_list<const char*> allowed) {
  for (const auto& item : j.items()) {
    bool known = false;
    for (const char* a : allowed) {
      if (item.key() == a) {
        known = true;
        break;
      }
    }
    require(known, ErrorCode::config,
            "unknown config key '" + (where.empty() ? item.key() : where + "." + item.key()) + "'");
  }
}

const json* find(const json& j, const char* key) {
  auto it = j.find(key);
  return it == j.end() ? nullptr : &*it;
}

double get_number(const json& j, const std::string& where, const char* key, double fallback) {
  const json* v = find(j, key);
  if (!v) return fallback;
  require(v->is_number(), ErrorCode::config, "config key '" + where + key + "' must be a number");
  return v->get<double>();
}

long long get_integer(const json& j, const std::string& where, const char* key,
                      long long fallback) {
  const json* v = find(j, key);
  if (!v) return fallback;
  require(v->is_number_integer(), ErrorCode::config,
          "config key '" + where + key + "' must be an integer");
  return v->get<long long>();
}

std::uint64_t get_seed(const json& j, const std::string& where, const char* key,
                       std::uint64_t fallback) {
  const json* v = find(j, key);
  if (!v) return fallback;
  require(v->is_number_unsigned() || (v->is_number_integer() && v->get<long long>() >= 0),
          ErrorCode::config, "config key '" + where + key + "' must be a nonnegative integer");
  return v->get<std::uint64_t>();
}

std::string get_string(const json& j, const std::string& where, const char* key,
                       std::string fallback) {
  const json* v = find(j, key);
  if (!v) return fallback;
  require(v->is_string(), ErrorCode::config, "config key '" + where + key + "' must be a string");
  return v->get<std::string>();
}

void config_require(bool ok, const std::string& message) {
  require(ok, ErrorCode::config, message);
}

// ---------------------------------------------------------------------------
// manifest

json to_json_vector(const VectorXd& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
  return out;
}

json to_json_matrix(const MatrixXd& m) {
  json out = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    out.push_back(row);
  }
  return out;
}

struct Manifest {
  std::filesystem::path dir;
  json config_echo;
  std::string experiment;
  std::uint64_t master_seed = 0;
  json sub_seeds = json::object();
  json outputs = json::array();
  json derived = json::object();

  Manifest(const Config& cfg, const json& echo)
      : dir(cfg.output_dir), config_echo(echo), experiment(cfg.experiment),
        master_seed(cfg.seed) {}

  std::string path(const std::string& name) {
    outputs.push_back(name);
    return (dir / name).string();
  }

  void write(double wall_seconds) const {
    json doc;
    doc["experiment"] = experiment;
    doc["version"] = kVersion;
    doc["config"] = config_echo;
    doc["master_seed"] = master_seed;
    doc["sub_seeds"] = sub_seeds;
    doc["outputs"] = outputs;
    doc["derived"] = derived;
    doc["wall_time_seconds"] = wall_seconds;
    const std::string path = (dir / "manifest.json").string();
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    require(out.is_open(), ErrorCode::io, "cannot open '" + path + "' for writing");
    out << doc.dump(2) << '\n';
    require(out.good(), ErrorCode::io, "failed writing '" + path + "'");
  }
};

std::vector<std::string> value_headers(const std::string& prefix, int N) {
  std::vector<std::string> h;
  for (int a = 0; a < N; ++a) h.push_back(prefix + "Up" + std::to_string(a + 1));
  for (int a = 0; a < N; ++a) h.push_back(prefix + "Uq" + std::to_string(a + 1));
  return h;
}

std::vector<std::string> concat(std::vector<std::string> a, const std::vector<std::string>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

void append(std::vector<double>& row, const VectorXd& v) {
  for (Eigen::Index i = 0; i < v.size(); ++i) row.push_back(v[i]);
}

// ---------------------------------------------------------------------------
// linear experiments

struct LinearCase {
  double sigma_frac = 0.0;
  std::string label;
  linear::LinearModel model;
};

std::vector<LinearCase> linear_cases(const Config& cfg) {
  std::vector<LinearCase> cases;
  for (double scale : kWidthScales) {
    const double frac = scale * cfg.linear.sigma_frac;
    LinearCase c;
    c.sigma_frac = frac;
    c.label = csv::format_number(frac);
    c.model = linear::LinearModel::make(cfg.linear.m0, cfg.linear.N, frac, cfg.linear.K);
    cases.push_back(std::move(c));
  }
  return cases;
}

void run_linear_interpolant(const Config& cfg, Manifest& man) {
  const std::uint64_t vseed = derive_seed(cfg.seed, seed_stream::linear_values, 0);
  man.sub_seeds["linear_values"] = vseed;

  const int n_eval = cfg.linear.n_eval;
  VectorXd x(n_eval);
  for (int i = 0; i < n_eval; ++i) x[i] = kTau * i / n_eval;

  json widths = json::array();
  for (const LinearCase& cs : linear_cases(cfg)) {
    linear::LinearExample ex(cs.model);
    const VectorXd V = ex.sample_collective_values(vseed);
    const auto [p, q] = ex.interpolant(V, x);

    csv::Writer w(man.path("interpolant_sigma" + cs.label + ".csv"),
                  {"x", "interp_p", "interp_q"});
    for (int i = 0; i < n_eval; ++i) w.row(std::vector<double>{x[i], p[i], q[i]});
    w.close();

    const int N = cs.model.N;
    csv::Writer pts(man.path("points_sigma" + cs.label + ".csv"), {"x_alpha", "V_p", "V_q"});
    for (int a = 0; a < N; ++a)
      pts.row(std::vector<double>{kTau * a / N, V[a], V[N + a]});
    pts.close();

    widths.push_back(json{{"sigma_frac", cs.sigma_frac},
                          {"sigma", cs.sigma_frac * cs.model.dx()},
                          {"K", cs.model.K},
                          {"condition_number", ex.condition_number()},
                          {"V", to_json_vector(V)}});
  }
  man.derived["widths"] = widths;
}

void run_linear_evolve(const Config& cfg, Manifest& man) {
  const std::uint64_t vseed = derive_seed(cfg.seed, seed_stream::linear_values, 0);
  man.sub_seeds["linear_values"] = vseed;

  json widths = json::array();
  for (const LinearCase& cs : linear_cases(cfg)) {
    linear::LinearExample ex(cs.model);
    const VectorXd V = ex.sample_collective_values(vseed);
    const MatrixXd J = ex.effective_matrix();

    ode::Settings s;
    s.dt = cfg.linear.dt;
    s.t_end = cfg.linear.t_end;
    s.record_every = cfg.linear.record_every;
    const ode::Trajectory traj = ode::integrate(
        [&J](double, const VectorXd& y, VectorXd& dy) { dy.noalias() = J * y; }, V, s);

    const int N = cs.model.N;
    csv::Writer w(man.path("evolve_sigma" + cs.label + ".csv"),
                  concat(concat({"t"}, value_headers("exact_", N)), value_headers("approx_", N)));
    for (std::size_t i = 0; i < traj.times.size(); ++i) {
      const double t = traj.times[i];
      std::vector<double> row;
      row.reserve(1 + 4 * static_cast<std::size_t>(N));
      row.push_back(t);
      append(row, ex.exact_evolution(V, t));
      append(row, traj.states[i]);
      w.row(row);
    }
    w.close();

    widths.push_back(json{{"sigma_frac", cs.sigma_frac},
                          {"sigma", cs.sigma_frac * cs.model.dx()},
                          {"K", cs.model.K},
                          {"condition_number", ex.condition_number()},
                          {"V", to_json_vector(V)}});
  }
  man.derived["widths"] = widths;
}

// ---------------------------------------------------------------------------
// lattice experiments

lattice::LatticeModel make_lattice(const Config& cfg) {
  return lattice::LatticeModel::make(cfg.lattice.n, cfg.lattice.N, cfg.lattice.sigma);
}

void note_chain_seeds(const Config& cfg, Manifest& man) {
  json seeds = json::array();
  for (int r = 0; r < cfg.chain.replicas; ++r)
    seeds.push_back(derive_seed(cfg.seed, seed_stream::covariance_chain, r));
  man.sub_seeds["covariance_chain"] = seeds;
}

void note_ensemble_seeds(const Config& cfg, Manifest& man) {
  json seeds = json::array();
  for (int r = 0; r < cfg.ensemble.replicas; ++r)
    seeds.push_back(derive_seed(cfg.seed, seed_stream::ensemble_chain, r));
  man.sub_seeds["ensemble_chain"] = seeds;
}

json profile_summary(const lattice::CovarianceProfile& prof) {
  return json{{"c", to_json_vector(prof.c)},
              {"stderr", to_json_vector(prof.se)},
              {"cross_max_abs", prof.cross_max_abs},
              {"cross_max_z", prof.cross_max_z},
              {"sweeps", prof.sweeps},
              {"burn_in", prof.burn_in},
              {"recorded", prof.recorded},
              {"acceptance", json::array({prof.acceptance_min, prof.acceptance_max})},
              {"tuned_width", json::array({prof.width_min, prof.width_max})}};
}

json ensemble_summary(const lattice::EnsembleStats& stats) {
  return json{{"count", stats.count},
              {"max_constraint_residual", stats.max_constraint_residual},
              {"energy_drift_max", stats.energy_drift_max},
              {"energy_drift_mean", stats.energy_drift_mean},
              {"acceptance", json::array({stats.acceptance_min, stats.acceptance_max})},
              {"first_step_dt", stats.first_step_dt},
              {"first_step_mean", to_json_vector(stats.first_step_mean)},
              {"first_step_stderr", to_json_vector(stats.first_step_se)}};
}

lattice::CovarianceProfile run_chain_stage(const Config& cfg, const lattice::LatticeModel& model,
                                           Manifest& man) {
  note_chain_seeds(cfg, man);
  lattice::CovarianceProfile prof = lattice::estimate_covariance(model, cfg.chain);
  man.derived["covariance"] = profile_summary(prof);
  return prof;
}

VectorXd published_values(const Config& cfg, const lattice::LatticeModel& model, Manifest& man) {
  man.sub_seeds["canonical_state"] = derive_seed(cfg.seed, seed_stream::canonical_state, 0);
  VectorXd V = lattice::sample_canonical_values(model, cfg.state_burn_in, cfg.seed);
  man.derived["initial_values"] = to_json_vector(V);
  return V;
}

std::string monomial_label(const char* base, const std::array<int, 3>& mono, int N) {
  std::vector<int> count(static_cast<std::size_t>(N), 0);
  for (int b : mono) count[static_cast<std::size_t>(b)]++;
  std::string out;
  for (int b = 0; b < N; ++b) {
    if (count[static_cast<std::size_t>(b)] == 0) continue;
    if (!out.empty()) out += "*";
    out += base + std::to_string(b + 1);
    if (count[static_cast<std::size_t>(b)] > 1)
      out += "^" + std::to_string(count[static_cast<std::size_t>(b)]);
  }
  return out;
}

json coefficients_json(const lattice::EffectiveSystem& sys) {
  json mono = json::array();
  for (const auto& m : sys.monomials())
    mono.push_back(json::array({m[0] + 1, m[1] + 1, m[2] + 1}));
  return json{{"linear", to_json_matrix(sys.linear())},
              {"cubic", to_json_matrix(sys.cubic())},
              {"monomials", mono}};
}

void run_nonlinear_covariance(const Config& cfg, Manifest& man) {
  const lattice::LatticeModel model = make_lattice(cfg);
  const lattice::CovarianceProfile prof = run_chain_stage(cfg, model, man);

  csv::Writer w(man.path("covariance.csv"), {"r", "c", "stderr"});
  for (int r = 0; r < model.n; ++r)
    w.row(std::vector<double>{static_cast<double>(r), prof.c[r], prof.se[r]});
  w.close();
}

void run_nonlinear_effective(const Config& cfg, Manifest& man) {
  const lattice::LatticeModel model = make_lattice(cfg);
  const lattice::CovarianceProfile prof = run_chain_stage(cfg, model, man);
  const GaussianMoments prior = lattice::gaussianized_prior(model, prof);
  const lattice::EffectiveSystem sys(model, prior);
  const auto fit = sys.fit_coefficients();

  const int N = sys.N();
  csv::Writer w(man.path("effective_coefficients.csv"), {"equation", "term", "coefficient"});
  for (int a = 0; a < N; ++a) {
    const std::string eq = "dVp" + std::to_string(a + 1) + "/dt";
    for (int b = 0; b < N; ++b)
      w.row({eq, "Vq" + std::to_string(b + 1), csv::format_number(sys.linear()(a, b))});
    for (std::size_t m = 0; m < sys.monomials().size(); ++m)
      w.row({eq, monomial_label("Vq", sys.monomials()[m], N),
             csv::format_number(sys.cubic()(a, static_cast<Eigen::Index>(m)))});
  }
  for (int a = 0; a < N; ++a) {
    const std::string eq = "dVq" + std::to_string(a + 1) + "/dt";
    for (int b = 0; b < N; ++b)
      w.row({eq, "Vp" + std::to_string(b + 1), csv::format_number(-sys.linear()(a, b))});
    for (std::size_t m = 0; m < sys.monomials().size(); ++m)
      w.row({eq, monomial_label("Vp", sys.monomials()[m], N),
             csv::format_number(-sys.cubic()(a, static_cast<Eigen::Index>(m)))});
  }
  w.close();

  man.derived["coefficients"] = coefficients_json(sys);
  man.derived["fit"] = json{{"linear", to_json_matrix(fit.linear)},
                            {"cubic", to_json_matrix(fit.cubic)},
                            {"max_residual", fit.max_residual},
                            {"max_cross_term", fit.max_cross_term}};
}

void run_nonlinear_ensemble(const Config& cfg, Manifest& man) {
  const lattice::LatticeModel model = make_lattice(cfg);
  const VectorXd V = published_values(cfg, model, man);
  note_ensemble_seeds(cfg, man);
  const lattice::EnsembleStats stats = lattice::ensemble_oracle(model, V, cfg.ensemble);

  const int N = model.N();
  csv::Writer w(man.path("ensemble_stats.csv"),
                concat(concat(concat(concat({"t"}, value_headers("mean_", N)),
                                     value_headers("se_", N)),
                              value_headers("var_", N)),
                       value_headers("var_se_", N)));
  for (const lattice::LevelStats& lev : stats.levels) {
    std::vector<double> row;
    row.reserve(1 + 8 * static_cast<std::size_t>(N));
    row.push_back(lev.t);
    append(row, lev.mean);
    append(row, lev.se);
    append(row, lev.var);
    append(row, lev.var_se);
    w.row(row);
  }
  w.close();

  man.derived["ensemble"] = ensemble_summary(stats);
}

void run_nonlinear_compare(const Config& cfg, Manifest& man) {
  const lattice::LatticeModel model = make_lattice(cfg);
  const lattice::CovarianceProfile prof = run_chain_stage(cfg, model, man);
  const GaussianMoments prior = lattice::gaussianized_prior(model, prof);
  const lattice::EffectiveSystem sys(model, prior);
  const auto fit = sys.fit_coefficients();

  const VectorXd V = published_values(cfg, model, man);
  note_ensemble_seeds(cfg, man);
  const lattice::EnsembleStats stats = lattice::ensemble_oracle(model, V, cfg.ensemble);

  ode::Settings s;
  s.dt = cfg.ensemble.dt;
  s.t_end = cfg.ensemble.t_end;
  s.record_every = cfg.ensemble.record_every;
  const ode::Trajectory traj = ode::integrate(sys.rhs_function(), V, s);
  require(traj.times.size() == stats.levels.size(), ErrorCode::invalid_input,
          "effective and ensemble recording grids disagree");

  const int N = model.N();
  csv::Writer w(man.path("compare.csv"),
                concat(concat({"t"}, value_headers("mean_", N)), value_headers("eff_", N)));
  for (std::size_t i = 0; i < traj.times.size(); ++i) {
    std::vector<double> row;
    row.reserve(1 + 4 * static_cast<std::size_t>(N));
    row.push_back(stats.levels[i].t);
    append(row, stats.levels[i].mean);
    append(row, traj.states[i]);
    w.row(row);
  }
  w.close();

  man.derived["coefficients"] = coefficients_json(sys);
  man.derived["fit"] = json{{"linear", to_json_matrix(fit.linear)},
                            {"cubic", to_json_matrix(fit.cubic)},
                            {"max_residual", fit.max_residual},
                            {"max_cross_term", fit.max_cross_term}};
  man.derived["ensemble"] = ensemble_summary(stats);
}

void run_spread(const Config& cfg, Manifest& man) {
  const lattice::LatticeModel model = make_lattice(cfg);
  const VectorXd V = published_values(cfg, model, man);
  note_ensemble_seeds(cfg, man);
  const lattice::EnsembleStats stats = lattice::ensemble_oracle(model, V, cfg.ensemble);

  csv::Writer w(man.path("spread.csv"), {"t", "bin_lo", "bin_hi", "density"});
  for (const lattice::Histogram& h : stats.histograms) {
    for (Eigen::Index b = 0; b < h.density.size(); ++b)
      w.row(std::vector<double>{h.t, h.bin_lo[b], h.bin_hi[b], h.density[b]});
  }
  w.close();

  man.derived["ensemble"] = ensemble_summary(stats);
  if (!stats.levels.empty()) {
    man.derived["variance_first_level"] = to_json_vector(stats.levels.front().var);
    man.derived["variance_last_level"] = to_json_vector(stats.levels.back().var);
  }
}

} // namespace

const std::vector<std::string>& experiment_names() {
  static const std::vector<std::string> names = {
      "linear-interpolant", "linear-evolve",     "nonlinear-covariance", "nonlinear-effective",
      "nonlinear-ensemble", "nonlinear-compare", "spread"};
  return names;
}

Config config_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const std::exception& e) {
    fail(ErrorCode::config, std::string("config JSON parse error: ") + e.what());
  }
  config_require(j.is_object(), "config must be a JSON object");
  check_keys(j, "",
             {"experiment", "output_dir", "seed", "state_burn_in", "linear", "lattice", "chain",
              "ensemble"});

  Config c;
  c.experiment = get_string(j, "", "experiment", c.experiment);
  c.output_dir = get_string(j, "", "output_dir", c.output_dir);
  c.seed = get_seed(j, "", "seed", c.seed);
  c.state_burn_in = get_integer(j, "", "state_burn_in", c.state_burn_in);

  if (const json* lin = find(j, "linear")) {
    config_require(lin->is_object(), "config key 'linear' must be an object");
    check_keys(*lin, "linear",
               {"m0", "N", "sigma_frac", "K", "t_end", "dt", "record_every", "n_eval"});
    c.linear.m0 = get_number(*lin, "linear.", "m0", c.linear.m0);
    c.linear.N = static_cast<int>(get_integer(*lin, "linear.", "N", c.linear.N));
    c.linear.sigma_frac = get_number(*lin, "linear.", "sigma_frac", c.linear.sigma_frac);
    c.linear.K = static_cast<int>(get_integer(*lin, "linear.", "K", c.linear.K));
    c.linear.t_end = get_number(*lin, "linear.", "t_end", c.linear.t_end);
    c.linear.dt = get_number(*lin, "linear.", "dt", c.linear.dt);
    c.linear.record_every =
        static_cast<int>(get_integer(*lin, "linear.", "record_every", c.linear.record_every));
    c.linear.n_eval = static_cast<int>(get_integer(*lin, "linear.", "n_eval", c.linear.n_eval));
  }

  if (const json* lat = find(j, "lattice")) {
    config_require(lat->is_object(), "config key 'lattice' must be an object");
    check_keys(*lat, "lattice", {"n", "N", "sigma"});
    c.lattice.n = static_cast<int>(get_integer(*lat, "lattice.", "n", c.lattice.n));
    c.lattice.N = static_cast<int>(get_integer(*lat, "lattice.", "N", c.lattice.N));
    c.lattice.sigma = get_number(*lat, "lattice.", "sigma", c.lattice.sigma);
  }

  if (const json* ch = find(j, "chain")) {
    config_require(ch->is_object(), "config key 'chain' must be an object");
    check_keys(*ch, "chain",
               {"sweeps", "burn_in", "thinning", "proposal_width", "replicas", "batches"});
    c.chain.sweeps = get_integer(*ch, "chain.", "sweeps", c.chain.sweeps);
    c.chain.burn_in = get_integer(*ch, "chain.", "burn_in", c.chain.burn_in);
    c.chain.thinning = get_integer(*ch, "chain.", "thinning", c.chain.thinning);
    c.chain.proposal_width = get_number(*ch, "chain.", "proposal_width", c.chain.proposal_width);
    c.chain.replicas = static_cast<int>(get_integer(*ch, "chain.", "replicas", c.chain.replicas));
    c.chain.batches = static_cast<int>(get_integer(*ch, "chain.", "batches", c.chain.batches));
  }

  if (const json* en = find(j, "ensemble")) {
    config_require(en->is_object(), "config key 'ensemble' must be an object");
    check_keys(*en, "ensemble",
               {"count", "t_end", "dt", "first_step_dt", "record_every", "member_spacing",
                "burn_in", "replicas", "proposal_width", "histogram_bins", "batches"});
    c.ensemble.count = static_cast<int>(get_integer(*en, "ensemble.", "count", c.ensemble.count));
    c.ensemble.t_end = get_number(*en, "ensemble.", "t_end", c.ensemble.t_end);
    c.ensemble.dt = get_number(*en, "ensemble.", "dt", c.ensemble.dt);
    c.ensemble.first_step_dt =
        get_number(*en, "ensemble.", "first_step_dt", c.ensemble.first_step_dt);
    c.ensemble.record_every =
        static_cast<int>(get_integer(*en, "ensemble.", "record_every", c.ensemble.record_every));
    c.ensemble.member_spacing =
        get_integer(*en, "ensemble.", "member_spacing", c.ensemble.member_spacing);
    c.ensemble.burn_in = get_integer(*en, "ensemble.", "burn_in", c.ensemble.burn_in);
    c.ensemble.replicas =
        static_cast<int>(get_integer(*en, "ensemble.", "replicas", c.ensemble.replicas));
    c.ensemble.proposal_width =
        get_number(*en, "ensemble.", "proposal_width", c.ensemble.proposal_width);
    c.ensemble.histogram_bins =
        static_cast<int>(get_integer(*en, "ensemble.", "histogram_bins", c.ensemble.histogram_bins));
    c.ensemble.batches =
        static_cast<int>(get_integer(*en, "ensemble.", "batches", c.ensemble.batches));
  }

  return c;
}

std::string config_to_json(const Config& c) {
  json j;
  j["experiment"] = c.experiment;
  j["output_dir"] = c.output_dir;
  j["seed"] = c.seed;
  j["state_burn_in"] = c.state_burn_in;
  j["linear"] = json{{"m0", c.linear.m0},
                     {"N", c.linear.N},
                     {"sigma_frac", c.linear.sigma_frac},
                     {"K", c.linear.K},
                     {"t_end", c.linear.t_end},
                     {"dt", c.linear.dt},
                     {"record_every", c.linear.record_every},
                     {"n_eval", c.linear.n_eval}};
  j["lattice"] = json{{"n", c.lattice.n}, {"N", c.lattice.N}, {"sigma", c.lattice.sigma}};
  j["chain"] = json{{"sweeps", c.chain.sweeps},
                    {"burn_in", c.chain.burn_in},
                    {"thinning", c.chain.thinning},
                    {"proposal_width", c.chain.proposal_width},
                    {"replicas", c.chain.replicas},
                    {"batches", c.chain.batches}};
  j["ensemble"] = json{{"count", c.ensemble.count},
                       {"t_end", c.ensemble.t_end},
                       {"dt", c.ensemble.dt},
                       {"first_step_dt", c.ensemble.first_step_dt},
                       {"record_every", c.ensemble.record_every},
                       {"member_spacing", c.ensemble.member_spacing},
                       {"burn_in", c.ensemble.burn_in},
                       {"replicas", c.ensemble.replicas},
                       {"proposal_width", c.ensemble.proposal_width},
                       {"histogram_bins", c.ensemble.histogram_bins},
                       {"batches", c.ensemble.batches}};
  return j.dump(2);
}

void validate(const Config& c) {
  bool known = false;
  for (const std::string& name : experiment_names())
    if (name == c.experiment) known = true;
  config_require(known, c.experiment.empty()
                            ? "no experiment selected"
                            : "unknown experiment '" + c.experiment + "'");
  config_require(!c.output_dir.empty(), "output_dir must not be empty");
  config_require(c.state_burn_in >= 1, "state_burn_in must be positive");

  config_require(c.linear.m0 > 0, "linear.m0 must be positive");
  config_require(c.linear.N >= 1, "linear.N must be positive");
  config_require(c.linear.sigma_frac > 0, "linear.sigma_frac must be positive");
  config_require(c.linear.K >= 8, "linear.K must be at least 8");
  config_require(c.linear.t_end > 0, "linear.t_end must be positive");
  config_require(c.linear.dt > 0, "linear.dt must be positive");
  config_require(c.linear.record_every >= 1, "linear.record_every must be positive");
  config_require(c.linear.n_eval >= 2, "linear.n_eval must be at least 2");

  config_require(c.lattice.n >= 4, "lattice.n must be at least 4");
  config_require(c.lattice.N >= 1 && c.lattice.N < c.lattice.n,
                 "lattice.N must be in [1, lattice.n)");
  config_require(c.lattice.sigma > 0, "lattice.sigma must be positive");

  config_require(c.chain.sweeps >= 1, "chain.sweeps must be positive");
  config_require(c.chain.burn_in >= 0, "chain.burn_in must be nonnegative");
  config_require(c.chain.thinning >= 1, "chain.thinning must be positive");
  config_require(c.chain.proposal_width > 0, "chain.proposal_width must be positive");
  config_require(c.chain.replicas >= 1, "chain.replicas must be positive");
  config_require(c.chain.batches >= 2, "chain.batches must be at least 2");

  config_require(c.ensemble.count >= 4, "ensemble.count must be at least 4");
  config_require(c.ensemble.t_end > 0, "ensemble.t_end must be positive");
  config_require(c.ensemble.dt > 0, "ensemble.dt must be positive");
  config_require(c.ensemble.first_step_dt > 0, "ensemble.first_step_dt must be positive");
  config_require(c.ensemble.record_every >= 1, "ensemble.record_every must be positive");
  config_require(c.ensemble.member_spacing >= 1, "ensemble.member_spacing must be positive");
  config_require(c.ensemble.burn_in >= 0, "ensemble.burn_in must be nonnegative");
  config_require(c.ensemble.replicas >= 1, "ensemble.replicas must be positive");
  config_require(c.ensemble.proposal_width > 0, "ensemble.proposal_width must be positive");
  config_require(c.ensemble.histogram_bins >= 2, "ensemble.histogram_bins must be at least 2");
  config_require(c.ensemble.batches >= 2, "ensemble.batches must be at least 2");
}

void run_experiment(const Config& config) {
  validate(config);
  Config cfg = config;
  cfg.chain.seed = cfg.seed;    // all randomness fans out from the master seed
  cfg.ensemble.seed = cfg.seed;

  const auto start = std::chrono::steady_clock::now();
  std::error_code ec;
  std::filesystem::create_directories(cfg.output_dir, ec);
  require(!ec, ErrorCode::io, "cannot create output directory '" + cfg.output_dir + "'");

  Manifest man(cfg, json::parse(config_to_json(cfg)));
  if (cfg.experiment == "linear-interpolant") {
    run_linear_interpolant(cfg, man);
  } else if (cfg.experiment == "linear-evolve") {
    run_linear_evolve(cfg, man);
  } else if (cfg.experiment == "nonlinear-covariance") {
    run_nonlinear_covariance(cfg, man);
  } else if (cfg.experiment == "nonlinear-effective") {
    run_nonlinear_effective(cfg, man);
  } else if (cfg.experiment == "nonlinear-ensemble") {
    run_nonlinear_ensemble(cfg, man);
  } else if (cfg.experiment == "nonlinear-compare") {
    run_nonlinear_compare(cfg, man);
  } else if (cfg.experiment == "spread") {
    run_spread(cfg, man);
  } else {
    fail(ErrorCode::config, "unknown experiment '" + cfg.experiment + "'");
  }

  const double wall =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  man.write(wall);
}

} // namespace predict::experiments
