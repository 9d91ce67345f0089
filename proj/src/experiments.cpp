#include "mirrorqed/experiments.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <limits>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include <json.hpp>

#include "mirrorqed/csv.hpp"
#include "mirrorqed/tomography.hpp"

namespace mirrorqed {

using nlohmann::json;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Strict reader for one JSON object: typed lookups with defaults, and a
// final check that every key present was consumed.
class Section {
 public:
  Section(const json& j, std::string name) : name_(std::move(name)) {
    if (!j.is_object()) throw ConfigError("config: '" + name_ + "' must be an object");
    j_ = &j;
  }

  bool has(const std::string& key) const { return j_->contains(key); }

  template <typename T>
  T get(const std::string& key, T fallback) {
    seen_.insert(key);
    if (!j_->contains(key)) return fallback;
    return convert<T>(key);
  }

  template <typename T>
  std::optional<T> maybe(const std::string& key) {
    seen_.insert(key);
    if (!j_->contains(key)) return std::nullopt;
    return convert<T>(key);
  }

  std::optional<Section> child(const std::string& key) {
    seen_.insert(key);
    if (!j_->contains(key)) return std::nullopt;
    return Section(j_->at(key), name_.empty() ? key : name_ + "." + key);
  }

  const json& raw(const std::string& key) {
    seen_.insert(key);
    return j_->at(key);
  }

  void finish() const {
    for (const auto& item : j_->items())
      if (!seen_.count(item.key())) throw ConfigError("config: unknown key '" + where(item.key()) + "'");
  }

  std::string where(const std::string& key) const { return name_.empty() ? key : name_ + "." + key; }

 private:
  template <typename T>
  T convert(const std::string& key) const {
    const json& v = j_->at(key);
    if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) throw ConfigError("config: '" + where(key) + "' must be a boolean");
      return v.get<bool>();
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!v.is_string()) throw ConfigError("config: '" + where(key) + "' must be a string");
      return v.get<std::string>();
    } else if constexpr (std::is_integral_v<T>) {
      if (!v.is_number_integer() || (std::is_unsigned_v<T> && v.get<long long>() < 0))
        throw ConfigError("config: '" + where(key) + "' must be a non-negative integer");
      return v.get<T>();
    } else {
      if (!v.is_number()) throw ConfigError("config: '" + where(key) + "' must be a number");
      const double d = v.get<double>();
      if (!std::isfinite(d)) throw ConfigError("config: '" + where(key) + "' must be finite");
      return d;
    }
  }

  const json* j_ = nullptr;
  std::string name_;
  std::set<std::string> seen_;
};

AxisSpec parse_axis(Section s) {
  AxisSpec a;
  a.name = s.get<std::string>("name", "");
  a.start = s.get<double>("start", 0.0);
  a.stop = s.get<double>("stop", 0.0);
  a.points = s.get<std::size_t>("points", 1);
  s.finish();
  if (a.name.empty()) throw ConfigError("config: sweep axes need a name");
  if (a.points < 1) throw ConfigError("config: sweep axis '" + a.name + "' needs at least one point");
  if (a.stop < a.start) throw ConfigError("config: sweep axis '" + a.name + "' has stop < start");
  if (a.points > 1 && a.stop == a.start)
    throw ConfigError("config: sweep axis '" + a.name + "' repeats one value");
  return a;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

json axis_json(const AxisSpec& a) { return {{"name", a.name}, {"start", a.start}, {"stop", a.stop}, {"points", a.points}}; }

json resolved_json(const ExperimentConfig& c) {
  const SystemParams& p = c.params;
  json j;
  j["params"] = {{"gamma_r", p.gamma_r}, {"gamma_1", p.gamma_1}, {"gamma_2", p.gamma_2}, {"gamma_n", p.gamma_n},
                 {"gamma_p", p.gamma_p}, {"phi", p.phi}, {"omega01", p.omega01}, {"delta", p.delta},
                 {"omega", p.omega}};
  j["drive"] = c.drive == DriveMode::critical ? "critical" : c.drive == DriveMode::none ? "none" : "explicit";
  if (c.sweep) j["sweep"] = axis_json(*c.sweep);
  if (c.sweep2) j["sweep2"] = axis_json(*c.sweep2);
  j["filter"] = {{"kind", c.filter_kind},           {"width", c.filter_width},
                 {"range", {c.filter_range_lo, c.filter_range_hi}}, {"spline_nodes", c.spline_nodes},
                 {"spline_window", c.spline_window}};
  j["tomography"] = {{"enabled", c.tomography_enabled}, {"order_cap", c.order_cap}, {"dim", c.tomography_dim},
                     {"noise_photons", c.noise_photons},  {"shots", c.shots}};
  j["seed"] = c.seed;
  j["simulation"] = {{"fock_cutoff", c.fock_cutoff}};
  j["wigner"] = {{"extent", c.wigner_extent},
                 {"step", c.wigner_step},
                 {"log_base", c.log_base == LogBase::natural ? "e" : "2"},
                 {"check_convergence", c.check_grid}};
  j["optimizer"] = {{"budget", c.budget}, {"restarts", c.restarts}, {"tolerance", c.simplex_tolerance}};
  j["reflection"] = {{"span", c.reflection_span},
                     {"points", c.reflection_points},
                     {"weak_omega_ratio", c.weak_omega_ratio},
                     {"compensation_scale", c.compensation_scale}};
  j["mollow"] = {{"tau_max", c.mollow_tau_max},
                 {"tau_points", c.mollow_tau_points},
                 {"span", c.mollow_span},
                 {"freqs", c.mollow_freqs}};
  return j;
}

SystemParams parse_params(Section s) {
  const std::string preset = s.get<std::string>("preset", "ideal_line");
  SystemParams base;
  if (preset == "ideal_line")
    base = ideal_line_params();
  else if (preset == "table_s1")
    base = table_s1_params();
  else if (preset == "custom")
    base = SystemParams::from_loss_rates(0.0, 0.0, 0.0);
  else
    throw ConfigError("config: params.preset must be ideal_line, table_s1 or custom");
  base.omega01 = preset == "custom" ? kTwoPi * 5.50703e9 : base.omega01;

  const auto gr = s.maybe<double>("gamma_r_mhz");
  const auto gn = s.maybe<double>("gamma_n_mhz");
  const auto gp = s.maybe<double>("gamma_p_mhz");
  const auto g1 = s.maybe<double>("gamma_1_mhz");
  const auto g2 = s.maybe<double>("gamma_2_mhz");
  const double phi = s.get<double>("phi", base.phi);
  const auto w01 = s.maybe<double>("omega01_mhz");
  s.finish();
  if ((gn || gp) && (g1 || g2))
    throw ConfigError("config: give either gamma_n/gamma_p or gamma_1/gamma_2, not both");
  if (preset == "custom" && !gr) throw ConfigError("config: custom params need gamma_r_mhz");

  const double r = gr ? mhz(*gr) : base.gamma_r;
  SystemParams p;
  if (g1 || g2)
    p = SystemParams::from_measured(r, g1 ? mhz(*g1) : base.gamma_1, g2 ? mhz(*g2) : base.gamma_2, 0.0, 0.0, phi);
  else if (gn || gp || gr || preset != "table_s1")
    p = SystemParams::from_loss_rates(r, gn ? mhz(*gn) : base.gamma_n, gp ? mhz(*gp) : base.gamma_p, 0.0, 0.0, phi);
  else
    p = SystemParams::from_measured(base.gamma_r, base.gamma_1, base.gamma_2, 0.0, 0.0, phi);
  p.omega01 = w01 ? mhz(*w01) : base.omega01;
  try {
    p.validate();
  } catch (const std::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  if (!(p.gamma_r > 0.0)) throw ConfigError("config: gamma_r must be positive");
  return p;
}

std::string timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

}  // namespace

std::vector<double> AxisSpec::values() const {
  std::vector<double> v(points);
  for (std::size_t i = 0; i < points; ++i)
    v[i] = points == 1 ? start : start + (stop - start) * static_cast<double>(i) / static_cast<double>(points - 1);
  return v;
}

void Table::add(std::vector<double> row, std::string st) {
  if (row.size() != columns.size()) throw std::logic_error("Table::add: row width mismatch");
  rows.push_back(std::move(row));
  status.push_back(std::move(st));
}

std::size_t Table::column(const std::string& name) const {
  for (std::size_t i = 0; i < columns.size(); ++i)
    if (columns[i] == name) return i;
  throw std::out_of_range("Table has no column '" + name + "'");
}

void refresh_hash(ExperimentConfig& cfg) {
  cfg.canonical = resolved_json(cfg).dump();
  cfg.hash = hex64(fnv1a(cfg.canonical));
}

ExperimentConfig parse_config(const std::string& json_text) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config: invalid JSON: ") + e.what());
  }
  Section top(root, "");
  ExperimentConfig c;

  if (auto s = top.child("params"))
    c.params = parse_params(*s);
  else
    c.params = ideal_line_params();

  if (auto s = top.child("drive")) {
    const std::string mode = s->get<std::string>("mode", "critical");
    if (mode == "critical") {
      c.drive = DriveMode::critical;
    } else if (mode == "explicit") {
      c.drive = DriveMode::explicit_drive;
      c.params.delta = mhz(s->get<double>("delta_mhz", 0.0));
      c.params.omega = mhz(s->get<double>("omega_mhz", 0.0));
      if (c.params.omega < 0.0) throw ConfigError("config: drive.omega_mhz must be >= 0");
    } else if (mode == "none") {
      c.drive = DriveMode::none;
    } else {
      throw ConfigError("config: drive.mode must be critical, explicit or none");
    }
    s->finish();
  }

  if (auto s = top.child("sweep")) c.sweep = parse_axis(*s);
  if (auto s = top.child("sweep2")) c.sweep2 = parse_axis(*s);

  if (auto s = top.child("filter")) {
    c.filter_kind = s->get<std::string>("kind", c.filter_kind);
    c.filter_width = s->get<double>("width", c.filter_width);
    if (s->has("range")) {
      const json& r = s->raw("range");
      if (!r.is_array() || r.size() != 2 || !r[0].is_number() || !r[1].is_number())
        throw ConfigError("config: filter.range must be [lo, hi]");
      c.filter_range_lo = r[0].get<double>();
      c.filter_range_hi = r[1].get<double>();
    }
    c.spline_nodes = s->get<std::size_t>("spline_nodes", c.spline_nodes);
    c.spline_window = s->get<double>("spline_window", c.spline_window);
    s->finish();
  }
  if (c.filter_kind != "boxcar" && c.filter_kind != "gaussian" && c.filter_kind != "spline")
    throw ConfigError("config: filter.kind must be boxcar, gaussian or spline");
  if (!(c.filter_width > 0.0)) throw ConfigError("config: filter.width must be positive");
  if (!(c.filter_range_lo > 0.0) || !(c.filter_range_hi > c.filter_range_lo))
    throw ConfigError("config: filter.range must satisfy 0 < lo < hi");
  if (c.spline_nodes < 1 || c.spline_nodes > 8) throw ConfigError("config: filter.spline_nodes must be 1..8");
  if (!(c.spline_window > 0.0)) throw ConfigError("config: filter.spline_window must be positive");

  if (auto s = top.child("tomography")) {
    c.tomography_enabled = s->get<bool>("enabled", c.tomography_enabled);
    c.order_cap = s->get<int>("order_cap", c.order_cap);
    c.tomography_dim = s->get<std::size_t>("dim", c.tomography_dim);
    c.noise_photons = s->get<double>("noise_photons", c.noise_photons);
    c.shots = s->get<std::size_t>("shots", c.shots);
    s->finish();
  }
  if (c.order_cap < 2 || c.order_cap > 12) throw ConfigError("config: tomography.order_cap must be 2..12");
  if (c.tomography_dim < 2 || c.tomography_dim > 25) throw ConfigError("config: tomography.dim must be 2..25");
  if (c.noise_photons < 0.0) throw ConfigError("config: tomography.noise_photons must be >= 0");

  c.seed = top.get<std::uint64_t>("seed", c.seed);

  if (auto s = top.child("simulation")) {
    c.fock_cutoff = s->get<std::size_t>("fock_cutoff", c.fock_cutoff);
    s->finish();
  }
  if (c.fock_cutoff < 3 || c.fock_cutoff > 25) throw ConfigError("config: simulation.fock_cutoff must be 3..25");
  if (c.tomography_dim > c.fock_cutoff) throw ConfigError("config: tomography.dim exceeds simulation.fock_cutoff");

  if (auto s = top.child("wigner")) {
    c.wigner_extent = s->get<double>("extent", c.wigner_extent);
    c.wigner_step = s->get<double>("step", c.wigner_step);
    const std::string base = s->get<std::string>("log_base", "e");
    if (base == "e")
      c.log_base = LogBase::natural;
    else if (base == "2")
      c.log_base = LogBase::two;
    else
      throw ConfigError("config: wigner.log_base must be \"e\" or \"2\"");
    c.check_grid = s->get<bool>("check_convergence", c.check_grid);
    s->finish();
  }
  if (!(c.wigner_extent > 0.0) || !(c.wigner_step > 0.0)) throw ConfigError("config: wigner extent and step must be positive");

  if (auto s = top.child("optimizer")) {
    c.budget = s->get<std::size_t>("budget", c.budget);
    c.restarts = s->get<std::size_t>("restarts", c.restarts);
    c.simplex_tolerance = s->get<double>("tolerance", c.simplex_tolerance);
    s->finish();
  }
  if (c.budget < 3) throw ConfigError("config: optimizer.budget must be >= 3");
  if (!(c.simplex_tolerance > 0.0)) throw ConfigError("config: optimizer.tolerance must be positive");

  if (auto s = top.child("reflection")) {
    c.reflection_span = mhz(s->get<double>("span_mhz", 0.0));
    c.reflection_points = s->get<std::size_t>("points", c.reflection_points);
    c.weak_omega_ratio = s->get<double>("weak_omega_ratio", c.weak_omega_ratio);
    c.compensation_scale = s->get<double>("compensation_scale", c.compensation_scale);
    s->finish();
  }
  if (c.reflection_points < 3) throw ConfigError("config: reflection.points must be >= 3");
  if (!(c.weak_omega_ratio > 0.0) || !(c.compensation_scale > 0.0) || c.reflection_span < 0.0)
    throw ConfigError("config: reflection values must be positive");

  if (auto s = top.child("mollow")) {
    c.mollow_tau_max = 1e-6 * s->get<double>("tau_max_us", 1e6 * c.mollow_tau_max);
    c.mollow_tau_points = s->get<std::size_t>("tau_points", c.mollow_tau_points);
    c.mollow_span = mhz(s->get<double>("span_mhz", 0.0));
    c.mollow_freqs = s->get<std::size_t>("freqs", c.mollow_freqs);
    s->finish();
  }
  if (!(c.mollow_tau_max > 0.0) || c.mollow_tau_points < 16 || c.mollow_freqs < 3 || c.mollow_span < 0.0)
    throw ConfigError("config: mollow needs tau_max_us > 0, tau_points >= 16, freqs >= 3");

  if (auto s = top.child("output")) {
    c.output_directory = s->get<std::string>("directory", c.output_directory);
    if (s->has("formats")) {
      const json& f = s->raw("formats");
      if (!f.is_array() || f.empty()) throw ConfigError("config: output.formats must be a non-empty array");
      c.formats.clear();
      for (const auto& e : f) {
        if (!e.is_string() || (e != "csv" && e != "json"))
          throw ConfigError("config: output.formats entries must be \"csv\" or \"json\"");
        c.formats.push_back(e.get<std::string>());
      }
    }
    s->finish();
  }
  top.finish();
  refresh_hash(c);
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

SystemParams driven_params(const ExperimentConfig& cfg) {
  SystemParams p = cfg.params;
  switch (cfg.drive) {
    case DriveMode::critical: {
      const qubit::DrivePoint d = qubit::critical_drive(p);
      return p.with_drive(d.delta, d.omega);
    }
    case DriveMode::none:
      return p.with_drive(0.0, 0.0);
    case DriveMode::explicit_drive:
      break;
  }
  return p;
}

namespace experiments {
namespace {

// Sweep runner shared by the 1-D and 2-D sweeps: fans points out over
// threads, keeps rows in axis order, and journals finished rows.
struct RowResult {
  std::vector<double> row;
  std::string status;
};

class Checkpoint {
 public:
  Checkpoint(std::string path, const std::string& hash, const std::string& command)
      : path_(std::move(path)), hash_(hash), command_(command) {}

  std::map<std::size_t, RowResult> load() const {
    std::map<std::size_t, RowResult> done;
    if (path_.empty()) return done;
    std::ifstream in(path_);
    if (!in) return done;
    std::string line;
    if (!std::getline(in, line)) return done;
    try {
      const json head = json::parse(line);
      if (head.value("hash", "") != hash_ || head.value("command", "") != command_) return done;
    } catch (const json::exception&) {
      return done;
    }
    while (std::getline(in, line)) {
      try {
        const json e = json::parse(line);
        RowResult r;
        for (const auto& v : e.at("row")) r.row.push_back(v.is_null() ? kNaN : v.get<double>());
        r.status = e.at("status").get<std::string>();
        done[e.at("index").get<std::size_t>()] = std::move(r);
      } catch (const json::exception&) {
        break;  // a torn final line from an interrupted write
      }
    }
    return done;
  }

  void start(bool fresh) {
    if (path_.empty()) return;
    if (fresh) {
      std::ofstream out(path_, std::ios::trunc);
      if (!out) throw ConfigError("cannot write checkpoint " + path_);
      out << json{{"hash", hash_}, {"command", command_}}.dump() << '\n';
    }
  }

  void append(std::size_t index, const RowResult& r) {
    if (path_.empty()) return;
    json row = json::array();
    for (double v : r.row) row.push_back(number_or_null(v));
    std::ofstream out(path_, std::ios::app);
    out << json{{"index", index}, {"row", row}, {"status", r.status}}.dump() << '\n';
  }

 private:
  std::string path_;
  std::string hash_;
  std::string command_;
};

std::string error_status(const std::exception& e) {
  std::string what = e.what();
  std::replace(what.begin(), what.end(), ',', ';');
  std::replace(what.begin(), what.end(), '\n', ' ');
  return "error:" + what;
}

Table run_points(const ExperimentConfig& cfg, const std::string& command, std::vector<std::string> columns,
                 std::size_t n, const std::function<RowResult(std::size_t)>& compute, const RunControl& ctl) {
  Checkpoint journal(ctl.checkpoint_path, cfg.hash, command);
  std::map<std::size_t, RowResult> done = journal.load();
  journal.start(done.empty());

  std::vector<std::size_t> pending;
  for (std::size_t i = 0; i < n; ++i)
    if (!done.count(i)) pending.push_back(i);
  bool cut_short = false;
  if (ctl.stop_after && pending.size() > *ctl.stop_after) {
    pending.resize(*ctl.stop_after);
    cut_short = true;
  }

  std::vector<RowResult> fresh(pending.size());
  const auto count = static_cast<long>(pending.size());
#pragma omp parallel for schedule(dynamic, 1)
  for (long k = 0; k < count; ++k) {
    const std::size_t i = pending[static_cast<std::size_t>(k)];
    RowResult r;
    try {
      r = compute(i);
    } catch (const NumericalError& e) {
      r.row.assign(columns.size(), kNaN);
      r.status = error_status(e);
    } catch (const ConfigError& e) {
      r.row.assign(columns.size(), kNaN);
      r.status = error_status(e);
    }
    fresh[static_cast<std::size_t>(k)] = r;
#pragma omp critical(mirrorqed_checkpoint)
    journal.append(i, r);
  }
  for (std::size_t k = 0; k < pending.size(); ++k) done[pending[k]] = std::move(fresh[k]);
  if (cut_short)
    throw InterruptedError(command + ": stopped after " + std::to_string(*ctl.stop_after) + " new points");

  Table t;
  t.columns = std::move(columns);
  for (auto& [i, r] : done) t.add(std::move(r.row), std::move(r.status));
  return t;
}

const AxisSpec& require_axis(const std::optional<AxisSpec>& axis, const std::string& what) {
  if (!axis) throw ConfigError("config: this command needs a '" + what + "' block");
  return *axis;
}

// Algebraic (Kasa) circle fit; returns the radius.
double circle_radius(const std::vector<cdouble>& z) {
  Eigen::MatrixXd a(static_cast<Eigen::Index>(z.size()), 3);
  Eigen::VectorXd b(static_cast<Eigen::Index>(z.size()));
  for (std::size_t i = 0; i < z.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    a(r, 0) = z[i].real();
    a(r, 1) = z[i].imag();
    a(r, 2) = 1.0;
    b(r) = -std::norm(z[i]);
  }
  const Eigen::Vector3d s = a.colPivHouseholderQr().solve(b);
  const double cx = -0.5 * s(0), cy = -0.5 * s(1);
  return std::sqrt(std::max(cx * cx + cy * cy - s(2), 0.0));
}

TemporalFilter spline_filter(const ExperimentConfig& cfg, const std::vector<double>& nodes, const SystemParams& p) {
  return make_spline(nodes, 0.0, cfg.spline_window / p.gamma_2);
}

double optimise_xi(const ExperimentConfig& cfg, const SystemParams& driven, std::size_t budget, double* best_xi) {
  auto objective = [&](const std::vector<double>& x) {
    if (!(x[0] >= cfg.filter_range_lo && x[0] <= cfg.filter_range_hi)) return -1.0;
    try {
      return ideal_wln(cfg, driven, make_gaussian(x[0], 0.0, driven.gamma_2));
    } catch (const NumericalError&) {
      return -1.0;
    }
  };
  const double start = std::clamp(cfg.filter_width, cfg.filter_range_lo, cfg.filter_range_hi);
  const SimplexResult r =
      nelder_mead_max(objective, {start}, {0.1 * (cfg.filter_range_hi - cfg.filter_range_lo)}, budget, 1, 2e-3, cfg.seed);
  *best_xi = r.x[0];
  return r.value;
}

}  // namespace

TemporalFilter build_filter(const std::string& kind, double width, const SystemParams& p) {
  if (kind == "boxcar") return make_boxcar(width, 0.0, p.gamma_2);
  if (kind == "gaussian") return make_gaussian(width, 0.0, p.gamma_2);
  throw ConfigError("filter kind '" + kind + "' takes more than one width parameter");
}

double ideal_wln(const ExperimentConfig& cfg, const SystemParams& driven, const TemporalFilter& f) {
  SimOptions o;
  o.fock_cutoff = cfg.fock_cutoff;
  const CaptureResult r = simulate_capture(driven, f, o);
  return wigner::wln(r.rho_mode, cfg.wigner_extent, cfg.wigner_step, cfg.log_base);
}

PointResult evaluate_point(const ExperimentConfig& cfg, const SystemParams& driven, const TemporalFilter& f,
                           std::uint64_t seed) {
  SimOptions o;
  o.fock_cutoff = cfg.fock_cutoff;
  const CaptureResult cap = simulate_capture(driven, f, o);
  const CMatrix& rho = cap.rho_mode;
  PointResult out;
  if (cfg.check_grid) {
    const GridConvergence g = wigner::grid_converged(rho, cfg.wigner_extent, cfg.wigner_step, cfg.log_base);
    out.wln_ideal = g.wln_base;
    out.grid_converged = g.converged;
  } else {
    out.wln_ideal = wigner::wln(rho, cfg.wigner_extent, cfg.wigner_step, cfg.log_base);
  }
  out.purity = (rho * rho).trace().real();
  for (Eigen::Index k = 0; k < 4; ++k) out.populations.push_back(k < rho.rows() ? rho(k, k).real() : 0.0);
  out.photon_number = cap.capture_efficiency;

  if (!cfg.tomography_enabled) {
    out.wln_pipeline = kNaN;
    out.fidelity = kNaN;
    return out;
  }
  // The measured field carries the reflected drive on top of the emission.
  // Its moments are shifted back by the known drive amplitude so the
  // reconstruction runs in the frame where the state is most compact.
  const cdouble beta = coherent_amplitude(driven, f);
  const CMatrix total = tomography::displace_state(rho, beta).rho;
  MomentSet moments;
  if (cfg.shots == 0) {
    moments = tomography::moments_from_state(total, cfg.order_cap);
  } else {
    const RecordBatch rec = tomography::synthesize_records(total, cfg.noise_photons, cfg.shots, seed);
    MomentEstimateOptions mo;
    mo.order_cap = cfg.order_cap;
    mo.seed = seed;
    moments = tomography::moments_from_records(rec, mo);
  }
  moments = tomography::shift_moments(moments, beta);
  ReconstructionResult fit;
  try {
    fit = tomography::mle_reconstruct(moments, cfg.tomography_dim);
  } catch (const MleConvergenceError& e) {
    fit = e.best();
  }
  const CMatrix padded = hilbert::pad(fit.rho, static_cast<std::size_t>(rho.rows()));
  const CMatrix rec_total = tomography::displace_state(padded, beta).rho;
  out.wln_pipeline = wigner::wln(rec_total, cfg.wigner_extent, cfg.wigner_step, cfg.log_base);
  out.fidelity = tomography::fidelity(padded, rho);
  return out;
}

SimplexResult nelder_mead_max(const std::function<double(const std::vector<double>&)>& f, std::vector<double> x0,
                              std::vector<double> step, std::size_t budget, std::size_t restarts, double tolerance,
                              std::uint64_t seed) {
  const std::size_t n = x0.size();
  if (n == 0 || step.size() != n) throw ConfigError("nelder_mead_max: bad dimensions");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> jitter(0.9, 1.1);

  SimplexResult best;
  best.x = x0;
  best.value = -std::numeric_limits<double>::infinity();
  std::size_t evals = 0;
  auto eval = [&](const std::vector<double>& x) {
    ++evals;
    const double v = f(x);
    if (v > best.value) {
      best.value = v;
      best.x = x;
    }
    return v;
  };

  bool converged = false;
  for (std::size_t round = 0; round <= restarts; ++round) {
    const double before = best.value;
    std::vector<std::vector<double>> simplex(n + 1, best.x);
    for (std::size_t i = 0; i < n; ++i) simplex[i + 1][i] += step[i] * jitter(rng);
    std::vector<double> vals(n + 1);
    for (std::size_t i = 0; i <= n; ++i) {
      if (evals >= budget) break;
      vals[i] = eval(simplex[i]);
    }
    converged = false;
    while (evals < budget) {
      std::vector<std::size_t> order(n + 1);
      for (std::size_t i = 0; i <= n; ++i) order[i] = i;
      std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return vals[a] > vals[b]; });
      std::vector<std::vector<double>> s2;
      std::vector<double> v2;
      for (std::size_t i : order) {
        s2.push_back(simplex[i]);
        v2.push_back(vals[i]);
      }
      simplex = std::move(s2);
      vals = std::move(v2);

      double size = 0.0;
      for (std::size_t i = 1; i <= n; ++i)
        for (std::size_t d = 0; d < n; ++d) size = std::max(size, std::abs(simplex[i][d] - simplex[0][d]));
      if (size < tolerance || std::abs(vals[0] - vals[n]) < 1e-12 * std::max(1.0, std::abs(vals[0]))) {
        converged = true;
        break;
      }

      std::vector<double> centroid(n, 0.0);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t d = 0; d < n; ++d) centroid[d] += simplex[i][d] / static_cast<double>(n);
      auto along = [&](double t) {
        std::vector<double> x(n);
        for (std::size_t d = 0; d < n; ++d) x[d] = centroid[d] + t * (simplex[n][d] - centroid[d]);
        return x;
      };
      const std::vector<double> xr = along(-1.0);
      const double fr = eval(xr);
      if (fr > vals[0] && evals < budget) {
        const std::vector<double> xe = along(-2.0);
        const double fe = eval(xe);
        if (fe > fr) {
          simplex[n] = xe;
          vals[n] = fe;
        } else {
          simplex[n] = xr;
          vals[n] = fr;
        }
      } else if (fr > vals[n - 1]) {
        simplex[n] = xr;
        vals[n] = fr;
      } else if (evals < budget) {
        const bool outside = fr > vals[n];
        const std::vector<double> xc = along(outside ? -0.5 : 0.5);
        const double fc = eval(xc);
        if (fc > std::max(fr, vals[n])) {
          simplex[n] = xc;
          vals[n] = fc;
        } else {
          for (std::size_t i = 1; i <= n && evals < budget; ++i) {
            for (std::size_t d = 0; d < n; ++d) simplex[i][d] = simplex[0][d] + 0.5 * (simplex[i][d] - simplex[0][d]);
            vals[i] = eval(simplex[i]);
          }
        }
      }
    }
    if (!converged) break;
    if (round > 0 && best.value - before <= 1e-9) break;
    for (auto& s : step) s *= 0.5;
  }
  best.evaluations = evals;
  best.converged = converged;
  return best;
}

Table run_reflection_circle(const ExperimentConfig& cfg) {
  const SystemParams p = cfg.params;
  const double span = cfg.reflection_span > 0.0 ? cfg.reflection_span : 5.0 * p.gamma_2;
  const double weak = cfg.weak_omega_ratio * p.gamma_r;
  const double critical = qubit::critical_drive(p).omega;
  Table t;
  t.columns = {"delta_mhz", "re_r_weak", "im_r_weak", "re_r_weak_comp", "im_r_weak_comp", "re_r_crit",
               "im_r_crit", "abs_r_crit",   "re_r_crit_comp", "im_r_crit_comp"};
  const std::size_t n = cfg.reflection_points;
  for (std::size_t i = 0; i < n; ++i) {
    double d = -span + 2.0 * span * static_cast<double>(i) / static_cast<double>(n - 1);
    if (n % 2 == 1 && i == n / 2) d = 0.0;
    const cdouble rw = qubit::reflection_coefficient(p.with_drive(d, weak));
    const cdouble rc = qubit::reflection_coefficient(p.with_drive(d, critical));
    const cdouble cw = qubit::compensate_mismatch(rw, p.phi, cfg.compensation_scale);
    const cdouble cc = qubit::compensate_mismatch(rc, p.phi, cfg.compensation_scale);
    t.add({d / mhz(1.0), rw.real(), rw.imag(), cw.real(), cw.imag(), rc.real(), rc.imag(), std::abs(rc), cc.real(),
           cc.imag()});
  }
  return t;
}

Table reflection_summary(const ExperimentConfig& cfg, const Table& trace) {
  const SystemParams p = cfg.params;
  std::vector<cdouble> weak;
  std::size_t centre = 0;
  double min_crit = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < trace.rows.size(); ++i) {
    const auto& r = trace.rows[i];
    weak.emplace_back(r[1], r[2]);
    if (std::abs(r[0]) < std::abs(trace.rows[centre][0])) centre = i;
    min_crit = std::min(min_crit, r[7]);
  }
  const double w_min = qubit::resonant_min_reflection_drive(p);
  const double r_res = std::abs(qubit::reflection_coefficient(p.with_drive(0.0, w_min)));
  Table s;
  s.columns = {"circle_radius_weak", "re_r_weak_comp_at_zero", "im_r_weak_comp_at_zero", "min_abs_r_crit",
               "abs_r_resonant_min", "abs_sin_phi"};
  s.add({circle_radius(weak), trace.rows[centre][3], trace.rows[centre][4], min_crit, r_res, std::abs(std::sin(p.phi))});
  return s;
}

Table run_wln_sweep(const ExperimentConfig& cfg, const RunControl& ctl) {
  const AxisSpec& axis = require_axis(cfg.sweep, "sweep");
  const std::string want = cfg.filter_kind == "boxcar" ? "tau" : cfg.filter_kind == "gaussian" ? "xi" : "";
  if (want.empty()) throw ConfigError("wln-sweep: filter.kind must be boxcar or gaussian");
  if (axis.name != want) throw ConfigError("wln-sweep: a " + cfg.filter_kind + " sweep runs over '" + want + "'");
  if (!(axis.start > 0.0)) throw ConfigError("wln-sweep: filter widths must be positive");
  const SystemParams driven = driven_params(cfg);
  const std::vector<double> values = axis.values();
  auto compute = [&](std::size_t i) {
    const PointResult r = evaluate_point(cfg, driven, build_filter(cfg.filter_kind, values[i], driven), cfg.seed + i);
    RowResult row;
    row.row = {values[i],          r.wln_ideal,         r.wln_pipeline,      r.purity,
               r.populations[0],   r.populations[1],    r.populations[2],    r.populations[3],
               r.fidelity,         r.photon_number,     r.grid_converged ? 1.0 : 0.0};
    row.status = r.grid_converged ? "ok" : "not_converged";
    return row;
  };
  return run_points(cfg, "wln-sweep",
                    {want, "wln_ideal", "wln_pipeline", "purity", "rho00", "rho11", "rho22", "rho33", "fidelity",
                     "photon_number", "grid_converged"},
                    values.size(), compute, ctl);
}

DephasingMap run_dephasing_map(const ExperimentConfig& cfg, const RunControl& ctl) {
  const AxisSpec& gp_axis = require_axis(cfg.sweep, "sweep");
  const AxisSpec& gn_axis = require_axis(cfg.sweep2, "sweep2");
  if (gp_axis.name != "gamma_p_khz" || gn_axis.name != "gamma_n_over_gamma_r")
    throw ConfigError("dephasing-map: sweep must be gamma_p_khz and sweep2 gamma_n_over_gamma_r");
  if (gp_axis.start < 0.0 || gn_axis.start < 0.0) throw ConfigError("dephasing-map: loss rates must be >= 0");
  const std::vector<double> gp = gp_axis.values(), gn = gn_axis.values();
  const std::size_t budget = std::min<std::size_t>(cfg.budget, 40);
  auto compute = [&](std::size_t k) {
    const std::size_t i = k / gn.size(), j = k % gn.size();
    ExperimentConfig local = cfg;
    local.params = SystemParams::from_loss_rates(cfg.params.gamma_r, gn[j] * cfg.params.gamma_r, khz(gp[i]),
                                                 cfg.params.delta, cfg.params.omega, cfg.params.phi);
    const SystemParams driven = driven_params(local);
    double xi = 0.0;
    const double w = optimise_xi(local, driven, budget, &xi);
    return RowResult{{gp[i], gn[j], xi, w}, "ok"};
  };
  DephasingMap out;
  out.map = run_points(cfg, "dephasing-map", {"gamma_p_khz", "gamma_n_over_gamma_r", "best_xi", "wln"},
                       gp.size() * gn.size(), compute, ctl);
  out.cut_gamma_p.columns = out.map.columns;
  out.cut_gamma_n.columns = out.map.columns;
  for (std::size_t k = 0; k < out.map.rows.size(); ++k) {
    if (k % gn.size() == 0) out.cut_gamma_p.add(out.map.rows[k], out.map.status[k]);
    if (k / gn.size() == 0) out.cut_gamma_n.add(out.map.rows[k], out.map.status[k]);
  }
  return out;
}

FilterOptimum optimize_filter(const ExperimentConfig& cfg) {
  const SystemParams driven = driven_params(cfg);
  FilterOptimum out;
  out.family = cfg.filter_kind;
  SimplexResult r;
  if (cfg.filter_kind == "spline") {
    const std::size_t n = cfg.spline_nodes;
    std::vector<double> x0(n), step(n);
    for (std::size_t k = 0; k < n; ++k) {
      // Neutral half-sine start over the window.
      x0[k] = std::sin(kPi * static_cast<double>(k + 1) / static_cast<double>(n + 1));
      step[k] = 0.25;
    }
    auto objective = [&](const std::vector<double>& x) {
      try {
        return ideal_wln(cfg, driven, spline_filter(cfg, x, driven));
      } catch (const NumericalError&) {
        return -1.0;
      } catch (const ConfigError&) {
        return -1.0;
      }
    };
    r = nelder_mead_max(objective, x0, step, cfg.budget, cfg.restarts, cfg.simplex_tolerance, cfg.seed);
  } else {
    auto objective = [&](const std::vector<double>& x) {
      if (!(x[0] >= cfg.filter_range_lo && x[0] <= cfg.filter_range_hi)) return -1.0;
      try {
        return ideal_wln(cfg, driven, build_filter(cfg.filter_kind, x[0], driven));
      } catch (const NumericalError&) {
        return -1.0;
      }
    };
    const double start = std::clamp(cfg.filter_width, cfg.filter_range_lo, cfg.filter_range_hi);
    r = nelder_mead_max(objective, {start}, {0.1 * (cfg.filter_range_hi - cfg.filter_range_lo)}, cfg.budget,
                        cfg.restarts, cfg.simplex_tolerance, cfg.seed);
  }
  out.parameters = r.x;
  out.wln = r.value;
  out.evaluations = r.evaluations;
  if (!r.converged)
    throw BudgetExhaustedError("optimize-filter: budget of " + std::to_string(cfg.budget) + " evaluations exhausted",
                               r.x, r.value);
  return out;
}

Table run_qubit_state_curves(const ExperimentConfig& cfg) {
  const AxisSpec& axis = require_axis(cfg.sweep, "sweep");
  if (axis.name != "omega_over_gamma_1") throw ConfigError("qubit-curves: sweep runs over 'omega_over_gamma_1'");
  if (axis.start < 0.0) throw ConfigError("qubit-curves: Rabi frequencies must be >= 0");
  const SystemParams p = cfg.params;
  Table t;
  t.columns = {"omega_over_gamma_1", "abs_rho01", "rho11", "purity"};
  for (double x : axis.values()) {
    const QubitState s = qubit::steady_state_analytic(p.with_drive(p.delta, x * p.gamma_1));
    t.add({x, s.coherence, s.population_excited, s.purity});
  }
  return t;
}

MollowResult run_mollow(const ExperimentConfig& cfg) {
  MollowResult out;
  std::vector<SystemParams> runs;
  if (cfg.drive == DriveMode::critical) {
    const SystemParams d = driven_params(cfg);
    runs.push_back(d.with_drive(0.0, d.omega));
    out.variants.push_back("on_resonance");
    runs.push_back(d);
    out.variants.push_back("critical");
  } else if (cfg.drive == DriveMode::explicit_drive) {
    runs.push_back(cfg.params);
    out.variants.push_back("drive");
  } else {
    throw ConfigError("mollow: needs a critical or explicit drive");
  }
  double span = cfg.mollow_span;
  if (!(span > 0.0)) {
    for (const auto& p : runs) span = std::max(span, 4.0 * std::max({p.omega, p.gamma_1, std::abs(p.delta)}));
  }
  PsdOptions po;
  po.omega_max = span;
  po.n_freqs = cfg.mollow_freqs % 2 == 1 ? cfg.mollow_freqs : cfg.mollow_freqs + 1;
  out.spectrum.columns = {"f_hz_offset"};
  std::vector<Spectrum> spectra;
  for (std::size_t v = 0; v < runs.size(); ++v) {
    const SystemParams& p = runs[v];
    const CorrelationTrace c = spectrum::two_time_correlation(p, cfg.mollow_tau_max, cfg.mollow_tau_points);
    spectra.push_back(spectrum::psd(c, po));
    out.spectrum.columns.push_back("psd_" + out.variants[v]);
    out.drive_omega.push_back(p.omega);
    out.drive_delta.push_back(p.delta);
    out.coherent_flux.push_back(spectra.back().coherent_flux);
    try {
      out.fitted_omega.push_back(spectrum::fit_rabi_from_psd(spectra.back(), p.with_drive(p.delta, 0.9 * p.omega)).omega);
    } catch (const UnresolvedError&) {
      out.fitted_omega.push_back(kNaN);
    }
  }
  for (std::size_t i = 0; i < spectra.front().freqs.size(); ++i) {
    std::vector<double> row{spectra.front().freqs[i] / kTwoPi};
    for (const auto& s : spectra) row.push_back(s.psd[i]);
    out.spectrum.add(std::move(row));
  }
  return out;
}

CaptureDump run_capture(const ExperimentConfig& cfg) {
  const SystemParams driven = driven_params(cfg);
  const TemporalFilter f = build_filter(cfg.filter_kind, cfg.filter_width, driven);
  SimOptions o;
  o.fock_cutoff = cfg.fock_cutoff;
  const CaptureResult cap = simulate_capture(driven, f, o);
  CaptureDump out;
  out.rho_mode = cap.rho_mode;
  out.coherent_amplitude = coherent_amplitude(driven, f);
  const GridConvergence g = wigner::grid_converged(cap.rho_mode, cfg.wigner_extent, cfg.wigner_step, cfg.log_base);
  out.summary.columns = {"wln", "wln_extended", "wln_refined", "photon_number", "purity", "re_beta", "im_beta",
                         "trace_defect", "steps"};
  out.summary.add({g.wln_base, g.wln_extended, g.wln_refined, cap.capture_efficiency,
                   (cap.rho_mode * cap.rho_mode).trace().real(), out.coherent_amplitude.real(),
                   out.coherent_amplitude.imag(), cap.report.trace_defect, static_cast<double>(cap.report.steps)},
                  g.converged ? "ok" : "not_converged");
  return out;
}

void write_table_csv(const std::string& path, const Table& t, const ExperimentConfig& cfg, const std::string& command) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path);
  out << "# mirrorqed " << command << " config_hash=" << cfg.hash << '\n';
  out << "# generated " << timestamp() << '\n';
  std::vector<std::string> head = t.columns;
  head.push_back("status");
  csv::write_row(out, head);
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    std::vector<std::string> cells;
    for (double v : t.rows[i]) cells.push_back(std::isfinite(v) ? csv::fmt(v) : "nan");
    cells.push_back(t.status[i]);
    csv::write_row(out, cells);
  }
}

void write_table_json(const std::string& path, const Table& t, const ExperimentConfig& cfg, const std::string& command) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path);
  json rows = json::array();
  for (const auto& r : t.rows) {
    json row = json::array();
    for (double v : r) row.push_back(number_or_null(v));
    rows.push_back(row);
  }
  const json j{{"command", command}, {"config_hash", cfg.hash}, {"generated", timestamp()},
               {"config", json::parse(cfg.canonical)}, {"columns", t.columns}, {"rows", rows},
               {"status", t.status}};
  out << j.dump(1) << '\n';
}

}  // namespace experiments
}  // namespace mirrorqed
