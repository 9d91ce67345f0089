#include "mirrorqed/wigner.hpp"

#include <cmath>
#include <fstream>

#include <json.hpp>

#include "mirrorqed/csv.hpp"
#include "mirrorqed/errors.hpp"

namespace mirrorqed::wigner {
namespace {

constexpr double kImagTolerance = 1e-6;

// sqrt(n! / (n+k)!) for n + k < dim, stored at [k * dim + n].
std::vector<double> ladder_norms(std::size_t dim) {
  std::vector<double> c(dim * dim, 0.0);
  for (std::size_t k = 0; k < dim; ++k)
    for (std::size_t n = 0; n + k < dim; ++n)
      c[k * dim + n] = std::exp(0.5 * (std::lgamma(n + 1.0) - std::lgamma(n + k + 1.0)));
  return c;
}

struct Evaluator {
  const CMatrix& rho;
  std::size_t dim;
  std::vector<double> norms;

  explicit Evaluator(const CMatrix& r) : rho(r), dim(static_cast<std::size_t>(r.rows())), norms(ladder_norms(dim)) {}

  cdouble operator()(cdouble alpha) const {
    const cdouble beta = -2.0 * alpha;
    const double x = std::norm(beta);
    std::vector<double> lag(dim);
    cdouble total{0.0, 0.0};
    cdouble beta_k{1.0, 0.0};
    for (std::size_t k = 0; k < dim; ++k) {
      // L_n^{(k)}(x) for n = 0 .. dim-1-k.
      const std::size_t count = dim - k;
      lag[0] = 1.0;
      if (count > 1) lag[1] = 1.0 + static_cast<double>(k) - x;
      for (std::size_t n = 1; n + 1 < count; ++n)
        lag[n + 1] = ((2.0 * n + 1.0 + k - x) * lag[n] - (n + static_cast<double>(k)) * lag[n - 1]) / (n + 1.0);
      cdouble upper{0.0, 0.0}, lower{0.0, 0.0};
      for (std::size_t n = 0; n < count; ++n) {
        const double w = (n % 2 == 0 ? 1.0 : -1.0) * norms[k * dim + n] * lag[n];
        upper += w * rho(n, n + k);
        if (k > 0) lower += w * rho(n + k, n);
      }
      if (k == 0)
        total += upper;
      else
        total += upper * beta_k + lower * std::conj(beta_k);
      beta_k *= beta;
    }
    return (2.0 / kPi) * std::exp(-0.5 * x) * total;
  }
};

std::size_t axis_points(double extent, double step) {
  if (!(extent > 0.0) || !(step > 0.0) || !std::isfinite(extent) || !std::isfinite(step))
    throw ConfigError("Wigner grid needs extent > 0 and step > 0");
  const double intervals = 2.0 * extent / step;
  const double rounded = std::round(intervals);
  if (std::abs(intervals - rounded) > 1e-9 * std::max(1.0, rounded))
    throw ConfigError("Wigner grid step must divide 2*extent");
  return static_cast<std::size_t>(rounded) + 1;
}

void finish(WignerGrid& g, const std::vector<double>& imag) {
  // Deterministic row-major trapezoid reduction.
  double sum = 0.0, abs_sum = 0.0, worst_imag = 0.0;
  const std::size_t n = g.points;
  for (std::size_t iy = 0; iy < n; ++iy) {
    const double wy = (iy == 0 || iy + 1 == n) ? 0.5 : 1.0;
    for (std::size_t ix = 0; ix < n; ++ix) {
      const double wx = (ix == 0 || ix + 1 == n) ? 0.5 : 1.0;
      const double v = g.values[iy * n + ix];
      sum += wx * wy * v;
      abs_sum += wx * wy * std::abs(v);
      worst_imag = std::max(worst_imag, std::abs(imag[iy * n + ix]));
    }
  }
  g.normalization = sum * g.step * g.step;
  g.abs_integral = abs_sum * g.step * g.step;
  g.max_imag = worst_imag;
  if (worst_imag > kImagTolerance)
    throw TruncationError("Wigner function has an imaginary part of " + std::to_string(worst_imag));
}

WignerGrid make_grid(const CMatrix& rho, double extent, double step, bool parallel) {
  if (rho.rows() != rho.cols() || rho.rows() < 1) throw ConfigError("density matrix must be square");
  WignerGrid g;
  g.extent = extent;
  g.step = step;
  g.points = axis_points(extent, step);
  const std::size_t n = g.points;
  g.values.assign(n * n, 0.0);
  std::vector<double> imag(n * n, 0.0);
  const Evaluator eval(rho);
  const auto rows = static_cast<long>(n);
#pragma omp parallel for schedule(static) if (parallel)
  for (long iy = 0; iy < rows; ++iy) {
    const auto y = static_cast<std::size_t>(iy);
    for (std::size_t ix = 0; ix < n; ++ix) {
      cdouble w = eval({g.re_alpha(ix), g.im_alpha(y)});
      g.values[y * n + ix] = w.real();
      imag[y * n + ix] = w.imag();
    }
  }
  finish(g, imag);
  return g;
}

}  // namespace

cdouble wigner_point(const CMatrix& rho, cdouble alpha) { return Evaluator(rho)(alpha); }

cdouble wigner_point_padded(const CMatrix& rho, cdouble alpha, std::size_t padding) {
  const auto dim = static_cast<std::size_t>(rho.rows());
  const std::size_t work = dim + padding;
  CMatrix a = hilbert::destroy(work);
  CMatrix d = hilbert::expm(alpha * a.adjoint() - std::conj(alpha) * a);
  CMatrix moved = d * hilbert::pad(rho, work) * d.adjoint();
  return (2.0 / kPi) * (moved * hilbert::parity_operator(work)).trace();
}

WignerGrid wigner_grid(const CMatrix& rho, double extent, double step) { return make_grid(rho, extent, step, true); }

WignerGrid wigner_grid_serial(const CMatrix& rho, double extent, double step) {
  return make_grid(rho, extent, step, false);
}

double wln(const WignerGrid& grid, LogBase base) {
  if (grid.abs_integral <= 1.0 + 1e-12) return 0.0;
  return base == LogBase::natural ? std::log(grid.abs_integral) : std::log2(grid.abs_integral);
}

double wln(const CMatrix& rho, double extent, double step, LogBase base) {
  return wln(wigner_grid(rho, extent, step), base);
}

GridConvergence grid_converged(const CMatrix& rho, double extent, double step, LogBase base) {
  GridConvergence r;
  WignerGrid g = wigner_grid(rho, extent, step);
  r.wln_base = wln(g, base);
  r.normalization = g.normalization;
  r.wln_extended = wln(rho, extent + 1.0, step, base);
  r.wln_refined = wln(rho, extent, 0.5 * step, base);
  r.converged = std::abs(r.wln_extended - r.wln_base) < 1e-3 && std::abs(r.wln_refined - r.wln_base) < 1e-3;
  return r;
}

void write_grid_csv(const std::string& path, const WignerGrid& grid) {
  std::ofstream os(path);
  if (!os) throw ConfigError("cannot write Wigner grid: " + path);
  csv::write_row(os, std::vector<std::string>{"re_alpha", "im_alpha", "w"});
  for (std::size_t iy = 0; iy < grid.points; ++iy)
    for (std::size_t ix = 0; ix < grid.points; ++ix)
      csv::write_row(os, std::vector<double>{grid.re_alpha(ix), grid.im_alpha(iy), grid.at(ix, iy)});
}

void write_grid_json(const std::string& path, const WignerGrid& grid) {
  std::ofstream os(path);
  if (!os) throw ConfigError("cannot write Wigner grid: " + path);
  nlohmann::json j;
  j["extent"] = grid.extent;
  j["step"] = grid.step;
  j["points"] = grid.points;
  j["normalization"] = grid.normalization;
  j["abs_integral"] = grid.abs_integral;
  j["layout"] = "row-major, rows along Im alpha";
  j["values"] = grid.values;
  os << j.dump() << '\n';
}

}  // namespace mirrorqed::wigner
