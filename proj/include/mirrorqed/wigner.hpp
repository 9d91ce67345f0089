#pragma once

#include <string>
#include <vector>

#include "mirrorqed/hilbert.hpp"

namespace mirrorqed {

/// W(alpha) sampled on the square [-extent, extent]^2 with spacing `step`.
/// values[iy * points + ix] holds W at Re alpha = -extent + ix*step,
/// Im alpha = -extent + iy*step.
struct WignerGrid {
  double extent = 5.0;
  double step = 0.05;
  std::size_t points = 0;  ///< per axis
  std::vector<double> values;
  double normalization = 0.0;  ///< trapezoid \int W d^2 alpha
  double abs_integral = 0.0;   ///< trapezoid \int |W| d^2 alpha
  double max_imag = 0.0;       ///< largest |Im W| seen before dropping it

  double re_alpha(std::size_t ix) const { return -extent + step * static_cast<double>(ix); }
  double im_alpha(std::size_t iy) const { return -extent + step * static_cast<double>(iy); }
  double at(std::size_t ix, std::size_t iy) const { return values[iy * points + ix]; }
};

enum class LogBase { natural, two };

struct GridConvergence {
  double wln_base = 0.0;
  double wln_extended = 0.0;  ///< extent + 1
  double wln_refined = 0.0;   ///< step / 2
  double normalization = 0.0;
  bool converged = false;
};

namespace wigner {

/// (2/pi) Tr[D(alpha) rho D(alpha)^dag Pi] = (2/pi) Tr[rho D(-2 alpha) Pi],
/// using exact displacement matrix elements; the imaginary part is kept
/// so callers can check Hermiticity.
cdouble wigner_point(const CMatrix& rho, cdouble alpha);

/// Same quantity through exp(alpha a^dag - alpha* a) built with `padding`
/// extra levels; slow, for cross-checks at moderate |alpha|.
cdouble wigner_point_padded(const CMatrix& rho, cdouble alpha, std::size_t padding = 20);

/// Grid evaluation fanned out over OpenMP threads.
WignerGrid wigner_grid(const CMatrix& rho, double extent = 5.0, double step = 0.05);
/// Single-threaded reference with identical arithmetic.
WignerGrid wigner_grid_serial(const CMatrix& rho, double extent = 5.0, double step = 0.05);

/// log \int |W|; 0 when the integral does not exceed 1 + 1e-12.
double wln(const WignerGrid& grid, LogBase base = LogBase::natural);
double wln(const CMatrix& rho, double extent = 5.0, double step = 0.05, LogBase base = LogBase::natural);

GridConvergence grid_converged(const CMatrix& rho, double extent = 5.0, double step = 0.05,
                               LogBase base = LogBase::natural);

void write_grid_csv(const std::string& path, const WignerGrid& grid);
void write_grid_json(const std::string& path, const WignerGrid& grid);

}  // namespace wigner
}  // namespace mirrorqed
