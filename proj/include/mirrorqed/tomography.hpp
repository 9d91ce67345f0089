#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "mirrorqed/errors.hpp"
#include "mirrorqed/hilbert.hpp"

namespace mirrorqed {

/// Normally ordered moments <a^dag^m a^n> for m + n <= order_cap.
struct MomentSet {
  int order_cap = 6;
  std::map<std::pair<int, int>, cdouble> entries;
  std::map<std::pair<int, int>, double> sigmas;

  bool has(int m, int n) const { return entries.count({m, n}) != 0; }
  cdouble at(int m, int n) const;
  std::optional<double> sigma(int m, int n) const;
  void set(int m, int n, cdouble value, std::optional<double> err = std::nullopt);
  /// Hermitian-pair symmetry and the (0,0) = 1 normalisation.
  void validate(double tol = 1e-10) const;
};

/// One complex amplitude per shot. Signal records carry S = a + h^dag;
/// background records are taken with the mode in vacuum.
struct RecordBatch {
  std::vector<cdouble> signal;
  std::vector<cdouble> background;
};

struct MleOptions {
  int max_iterations = 5000;
  double relative_tolerance = 1e-10;
  double sigma_floor = 1e-6;
  bool use_sigmas = true;
  /// Weight (relative to the largest moment weight) of rho(dim-1, dim-1)^2
  /// added to the misfit; breaks ties among equally good fits.
  double top_level_penalty = 1e-2;
};

struct ReconstructionResult {
  CMatrix rho;
  double cost = 0.0;
  int iterations = 0;
  double gradient_norm = 0.0;
  std::optional<double> fidelity_to_reference;
};

/// Iteration cap reached; carries the best state found.
class MleConvergenceError : public ConvergenceError {
 public:
  MleConvergenceError(const std::string& what, ReconstructionResult best)
      : ConvergenceError(what), best_(std::move(best)) {}
  const ReconstructionResult& best() const { return best_; }

 private:
  ReconstructionResult best_;
};

struct StateSummary {
  std::vector<double> populations;
  double purity = 0.0;
  std::vector<cdouble> coherences;  ///< rho(n, n+1)
};

struct DisplacedState {
  CMatrix rho;
  double leakage = 0.0;  ///< trace lost when cropping back to dim
};

struct MomentEstimateOptions {
  int order_cap = 6;
  int resamples = 200;
  int blocks = 100;
  std::uint64_t seed = 1;
  /// IllConditionedError when a required background moment <h^k h^dag^k>
  /// has a relative bootstrap error above this.
  double max_noise_relative_error = 0.5;
};

namespace tomography {

MomentSet moments_from_state(const CMatrix& rho, int order_cap = 6);

/// Signal shots sample the Husimi function of rho plus complex Gaussian
/// noise with E|nu|^2 = noise_photons; background shots do the same for vacuum.
RecordBatch synthesize_records(const CMatrix& rho, double noise_photons, std::size_t shots, std::uint64_t seed);

/// Binomial unscrambling of the noise moments with block-bootstrap errors.
MomentSet moments_from_records(const RecordBatch& batch, const MomentEstimateOptions& opts = {});

/// Weighted least-squares fit of a Cholesky-parameterised state to the
/// moments, solved by damped Gauss-Newton (Levenberg-Marquardt).
ReconstructionResult mle_reconstruct(const MomentSet& moments, std::size_t dim, const MleOptions& opts = {});

/// Weighted moment misfit of rho = T^dag T / Tr(T^dag T); `gradient` gets
/// dC/dRe T_ij + i dC/dIm T_ij on the lower triangle.
double mle_cost(const MomentSet& moments, const CMatrix& t, CMatrix* gradient, const MleOptions& opts = {});

/// Tr sqrt(sqrt(a) b sqrt(a)).
double fidelity(const CMatrix& a, const CMatrix& b);

StateSummary state_summary(const CMatrix& rho);

/// Moments of b = a - beta from moments of a, by binomial expansion of the
/// normally ordered product; errors propagated as if uncorrelated.
MomentSet shift_moments(const MomentSet& moments, cdouble beta);
/// D(beta) rho D(beta)^dag evaluated with `padding` extra levels.
DisplacedState displace_state(const CMatrix& rho, cdouble beta, std::size_t padding = 20);

void write_moments_csv(const std::string& path, const MomentSet& moments);
MomentSet read_moments_csv(const std::string& path);
void write_records_csv(const std::string& path, const RecordBatch& batch);
RecordBatch read_records_csv(const std::string& path);

}  // namespace tomography
}  // namespace mirrorqed
