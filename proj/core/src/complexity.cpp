#include "mapjoin/complexity.hpp"

#include <cmath>

#include "mapjoin/errors.hpp"

namespace mapjoin {

void ComplexityParams::validate() const {
  if (!(total_observations > 0) || !(total_state_size > 0)) {
    throw InvalidInputError("complexity_model: counts must be positive");
  }
  if (iterations < 1) {
    throw InvalidInputError("complexity_model: iterations must be >= 1");
  }
  if (map_count < 2) {
    throw InvalidInputError("complexity_model: needs at least two maps");
  }
}

ComplexityRatios complexity_model(const ComplexityParams& p) {
  p.validate();
  const double og = p.total_observations;
  const double sg = p.total_state_size;
  const double m = p.iterations;
  const double n = p.map_count;
  const double s3 = sg * sg * sg;

  const double baseline = m * og + m * s3;
  const double local = m * og + (m / (n * n)) * s3;

  auto cube = [](double v) { return v * v * v; };

  double seq = 0.0;
  double nl_seq = 0.0;
  for (int i = 2; i <= p.map_count; ++i) {
    const double frac = static_cast<double>(i) / n;
    seq += 2.0 * frac * sg + cube(frac * sg);
    nl_seq += m * frac * sg + m * cube(frac * sg);
  }

  // Hierarchical variant: floor(n / 2^k) joins of maps holding 2^k / n of the
  // state at level k, plus the final full-size join.
  const int levels = static_cast<int>(std::ceil(std::log2(n)));
  double dc = 2.0 * sg + s3;
  double nl_dc = m * sg + m * s3;
  for (int k = 1; k <= levels - 1; ++k) {
    const double pow2k = std::ldexp(1.0, k);
    const double joins = std::floor(n / pow2k);
    const double frac = pow2k / n;
    dc += (2.0 * frac * sg + cube(frac * sg)) * joins;
    nl_dc += (m * frac * sg + m * cube(frac * sg)) * joins;
  }

  ComplexityRatios r;
  r.local_build = local / baseline;
  r.seq_join = seq / baseline;
  r.seq_total = (local + seq) / baseline;
  r.dc_join = dc / baseline;
  r.dc_total = (local + dc) / baseline;
  r.nl_seq_join = nl_seq / baseline;
  r.nl_seq_total = (local + nl_seq) / baseline;
  r.nl_dc_join = nl_dc / baseline;
  r.nl_dc_total = (local + nl_dc) / baseline;
  return r;
}

}  // namespace mapjoin
