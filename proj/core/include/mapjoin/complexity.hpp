#pragma once

namespace mapjoin {

/// Inputs of the cost model: total observation count, total state entity
/// count, solver iteration count, and the number of local maps.
struct ComplexityParams {
  double total_observations = 0;  // O
  double total_state_size = 0;    // S
  int iterations = 1;             // m
  int map_count = 2;              // n

  void validate() const;
};

/// Predicted costs relative to solving the whole problem as one nonlinear
/// least squares of cost m*O + m*S^3. The linear joining pipeline pays one
/// closed-form solve per pairwise join; the nonlinear variants pay m solves.
struct ComplexityRatios {
  double local_build = 0;

  double seq_join = 0;
  double seq_total = 0;
  double dc_join = 0;
  double dc_total = 0;

  double nl_seq_join = 0;
  double nl_seq_total = 0;
  double nl_dc_join = 0;
  double nl_dc_total = 0;
};

/// Evaluates the model. Sequential joining sums over maps i = 2..n the cost
/// of re-solving a joint map of i/n of the state; divide-and-conquer sums
/// floor(n/2^k) joins of 2^k/n-sized maps per level k plus the final
/// full-size join. Local map building costs m*O + (m/n^2)*S^3.
ComplexityRatios complexity_model(const ComplexityParams& p);

}  // namespace mapjoin
