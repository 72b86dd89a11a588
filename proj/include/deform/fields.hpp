#pragma once

#include <string>

#include "deform/schwartz.hpp"

namespace deform {

// Closed-form field families. All of them factor as
//   amplitude * x_bump(x) * fiber_profile(xi) * radial_cutoff(rho)
// with rho the sigma-scaled distance from xi_center, so every instance
// is exactly zero outside its declared conic support.
//
//   gaussian             exp(-rho^2 / 2)
//   hermite-gaussian     prod_a He_{n_a}(u_a) * exp(-rho^2 / 2)
//   windowed-polynomial  sum_j c_j rho^{2j}, hard-windowed (compact in xi)
struct FieldConfig {
  std::string family = "gaussian";
  int base_dim = 1;
  int normal_dim = 1;
  double amplitude = 1.0;
  VecD xi_center;                   // per fiber axis, default 0
  VecD xi_sigma;                    // per fiber axis, default 1
  std::vector<int> hermite_orders;  // hermite-gaussian only
  VecD poly_coeffs;                 // windowed-polynomial only, powers of rho^2
  Box x_window;                     // x bump is exactly 1 here
  double x_margin = 1.0;            // falloff width outside; <= 0 disables bump
  VecD x_period;                    // per-axis base period; entry > 0 wraps that axis
  double cutoff_inner = 8.0;        // scaled radius where the cutoff starts
  double cutoff_outer = 10.0;       // scaled radius where the field hits 0
  int support_slabs = 4;            // t-resolution of the support pieces
  std::string instance;
  std::string name;
};

SchwartzDncField field_from_config(const FieldConfig& cfg);

}  // namespace deform
