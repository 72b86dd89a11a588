#include "deform/parallel.hpp"

#include <cstdlib>
#include <string>

namespace deform {

void apply_thread_cap_from_env() {
#ifdef _OPENMP
  const char* v = std::getenv("DEFORM_THREADS");
  if (!v) return;
  try {
    int n = std::stoi(v);
    if (n >= 1) omp_set_num_threads(n);
  } catch (...) {
    // unparsable cap: keep the default pool
  }
#endif
}

int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

}  // namespace deform
