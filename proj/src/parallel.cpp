#include "owl3d/parallel.hpp"

#include <omp.h>

#include "owl3d/common.hpp"

namespace owl3d {

void set_num_threads(int threads) {
  require(threads >= 1, "thread count must be >= 1, got " + std::to_string(threads));
  omp_set_num_threads(threads);
}

int num_threads() { return omp_get_max_threads(); }

}  // namespace owl3d
