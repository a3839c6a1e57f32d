#include "obree/parallel.hpp"

#include <omp.h>

namespace obree::parallel {

void set_num_threads(int threads) {
  static const int runtime_default = omp_get_max_threads();
  omp_set_num_threads(threads > 0 ? threads : runtime_default);
}

int max_threads() { return omp_get_max_threads(); }

bool in_parallel() { return omp_in_parallel() != 0; }

}  // namespace obree::parallel
