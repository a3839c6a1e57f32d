#pragma once

namespace obree::parallel {

/// Sets the OpenMP team size; 0 means the runtime default.
void set_num_threads(int threads);
int max_threads();
bool in_parallel();

}  // namespace obree::parallel
