#include "fds/parallel.hpp"

#include <omp.h>

#include <cstdlib>
#include <mutex>
#include <string>

namespace fds {

void configure_threads() {
  static std::once_flag once;
  std::call_once(once, [] {
    const char* env = std::getenv("FDS_THREADS");
    if (env == nullptr) return;
    try {
      const int cap = std::stoi(env);
      if (cap >= 1) omp_set_num_threads(std::min(cap, omp_get_max_threads()));
    } catch (const std::exception&) {
      // ignore malformed values
    }
  });
}

int max_threads() {
  configure_threads();
  return omp_get_max_threads();
}

}  // namespace fds
