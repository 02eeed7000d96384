#pragma once

namespace fds {

/// Applies the FDS_THREADS cap (if set) to the OpenMP runtime. Idempotent.
void configure_threads();

/// Threads an OpenMP parallel region will use after configure_threads().
[[nodiscard]] int max_threads();

}  // namespace fds
