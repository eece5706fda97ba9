#pragma once

namespace xray2vol {

/// Applies the XRAY2VOL_THREADS cap (if set) to OpenMP and returns the thread count in use.
int configure_threads_from_env();

/// Current OpenMP thread budget.
int max_threads();

}  // namespace xray2vol
