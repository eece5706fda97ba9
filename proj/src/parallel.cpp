#include "xray2vol/parallel.hpp"

#include <omp.h>

#include <cstdlib>
#include <string>

namespace xray2vol {

int configure_threads_from_env() {
    if (const char* env = std::getenv("XRAY2VOL_THREADS")) {
        try {
            int n = std::stoi(env);
            if (n > 0) omp_set_num_threads(n);
        } catch (const std::exception&) {
            // ignore malformed values and keep the OpenMP default
        }
    }
    return omp_get_max_threads();
}

int max_threads() { return omp_get_max_threads(); }

}  // namespace xray2vol
