#include "textrisk/common/exec.hpp"

#include <omp.h>

namespace textrisk {

int max_threads() noexcept { return omp_get_max_threads(); }

}  // namespace textrisk
