#pragma once

#include <cstddef>
#include <functional>

namespace jepa_fer {

/// Worker cap: JEPA_FER_THREADS when set and positive, else hardware
/// concurrency. Read once per process.
std::size_t max_threads();

/// Runs fn(i) for every i in [begin, end). Work items must be independent;
/// each one writes only its own outputs so results never depend on the
/// schedule.
void parallel_for(std::size_t begin, std::size_t end, std::size_t grain,
                  const std::function<void(std::size_t, std::size_t)>& fn);

}  // namespace jepa_fer
