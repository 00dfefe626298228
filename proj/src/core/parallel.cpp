#include "jepa_fer/parallel.hpp"

#include <tbb/blocked_range.h>
#include <tbb/global_control.h>
#include <tbb/parallel_for.h>

#include <cstdlib>
#include <memory>
#include <string>
#include <thread>

namespace jepa_fer {

namespace {

std::size_t read_thread_cap() {
  if (const char* env = std::getenv("JEPA_FER_THREADS")) {
    try {
      const long v = std::stol(env);
      if (v > 0) return static_cast<std::size_t>(v);
    } catch (const std::exception&) {
    }
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : hw;
}

tbb::global_control& thread_control() {
  static tbb::global_control control(tbb::global_control::max_allowed_parallelism,
                                     read_thread_cap());
  return control;
}

}  // namespace

std::size_t max_threads() {
  static const std::size_t cap = read_thread_cap();
  return cap;
}

void parallel_for(std::size_t begin, std::size_t end, std::size_t grain,
                  const std::function<void(std::size_t, std::size_t)>& fn) {
  if (end <= begin) return;
  if (max_threads() == 1 || end - begin <= grain) {
    fn(begin, end);
    return;
  }
  thread_control();
  tbb::parallel_for(tbb::blocked_range<std::size_t>(begin, end, grain),
                    [&](const tbb::blocked_range<std::size_t>& r) { fn(r.begin(), r.end()); });
}

}  // namespace jepa_fer
