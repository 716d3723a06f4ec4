#include "hvs5m/parallel.hpp"

#include <cstdlib>
#include <string>

namespace hvs {

std::size_t resolve_threads(std::size_t requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("HVS5M_THREADS"); env && *env) {
    try {
      const long v = std::stol(env);
      if (v > 0) return static_cast<std::size_t>(v);
    } catch (const std::exception&) {
    }
  }
  return std::max<unsigned>(std::thread::hardware_concurrency(), 1u);
}

}  // namespace hvs
