#include "modeljoin/logging.hpp"

#include <cstdlib>

namespace modeljoin {

int log_level() {
  static const int level = [] {
    const char* env = std::getenv("MODELJOIN_LOG");
    if (!env || !*env) return 0;
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    return end != env ? static_cast<int>(v) : 0;
  }();
  return level;
}

}  // namespace modeljoin
