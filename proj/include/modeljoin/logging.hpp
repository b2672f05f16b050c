#pragma once

#include <iostream>
#include <sstream>

namespace modeljoin {

// Verbosity from MODELJOIN_LOG: 0 = warnings (default), 1 = info, 2 = debug.
int log_level();

inline void log_at(int level, const std::string& msg) {
  if (log_level() >= level) std::cerr << "[modeljoin] " << msg << "\n";
}

inline void log_warn(const std::string& msg) { log_at(0, msg); }
inline void log_info(const std::string& msg) { log_at(1, msg); }
inline void log_debug(const std::string& msg) { log_at(2, msg); }

}  // namespace modeljoin
