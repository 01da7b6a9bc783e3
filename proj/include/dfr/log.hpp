#pragma once

#include <cstdio>
#include <cstdlib>
#include <string>

namespace dfr {

/// DFR_LOG: unset or "0"/"quiet" -> silent, "1"/"info" -> progress lines,
/// "2"/"debug" -> per-iteration detail. Logs go to stderr.
inline int log_level() {
  static int level = [] {
    const char* e = std::getenv("DFR_LOG");
    if (!e) return 0;
    std::string v(e);
    if (v == "0" || v == "quiet" || v.empty()) return 0;
    if (v == "2" || v == "debug") return 2;
    return 1;
  }();
  return level;
}

inline void log_info(const std::string& msg) {
  if (log_level() >= 1) std::fprintf(stderr, "[dfr] %s\n", msg.c_str());
}

inline void log_debug(const std::string& msg) {
  if (log_level() >= 2) std::fprintf(stderr, "[dfr] %s\n", msg.c_str());
}

}  // namespace dfr
