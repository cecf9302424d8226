#include "torvm/log.hpp"

#include <atomic>
#include <iostream>
#include <mutex>
#include <set>

namespace torvm {

namespace {
std::atomic<bool> g_enabled{true};
std::atomic<int> g_count{0};
std::mutex g_mutex;
}  // namespace

void warn(const std::string& msg) {
  ++g_count;
  if (!g_enabled) return;
  static std::set<std::string> seen;
  std::lock_guard<std::mutex> lk(g_mutex);
  if (!seen.insert(msg).second) return;
  std::cerr << "warning: " << msg << '\n';
}

void set_warnings_enabled(bool on) { g_enabled = on; }
int warning_count() { return g_count; }

}  // namespace torvm
