#include "isurv/error.hpp"

#include <atomic>
#include <iostream>

namespace isurv {

namespace {
std::atomic<bool> g_silenced{false};
std::atomic<long> g_count{0};
}  // namespace

void warn(std::string_view message) {
  ++g_count;
  if (!g_silenced) std::cerr << "warning: " << message << '\n';
}

void set_warnings_silenced(bool silenced) { g_silenced = silenced; }

long warning_count() { return g_count; }

}  // namespace isurv
