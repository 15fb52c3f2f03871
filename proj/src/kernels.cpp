#include "tenkit/kernels.hpp"

#include <atomic>
#include <cstdlib>
#include <stdexcept>

namespace tenkit::kernels {
namespace {

std::atomic<const Table*> g_active{nullptr};

const Table* resolve(const std::string& which) {
  if (which == "scalar") return &scalar();
  if (which == "avx2") {
    if (!avx2_available())
      throw std::runtime_error("kernels: avx2 requested but not supported");
    return &avx2();
  }
  if (which == "auto" || which.empty())
    return avx2_available() ? &avx2() : &scalar();
  throw std::invalid_argument("kernels: unknown variant '" + which + "'");
}

}  // namespace

const Table& active() {
  const Table* t = g_active.load(std::memory_order_acquire);
  if (!t) {
    const char* env = std::getenv("TENKIT_SIMD");
    t = resolve(env ? env : "auto");
    g_active.store(t, std::memory_order_release);
  }
  return *t;
}

std::string select(const std::string& which) {
  const Table* t = resolve(which);
  g_active.store(t, std::memory_order_release);
  return t->name;
}

}  // namespace tenkit::kernels
