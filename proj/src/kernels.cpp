#include "velo/kernels.hpp"

namespace velo::kernels {

const Backend* avx2_impl();  // defined in kernels_avx2.cpp

namespace {

bool cpu_has_avx2() {
#if defined(__x86_64__) || defined(_M_X64)
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

const Backend* pick_best() {
  if (cpu_has_avx2()) {
    if (const Backend* k = avx2_impl()) return k;
  }
  return &scalar();
}

const Backend*& active_slot() {
  static const Backend* slot = pick_best();
  return slot;
}

}  // namespace

const Backend* avx2() { return cpu_has_avx2() ? avx2_impl() : nullptr; }

const Backend& active() { return *active_slot(); }

bool select(const std::string& name) {
  if (name == "auto") {
    active_slot() = pick_best();
    return true;
  }
  if (name == "scalar") {
    active_slot() = &scalar();
    return true;
  }
  if (name == "avx2") {
    if (const Backend* k = avx2()) {
      active_slot() = k;
      return true;
    }
    return false;
  }
  return false;
}

std::vector<std::string> available() {
  std::vector<std::string> out = {"scalar"};
  if (avx2()) out.push_back("avx2");
  return out;
}

}  // namespace velo::kernels
