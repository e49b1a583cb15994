#include "modinv/kernels.hpp"

#include <cstdlib>
#include <cstring>

namespace modinv::kernels {

const Table* avx2_table_compiled();  // defined in kernels_avx2.cpp

namespace {

bool cpu_has_avx2_fma() {
#if defined(__x86_64__) || defined(_M_X64)
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

const Table* select() {
  const Table* avx2 = cpu_has_avx2_fma() ? avx2_table_compiled() : nullptr;
  const char* pref = std::getenv("MODINV_KERNELS");
  if (pref && std::strcmp(pref, "scalar") == 0) return &scalar_table();
  if (pref && std::strcmp(pref, "avx2") == 0 && avx2) return avx2;
  return avx2 ? avx2 : &scalar_table();
}

}  // namespace

const Table* avx2_table() {
  return cpu_has_avx2_fma() ? avx2_table_compiled() : nullptr;
}

const Table& active() {
  static const Table* chosen = select();
  return *chosen;
}

std::string backend_name() { return active().name; }

}  // namespace modinv::kernels
