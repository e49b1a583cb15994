#pragma once

#include <cstdint>
#include <string>

#include "modinv/error.hpp"

namespace modinv {

// One input channel of a paired instance.
enum class Modality : uint8_t { A = 0, B = 1 };

inline Modality other(Modality m) {
  return m == Modality::A ? Modality::B : Modality::A;
}

inline char modality_letter(Modality m) { return m == Modality::A ? 'A' : 'B'; }

inline Modality parse_modality(const std::string& s) {
  if (s == "a" || s == "A") return Modality::A;
  if (s == "b" || s == "B") return Modality::B;
  throw_error(ErrorKind::config, "unknown modality '" + s + "' (want a|b)");
}

}  // namespace modinv
