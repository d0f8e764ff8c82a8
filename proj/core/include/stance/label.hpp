#pragma once

#include <array>
#include <string>

#include "stance/errors.hpp"

namespace stance {

// Stance labels in the fixed order used everywhere downstream: classifier
// logit slots, confusion-matrix axes, and argmax tie-breaking all follow
// this order.
enum class Stance : int { Against = 0, Favor = 1, None = 2 };

inline constexpr int kNumStances = 3;
inline constexpr std::array<Stance, kNumStances> kAllStances = {
    Stance::Against, Stance::Favor, Stance::None};

inline const std::string& to_string(Stance s) {
  static const std::array<std::string, kNumStances> names = {"against", "favor",
                                                             "none"};
  return names[static_cast<int>(s)];
}

inline Stance stance_from_string(const std::string& s) {
  if (s == "against") return Stance::Against;
  if (s == "favor") return Stance::Favor;
  if (s == "none") return Stance::None;
  throw ParseError("unknown stance label: '" + s + "'");
}

}  // namespace stance
