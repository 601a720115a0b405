#pragma once

#include <string>

namespace critwalk {

enum class Verdict { Converges, Diverges, Undetermined };

inline std::string to_string(Verdict v) {
  switch (v) {
    case Verdict::Converges: return "converges";
    case Verdict::Diverges: return "diverges";
    case Verdict::Undetermined: return "undetermined";
  }
  return "undetermined";
}

}  // namespace critwalk
