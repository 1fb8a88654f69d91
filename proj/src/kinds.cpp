#include "topocorr/kinds.hpp"

#include "topocorr/errors.hpp"

namespace topocorr {

SingularityKind SingularityKind::vector(int n) {
  if (n < 1) throw ContractViolation("vector zeros need dimension n >= 1");
  return {KindTag::VectorZero, n};
}

SingularityKind SingularityKind::parse(std::string_view text) {
  if (text == "critical") return critical();
  if (text == "umbilic") return umbilic();
  if (text.size() == 7 && text.substr(0, 6) == "vector" && text[6] >= '1' && text[6] <= '9')
    return vector(text[6] - '0');
  throw ContractViolation("unknown singularity kind '" + std::string(text) + "'");
}

std::string SingularityKind::label() const {
  switch (tag) {
    case KindTag::VectorZero: return "vector" + std::to_string(n);
    case KindTag::Critical2D: return "critical";
    case KindTag::Umbilic2D: return "umbilic";
  }
  return "?";
}

int SingularityKind::required_order() const {
  switch (tag) {
    case KindTag::VectorZero: return 2;
    case KindTag::Critical2D: return 4;
    case KindTag::Umbilic2D: return 6;
  }
  return 6;
}

}  // namespace topocorr
