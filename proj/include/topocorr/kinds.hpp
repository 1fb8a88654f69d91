#pragma once

#include <string>
#include <string_view>

namespace topocorr {

enum class KindTag { VectorZero, Critical2D, Umbilic2D };

/// Which singularities are being correlated. Vector zeros live in n
/// dimensions; critical points and umbilics are planar (n = 2).
struct SingularityKind {
  KindTag tag = KindTag::VectorZero;
  int n = 2;

  static SingularityKind vector(int n);
  static SingularityKind critical() { return {KindTag::Critical2D, 2}; }
  static SingularityKind umbilic() { return {KindTag::Umbilic2D, 2}; }

  /// "vector2", "vector3", "critical", "umbilic". Throws ContractViolation
  /// for anything else.
  static SingularityKind parse(std::string_view text);
  std::string label() const;

  /// Highest derivative order of C entering the density (2, 4 or 6).
  int required_order() const;

  bool operator==(const SingularityKind&) const = default;
};

}  // namespace topocorr
