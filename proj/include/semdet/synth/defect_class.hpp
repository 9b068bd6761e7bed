#pragma once

#include <span>
#include <string>
#include <string_view>

namespace semdet::synth {

/// Inspection stage the images come from: after develop or after etch.
enum class Family { ADI, AEI };

struct DefectClass {
    int id = 0;
    std::string name;
    Family family = Family::ADI;
};

/// Dense-id class table of a family (ids 0..C-1 in table order).
std::span<const DefectClass> defect_classes(Family family);

int num_classes(Family family);

/// Throws ValidationFailure for an id outside the family.
const DefectClass& defect_class(Family family, int id);

std::string_view family_name(Family family);

/// Accepts "adi"/"aei" in either case.
Family parse_family(std::string_view text);

namespace adi {
inline constexpr int kGap = 0;
inline constexpr int kProbableGap = 1;
inline constexpr int kMicrobridge = 2;
inline constexpr int kBridge = 3;
inline constexpr int kLineCollapse = 4;
} // namespace adi

namespace aei {
inline constexpr int kThinBridge = 0;
inline constexpr int kSingleBridge = 1;
inline constexpr int kMultiBridgeNonHorizontal = 2;
inline constexpr int kMultiBridgeHorizontal = 3;
inline constexpr int kLineCollapse = 4;
} // namespace aei

} // namespace semdet::synth
