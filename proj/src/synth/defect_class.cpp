#include "semdet/synth/defect_class.hpp"

#include "semdet/common/errors.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <string>

namespace semdet::synth {

namespace {

const std::array<DefectClass, 5> kAdiClasses{{
    {adi::kGap, "gap", Family::ADI},
    {adi::kProbableGap, "p_gap", Family::ADI},
    {adi::kMicrobridge, "microbridge", Family::ADI},
    {adi::kBridge, "bridge", Family::ADI},
    {adi::kLineCollapse, "line_collapse", Family::ADI},
}};

const std::array<DefectClass, 5> kAeiClasses{{
    {aei::kThinBridge, "thin_bridge", Family::AEI},
    {aei::kSingleBridge, "single_bridge", Family::AEI},
    {aei::kMultiBridgeNonHorizontal, "multi_bridge_non_horizontal", Family::AEI},
    {aei::kMultiBridgeHorizontal, "multi_bridge_horizontal", Family::AEI},
    {aei::kLineCollapse, "line_collapse", Family::AEI},
}};

} // namespace

std::span<const DefectClass> defect_classes(Family family)
{
    return family == Family::ADI ? std::span<const DefectClass>(kAdiClasses)
                                 : std::span<const DefectClass>(kAeiClasses);
}

int num_classes(Family family)
{
    return static_cast<int>(defect_classes(family).size());
}

const DefectClass& defect_class(Family family, int id)
{
    const auto classes = defect_classes(family);
    if (id < 0 || id >= static_cast<int>(classes.size())) {
        throw ValidationFailure("class id " + std::to_string(id) + " is not in family " +
                                std::string(family_name(family)));
    }
    return classes[static_cast<std::size_t>(id)];
}

std::string_view family_name(Family family)
{
    return family == Family::ADI ? "adi" : "aei";
}

Family parse_family(std::string_view text)
{
    std::string lower(text);
    std::transform(lower.begin(), lower.end(), lower.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (lower == "adi") {
        return Family::ADI;
    }
    if (lower == "aei") {
        return Family::AEI;
    }
    throw ValidationFailure("unknown family '" + std::string(text) + "' (expected adi or aei)");
}

} // namespace semdet::synth
