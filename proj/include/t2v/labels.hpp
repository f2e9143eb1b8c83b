#pragma once

#include <string>

#include "t2v/error.hpp"

namespace t2v {

inline constexpr int kGenderClasses = 2;
inline constexpr int kAgeBins = 9;
inline constexpr int kSkinTones = 19;
inline constexpr size_t kAttributeCount = 3;  // gender, age bin, skin tone

// Attribute ground truth / predictions. -1 in every field means unlabeled;
// classifier-dependent operations must reject that sentinel.
struct AttributeLabels {
    int gender = -1;
    int age_bin = -1;
    int skin_tone = -1;

    bool labeled() const { return gender >= 0 && age_bin >= 0 && skin_tone >= 0; }

    void validate() const {
        if (gender < 0 || gender >= kGenderClasses || age_bin < 0 || age_bin >= kAgeBins ||
            skin_tone < 0 || skin_tone >= kSkinTones)
            throw ContractError("attribute labels out of range: gender=" +
                                std::to_string(gender) + " age_bin=" +
                                std::to_string(age_bin) + " skin_tone=" +
                                std::to_string(skin_tone));
    }
};

}  // namespace t2v
