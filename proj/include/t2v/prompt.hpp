#pragma once

#include "t2v/labels.hpp"
#include "t2v/nn.hpp"

namespace t2v {

// One embedding row per attribute value, stored as a single [30,d_ctx]
// table: gender rows 0..1, age rows 2..10, skin-tone rows 11..29.
inline constexpr size_t kPromptRows = size_t(kGenderClasses + kAgeBins + kSkinTones);
inline constexpr size_t kGenderRowOffset = 0;
inline constexpr size_t kAgeRowOffset = kGenderClasses;
inline constexpr size_t kToneRowOffset = kGenderClasses + kAgeBins;

struct PromptTable {
    Tensor<float> table;  // [30, d_ctx]

    PromptTable() = default;
    PromptTable(size_t d_ctx, Rng& rng);

    size_t d_ctx() const { return table.defined() ? table.shape()[1] : 0; }

    // Stacks the three selected rows into [3,d_ctx]. Pure lookup: the
    // gradient of any downstream loss lands on exactly those rows.
    Tensor<float> encode_prompt(const AttributeLabels& labels) const;

    ParamList parameters() const {
        return {{"prompt.table", table}};
    }
};

}  // namespace t2v
