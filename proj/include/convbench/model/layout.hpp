// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>

#include <nlohmann/json.hpp>

namespace convbench::model {

using json = nlohmann::json;

/// Layout regions for one page. Pure function of the page seed; `tables`
/// extra regions labelled "table" are appended at the end.
json generate_layout(std::uint64_t page_seed, int tables);

/// Cell grids for every table region in `layout`, aligned with the text
/// cells they overlap. No table region gives an empty list.
json infer_table_structure(const json& layout, int text_cells, std::uint64_t page_seed);

int count_table_regions(const json& layout);

}  // namespace convbench::model
