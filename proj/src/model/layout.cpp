// SPDX-License-Identifier: Apache-2.0
#include "convbench/model/layout.hpp"

#include <algorithm>
#include <array>
#include <random>

namespace convbench::model {

namespace {

constexpr int kPageW = 612;
constexpr int kPageH = 792;
constexpr std::array<const char*, 8> kLabels = {"text",      "title",   "section_header", "list_item",
                                                  "picture",   "caption", "page_header",    "footnote"};

int uniform(std::mt19937_64& rng, int lo, int hi) {
    // Modulo bias is irrelevant here; what matters is a fixed mapping.
    return lo + static_cast<int>(rng() % static_cast<std::uint64_t>(hi - lo + 1));
}

json box(int x0, int y0, int x1, int y1) { return json::array({x0, y0, x1, y1}); }

}  // namespace

json generate_layout(std::uint64_t page_seed, int tables) {
    std::mt19937_64 rng(page_seed ^ 0x6c61796f7574ULL);
    const int plain = uniform(rng, 3, 8);
    const int total = plain + std::max(tables, 0);
    const int band = (kPageH - 72) / total;
    json regions = json::array();
    for (int i = 0; i < total; ++i) {
        const bool is_table = i >= plain;
        const int y0 = 36 + i * band;
        const int x0 = uniform(rng, 36, 90);
        const int x1 = kPageW - uniform(rng, 36, 90);
        const int y1 = y0 + std::max(12, band - uniform(rng, 2, 10));
        json r{{"label", is_table ? "table" : kLabels[rng() % kLabels.size()]},
               {"bbox", box(x0, y0, x1, y1)},
               {"confidence", uniform(rng, 700, 999)}};
        regions.push_back(std::move(r));
    }
    return regions;
}

int count_table_regions(const json& layout) {
    return static_cast<int>(std::count_if(layout.begin(), layout.end(),
                                          [](const json& r) { return r.value("label", "") == "table"; }));
}

json infer_table_structure(const json& layout, int text_cells, std::uint64_t page_seed) {
    std::mt19937_64 rng(page_seed ^ 0x7461626c65ULL);
    json tables = json::array();
    int index = 0;
    int cells_left = std::max(text_cells, 0);
    for (const auto& region : layout) {
        if (region.value("label", "") != "table") continue;
        const auto& bb = region.at("bbox");
        const int x0 = bb[0], y0 = bb[1], x1 = bb[2], y1 = bb[3];
        const int rows = uniform(rng, 2, 12);
        const int cols = uniform(rng, 2, 8);
        const int cw = std::max(1, (x1 - x0) / cols);
        const int rh = std::max(1, (y1 - y0) / rows);
        json cells = json::array();
        for (int r = 0; r < rows; ++r) {
            for (int c = 0; c < cols; ++c) {
                const bool filled = cells_left > 0 && rng() % 4 != 0;
                if (filled) --cells_left;
                cells.push_back(json{{"row", r},
                                     {"col", c},
                                     {"bbox", box(x0 + c * cw, y0 + r * rh, x0 + (c + 1) * cw, y0 + (r + 1) * rh)},
                                     {"has_text", filled}});
            }
        }
        tables.push_back(json{{"table_index", index++}, {"rows", rows}, {"cols", cols}, {"cells", std::move(cells)}});
    }
    return tables;
}

}  // namespace convbench::model
