#pragma once

// Serialized and rendered forms of a CoPE result.

#include <iosfwd>
#include <string>

#include "cope/cope_sets.hpp"
#include "json.hpp"

namespace cope {

// Threshold, provenance, warnings, mask counts, geometry and the four masks
// as row-major 0/1 arrays.
nlohmann::json to_json(const CopeResult& result);

// One-row CSV: level,alpha,a,M,seed,boundary,upper_cells,point_cells,
// lower_cells,band_cells,floored_cells.
void write_summary_csv(std::ostream& out, const CopeResult& result);

// SVG with a heatmap of `background` and the boundaries of the point
// estimate (purple), upper (red) and lower (green) sets. Only interior
// crossings are drawn, so an empty or full mask contributes no curve.
std::string render_svg(const CopeResult& result, const ScalarField& background);
void render_svg_file(const std::string& path, const CopeResult& result, const ScalarField& background);

}  // namespace cope
