#pragma once

#include <string>
#include <utility>
#include <vector>

#include "san/metrics.hpp"

namespace san {

// Deterministic CSV / SVG artifacts. Byte-identical for identical inputs.

// index,image,nme,nme_x100 (header + one row per image)
void write_per_image_csv(const EvalResult& result, const std::string& path);

// One block per variant: variant,test_style,<train styles...>
void write_matrix_csv(const StyleMatrix& m, const std::string& path);

// test_style,train_style,improvement
void write_improvement_csv(const StyleMatrix& m, const std::string& path);

// Line plot of CED curves, one polyline per named variant.
void write_ced_svg(const std::vector<std::pair<std::string, CedCurve>>& curves,
                   const std::string& path);

}  // namespace san
