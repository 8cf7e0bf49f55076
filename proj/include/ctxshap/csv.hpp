#pragma once

#include <string>

#include "ctxshap/model.hpp"

namespace ctxshap {

// Parses numeric CSV with a header row (RFC 4180 quoting). Every cell
// below the header must be a finite number; ragged rows, blanks and
// non-numeric cells raise ValueError.
Dataset parse_csv(const std::string& text);

// Reorders columns to match `features` by name. Throws WidthError when
// the column set differs from the feature set.
Dataset align_columns(const Dataset& data, const FeatureSet& features);

}  // namespace ctxshap
