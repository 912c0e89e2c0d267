#pragma once

#include <iosfwd>
#include <string>

#include "ttcontrol/value_model.hpp"

//! Binary checkpoint IO. A TensorTrain block is magic "TT01", d (u32), mode
//! sizes (d u32), ranks (d+1 u32), then each component as little-endian f64 in
//! left-unfolding column-major order (left rank fastest, then mode, then right
//! rank). A ValueFunctionPath is magic "VFP1", interpolation mode (u32),
//! node count (u32), node times (f64), then one TT block per node.
namespace ttc {

void write_tensor(std::ostream& out, const TensorTrain& tt);
TensorTrain read_tensor(std::istream& in);

void write_path(std::ostream& out, const ValueFunctionPath& path);
ValueFunctionPath read_path(std::istream& in);

//! File-level helpers; throw numeric_error on IO failure or a malformed file.
void save_path(const std::string& filename, const ValueFunctionPath& path);
ValueFunctionPath load_path(const std::string& filename);

}  // namespace ttc
