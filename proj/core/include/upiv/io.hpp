#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>

#include "upiv/estimators.hpp"
#include "upiv/types.hpp"

namespace upiv {

/**
 * Columnar text layout of an unpaired dataset, one row per unit:
 *   one-hot:    role,env,y,x1,...,xd
 *   continuous: role,i1,...,im,y,x1,...,xd
 * role is "y" or "x"; the columns of the other sample are left empty.
 * One-hot files carry the environment count as "# m=<m>" on the first line.
 */
void write_dataset_csv(std::ostream& out, const UnpairedDataset& data);
void write_dataset_csv(const std::filesystem::path& path, const UnpairedDataset& data);
UnpairedDataset read_dataset_csv(std::istream& in);
UnpairedDataset read_dataset_csv(const std::filesystem::path& path);

/// {"beta": [...], "support": [...], "ci": [[lo, hi], ...], "weight": ..., "diagnostics": {...}}
std::string estimate_to_json(const Estimate& est, int indent = 2);

/// Text table of a matrix, one row per line, comma separated.
Matrix read_matrix_csv(const std::filesystem::path& path);

}  // namespace upiv
