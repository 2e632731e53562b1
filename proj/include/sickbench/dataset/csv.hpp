#pragma once

#include <filesystem>

#include "sickbench/dataset/schema.hpp"

namespace sickbench::dataset {

// Reads a sensor stream. The header must contain `timestamp`, every schema
// channel and optionally `fms`, in any column order; unknown columns are an
// error. Rows with non-numeric or non-finite cells are dropped (count via
// `rejected`); timestamps must be strictly increasing across kept rows.
Stream load_csv(const std::filesystem::path& path, const FeatureSchema& schema,
                std::size_t* rejected = nullptr);

// Writes `timestamp,<channels...>[,fms]` with round-trip exact doubles.
void write_csv(const std::filesystem::path& path, const Stream& stream,
               const FeatureSchema& schema);

}  // namespace sickbench::dataset
