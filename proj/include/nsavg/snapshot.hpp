#pragma once

#include "nsavg/spectral_field.hpp"

#include <string>
#include <vector>

namespace nsavg {

// NSEF field snapshot format:
//   magic "NSEF" | version u32 | N u32 | field count u32
// followed, per field, by the N*N modes in row-major wavenumber order
// (k1 index outer, k2 index inner) with, per mode, the two components'
// coefficients as little-endian 64-bit float (re, im) pairs.
inline constexpr uint32_t kSnapshotVersion = 1;

void write_snapshot(const std::string& path, const std::vector<SpectralField>& fields);

// Reads a snapshot. If `space` is non-null the stored N must match it;
// otherwise a fresh space of the stored size is created.
std::vector<SpectralField> read_snapshot(const std::string& path, SpacePtr space = nullptr);

}  // namespace nsavg
