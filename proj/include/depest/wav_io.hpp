#pragma once

#include <filesystem>

#include "depest/signal_prep.hpp"

namespace depest::signal {

/// Reads a mono 16-bit PCM little-endian RIFF/WAVE file; samples are scaled
/// to [-1, 1). Throws IoError / FormatError.
Waveform read_wav(const std::filesystem::path& path);

/// Writes mono 16-bit PCM with scale 32768 (the inverse of read_wav);
/// values outside the int16 range saturate.
void write_wav(const std::filesystem::path& path, const Waveform& wave);

}  // namespace depest::signal
