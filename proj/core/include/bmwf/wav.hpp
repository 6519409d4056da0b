#pragma once

#include <string>

#include "bmwf/stft.hpp"

namespace bmwf {

enum class WavEncoding { kPcm16, kFloat32 };

/// Reads a RIFF/WAVE file (16-bit PCM or 32-bit IEEE float, any channel
/// count). PCM samples are scaled to [-1, 1).
MultiSignal read_wav(const std::string& path);

/// Writes all channels interleaved. PCM16 output is clipped to [-1, 1].
void write_wav(const std::string& path, const MultiSignal& signal,
               WavEncoding encoding = WavEncoding::kFloat32);

}  // namespace bmwf
