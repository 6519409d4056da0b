#include "bmwf/wav.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <vector>

#include "bmwf/error.hpp"

namespace bmwf {
namespace {

static_assert(std::endian::native == std::endian::little, "WAV I/O assumes a little-endian host");

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

template <typename T>
T read_le(const std::uint8_t* p) {
  T v;
  std::memcpy(&v, p, sizeof(T));
  return v;
}

template <typename T>
void put_le(std::vector<std::uint8_t>& out, T v) {
  std::array<std::uint8_t, sizeof(T)> b;
  std::memcpy(b.data(), &v, sizeof(T));
  out.insert(out.end(), b.begin(), b.end());
}

void put_tag(std::vector<std::uint8_t>& out, const char* tag) { out.insert(out.end(), tag, tag + 4); }

}  // namespace

MultiSignal read_wav(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open WAV file " + path);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
    throw IoError(path + ": not a RIFF/WAVE file");
  }

  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  const std::uint8_t* data = nullptr;
  std::size_t data_size = 0;
  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const std::uint8_t* chunk = bytes.data() + pos;
    const std::uint32_t size = read_le<std::uint32_t>(chunk + 4);
    const std::size_t body = pos + 8;
    if (body + size > bytes.size()) throw IoError(path + ": truncated chunk");
    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      if (size < 16) throw IoError(path + ": short fmt chunk");
      format = read_le<std::uint16_t>(chunk + 8);
      channels = read_le<std::uint16_t>(chunk + 10);
      rate = read_le<std::uint32_t>(chunk + 12);
      bits = read_le<std::uint16_t>(chunk + 22);
      if (format == kFormatExtensible && size >= 40) {
        format = read_le<std::uint16_t>(chunk + 8 + 24);
      }
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      data = chunk + 8;
      data_size = size;
    }
    pos = body + size + (size & 1u);
  }
  if (channels == 0 || data == nullptr) throw IoError(path + ": missing fmt or data chunk");

  const bool pcm16 = format == kFormatPcm && bits == 16;
  const bool f32 = format == kFormatFloat && bits == 32;
  if (!pcm16 && !f32) {
    throw IoError(path + ": unsupported encoding (format " + std::to_string(format) + ", " +
                  std::to_string(bits) + " bits)");
  }
  const std::size_t frame_bytes = static_cast<std::size_t>(channels) * (bits / 8);
  const std::size_t n = data_size / frame_bytes;
  MultiSignal out = MultiSignal::zeros(channels, n, static_cast<double>(rate));
  for (std::size_t i = 0; i < n; ++i) {
    for (int c = 0; c < channels; ++c) {
      const std::uint8_t* p = data + i * frame_bytes + c * (bits / 8);
      out.channels[c][i] = pcm16 ? read_le<std::int16_t>(p) / 32768.0 : read_le<float>(p);
    }
  }
  return out;
}

void write_wav(const std::string& path, const MultiSignal& signal, WavEncoding encoding) {
  const int channels = signal.num_channels();
  if (channels < 1) throw InvalidArgument("write_wav: no channels");
  const std::size_t n = signal.length();
  for (const auto& ch : signal.channels) {
    if (ch.size() != n) throw InvalidArgument("write_wav: channels differ in length");
  }
  const std::uint16_t bits = encoding == WavEncoding::kPcm16 ? 16 : 32;
  const std::uint16_t format = encoding == WavEncoding::kPcm16 ? kFormatPcm : kFormatFloat;
  const std::uint32_t rate = static_cast<std::uint32_t>(std::lround(signal.sample_rate));
  const std::uint32_t block = static_cast<std::uint32_t>(channels) * (bits / 8);
  const std::uint32_t data_size = static_cast<std::uint32_t>(n * block);

  std::vector<std::uint8_t> out;
  out.reserve(44 + data_size);
  put_tag(out, "RIFF");
  put_le<std::uint32_t>(out, 36 + data_size);
  put_tag(out, "WAVE");
  put_tag(out, "fmt ");
  put_le<std::uint32_t>(out, 16);
  put_le<std::uint16_t>(out, format);
  put_le<std::uint16_t>(out, static_cast<std::uint16_t>(channels));
  put_le<std::uint32_t>(out, rate);
  put_le<std::uint32_t>(out, rate * block);
  put_le<std::uint16_t>(out, static_cast<std::uint16_t>(block));
  put_le<std::uint16_t>(out, bits);
  put_tag(out, "data");
  put_le<std::uint32_t>(out, data_size);
  for (std::size_t i = 0; i < n; ++i) {
    for (int c = 0; c < channels; ++c) {
      const double v = signal.channels[c][i];
      if (encoding == WavEncoding::kPcm16) {
        const double clipped = std::clamp(v, -1.0, 32767.0 / 32768.0);
        put_le<std::int16_t>(out, static_cast<std::int16_t>(std::lround(clipped * 32768.0)));
      } else {
        put_le<float>(out, static_cast<float>(v));
      }
    }
  }
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot write WAV file " + path);
  os.write(reinterpret_cast<const char*>(out.data()), static_cast<std::streamsize>(out.size()));
  if (!os) throw IoError("write failed: " + path);
}

}  // namespace bmwf
