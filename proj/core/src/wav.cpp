#include "hcvae/wav.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

#include "hcvae/errors.hpp"

namespace hcvae {
namespace {

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

std::uint16_t read_u16(std::span<const std::uint8_t> b, std::size_t at) {
  return static_cast<std::uint16_t>(b[at] | (b[at + 1] << 8));
}

std::uint32_t read_u32(std::span<const std::uint8_t> b, std::size_t at) {
  return static_cast<std::uint32_t>(b[at]) | (static_cast<std::uint32_t>(b[at + 1]) << 8) |
         (static_cast<std::uint32_t>(b[at + 2]) << 16) | (static_cast<std::uint32_t>(b[at + 3]) << 24);
}

bool tag_is(std::span<const std::uint8_t> b, std::size_t at, const char* tag) {
  return std::memcmp(b.data() + at, tag, 4) == 0;
}

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v & 0xFF));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xFF));
}

void put_tag(std::vector<std::uint8_t>& out, const char* tag) { out.insert(out.end(), tag, tag + 4); }

[[noreturn]] void malformed(const std::string& what) {
  throw WavError(WavErrorCode::kMalformedHeader, "malformed WAV: " + what);
}

}  // namespace

float quantize_pcm16(double sample) {
  const double clamped = std::clamp(sample, -1.0, 32767.0 / 32768.0);
  return static_cast<float>(std::round(clamped * 32768.0) / 32768.0);
}

Waveform parse_wav(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 12) malformed("file shorter than RIFF header");
  if (!tag_is(bytes, 0, "RIFF") || !tag_is(bytes, 8, "WAVE")) malformed("missing RIFF/WAVE tags");

  bool have_fmt = false;
  std::uint16_t channels = 0;
  std::uint16_t bits = 0;
  std::uint32_t rate = 0;
  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const std::uint32_t size = read_u32(bytes, pos + 4);
    const std::size_t body = pos + 8;
    if (tag_is(bytes, pos, "fmt ")) {
      if (size < 16 || body + size > bytes.size()) malformed("truncated fmt chunk");
      std::uint16_t format = read_u16(bytes, body);
      channels = read_u16(bytes, body + 2);
      rate = read_u32(bytes, body + 4);
      bits = read_u16(bytes, body + 14);
      if (format == kFormatExtensible) {
        if (size < 40) malformed("truncated WAVE_FORMAT_EXTENSIBLE chunk");
        format = read_u16(bytes, body + 24);
      }
      if (format != kFormatPcm)
        throw WavError(WavErrorCode::kUnsupportedCodec, "unsupported WAV codec " + std::to_string(format));
      if (bits != 16)
        throw WavError(WavErrorCode::kUnsupportedCodec,
                       "unsupported WAV bit depth " + std::to_string(bits) + " (need 16)");
      if (channels == 0) malformed("zero channels");
      if (rate == 0) malformed("zero sample rate");
      have_fmt = true;
    } else if (tag_is(bytes, pos, "data")) {
      if (!have_fmt) malformed("data chunk before fmt chunk");
      // Streams sometimes leave the size unpatched; read whole frames present.
      const std::size_t available = std::min<std::size_t>(size, bytes.size() - body);
      const std::size_t frame_bytes = 2u * channels;
      const std::size_t frames = available / frame_bytes;
      if (frames == 0) malformed("empty data chunk");
      Waveform w;
      w.sample_rate = static_cast<int>(rate);
      w.samples.resize(frames);
      for (std::size_t i = 0; i < frames; ++i) {
        const auto raw = static_cast<std::int16_t>(read_u16(bytes, body + i * frame_bytes));
        w.samples[i] = static_cast<float>(raw) / 32768.0f;
      }
      return w;
    }
    pos = body + size + (size & 1u);
  }
  malformed(have_fmt ? "no data chunk" : "no fmt chunk");
}

Waveform read_wav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw WavError(WavErrorCode::kMissingFile, "cannot open WAV file " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  try {
    return parse_wav(bytes);
  } catch (const WavError& e) {
    throw WavError(e.code(), std::string(e.what()) + " (" + path.string() + ")");
  }
}

std::vector<std::uint8_t> encode_wav(const Waveform& wave) {
  const auto data_bytes = static_cast<std::uint32_t>(wave.samples.size() * 2);
  std::vector<std::uint8_t> out;
  out.reserve(44 + data_bytes);
  put_tag(out, "RIFF");
  put_u32(out, 36 + data_bytes);
  put_tag(out, "WAVE");
  put_tag(out, "fmt ");
  put_u32(out, 16);
  put_u16(out, kFormatPcm);
  put_u16(out, 1);
  put_u32(out, static_cast<std::uint32_t>(wave.sample_rate));
  put_u32(out, static_cast<std::uint32_t>(wave.sample_rate) * 2);
  put_u16(out, 2);
  put_u16(out, 16);
  put_tag(out, "data");
  put_u32(out, data_bytes);
  for (float s : wave.samples) {
    const double q = std::round(std::clamp(static_cast<double>(s), -1.0, 32767.0 / 32768.0) * 32768.0);
    put_u16(out, static_cast<std::uint16_t>(static_cast<std::int16_t>(q)));
  }
  return out;
}

void write_wav(const std::filesystem::path& path, const Waveform& wave) {
  const auto bytes = encode_wav(wave);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write WAV file " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("short write to " + path.string());
}

}  // namespace hcvae
