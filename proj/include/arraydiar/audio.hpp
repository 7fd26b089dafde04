#pragma once

#include <algorithm>
#include <cmath>
#include <iterator>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include "arraydiar/common.hpp"

namespace arraydiar {

/// Per-channel float samples, normalized to [-1, 1].
class MultichannelClip {
 public:
  MultichannelClip() = default;

  MultichannelClip(std::vector<std::vector<float>> channels, double sample_rate)
      : channels_(std::move(channels)), sample_rate_(sample_rate) {
    if (channels_.empty()) throw Error("clip: at least one channel required");
    if (!(sample_rate_ > 0.0)) throw Error("clip: sample_rate must be > 0");
    for (const auto& ch : channels_)
      if (ch.size() != channels_.front().size()) throw Error("clip: channels differ in length");
  }

  std::size_t channel_count() const { return channels_.size(); }
  std::size_t frame_count() const { return channels_.empty() ? 0 : channels_.front().size(); }
  double sample_rate() const { return sample_rate_; }
  double duration() const { return static_cast<double>(frame_count()) / sample_rate_; }

  std::span<const float> channel(std::size_t c) const { return channels_.at(c); }

  std::span<const float> channel(std::size_t c, std::size_t start, std::size_t length) const {
    return std::span<const float>(channels_.at(c)).subspan(start, length);
  }

  const std::vector<std::vector<float>>& channels() const { return channels_; }

  bool operator==(const MultichannelClip&) const = default;

 private:
  std::vector<std::vector<float>> channels_;
  double sample_rate_ = 0.0;
};

struct FramePlan {
  double frame_length = 0.5;
  double frame_shift = 0.5;

  void validate() const {
    if (!(frame_length > 0.0) || !(frame_shift > 0.0))
      throw Error("frame plan: length and shift must be > 0");
  }
};

/// One analysis window into a clip, in integer samples.
struct FrameRef {
  std::size_t index;
  std::size_t start_sample;
  std::size_t length;
  double start_time;  // index * frame_shift, seconds
};

/// Frame k starts at k * round(shift * rate) samples; trailing partial frames
/// are dropped, so a clip shorter than one frame yields no frames.
inline std::vector<FrameRef> frame_clip(const MultichannelClip& clip, const FramePlan& plan) {
  plan.validate();
  const auto length = static_cast<std::size_t>(std::llround(plan.frame_length * clip.sample_rate()));
  const auto shift = static_cast<std::size_t>(std::llround(plan.frame_shift * clip.sample_rate()));
  if (length == 0 || shift == 0) throw Error("frame plan: shorter than one sample");
  std::vector<FrameRef> frames;
  for (std::size_t k = 0, start = 0; start + length <= clip.frame_count(); ++k, start += shift) {
    frames.push_back({k, start, length, static_cast<double>(k) * plan.frame_shift});
  }
  return frames;
}

enum class WavEncoding { kPcm16, kFloat32 };

namespace detail {

inline std::uint32_t read_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

inline std::uint16_t read_u16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

inline void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

inline void put_u16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xFF));
  out.push_back(static_cast<char>((v >> 8) & 0xFF));
}

}  // namespace detail

/// Reads RIFF/WAVE with 16-bit PCM or 32-bit IEEE float samples (plain or
/// WAVE_FORMAT_EXTENSIBLE), any channel count.
inline MultichannelClip load_wav(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("wav: cannot open " + path);
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0)
    throw Error("wav: " + path + " is not a RIFF/WAVE file");

  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  bool have_fmt = false;
  const unsigned char* data = nullptr;
  std::size_t data_size = 0;

  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const unsigned char* chunk = bytes.data() + pos;
    const std::uint32_t size = detail::read_u32(chunk + 4);
    const std::size_t body = pos + 8;
    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      if (size < 16 || body + 16 > bytes.size()) throw Error("wav: truncated fmt chunk in " + path);
      format = detail::read_u16(bytes.data() + body);
      channels = detail::read_u16(bytes.data() + body + 2);
      rate = detail::read_u32(bytes.data() + body + 4);
      bits = detail::read_u16(bytes.data() + body + 14);
      if (format == 0xFFFE) {
        if (size < 40 || body + 26 > bytes.size()) throw Error("wav: truncated extensible fmt in " + path);
        format = detail::read_u16(bytes.data() + body + 24);
      }
      have_fmt = true;
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      if (body + size > bytes.size()) throw Error("wav: truncated data chunk in " + path);
      data = bytes.data() + body;
      data_size = size;
      break;
    }
    pos = body + size + (size & 1u);
  }
  if (!have_fmt) throw Error("wav: missing fmt chunk in " + path);
  if (data == nullptr) throw Error("wav: missing or truncated data chunk in " + path);
  if (channels == 0 || rate == 0) throw Error("wav: invalid header in " + path);

  const bool pcm16 = format == 1 && bits == 16;
  const bool f32 = format == 3 && bits == 32;
  if (!pcm16 && !f32)
    throw Error("wav: unsupported codec (format " + std::to_string(format) + ", " +
                std::to_string(bits) + " bits) in " + path);

  const std::size_t bytes_per_sample = bits / 8;
  const std::size_t frames = data_size / (bytes_per_sample * channels);
  if (frames == 0) throw Error("wav: zero-length audio in " + path);

  std::vector<std::vector<float>> out(channels, std::vector<float>(frames));
  for (std::size_t n = 0; n < frames; ++n) {
    for (std::size_t c = 0; c < channels; ++c) {
      const unsigned char* p = data + (n * channels + c) * bytes_per_sample;
      if (pcm16) {
        const auto v = static_cast<std::int16_t>(detail::read_u16(p));
        out[c][n] = static_cast<float>(v) / 32768.0f;
      } else {
        std::uint32_t raw = detail::read_u32(p);
        float v;
        std::memcpy(&v, &raw, sizeof v);
        out[c][n] = v;
      }
    }
  }
  return MultichannelClip(std::move(out), static_cast<double>(rate));
}

inline void write_wav(const MultichannelClip& clip, const std::string& path,
                      WavEncoding encoding = WavEncoding::kFloat32) {
  const std::uint16_t channels = static_cast<std::uint16_t>(clip.channel_count());
  const std::uint16_t bits = encoding == WavEncoding::kPcm16 ? 16 : 32;
  const std::uint16_t format = encoding == WavEncoding::kPcm16 ? 1 : 3;
  const auto rate = static_cast<std::uint32_t>(std::llround(clip.sample_rate()));
  const std::uint32_t data_size =
      static_cast<std::uint32_t>(clip.frame_count() * channels * (bits / 8));

  std::string out;
  out.reserve(44 + data_size);
  out += "RIFF";
  detail::put_u32(out, 36 + data_size);
  out += "WAVEfmt ";
  detail::put_u32(out, 16);
  detail::put_u16(out, format);
  detail::put_u16(out, channels);
  detail::put_u32(out, rate);
  detail::put_u32(out, rate * channels * (bits / 8));
  detail::put_u16(out, static_cast<std::uint16_t>(channels * (bits / 8)));
  detail::put_u16(out, bits);
  out += "data";
  detail::put_u32(out, data_size);
  for (std::size_t n = 0; n < clip.frame_count(); ++n) {
    for (std::size_t c = 0; c < channels; ++c) {
      const float v = clip.channel(c)[n];
      if (encoding == WavEncoding::kPcm16) {
        const long q = std::lround(std::clamp(v, -1.0f, 1.0f) * 32768.0f);
        detail::put_u16(out, static_cast<std::uint16_t>(static_cast<std::int16_t>(std::clamp(q, -32768L, 32767L))));
      } else {
        std::uint32_t raw;
        std::memcpy(&raw, &v, sizeof raw);
        detail::put_u32(out, raw);
      }
    }
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("wav: cannot write " + path);
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
}

}  // namespace arraydiar
