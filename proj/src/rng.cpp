#include "obree/rng.hpp"

#include "obree/errors.hpp"

#include <boost/math/special_functions/erf.hpp>

#include <cmath>

namespace obree {

namespace {

constexpr std::uint64_t splitmix64(std::uint64_t z) {
  z += 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

// Two independently salted hash lanes give a 128-bit stream identity:
// lane A becomes the Philox key, lane B the upper half of the counter.
struct KeyHash {
  std::uint64_t a;
  std::uint64_t b;
};

KeyHash hash_key(const StreamKey& key) {
  std::uint64_t a = splitmix64(key.base_seed ^ 0x243F6A8885A308D3ULL);
  std::uint64_t b = splitmix64(key.base_seed ^ 0x13198A2E03707344ULL);
  for (const Tag& tag : key.tags) {
    const auto code = static_cast<std::uint64_t>(tag.label) + 1;
    a = splitmix64(a ^ (code * 0xA4093822299F31D0ULL));
    a = splitmix64(a ^ tag.index);
    b = splitmix64(b ^ (code * 0x082EFA98EC4E6C89ULL));
    b = splitmix64(b + tag.index);
  }
  a = splitmix64(a ^ key.tags.size());
  b = splitmix64(b ^ (key.tags.size() << 32));
  return {a, b};
}

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi, std::uint32_t& lo) {
  const std::uint64_t product = static_cast<std::uint64_t>(a) * b;
  hi = static_cast<std::uint32_t>(product >> 32);
  lo = static_cast<std::uint32_t>(product);
}

}  // namespace

std::string_view to_string(TagLabel label) {
  switch (label) {
    case TagLabel::rep: return "rep";
    case TagLabel::sim: return "sim";
    case TagLabel::unit: return "unit";
    case TagLabel::obs: return "obs";
    case TagLabel::contam: return "contam";
  }
  return "?";
}

TagLabel parse_tag_label(std::string_view name) {
  if (name == "rep") return TagLabel::rep;
  if (name == "sim") return TagLabel::sim;
  if (name == "unit") return TagLabel::unit;
  if (name == "obs") return TagLabel::obs;
  if (name == "contam") return TagLabel::contam;
  throw ConfigError("unknown stream tag label '" + std::string(name) +
                    "' (expected one of rep, sim, unit, obs, contam)");
}

StreamKey StreamKey::child(TagLabel label, std::uint64_t index) const {
  StreamKey out = *this;
  out.tags.push_back({label, index});
  return out;
}

std::array<std::uint32_t, 4> philox4x32_10(std::array<std::uint32_t, 4> ctr,
                                           std::array<std::uint32_t, 2> key) {
  constexpr std::uint32_t kMul0 = 0xD2511F53;
  constexpr std::uint32_t kMul1 = 0xCD9E8D57;
  constexpr std::uint32_t kWeyl0 = 0x9E3779B9;
  constexpr std::uint32_t kWeyl1 = 0xBB67AE85;
  for (int round = 0; round < 10; ++round) {
    std::uint32_t hi0, lo0, hi1, lo1;
    mulhilo(kMul0, ctr[0], hi0, lo0);
    mulhilo(kMul1, ctr[2], hi1, lo1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    key[0] += kWeyl0;
    key[1] += kWeyl1;
  }
  return ctr;
}

RandomStream::RandomStream(std::array<std::uint32_t, 2> key, std::uint64_t stream_id)
    : key_(key), stream_id_(stream_id) {}

std::uint64_t RandomStream::next_u64() {
  const std::uint64_t block_index = position_ >> 1;
  if ((position_ & 1) == 0) {
    block_ = philox4x32_10({static_cast<std::uint32_t>(block_index),
                            static_cast<std::uint32_t>(block_index >> 32),
                            static_cast<std::uint32_t>(stream_id_),
                            static_cast<std::uint32_t>(stream_id_ >> 32)},
                           key_);
  }
  const std::size_t lane = (position_ & 1) * 2;
  ++position_;
  return (static_cast<std::uint64_t>(block_[lane]) << 32) | block_[lane + 1];
}

double RandomStream::uniform() {
  return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1p-53;
}

double RandomStream::normal() { return normal_quantile(uniform()); }

double normal_quantile(double u) {
  return -std::sqrt(2.0) * boost::math::erfc_inv(2.0 * u);
}

RandomStream derive_stream(const StreamKey& key) {
  if (key.tags.empty()) throw ConfigError("stream tags must be non-empty");
  const KeyHash h = hash_key(key);
  return RandomStream({static_cast<std::uint32_t>(h.a), static_cast<std::uint32_t>(h.a >> 32)},
                      h.b);
}

RandomStream derive_stream(std::uint64_t base_seed,
                           const std::vector<std::pair<std::string, std::uint64_t>>& tags) {
  StreamKey key{base_seed, {}};
  key.tags.reserve(tags.size());
  for (const auto& [label, index] : tags) key.tags.push_back({parse_tag_label(label), index});
  return derive_stream(key);
}

}  // namespace obree
