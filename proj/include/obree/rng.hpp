#pragma once

#include <array>
#include <cstdint>
#include <limits>
#include <string>
#include <string_view>
#include <vector>

namespace obree {

/// Fixed vocabulary of stream tag labels.
enum class TagLabel : std::uint8_t { rep, sim, unit, obs, contam };

std::string_view to_string(TagLabel label);

/// Parses a label name; throws ConfigError for names outside the vocabulary.
TagLabel parse_tag_label(std::string_view name);

struct Tag {
  TagLabel label;
  std::uint64_t index;

  friend bool operator==(const Tag&, const Tag&) = default;
};

/// Identifies one random stream. The key deliberately carries no model
/// parameter: the same key yields the same draws at every theta.
struct StreamKey {
  std::uint64_t base_seed = 0;
  std::vector<Tag> tags;

  StreamKey child(TagLabel label, std::uint64_t index) const;

  friend bool operator==(const StreamKey&, const StreamKey&) = default;
};

/// Philox4x32-10 block function (Salmon et al., Random123).
std::array<std::uint32_t, 4> philox4x32_10(std::array<std::uint32_t, 4> counter,
                                           std::array<std::uint32_t, 2> key);

/// Counter-based stream. Cheap to copy; never share one instance across threads,
/// derive a fresh one from the key instead.
class RandomStream {
 public:
  using result_type = std::uint64_t;

  RandomStream(std::array<std::uint32_t, 2> key, std::uint64_t stream_id);

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() { return next_u64(); }
  std::uint64_t next_u64();

  /// Uniform on the open interval (0,1), 53-bit resolution.
  double uniform();

  /// Standard normal by inversion of one uniform (exactly one draw per call).
  double normal();

  /// Number of 64-bit words consumed so far.
  std::uint64_t position() const { return position_; }

 private:
  std::array<std::uint32_t, 2> key_;
  std::uint64_t stream_id_;
  std::uint64_t position_ = 0;
  std::array<std::uint32_t, 4> block_{};
};

RandomStream derive_stream(const StreamKey& key);

/// Convenience overload taking string labels, e.g. {{"rep", 3}, {"sim", 7}}.
RandomStream derive_stream(std::uint64_t base_seed,
                           const std::vector<std::pair<std::string, std::uint64_t>>& tags);

/// Standard normal quantile function.
double normal_quantile(double u);

}  // namespace obree
