#pragma once

#include <cstdint>
#include <cstring>
#include <string>
#include <string_view>
#include <type_traits>

namespace tgom {

// 64-bit FNV-1a, used for dataset fingerprints and chain-file checksums.
class Fnv1a {
 public:
  void update(std::string_view bytes) {
    for (unsigned char c : bytes) {
      state_ ^= c;
      state_ *= 0x100000001b3ULL;
    }
  }
  template <typename T>
    requires std::is_trivially_copyable_v<T>
  void update_value(const T& value) {
    char buf[sizeof(T)];
    std::memcpy(buf, &value, sizeof(T));
    update(std::string_view(buf, sizeof(T)));
  }
  std::uint64_t value() const { return state_; }
  std::string hex() const;

 private:
  std::uint64_t state_ = 0xcbf29ce484222325ULL;
};

// ISO-8601 calendar dates (YYYY-MM-DD) as days since 1970-01-01.
// Throws std::invalid_argument on malformed or impossible dates.
std::int32_t parse_iso_date(std::string_view text);
std::string format_iso_date(std::int32_t days);

}  // namespace tgom
