/*
   Copyright [2026] [IBM Corporation]
   Licensed under the Apache License, Version 2.0 (the "License");
   you may not use this file except in compliance with the License.
   You may obtain a copy of the License at
       http://www.apache.org/licenses/LICENSE-2.0
   Unless required by applicable law or agreed to in writing, software
   distributed under the License is distributed on an "AS IS" BASIS,
   WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
   See the License for the specific language governing permissions and
   limitations under the License.
*/

#ifndef MCASLITE_COMMON_BYTES_H
#define MCASLITE_COMMON_BYTES_H

#include <cstddef>
#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace mcaslite
{
  using byte_span = std::span<const std::byte>;
  using mutable_byte_span = std::span<std::byte>;
  using byte_vector = std::vector<std::byte>;

  constexpr std::uint64_t KiB = 1024;
  constexpr std::uint64_t MiB = 1024 * KiB;
  constexpr std::uint64_t GiB = 1024 * MiB;

  inline byte_span as_bytes(std::string_view s) noexcept
  {
    return {reinterpret_cast<const std::byte *>(s.data()), s.size()};
  }

  inline std::string_view as_string_view(byte_span b) noexcept
  {
    return {reinterpret_cast<const char *>(b.data()), b.size()};
  }

  inline byte_vector to_bytes(std::string_view s)
  {
    auto b = as_bytes(s);
    return byte_vector(b.begin(), b.end());
  }

  inline std::string to_string(byte_span b)
  {
    return std::string(as_string_view(b));
  }

  constexpr std::uint64_t round_up(std::uint64_t v, std::uint64_t align) noexcept
  {
    return (v + align - 1) / align * align;
  }

  constexpr std::uint64_t round_down(std::uint64_t v, std::uint64_t align) noexcept
  {
    return v / align * align;
  }

  template <typename T>
    T load_le(const std::byte *p) noexcept
    {
      T v;
      std::memcpy(&v, p, sizeof v);
      return v;
    }

  template <typename T>
    void store_le(std::byte *p, T v) noexcept
    {
      std::memcpy(p, &v, sizeof v);
    }
}

#endif
