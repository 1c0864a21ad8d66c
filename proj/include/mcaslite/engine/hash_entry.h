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

#ifndef MCASLITE_ENGINE_HASH_ENTRY_H
#define MCASLITE_ENGINE_HASH_ENTRY_H

#include <array>
#include <bit>
#include <cstddef>
#include <cstdint>

namespace mcaslite::engine
{
  /* Neighbourhood size: hop_info bits 0..62. Bit 63 is reserved. */
  constexpr unsigned hop_range = 63;
  constexpr std::uint64_t hop_mask = (std::uint64_t(1) << hop_range) - 1;
  constexpr std::size_t inline_capacity = 23;

  enum class entry_state : std::uint64_t {
    FREE = 0,
    ALLOCATING = 1,
    COMMITTED = 2,
    DELETING = 3,
  };

  constexpr std::uint64_t state_mask = 0xff;
  constexpr std::uint64_t flag_key_inline = std::uint64_t(1) << 8;
  constexpr std::uint64_t flag_value_inline = std::uint64_t(1) << 9;

  /* 24-byte field: inline data[0..22] + length byte, or (offset u64, length u64, 0). */
  using field_bytes = std::array<std::byte, 24>;

  /* One bucket of the persistent hopscotch table; exactly one cache line.
       0  hop_info   neighbourhood bitmap of the bucket at this position
       8  state      entry_state | inline flags (one 64-bit word)
      16  key        field
      40  value      field
     hop_info belongs to the position; the other 56 bytes belong to the item. */
  struct hash_entry
  {
    std::uint64_t hop_info;
    std::uint64_t state;
    field_bytes key;
    field_bytes value;
  };

  static_assert(sizeof(hash_entry) == 64, "hash entry must be one cache line");

  constexpr std::uint64_t entry_size = sizeof(hash_entry);
  constexpr std::uint64_t off_hop = 0;
  constexpr std::uint64_t off_state = 8;
  constexpr std::uint64_t off_key = 16;
  constexpr std::uint64_t off_value = 40;

  constexpr entry_state state_of(std::uint64_t word) noexcept { return entry_state(word & state_mask); }
}

#endif
