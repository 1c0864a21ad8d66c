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

#ifndef MCASLITE_PLUGINS_VERSIONING_H
#define MCASLITE_PLUGINS_VERSIONING_H

#include <mcaslite/common/bytes.h>
#include <mcaslite/status.h>

#include <cstdint>

/* Multi-version values kept by an ADO plugin. The key's value is the root,
   the versions are detached pool allocations it points to. */
namespace mcaslite::versioning
{
  constexpr std::uint64_t default_max_versions = 8;

  /* Root layout, u64 fields, little-endian:
       0  max_versions        8  current_slot (next slot to fill)   16 count
       24 undo state (0 idle, 1 mid transaction, 2 old value free pending)
       32 undo slot   40 old offset   48 old length   56 old timestamp
       64 old current_slot    72 old count    80 new offset    88 new length
       96 max_versions x (offset, length, timestamp) */
  namespace root
  {
    constexpr std::uint64_t max_versions = 0;
    constexpr std::uint64_t current_slot = 8;
    constexpr std::uint64_t count = 16;
    constexpr std::uint64_t undo_state = 24;
    constexpr std::uint64_t undo_slot = 32;
    constexpr std::uint64_t undo_old_offset = 40;
    constexpr std::uint64_t undo_old_length = 48;
    constexpr std::uint64_t undo_old_timestamp = 56;
    constexpr std::uint64_t undo_old_current = 64;
    constexpr std::uint64_t undo_old_count = 72;
    constexpr std::uint64_t undo_new_offset = 80;
    constexpr std::uint64_t undo_new_length = 88;
    constexpr std::uint64_t slots = 96;
    constexpr std::uint64_t slot_size = 24;
  }

  enum undo_state : std::uint64_t { UNDO_IDLE = 0, UNDO_MID_TX = 1, UNDO_FREE_PENDING = 2 };

  constexpr std::uint64_t root_size(std::uint64_t max_versions) noexcept
  {
    return root::slots + root::slot_size * max_versions;
  }

  enum class message_type : std::uint8_t { put = 1, get = 2 };

  /* Requests: put = [u8 1]; get = [u8 2][i32 version_index]. */
  byte_vector encode_put_request();
  byte_vector encode_get_request(std::int32_t version_index);

  struct request
  {
    message_type type = message_type::put;
    std::int32_t version_index = 0;
  };
  status decode_request(byte_span in, request &out);

  /* Get response buffer: [u64 timestamp][value bytes]. */
  struct version
  {
    std::uint64_t timestamp = 0;
    byte_vector value;
  };
  byte_vector encode_version(std::uint64_t timestamp, byte_span value);
  status decode_version(byte_span in, version &out);

  /* Ring slot holding the version |version_index| back from the latest. */
  constexpr std::uint64_t slot_for(std::uint64_t current_slot, std::int32_t version_index, std::uint64_t max_versions) noexcept
  {
    auto back = std::uint64_t(-std::int64_t(version_index));
    return (current_slot + max_versions - 1 - back % max_versions) % max_versions;
  }
}

#endif
