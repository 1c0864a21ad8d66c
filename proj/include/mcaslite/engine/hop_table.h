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

#ifndef MCASLITE_ENGINE_HOP_TABLE_H
#define MCASLITE_ENGINE_HOP_TABLE_H

#include <mcaslite/engine/hash_entry.h>
#include <mcaslite/engine/kvstore.h>
#include <mcaslite/recon/recon_alloc.h>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace mcaslite::engine
{
  constexpr std::uint64_t add_range = 8 * hop_range;
  constexpr std::size_t max_segments = 40;

  struct bucket_address
  {
    std::uint64_t segment;
    std::uint64_t offset;
    friend bool operator==(const bucket_address &, const bucket_address &) = default;
  };

  /* Maps a hash to (segment, offset). Segment 0 holds base_size buckets and
     segment k >= 1 holds base_size << (k-1); the highest set bit of the masked
     hash selects the segment. base_size must be a power of two. */
  bucket_address bucket_of(std::uint64_t hash, std::uint64_t segment_count, std::uint64_t base_size = 1024);

  constexpr std::uint64_t buckets_in_segment(std::uint64_t k, std::uint64_t base_size) noexcept
  {
    return k == 0 ? base_size : base_size << (k - 1);
  }

  /* Transaction and allocation services a table runs on. Every mutation of
     table memory is preceded by record(); commit() makes the transaction
     durable, rollback() undoes it. Allocation and release take effect with
     the enclosing transaction. */
  class table_memory
  {
  public:
    virtual ~table_memory() = default;
    virtual status alloc(std::uint64_t size, std::uint64_t &offset) = 0;
    virtual status release(std::uint64_t offset, std::uint64_t size) = 0;
    virtual status record(std::uint64_t offset, std::uint64_t length) = 0;
    virtual void commit() = 0;
    virtual void rollback() = 0;
  };

  /* Table root, 64 bytes inside the pool header. */
  constexpr std::uint64_t table_root_size = 64;

  /* Persistent hopscotch table made of linked, doubling segments.

     Segment layout: header (index u64, bucket_count u64, next u64, pad) then
     bucket_count hash entries. Each mutation runs in one transaction of the
     table memory, and within it the payload is persisted before the entry
     body, and the body before the COMMITTED state word.

     Growth appends a segment and sets the root's expanding flag in the same
     transaction. normalize() then recomputes every hop bitmap from entry
     placement and relocates entries whose home moved. It is idempotent, so
     recovery simply reruns it while the flag is set. */
  class hop_table
  {
  public:
    hop_table(pmem::persistent_arena &arena, table_memory &memory, std::uint64_t root, hash_function hash);

    /* Builds segment 0 and the root. Not transactional: runs before the pool is published. */
    status format(std::uint64_t base_size);
    /* Loads the segment chain. */
    status attach();
    /* Finishes an interrupted expansion. */
    status recover();
    /* Entries that are neither FREE nor COMMITTED are reset; run before reconstitution. */
    void clear_uncommitted();

    status put(byte_span key, byte_span value, std::uint32_t flags);
    status get(byte_span key, byte_vector &out) const;
    status get_value_ref(byte_span key, value_ref &out) const;
    status erase(byte_span key);
    status resize_value(byte_span key, std::uint64_t new_size);
    status write_value_range(byte_span key, std::uint64_t offset, byte_span data);
    /* Moves an inline value to a payload so its address is stable. */
    status pin_value(byte_span key, value_ref &out);
    bool contains(byte_span key) const;

    void iterate(const kvstore::iterate_fn &fn) const;
    std::uint64_t count() const;
    std::uint64_t bucket_count() const noexcept { return _total; }
    std::uint64_t segment_count() const noexcept { return _segments.size(); }
    std::uint64_t base_size() const;
    bool expanding() const;

    /* Appends one segment and redistributes. */
    status expand();

    /* Every live allocation: segments and out-of-line key/value payloads. */
    std::vector<recon::live_object> live_objects() const;

    /* Checks the hopscotch invariants. Returns an empty string when they hold. */
    std::string audit() const;

    /* White-box access for tests. */
    std::uint64_t hop_info(std::uint64_t bucket) const;
    std::optional<std::uint64_t> slot_of(byte_span key) const;
    std::uint64_t home_of(byte_span key) const { return _hash(key) & (_total - 1); }

  private:
    struct segment
    {
      std::uint64_t header;
      std::uint64_t buckets;
    };

    std::uint64_t entry_off(std::uint64_t bucket) const;
    std::uint64_t state_word(std::uint64_t bucket) const;
    byte_span key_of(std::uint64_t bucket) const;
    value_ref value_of(std::uint64_t bucket) const;
    std::optional<std::uint64_t> find(byte_span key, std::uint64_t hash) const;

    status encode_field(byte_span data, bool &is_inline, field_bytes &out);
    void release_field(std::uint64_t entry, std::uint64_t field_off, bool is_inline);
    status make_room(std::uint64_t hash, std::uint64_t &slot);
    status move_entry(std::uint64_t src, std::uint64_t dst, std::uint64_t home, std::uint64_t old_bit, std::uint64_t new_bit);
    status insert(byte_span key, byte_span value, std::uint64_t hash);
    status replace_value(std::uint64_t bucket, byte_span value, bool force_remote);
    status add_segment();
    status normalize();
    void load_segments();
    std::uint64_t root_field(std::uint64_t off) const;

    pmem::persistent_arena &_arena;
    table_memory &_mem;
    std::uint64_t _root;
    hash_function _hash;
    std::vector<segment> _segments;
    std::uint64_t _total = 0;
  };
}

#endif
