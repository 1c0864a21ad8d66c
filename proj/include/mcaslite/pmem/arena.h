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

#ifndef MCASLITE_PMEM_ARENA_H
#define MCASLITE_PMEM_ARENA_H

#include <mcaslite/common/bytes.h>
#include <mcaslite/pmem/backend.h>
#include <mcaslite/status.h>

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

namespace mcaslite::pmem
{
  constexpr std::uint64_t region_granularity = 32 * MiB;
  constexpr std::uint64_t min_capacity = 64 * MiB;
  /* the first granule holds the header, region table and region undo log */
  constexpr std::uint64_t header_extent = region_granularity;
  constexpr std::uint64_t header_size = 4096;
  constexpr std::uint64_t free_owner = 0;
  constexpr std::uint32_t arena_version = 1;

  enum class backend_kind { mapped_file, crash_sim };

  struct region_descriptor
  {
    std::uint64_t offset;
    std::uint64_t length;
    std::uint64_t owner;
    friend bool operator==(const region_descriptor &, const region_descriptor &) = default;
  };

  /* On-media layout (little-endian):
       [0, 4096)       header: "MCA1" | version u32 | capacity u64 | table offset u64 | undo offset u64 | slot count u64
       [4096, ...)     region table: slot count x (offset u64, length u64, owner u64)
       undo offset     valid u64 | saved offset u64 | saved length u64 | pad to 64 | saved image bytes
     A slot with length 0 is unused. Payload granules start at header_extent. */
  class persistent_arena
  {
  public:
    /* Opens (recovering) or formats the arena held by the backend. */
    explicit persistent_arena(std::shared_ptr<backend> backend);

    persistent_arena(const persistent_arena &) = delete;
    persistent_arena &operator=(const persistent_arena &) = delete;

    std::uint64_t capacity() const noexcept { return _backend->capacity(); }
    const std::byte *data() const noexcept { return _backend->data(); }
    std::byte *raw() noexcept { return _backend->raw(); }
    backend &get_backend() noexcept { return *_backend; }
    std::shared_ptr<backend> shared_backend() const noexcept { return _backend; }
    bool was_formatted() const noexcept { return _formatted; }

    byte_span view(std::uint64_t offset, std::uint64_t length) const;
    void write(std::uint64_t offset, byte_span src) { _backend->write(offset, src); }
    void fill(std::uint64_t offset, std::uint64_t length, std::byte value) { _backend->fill(offset, length, value); }
    void persist(std::uint64_t offset, std::uint64_t length);

    /* Aligned 64-bit store: the only write assumed atomic with respect to crashes. */
    void store64(std::uint64_t offset, std::uint64_t value);
    std::uint64_t load64(std::uint64_t offset) const;

    template <typename T>
      T read(std::uint64_t offset) const
      {
        auto v = view(offset, sizeof(T));
        return load_le<T>(v.data());
      }

    template <typename T>
      void write_value(std::uint64_t offset, const T &v)
      {
        write(offset, byte_span(reinterpret_cast<const std::byte *>(&v), sizeof v));
      }

    /* Coarse allocation in 32 MiB granules. Crash-atomic via the region undo log. */
    status region_alloc(std::uint64_t owner, std::uint64_t size, std::vector<region_descriptor> &out);
    /* Zero-fills then releases every region of owner; returns freed bytes via out. */
    status region_free(std::uint64_t owner, std::uint64_t &freed);

    std::vector<region_descriptor> regions() const;
    std::vector<region_descriptor> regions_of(std::uint64_t owner) const;
    std::vector<std::uint64_t> owners() const;
    std::uint64_t payload_bytes() const noexcept { return capacity() - header_extent; }
    std::uint64_t free_bytes() const;
    std::uint64_t slot_count() const noexcept { return _slots; }

  private:
    void format();
    void recover();
    region_descriptor slot(std::uint64_t i) const;
    void update_table(const std::vector<std::pair<std::uint64_t, region_descriptor>> &changes);

    std::shared_ptr<backend> _backend;
    std::uint64_t _slots = 0;
    std::uint64_t _table_offset = 0;
    std::uint64_t _undo_offset = 0;
    bool _formatted = false;
  };

  /* arena_open: builds the backend and opens the arena. Throws error(E_BAD_CAPACITY /
     E_CORRUPT_HEADER / E_MAP_FAIL). */
  std::unique_ptr<persistent_arena> arena_open(const std::string &path, std::uint64_t capacity, backend_kind kind, std::uint64_t addr_hint = 0);
}

#endif
