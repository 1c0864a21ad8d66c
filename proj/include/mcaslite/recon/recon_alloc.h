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

#ifndef MCASLITE_RECON_RECON_ALLOC_H
#define MCASLITE_RECON_RECON_ALLOC_H

#include <mcaslite/common/bytes.h>
#include <mcaslite/status.h>

#include <array>
#include <cstdint>
#include <map>
#include <set>
#include <unordered_map>
#include <utility>
#include <vector>

namespace mcaslite::recon
{
  constexpr std::uint64_t slab_region_size = 1 * MiB;
  constexpr std::uint64_t min_class = 8;
  constexpr std::uint64_t max_small = 4096;
  constexpr std::uint64_t large_align = 64;
  constexpr std::size_t class_count = 10; /* 8 .. 4096 */

  constexpr std::uint64_t class_size_for(std::uint64_t size) noexcept
  {
    std::uint64_t c = min_class;
    while ( c < size )
    {
      c <<= 1;
    }
    return c;
  }

  struct live_object
  {
    std::uint64_t offset;
    std::uint64_t length;
  };

  /* Free extents kept coalesced in two ordered trees: (size, address) for
     best fit and address for neighbour lookup. */
  class large_allocator
  {
  public:
    void add_free(std::uint64_t offset, std::uint64_t length);
    /* Best fit by size, ties to the lowest address. */
    status allocate(std::uint64_t length, std::uint64_t align, std::uint64_t &offset);
    void release(std::uint64_t offset, std::uint64_t length);
    /* Carves [offset, offset+length) out of free space; E_OVERLAP if any byte is not free. */
    status reserve(std::uint64_t offset, std::uint64_t length);

    std::uint64_t free_bytes() const noexcept { return _free_bytes; }
    std::vector<std::pair<std::uint64_t, std::uint64_t>> free_extents() const;
    std::size_t extent_count() const noexcept { return _by_addr.size(); }

  private:
    void insert(std::uint64_t offset, std::uint64_t length);
    void erase(std::map<std::uint64_t, std::uint64_t>::iterator it);

    std::set<std::pair<std::uint64_t, std::uint64_t>> _by_size;
    std::map<std::uint64_t, std::uint64_t> _by_addr;
    std::uint64_t _free_bytes = 0;
  };

  /* Volatile allocator for key/value payloads. Objects up to 4 KiB live in
     1 MiB slab regions of their power-of-two class; larger ones and the slab
     regions themselves come from the large allocator. The state is rebuilt
     after restart with reconstitute(). Placement depends only on occupancy,
     never on history, so a rebuilt allocator decides exactly like the original. */
  class recon_allocator
  {
  public:
    recon_allocator() = default;
    explicit recon_allocator(const std::vector<std::pair<std::uint64_t, std::uint64_t>> &extents);

    status allocate(std::uint64_t size, std::uint64_t &offset);
    status free(std::uint64_t offset, std::uint64_t size);

    /* Marks exactly the given objects live. E_OVERLAP on overlapping or
       misplaced records; the allocator is unusable after a failure. */
    status reconstitute(const std::vector<live_object> &live);

    /* Extra address space (new pool region). */
    void add_extent(std::uint64_t offset, std::uint64_t length) { _large.add_free(offset, length); }

    std::size_t slab_region_count() const noexcept { return _region_class.size(); }
    std::size_t slab_region_count(std::uint64_t class_size) const;
    std::uint64_t free_bytes() const noexcept;
    std::uint64_t large_free_bytes() const noexcept { return _large.free_bytes(); }
    std::uint64_t live_objects() const noexcept { return _live_small + _large_live.size(); }
    const large_allocator &large() const noexcept { return _large; }

    static constexpr std::uint64_t allocation_size(std::uint64_t size) noexcept
    {
      return size <= max_small ? class_size_for(size) : round_up(size, large_align);
    }

  private:
    struct slab_region
    {
      std::uint64_t class_size = 0;
      std::uint64_t used = 0;
      std::vector<std::uint64_t> bitmap;
    };

    struct bucket
    {
      std::map<std::uint64_t, slab_region> regions;
      /* regions with a free slot, by address; the lowest is the scan cursor */
      std::set<std::uint64_t> nonfull;
    };

    static std::size_t class_index(std::uint64_t class_size) noexcept;
    status new_region(std::size_t ci, std::uint64_t base, bool reserve);
    std::uint64_t slots_per_region(std::size_t ci) const noexcept { return slab_region_size / (min_class << ci); }

    large_allocator _large;
    std::array<bucket, class_count> _buckets;
    std::unordered_map<std::uint64_t, std::size_t> _region_class;
    std::map<std::uint64_t, std::uint64_t> _large_live;
    std::uint64_t _live_small = 0;
    std::uint64_t _small_free = 0;
  };
}

#endif
