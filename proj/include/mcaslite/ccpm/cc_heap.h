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

#ifndef MCASLITE_CCPM_CC_HEAP_H
#define MCASLITE_CCPM_CC_HEAP_H

#include <mcaslite/ccpm/undo_log.h>
#include <mcaslite/pmem/arena.h>

#include <cstdint>
#include <vector>

namespace mcaslite::ccpm
{
  /* Crash-consistent heap over a set of arena regions.

     Region 0 starts with the heap header (64 B) followed by the undo log; blocks
     follow. Blocks carry a 16-byte header (size u64, tag u64); free blocks form
     an address-ordered singly linked list (tag = next free block, 0 terminates).
     Allocation is first fit; free coalesces with both address neighbours.

     Every metadata write is recorded in the heap's undo log first. Mutations
     accumulate in one transaction until commit() or rollback(); callers may
     record their own ranges in the same transaction via record(). */
  class cc_heap
  {
  public:
    static constexpr std::uint64_t none = 0;
    static constexpr std::uint64_t block_header = 16;
    static constexpr std::uint64_t min_block = 32;

    /* cc_heap_open. fresh formats; otherwise validates and runs recovery. Throws
       error(E_INVALID) on empty regions, error(E_CORRUPT) on metadata mismatch. */
    cc_heap(pmem::persistent_arena &arena, std::vector<extent> regions, bool fresh);

    status allocate(std::uint64_t size, std::uint64_t &offset);
    status free(std::uint64_t offset);

    /* Allocates the root object and records it in the header. */
    status allocate_root(std::uint64_t size, std::uint64_t &offset);
    std::uint64_t root() const;
    std::uint64_t root_size() const;

    status record(std::uint64_t offset, std::uint64_t length) { return _log.record(offset, length); }
    void commit() { _log.commit(); }
    void rollback() { _log.rollback(); }
    bool recovered() const noexcept { return _recovered; }

    /* Usable bytes of the allocation at offset. */
    std::uint64_t usable_size(std::uint64_t offset) const;
    std::uint64_t free_bytes() const;
    std::uint64_t total_bytes() const;
    std::vector<extent> free_blocks() const;
    const std::vector<extent> &regions() const noexcept { return _regions; }
    undo_log &log() noexcept { return _log; }

  private:
    std::uint64_t hdr() const noexcept { return _regions.front().offset; }
    std::uint64_t first_block_offset() const noexcept;
    bool in_regions(std::uint64_t offset, std::uint64_t length) const;
    status set64(std::uint64_t offset, std::uint64_t value);
    void format();
    void validate() const;

    pmem::persistent_arena &_arena;
    std::vector<extent> _regions;
    undo_log _log;
    bool _recovered = false;
  };
}

#endif
