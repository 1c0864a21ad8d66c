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

#ifndef MCASLITE_CCPM_UNDO_LOG_H
#define MCASLITE_CCPM_UNDO_LOG_H

#include <mcaslite/pmem/arena.h>
#include <mcaslite/status.h>

#include <cstdint>
#include <utility>
#include <vector>

namespace mcaslite::ccpm
{
  struct extent
  {
    std::uint64_t offset;
    std::uint64_t length;
    std::uint64_t end() const noexcept { return offset + length; }
    friend bool operator==(const extent &, const extent &) = default;
  };

  /* Copy-off undo log held in arena memory.

     Layout at base: armed u64 | count u64 | pad to 64 | entries. Entry i is
     (offset u64, length u64, pad 16, saved bytes[entry_capacity]). An entry is
     part of the log only once count covers it; count is published after the
     entry is persisted, and armed is set after the first entry is published.
     Recovery restores entries newest-first so the oldest image of a range wins. */
  class undo_log
  {
  public:
    static constexpr std::uint64_t default_max_entries = 64;
    static constexpr std::uint64_t default_entry_capacity = 4096;

    static constexpr std::uint64_t footprint(std::uint64_t max_entries = default_max_entries, std::uint64_t entry_capacity = default_entry_capacity)
    {
      return 64 + max_entries * (32 + entry_capacity);
    }

    /* Ranges passed to record() must lie inside one of the allowed extents. */
    undo_log(pmem::persistent_arena &arena, std::uint64_t base, std::vector<extent> allowed,
             std::uint64_t max_entries = default_max_entries, std::uint64_t entry_capacity = default_entry_capacity);

    /* Zeroes the log area. */
    void format();
    /* Rolls back an armed log left by a crash. Idempotent. Returns true if a rollback happened. */
    bool recover();

    /* cc_record: durably captures the current bytes of [offset, offset+length). */
    status record(std::uint64_t offset, std::uint64_t length);
    /* cc_commit: persists every recorded range, then disarms and empties the log. */
    void commit();
    /* cc_rollback: restores all recorded ranges and empties the log. */
    void rollback();

    bool armed() const;
    std::uint64_t count() const;
    std::uint64_t base() const noexcept { return _base; }
    std::uint64_t size() const noexcept { return footprint(_max_entries, _entry_capacity); }
    void add_allowed(extent e) { _allowed.push_back(e); }

  private:
    std::uint64_t entry_offset(std::uint64_t i) const noexcept { return _base + 64 + i * (32 + _entry_capacity); }
    bool allowed(std::uint64_t offset, std::uint64_t length) const;
    bool covered(std::uint64_t offset, std::uint64_t length) const;
    void restore_all();
    void disarm();

    pmem::persistent_arena &_arena;
    std::uint64_t _base;
    std::vector<extent> _allowed;
    std::uint64_t _max_entries;
    std::uint64_t _entry_capacity;
    /* volatile mirror of the recorded ranges of the open transaction */
    std::vector<extent> _recorded;
  };
}

#endif
