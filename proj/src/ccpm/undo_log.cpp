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

#include <mcaslite/ccpm/undo_log.h>

#include <algorithm>

namespace mcaslite::ccpm
{
  namespace
  {
    constexpr std::uint64_t off_armed = 0;
    constexpr std::uint64_t off_count = 8;
  }

  undo_log::undo_log(pmem::persistent_arena &arena_, std::uint64_t base_, std::vector<extent> allowed_,
                     std::uint64_t max_entries_, std::uint64_t entry_capacity_)
    : _arena(arena_)
    , _base(base_)
    , _allowed(std::move(allowed_))
    , _max_entries(max_entries_)
    , _entry_capacity(entry_capacity_)
  {
    if ( _base % 64 != 0 || _entry_capacity % 8 != 0 )
    {
      throw error(status::E_INVALID, "undo log must be 64-byte aligned");
    }
  }

  void undo_log::format()
  {
    _arena.fill(_base, 64, std::byte{0});
    _arena.persist(_base, 64);
    _recorded.clear();
  }

  bool undo_log::armed() const
  {
    return _arena.load64(_base + off_armed) != 0;
  }

  std::uint64_t undo_log::count() const
  {
    return _arena.load64(_base + off_count);
  }

  bool undo_log::allowed(std::uint64_t offset_, std::uint64_t length_) const
  {
    return std::any_of(_allowed.begin(), _allowed.end(), [=] (const extent &e) {
      return offset_ >= e.offset && length_ <= e.length && offset_ - e.offset <= e.length - length_;
    });
  }

  bool undo_log::covered(std::uint64_t offset_, std::uint64_t length_) const
  {
    return std::any_of(_recorded.begin(), _recorded.end(), [=] (const extent &e) {
      return offset_ >= e.offset && offset_ + length_ <= e.end();
    });
  }

  status undo_log::record(std::uint64_t offset_, std::uint64_t length_)
  {
    if ( length_ == 0 )
    {
      return status::S_OK;
    }
    if ( ! allowed(offset_, length_) )
    {
      return status::E_RANGE;
    }
    if ( covered(offset_, length_) )
    {
      return status::S_OK;
    }
    auto n = count();
    auto chunks = (length_ + _entry_capacity - 1) / _entry_capacity;
    if ( n + chunks > _max_entries )
    {
      return status::E_LOG_FULL;
    }
    for ( std::uint64_t c = 0; c != chunks; ++c )
    {
      auto off = offset_ + c * _entry_capacity;
      auto len = std::min(_entry_capacity, length_ - c * _entry_capacity);
      auto e = entry_offset(n);
      _arena.store64(e, off);
      _arena.store64(e + 8, len);
      _arena.write(e + 32, _arena.view(off, len));
      _arena.persist(e, 32 + len);
      ++n;
      _arena.store64(_base + off_count, n);
      _arena.persist(_base + off_count, 8);
    }
    if ( ! armed() )
    {
      _arena.store64(_base + off_armed, 1);
      _arena.persist(_base + off_armed, 8);
    }
    _recorded.push_back({offset_, length_});
    return status::S_OK;
  }

  void undo_log::disarm()
  {
    _arena.store64(_base + off_armed, 0);
    _arena.persist(_base + off_armed, 8);
    _arena.store64(_base + off_count, 0);
    _arena.persist(_base + off_count, 8);
    _recorded.clear();
  }

  void undo_log::commit()
  {
    if ( count() == 0 && ! armed() )
    {
      _recorded.clear();
      return;
    }
    auto n = count();
    for ( std::uint64_t i = 0; i != n; ++i )
    {
      auto e = entry_offset(i);
      _arena.persist(_arena.load64(e), _arena.load64(e + 8));
    }
    disarm();
  }

  void undo_log::restore_all()
  {
    auto n = std::min(count(), _max_entries);
    for ( auto i = n; i != 0; --i )
    {
      auto e = entry_offset(i - 1);
      auto off = _arena.load64(e);
      auto len = _arena.load64(e + 8);
      if ( len > _entry_capacity || off + len > _arena.capacity() )
      {
        throw error(status::E_CORRUPT, "undo log entry out of range");
      }
      _arena.write(off, _arena.view(e + 32, len));
      _arena.persist(off, len);
    }
  }

  void undo_log::rollback()
  {
    if ( armed() )
    {
      restore_all();
    }
    disarm();
  }

  bool undo_log::recover()
  {
    if ( armed() )
    {
      restore_all();
      disarm();
      return true;
    }
    if ( count() != 0 )
    {
      /* entries published before the arm flag: nothing was mutated yet */
      disarm();
    }
    _recorded.clear();
    return false;
  }
}
