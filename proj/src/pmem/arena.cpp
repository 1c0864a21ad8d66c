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

#include <mcaslite/pmem/arena.h>

#include <algorithm>
#include <cstring>
#include <map>

namespace mcaslite::pmem
{
  namespace
  {
    constexpr char arena_magic[4] = {'M', 'C', 'A', '1'};

    constexpr std::uint64_t off_magic = 0; /* magic + version share one 64-bit word */
    constexpr std::uint64_t off_capacity = 8;
    constexpr std::uint64_t off_table = 16;
    constexpr std::uint64_t off_undo = 24;
    constexpr std::uint64_t off_slots = 32;

    constexpr std::uint64_t descriptor_size = 24;

    constexpr std::uint64_t undo_valid = 0;
    constexpr std::uint64_t undo_saved_offset = 8;
    constexpr std::uint64_t undo_saved_length = 16;
    constexpr std::uint64_t undo_image = 64;

    std::uint64_t magic_word()
    {
      std::uint64_t w = 0;
      std::memcpy(&w, arena_magic, 4);
      return w | (std::uint64_t(arena_version) << 32);
    }

    void validate_capacity(std::uint64_t capacity)
    {
      if ( capacity < min_capacity || capacity % region_granularity != 0 )
      {
        throw error(status::E_BAD_CAPACITY, "capacity " + std::to_string(capacity) + " must be >= 64 MiB and a multiple of 32 MiB");
      }
    }
  }

  persistent_arena::persistent_arena(std::shared_ptr<backend> backend_)
    : _backend(std::move(backend_))
  {
    validate_capacity(capacity());
    _slots = capacity() / region_granularity - 1;
    _table_offset = header_size;
    _undo_offset = round_up(_table_offset + _slots * descriptor_size, 4096);
    if ( _undo_offset + undo_image + _slots * descriptor_size > header_extent )
    {
      throw error(status::E_BAD_CAPACITY, "region table does not fit the header extent");
    }

    auto word = load64(off_magic);
    if ( word == 0 )
    {
      format();
      _formatted = true;
    }
    else if ( std::memcmp(data(), arena_magic, 4) != 0 )
    {
      throw error(status::E_CORRUPT_HEADER, "arena magic mismatch");
    }
    else
    {
      if ( word != magic_word() )
      {
        throw error(status::E_CORRUPT_HEADER, "unsupported arena version");
      }
      if ( load64(off_capacity) != capacity() )
      {
        throw error(status::E_CORRUPT_HEADER, "arena capacity does not match header");
      }
      recover();
    }
  }

  void persistent_arena::format()
  {
    fill(0, _undo_offset + undo_image, std::byte{0});
    persist(0, _undo_offset + undo_image);
    store64(off_capacity, capacity());
    store64(off_table, _table_offset);
    store64(off_undo, _undo_offset);
    store64(off_slots, _slots);
    persist(0, header_size);
    store64(off_magic, magic_word());
    persist(0, 8);
  }

  void persistent_arena::recover()
  {
    if ( load64(_undo_offset + undo_valid) == 1 )
    {
      auto off = load64(_undo_offset + undo_saved_offset);
      auto len = load64(_undo_offset + undo_saved_length);
      if ( off < _table_offset || off + len > _table_offset + _slots * descriptor_size )
      {
        throw error(status::E_CORRUPT_HEADER, "region undo log out of range");
      }
      write(off, view(_undo_offset + undo_image, len));
      persist(off, len);
      store64(_undo_offset + undo_valid, 0);
      persist(_undo_offset, 8);
    }
  }

  byte_span persistent_arena::view(std::uint64_t offset_, std::uint64_t length_) const
  {
    if ( offset_ > capacity() || length_ > capacity() - offset_ )
    {
      throw error(status::E_RANGE, "view out of range");
    }
    return {data() + offset_, length_};
  }

  void persistent_arena::persist(std::uint64_t offset_, std::uint64_t length_)
  {
    if ( offset_ > capacity() || length_ > capacity() - offset_ )
    {
      throw error(status::E_RANGE, "persist out of range");
    }
    _backend->persist(offset_, length_);
  }

  void persistent_arena::store64(std::uint64_t offset_, std::uint64_t value_)
  {
    if ( offset_ % 8 != 0 )
    {
      throw error(status::E_INVALID, "unaligned 64-bit store");
    }
    write(offset_, byte_span(reinterpret_cast<const std::byte *>(&value_), 8));
  }

  std::uint64_t persistent_arena::load64(std::uint64_t offset_) const
  {
    return read<std::uint64_t>(offset_);
  }

  region_descriptor persistent_arena::slot(std::uint64_t i_) const
  {
    auto base = _table_offset + i_ * descriptor_size;
    return {load64(base), load64(base + 8), load64(base + 16)};
  }

  std::vector<region_descriptor> persistent_arena::regions() const
  {
    std::vector<region_descriptor> v;
    for ( std::uint64_t i = 0; i != _slots; ++i )
    {
      auto d = slot(i);
      if ( d.length != 0 )
      {
        v.push_back(d);
      }
    }
    std::sort(v.begin(), v.end(), [] (const auto &a, const auto &b) { return a.offset < b.offset; });
    return v;
  }

  std::vector<region_descriptor> persistent_arena::regions_of(std::uint64_t owner_) const
  {
    auto v = regions();
    std::erase_if(v, [owner_] (const auto &d) { return d.owner != owner_; });
    return v;
  }

  std::vector<std::uint64_t> persistent_arena::owners() const
  {
    std::vector<std::uint64_t> v;
    for ( const auto &d : regions() )
    {
      if ( std::find(v.begin(), v.end(), d.owner) == v.end() )
      {
        v.push_back(d.owner);
      }
    }
    std::sort(v.begin(), v.end());
    return v;
  }

  std::uint64_t persistent_arena::free_bytes() const
  {
    std::uint64_t used = 0;
    for ( const auto &d : regions() )
    {
      used += d.length;
    }
    return payload_bytes() - used;
  }

  void persistent_arena::update_table(const std::vector<std::pair<std::uint64_t, region_descriptor>> &changes_)
  {
    if ( changes_.empty() )
    {
      return;
    }
    std::uint64_t lo = _slots, hi = 0;
    for ( const auto &c : changes_ )
    {
      lo = std::min(lo, c.first);
      hi = std::max(hi, c.first);
    }
    auto saved_off = _table_offset + lo * descriptor_size;
    auto saved_len = (hi - lo + 1) * descriptor_size;

    /* arm: image and bounds first, valid flag last */
    byte_vector image(view(saved_off, saved_len).begin(), view(saved_off, saved_len).end());
    write(_undo_offset + undo_image, image);
    store64(_undo_offset + undo_saved_offset, saved_off);
    store64(_undo_offset + undo_saved_length, saved_len);
    persist(_undo_offset, undo_image + saved_len);
    store64(_undo_offset + undo_valid, 1);
    persist(_undo_offset, 8);

    for ( const auto &[i, d] : changes_ )
    {
      auto base = _table_offset + i * descriptor_size;
      store64(base, d.offset);
      store64(base + 8, d.length);
      store64(base + 16, d.owner);
    }
    persist(saved_off, saved_len);

    /* disarm: valid flag first */
    store64(_undo_offset + undo_valid, 0);
    persist(_undo_offset, 8);
  }

  status persistent_arena::region_alloc(std::uint64_t owner_, std::uint64_t size_, std::vector<region_descriptor> &out_)
  {
    out_.clear();
    if ( size_ == 0 || owner_ == free_owner )
    {
      return status::E_INVALID;
    }
    auto need = round_up(size_, region_granularity);
    if ( need > free_bytes() )
    {
      return status::E_NO_SPACE;
    }

    /* first fit over free gaps in address order */
    std::vector<std::pair<std::uint64_t, std::uint64_t>> gaps;
    auto cursor = header_extent;
    for ( const auto &d : regions() )
    {
      if ( d.offset > cursor )
      {
        gaps.emplace_back(cursor, d.offset - cursor);
      }
      cursor = std::max(cursor, d.offset + d.length);
    }
    if ( cursor < capacity() )
    {
      gaps.emplace_back(cursor, capacity() - cursor);
    }

    std::vector<region_descriptor> chosen;
    for ( const auto &[off, len] : gaps )
    {
      if ( need == 0 )
      {
        break;
      }
      auto take = std::min(len, need);
      chosen.push_back({off, take, owner_});
      need -= take;
    }
    if ( need != 0 )
    {
      return status::E_NO_SPACE;
    }

    std::vector<std::pair<std::uint64_t, region_descriptor>> changes;
    std::uint64_t i = 0;
    for ( const auto &d : chosen )
    {
      while ( slot(i).length != 0 )
      {
        ++i;
      }
      changes.emplace_back(i++, d);
    }
    update_table(changes);
    out_ = chosen;
    return status::S_OK;
  }

  status persistent_arena::region_free(std::uint64_t owner_, std::uint64_t &freed_)
  {
    freed_ = 0;
    std::vector<std::pair<std::uint64_t, region_descriptor>> changes;
    for ( std::uint64_t i = 0; i != _slots; ++i )
    {
      auto d = slot(i);
      if ( d.length != 0 && d.owner == owner_ )
      {
        changes.emplace_back(i, region_descriptor{0, 0, free_owner});
        freed_ += d.length;
      }
    }
    if ( changes.empty() )
    {
      return status::E_UNKNOWN_POOL;
    }
    /* secure delete: zero and persist before the descriptors are released */
    for ( const auto &c : changes )
    {
      auto d = slot(c.first);
      fill(d.offset, d.length, std::byte{0});
      persist(d.offset, d.length);
    }
    update_table(changes);
    return status::S_OK;
  }

  std::unique_ptr<persistent_arena> arena_open(const std::string &path_, std::uint64_t capacity_, backend_kind kind_, std::uint64_t addr_hint_)
  {
    if ( capacity_ != 0 )
    {
      validate_capacity(capacity_);
    }
    std::shared_ptr<backend> b;
    if ( kind_ == backend_kind::crash_sim )
    {
      b = std::make_shared<crash_sim_backend>(capacity_);
    }
    else
    {
      b = std::make_shared<mapped_file_backend>(path_, capacity_, addr_hint_);
    }
    return std::make_unique<persistent_arena>(std::move(b));
  }
}
