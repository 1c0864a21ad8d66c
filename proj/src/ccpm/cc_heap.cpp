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

#include <mcaslite/ccpm/cc_heap.h>

#include <algorithm>

namespace mcaslite::ccpm
{
  namespace
  {
    constexpr std::uint64_t heap_magic = 0x3130504145484343ULL; /* "CCHEAP01" */
    constexpr std::uint64_t alloc_tag = 0xa110ca7eda7a0001ULL;

    constexpr std::uint64_t h_magic = 0;
    constexpr std::uint64_t h_root = 8;
    constexpr std::uint64_t h_root_size = 16;
    constexpr std::uint64_t h_free_head = 24;
    constexpr std::uint64_t h_region_count = 32;
    constexpr std::uint64_t header_bytes = 64;

    std::vector<extent> sorted(std::vector<extent> r)
    {
      std::sort(r.begin(), r.end(), [] (const extent &a, const extent &b) { return a.offset < b.offset; });
      return r;
    }
  }

  cc_heap::cc_heap(pmem::persistent_arena &arena_, std::vector<extent> regions_, bool fresh_)
    : _arena(arena_)
    , _regions(sorted(std::move(regions_)))
    , _log(arena_, _regions.empty() ? 0 : _regions.front().offset + header_bytes, _regions)
  {
    if ( _regions.empty() )
    {
      throw error(status::E_INVALID, "cc_heap needs at least one region");
    }
    if ( _regions.front().length < first_block_offset() - hdr() + min_block )
    {
      throw error(status::E_INVALID, "first heap region too small");
    }
    if ( fresh_ )
    {
      format();
    }
    else
    {
      if ( _arena.load64(hdr() + h_magic) != heap_magic || _arena.load64(hdr() + h_region_count) != _regions.size() )
      {
        throw error(status::E_CORRUPT, "cc_heap metadata check failed");
      }
      _recovered = _log.recover();
      validate();
    }
  }

  std::uint64_t cc_heap::first_block_offset() const noexcept
  {
    return round_up(hdr() + header_bytes + undo_log::footprint(), 64);
  }

  bool cc_heap::in_regions(std::uint64_t offset_, std::uint64_t length_) const
  {
    return std::any_of(_regions.begin(), _regions.end(), [=] (const extent &e) {
      return offset_ >= e.offset && offset_ + length_ <= e.end();
    });
  }

  void cc_heap::format()
  {
    _log.format();
    /* one free block per region, linked in address order */
    std::vector<extent> blocks;
    for ( std::size_t i = 0; i != _regions.size(); ++i )
    {
      auto start = i == 0 ? first_block_offset() : _regions[i].offset;
      auto end = round_down(_regions[i].end(), 16);
      if ( end > start && end - start >= min_block )
      {
        blocks.push_back({start, end - start});
      }
    }
    for ( std::size_t i = 0; i != blocks.size(); ++i )
    {
      _arena.store64(blocks[i].offset, blocks[i].length);
      _arena.store64(blocks[i].offset + 8, i + 1 < blocks.size() ? blocks[i + 1].offset : none);
      _arena.persist(blocks[i].offset, block_header);
    }
    _arena.store64(hdr() + h_root, none);
    _arena.store64(hdr() + h_root_size, 0);
    _arena.store64(hdr() + h_free_head, blocks.empty() ? none : blocks.front().offset);
    _arena.store64(hdr() + h_region_count, _regions.size());
    _arena.persist(hdr(), header_bytes);
    _arena.store64(hdr() + h_magic, heap_magic);
    _arena.persist(hdr(), 8);
  }

  void cc_heap::validate() const
  {
    std::uint64_t steps = 0;
    for ( auto b = _arena.load64(hdr() + h_free_head); b != none; b = _arena.load64(b + 8) )
    {
      if ( ! in_regions(b, block_header) || ++steps > (std::uint64_t(1) << 40) )
      {
        throw error(status::E_CORRUPT, "cc_heap free list corrupt");
      }
    }
  }

  status cc_heap::set64(std::uint64_t offset_, std::uint64_t value_)
  {
    auto s = _log.record(offset_, 8);
    if ( s == status::S_OK )
    {
      _arena.store64(offset_, value_);
    }
    return s;
  }

  status cc_heap::allocate(std::uint64_t size_, std::uint64_t &offset_)
  {
    if ( size_ == 0 )
    {
      return status::E_INVALID;
    }
    auto need = std::max(min_block, round_up(size_ + block_header, 16));
    auto prev_link = hdr() + h_free_head;
    for ( auto b = _arena.load64(prev_link); b != none; prev_link = b + 8, b = _arena.load64(prev_link) )
    {
      auto bsize = _arena.load64(b);
      if ( bsize < need )
      {
        continue;
      }
      auto next = _arena.load64(b + 8);
      status s;
      if ( bsize - need >= min_block )
      {
        auto rem = b + need;
        if ( (s = _log.record(rem, block_header)) != status::S_OK ) return s;
        _arena.store64(rem, bsize - need);
        _arena.store64(rem + 8, next);
        if ( (s = set64(prev_link, rem)) != status::S_OK ) return s;
        bsize = need;
      }
      else
      {
        if ( (s = set64(prev_link, next)) != status::S_OK ) return s;
      }
      if ( (s = _log.record(b, block_header)) != status::S_OK ) return s;
      _arena.store64(b, bsize);
      _arena.store64(b + 8, alloc_tag);
      offset_ = b + block_header;
      return status::S_OK;
    }
    return status::E_NO_SPACE;
  }

  status cc_heap::free(std::uint64_t offset_)
  {
    if ( offset_ < block_header || ! in_regions(offset_ - block_header, min_block) )
    {
      return status::E_BAD_FREE;
    }
    auto b = offset_ - block_header;
    if ( _arena.load64(b + 8) != alloc_tag )
    {
      return status::E_BAD_FREE;
    }
    auto bsize = _arena.load64(b);

    /* locate address-ordered neighbours */
    std::uint64_t prev = none;
    auto prev_link = hdr() + h_free_head;
    auto next = _arena.load64(prev_link);
    while ( next != none && next < b )
    {
      prev = next;
      prev_link = next + 8;
      next = _arena.load64(prev_link);
    }

    status s;
    if ( (s = _log.record(b, block_header)) != status::S_OK ) return s;
    if ( next != none && b + bsize == next )
    {
      bsize += _arena.load64(next);
      next = _arena.load64(next + 8);
    }
    if ( prev != none && prev + _arena.load64(prev) == b )
    {
      if ( (s = _log.record(prev, block_header)) != status::S_OK ) return s;
      _arena.store64(prev, _arena.load64(prev) + bsize);
      _arena.store64(prev + 8, next);
      /* retire the absorbed header so a stale offset cannot be freed twice */
      _arena.store64(b + 8, 0);
      return status::S_OK;
    }
    _arena.store64(b, bsize);
    _arena.store64(b + 8, next);
    return set64(prev_link, b);
  }

  status cc_heap::allocate_root(std::uint64_t size_, std::uint64_t &offset_)
  {
    auto s = allocate(size_, offset_);
    if ( s != status::S_OK )
    {
      return s;
    }
    _arena.fill(offset_, size_, std::byte{0});
    if ( (s = set64(hdr() + h_root, offset_)) != status::S_OK ) return s;
    return set64(hdr() + h_root_size, size_);
  }

  std::uint64_t cc_heap::root() const
  {
    return _arena.load64(hdr() + h_root);
  }

  std::uint64_t cc_heap::root_size() const
  {
    return _arena.load64(hdr() + h_root_size);
  }

  std::uint64_t cc_heap::usable_size(std::uint64_t offset_) const
  {
    return _arena.load64(offset_ - block_header) - block_header;
  }

  std::vector<extent> cc_heap::free_blocks() const
  {
    std::vector<extent> v;
    for ( auto b = _arena.load64(hdr() + h_free_head); b != none; b = _arena.load64(b + 8) )
    {
      v.push_back({b, _arena.load64(b)});
    }
    return v;
  }

  std::uint64_t cc_heap::free_bytes() const
  {
    std::uint64_t n = 0;
    for ( const auto &e : free_blocks() )
    {
      n += e.length;
    }
    return n;
  }

  std::uint64_t cc_heap::total_bytes() const
  {
    std::uint64_t n = 0;
    for ( std::size_t i = 0; i != _regions.size(); ++i )
    {
      auto start = i == 0 ? first_block_offset() : _regions[i].offset;
      n += round_down(_regions[i].end(), 16) - start;
    }
    return n;
  }
}
