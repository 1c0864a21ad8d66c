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

#include <mcaslite/recon/recon_alloc.h>

#include <bit>

namespace mcaslite::recon
{
  void large_allocator::insert(std::uint64_t offset_, std::uint64_t length_)
  {
    _by_addr.emplace(offset_, length_);
    _by_size.emplace(length_, offset_);
    _free_bytes += length_;
  }

  void large_allocator::erase(std::map<std::uint64_t, std::uint64_t>::iterator it_)
  {
    _by_size.erase({it_->second, it_->first});
    _free_bytes -= it_->second;
    _by_addr.erase(it_);
  }

  void large_allocator::add_free(std::uint64_t offset_, std::uint64_t length_)
  {
    release(offset_, length_);
  }

  void large_allocator::release(std::uint64_t offset_, std::uint64_t length_)
  {
    if ( length_ == 0 )
    {
      return;
    }
    auto next = _by_addr.lower_bound(offset_);
    if ( next != _by_addr.end() && next->first == offset_ + length_ )
    {
      length_ += next->second;
      auto n = next++;
      erase(n);
    }
    if ( next != _by_addr.begin() )
    {
      auto prev = std::prev(next);
      if ( prev->first + prev->second == offset_ )
      {
        offset_ = prev->first;
        length_ += prev->second;
        erase(prev);
      }
    }
    insert(offset_, length_);
  }

  status large_allocator::allocate(std::uint64_t length_, std::uint64_t align_, std::uint64_t &offset_)
  {
    for ( auto it = _by_size.lower_bound({length_, 0}); it != _by_size.end(); ++it )
    {
      auto [size, addr] = *it;
      auto start = round_up(addr, align_);
      if ( start - addr > size || size - (start - addr) < length_ )
      {
        continue;
      }
      erase(_by_addr.find(addr));
      if ( start > addr )
      {
        insert(addr, start - addr);
      }
      auto tail = addr + size - (start + length_);
      if ( tail != 0 )
      {
        insert(start + length_, tail);
      }
      offset_ = start;
      return status::S_OK;
    }
    return status::E_NO_SPACE;
  }

  status large_allocator::reserve(std::uint64_t offset_, std::uint64_t length_)
  {
    auto it = _by_addr.upper_bound(offset_);
    if ( it == _by_addr.begin() )
    {
      return status::E_OVERLAP;
    }
    --it;
    auto [addr, size] = *it;
    if ( offset_ + length_ > addr + size )
    {
      return status::E_OVERLAP;
    }
    erase(it);
    if ( offset_ > addr )
    {
      insert(addr, offset_ - addr);
    }
    if ( addr + size > offset_ + length_ )
    {
      insert(offset_ + length_, addr + size - offset_ - length_);
    }
    return status::S_OK;
  }

  std::vector<std::pair<std::uint64_t, std::uint64_t>> large_allocator::free_extents() const
  {
    return {_by_addr.begin(), _by_addr.end()};
  }

  recon_allocator::recon_allocator(const std::vector<std::pair<std::uint64_t, std::uint64_t>> &extents_)
  {
    for ( const auto &[off, len] : extents_ )
    {
      _large.add_free(off, len);
    }
  }

  std::size_t recon_allocator::class_index(std::uint64_t class_size_) noexcept
  {
    return std::size_t(std::countr_zero(class_size_) - std::countr_zero(min_class));
  }

  std::size_t recon_allocator::slab_region_count(std::uint64_t class_size_) const
  {
    return _buckets[class_index(class_size_for(class_size_))].regions.size();
  }

  std::uint64_t recon_allocator::free_bytes() const noexcept
  {
    return _large.free_bytes() + _small_free;
  }

  status recon_allocator::new_region(std::size_t ci_, std::uint64_t base_, bool reserve_)
  {
    if ( reserve_ )
    {
      auto s = _large.reserve(base_, slab_region_size);
      if ( s != status::S_OK )
      {
        return s;
      }
    }
    auto &b = _buckets[ci_];
    slab_region r;
    r.class_size = min_class << ci_;
    r.bitmap.assign((slots_per_region(ci_) + 63) / 64, 0);
    b.regions.emplace(base_, std::move(r));
    b.nonfull.insert(base_);
    _region_class.emplace(base_, ci_);
    _small_free += slab_region_size;
    return status::S_OK;
  }

  status recon_allocator::allocate(std::uint64_t size_, std::uint64_t &offset_)
  {
    if ( size_ == 0 )
    {
      return status::E_INVALID;
    }
    if ( size_ > max_small )
    {
      auto len = round_up(size_, large_align);
      auto s = _large.allocate(len, large_align, offset_);
      if ( s == status::S_OK )
      {
        _large_live.emplace(offset_, len);
      }
      return s;
    }

    auto ci = class_index(class_size_for(size_));
    auto &b = _buckets[ci];
    if ( b.nonfull.empty() )
    {
      std::uint64_t base;
      auto s = _large.allocate(slab_region_size, slab_region_size, base);
      if ( s != status::S_OK )
      {
        return s;
      }
      new_region(ci, base, false);
    }
    auto base = *b.nonfull.begin();
    auto &r = b.regions.at(base);
    for ( std::size_t w = 0; w != r.bitmap.size(); ++w )
    {
      if ( r.bitmap[w] != ~std::uint64_t(0) )
      {
        auto bit = std::countr_one(r.bitmap[w]);
        r.bitmap[w] |= std::uint64_t(1) << bit;
        ++r.used;
        ++_live_small;
        _small_free -= r.class_size;
        if ( r.used == slots_per_region(ci) )
        {
          b.nonfull.erase(base);
        }
        offset_ = base + (w * 64 + std::uint64_t(bit)) * r.class_size;
        return status::S_OK;
      }
    }
    return status::E_CORRUPT;
  }

  status recon_allocator::free(std::uint64_t offset_, std::uint64_t size_)
  {
    if ( size_ == 0 )
    {
      return status::E_BAD_FREE;
    }
    if ( size_ > max_small )
    {
      auto it = _large_live.find(offset_);
      if ( it == _large_live.end() || it->second != round_up(size_, large_align) )
      {
        return status::E_BAD_FREE;
      }
      _large.release(it->first, it->second);
      _large_live.erase(it);
      return status::S_OK;
    }

    auto base = round_down(offset_, slab_region_size);
    auto rc = _region_class.find(base);
    auto ci = class_index(class_size_for(size_));
    if ( rc == _region_class.end() || rc->second != ci )
    {
      return status::E_BAD_FREE;
    }
    auto &b = _buckets[ci];
    auto &r = b.regions.at(base);
    if ( (offset_ - base) % r.class_size != 0 )
    {
      return status::E_BAD_FREE;
    }
    auto slot = (offset_ - base) / r.class_size;
    auto mask = std::uint64_t(1) << (slot % 64);
    if ( (r.bitmap[slot / 64] & mask) == 0 )
    {
      return status::E_BAD_FREE;
    }
    r.bitmap[slot / 64] &= ~mask;
    --r.used;
    --_live_small;
    _small_free += r.class_size;
    if ( r.used == 0 )
    {
      b.regions.erase(base);
      b.nonfull.erase(base);
      _region_class.erase(base);
      _small_free -= slab_region_size;
      _large.release(base, slab_region_size);
    }
    else
    {
      b.nonfull.insert(base);
    }
    return status::S_OK;
  }

  status recon_allocator::reconstitute(const std::vector<live_object> &live_)
  {
    for ( const auto &o : live_ )
    {
      if ( o.length == 0 )
      {
        return status::E_INVALID;
      }
      if ( o.length > max_small )
      {
        auto len = round_up(o.length, large_align);
        auto s = _large.reserve(o.offset, len);
        if ( s != status::S_OK )
        {
          return s;
        }
        _large_live.emplace(o.offset, len);
        continue;
      }

      auto ci = class_index(class_size_for(o.length));
      auto base = round_down(o.offset, slab_region_size);
      auto rc = _region_class.find(base);
      if ( rc == _region_class.end() )
      {
        auto s = new_region(ci, base, true);
        if ( s != status::S_OK )
        {
          return s;
        }
      }
      else if ( rc->second != ci )
      {
        return status::E_OVERLAP;
      }
      auto &b = _buckets[ci];
      auto &r = b.regions.at(base);
      if ( (o.offset - base) % r.class_size != 0 )
      {
        return status::E_OVERLAP;
      }
      auto slot = (o.offset - base) / r.class_size;
      auto mask = std::uint64_t(1) << (slot % 64);
      if ( r.bitmap[slot / 64] & mask )
      {
        return status::E_OVERLAP;
      }
      r.bitmap[slot / 64] |= mask;
      ++r.used;
      ++_live_small;
      _small_free -= r.class_size;
      if ( r.used == slots_per_region(ci) )
      {
        b.nonfull.erase(base);
      }
    }
    return status::S_OK;
  }
}
