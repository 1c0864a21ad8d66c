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

#include <mcaslite/engine/hstore.h>

#include <spdlog/spdlog.h>

#include <algorithm>

namespace mcaslite::engine
{
  struct mapstore::pool_state
  {
    pool_t id = 0;
    std::string name;
    std::vector<ccpm::extent> regions;
    recon::recon_allocator alloc;
    std::map<std::string, value_ref, std::less<>> items;
    std::map<std::uint64_t, std::uint64_t> pool_allocs;
  };

  mapstore::mapstore(pmem::persistent_arena &arena_, engine_options)
    : kvstore(arena_)
  {
    /* volatile by design: whatever a previous run left behind is discarded */
    for ( auto owner : _arena->owners() )
    {
      std::uint64_t freed;
      _arena->region_free(owner, freed);
      spdlog::debug("mapstore: discarded pool {} ({} bytes)", owner, freed);
    }
  }

  mapstore::~mapstore() = default;

  mapstore::pool_state *mapstore::find(pool_t pool_) const
  {
    auto it = _pools.find(pool_);
    return it == _pools.end() ? nullptr : it->second.get();
  }

  status mapstore::store(pool_state &p_, byte_span value_, value_ref &out_)
  {
    out_ = {0, value_.size()};
    if ( value_.empty() )
    {
      return status::S_OK;
    }
    auto s = p_.alloc.allocate(value_.size(), out_.offset);
    if ( s == status::S_OK )
    {
      _arena->write(out_.offset, value_);
    }
    return s;
  }

  status mapstore::create_pool(const std::string &name_, std::uint64_t size_, pool_t &out_)
  {
    if ( name_.empty() || name_.size() > max_pool_name )
    {
      return status::E_INVALID;
    }
    if ( open_pool(name_, out_) == status::S_OK )
    {
      return status::S_OK;
    }
    pool_t id = 1;
    for ( auto o : _arena->owners() )
    {
      id = std::max(id, o + 1);
    }
    std::vector<pmem::region_descriptor> regs;
    auto s = _arena->region_alloc(id, std::max<std::uint64_t>(size_, 1), regs);
    if ( s != status::S_OK )
    {
      return s;
    }
    auto p = std::make_unique<pool_state>();
    p->id = id;
    p->name = name_;
    for ( const auto &r : regs )
    {
      p->regions.push_back({r.offset, r.length});
      p->alloc.add_extent(r.offset, r.length);
    }
    _pools[id] = std::move(p);
    out_ = id;
    return status::S_OK;
  }

  status mapstore::open_pool(const std::string &name_, pool_t &out_)
  {
    for ( const auto &[id, p] : _pools )
    {
      if ( p->name == name_ )
      {
        out_ = id;
        return status::S_OK;
      }
    }
    return status::E_BAD_POOL;
  }

  status mapstore::close_pool(pool_t pool_)
  {
    return find(pool_) ? status::S_OK : status::E_BAD_POOL;
  }

  status mapstore::delete_pool(const std::string &name_)
  {
    pool_t id;
    if ( open_pool(name_, id) != status::S_OK )
    {
      return status::E_BAD_POOL;
    }
    drop_locks(id);
    _pools.erase(id);
    std::uint64_t freed;
    return _arena->region_free(id, freed);
  }

  std::vector<std::string> mapstore::pool_names() const
  {
    std::vector<std::string> v;
    for ( const auto &[id, p] : _pools )
    {
      v.push_back(p->name);
    }
    return v;
  }

  std::vector<ccpm::extent> mapstore::pool_regions(pool_t pool_) const
  {
    auto p = find(pool_);
    return p ? p->regions : std::vector<ccpm::extent>{};
  }

#define POOL_OR_FAIL(p, id) auto p = find(id); if ( ! p ) return status::E_BAD_POOL

  status mapstore::put(pool_t pool_, byte_span key_, byte_span value_, std::uint32_t flags_)
  {
    POOL_OR_FAIL(p, pool_);
    if ( key_.empty() )
    {
      return status::E_INVALID;
    }
    if ( value_.size() > max_value_size )
    {
      return status::E_TOO_LARGE;
    }
    auto it = p->items.find(as_string_view(key_));
    if ( it != p->items.end() && (flags_ & FLAGS_DONT_OVERWRITE) )
    {
      return status::E_ALREADY_EXISTS;
    }
    value_ref v;
    auto s = store(*p, value_, v);
    if ( s != status::S_OK )
    {
      return s;
    }
    if ( it != p->items.end() )
    {
      if ( it->second.length != 0 )
      {
        p->alloc.free(it->second.offset, it->second.length);
      }
      it->second = v;
    }
    else
    {
      p->items.emplace(to_string(key_), v);
    }
    return status::S_OK;
  }

  status mapstore::get(pool_t pool_, byte_span key_, byte_vector &out_) const
  {
    value_ref v;
    auto s = get_value_ref(pool_, key_, v);
    if ( s == status::S_OK )
    {
      auto b = _arena->view(v.offset, v.length);
      out_.assign(b.begin(), b.end());
    }
    return s;
  }

  status mapstore::get_value_ref(pool_t pool_, byte_span key_, value_ref &out_) const
  {
    POOL_OR_FAIL(p, pool_);
    auto it = p->items.find(as_string_view(key_));
    if ( it == p->items.end() )
    {
      return status::E_KEY_NOT_FOUND;
    }
    out_ = it->second;
    return status::S_OK;
  }

  status mapstore::get_pinned_ref(pool_t pool_, byte_span key_, value_ref &out_)
  {
    return get_value_ref(pool_, key_, out_);
  }

  status mapstore::erase(pool_t pool_, byte_span key_)
  {
    POOL_OR_FAIL(p, pool_);
    auto it = p->items.find(as_string_view(key_));
    if ( it == p->items.end() )
    {
      return status::E_KEY_NOT_FOUND;
    }
    if ( it->second.length != 0 )
    {
      p->alloc.free(it->second.offset, it->second.length);
    }
    p->items.erase(it);
    return status::S_OK;
  }

  status mapstore::resize_value(pool_t pool_, byte_span key_, std::uint64_t new_size_)
  {
    POOL_OR_FAIL(p, pool_);
    if ( new_size_ > max_value_size )
    {
      return status::E_TOO_LARGE;
    }
    auto it = p->items.find(as_string_view(key_));
    if ( it == p->items.end() )
    {
      return status::E_KEY_NOT_FOUND;
    }
    byte_vector nv(new_size_, std::byte{0});
    auto old = it->second;
    auto keep = _arena->view(old.offset, std::min(old.length, new_size_));
    std::copy(keep.begin(), keep.end(), nv.begin());
    value_ref v;
    auto s = store(*p, nv, v);
    if ( s != status::S_OK )
    {
      return s;
    }
    if ( old.length != 0 )
    {
      p->alloc.free(old.offset, old.length);
    }
    it->second = v;
    return status::S_OK;
  }

  status mapstore::write_value_range(pool_t pool_, byte_span key_, std::uint64_t offset_, byte_span data_)
  {
    value_ref v;
    auto s = get_value_ref(pool_, key_, v);
    if ( s != status::S_OK )
    {
      return s;
    }
    if ( offset_ > v.length || data_.size() > v.length - offset_ )
    {
      return status::E_RANGE;
    }
    _arena->write(v.offset + offset_, data_);
    return status::S_OK;
  }

  status mapstore::allocate_pool_memory(pool_t pool_, std::uint64_t size_, std::uint64_t &offset_)
  {
    POOL_OR_FAIL(p, pool_);
    if ( size_ == 0 )
    {
      return status::E_INVALID;
    }
    auto s = p->alloc.allocate(size_, offset_);
    if ( s == status::S_OK )
    {
      p->pool_allocs[offset_] = size_;
    }
    return s;
  }

  status mapstore::free_pool_memory(pool_t pool_, std::uint64_t offset_, std::uint64_t size_)
  {
    POOL_OR_FAIL(p, pool_);
    auto it = p->pool_allocs.find(offset_);
    if ( it == p->pool_allocs.end() || it->second != size_ )
    {
      return status::E_BAD_FREE;
    }
    p->pool_allocs.erase(it);
    return p->alloc.free(offset_, size_);
  }

  status mapstore::iterate(pool_t pool_, const iterate_fn &fn_) const
  {
    POOL_OR_FAIL(p, pool_);
    for ( const auto &[k, v] : p->items )
    {
      fn_(as_bytes(k), v);
    }
    return status::S_OK;
  }

  status mapstore::get_pool_info(pool_t pool_, pool_info &out_) const
  {
    POOL_OR_FAIL(p, pool_);
    out_ = {};
    for ( const auto &r : p->regions )
    {
      out_.size += r.length;
    }
    out_.free_bytes = p->alloc.free_bytes();
    out_.item_count = p->items.size();
    return status::S_OK;
  }

#undef POOL_OR_FAIL

  std::uint64_t mapstore::count(pool_t pool_) const
  {
    auto p = find(pool_);
    return p ? p->items.size() : 0;
  }

  std::string mapstore::audit(pool_t pool_) const
  {
    auto p = find(pool_);
    if ( ! p )
    {
      return "no such pool";
    }
    for ( const auto &[k, v] : p->items )
    {
      if ( v.length == 0 )
      {
        continue;
      }
      bool inside = std::any_of(p->regions.begin(), p->regions.end(), [&] (const ccpm::extent &e) {
        return v.offset >= e.offset && v.offset + v.length <= e.end();
      });
      if ( ! inside )
      {
        return "value of '" + k + "' outside pool regions";
      }
    }
    return {};
  }
}
