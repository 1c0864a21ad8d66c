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
#include <unordered_map>

namespace mcaslite::engine
{
  namespace
  {
    constexpr std::uint64_t hstore_magic = 0x3130455254535448ULL;   /* "HTSTRE01" */
    constexpr std::uint64_t hstore_cc_magic = 0x3143435254535448ULL; /* "HTSTRCC1" */
    constexpr std::uint64_t cc_heap_magic = 0x3130504145484343ULL;   /* "CCHEAP01" */

    constexpr std::uint64_t h_magic = 0;
    constexpr std::uint64_t h_name_len = 8;
    constexpr std::uint64_t h_size = 16;
    constexpr std::uint64_t h_table = 64;
    constexpr std::uint64_t h_name = 128;

    constexpr std::uint64_t memtable_slot = 16;
    constexpr std::uint64_t memtable_slots = (hstore_metadata_size - hstore_memtable_offset) / memtable_slot;

    std::vector<ccpm::extent> extents_of(const std::vector<pmem::region_descriptor> &r)
    {
      std::vector<ccpm::extent> v;
      for ( const auto &d : r )
      {
        v.push_back({d.offset, d.length});
      }
      return v;
    }

    void write_header(pmem::persistent_arena &a, std::uint64_t hdr, const std::string &name, std::uint64_t size)
    {
      a.store64(hdr + h_name_len, name.size());
      a.store64(hdr + h_size, size);
      a.write(hdr + h_name, as_bytes(name));
      a.persist(hdr, pool_header_size);
    }

    std::string read_name(const pmem::persistent_arena &a, std::uint64_t hdr)
    {
      auto len = std::min(a.load64(hdr + h_name_len), max_pool_name);
      return to_string(a.view(hdr + h_name, len));
    }
  }

  /* hstore: undo log and pool-memory table in the metadata area of region 0,
     payloads from a volatile reconstituting allocator. Allocations take effect
     immediately and are undone on rollback; releases wait for commit. */
  class hstore::volatile_memory : public table_memory
  {
  public:
    volatile_memory(pmem::persistent_arena &arena_, const std::vector<ccpm::extent> &regions_)
      : _arena(arena_)
      , _base(regions_.front().offset)
      , _log(arena_, _base + hstore_log_offset, regions_)
    {
      for ( std::size_t i = 0; i != regions_.size(); ++i )
      {
        auto skip = i == 0 ? hstore_metadata_size : 0;
        _alloc.add_extent(regions_[i].offset + skip, regions_[i].length - skip);
      }
    }

    void format()
    {
      _log.format();
      _arena.fill(_base + hstore_memtable_offset, memtable_slots * memtable_slot, std::byte{0});
      _arena.persist(_base + hstore_memtable_offset, memtable_slots * memtable_slot);
    }

    status alloc(std::uint64_t size_, std::uint64_t &offset_) override
    {
      auto s = _alloc.allocate(size_, offset_);
      if ( s == status::S_OK )
      {
        _op_allocs.emplace_back(offset_, size_);
      }
      return s;
    }

    status release(std::uint64_t offset_, std::uint64_t size_) override
    {
      _op_releases.emplace_back(offset_, size_);
      return status::S_OK;
    }

    status record(std::uint64_t offset_, std::uint64_t length_) override { return _log.record(offset_, length_); }

    void commit() override
    {
      _log.commit();
      for ( auto [o, l] : _op_releases )
      {
        _alloc.free(o, l);
      }
      _op_allocs.clear();
      _op_releases.clear();
    }

    void rollback() override
    {
      _log.rollback();
      for ( auto [o, l] : _op_allocs )
      {
        _alloc.free(o, l);
      }
      _op_allocs.clear();
      _op_releases.clear();
    }

    /* Pool memory handed out through allocate_pool_memory is not referenced by
       any entry, so it is listed durably for reconstitution. */
    status track(std::uint64_t offset_, std::uint64_t size_)
    {
      std::uint64_t slot;
      if ( ! _free_slots.empty() )
      {
        slot = *_free_slots.begin();
        _free_slots.erase(_free_slots.begin());
      }
      else if ( _next_slot != memtable_slots )
      {
        slot = _next_slot++;
      }
      else
      {
        return status::E_NO_SPACE;
      }
      auto at = _base + hstore_memtable_offset + slot * memtable_slot;
      _arena.store64(at, offset_);
      _arena.persist(at, 8);
      _arena.store64(at + 8, size_);
      _arena.persist(at + 8, 8);
      _tracked.emplace(offset_, std::make_pair(slot, size_));
      return status::S_OK;
    }

    status untrack(std::uint64_t offset_, std::uint64_t size_)
    {
      auto it = _tracked.find(offset_);
      if ( it == _tracked.end() || it->second.second != size_ )
      {
        return status::E_BAD_FREE;
      }
      auto at = _base + hstore_memtable_offset + it->second.first * memtable_slot;
      _arena.store64(at + 8, 0);
      _arena.persist(at + 8, 8);
      _free_slots.insert(it->second.first);
      _tracked.erase(it);
      return status::S_OK;
    }

    std::vector<recon::live_object> load_tracked()
    {
      std::vector<recon::live_object> v;
      _tracked.clear();
      _free_slots.clear();
      _next_slot = 0;
      for ( std::uint64_t i = 0; i != memtable_slots; ++i )
      {
        auto at = _base + hstore_memtable_offset + i * memtable_slot;
        auto len = _arena.load64(at + 8);
        if ( len != 0 )
        {
          auto off = _arena.load64(at);
          v.push_back({off, len});
          _tracked.emplace(off, std::make_pair(i, len));
          _next_slot = i + 1;
        }
      }
      for ( std::uint64_t i = 0; i != _next_slot; ++i )
      {
        if ( _arena.load64(_base + hstore_memtable_offset + i * memtable_slot + 8) == 0 )
        {
          _free_slots.insert(i);
        }
      }
      return v;
    }

    ccpm::undo_log &log() noexcept { return _log; }
    recon::recon_allocator &allocator() noexcept { return _alloc; }

  private:
    pmem::persistent_arena &_arena;
    std::uint64_t _base;
    ccpm::undo_log _log;
    recon::recon_allocator _alloc;
    std::vector<std::pair<std::uint64_t, std::uint64_t>> _op_allocs;
    std::vector<std::pair<std::uint64_t, std::uint64_t>> _op_releases;
    std::unordered_map<std::uint64_t, std::pair<std::uint64_t, std::uint64_t>> _tracked;
    std::set<std::uint64_t> _free_slots;
    std::uint64_t _next_slot = 0;
  };

  /* hstore-cc: everything inside one crash-consistent heap. */
  class hstore::heap_memory : public table_memory
  {
  public:
    heap_memory(pmem::persistent_arena &arena_, const std::vector<ccpm::extent> &regions_, bool fresh_)
      : _heap(arena_, regions_, fresh_)
    {}

    status alloc(std::uint64_t size_, std::uint64_t &offset_) override { return _heap.allocate(size_, offset_); }
    status release(std::uint64_t offset_, std::uint64_t) override { return _heap.free(offset_); }
    status record(std::uint64_t offset_, std::uint64_t length_) override { return _heap.record(offset_, length_); }
    void commit() override { _heap.commit(); }
    void rollback() override { _heap.rollback(); }

    ccpm::cc_heap &heap() noexcept { return _heap; }

  private:
    ccpm::cc_heap _heap;
  };

  struct hstore::pool_state
  {
    pool_t id = 0;
    std::string name;
    std::vector<ccpm::extent> regions;
    std::uint64_t header = 0;
    std::unique_ptr<table_memory> mem;
    volatile_memory *vm = nullptr;
    heap_memory *hm = nullptr;
    std::unique_ptr<hop_table> table;
  };

  hstore::hstore(pmem::persistent_arena &arena_, bool persistent_allocator_, engine_options options_)
    : kvstore(arena_)
    , _cc(persistent_allocator_)
    , _options(std::move(options_))
  {
    if ( ! _options.hash )
    {
      _options.hash = [] (byte_span k) { return key_hash(k); };
    }
    scan();
  }

  hstore::~hstore() = default;

  void hstore::scan()
  {
    for ( auto owner : _arena->owners() )
    {
      auto regs = _arena->regions_of(owner);
      auto word = _arena->load64(regs.front().offset);
      bool ours = _cc ? word == cc_heap_magic : word == hstore_magic;
      if ( word != 0 && ! ours )
      {
        spdlog::warn("{}: pool {} has a foreign header, left untouched", name(), owner);
        continue;
      }
      auto s = word == 0 ? status::E_INVALID : attach(owner, false, {}, 0);
      if ( s == status::E_INVALID )
      {
        /* creation never completed */
        _pools.erase(owner);
        std::uint64_t freed;
        _arena->region_free(owner, freed);
        spdlog::info("{}: released incomplete pool {} ({} bytes)", name(), owner, freed);
      }
      else if ( s != status::S_OK )
      {
        _pools.erase(owner);
        throw error(s, "pool " + std::to_string(owner) + " failed recovery");
      }
    }
  }

  status hstore::attach(pool_t id_, bool fresh_, const std::string &name_, std::uint64_t size_)
  {
    auto ps = std::make_unique<pool_state>();
    ps->id = id_;
    ps->regions = extents_of(_arena->regions_of(id_));
    auto &a = *_arena;

    if ( ! _cc )
    {
      auto vm = std::make_unique<volatile_memory>(a, ps->regions);
      ps->vm = vm.get();
      ps->mem = std::move(vm);
      ps->header = ps->regions.front().offset;
      ps->table = std::make_unique<hop_table>(a, *ps->mem, ps->header + h_table, _options.hash);
      if ( fresh_ )
      {
        ps->vm->format();
        write_header(a, ps->header, name_, size_);
        auto s = ps->table->format(_options.base_size);
        if ( s != status::S_OK )
        {
          return s;
        }
        a.store64(ps->header + h_magic, hstore_magic);
        a.persist(ps->header, 8);
      }
      else
      {
        ps->vm->log().recover();
        auto s = ps->table->attach();
        if ( s != status::S_OK )
        {
          return s;
        }
        ps->table->clear_uncommitted();
        auto live = ps->table->live_objects();
        auto tracked = ps->vm->load_tracked();
        live.insert(live.end(), tracked.begin(), tracked.end());
        if ( ps->vm->allocator().reconstitute(live) != status::S_OK )
        {
          return status::E_CORRUPT;
        }
        s = ps->table->recover();
        if ( s != status::S_OK )
        {
          return s;
        }
      }
    }
    else
    {
      try
      {
        auto hm = std::make_unique<heap_memory>(a, ps->regions, fresh_);
        ps->hm = hm.get();
        ps->mem = std::move(hm);
      }
      catch ( const error &e )
      {
        return e.code();
      }
      auto &heap = ps->hm->heap();
      if ( fresh_ )
      {
        std::uint64_t root;
        auto s = heap.allocate_root(pool_header_size, root);
        if ( s != status::S_OK )
        {
          heap.rollback();
          return s;
        }
        ps->header = root;
        write_header(a, root, name_, size_);
        ps->table = std::make_unique<hop_table>(a, *ps->mem, root + h_table, _options.hash);
        s = ps->table->format(_options.base_size);
        if ( s != status::S_OK )
        {
          return s;
        }
        heap.record(root + h_magic, 8);
        a.store64(root + h_magic, hstore_cc_magic);
        heap.commit();
      }
      else
      {
        ps->header = heap.root();
        if ( ps->header == ccpm::cc_heap::none || a.load64(ps->header + h_magic) != hstore_cc_magic )
        {
          return status::E_INVALID;
        }
        ps->table = std::make_unique<hop_table>(a, *ps->mem, ps->header + h_table, _options.hash);
        auto s = ps->table->attach();
        if ( s != status::S_OK )
        {
          return s;
        }
        s = ps->table->recover();
        if ( s != status::S_OK )
        {
          return s;
        }
      }
    }
    ps->name = read_name(a, ps->header);
    _pools[id_] = std::move(ps);
    return status::S_OK;
  }

  hstore::pool_state *hstore::find(pool_t pool_) const
  {
    auto it = _pools.find(pool_);
    return it == _pools.end() ? nullptr : it->second.get();
  }

  status hstore::create_pool(const std::string &name_, std::uint64_t size_, pool_t &out_)
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
    auto s = _arena->region_alloc(id, std::max(size_, hstore_metadata_size), regs);
    if ( s != status::S_OK )
    {
      return s;
    }
    s = attach(id, true, name_, size_);
    if ( s != status::S_OK )
    {
      _pools.erase(id);
      std::uint64_t freed;
      _arena->region_free(id, freed);
      return s == status::E_INVALID ? status::E_NO_SPACE : s;
    }
    out_ = id;
    return status::S_OK;
  }

  status hstore::open_pool(const std::string &name_, pool_t &out_)
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

  status hstore::close_pool(pool_t pool_)
  {
    return find(pool_) ? status::S_OK : status::E_BAD_POOL;
  }

  status hstore::delete_pool(const std::string &name_)
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

  std::vector<std::string> hstore::pool_names() const
  {
    std::vector<std::string> v;
    for ( const auto &[id, p] : _pools )
    {
      v.push_back(p->name);
    }
    return v;
  }

  std::vector<ccpm::extent> hstore::pool_regions(pool_t pool_) const
  {
    auto p = find(pool_);
    return p ? p->regions : std::vector<ccpm::extent>{};
  }

#define POOL_OR_FAIL(p, id) auto p = find(id); if ( ! p ) return status::E_BAD_POOL

  status hstore::put(pool_t pool_, byte_span key_, byte_span value_, std::uint32_t flags_)
  {
    POOL_OR_FAIL(p, pool_);
    return p->table->put(key_, value_, flags_);
  }

  status hstore::get(pool_t pool_, byte_span key_, byte_vector &out_) const
  {
    POOL_OR_FAIL(p, pool_);
    return p->table->get(key_, out_);
  }

  status hstore::get_value_ref(pool_t pool_, byte_span key_, value_ref &out_) const
  {
    POOL_OR_FAIL(p, pool_);
    return p->table->get_value_ref(key_, out_);
  }

  status hstore::get_pinned_ref(pool_t pool_, byte_span key_, value_ref &out_)
  {
    POOL_OR_FAIL(p, pool_);
    return p->table->pin_value(key_, out_);
  }

  status hstore::erase(pool_t pool_, byte_span key_)
  {
    POOL_OR_FAIL(p, pool_);
    return p->table->erase(key_);
  }

  status hstore::resize_value(pool_t pool_, byte_span key_, std::uint64_t new_size_)
  {
    POOL_OR_FAIL(p, pool_);
    return p->table->resize_value(key_, new_size_);
  }

  status hstore::write_value_range(pool_t pool_, byte_span key_, std::uint64_t offset_, byte_span data_)
  {
    POOL_OR_FAIL(p, pool_);
    return p->table->write_value_range(key_, offset_, data_);
  }

  status hstore::allocate_pool_memory(pool_t pool_, std::uint64_t size_, std::uint64_t &offset_)
  {
    POOL_OR_FAIL(p, pool_);
    if ( size_ == 0 )
    {
      return status::E_INVALID;
    }
    if ( p->hm )
    {
      auto &heap = p->hm->heap();
      auto s = heap.allocate(size_, offset_);
      if ( s == status::S_OK )
      {
        heap.commit();
      }
      else
      {
        heap.rollback();
      }
      return s;
    }
    auto &alloc = p->vm->allocator();
    auto s = alloc.allocate(size_, offset_);
    if ( s != status::S_OK )
    {
      return s;
    }
    s = p->vm->track(offset_, size_);
    if ( s != status::S_OK )
    {
      alloc.free(offset_, size_);
    }
    return s;
  }

  status hstore::free_pool_memory(pool_t pool_, std::uint64_t offset_, std::uint64_t size_)
  {
    POOL_OR_FAIL(p, pool_);
    if ( p->hm )
    {
      auto &heap = p->hm->heap();
      auto s = heap.free(offset_);
      if ( s == status::S_OK )
      {
        heap.commit();
      }
      else
      {
        heap.rollback();
      }
      return s;
    }
    auto s = p->vm->untrack(offset_, size_);
    if ( s != status::S_OK )
    {
      return s;
    }
    return p->vm->allocator().free(offset_, size_);
  }

  status hstore::iterate(pool_t pool_, const iterate_fn &fn_) const
  {
    POOL_OR_FAIL(p, pool_);
    p->table->iterate(fn_);
    return status::S_OK;
  }

  status hstore::get_pool_info(pool_t pool_, pool_info &out_) const
  {
    POOL_OR_FAIL(p, pool_);
    out_ = {};
    for ( const auto &r : p->regions )
    {
      out_.size += r.length;
    }
    out_.free_bytes = p->hm ? p->hm->heap().free_bytes() : p->vm->allocator().free_bytes();
    out_.item_count = p->table->count();
    return status::S_OK;
  }

#undef POOL_OR_FAIL

  std::uint64_t hstore::count(pool_t pool_) const
  {
    auto p = find(pool_);
    return p ? p->table->count() : 0;
  }

  std::string hstore::audit(pool_t pool_) const
  {
    auto p = find(pool_);
    return p ? p->table->audit() : "no such pool";
  }

  hop_table *hstore::table(pool_t pool_)
  {
    auto p = find(pool_);
    return p ? p->table.get() : nullptr;
  }

  const recon::recon_allocator *hstore::allocator(pool_t pool_) const
  {
    auto p = find(pool_);
    return p && p->vm ? &p->vm->allocator() : nullptr;
  }
}
