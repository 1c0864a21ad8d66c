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

#ifndef MCASLITE_ENGINE_HSTORE_H
#define MCASLITE_ENGINE_HSTORE_H

#include <mcaslite/ccpm/cc_heap.h>
#include <mcaslite/ccpm/undo_log.h>
#include <mcaslite/engine/hop_table.h>
#include <mcaslite/engine/kvstore.h>
#include <mcaslite/recon/recon_alloc.h>

#include <map>
#include <memory>
#include <set>
#include <string>

namespace mcaslite::engine
{
  /* Pool header at the base of a pool (hstore) or in the heap root (hstore-cc):
       0  magic u64     8  name length u64     16 requested size u64
      64  table root (64 B)                   128 name bytes (max 255)  */
  constexpr std::uint64_t pool_header_size = 512;
  constexpr std::uint64_t max_pool_name = 255;

  /* hstore pool metadata area at the start of region 0. */
  constexpr std::uint64_t hstore_log_offset = 4096;
  constexpr std::uint64_t hstore_memtable_offset = 512 * KiB;
  constexpr std::uint64_t hstore_metadata_size = 2 * MiB;

  /* Persistent hopscotch engine. With persistent_allocator == false (hstore)
     payload memory comes from a volatile reconstituting allocator and table
     transactions use a per-pool undo log; with true (hstore-cc) both table and
     allocator live in a crash-consistent heap, so restart needs no rebuild. */
  class hstore : public kvstore
  {
  public:
    hstore(pmem::persistent_arena &arena, bool persistent_allocator, engine_options options);
    ~hstore() override;

    std::string_view name() const noexcept override { return _cc ? "hstore-cc" : "hstore"; }
    bool persistent() const noexcept override { return true; }

    status create_pool(const std::string &name, std::uint64_t size, pool_t &out) override;
    status open_pool(const std::string &name, pool_t &out) override;
    status close_pool(pool_t pool) override;
    status delete_pool(const std::string &name) override;
    std::vector<std::string> pool_names() const override;
    std::vector<ccpm::extent> pool_regions(pool_t pool) const override;

    status put(pool_t pool, byte_span key, byte_span value, std::uint32_t flags) override;
    status get(pool_t pool, byte_span key, byte_vector &out) const override;
    status get_value_ref(pool_t pool, byte_span key, value_ref &out) const override;
    status get_pinned_ref(pool_t pool, byte_span key, value_ref &out) override;
    status erase(pool_t pool, byte_span key) override;
    status resize_value(pool_t pool, byte_span key, std::uint64_t new_size) override;
    status write_value_range(pool_t pool, byte_span key, std::uint64_t offset, byte_span data) override;

    status allocate_pool_memory(pool_t pool, std::uint64_t size, std::uint64_t &offset) override;
    status free_pool_memory(pool_t pool, std::uint64_t offset, std::uint64_t size) override;

    status iterate(pool_t pool, const iterate_fn &fn) const override;
    status get_pool_info(pool_t pool, pool_info &out) const override;
    std::uint64_t count(pool_t pool) const override;
    std::string audit(pool_t pool) const override;

    /* White-box access for tests. */
    hop_table *table(pool_t pool);
    const recon::recon_allocator *allocator(pool_t pool) const;

  private:
    struct pool_state;
    class volatile_memory;
    class heap_memory;

    pool_state *find(pool_t pool) const;
    void scan();
    status attach(pool_t id, bool fresh, const std::string &name, std::uint64_t size);

    bool _cc;
    engine_options _options;
    std::map<pool_t, std::unique_ptr<pool_state>> _pools;
  };

  /* Volatile ordered map; values live in arena pool regions so ADO processes can
     map them. Pools do not survive a restart. */
  class mapstore : public kvstore
  {
  public:
    mapstore(pmem::persistent_arena &arena, engine_options options);
    ~mapstore() override;

    std::string_view name() const noexcept override { return "mapstore"; }
    bool persistent() const noexcept override { return false; }

    status create_pool(const std::string &name, std::uint64_t size, pool_t &out) override;
    status open_pool(const std::string &name, pool_t &out) override;
    status close_pool(pool_t pool) override;
    status delete_pool(const std::string &name) override;
    std::vector<std::string> pool_names() const override;
    std::vector<ccpm::extent> pool_regions(pool_t pool) const override;

    status put(pool_t pool, byte_span key, byte_span value, std::uint32_t flags) override;
    status get(pool_t pool, byte_span key, byte_vector &out) const override;
    status get_value_ref(pool_t pool, byte_span key, value_ref &out) const override;
    status get_pinned_ref(pool_t pool, byte_span key, value_ref &out) override;
    status erase(pool_t pool, byte_span key) override;
    status resize_value(pool_t pool, byte_span key, std::uint64_t new_size) override;
    status write_value_range(pool_t pool, byte_span key, std::uint64_t offset, byte_span data) override;

    status allocate_pool_memory(pool_t pool, std::uint64_t size, std::uint64_t &offset) override;
    status free_pool_memory(pool_t pool, std::uint64_t offset, std::uint64_t size) override;

    status iterate(pool_t pool, const iterate_fn &fn) const override;
    status get_pool_info(pool_t pool, pool_info &out) const override;
    std::uint64_t count(pool_t pool) const override;
    std::string audit(pool_t pool) const override;

  private:
    struct pool_state;
    pool_state *find(pool_t pool) const;
    status store(pool_state &p, byte_span value, value_ref &out);

    std::map<pool_t, std::unique_ptr<pool_state>> _pools;
  };
}

#endif
