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

#ifndef MCASLITE_ENGINE_KVSTORE_H
#define MCASLITE_ENGINE_KVSTORE_H

#include <mcaslite/ccpm/undo_log.h>
#include <mcaslite/common/bytes.h>
#include <mcaslite/common/hash.h>
#include <mcaslite/pmem/arena.h>
#include <mcaslite/status.h>

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

namespace mcaslite::engine
{
  using pool_t = std::uint64_t;
  using hash_function = std::function<std::uint64_t(byte_span)>;

  constexpr std::uint64_t max_value_size = 1 * GiB;

  enum put_flags : std::uint32_t {
    FLAGS_NONE = 0,
    FLAGS_DONT_OVERWRITE = 1,
  };

  enum class lock_type { read, write };

  /* Location of a value in arena memory. */
  struct value_ref
  {
    std::uint64_t offset = 0;
    std::uint64_t length = 0;
  };

  struct pool_info
  {
    std::uint64_t size = 0;        /* bytes of arena regions owned */
    std::uint64_t free_bytes = 0;  /* allocator free space */
    std::uint64_t item_count = 0;
  };

  struct engine_options
  {
    std::uint64_t base_size = 1024;   /* buckets in segment 0 (hstore) */
    hash_function hash;               /* defaults to key_hash */
  };

  /* Common storage-engine interface (IKVStore). One instance per shard,
     driven by the shard thread only. */
  class kvstore
  {
  public:
    virtual ~kvstore() = default;

    virtual std::string_view name() const noexcept = 0;
    virtual bool persistent() const noexcept = 0;

    /* Creates the pool, or opens it if it already exists. */
    virtual status create_pool(const std::string &name, std::uint64_t size, pool_t &out) = 0;
    virtual status open_pool(const std::string &name, pool_t &out) = 0;
    virtual status close_pool(pool_t pool) = 0;
    /* Securely erases pool memory and returns it to the arena. */
    virtual status delete_pool(const std::string &name) = 0;
    virtual std::vector<std::string> pool_names() const = 0;
    virtual std::vector<ccpm::extent> pool_regions(pool_t pool) const = 0;

    virtual status put(pool_t pool, byte_span key, byte_span value, std::uint32_t flags = FLAGS_NONE) = 0;
    virtual status get(pool_t pool, byte_span key, byte_vector &out) const = 0;
    virtual status get_value_ref(pool_t pool, byte_span key, value_ref &out) const = 0;
    /* As get_value_ref, but the returned address stays valid until the value is
       resized or erased (inline values are moved out of the entry). */
    virtual status get_pinned_ref(pool_t pool, byte_span key, value_ref &out) = 0;
    virtual status erase(pool_t pool, byte_span key) = 0;
    /* Old bytes are preserved as a prefix; growth is zero filled. */
    virtual status resize_value(pool_t pool, byte_span key, std::uint64_t new_size) = 0;
    /* In-place write of a sub-range of an existing value, persisted on return. */
    virtual status write_value_range(pool_t pool, byte_span key, std::uint64_t offset, byte_span data) = 0;

    virtual status allocate_pool_memory(pool_t pool, std::uint64_t size, std::uint64_t &offset) = 0;
    virtual status free_pool_memory(pool_t pool, std::uint64_t offset, std::uint64_t size) = 0;

    using iterate_fn = std::function<void(byte_span key, value_ref value)>;
    virtual status iterate(pool_t pool, const iterate_fn &fn) const = 0;
    virtual status get_pool_info(pool_t pool, pool_info &out) const = 0;
    virtual std::uint64_t count(pool_t pool) const = 0;
    /* Structural self-check; empty when consistent. */
    virtual std::string audit(pool_t pool) const = 0;

    /* Locks the pair, creating it with a zeroed value of create_size bytes when
       absent and create_size > 0. E_LOCKED on conflict. */
    status lock(pool_t pool, byte_span key, lock_type type, std::uint64_t create_size, value_ref &out, bool &created);
    status unlock(pool_t pool, byte_span key, lock_type type);
    bool is_locked(pool_t pool, byte_span key) const;
    std::size_t lock_count() const noexcept { return _locks.size(); }

    struct lock_record
    {
      pool_t pool;
      std::string key;
      std::uint32_t readers;
      bool writer;
    };
    std::vector<lock_record> locks() const;

    pmem::persistent_arena &arena() noexcept { return *_arena; }

  protected:
    explicit kvstore(pmem::persistent_arena &arena) : _arena(&arena) {}
    void drop_locks(pool_t pool);

    pmem::persistent_arena *_arena;

  private:
    struct lock_state
    {
      std::uint32_t readers = 0;
      bool writer = false;
    };
    std::map<std::pair<pool_t, std::string>, lock_state> _locks;
  };

  /* backend: "hstore", "hstore-cc" or "mapstore". Throws error(E_CONFIG) otherwise. */
  std::unique_ptr<kvstore> make_kvstore(const std::string &backend, pmem::persistent_arena &arena, engine_options options = {});
}

#endif
