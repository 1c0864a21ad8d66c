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

#ifndef MCASLITE_ADO_PLUGIN_H
#define MCASLITE_ADO_PLUGIN_H

#include <mcaslite/common/bytes.h>
#include <mcaslite/status.h>

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

/* Interface between the ADO host and plugins. Everything a plugin does to the
   store outside its mapped pool memory goes through services. */
namespace mcaslite::ado
{
  /* Pool memory is addressed by arena offset, valid in every process. */
  struct value_desc
  {
    std::uint64_t offset = 0;
    std::uint64_t length = 0;
    friend bool operator==(const value_desc &, const value_desc &) = default;
  };

  struct key_ref
  {
    std::string key;
    value_desc value;
    friend bool operator==(const key_ref &, const key_ref &) = default;
  };

  struct pool_stats
  {
    std::uint64_t size = 0;
    std::uint64_t free_bytes = 0;
    std::uint64_t item_count = 0;
  };

  /* The pool's memory as mapped into the ADO. Offsets outside the pool's
     extents throw error(E_MAP_FAIL). */
  class pool_memory
  {
  public:
    virtual ~pool_memory() = default;
    virtual mutable_byte_span map(std::uint64_t offset, std::uint64_t length) = 0;
    virtual void write(std::uint64_t offset, byte_span data) = 0;
    virtual void persist(std::uint64_t offset, std::uint64_t length) = 0;

    byte_span read(std::uint64_t offset, std::uint64_t length) { return map(offset, length); }
    std::uint64_t load64(std::uint64_t offset) { return load_le<std::uint64_t>(map(offset, 8).data()); }
    void store64(std::uint64_t offset, std::uint64_t v)
    {
      std::byte b[8];
      store_le(b, v);
      write(offset, byte_span(b, 8));
    }
  };

  /* Shard callbacks. Keys created or opened here are write-locked for the
     remainder of the work item and released with it, unless unlocked early. */
  class services
  {
  public:
    virtual ~services() = default;
    virtual status create_key(std::string_view key, std::uint64_t size, value_desc &out, bool &created) = 0;
    virtual status open_key(std::string_view key, value_desc &out) = 0;
    virtual status erase_key(std::string_view key) = 0;
    virtual status resize_value(std::string_view key, std::uint64_t new_size, value_desc &out) = 0;
    virtual status allocate_memory(std::uint64_t size, std::uint64_t &offset) = 0;
    virtual status free_memory(std::uint64_t offset, std::uint64_t size) = 0;
    virtual status get_ref_vector(std::vector<key_ref> &out) = 0;
    /* Up to max pairs in key order starting at ordinal position. */
    virtual status iterate(std::uint64_t position, std::uint64_t max, std::vector<key_ref> &out, std::uint64_t &next) = 0;
    /* kind: 0 exact, 1 prefix, 2 regex; requires the pool's secondary index. */
    virtual status find_key(std::string_view expr, std::uint8_t kind, std::uint64_t begin, std::string &key, std::uint64_t &next) = 0;
    virtual status get_pool_info(pool_stats &out) = 0;
    virtual status unlock(std::string_view key) = 0;
  };

  /* One do_work upcall. values[0] is the key's value; detached is set by
     invoke_put_ado with the detached flag. */
  struct work
  {
    std::uint64_t work_id = 0;
    std::string key;
    std::vector<value_desc> values;
    std::optional<value_desc> detached;
    byte_span request;
    bool new_root = false;
  };

  constexpr std::string_view signal_prefix = "ADO::Signal";

  class plugin
  {
  public:
    virtual ~plugin() = default;

    virtual void register_mapped_memory(pool_memory &) {}
    virtual status do_work(const work &w, services &svc, pool_memory &mem, std::vector<byte_vector> &responses) = 0;
    virtual void cluster_event(const std::string &sender, const std::string &type, const std::string &message)
    {
      (void) sender; (void) type; (void) message;
    }
    virtual void shutdown() {}
  };

  using plugin_params = std::map<std::string, std::string>;
  using plugin_factory = std::unique_ptr<plugin> (*)(const plugin_params &);

  /* Builtins are looked up by short name ("passthru"); other identifiers are
     shared objects resolved against ado_path and must export
     mcaslite_ado_plugin_create. */
  void register_builtin(const std::string &name, plugin_factory f);
  std::unique_ptr<plugin> load_plugin(const std::string &id, const std::string &ado_path, const plugin_params &params);
  /* "libcomponent-adoplugin-passthru.so" -> "passthru" */
  std::string plugin_short_name(const std::string &id);
}

/* Exported by plugin shared objects; ownership passes to the caller. */
extern "C" {
  typedef mcaslite::ado::plugin *(*mcaslite_ado_plugin_create_fn)(const mcaslite::ado::plugin_params *);
}

#endif
