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

#ifndef MCASLITE_CLIENT_SESSION_H
#define MCASLITE_CLIENT_SESSION_H

#include <mcaslite/wire/protocol.h>

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

/* Client API. One session is one TCP stream to one shard; requests are
   pipelined and completions matched by request id. A session is used by one
   thread at a time. */
namespace mcaslite::client
{
  using pool_t = std::uint64_t;
  using async_handle = std::uint64_t;
  using wire::ado_buffer;

  /* Registration of client memory for the direct calls. */
  struct memory_handle
  {
    std::uint64_t id = 0;
  };

  class session
  {
  public:
    /* Connects and performs the handshake. Throws error(E_CONNECT), or
       error(E_VERSION) when the server rejects the protocol version. */
    static std::unique_ptr<session> connect(const std::string &host, std::uint16_t port,
                                            std::uint32_t version = wire::protocol_version);
    ~session();

    session(const session &) = delete;
    session &operator=(const session &) = delete;

    std::uint32_t server_version() const noexcept { return _server_version; }

    /* ---- pools ---- */
    status create_pool(const std::string &name, std::uint64_t size, pool_t &out, std::uint32_t flags = 0);
    status open_pool(const std::string &name, pool_t &out);
    status close_pool(pool_t pool);
    status delete_pool(const std::string &name);
    status configure_pool(pool_t pool, const std::string &command);

    /* ---- small values (< 2 MiB) ---- */
    status put(pool_t pool, std::string_view key, byte_span value, std::uint32_t flags = 0);
    status put(pool_t pool, std::string_view key, std::string_view value, std::uint32_t flags = 0);
    status get(pool_t pool, std::string_view key, byte_vector &out);
    status get(pool_t pool, std::string_view key, std::string &out);
    /* Value in memory allocated by the library; release it with free_memory. */
    status get(pool_t pool, std::string_view key, void *&out, std::size_t &out_len);
    void free_memory(void *p);
    /* Library allocations not yet released with free_memory. */
    std::uint64_t outstanding_allocations() const noexcept { return _allocations; }
    status erase(pool_t pool, std::string_view key);

    /* Asynchronous variants. value and out must stay valid until completion. */
    status async_put(pool_t pool, std::string_view key, byte_span value, async_handle &out, std::uint32_t flags = 0);
    status async_get(pool_t pool, std::string_view key, byte_vector &value_out, async_handle &out);
    status async_erase(pool_t pool, std::string_view key, async_handle &out);
    /* E_BUSY while pending; afterwards the operation's status, once. */
    status check_async_completion(async_handle handle);
    /* Blocks until the operation completes and returns its status. */
    status wait(async_handle handle);
    std::size_t pending() const noexcept { return _pending.size(); }

    /* ---- direct transfers from registered memory ---- */
    memory_handle register_direct_memory(void *base, std::size_t length);
    status unregister_direct_memory(memory_handle handle);
    status put_direct(pool_t pool, std::string_view key, const void *data, std::size_t length, memory_handle handle,
                      std::uint32_t flags = 0);
    /* length: buffer capacity in, value length out. E_TOO_LARGE when the value does not fit. */
    status get_direct(pool_t pool, std::string_view key, void *data, std::size_t &length, memory_handle handle);
    status put_direct_offset(pool_t pool, std::string_view key, std::uint64_t offset, const void *data,
                             std::size_t length, memory_handle handle);
    status get_direct_offset(pool_t pool, std::string_view key, std::uint64_t offset, void *data,
                             std::size_t length, memory_handle handle);
    status async_put_direct(pool_t pool, std::string_view key, const void *data, std::size_t length,
                            memory_handle handle, async_handle &out, std::uint32_t flags = 0);
    status async_get_direct(pool_t pool, std::string_view key, void *data, std::size_t &length,
                            memory_handle handle, async_handle &out);
    status async_put_direct_offset(pool_t pool, std::string_view key, std::uint64_t offset, const void *data,
                                   std::size_t length, memory_handle handle, async_handle &out);
    status async_get_direct_offset(pool_t pool, std::string_view key, std::uint64_t offset, void *data,
                                   std::size_t length, memory_handle handle, async_handle &out);

    /* ---- ADO ---- */
    /* value_size > 0 creates an absent key with a zeroed value of that size. */
    status invoke_ado(pool_t pool, std::string_view key, byte_span request, std::uint32_t flags,
                      std::vector<ado_buffer> &out, std::uint64_t value_size = 0);
    status invoke_put_ado(pool_t pool, std::string_view key, byte_span request, byte_span value,
                          std::uint64_t root_len, std::uint32_t flags, std::vector<ado_buffer> &out);
    status async_invoke_ado(pool_t pool, std::string_view key, byte_span request, std::uint32_t flags,
                            std::vector<ado_buffer> &out, async_handle &handle, std::uint64_t value_size = 0);
    status async_invoke_put_ado(pool_t pool, std::string_view key, byte_span request, byte_span value,
                                std::uint64_t root_len, std::uint32_t flags, std::vector<ado_buffer> &out,
                                async_handle &handle);

    /* ---- information ---- */
    status get_attributes(pool_t pool, std::string_view key, wire::attribute attr, std::vector<std::uint64_t> &out);
    status get_statistics(std::vector<std::pair<std::string, std::uint64_t>> &out);
    /* kind: 0 exact, 1 prefix, 2 regex. */
    status find(pool_t pool, std::string_view expr, std::uint8_t kind, std::uint64_t begin,
                std::string &key, std::uint64_t &next_position);

  private:
    struct pending_op
    {
      bool done = false;
      status st = status::S_OK;
      std::function<void(wire::response &)> fill;
      /* direct reads land here without staging */
      std::byte *direct = nullptr;
      std::size_t direct_capacity = 0;
      std::size_t *direct_length = nullptr;
    };

    session() = default;

    status send(wire::body &&b, pending_op op, async_handle &out);
    status call(wire::body &&b, std::function<void(wire::response &)> fill = {});
    bool covered(memory_handle h, const void *p, std::size_t len) const;
    /* Reads one whole response. With block false, returns false at once when none has started arriving. */
    bool receive(bool block);
    void fail_all(status st);
    void read_exact(std::byte *dst, std::size_t n);
    void read_header(wire::header &h);
    void read_direct(const wire::header &first, pending_op &op);

    int _fd = -1;
    std::uint64_t _next_request = 1;
    std::uint32_t _server_version = 0;
    std::map<async_handle, pending_op> _pending;
    std::map<std::uint64_t, std::pair<std::byte *, std::size_t>> _registrations;
    std::uint64_t _next_registration = 1;
    std::uint64_t _allocations = 0;
    status _broken = status::S_OK;

    /* staging for small reads; large direct payloads bypass it */
    byte_vector _rbuf = byte_vector(64 * KiB);
    std::size_t _rpos = 0;
    std::size_t _rend = 0;
  };
}

#endif
