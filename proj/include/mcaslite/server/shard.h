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

#ifndef MCASLITE_SERVER_SHARD_H
#define MCASLITE_SERVER_SHARD_H

#include <mcaslite/engine/kvstore.h>
#include <mcaslite/server/ado_link.h>
#include <mcaslite/wire/protocol.h>

#include <functional>
#include <memory>
#include <string>

namespace mcaslite::server
{
  using session_id = std::uint64_t;

  struct shard_options
  {
    unsigned index = 0;
    /* <shard> part of queue names mcaslite.<shard>.<pool>.uipc */
    std::string label = "0";
    std::string backend = "hstore";
    engine::engine_options engine;
    std::vector<std::string> ado_plugins;
    std::string ado_path;
    ado::plugin_params ado_params;
    bool signal_post_put = false;
    bool signal_post_erase = false;
    ado_mode mode = ado_mode::process;
    std::string ado_exe;
  };

  struct shard_hooks
  {
    /* Receives every response. */
    std::function<void(session_id, wire::message &&)> respond;
    /* The session must be torn down once its queued responses are written. */
    std::function<void(session_id)> drop;
  };

  /* One shard's request processing, independent of transport. All calls come
     from the shard's thread. A mutation is persisted before its response is
     handed to hooks.respond. */
  class shard
  {
  public:
    shard(pmem::persistent_arena &arena, shard_options options, shard_hooks hooks);
    ~shard();

    shard(const shard &) = delete;
    shard &operator=(const shard &) = delete;

    void open_session(session_id id);
    /* Drops the session's pool opens; responses still owed to it are discarded. */
    void close_session(session_id id);
    /* Requests of one session are handled in arrival order; a session waiting
       for ADO completion queues the rest. */
    void submit(session_id id, wire::message &&request);

    /* Services ADO queues; true when any message was handled. */
    bool poll();
    std::size_t works_in_flight() const noexcept;

    engine::kvstore &store() noexcept;
    /* Compares engine locks with those held by in-flight works; empty when they agree. */
    std::string lock_audit() const;
    /* Handles raw bytes as if received from the pool's ADO queue. */
    void on_ado_bytes(engine::pool_t pool, byte_span bytes);
    std::vector<std::pair<std::string, std::uint64_t>> statistics() const;

  private:
    struct impl;
    std::unique_ptr<impl> _impl;
  };
}

#endif
