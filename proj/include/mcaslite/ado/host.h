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

#ifndef MCASLITE_ADO_HOST_H
#define MCASLITE_ADO_HOST_H

#include <mcaslite/ado/ipc.h>
#include <mcaslite/ado/uipc.h>
#include <mcaslite/ccpm/undo_log.h>
#include <mcaslite/pmem/arena.h>

#include <deque>
#include <functional>

namespace mcaslite::ado
{
  /* Pool memory reached through the shard's own arena (in-process hosting).
     Writes go through the arena so crash simulation sees them. */
  class arena_pool_memory : public pool_memory
  {
  public:
    arena_pool_memory(pmem::persistent_arena &arena, std::vector<ccpm::extent> extents);
    mutable_byte_span map(std::uint64_t offset, std::uint64_t length) override;
    void write(std::uint64_t offset, byte_span data) override;
    void persist(std::uint64_t offset, std::uint64_t length) override;

  private:
    pmem::persistent_arena &_arena;
    std::vector<ccpm::extent> _extents;
  };

  /* The pool's extents of the arena file mapped into this process; nothing
     else of the file is mapped. */
  class mapped_pool_memory : public pool_memory
  {
  public:
    /* Throws error(E_MAP_FAIL) when the file or an extent cannot be mapped. */
    mapped_pool_memory(const std::string &path, std::vector<ccpm::extent> extents);
    ~mapped_pool_memory() override;
    mutable_byte_span map(std::uint64_t offset, std::uint64_t length) override;
    void write(std::uint64_t offset, byte_span data) override;
    void persist(std::uint64_t offset, std::uint64_t length) override;

  private:
    struct mapping
    {
      ccpm::extent extent;
      std::byte *base;
    };
    std::vector<mapping> _maps;
  };

  /* Runs plugins against one queue endpoint. Each work item goes to one
     plugin, chosen round-robin; its layer id is the plugin's index. */
  class host
  {
  public:
    /* idle is called while waiting for a callback reply or queue room. */
    host(uipc_endpoint &ep, pool_memory &mem, std::vector<std::unique_ptr<plugin>> plugins, std::function<void()> idle);
    ~host();

    /* Handles at most one message; false when none was waiting. */
    bool step();
    bool stopped() const noexcept { return _stopped; }
    void send(const ipc_message &m);

  private:
    class proxy;
    status call(const callback_request &req, callback_reply &out);
    void run_work(work_request &w);

    uipc_endpoint &_ep;
    pool_memory &_mem;
    std::vector<std::unique_ptr<plugin>> _plugins;
    std::function<void()> _idle;
    std::deque<ipc_message> _stash;
    std::size_t _next = 0;
    bool _stopped = false;
  };

  struct process_options
  {
    std::string shm_name;
    std::string arena_path;
    std::vector<ccpm::extent> extents;
    std::vector<std::string> plugins;
    std::string ado_path;
    plugin_params params;
  };

  /* Body of the mcas-ado process. Returns the exit code. */
  int run_ado_process(const process_options &o);
}

#endif
