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

#ifndef MCASLITE_SERVER_ADO_LINK_H
#define MCASLITE_SERVER_ADO_LINK_H

#include <mcaslite/ado/ipc.h>
#include <mcaslite/ccpm/undo_log.h>
#include <mcaslite/pmem/arena.h>

#include <chrono>
#include <functional>
#include <memory>
#include <string>
#include <sys/types.h>

namespace mcaslite::server
{
  enum class ado_mode
  {
    in_process,   /* host stepped on the shard thread; used by crash tests */
    process,      /* mcas-ado child process mapping the pool's arena extents */
  };

  struct ado_launch
  {
    std::string shm_name;
    std::vector<std::string> plugins;
    std::string ado_path;
    ado::plugin_params params;
    std::vector<ccpm::extent> extents;
  };

  /* Shard end of one pool's ADO queue. */
  class ado_link
  {
  public:
    virtual ~ado_link() = default;
    /* E_QUEUE_FULL when the ring has no room. */
    virtual status send(const ado::ipc_message &m) = 0;
    /* Non-blocking. Malformed messages throw error(E_PROTOCOL). */
    virtual bool recv(ado::ipc_message &m) = 0;
    virtual bool alive() = 0;
    /* Runs an in-process host until it has nothing left to do. */
    virtual void pump() {}
    virtual void shutdown() = 0;
  };

  /* idle is called while the host waits for a callback reply and must answer
     pending callbacks without pumping. */
  std::unique_ptr<ado_link> make_in_process_link(pmem::persistent_arena &arena, const ado_launch &launch,
                                                 std::function<void()> idle);

  /* Spawns ado_exe and waits for its ready notice. Throws error(E_ADO_FAULT)
     when the process fails to start, or the status it reported. */
  std::unique_ptr<ado_link> make_process_link(const std::string &ado_exe, const std::string &arena_path,
                                              const ado_launch &launch,
                                              std::chrono::milliseconds ready_timeout = std::chrono::seconds(5));
}

#endif
