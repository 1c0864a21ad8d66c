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

#ifndef MCASLITE_ADO_IPC_H
#define MCASLITE_ADO_IPC_H

#include <mcaslite/ado/plugin.h>
#include <mcaslite/wire/protocol.h>

#include <variant>

/* Messages crossing the shard/ADO queue. */
namespace mcaslite::ado
{
  enum class callback_kind : std::uint8_t {
    create_key = 1,
    open_key,
    erase_key,
    resize_value,
    allocate_memory,
    free_memory,
    get_ref_vector,
    iterate,
    find_key,
    get_pool_info,
    unlock,
  };

  /* shard -> ADO */
  struct work_request
  {
    std::uint64_t work_id = 0;
    std::string key;
    std::vector<value_desc> values;
    std::optional<value_desc> detached;
    byte_vector request;
    bool new_root = false;
    friend bool operator==(const work_request &, const work_request &) = default;
  };

  /* ADO -> shard; a and b carry the numeric arguments of the kind. */
  struct callback_request
  {
    std::uint64_t work_id = 0;
    callback_kind kind = callback_kind::get_pool_info;
    std::string key;
    std::uint64_t a = 0;
    std::uint64_t b = 0;
    std::uint8_t match = 0;
    friend bool operator==(const callback_request &, const callback_request &) = default;
  };

  /* shard -> ADO */
  struct callback_reply
  {
    std::uint64_t work_id = 0;
    status st = status::S_OK;
    std::vector<key_ref> refs;
    std::string key;
    std::uint64_t a = 0;
    std::uint64_t b = 0;
    std::uint64_t c = 0;
    friend bool operator==(const callback_reply &, const callback_reply &) = default;
  };

  /* ADO -> shard */
  struct work_complete
  {
    std::uint64_t work_id = 0;
    status st = status::S_OK;
    std::vector<wire::ado_buffer> responses;
    friend bool operator==(const work_complete &, const work_complete &) = default;
  };

  struct cluster_notice
  {
    std::string sender;
    std::string type;
    std::string message;
    friend bool operator==(const cluster_notice &, const cluster_notice &) = default;
  };

  struct shutdown_notice
  {
    friend bool operator==(const shutdown_notice &, const shutdown_notice &) = default;
  };

  /* ADO -> shard once plugins are loaded and memory is mapped (st != S_OK: startup failed). */
  struct ready_notice
  {
    status st = status::S_OK;
    friend bool operator==(const ready_notice &, const ready_notice &) = default;
  };

  using ipc_message = std::variant<work_request, callback_request, callback_reply, work_complete,
                                   cluster_notice, shutdown_notice, ready_notice>;

  byte_vector encode(const ipc_message &m);
  /* E_PROTOCOL on malformed input. */
  status decode(byte_span in, ipc_message &out);
}

#endif
