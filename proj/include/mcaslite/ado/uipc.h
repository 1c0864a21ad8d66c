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

#ifndef MCASLITE_ADO_UIPC_H
#define MCASLITE_ADO_UIPC_H

#include <mcaslite/common/bytes.h>
#include <mcaslite/status.h>

#include <atomic>
#include <cstdint>
#include <memory>
#include <string>

namespace mcaslite::ado
{
  struct ring_geometry
  {
    std::uint32_t slots = 64;
    std::uint32_t slot_size = 4096;
    std::uint64_t spill_size = 64 * MiB;
  };

  /* Shared memory holding two single-producer/single-consumer directions.
     Direction 0 carries shard-to-ADO traffic, direction 1 the reverse. Each
     direction has a ring of fixed slots and a spill byte ring for messages that
     do not fit a slot; the slot then carries (position, length). */
  class uipc_region
  {
  public:
    /* Named POSIX shared memory, unlinked when the creator is destroyed. */
    static std::unique_ptr<uipc_region> create_shm(const std::string &name, ring_geometry g = {});
    static std::unique_ptr<uipc_region> open_shm(const std::string &name);
    /* Process-local memory with the same layout (in-process hosts). */
    static std::unique_ptr<uipc_region> create_local(ring_geometry g = {});

    uipc_region(const uipc_region &) = delete;
    uipc_region &operator=(const uipc_region &) = delete;
    ~uipc_region();

    std::byte *base() noexcept { return _base; }
    const ring_geometry &geometry() const noexcept { return _geometry; }
    const std::string &name() const noexcept { return _name; }

    static std::uint64_t bytes_for(const ring_geometry &g) noexcept;

  private:
    uipc_region() = default;

    std::byte *_base = nullptr;
    std::uint64_t _size = 0;
    ring_geometry _geometry;
    std::string _name;
    bool _owner = false;
    bool _mapped = false;
  };

  /* One direction. Producer and consumer each touch only their own index. */
  class spsc_ring
  {
  public:
    spsc_ring(uipc_region &r, unsigned direction);

    std::uint32_t slot_payload() const noexcept { return _g.slot_size - 8; }

    /* E_QUEUE_FULL when the ring is full or msg exceeds the slot payload. */
    status send(byte_span msg);
    bool recv(byte_vector &out);
    bool empty() const noexcept;

  private:
    friend class uipc_endpoint;
    status send_slot(std::uint32_t kind, byte_span a, byte_span b);
    std::byte *slot(std::uint64_t i) noexcept;

    ring_geometry _g;
    std::atomic<std::uint64_t> *_head;
    std::atomic<std::uint64_t> *_tail;
    std::atomic<std::uint64_t> *_spill_head;
    std::atomic<std::uint64_t> *_spill_tail;
    std::byte *_slots;
    std::byte *_spill;
  };

  /* Message-level endpoint: any message up to the spill size, in FIFO order. */
  class uipc_endpoint
  {
  public:
    /* side 0 is the shard, side 1 the ADO. */
    uipc_endpoint(uipc_region &r, unsigned side);

    /* E_QUEUE_FULL when there is no room now; the caller retries. */
    status send(byte_span msg);
    bool recv(byte_vector &out);

  private:
    spsc_ring _out;
    spsc_ring _in;
  };
}

#endif
