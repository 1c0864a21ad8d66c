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

#include <mcaslite/ado/uipc.h>

#include <fcntl.h>
#include <sys/mman.h>
#include <unistd.h>

#include <cstring>

namespace mcaslite::ado
{
  namespace
  {
    constexpr std::uint64_t uipc_magic = 0x3130304350495555ULL; /* "UUIPC001" */
    constexpr std::uint64_t header_bytes = 4096;
    constexpr std::uint64_t control_bytes = 4096;

    constexpr std::uint32_t slot_inline = 0;
    constexpr std::uint32_t slot_spill = 1;

    std::uint64_t direction_bytes(const ring_geometry &g) noexcept
    {
      return control_bytes + std::uint64_t(g.slots) * g.slot_size + g.spill_size;
    }

    void write_header(std::byte *b, const ring_geometry &g)
    {
      store_le(b + 8, g.slots);
      store_le(b + 12, g.slot_size);
      store_le(b + 16, g.spill_size);
      std::atomic_thread_fence(std::memory_order_release);
      store_le(b, uipc_magic);
    }

    void check_geometry(const ring_geometry &g)
    {
      if ( g.slots == 0 || (g.slots & (g.slots - 1)) || g.slot_size < 64 || g.slot_size % 8 || g.spill_size % 4096 )
      {
        throw error(status::E_INVALID, "bad ring geometry");
      }
    }
  }

  std::uint64_t uipc_region::bytes_for(const ring_geometry &g_) noexcept
  {
    return header_bytes + 2 * direction_bytes(g_);
  }

  std::unique_ptr<uipc_region> uipc_region::create_shm(const std::string &name_, ring_geometry g_)
  {
    check_geometry(g_);
    std::unique_ptr<uipc_region> r(new uipc_region);
    r->_name = "/" + name_;
    r->_geometry = g_;
    r->_size = bytes_for(g_);
    ::shm_unlink(r->_name.c_str());
    int fd = ::shm_open(r->_name.c_str(), O_CREAT | O_EXCL | O_RDWR, 0600);
    if ( fd < 0 )
    {
      throw error(status::E_MAP_FAIL, "shm_open " + name_ + ": " + std::strerror(errno));
    }
    if ( ::ftruncate(fd, off_t(r->_size)) != 0 )
    {
      ::close(fd);
      ::shm_unlink(r->_name.c_str());
      throw error(status::E_MAP_FAIL, "ftruncate " + name_);
    }
    auto p = ::mmap(nullptr, r->_size, PROT_READ | PROT_WRITE, MAP_SHARED, fd, 0);
    ::close(fd);
    if ( p == MAP_FAILED )
    {
      ::shm_unlink(r->_name.c_str());
      throw error(status::E_MAP_FAIL, "mmap " + name_);
    }
    r->_base = static_cast<std::byte *>(p);
    r->_mapped = true;
    r->_owner = true;
    write_header(r->_base, g_);
    return r;
  }

  std::unique_ptr<uipc_region> uipc_region::open_shm(const std::string &name_)
  {
    std::unique_ptr<uipc_region> r(new uipc_region);
    r->_name = "/" + name_;
    int fd = ::shm_open(r->_name.c_str(), O_RDWR, 0600);
    if ( fd < 0 )
    {
      throw error(status::E_MAP_FAIL, "shm_open " + name_ + ": " + std::strerror(errno));
    }
    std::byte hdr[24];
    if ( ::pread(fd, hdr, sizeof hdr, 0) != sizeof hdr || load_le<std::uint64_t>(hdr) != uipc_magic )
    {
      ::close(fd);
      throw error(status::E_MAP_FAIL, "no queue header in " + name_);
    }
    r->_geometry.slots = load_le<std::uint32_t>(hdr + 8);
    r->_geometry.slot_size = load_le<std::uint32_t>(hdr + 12);
    r->_geometry.spill_size = load_le<std::uint64_t>(hdr + 16);
    check_geometry(r->_geometry);
    r->_size = bytes_for(r->_geometry);
    auto p = ::mmap(nullptr, r->_size, PROT_READ | PROT_WRITE, MAP_SHARED, fd, 0);
    ::close(fd);
    if ( p == MAP_FAILED )
    {
      throw error(status::E_MAP_FAIL, "mmap " + name_);
    }
    r->_base = static_cast<std::byte *>(p);
    r->_mapped = true;
    return r;
  }

  std::unique_ptr<uipc_region> uipc_region::create_local(ring_geometry g_)
  {
    check_geometry(g_);
    std::unique_ptr<uipc_region> r(new uipc_region);
    r->_geometry = g_;
    r->_size = bytes_for(g_);
    /* anonymous mapping: zeroed and only touched pages are backed */
    auto p = ::mmap(nullptr, r->_size, PROT_READ | PROT_WRITE, MAP_PRIVATE | MAP_ANONYMOUS, -1, 0);
    if ( p == MAP_FAILED )
    {
      throw error(status::E_MAP_FAIL, "anonymous queue mapping");
    }
    r->_base = static_cast<std::byte *>(p);
    r->_mapped = true;
    write_header(r->_base, g_);
    return r;
  }

  uipc_region::~uipc_region()
  {
    if ( _mapped )
    {
      ::munmap(_base, _size);
    }
    if ( _owner )
    {
      ::shm_unlink(_name.c_str());
    }
  }

  spsc_ring::spsc_ring(uipc_region &r_, unsigned direction_)
    : _g(r_.geometry())
  {
    static_assert(std::atomic<std::uint64_t>::is_always_lock_free);
    auto d = r_.base() + header_bytes + direction_ * direction_bytes(_g);
    _head = reinterpret_cast<std::atomic<std::uint64_t> *>(d);
    _tail = reinterpret_cast<std::atomic<std::uint64_t> *>(d + 64);
    _spill_head = reinterpret_cast<std::atomic<std::uint64_t> *>(d + 128);
    _spill_tail = reinterpret_cast<std::atomic<std::uint64_t> *>(d + 192);
    _slots = d + control_bytes;
    _spill = _slots + std::uint64_t(_g.slots) * _g.slot_size;
  }

  std::byte *spsc_ring::slot(std::uint64_t i_) noexcept
  {
    return _slots + (i_ & (_g.slots - 1)) * _g.slot_size;
  }

  status spsc_ring::send_slot(std::uint32_t kind_, byte_span a_, byte_span b_)
  {
    if ( a_.size() + b_.size() > slot_payload() )
    {
      return status::E_QUEUE_FULL;
    }
    auto head = _head->load(std::memory_order_relaxed);
    if ( head - _tail->load(std::memory_order_acquire) >= _g.slots )
    {
      return status::E_QUEUE_FULL;
    }
    auto s = slot(head);
    store_le(s, std::uint32_t(a_.size() + b_.size()));
    store_le(s + 4, kind_);
    std::memcpy(s + 8, a_.data(), a_.size());
    if ( ! b_.empty() )
    {
      std::memcpy(s + 8 + a_.size(), b_.data(), b_.size());
    }
    _head->store(head + 1, std::memory_order_release);
    return status::S_OK;
  }

  status spsc_ring::send(byte_span msg_)
  {
    return send_slot(slot_inline, msg_, {});
  }

  bool spsc_ring::empty() const noexcept
  {
    return _head->load(std::memory_order_acquire) == _tail->load(std::memory_order_relaxed);
  }

  bool spsc_ring::recv(byte_vector &out_)
  {
    auto tail = _tail->load(std::memory_order_relaxed);
    if ( _head->load(std::memory_order_acquire) == tail )
    {
      return false;
    }
    auto s = slot(tail);
    auto len = load_le<std::uint32_t>(s);
    auto kind = load_le<std::uint32_t>(s + 4);
    if ( kind == slot_spill )
    {
      auto pos = load_le<std::uint64_t>(s + 8);
      auto n = load_le<std::uint64_t>(s + 16);
      auto at = _spill + pos % _g.spill_size;
      out_.assign(at, at + n);
      _spill_tail->store(pos + n, std::memory_order_release);
    }
    else
    {
      out_.assign(s + 8, s + 8 + len);
    }
    _tail->store(tail + 1, std::memory_order_release);
    return true;
  }

  uipc_endpoint::uipc_endpoint(uipc_region &r_, unsigned side_)
    : _out(r_, side_)
    , _in(r_, 1 - side_)
  {}

  status uipc_endpoint::send(byte_span msg_)
  {
    if ( msg_.size() <= _out.slot_payload() )
    {
      return _out.send(msg_);
    }
    auto &g = _out._g;
    if ( msg_.size() > g.spill_size )
    {
      return status::E_TOO_LARGE;
    }
    if ( _out._head->load(std::memory_order_relaxed) - _out._tail->load(std::memory_order_acquire) >= g.slots )
    {
      return status::E_QUEUE_FULL;
    }
    auto head = _out._spill_head->load(std::memory_order_relaxed);
    auto tail = _out._spill_tail->load(std::memory_order_acquire);
    auto pos = head;
    if ( pos % g.spill_size + msg_.size() > g.spill_size )
    {
      pos = round_up(pos + 1, g.spill_size);
    }
    if ( pos + msg_.size() - tail > g.spill_size )
    {
      return status::E_QUEUE_FULL;
    }
    std::memcpy(_out._spill + pos % g.spill_size, msg_.data(), msg_.size());
    _out._spill_head->store(pos + msg_.size(), std::memory_order_relaxed);
    std::byte d[16];
    store_le(d, pos);
    store_le(d + 8, std::uint64_t(msg_.size()));
    return _out.send_slot(slot_spill, byte_span(d, 16), {});
  }

  bool uipc_endpoint::recv(byte_vector &out_)
  {
    return _in.recv(out_);
  }
}
