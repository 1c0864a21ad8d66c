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

#include <mcaslite/ado/host.h>

#include <spdlog/spdlog.h>

#include <fcntl.h>
#include <sys/mman.h>
#include <sys/prctl.h>
#include <sys/stat.h>
#include <unistd.h>

#include <chrono>
#include <csignal>
#include <cstring>
#include <thread>

namespace mcaslite::ado
{
  namespace
  {
    bool covers(const ccpm::extent &e, std::uint64_t offset, std::uint64_t length)
    {
      return offset >= e.offset && length <= e.length && offset - e.offset <= e.length - length;
    }

    [[noreturn]] void map_fail(std::uint64_t offset, std::uint64_t length)
    {
      throw error(status::E_MAP_FAIL, "range " + std::to_string(offset) + "+" + std::to_string(length) + " is outside the pool");
    }
  }

  arena_pool_memory::arena_pool_memory(pmem::persistent_arena &arena_, std::vector<ccpm::extent> extents_)
    : _arena(arena_)
    , _extents(std::move(extents_))
  {}

  mutable_byte_span arena_pool_memory::map(std::uint64_t offset_, std::uint64_t length_)
  {
    for ( const auto &e : _extents )
    {
      if ( covers(e, offset_, length_) )
      {
        return {_arena.raw() + offset_, length_};
      }
    }
    map_fail(offset_, length_);
  }

  void arena_pool_memory::write(std::uint64_t offset_, byte_span data_)
  {
    map(offset_, data_.size());
    _arena.write(offset_, data_);
  }

  void arena_pool_memory::persist(std::uint64_t offset_, std::uint64_t length_)
  {
    map(offset_, length_);
    _arena.persist(offset_, length_);
  }

  mapped_pool_memory::mapped_pool_memory(const std::string &path_, std::vector<ccpm::extent> extents_)
  {
    int fd = ::open(path_.c_str(), O_RDWR);
    if ( fd < 0 )
    {
      throw error(status::E_MAP_FAIL, "open " + path_ + ": " + std::strerror(errno));
    }
    struct stat st;
    ::fstat(fd, &st);
    for ( const auto &e : extents_ )
    {
      if ( e.length == 0 || e.end() > std::uint64_t(st.st_size) || e.offset % ::sysconf(_SC_PAGESIZE) )
      {
        ::close(fd);
        throw error(status::E_MAP_FAIL, "extent " + std::to_string(e.offset) + " is not mappable in " + path_);
      }
      auto p = ::mmap(nullptr, e.length, PROT_READ | PROT_WRITE, MAP_SHARED, fd, off_t(e.offset));
      if ( p == MAP_FAILED )
      {
        ::close(fd);
        throw error(status::E_MAP_FAIL, "mmap extent " + std::to_string(e.offset));
      }
      _maps.push_back({e, static_cast<std::byte *>(p)});
    }
    ::close(fd);
  }

  mapped_pool_memory::~mapped_pool_memory()
  {
    for ( const auto &m : _maps )
    {
      ::munmap(m.base, m.extent.length);
    }
  }

  mutable_byte_span mapped_pool_memory::map(std::uint64_t offset_, std::uint64_t length_)
  {
    for ( const auto &m : _maps )
    {
      if ( covers(m.extent, offset_, length_) )
      {
        return {m.base + (offset_ - m.extent.offset), length_};
      }
    }
    map_fail(offset_, length_);
  }

  void mapped_pool_memory::write(std::uint64_t offset_, byte_span data_)
  {
    auto m = map(offset_, data_.size());
    std::memcpy(m.data(), data_.data(), data_.size());
  }

  void mapped_pool_memory::persist(std::uint64_t offset_, std::uint64_t length_)
  {
    auto m = map(offset_, length_);
    auto page = std::uintptr_t(::sysconf(_SC_PAGESIZE));
    auto start = reinterpret_cast<std::uintptr_t>(m.data()) / page * page;
    auto end = reinterpret_cast<std::uintptr_t>(m.data()) + length_;
    ::msync(reinterpret_cast<void *>(start), end - start, MS_SYNC);
  }

  /* Callback API as seen by a plugin: each call is a queue round trip. */
  class host::proxy : public services
  {
  public:
    proxy(host &h_, std::uint64_t work_id_) : _h(h_), _work(work_id_) {}

    status create_key(std::string_view key_, std::uint64_t size_, value_desc &out_, bool &created_) override
    {
      callback_reply r;
      auto s = _h.call(req(callback_kind::create_key, key_, size_), r);
      out_ = {r.a, r.b};
      created_ = r.c != 0;
      return s;
    }

    status open_key(std::string_view key_, value_desc &out_) override
    {
      callback_reply r;
      auto s = _h.call(req(callback_kind::open_key, key_), r);
      out_ = {r.a, r.b};
      return s;
    }

    status erase_key(std::string_view key_) override
    {
      callback_reply r;
      return _h.call(req(callback_kind::erase_key, key_), r);
    }

    status resize_value(std::string_view key_, std::uint64_t new_size_, value_desc &out_) override
    {
      callback_reply r;
      auto s = _h.call(req(callback_kind::resize_value, key_, new_size_), r);
      out_ = {r.a, r.b};
      return s;
    }

    status allocate_memory(std::uint64_t size_, std::uint64_t &offset_) override
    {
      callback_reply r;
      auto s = _h.call(req(callback_kind::allocate_memory, {}, size_), r);
      offset_ = r.a;
      return s;
    }

    status free_memory(std::uint64_t offset_, std::uint64_t size_) override
    {
      callback_reply r;
      return _h.call(req(callback_kind::free_memory, {}, offset_, size_), r);
    }

    status get_ref_vector(std::vector<key_ref> &out_) override
    {
      callback_reply r;
      auto s = _h.call(req(callback_kind::get_ref_vector), r);
      out_ = std::move(r.refs);
      return s;
    }

    status iterate(std::uint64_t position_, std::uint64_t max_, std::vector<key_ref> &out_, std::uint64_t &next_) override
    {
      callback_reply r;
      auto s = _h.call(req(callback_kind::iterate, {}, position_, max_), r);
      out_ = std::move(r.refs);
      next_ = r.a;
      return s;
    }

    status find_key(std::string_view expr_, std::uint8_t kind_, std::uint64_t begin_, std::string &key_, std::uint64_t &next_) override
    {
      callback_reply r;
      auto q = req(callback_kind::find_key, expr_, begin_);
      q.match = kind_;
      auto s = _h.call(q, r);
      key_ = std::move(r.key);
      next_ = r.a;
      return s;
    }

    status get_pool_info(pool_stats &out_) override
    {
      callback_reply r;
      auto s = _h.call(req(callback_kind::get_pool_info), r);
      out_ = {r.a, r.b, r.c};
      return s;
    }

    status unlock(std::string_view key_) override
    {
      callback_reply r;
      return _h.call(req(callback_kind::unlock, key_), r);
    }

  private:
    callback_request req(callback_kind k_, std::string_view key_ = {}, std::uint64_t a_ = 0, std::uint64_t b_ = 0) const
    {
      callback_request q;
      q.work_id = _work;
      q.kind = k_;
      q.key = std::string(key_);
      q.a = a_;
      q.b = b_;
      return q;
    }

    host &_h;
    std::uint64_t _work;
  };

  host::host(uipc_endpoint &ep_, pool_memory &mem_, std::vector<std::unique_ptr<plugin>> plugins_, std::function<void()> idle_)
    : _ep(ep_)
    , _mem(mem_)
    , _plugins(std::move(plugins_))
    , _idle(std::move(idle_))
  {
    if ( _plugins.empty() )
    {
      throw error(status::E_CONFIG, "ADO host needs at least one plugin");
    }
    for ( auto &p : _plugins )
    {
      p->register_mapped_memory(_mem);
    }
  }

  host::~host() = default;

  void host::send(const ipc_message &m_)
  {
    auto bytes = encode(m_);
    for ( ;; )
    {
      auto s = _ep.send(bytes);
      if ( s == status::S_OK )
      {
        return;
      }
      if ( s != status::E_QUEUE_FULL )
      {
        throw error(s, "ADO queue send");
      }
      _idle();
    }
  }

  status host::call(const callback_request &req_, callback_reply &out_)
  {
    send(req_);
    byte_vector b;
    for ( ;; )
    {
      if ( ! _ep.recv(b) )
      {
        _idle();
        continue;
      }
      ipc_message m;
      if ( decode(b, m) != status::S_OK )
      {
        throw error(status::E_PROTOCOL, "malformed queue message");
      }
      if ( auto r = std::get_if<callback_reply>(&m); r && r->work_id == req_.work_id )
      {
        out_ = std::move(*r);
        return out_.st;
      }
      _stash.push_back(std::move(m));
    }
  }

  void host::run_work(work_request &w_)
  {
    auto layer = _next++ % _plugins.size();
    work wk;
    wk.work_id = w_.work_id;
    wk.key = w_.key;
    wk.values = w_.values;
    wk.detached = w_.detached;
    wk.request = w_.request;
    wk.new_root = w_.new_root;

    proxy svc(*this, w_.work_id);
    std::vector<byte_vector> out;
    status st;
    try
    {
      st = _plugins[layer]->do_work(wk, svc, _mem, out);
    }
    catch ( const pmem::simulated_crash & )
    {
      throw;
    }
    catch ( const std::exception &e )
    {
      spdlog::error("ADO plugin {} failed on work {}: {}", layer, w_.work_id, e.what());
      st = status::E_ADO_FAULT;
      out.clear();
    }
    catch ( ... )
    {
      spdlog::error("ADO plugin {} failed on work {}", layer, w_.work_id);
      st = status::E_ADO_FAULT;
      out.clear();
    }
    work_complete c;
    c.work_id = w_.work_id;
    c.st = st;
    for ( auto &o : out )
    {
      c.responses.push_back({std::uint32_t(layer), std::move(o)});
    }
    auto bytes = encode(c);
    if ( bytes.size() > 64 * MiB )
    {
      c.st = status::E_TOO_LARGE;
      c.responses.clear();
    }
    send(c);
  }

  bool host::step()
  {
    ipc_message m;
    if ( ! _stash.empty() )
    {
      m = std::move(_stash.front());
      _stash.pop_front();
    }
    else
    {
      byte_vector b;
      if ( ! _ep.recv(b) )
      {
        return false;
      }
      if ( decode(b, m) != status::S_OK )
      {
        spdlog::error("ADO host: malformed queue message dropped");
        return true;
      }
    }
    if ( auto w = std::get_if<work_request>(&m) )
    {
      run_work(*w);
    }
    else if ( auto c = std::get_if<cluster_notice>(&m) )
    {
      for ( auto &p : _plugins )
      {
        p->cluster_event(c->sender, c->type, c->message);
      }
    }
    else if ( std::holds_alternative<shutdown_notice>(m) )
    {
      for ( auto &p : _plugins )
      {
        p->shutdown();
      }
      _stopped = true;
    }
    return true;
  }

  int run_ado_process(const process_options &o_)
  {
    ::prctl(PR_SET_PDEATHSIG, SIGKILL);
    std::unique_ptr<uipc_region> region;
    try
    {
      region = uipc_region::open_shm(o_.shm_name);
    }
    catch ( const error &e )
    {
      spdlog::error("mcas-ado: {}", e.what());
      return 2;
    }
    uipc_endpoint ep(*region, 1);
    auto ready = [&] (status s_) {
      auto b = encode(ready_notice{s_});
      while ( ep.send(b) == status::E_QUEUE_FULL )
      {
        std::this_thread::sleep_for(std::chrono::microseconds(100));
      }
    };

    std::unique_ptr<mapped_pool_memory> mem;
    std::vector<std::unique_ptr<plugin>> plugins;
    try
    {
      mem = std::make_unique<mapped_pool_memory>(o_.arena_path, o_.extents);
      for ( const auto &id : o_.plugins )
      {
        plugins.push_back(load_plugin(id, o_.ado_path, o_.params));
      }
    }
    catch ( const error &e )
    {
      spdlog::error("mcas-ado: {}", e.what());
      ready(e.code());
      return 3;
    }

    unsigned spins = 0;
    auto idle = [&] {
      if ( ++spins < 1000 )
      {
        std::this_thread::yield();
      }
      else
      {
        std::this_thread::sleep_for(std::chrono::microseconds(50));
      }
    };
    host h(ep, *mem, std::move(plugins), idle);
    ready(status::S_OK);
    while ( ! h.stopped() )
    {
      if ( h.step() )
      {
        spins = 0;
      }
      else
      {
        idle();
      }
    }
    return 0;
  }
}
