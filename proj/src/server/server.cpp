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

#include <mcaslite/server/server.h>

#include <spdlog/spdlog.h>

#include <arpa/inet.h>
#include <fcntl.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <pthread.h>
#include <sys/epoll.h>
#include <sys/eventfd.h>
#include <sys/socket.h>
#include <sys/stat.h>
#include <sys/uio.h>
#include <unistd.h>

#include <cstring>
#include <deque>

namespace mcaslite::server
{
  namespace
  {
    constexpr std::size_t read_chunk = 256 * KiB;
    /* bytes read from one connection per loop turn, so sessions interleave */
    constexpr std::size_t read_budget = 1 * MiB;

    [[noreturn]] void sys_fail(const std::string &what_)
    {
      throw error(status::E_CONNECT, what_ + ": " + std::strerror(errno));
    }
  }

  struct shard_endpoint::connection
  {
    int fd;
    session_id session;
    wire::stream_decoder decoder;
    std::deque<byte_vector> out;
    std::size_t out_offset = 0;
    bool closing = false;
    bool want_write = false;
  };

  shard_endpoint::shard_endpoint(std::unique_ptr<pmem::persistent_arena> arena_, shard_options options_,
                                 std::uint16_t port_, const std::string &bind_address_)
    : _arena(std::move(arena_))
  {
    _listen = ::socket(AF_INET, SOCK_STREAM | SOCK_NONBLOCK | SOCK_CLOEXEC, 0);
    if ( _listen < 0 )
    {
      sys_fail("socket");
    }
    int one = 1;
    ::setsockopt(_listen, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(port_);
    if ( ::inet_pton(AF_INET, bind_address_.c_str(), &addr.sin_addr) != 1 )
    {
      ::close(_listen);
      throw error(status::E_CONFIG, "bad bind address " + bind_address_);
    }
    if ( ::bind(_listen, reinterpret_cast<sockaddr *>(&addr), sizeof addr) != 0 || ::listen(_listen, 128) != 0 )
    {
      ::close(_listen);
      sys_fail("bind port " + std::to_string(port_));
    }
    socklen_t len = sizeof addr;
    ::getsockname(_listen, reinterpret_cast<sockaddr *>(&addr), &len);
    _port = ntohs(addr.sin_port);
    if ( options_.label == "0" )
    {
      options_.label = std::to_string(_port);
    }

    _epoll = ::epoll_create1(EPOLL_CLOEXEC);
    _wake = ::eventfd(0, EFD_NONBLOCK | EFD_CLOEXEC);
    epoll_event ev{};
    ev.events = EPOLLIN;
    ev.data.fd = _listen;
    ::epoll_ctl(_epoll, EPOLL_CTL_ADD, _listen, &ev);
    ev.data.fd = _wake;
    ::epoll_ctl(_epoll, EPOLL_CTL_ADD, _wake, &ev);

    shard_hooks hooks;
    hooks.respond = [this] (session_id sid, wire::message &&m) { queue_response(sid, std::move(m)); };
    hooks.drop = [this] (session_id sid) {
      if ( auto it = _fd_of.find(sid); it != _fd_of.end() )
      {
        _conns[it->second]->closing = true;
      }
    };
    _shard = std::make_unique<shard>(*_arena, std::move(options_), std::move(hooks));
  }

  shard_endpoint::~shard_endpoint()
  {
    for ( auto &[fd, c] : _conns )
    {
      ::close(fd);
    }
    _shard.reset();
    ::close(_listen);
    ::close(_epoll);
    ::close(_wake);
  }

  void shard_endpoint::stop()
  {
    _stop = true;
    std::uint64_t one = 1;
    [[maybe_unused]] auto n = ::write(_wake, &one, sizeof one);
  }

  void shard_endpoint::queue_response(session_id sid_, wire::message &&m_)
  {
    auto it = _fd_of.find(sid_);
    if ( it == _fd_of.end() )
    {
      return;
    }
    _conns[it->second]->out.push_back(wire::encode(m_));
  }

  void shard_endpoint::accept_all()
  {
    for ( ;; )
    {
      int fd = ::accept4(_listen, nullptr, nullptr, SOCK_NONBLOCK | SOCK_CLOEXEC);
      if ( fd < 0 )
      {
        return;
      }
      int one = 1;
      ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
      auto c = std::make_unique<connection>();
      c->fd = fd;
      c->session = _next_session++;
      epoll_event ev{};
      ev.events = EPOLLIN | EPOLLRDHUP;
      ev.data.fd = fd;
      ::epoll_ctl(_epoll, EPOLL_CTL_ADD, fd, &ev);
      _fd_of[c->session] = fd;
      _shard->open_session(c->session);
      _conns[fd] = std::move(c);
    }
  }

  void shard_endpoint::close_connection(int fd_)
  {
    auto it = _conns.find(fd_);
    if ( it == _conns.end() )
    {
      return;
    }
    _shard->close_session(it->second->session);
    _fd_of.erase(it->second->session);
    ::epoll_ctl(_epoll, EPOLL_CTL_DEL, fd_, nullptr);
    ::close(fd_);
    _conns.erase(it);
  }

  void shard_endpoint::on_readable(int fd_)
  {
    auto &c = *_conns[fd_];
    std::vector<std::byte> buf(read_chunk);
    std::size_t budget = read_budget;
    std::vector<wire::message> msgs;
    while ( budget && ! c.closing )
    {
      auto n = ::read(fd_, buf.data(), std::min(buf.size(), budget));
      if ( n == 0 || (n < 0 && errno != EAGAIN && errno != EINTR) )
      {
        close_connection(fd_);
        return;
      }
      if ( n < 0 )
      {
        break;
      }
      budget -= std::size_t(n);
      if ( c.decoder.feed(byte_span(buf.data(), std::size_t(n)), msgs) != status::S_OK )
      {
        spdlog::info("session {}: malformed frame, closing", c.session);
        close_connection(fd_);
        return;
      }
      for ( auto &m : msgs )
      {
        _shard->submit(c.session, std::move(m));
      }
      msgs.clear();
    }
  }

  void shard_endpoint::flush(connection &c_)
  {
    while ( ! c_.out.empty() )
    {
      iovec iov[64];
      int n = 0;
      std::size_t off = c_.out_offset;
      for ( auto it = c_.out.begin(); it != c_.out.end() && n < 64; ++it, ++n )
      {
        iov[n].iov_base = it->data() + off;
        iov[n].iov_len = it->size() - off;
        off = 0;
      }
      auto w = ::writev(c_.fd, iov, n);
      if ( w < 0 )
      {
        if ( errno == EAGAIN || errno == EINTR )
        {
          break;
        }
        c_.out.clear();
        c_.closing = true;
        return;
      }
      auto left = std::size_t(w);
      while ( left )
      {
        auto avail = c_.out.front().size() - c_.out_offset;
        if ( left >= avail )
        {
          left -= avail;
          c_.out.pop_front();
          c_.out_offset = 0;
        }
        else
        {
          c_.out_offset += left;
          left = 0;
        }
      }
    }
    bool want = ! c_.out.empty();
    if ( want != c_.want_write )
    {
      epoll_event ev{};
      ev.events = EPOLLIN | EPOLLRDHUP | (want ? EPOLLOUT : 0u);
      ev.data.fd = c_.fd;
      ::epoll_ctl(_epoll, EPOLL_CTL_MOD, c_.fd, &ev);
      c_.want_write = want;
    }
  }

  void shard_endpoint::run()
  {
    epoll_event events[64];
    while ( ! _stop )
    {
      int timeout = _shard->works_in_flight() ? 0 : 50;
      int n = ::epoll_wait(_epoll, events, 64, timeout);
      for ( int i = 0; i < n; ++i )
      {
        int fd = events[i].data.fd;
        if ( fd == _listen )
        {
          accept_all();
        }
        else if ( fd == _wake )
        {
          std::uint64_t v;
          [[maybe_unused]] auto r = ::read(_wake, &v, sizeof v);
        }
        else if ( _conns.contains(fd) )
        {
          if ( events[i].events & (EPOLLIN | EPOLLRDHUP | EPOLLHUP | EPOLLERR) )
          {
            on_readable(fd);
          }
        }
      }
      bool busy = _shard->poll();
      std::vector<int> done;
      for ( auto &[fd, c] : _conns )
      {
        flush(*c);
        if ( c->closing && c->out.empty() )
        {
          done.push_back(fd);
        }
      }
      for ( auto fd : done )
      {
        close_connection(fd);
      }
      if ( n == 0 && ! busy && _shard->works_in_flight() )
      {
        ::sched_yield();
      }
    }
  }

  server::server(const server_config &config_, server_options options_)
  {
    for ( std::size_t i = 0; i < config_.shards.size(); ++i )
    {
      const auto &sc = config_.shards[i];
      auto dax = sc.dax.at(0);
      if ( ! options_.device.empty() )
      {
        dax.path = config_.shards.size() == 1 ? options_.device : options_.device + "." + std::to_string(i);
      }
      auto capacity = dax.size;
      struct stat st;
      if ( capacity == 0 && ::stat(dax.path.c_str(), &st) != 0 )
      {
        capacity = options_.default_capacity;
      }
      auto arena = pmem::arena_open(dax.path, capacity, pmem::backend_kind::mapped_file, dax.addr);
      spdlog::info("shard {}: arena {} ({} MiB, {})", i, dax.path, arena->capacity() / MiB,
                   arena->was_formatted() ? "formatted" : "recovered");

      shard_options so;
      so.index = unsigned(i);
      so.backend = sc.backend;
      so.ado_plugins = sc.ado_plugins;
      so.ado_path = config_.ado_path;
      so.ado_params = sc.ado_params;
      so.signal_post_put = sc.signal_post_put;
      so.signal_post_erase = sc.signal_post_erase;
      so.mode = options_.mode;
      so.ado_exe = options_.ado_exe;
      _shards.push_back(std::make_unique<shard_endpoint>(std::move(arena), std::move(so), sc.port, options_.bind_address));
      _cores.push_back(sc.core);
    }
  }

  server::~server()
  {
    stop();
    wait();
  }

  void server::start()
  {
    for ( std::size_t i = 0; i < _shards.size(); ++i )
    {
      _threads.emplace_back([this, i] {
        cpu_set_t set;
        CPU_ZERO(&set);
        CPU_SET(_cores[i] % std::max(1u, std::thread::hardware_concurrency()), &set);
        if ( ::pthread_setaffinity_np(::pthread_self(), sizeof set, &set) != 0 )
        {
          spdlog::debug("shard {}: core pinning not applied", i);
        }
        try
        {
          _shards[i]->run();
        }
        catch ( const std::exception &e )
        {
          spdlog::critical("shard {} stopped: {}", i, e.what());
        }
      });
    }
  }

  void server::stop()
  {
    for ( auto &s : _shards )
    {
      s->stop();
    }
  }

  void server::wait()
  {
    for ( auto &t : _threads )
    {
      if ( t.joinable() )
      {
        t.join();
      }
    }
    _threads.clear();
  }

  std::vector<std::uint16_t> server::ports() const
  {
    std::vector<std::uint16_t> v;
    for ( const auto &s : _shards )
    {
      v.push_back(s->port());
    }
    return v;
  }
}
