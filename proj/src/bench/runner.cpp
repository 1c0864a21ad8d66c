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

#include <mcaslite/bench/bench.h>
#include <mcaslite/client/session.h>
#include <mcaslite/plugins/builtins.h>
#include <mcaslite/pmem/arena.h>
#include <mcaslite/server/server.h>

#include <spdlog/spdlog.h>

#include <algorithm>
#include <chrono>
#include <cstring>
#include <filesystem>
#include <latch>
#include <thread>

#include <arpa/inet.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <spawn.h>
#include <sys/socket.h>
#include <sys/wait.h>
#include <unistd.h>

extern char **environ;

namespace mcaslite::bench
{
  namespace
  {
    using clock = std::chrono::steady_clock;

    struct outcome
    {
      client_result result;
      std::vector<std::uint64_t> samples;
    };

    std::string host_name()
    {
      char buf[256] = {};
      ::gethostname(buf, sizeof buf - 1);
      return buf;
    }

    std::string pool_name(const workload &w_, unsigned id_)
    {
      return "bench-" + std::to_string(w_.seed) + "-" + std::to_string(id_);
    }

    /* One client: connect, prepare keys, meet the others at the barrier, run. */
    outcome run_client(const workload &w_, const endpoint &ep_, unsigned id_, unsigned shard_,
                       const std::function<void()> &barrier_)
    {
      outcome o;
      o.result.id = id_;
      o.result.shard = shard_;
      o.result.host = host_name();
      o.result.host_cpus = std::thread::hardware_concurrency();

      std::unique_ptr<client::session> s;
      client::pool_t pool = 0;
      try
      {
        s = client::session::connect(ep_.host, ep_.port);
        if ( auto st = s->create_pool(pool_name(w_, id_), w_.pool_size, pool); st != status::S_OK )
        {
          throw error(st, "create_pool");
        }
      }
      catch ( const error &e )
      {
        o.result.error = e.what();
        barrier_();
        return o;
      }

      auto key_count = w_.same_key ? 1 : std::max<std::uint64_t>(1, w_.ops ? std::min(w_.key_set, w_.ops) : w_.key_set);
      auto keys = key_sequence(w_, id_, key_count);
      std::string value(w_.value_len, char('a' + id_ % 26));
      if ( w_.kind == mix::read )
      {
        for ( const auto &k : keys )
        {
          if ( auto st = s->put(pool, k, value); st != status::S_OK )
          {
            o.result.error = "prepare: " + std::string(status_name(st));
            break;
          }
        }
      }
      barrier_();
      if ( ! o.result.error.empty() )
      {
        return o;
      }

      std::mt19937_64 pick(w_.seed * 0x9E3779B97F4A7C15ULL + 7919 * (id_ + 1));
      std::uniform_int_distribution<std::size_t> which(0, keys.size() - 1);
      auto t0 = clock::now();
      auto deadline = w_.duration > 0
                        ? t0 + std::chrono::duration_cast<clock::duration>(std::chrono::duration<double>(w_.duration))
                        : clock::time_point::max();
      bool limited = w_.ops > 0 || w_.duration > 0;
      if ( w_.ops )
      {
        o.samples.reserve(w_.ops);
      }
      std::string got;
      std::vector<client::ado_buffer> ado_out;
      auto request = as_bytes(value);
      auto now = t0;
      while ( limited && (w_.ops == 0 || o.result.ops < w_.ops) && now < deadline )
      {
        const auto &k = keys[which(pick)];
        status st = status::S_OK;
        bool ok = true;
        auto start = clock::now();
        switch ( w_.kind )
        {
        case mix::write:
          st = s->put(pool, k, value);
          break;
        case mix::read:
          st = s->get(pool, k, got);
          ok = got.size() == w_.value_len;
          break;
        case mix::ado:
          st = s->invoke_ado(pool, k, request, wire::ADO_FLAG_NONE, ado_out, w_.value_len);
          ok = ado_out.size() == 1 && ado_out[0].data == byte_vector(request.begin(), request.end());
          break;
        }
        now = clock::now();
        if ( st == status::E_CONNECT )
        {
          o.result.error = "connection lost";
          break;
        }
        ++o.result.ops;
        o.samples.push_back(std::uint64_t(std::chrono::duration_cast<std::chrono::nanoseconds>(now - start).count()));
        if ( st != status::S_OK || ! ok )
        {
          ++o.result.errors;
        }
      }
      o.result.seconds = std::chrono::duration<double>(now - t0).count();
      if ( o.result.error.empty() )
      {
        s->close_pool(pool);
        s->delete_pool(pool_name(w_, id_));
      }
      return o;
    }

    report assemble(const workload &w_, std::vector<outcome> &outs_)
    {
      report r;
      r.spec = w_;
      std::vector<std::uint64_t> all;
      std::uint64_t ops = 0;
      for ( auto &o : outs_ )
      {
        r.clients.push_back(o.result);
        r.partial = r.partial || ! o.result.error.empty();
        r.wall_seconds = std::max(r.wall_seconds, o.result.seconds);
        ops += o.result.ops;
        all.insert(all.end(), o.samples.begin(), o.samples.end());
        o.samples = {};
      }
      r.aggregate = r.wall_seconds > 0 ? double(ops) / r.wall_seconds : 0;
      std::sort(all.begin(), all.end());
      r.latency = percentiles_of(all);
      r.hist = histogram::build(std::move(all));
      return r;
    }

    /* Newline-delimited JSON plus raw sample blocks over a stream socket. */
    class channel
    {
    public:
      explicit channel(int fd_) : _fd(fd_) {}
      ~channel() { if ( _fd >= 0 ) ::close(_fd); }
      channel(const channel &) = delete;
      channel &operator=(const channel &) = delete;

      void send_json(const json &j_)
      {
        auto text = j_.dump() + "\n";
        send_raw(text.data(), text.size());
      }

      void send_raw(const void *p_, std::size_t n_)
      {
        auto *c = static_cast<const char *>(p_);
        while ( n_ )
        {
          auto w = ::send(_fd, c, n_, MSG_NOSIGNAL);
          if ( w <= 0 )
          {
            throw error(status::E_CONNECT, "control channel write");
          }
          c += w;
          n_ -= std::size_t(w);
        }
      }

      json recv_json()
      {
        std::string line;
        for ( ;; )
        {
          if ( auto nl = _buf.find('\n'); nl != std::string::npos )
          {
            line = _buf.substr(0, nl);
            _buf.erase(0, nl + 1);
            return json::parse(line);
          }
          fill();
        }
      }

      void recv_raw(void *p_, std::size_t n_)
      {
        auto *c = static_cast<char *>(p_);
        auto take = std::min(n_, _buf.size());
        std::memcpy(c, _buf.data(), take);
        _buf.erase(0, take);
        c += take;
        n_ -= take;
        while ( n_ )
        {
          auto r = ::recv(_fd, c, n_, 0);
          if ( r <= 0 )
          {
            throw error(status::E_CONNECT, "control channel closed");
          }
          c += r;
          n_ -= std::size_t(r);
        }
      }

    private:
      void fill()
      {
        char tmp[4096];
        auto r = ::recv(_fd, tmp, sizeof tmp, 0);
        if ( r <= 0 )
        {
          throw error(status::E_CONNECT, "control channel closed");
        }
        _buf.append(tmp, std::size_t(r));
      }

      int _fd;
      std::string _buf;
    };

    json result_json(const client_result &c_, std::size_t samples_)
    {
      return json{{"ops", c_.ops}, {"errors", c_.errors}, {"seconds", c_.seconds}, {"host", c_.host},
                  {"host_cpus", c_.host_cpus}, {"error", c_.error}, {"samples", samples_}};
    }

    report run_threads(const workload &w_, const launch &l_)
    {
      std::latch start(w_.clients);
      std::vector<outcome> outs(w_.clients);
      std::vector<std::thread> threads;
      for ( unsigned i = 0; i != w_.clients; ++i )
      {
        threads.emplace_back([&, i] {
          auto shard = i % unsigned(l_.targets.size());
          outs[i] = run_client(w_, l_.targets[shard], i, shard, [&] { start.arrive_and_wait(); });
        });
      }
      for ( auto &t : threads )
      {
        t.join();
      }
      return assemble(w_, outs);
    }

    report run_processes(const workload &w_, const launch &l_)
    {
      int lfd = ::socket(AF_INET, SOCK_STREAM | SOCK_CLOEXEC, 0);
      sockaddr_in addr{};
      addr.sin_family = AF_INET;
      addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
      socklen_t len = sizeof addr;
      if ( lfd < 0 || ::bind(lfd, reinterpret_cast<sockaddr *>(&addr), sizeof addr) != 0 || ::listen(lfd, 64) != 0 ||
           ::getsockname(lfd, reinterpret_cast<sockaddr *>(&addr), &len) != 0 )
      {
        if ( lfd >= 0 )
        {
          ::close(lfd);
        }
        throw error(status::E_CONNECT, "control socket");
      }
      auto control = std::to_string(ntohs(addr.sin_port));

      std::vector<pid_t> pids(w_.clients, -1);
      for ( unsigned i = 0; i != w_.clients; ++i )
      {
        auto id = std::to_string(i);
        std::vector<char *> argv{const_cast<char *>(l_.exe.c_str()), const_cast<char *>("--worker"),
                                 const_cast<char *>("--control"), control.data(), const_cast<char *>("--id"), id.data(),
                                 nullptr};
        if ( ::posix_spawn(&pids[i], l_.exe.c_str(), nullptr, nullptr, argv.data(), environ) != 0 )
        {
          pids[i] = -1;
        }
      }

      std::vector<outcome> outs(w_.clients);
      std::vector<std::unique_ptr<channel>> chans(w_.clients);
      for ( unsigned i = 0; i != w_.clients; ++i )
      {
        outs[i].result.id = i;
        outs[i].result.shard = i % unsigned(l_.targets.size());
      }
      auto fail = [&] (unsigned i, const std::string &why) {
        if ( outs[i].result.error.empty() )
        {
          outs[i].result.error = why;
        }
        chans[i].reset();
      };

      /* hello: each worker names itself, then receives its assignment */
      auto live = unsigned(std::count_if(pids.begin(), pids.end(), [] (pid_t p) { return p > 0; }));
      for ( unsigned n = 0; n != live; ++n )
      {
        pollfd p{lfd, POLLIN, 0};
        if ( ::poll(&p, 1, 30000) != 1 )
        {
          break;
        }
        int fd = ::accept4(lfd, nullptr, nullptr, SOCK_CLOEXEC);
        if ( fd < 0 )
        {
          continue;
        }
        timeval tv{std::int64_t(w_.duration) + 600, 0};
        ::setsockopt(fd, SOL_SOCKET, SO_RCVTIMEO, &tv, sizeof tv);
        auto ch = std::make_unique<channel>(fd);
        try
        {
          auto id = ch->recv_json().at("id").get<unsigned>();
          if ( id >= w_.clients || chans[id] )
          {
            continue;
          }
          const auto &ep = l_.targets[outs[id].result.shard];
          ch->send_json({{"workload", to_json(w_)}, {"host", ep.host}, {"port", ep.port}, {"shard", outs[id].result.shard}});
          chans[id] = std::move(ch);
        }
        catch ( const std::exception & )
        {
        }
      }
      ::close(lfd);
      for ( unsigned i = 0; i != w_.clients; ++i )
      {
        if ( ! chans[i] )
        {
          fail(i, "worker did not start");
        }
      }

      for ( unsigned i = 0; i != w_.clients; ++i )
      {
        try
        {
          if ( chans[i] )
          {
            chans[i]->recv_json();
          }
        }
        catch ( const std::exception & )
        {
          fail(i, "worker lost before start");
        }
      }
      for ( unsigned i = 0; i != w_.clients; ++i )
      {
        try
        {
          if ( chans[i] )
          {
            chans[i]->send_json({{"go", true}});
          }
        }
        catch ( const std::exception & )
        {
          fail(i, "worker lost at start");
        }
      }
      for ( unsigned i = 0; i != w_.clients; ++i )
      {
        if ( ! chans[i] )
        {
          continue;
        }
        try
        {
          auto j = chans[i]->recv_json();
          auto &r = outs[i].result;
          r.ops = j.at("ops");
          r.errors = j.at("errors");
          r.seconds = j.at("seconds");
          r.host = j.at("host");
          r.host_cpus = j.at("host_cpus");
          r.error = j.at("error");
          outs[i].samples.resize(j.at("samples").get<std::size_t>());
          chans[i]->recv_raw(outs[i].samples.data(), outs[i].samples.size() * sizeof(std::uint64_t));
        }
        catch ( const std::exception & )
        {
          fail(i, "worker lost before reporting");
          outs[i].samples.clear();
        }
      }
      chans.clear();
      for ( auto p : pids )
      {
        if ( p > 0 )
        {
          ::waitpid(p, nullptr, 0);
        }
      }
      return assemble(w_, outs);
    }
  }

  std::vector<std::string> key_sequence(const workload &w_, unsigned client_, std::uint64_t count_)
  {
    static constexpr char alphabet[] = "abcdefghijklmnopqrstuvwxyz0123456789";
    std::mt19937_64 rng(w_.seed * 0x2545F4914F6CDD1DULL + client_ + 1);
    std::uniform_int_distribution<unsigned> letter(0, sizeof alphabet - 2);
    std::vector<std::string> keys(count_);
    for ( auto &k : keys )
    {
      k.resize(std::max<std::size_t>(1, w_.key_len));
      for ( auto &c : k )
      {
        c = alphabet[letter(rng)];
      }
    }
    return keys;
  }

  report run(const workload &w_, const launch &l_)
  {
    if ( l_.targets.empty() )
    {
      throw error(status::E_INVALID, "no targets");
    }
    if ( w_.clients == 0 )
    {
      std::vector<outcome> none;
      return assemble(w_, none);
    }
    return l_.kind == launch::how::threads ? run_threads(w_, l_) : run_processes(w_, l_);
  }

  int worker_main(std::uint16_t control_port_, unsigned id_)
  {
    int fd = ::socket(AF_INET, SOCK_STREAM | SOCK_CLOEXEC, 0);
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
    addr.sin_port = htons(control_port_);
    if ( fd < 0 || ::connect(fd, reinterpret_cast<sockaddr *>(&addr), sizeof addr) != 0 )
    {
      spdlog::error("worker {}: cannot reach coordinator on port {}", id_, control_port_);
      return 1;
    }
    channel ch(fd);
    try
    {
      ch.send_json({{"id", id_}});
      auto assignment = ch.recv_json();
      auto w = workload_from_json(assignment.at("workload"));
      endpoint ep{assignment.at("host"), assignment.at("port")};
      auto o = run_client(w, ep, id_, assignment.at("shard"), [&] {
        ch.send_json({{"ready", true}});
        ch.recv_json();
      });
      ch.send_json(result_json(o.result, o.samples.size()));
      ch.send_raw(o.samples.data(), o.samples.size() * sizeof(std::uint64_t));
    }
    catch ( const std::exception &e )
    {
      spdlog::error("worker {}: {}", id_, e.what());
      return 1;
    }
    return 0;
  }

  struct local_cluster::impl
  {
    std::filesystem::path dir;
    std::vector<std::unique_ptr<server::shard_endpoint>> shards;
    std::vector<std::thread> threads;
  };

  local_cluster::local_cluster(unsigned shards_, std::uint64_t capacity_, std::string dir_)
    : _impl(std::make_unique<impl>())
  {
    plugins::register_builtins();
    auto tag = "mcaslite-bench-" + std::to_string(::getpid()) + "-" +
               std::to_string(reinterpret_cast<std::uintptr_t>(this) & 0xffffff);
    std::filesystem::path base = dir_;
    if ( base.empty() )
    {
      std::error_code ec;
      base = std::filesystem::is_directory("/dev/shm", ec) ? "/dev/shm" : std::filesystem::temp_directory_path();
    }
    _impl->dir = base / tag;
    std::filesystem::create_directories(_impl->dir);
    for ( unsigned i = 0; i != shards_; ++i )
    {
      auto arena = pmem::arena_open((_impl->dir / ("shard" + std::to_string(i))).string(), capacity_,
                                    pmem::backend_kind::mapped_file);
      server::shard_options o;
      o.index = i;
      o.label = tag + "-" + std::to_string(i);
      o.mode = server::ado_mode::in_process;
      o.ado_plugins = {"passthru"};
      _impl->shards.push_back(std::make_unique<server::shard_endpoint>(std::move(arena), std::move(o), 0, "127.0.0.1"));
    }
    for ( auto &s : _impl->shards )
    {
      _impl->threads.emplace_back([ep = s.get()] { ep->run(); });
    }
  }

  local_cluster::~local_cluster()
  {
    for ( auto &s : _impl->shards )
    {
      s->stop();
    }
    for ( auto &t : _impl->threads )
    {
      t.join();
    }
    _impl->shards.clear();
    std::error_code ec;
    std::filesystem::remove_all(_impl->dir, ec);
  }

  std::vector<endpoint> local_cluster::endpoints() const
  {
    std::vector<endpoint> out;
    for ( const auto &s : _impl->shards )
    {
      out.push_back({"127.0.0.1", s->port()});
    }
    return out;
  }
}
