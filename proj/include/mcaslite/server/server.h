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

#ifndef MCASLITE_SERVER_SERVER_H
#define MCASLITE_SERVER_SERVER_H

#include <mcaslite/server/config.h>
#include <mcaslite/server/shard.h>

#include <atomic>
#include <map>
#include <memory>
#include <thread>

namespace mcaslite::server
{
  /* One shard bound to a TCP port: an epoll loop feeding the shard core. */
  class shard_endpoint
  {
  public:
    /* Binds immediately; port 0 picks an ephemeral port. */
    shard_endpoint(std::unique_ptr<pmem::persistent_arena> arena, shard_options options, std::uint16_t port,
                   const std::string &bind_address = "0.0.0.0");
    ~shard_endpoint();

    std::uint16_t port() const noexcept { return _port; }
    /* Serves until stop() is called from any thread. */
    void run();
    void stop();

  private:
    struct connection;
    void accept_all();
    void on_readable(int fd);
    void flush(connection &c);
    void close_connection(int fd);
    void queue_response(session_id sid, wire::message &&m);

    std::unique_ptr<pmem::persistent_arena> _arena;
    std::unique_ptr<shard> _shard;
    int _listen = -1;
    int _epoll = -1;
    int _wake = -1;
    std::uint16_t _port = 0;
    std::atomic<bool> _stop{false};
    std::map<int, std::unique_ptr<connection>> _conns;
    std::map<session_id, int> _fd_of;
    session_id _next_session = 1;
  };

  struct server_options
  {
    ado_mode mode = ado_mode::process;
    std::string ado_exe;
    /* Replaces the dax path of every shard (suffixed .<n> when there are several). */
    std::string device;
    /* Capacity used when the dax file does not exist and no size is configured. */
    std::uint64_t default_capacity = 1 * GiB;
    std::string bind_address = "0.0.0.0";
  };

  /* Runs every configured shard on its own thread. */
  class server
  {
  public:
    server(const server_config &config, server_options options);
    ~server();

    void start();
    void stop();
    void wait();
    std::vector<std::uint16_t> ports() const;

  private:
    std::vector<std::unique_ptr<shard_endpoint>> _shards;
    std::vector<unsigned> _cores;
    std::vector<std::thread> _threads;
  };
}

#endif
