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
#include <mcaslite/server/ado_link.h>

#include <spdlog/spdlog.h>

#include <signal.h>
#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include <thread>

extern char **environ;

namespace mcaslite::server
{
  namespace
  {
    bool decode_or_throw(const byte_vector &b_, ado::ipc_message &m_)
    {
      if ( ado::decode(b_, m_) != status::S_OK )
      {
        throw error(status::E_PROTOCOL, "malformed ADO queue message");
      }
      return true;
    }

    class in_process_link : public ado_link
    {
    public:
      in_process_link(pmem::persistent_arena &arena_, const ado_launch &launch_, std::function<void()> idle_)
        : _region(ado::uipc_region::create_local())
        , _shard_end(*_region, 0)
        , _ado_end(*_region, 1)
        , _memory(arena_, launch_.extents)
      {
        std::vector<std::unique_ptr<ado::plugin>> plugins;
        for ( const auto &id : launch_.plugins )
        {
          plugins.push_back(ado::load_plugin(id, launch_.ado_path, launch_.params));
        }
        _host = std::make_unique<ado::host>(_ado_end, _memory, std::move(plugins), std::move(idle_));
      }

      status send(const ado::ipc_message &m_) override { return _shard_end.send(ado::encode(m_)); }

      bool recv(ado::ipc_message &m_) override
      {
        byte_vector b;
        return _shard_end.recv(b) && decode_or_throw(b, m_);
      }

      bool alive() override { return ! _host->stopped(); }

      void pump() override
      {
        if ( _pumping )
        {
          return;
        }
        _pumping = true;
        try
        {
          while ( ! _host->stopped() && _host->step() )
          {
          }
        }
        catch ( ... )
        {
          _pumping = false;
          throw;
        }
        _pumping = false;
      }

      void shutdown() override
      {
        if ( ! _host->stopped() )
        {
          send(ado::shutdown_notice{});
          pump();
        }
      }

    private:
      std::unique_ptr<ado::uipc_region> _region;
      ado::uipc_endpoint _shard_end;
      ado::uipc_endpoint _ado_end;
      ado::arena_pool_memory _memory;
      std::unique_ptr<ado::host> _host;
      bool _pumping = false;
    };

    class process_link : public ado_link
    {
    public:
      process_link(const std::string &exe_, const std::string &arena_path_, const ado_launch &launch_,
                   std::chrono::milliseconds timeout_)
        : _region(ado::uipc_region::create_shm(launch_.shm_name))
        , _end(*_region, 0)
      {
        std::vector<std::string> args{exe_, "--shm", launch_.shm_name, "--arena", arena_path_};
        for ( const auto &e : launch_.extents )
        {
          args.push_back("--extent");
          args.push_back(std::to_string(e.offset) + ":" + std::to_string(e.length));
        }
        for ( const auto &p : launch_.plugins )
        {
          args.push_back("--plugin");
          args.push_back(p);
        }
        if ( ! launch_.ado_path.empty() )
        {
          args.push_back("--ado-path");
          args.push_back(launch_.ado_path);
        }
        for ( const auto &[k, v] : launch_.params )
        {
          args.push_back("--param");
          args.push_back(k + "=" + v);
        }
        std::vector<char *> argv;
        for ( auto &a : args )
        {
          argv.push_back(a.data());
        }
        argv.push_back(nullptr);
        if ( ::posix_spawn(&_pid, exe_.c_str(), nullptr, nullptr, argv.data(), environ) != 0 )
        {
          throw error(status::E_ADO_FAULT, "cannot spawn " + exe_);
        }
        wait_ready(timeout_);
      }

      ~process_link() override { shutdown(); }

      status send(const ado::ipc_message &m_) override { return _end.send(ado::encode(m_)); }

      bool recv(ado::ipc_message &m_) override
      {
        byte_vector b;
        return _end.recv(b) && decode_or_throw(b, m_);
      }

      bool alive() override
      {
        if ( _pid <= 0 )
        {
          return false;
        }
        int st;
        if ( ::waitpid(_pid, &st, WNOHANG) == _pid )
        {
          spdlog::warn("ADO process {} exited (status {:#x})", _pid, st);
          _pid = -1;
          return false;
        }
        return true;
      }

      void shutdown() override
      {
        if ( _pid <= 0 )
        {
          return;
        }
        send(ado::shutdown_notice{});
        auto deadline = std::chrono::steady_clock::now() + std::chrono::seconds(1);
        int st;
        while ( ::waitpid(_pid, &st, WNOHANG) == 0 )
        {
          if ( std::chrono::steady_clock::now() > deadline )
          {
            ::kill(_pid, SIGKILL);
            ::waitpid(_pid, &st, 0);
            break;
          }
          std::this_thread::sleep_for(std::chrono::milliseconds(1));
        }
        _pid = -1;
      }

    private:
      void wait_ready(std::chrono::milliseconds timeout_)
      {
        auto deadline = std::chrono::steady_clock::now() + timeout_;
        for ( ;; )
        {
          ado::ipc_message m;
          if ( recv(m) )
          {
            if ( auto r = std::get_if<ado::ready_notice>(&m) )
            {
              if ( r->st != status::S_OK )
              {
                shutdown();
                throw error(r->st, "ADO process failed to start");
              }
              return;
            }
            continue;
          }
          if ( ! alive() )
          {
            throw error(status::E_ADO_FAULT, "ADO process exited during startup");
          }
          if ( std::chrono::steady_clock::now() > deadline )
          {
            ::kill(_pid, SIGKILL);
            int st;
            ::waitpid(_pid, &st, 0);
            _pid = -1;
            throw error(status::E_ADO_FAULT, "ADO process did not become ready");
          }
          std::this_thread::sleep_for(std::chrono::microseconds(200));
        }
      }

      std::unique_ptr<ado::uipc_region> _region;
      ado::uipc_endpoint _end;
      pid_t _pid = -1;
    };
  }

  std::unique_ptr<ado_link> make_in_process_link(pmem::persistent_arena &arena_, const ado_launch &launch_,
                                                 std::function<void()> idle_)
  {
    return std::make_unique<in_process_link>(arena_, launch_, std::move(idle_));
  }

  std::unique_ptr<ado_link> make_process_link(const std::string &exe_, const std::string &arena_path_,
                                              const ado_launch &launch_, std::chrono::milliseconds timeout_)
  {
    return std::make_unique<process_link>(exe_, arena_path_, launch_, timeout_);
  }
}
