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

#include <mcaslite/plugins/builtins.h>
#include <mcaslite/server/server.h>

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include <csignal>
#include <filesystem>
#include <iostream>

namespace
{
  std::atomic<bool> stop_requested{false};

  void on_signal(int)
  {
    stop_requested = true;
  }
}

int main(int argc, char **argv)
{
  using namespace mcaslite;

  std::string conf;
  std::string debug = "info";
  std::string device;
  std::string ado_mode = "process";
  std::string ado_exe;

  CLI::App app{"mcas-server: sharded key-value store"};
  app.add_option("--conf", conf, "JSON configuration file")->required();
  app.add_option("--debug", debug, "Log level (trace, debug, info, warn, error) or 0-5");
  app.add_option("--device", device, "Override the dax path of every shard");
  app.add_option("--ado-mode", ado_mode, "ADO hosting: process or in-process")->check(CLI::IsMember({"process", "in-process"}));
  app.add_option("--ado-exe", ado_exe, "mcas-ado executable (default: next to this binary)");
  CLI11_PARSE(app, argc, argv);

  if ( ! debug.empty() && std::isdigit(static_cast<unsigned char>(debug[0])) )
  {
    spdlog::set_level(static_cast<spdlog::level::level_enum>(std::clamp(5 - std::stoi(debug), 0, 6)));
  }
  else
  {
    spdlog::set_level(spdlog::level::from_str(debug));
  }

  if ( ado_exe.empty() )
  {
    ado_exe = (std::filesystem::canonical("/proc/self/exe").parent_path() / "mcas-ado").string();
  }

  plugins::register_builtins();
  try
  {
    auto cfg = server::load_config_file(conf);
    server::server_options opts;
    opts.mode = ado_mode == "process" ? server::ado_mode::process : server::ado_mode::in_process;
    opts.ado_exe = ado_exe;
    opts.device = device;
    server::server srv(cfg, opts);

    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);
    std::signal(SIGPIPE, SIG_IGN);
    srv.start();
    auto ports = srv.ports();
    for ( std::size_t i = 0; i < ports.size(); ++i )
    {
      std::cout << "shard " << i << " listening on port " << ports[i] << std::endl;
    }
    while ( ! stop_requested )
    {
      std::this_thread::sleep_for(std::chrono::milliseconds(50));
    }
    srv.stop();
    srv.wait();
  }
  catch ( const server::config_error &e )
  {
    std::cerr << "configuration error: " << e.field() << std::endl;
    return 2;
  }
  catch ( const error &e )
  {
    std::cerr << e.what() << std::endl;
    return 1;
  }
  return 0;
}
