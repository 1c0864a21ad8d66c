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
#include <mcaslite/plugins/builtins.h>

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

/* ADO container process, launched by a shard for one pool. */
int main(int argc, char **argv)
{
  using namespace mcaslite;

  ado::process_options o;
  std::vector<std::string> extents;
  std::vector<std::string> params;

  CLI::App app{"mcas-ado: hosts ADO plugins for one pool"};
  app.add_option("--shm", o.shm_name, "Queue shared-memory name")->required();
  app.add_option("--arena", o.arena_path, "Arena file holding the pool")->required();
  app.add_option("--extent", extents, "Pool extent as offset:length")->required();
  app.add_option("--plugin", o.plugins, "Plugin identifier")->required();
  app.add_option("--ado-path", o.ado_path, "Directory searched for plugin modules");
  app.add_option("--param", params, "Plugin parameter key=value");
  CLI11_PARSE(app, argc, argv);

  for ( const auto &e : extents )
  {
    auto c = e.find(':');
    if ( c == std::string::npos )
    {
      spdlog::error("mcas-ado: bad extent '{}'", e);
      return 2;
    }
    o.extents.push_back({std::stoull(e.substr(0, c)), std::stoull(e.substr(c + 1))});
  }
  for ( const auto &p : params )
  {
    auto eq = p.find('=');
    o.params[p.substr(0, eq)] = eq == std::string::npos ? "" : p.substr(eq + 1);
  }

  plugins::register_builtins();
  return ado::run_ado_process(o);
}
